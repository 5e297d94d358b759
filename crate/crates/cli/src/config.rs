use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use csmac_core::calibrate::CalibrationSpec;
use csmac_core::cscodec::{ReconstructionConfig, WaveletKind};
use csmac_core::griddata::GeneratorConfig;
use csmac_core::macmodel::{EnergyParams, MacTiming, SufficiencyModel};
use csmac_core::optimizer::{SamplingTable, SearchSpace};
use csmac_core::simulator::SimOptions;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Invalid;

pub const SCHEMA_VERSION: u32 = 1;

/// One document driving every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub field: FieldSection,
    pub timing: MacTiming,
    pub energy: EnergyParams,
    pub model: SufficiencyModel,
    pub calibration: CalibrationSpec,
    pub mac: MacSection,
    pub sweep: SweepSection,
    pub simulation: SimulationSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed: 1,
            field: FieldSection::default(),
            timing: MacTiming::default(),
            energy: EnergyParams::default(),
            model: SufficiencyModel::default(),
            calibration: CalibrationSpec::default(),
            mac: MacSection::default(),
            sweep: SweepSection::default(),
            simulation: SimulationSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldSection {
    pub n_s: usize,
    pub n_t: usize,
    pub generator: GeneratorConfig,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            n_s: 64,
            n_t: 256,
            generator: GeneratorConfig::default(),
        }
    }
}

/// Reference MAC instance of the analysis and simulation commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacSection {
    pub n_s: u32,
    pub m_s: u32,
    pub m_t: u32,
    pub p_suff: f64,
    pub k_tau: u32,
    pub bo: u32,
    pub p_s: f64,
    /// Spacing of the `p_s` axis in probability curves.
    pub p_axis_step: f64,
    /// Beacon order of the `K_tau` sweep.
    pub k_tau_sweep_bo: u32,
    pub search: SearchSpace,
}

impl Default for MacSection {
    fn default() -> Self {
        Self {
            n_s: 64,
            m_s: 16,
            m_t: 180,
            p_suff: 0.9,
            k_tau: 3,
            bo: 4,
            p_s: 0.4,
            p_axis_step: 0.05,
            k_tau_sweep_bo: 3,
            search: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n_s_values: Vec<u32>,
    pub p_err_values: Vec<f64>,
    pub target_delays: Vec<u64>,
    pub n_total_values: Vec<u32>,
    /// `(n_S^TDMA, n_S^CSMA-CS)` used by the channel-count tables.
    pub group_sizes: [u32; 2],
    pub m_t: u32,
    pub n_t: u32,
    pub partial_bo: u32,
    pub partial_p_s: f64,
    pub sampling: SamplingTable,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_s_values: vec![32, 48, 64, 80, 96],
            p_err_values: vec![0.02, 0.05, 0.1, 0.15, 0.2],
            target_delays: vec![400, 750],
            n_total_values: vec![1024, 2048, 4096, 8192],
            group_sizes: [65, 96],
            m_t: 151,
            n_t: 256,
            partial_bo: 3,
            partial_p_s: 0.45,
            sampling: SamplingTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub options: SimOptions,
    /// Reporting intervals per point of the empirical probability curve.
    pub intervals_per_point: usize,
    /// Superframes per contender count in the chain comparison.
    pub superframes: u64,
    pub contenders: Vec<u32>,
    pub campaign: CampaignSection,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            options: SimOptions::default(),
            intervals_per_point: 10_000,
            superframes: 100_000,
            contenders: vec![2, 5, 10],
            campaign: CampaignSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSection {
    /// Intervals simulated; the reconstruction window is `field.n_t`.
    pub length: usize,
    pub stride: Option<usize>,
    pub wavelet: WaveletKind,
    pub recon: ReconstructionConfig,
}

impl Default for CampaignSection {
    fn default() -> Self {
        Self {
            length: 512,
            stride: None,
            wavelet: WaveletKind::Haar,
            recon: ReconstructionConfig {
                tolerance: 1e-5,
                max_iterations: 400,
                ..Default::default()
            },
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!(Invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let f = &self.field;
        if f.n_s == 0 || f.n_t == 0 {
            bail!(Invalid("field.n_s and field.n_t must be >= 1".into()));
        }
        f.generator.validate().context("field.generator")?;
        self.timing.validate().context("timing")?;
        self.calibration.validate().context("calibration")?;
        self.calibration
            .recon
            .validate()
            .context("calibration.recon")?;
        let m = &self.mac;
        if m.m_s > m.n_s || m.n_s == 0 {
            bail!(Invalid(format!(
                "mac: need 0 < n_s and m_s <= n_s (got n_s {}, m_s {})",
                m.n_s, m.m_s
            )));
        }
        if !(m.p_suff > 0.0 && m.p_suff < 1.0) || !(0.0..=1.0).contains(&m.p_s) {
            bail!(Invalid(
                "mac: p_suff must lie in (0, 1) and p_s in [0, 1]".into()
            ));
        }
        if !(m.p_axis_step > 0.0 && m.p_axis_step <= 1.0) {
            bail!(Invalid("mac.p_axis_step must lie in (0, 1]".into()));
        }
        if m.k_tau == 0 || m.k_tau > self.timing.k_tau_max || m.bo > self.timing.bo_max {
            bail!(Invalid("mac: k_tau or bo outside the timing bounds".into()));
        }
        let s = &self.sweep;
        s.sampling.validate().context("sweep.sampling")?;
        if s.group_sizes.contains(&0) || s.n_t == 0 || s.m_t > s.n_t {
            bail!(Invalid(
                "sweep: group sizes and n_t must be >= 1 with m_t <= n_t".into()
            ));
        }
        if s.p_err_values.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            bail!(Invalid("sweep.p_err_values must lie in (0, 1)".into()));
        }
        self.simulation
            .campaign
            .recon
            .validate()
            .context("simulation.campaign.recon")?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Reads `path` (defaults when absent), applies `KEY=VALUE` overrides and validates.
pub fn load(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<ScenarioConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<ScenarioConfig>(&text)
                .map_err(|e| anyhow!(Invalid(format!("{}: {e}", p.display()))))?
        }
        None => ScenarioConfig::default(),
    };
    if !overrides.is_empty() {
        let mut doc = toml::Table::try_from(&cfg).context("re-encoding configuration")?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        cfg = toml::Value::Table(doc)
            .try_into()
            .map_err(|e| anyhow!(Invalid(format!("after overrides: {e}"))))?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Sets a dotted key; the value is read as a TOML literal, else as a string.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!(Invalid(format!("override '{spec}' is not KEY=VALUE"))))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!(Invalid(format!("override key '{key}' is malformed")));
    }
    let mut table = doc;
    for p in &parts[..parts.len() - 1] {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!(Invalid(format!("override '{key}': '{p}' is not a section"))))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
