//! Closed-form analytics of the superframe-based slotted CSMA/CA protocol.

mod chain;
mod energy;
mod frame;
mod sufficiency;
mod timing;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

pub use chain::{residuals, solve_chain, solve_chain_from, ChainSolution};
pub use energy::{energy_per_node_sf, EnergyBreakdown, EnergyParams};
pub use frame::{frame_stats, FrameStats};
pub use sufficiency::{
    binomial_pmf, mix_participation, prob_k_frames, prob_succ_given_frames, q_function,
    sf_success_distribution, sufficiency_profile, FrameCountModel, FrameTimeline, SufficiencyModel,
    SuffixValues, SuperframeModel,
};
pub use timing::MacTiming;

use crate::{Error, Result};

/// MAC decision variables of one reporting interval and the resulting delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacConfig {
    pub k_tau: u32,
    /// Beacon order of each superframe, `k_tau` entries.
    pub bo: Vec<u32>,
    /// Participation probability of each node.
    pub p_s: f64,
    /// `sum_i SF_0 * 2^{BO_i}` in slots.
    pub delay: u64,
}

impl MacConfig {
    pub fn new(bo: Vec<u32>, p_s: f64, timing: &MacTiming) -> Result<Self> {
        if bo.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one superframe is required".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p_s) {
            return Err(Error::InvalidParameter(format!(
                "p_s = {p_s} outside [0, 1]"
            )));
        }
        if let Some(&b) = bo.iter().find(|&&b| b > timing.bo_max) {
            return Err(Error::InvalidParameter(format!(
                "beacon order {b} exceeds bo_max {}",
                timing.bo_max
            )));
        }
        Ok(Self {
            k_tau: bo.len() as u32,
            delay: timing.delay(&bo),
            bo,
            p_s,
        })
    }

    /// Uniform beacon order over `k_tau` superframes.
    pub fn uniform(k_tau: u32, bo: u32, p_s: f64, timing: &MacTiming) -> Result<Self> {
        Self::new(vec![bo; k_tau as usize], p_s, timing)
    }

    pub fn sf_lens(&self, timing: &MacTiming) -> Vec<u32> {
        self.bo.iter().map(|&b| timing.sf_len(b)).collect()
    }
}

/// Everything the analytics know about one `(h, SF)` pair.
#[derive(Debug, Clone)]
pub struct SuperframeAnalysis {
    /// `None` when the superframe is too short for any exchange.
    pub chain: Option<ChainSolution>,
    pub stats: Option<FrameStats>,
    pub energy: EnergyBreakdown,
    pub success_distribution: Arc<Vec<f64>>,
}

/// Analytic model with a memo of per-`(h, SF)` solutions.
///
/// The memo is read-mostly and shared across threads; a miss computes the
/// entry outside the lock and the first writer wins.
#[derive(Debug)]
pub struct MacAnalytics {
    timing: MacTiming,
    energy: EnergyParams,
    model: SufficiencyModel,
    cache: RwLock<HashMap<(u32, u32), Arc<SuperframeAnalysis>>>,
}

impl Clone for MacAnalytics {
    fn clone(&self) -> Self {
        Self::with_model(self.timing, self.energy, self.model)
    }
}

impl MacAnalytics {
    pub fn new(timing: MacTiming) -> Self {
        Self::with_model(timing, EnergyParams::default(), SufficiencyModel::default())
    }

    pub fn with_model(timing: MacTiming, energy: EnergyParams, model: SufficiencyModel) -> Self {
        Self {
            timing,
            energy,
            model,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn timing(&self) -> &MacTiming {
        &self.timing
    }

    pub fn energy_params(&self) -> &EnergyParams {
        &self.energy
    }

    pub fn model(&self) -> &SufficiencyModel {
        &self.model
    }

    pub fn superframe(&self, h: u32, sf_len: u32) -> Result<Arc<SuperframeAnalysis>> {
        if let Some(hit) = self
            .cache
            .read()
            .expect("analytics cache poisoned")
            .get(&(h, sf_len))
        {
            return Ok(Arc::clone(hit));
        }
        let entry = Arc::new(self.analyse(h, sf_len)?);
        let mut w = self.cache.write().expect("analytics cache poisoned");
        Ok(Arc::clone(w.entry((h, sf_len)).or_insert(entry)))
    }

    fn analyse(&self, h: u32, sf_len: u32) -> Result<SuperframeAnalysis> {
        let t = &self.timing;
        if h == 0 || sf_len < t.l_s() + 2 {
            let mut dist = vec![0.0; h as usize + 1];
            dist[0] = 1.0;
            // contenders can only wait for the next superframe
            let idle = if h == 0 { 0.0 } else { self.energy.e_idle };
            return Ok(SuperframeAnalysis {
                chain: None,
                stats: None,
                energy: EnergyBreakdown {
                    deference: idle,
                    total: idle,
                    ..Default::default()
                },
                success_distribution: Arc::new(dist),
            });
        }
        let chain = solve_chain(h, sf_len, t)?;
        let stats = frame_stats(&chain, t);
        let energy = energy_per_node_sf(&chain, &stats, t, &self.energy);
        let dist = sf_success_distribution(h, sf_len, &stats, &self.model);
        Ok(SuperframeAnalysis {
            chain: Some(chain),
            stats: Some(stats),
            energy,
            success_distribution: Arc::new(dist),
        })
    }

    /// `P(K_succ >= m_s | h)` for every `h` in `0..=n_s`, for a beacon-order sequence.
    pub fn sufficiency_profile(&self, n_s: u32, m_s: u32, bo: &[u32]) -> Result<Vec<f64>> {
        let sfs: Vec<u32> = bo.iter().map(|&b| self.timing.sf_len(b)).collect();
        sufficiency_profile(self, n_s, m_s, &sfs)
    }

    /// `Pr{K_succ >= m_S}` for configuration `cfg` with `n_s` nodes.
    pub fn prob_sufficient(&self, cfg: &MacConfig, n_s: u32, m_s: u32) -> Result<f64> {
        if m_s > n_s {
            return Err(Error::InvalidParameter(format!(
                "m_S = {m_s} exceeds n_S = {n_s}"
            )));
        }
        if m_s == 0 {
            return Ok(1.0);
        }
        let profile = self.sufficiency_profile(n_s, m_s, &cfg.bo)?;
        Ok(mix_participation(&profile, cfg.p_s))
    }

    /// Expected reporting energy of one interval (microjoules), summing
    /// `h_i` times the per-node superframe energy over the outcomes with
    /// at least `m_s` successes.
    pub fn expected_energy_ri(&self, cfg: &MacConfig, n_s: u32, m_s: u32) -> Result<f64> {
        if m_s > n_s {
            return Err(Error::InvalidParameter(format!(
                "m_S = {m_s} exceeds n_S = {n_s}"
            )));
        }
        let sfs = cfg.sf_lens(&self.timing);
        let mut total = 0.0;
        for h in 1..=n_s {
            let w = binomial_pmf(n_s, h, cfg.p_s);
            if w == 0.0 {
                continue;
            }
            total += w * sufficiency::run_dp(self, h, m_s, &sfs, true)?.1;
        }
        Ok(total)
    }

    /// Energy of one data field: `m_T` reported intervals.
    pub fn expected_energy_field(
        &self,
        cfg: &MacConfig,
        n_s: u32,
        m_s: u32,
        m_t: u32,
    ) -> Result<f64> {
        Ok(f64::from(m_t) * self.expected_energy_ri(cfg, n_s, m_s)?)
    }
}

impl SuperframeModel for MacAnalytics {
    fn success_distribution(&self, contenders: u32, sf_len: u32) -> Result<Arc<Vec<f64>>> {
        Ok(Arc::clone(
            &self.superframe(contenders, sf_len)?.success_distribution,
        ))
    }

    fn node_energy(&self, contenders: u32, sf_len: u32) -> Result<f64> {
        Ok(self.superframe(contenders, sf_len)?.energy.total * f64::from(sf_len))
    }
}
