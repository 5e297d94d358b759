use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_ri, SimConfig};
use crate::cscodec::{mse, reconstruct_masked, ReconstructionConfig, WaveletBasis, WaveletKind};
use crate::griddata::DataField;
use crate::macmodel::MacConfig;
use crate::rng::{derive_seed, rng_from};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub m_s: u32,
    pub m_t: usize,
    /// Reconstruction window length `n_T`.
    pub n_t: usize,
    pub mac: MacConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub wavelet: WaveletKind,
    #[serde(default)]
    pub recon: ReconstructionConfig,
    /// Distance between reconstructed windows; `n_T` when absent.
    #[serde(default)]
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiRecord {
    pub ri: usize,
    pub participants: u32,
    pub successes: u32,
    /// Fewer than `m_S` reports arrived.
    pub deficient: bool,
    pub delay_used: u64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRecord {
    /// First interval of the window; it covers `start..start + n_T`.
    pub start: usize,
    pub requested: Vec<usize>,
    pub samples: usize,
    pub mse: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignResult {
    pub n_s: usize,
    pub length: usize,
    pub n_t: usize,
    /// One record per requested interval, in time order.
    pub records: Vec<RiRecord>,
    pub windows: Vec<WindowRecord>,
    /// Delivered `(node, interval, value)` samples over the whole campaign.
    pub samples: Vec<(usize, usize, f64)>,
}

impl CampaignResult {
    /// Fraction of requested intervals that delivered at least `m_S` reports.
    pub fn sufficiency_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 1.0;
        }
        self.records.iter().filter(|r| !r.deficient).count() as f64 / self.records.len() as f64
    }

    pub fn deficient(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.deficient)
            .map(|r| r.ri)
            .collect()
    }

    /// Fraction of windows reconstructed with MSE at most `target`.
    pub fn window_success_rate(&self, target: f64) -> f64 {
        if self.windows.is_empty() {
            return 0.0;
        }
        self.windows.iter().filter(|w| w.mse <= target).count() as f64 / self.windows.len() as f64
    }

    pub fn delays(&self) -> Vec<u64> {
        self.records.iter().map(|r| r.delay_used).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }

    /// Samples that fall in `start..start + n_T`, with intervals relative to `start`.
    pub fn window_samples(&self, start: usize) -> Vec<(usize, usize, f64)> {
        self.samples
            .iter()
            .filter(|s| s.1 >= start && s.1 < start + self.n_t)
            .map(|&(i, j, v)| (i, j - start, v))
            .collect()
    }
}

/// Intervals the control center requests: `m_T` random intervals among the
/// first `n_T`, then the current interval whenever the sliding window would
/// otherwise hold fewer than `m_T` requested blocks.
pub fn request_schedule(length: usize, n_t: usize, m_t: usize, seed: u64) -> Result<Vec<usize>> {
    if n_t == 0 || m_t > n_t || length < n_t {
        return Err(Error::InvalidParameter(format!(
            "need 0 < n_T <= length and m_T <= n_T (length {length}, n_T {n_t}, m_T {m_t})"
        )));
    }
    let mut rng = rng_from(seed, &[0xca, 1]);
    let mut req: BTreeSet<usize> = sample(&mut rng, n_t, m_t).into_iter().collect();
    for t in n_t..length {
        if req.range(t + 1 - n_t..t).count() < m_t {
            req.insert(t);
        }
    }
    Ok(req.into_iter().collect())
}

/// Runs a rolling data collection over every interval of `field` and
/// reconstructs windows of `n_T` intervals from the delivered reports.
pub fn run_campaign(field: &DataField, cfg: &CampaignConfig, seed: u64) -> Result<CampaignResult> {
    let z = &field.values;
    let (n_s, length) = z.shape();
    if (cfg.m_s as usize) > n_s {
        return Err(Error::InvalidParameter(format!(
            "m_S = {} exceeds n_S = {n_s}",
            cfg.m_s
        )));
    }
    let schedule = request_schedule(length, cfg.n_t, cfg.m_t, seed)?;
    let stride = cfg.stride.unwrap_or(cfg.n_t);
    if stride == 0 {
        return Err(Error::InvalidParameter("window stride must be >= 1".into()));
    }
    let bs = WaveletBasis::new(cfg.wavelet, n_s)?;
    let bt = WaveletBasis::new(cfg.wavelet, cfg.n_t)?;

    let outcomes = schedule
        .par_iter()
        .map(|&t| {
            run_ri(
                n_s as u32,
                cfg.m_s,
                &cfg.mac,
                &cfg.sim,
                derive_seed(seed, &[0xca, 2, t as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(outcomes.len());
    let mut samples = Vec::new();
    for (&t, out) in schedule.iter().zip(&outcomes) {
        records.push(RiRecord {
            ri: t,
            participants: out.participants,
            successes: out.successes,
            deficient: !out.sufficient,
            delay_used: out.delay_used,
            energy: out.energy,
        });
        let mut nodes = out.delivered.clone();
        nodes.sort_unstable();
        samples.extend(nodes.into_iter().map(|i| (i, t, z[(i, t)])));
    }

    let mut result = CampaignResult {
        n_s,
        length,
        n_t: cfg.n_t,
        records,
        windows: Vec::new(),
        samples,
    };
    let starts: Vec<usize> = (0..=length - cfg.n_t).step_by(stride).collect();
    result.windows = starts
        .par_iter()
        .map(|&start| {
            let obs = result.window_samples(start);
            let rec = reconstruct_masked(&obs, &bs, &bt, &cfg.recon)?;
            let truth: DMatrix<f64> = z.columns(start, cfg.n_t).into_owned();
            let requested = schedule
                .iter()
                .copied()
                .filter(|&t| t >= start && t < start + cfg.n_t)
                .collect();
            Ok(WindowRecord {
                start,
                requested,
                samples: obs.len(),
                mse: mse(&truth, &rec.z_hat)?,
                converged: rec.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(result)
}
