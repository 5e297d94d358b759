//! Empirical compression calibration: success-probability curves for
//! spatial-only, temporal-only and joint CS, the thresholds where they reach
//! the target, and the `(m_S, m_T)` split.

mod split;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cscodec::{
    mse, observe, reconstruct, reconstruct_masked, EntryDistribution, ReconstructionConfig,
    SamplingPlan, WaveletBasis, WaveletKind,
};
use crate::rng::{derive_seed, rng_from};
use crate::{Error, Result};

pub use split::split;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// Every interval, `m_S` nodes: `M = m_S n_T`, spatial basis only.
    Space,
    /// Every node, `m_T` intervals: `M = n_S m_T`, temporal basis only.
    Time,
    /// `m_S` nodes in each of `m_T` intervals, separable basis.
    Joint,
}

impl CurveMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Space => "space",
            Self::Time => "time",
            Self::Joint => "joint",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

/// How the observed entries are drawn in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleLayout {
    /// Fresh random node subset in every sampled interval (what contention delivers).
    #[default]
    PerBlock,
    /// One node subset shared by all sampled intervals.
    Separable,
    /// Dense random projections with uniform `[0, 1)` entries.
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSpec {
    pub n_s: usize,
    pub n_t: usize,
    pub target_mse: f64,
    pub target_success: f64,
    pub trials: usize,
    /// Total-sample grid; defaults to multiples of `N / 64`.
    pub grid: Option<Vec<usize>>,
    pub seed: u64,
    pub layout: SampleLayout,
    pub wavelet: WaveletKind,
    pub recon: ReconstructionConfig,
    /// Stop a grid point once the target can no longer be met.
    pub early_abort: bool,
    /// Stop the scan at the first point meeting the target.
    pub stop_at_crossing: bool,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            n_s: 128,
            n_t: 128,
            target_mse: 0.05,
            target_success: 0.95,
            trials: 200,
            grid: None,
            seed: 0,
            layout: SampleLayout::PerBlock,
            wavelet: WaveletKind::Haar,
            recon: ReconstructionConfig {
                tolerance: 1e-5,
                max_iterations: 60,
                step: 0.1,
                ..Default::default()
            },
            early_abort: true,
            stop_at_crossing: true,
        }
    }
}

impl CalibrationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 || self.n_t == 0 {
            return Err(Error::InvalidParameter(
                "field dimensions must be >= 1".into(),
            ));
        }
        if !(self.target_mse > 0.0) {
            return Err(Error::InvalidParameter("target_mse must be > 0".into()));
        }
        if !(self.target_success > 0.0 && self.target_success < 1.0) {
            return Err(Error::InvalidParameter(
                "target_success must lie in (0, 1)".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be >= 1".into()));
        }
        if self.grid.as_ref().is_some_and(|g| g.is_empty()) {
            return Err(Error::InvalidParameter("grid must be nonempty".into()));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.n_s * self.n_t
    }

    /// `N / 64` steps (at least 1) up to `N`.
    pub fn default_grid(&self) -> Vec<usize> {
        let n = self.total();
        let step = (n / 64).max(1);
        let mut g: Vec<usize> = (1..).map(|k| k * step).take_while(|&m| m < n).collect();
        g.push(n);
        g
    }

    fn grid_values(&self) -> Vec<usize> {
        self.grid.clone().unwrap_or_else(|| self.default_grid())
    }

    /// Largest tolerable number of failures out of `trials`.
    fn allowed_failures(&self) -> usize {
        ((1.0 - self.target_success) * self.trials as f64 + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Samples actually used, `m_S m_T`.
    pub m: usize,
    pub m_s: usize,
    pub m_t: usize,
    pub success_rate: f64,
    pub trials: usize,
    /// All requested trials ran; otherwise the point was abandoned once the
    /// target became unreachable and `success_rate` covers the trials run.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCurve {
    pub mode: CurveMode,
    pub points: Vec<CurvePoint>,
}

impl SuccessCurve {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "mode",
            "m",
            "m_s",
            "m_t",
            "success_rate",
            "trials",
            "complete",
        ])?;
        for p in &self.points {
            w.write_record([
                self.mode.name().to_string(),
                p.m.to_string(),
                p.m_s.to_string(),
                p.m_t.to_string(),
                p.success_rate.to_string(),
                p.trials.to_string(),
                p.complete.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws a field of the requested shape for a seed.
pub type FieldSource<'a> = dyn Fn(usize, usize, u64) -> Result<DMatrix<f64>> + Sync + 'a;

/// `(m_S, m_T)` for a requested total along a mode's axis.
fn dims_for(spec: &CalibrationSpec, mode: CurveMode, m: usize, ratio: f64) -> (usize, usize) {
    let (n_s, n_t) = (spec.n_s, spec.n_t);
    match mode {
        CurveMode::Space => (m.div_ceil(n_t).min(n_s), n_t),
        CurveMode::Time => (n_s, m.div_ceil(n_s).min(n_t)),
        CurveMode::Joint => {
            if m == 0 {
                return (0, 0);
            }
            let ms = ((m as f64 * ratio).sqrt().round() as usize).clamp(1, n_s);
            (ms, m.div_ceil(ms).min(n_t))
        }
    }
}

fn bases(spec: &CalibrationSpec, mode: CurveMode) -> Result<(WaveletBasis, WaveletBasis)> {
    let (ks, kt) = match mode {
        CurveMode::Space => (spec.wavelet, WaveletKind::Identity),
        CurveMode::Time => (WaveletKind::Identity, spec.wavelet),
        CurveMode::Joint => (spec.wavelet, spec.wavelet),
    };
    Ok((
        WaveletBasis::new(ks, spec.n_s)?,
        WaveletBasis::new(kt, spec.n_t)?,
    ))
}

/// Reconstruction MSE of one trial.
pub fn trial_mse(
    spec: &CalibrationSpec,
    mode: CurveMode,
    z: &DMatrix<f64>,
    m_s: usize,
    m_t: usize,
    sample_seed: u64,
) -> Result<f64> {
    let (bs, bt) = bases(spec, mode)?;
    if m_s == 0 || m_t == 0 {
        return mse(z, &DMatrix::zeros(z.nrows(), z.ncols()));
    }
    let z_hat = match spec.layout {
        SampleLayout::Dense => {
            let plan = SamplingPlan::dense_random(
                spec.n_s,
                spec.n_t,
                m_s,
                m_t,
                EntryDistribution::Uniform01,
                sample_seed,
            )?;
            reconstruct(&observe(z, &plan)?, &plan, &bs, &bt, &spec.recon)?.z_hat
        }
        SampleLayout::Separable => {
            let plan = SamplingPlan::random_subset(spec.n_s, spec.n_t, m_s, m_t, sample_seed)?;
            reconstruct(&observe(z, &plan)?, &plan, &bs, &bt, &spec.recon)?.z_hat
        }
        SampleLayout::PerBlock => {
            let mut rng = rng_from(sample_seed, &[0xb1]);
            let mut samples = Vec::with_capacity(m_s * m_t);
            let mut cols = sample(&mut rng, spec.n_t, m_t).into_vec();
            cols.sort_unstable();
            for j in cols {
                for i in sample(&mut rng, spec.n_s, m_s) {
                    samples.push((i, j, z[(i, j)]));
                }
            }
            reconstruct_masked(&samples, &bs, &bt, &spec.recon)?.z_hat
        }
    };
    mse(z, &z_hat)
}

/// Field seed of trial `t`: shared by every grid point and mode.
pub fn field_seed(spec: &CalibrationSpec, trial: usize) -> u64 {
    derive_seed(spec.seed, &[0xf1e1d, trial as u64])
}

/// Sampling seed of trial `t` at a grid point.
pub fn sample_seed(
    spec: &CalibrationSpec,
    mode: CurveMode,
    m_s: usize,
    m_t: usize,
    trial: usize,
) -> u64 {
    derive_seed(
        spec.seed,
        &[mode.tag(), m_s as u64, m_t as u64, trial as u64],
    )
}

fn evaluate_point(
    spec: &CalibrationSpec,
    mode: CurveMode,
    m_s: usize,
    m_t: usize,
    source: &FieldSource,
) -> Result<CurvePoint> {
    let allowed = spec.allowed_failures();
    let batch = (rayon::current_num_threads() * 2).max(4);
    let (mut ok, mut failed, mut done) = (0usize, 0usize, 0usize);
    while done < spec.trials {
        let end = (done + batch).min(spec.trials);
        let outcomes: Vec<bool> = (done..end)
            .into_par_iter()
            .map(|t| -> Result<bool> {
                let z = source(spec.n_s, spec.n_t, field_seed(spec, t))?;
                if z.shape() != (spec.n_s, spec.n_t) {
                    return Err(Error::DimensionMismatch(format!(
                        "generator produced {}x{}, expected {}x{}",
                        z.nrows(),
                        z.ncols(),
                        spec.n_s,
                        spec.n_t
                    )));
                }
                Ok(trial_mse(
                    spec,
                    mode,
                    &z,
                    m_s,
                    m_t,
                    sample_seed(spec, mode, m_s, m_t, t),
                )? <= spec.target_mse)
            })
            .collect::<Result<_>>()?;
        ok += outcomes.iter().filter(|&&s| s).count();
        failed += outcomes.iter().filter(|&&s| !s).count();
        done = end;
        if spec.early_abort && failed > allowed {
            break;
        }
    }
    Ok(CurvePoint {
        m: m_s * m_t,
        m_s,
        m_t,
        success_rate: ok as f64 / done as f64,
        trials: done,
        complete: done == spec.trials,
    })
}

/// Success curve along one mode's axis; `ratio` is `m_S / m_T` for the joint mode.
pub fn success_curve_with_ratio(
    spec: &CalibrationSpec,
    mode: CurveMode,
    ratio: f64,
    source: &FieldSource,
) -> Result<SuccessCurve> {
    spec.validate()?;
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sampling ratio {ratio} must be positive"
        )));
    }
    let mut dims: Vec<(usize, usize)> = Vec::new();
    for m in spec.grid_values() {
        let d = dims_for(spec, mode, m.min(spec.total()), ratio);
        if dims.last().map_or(true, |&(a, b)| a * b < d.0 * d.1) {
            dims.push(d);
        }
    }
    let mut points = Vec::with_capacity(dims.len());
    for (m_s, m_t) in dims {
        let p = evaluate_point(spec, mode, m_s, m_t, source)?;
        log::debug!(
            "{} m_s={} m_t={} rate={:.3} trials={}",
            mode.name(),
            m_s,
            m_t,
            p.success_rate,
            p.trials
        );
        let hit = p.complete && p.success_rate >= spec.target_success;
        points.push(p);
        if hit && spec.stop_at_crossing {
            break;
        }
    }
    Ok(SuccessCurve { mode, points })
}

/// Success curve with `m_S / m_T = n_S / n_T` on the joint axis.
pub fn success_curve(
    spec: &CalibrationSpec,
    mode: CurveMode,
    source: &FieldSource,
) -> Result<SuccessCurve> {
    success_curve_with_ratio(spec, mode, spec.n_s as f64 / spec.n_t as f64, source)
}

/// Smallest `M` whose rate meets the target (first crossing in grid order).
pub fn threshold(curve: &SuccessCurve, target_success: f64) -> Result<usize> {
    curve
        .points
        .iter()
        .find(|p| p.complete && p.success_rate >= target_success)
        .map(|p| p.m)
        .ok_or_else(|| Error::TargetNotAttained {
            target: target_success,
            max_rate: curve
                .points
                .iter()
                .map(|p| p.success_rate)
                .fold(0.0, f64::max),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub n_s: usize,
    pub n_t: usize,
    pub m_s_thresh: usize,
    pub m_t_thresh: usize,
    pub m_thresh: usize,
    /// `m_S / m_T` prescribed by the one-dimensional thresholds.
    pub ratio: f64,
    pub m_s: usize,
    pub m_t: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub summary: CalibrationSummary,
    pub space: SuccessCurve,
    pub time: SuccessCurve,
    pub joint: SuccessCurve,
}

/// Space and time curves, the prescribed ratio, the joint curve along it, and the split.
pub fn calibrate_full(spec: &CalibrationSpec, source: &FieldSource) -> Result<Calibration> {
    let space = success_curve(spec, CurveMode::Space, source)?;
    let ms_thresh = threshold(&space, spec.target_success)?;
    let time = success_curve(spec, CurveMode::Time, source)?;
    let mt_thresh = threshold(&time, spec.target_success)?;
    let ratio = spec.n_s as f64 / spec.n_t as f64 * ms_thresh as f64 / mt_thresh as f64;
    let joint = success_curve_with_ratio(spec, CurveMode::Joint, ratio, source)?;
    let m_thresh = threshold(&joint, spec.target_success)?;
    let (m_s, m_t) = split(spec.n_s, spec.n_t, ms_thresh, mt_thresh, m_thresh)?;
    Ok(Calibration {
        summary: CalibrationSummary {
            n_s: spec.n_s,
            n_t: spec.n_t,
            m_s_thresh: ms_thresh,
            m_t_thresh: mt_thresh,
            m_thresh,
            ratio,
            m_s,
            m_t,
        },
        space,
        time,
        joint,
    })
}
