use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::series::{Ar1Model, Harmonic, HarmonicModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicFit {
    pub model: HarmonicModel,
    /// BIC for 0, 1, ... candidate harmonics.
    pub bic: Vec<f64>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ar1Fit {
    pub model: Ar1Model,
    /// Intervals whose estimate was clipped into the stationary range.
    pub clipped: Vec<usize>,
    /// Some interval had no variation to regress on; its coefficient is 0.
    pub degenerate: bool,
}

const PHI_CLIP: f64 = 0.999;

fn design(n: usize, period: u32, ks: &[u32]) -> DMatrix<f64> {
    let p = period as usize;
    let cols: usize = 1 + ks
        .iter()
        .map(|&k| if 2 * k == period { 1 } else { 2 })
        .sum::<usize>();
    let mut d = DMatrix::zeros(n, cols);
    for t in 0..n {
        d[(t, 0)] = 1.0;
        let mut c = 1;
        for &k in ks {
            let x = 2.0 * PI * ((k as usize * (t % p)) % p) as f64 / p as f64;
            if 2 * k != period {
                d[(t, c)] = x.sin();
                c += 1;
            }
            d[(t, c)] = x.cos();
            c += 1;
        }
    }
    d
}

fn ols(d: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let qr = d.clone().qr();
    let rhs = qr.q().transpose() * y;
    qr.r().solve_upper_triangular(&rhs)
}

/// OLS harmonic regression with the number of harmonics chosen by BIC.
///
/// Candidate frequencies are ranked by their single-frequency amplitude;
/// models with the top 0..=`max_harmonics` candidates are compared.
pub fn fit_harmonics(series: &[f64], max_harmonics: usize, period: u32) -> Result<HarmonicFit> {
    let n = series.len();
    if period == 0 {
        return Err(Error::InvalidParameter("period must be > 0".into()));
    }
    if n < period as usize {
        return Err(Error::SeriesTooShort {
            len: n,
            required: period as usize,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "series contains non-finite values".into(),
        ));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let p = period as usize;
    let mut ranked: Vec<(u32, f64)> = (1..=period / 2)
        .map(|k| {
            let (mut s, mut c) = (0.0, 0.0);
            for (t, &x) in series.iter().enumerate() {
                let a = 2.0 * PI * ((k as usize * (t % p)) % p) as f64 / p as f64;
                s += (x - mean) * a.sin();
                c += (x - mean) * a.cos();
            }
            (k, s.hypot(c))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let y = DVector::from_column_slice(series);
    let scale = series
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let floor = n as f64 * (1e-10 * scale).powi(2);
    let mut best: Option<(f64, Vec<u32>, DVector<f64>, DVector<f64>)> = None;
    let mut bic = Vec::new();
    for m in 0..=max_harmonics.min(ranked.len()) {
        let mut ks: Vec<u32> = ranked[..m].iter().map(|r| r.0).collect();
        ks.sort_unstable();
        let d = design(n, period, &ks);
        if d.ncols() > n {
            break;
        }
        let Some(beta) = ols(&d, &y) else { break };
        let resid = &y - &d * &beta;
        let rss = resid.norm_squared().max(floor);
        let b = n as f64 * (rss / n as f64).ln() + d.ncols() as f64 * (n as f64).ln();
        bic.push(b);
        if best.as_ref().map_or(true, |bb| b < bb.0) {
            best = Some((b, ks, beta, resid));
        }
    }
    let (_, ks, beta, resid) = best.expect("zero-harmonic model always fits");
    let mut harmonics = Vec::with_capacity(ks.len());
    let mut c = 1;
    for &k in &ks {
        let re = if 2 * k != period {
            c += 1;
            beta[c - 1]
        } else {
            0.0
        };
        harmonics.push(Harmonic { k, re, im: beta[c] });
        c += 1;
    }
    Ok(HarmonicFit {
        model: HarmonicModel {
            chi0: beta[0],
            harmonics,
            period,
        },
        bic,
        residuals: resid.iter().copied().collect(),
    })
}

/// Per-interval OLS slope `x_{t+1} ~ phi_t x_t`, with `t` grouped modulo `intervals`.
///
/// With `normalize`, the series is standardized first and the model's
/// `noise_scale` restores the original scale.
pub fn fit_ar1(residuals: &[f64], intervals: usize, normalize: bool) -> Result<Ar1Fit> {
    if intervals == 0 {
        return Err(Error::InvalidParameter("intervals must be >= 1".into()));
    }
    let n = residuals.len();
    let mut count = vec![0usize; intervals];
    for t in 0..n.saturating_sub(1) {
        count[t % intervals] += 1;
    }
    if let Some((interval, &c)) = count.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::SparseGroup { interval, count: c });
    }
    let (x, sd): (Vec<f64>, f64) = if normalize {
        let mean = residuals.iter().sum::<f64>() / n as f64;
        let sd = (residuals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if sd == 0.0 {
            return Ok(Ar1Fit {
                model: Ar1Model {
                    phi: vec![0.0; intervals],
                    noise_scale: 0.0,
                },
                clipped: Vec::new(),
                degenerate: true,
            });
        }
        (residuals.iter().map(|v| (v - mean) / sd).collect(), sd)
    } else {
        (residuals.to_vec(), 1.0)
    };
    let mut sxy = vec![0.0; intervals];
    let mut sxx = vec![0.0; intervals];
    for t in 0..n - 1 {
        sxy[t % intervals] += x[t] * x[t + 1];
        sxx[t % intervals] += x[t] * x[t];
    }
    let mut degenerate = false;
    let mut clipped = Vec::new();
    let phi: Vec<f64> = (0..intervals)
        .map(|i| {
            if sxx[i] == 0.0 {
                degenerate = true;
                return 0.0;
            }
            let p = sxy[i] / sxx[i];
            if p.abs() > PHI_CLIP {
                clipped.push(i);
                p.clamp(-PHI_CLIP, PHI_CLIP)
            } else {
                p
            }
        })
        .collect();
    let noise_scale = if normalize {
        let var = phi.iter().map(|p| (1.0 - p) / (1.0 - p * p)).sum::<f64>() / intervals as f64;
        sd / var.sqrt()
    } else {
        1.0
    };
    Ok(Ar1Fit {
        model: Ar1Model { phi, noise_scale },
        clipped,
        degenerate,
    })
}
