use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from;
use crate::{Error, Result};

/// One trigonometric term `re * sin(2 pi k t / P) + im * cos(2 pi k t / P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: u32,
    pub re: f64,
    pub im: f64,
}

impl Harmonic {
    pub fn amplitude(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

/// Deterministic daily profile: a constant plus harmonics of the day length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicModel {
    pub chi0: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
    /// Samples per day.
    #[serde(default = "default_period")]
    pub period: u32,
}

fn default_period() -> u32 {
    288
}

impl HarmonicModel {
    pub fn constant(chi0: f64) -> Self {
        Self {
            chi0,
            harmonics: Vec::new(),
            period: default_period(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || !self.chi0.is_finite() {
            return Err(Error::InvalidParameter(
                "harmonic model needs period > 0 and finite chi0".into(),
            ));
        }
        for h in &self.harmonics {
            if h.k == 0 || 2 * h.k > self.period || !h.re.is_finite() || !h.im.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "harmonic k = {} outside [1, {}] or non-finite coefficients",
                    h.k,
                    self.period / 2
                )));
            }
        }
        Ok(())
    }

    /// Number of retained harmonics `m_h`.
    pub fn order(&self) -> usize {
        self.harmonics.len()
    }

    pub fn value(&self, t: u64) -> f64 {
        let p = self.period as u64;
        self.harmonics.iter().fold(self.chi0, |acc, h| {
            let x = 2.0 * PI * ((h.k as u64 * (t % p)) % p) as f64 / p as f64;
            acc + h.re * x.sin() + h.im * x.cos()
        })
    }
}

/// Stochastic component `X_{t+1} = phi_t X_t + U_t`, `Var U_t = 1 - phi_t`.
///
/// `phi` is indexed by interval of day (`t mod phi.len()`); a single entry is
/// a time-invariant coefficient. The recursion runs on the normalized scale
/// and is multiplied by `noise_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ar1Model {
    pub phi: Vec<f64>,
    #[serde(default = "one")]
    pub noise_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Ar1Model {
    pub fn constant(phi: f64) -> Self {
        Self {
            phi: vec![phi],
            noise_scale: 1.0,
        }
    }

    /// Deterministic process: zero stochastic component.
    pub fn silent() -> Self {
        Self {
            phi: vec![0.0],
            noise_scale: 0.0,
        }
    }

    pub fn with_scale(mut self, noise_scale: f64) -> Self {
        self.noise_scale = noise_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi.is_empty() {
            return Err(Error::InvalidParameter(
                "AR(1) model needs at least one coefficient".into(),
            ));
        }
        if let Some((interval, &phi)) = self.phi.iter().enumerate().find(|(_, p)| !(p.abs() < 1.0))
        {
            return Err(Error::NonStationary { interval, phi });
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::InvalidParameter(
                "noise scale must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn phi_at(&self, t: u64) -> f64 {
        self.phi[(t % self.phi.len() as u64) as usize]
    }

    /// Standard deviation of `U_t` on the output scale.
    pub fn innovation_sd(&self, t: u64) -> f64 {
        self.noise_scale * (1.0 - self.phi_at(t)).sqrt()
    }

    /// Runs the recursion over `innovations` (unit-variance draws), starting at time `t0`
    /// from state `x0` (normalized scale). Returns values on the output scale.
    pub fn filter(&self, innovations: &[f64], t0: u64, x0: f64) -> Vec<f64> {
        let mut x = x0;
        innovations
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let t = t0 + i as u64;
                let out = x * self.noise_scale;
                x = self.phi_at(t) * x + (1.0 - self.phi_at(t)).sqrt() * e;
                out
            })
            .collect()
    }

    /// Stationary standard deviation entering time `t`, normalized scale.
    pub(crate) fn stationary_sd(&self, t: u64) -> f64 {
        let phi = self.phi_at(t.wrapping_sub(1));
        ((1.0 - phi) / (1.0 - phi * phi)).sqrt()
    }
}

/// A deterministic profile plus an AR(1) stochastic component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesModel {
    pub harmonic: HarmonicModel,
    pub ar1: Ar1Model,
}

impl SeriesModel {
    pub fn validate(&self) -> Result<()> {
        self.harmonic.validate()?;
        self.ar1.validate()
    }

    /// Series from unit-variance `innovations`, starting at time-of-day index `t0`.
    /// The first draw sets the stationary initial state, so the output is one shorter.
    pub(crate) fn realize(&self, innovations: &[f64], t0: u64) -> Vec<f64> {
        let Some((&e0, rest)) = innovations.split_first() else {
            return Vec::new();
        };
        let x0 = self.ar1.stationary_sd(t0) * e0;
        let s = self.ar1.filter(rest, t0, x0);
        s.into_iter()
            .enumerate()
            .map(|(i, v)| self.harmonic.value(t0 + i as u64) + v)
            .collect()
    }
}

/// `X_t = X^d_t + X^s_t` for `t = 0..length`, reproducible for a fixed seed.
pub fn gen_series(h: &HarmonicModel, a: &Ar1Model, length: usize, seed: u64) -> Result<Vec<f64>> {
    if length == 0 {
        return Err(Error::InvalidParameter("series length must be >= 1".into()));
    }
    h.validate()?;
    a.validate()?;
    let mut rng = rng_from(seed, &[0x5e]);
    let innovations: Vec<f64> = (0..=length).map(|_| rng.sample(StandardNormal)).collect();
    let model = SeriesModel {
        harmonic: h.clone(),
        ar1: a.clone(),
    };
    Ok(model.realize(&innovations, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let c0: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        c1 / c0
    }

    #[test]
    fn white_noise_around_constant() {
        let x = gen_series(
            &HarmonicModel::constant(5.0),
            &Ar1Model::constant(0.0),
            100_000,
            1,
        )
        .unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 5.0).abs() < 0.02);
        assert!((var - 1.0).abs() < 0.02);
        assert!(lag1(&x).abs() < 0.02);
    }

    #[test]
    fn noiseless_single_harmonic_is_a_sinusoid() {
        let h = HarmonicModel {
            chi0: 0.0,
            harmonics: vec![Harmonic {
                k: 1,
                re: 1.0,
                im: 0.0,
            }],
            period: 288,
        };
        let x = gen_series(&h, &Ar1Model::silent(), 600, 3).unwrap();
        for (t, v) in x.iter().enumerate() {
            assert!((v - (2.0 * PI * t as f64 / 288.0).sin()).abs() < 1e-12);
        }
        assert!((x[0] - x[288]).abs() < 1e-12);
    }

    #[test]
    fn ar1_lag_one_autocorrelation() {
        let x = gen_series(
            &HarmonicModel::constant(0.0),
            &Ar1Model::constant(0.9),
            100_000,
            5,
        )
        .unwrap();
        assert!((lag1(&x) - 0.9).abs() < 0.02);
    }

    #[test]
    fn stationarity_enforced() {
        let bad = Ar1Model {
            phi: vec![0.2, 1.0],
            noise_scale: 1.0,
        };
        assert!(matches!(
            gen_series(&HarmonicModel::constant(0.0), &bad, 10, 0),
            Err(Error::NonStationary { interval: 1, .. })
        ));
        assert!(gen_series(
            &HarmonicModel::constant(0.0),
            &Ar1Model::constant(-1.2),
            10,
            0
        )
        .is_err());
    }

    #[test]
    fn rejects_out_of_range_harmonic_and_zero_length() {
        let h = HarmonicModel {
            chi0: 0.0,
            harmonics: vec![Harmonic {
                k: 145,
                re: 1.0,
                im: 0.0,
            }],
            period: 288,
        };
        assert!(h.validate().is_err());
        assert!(gen_series(
            &HarmonicModel::constant(0.0),
            &Ar1Model::constant(0.0),
            0,
            0
        )
        .is_err());
    }

    #[test]
    fn reproducible() {
        let a = Ar1Model::constant(0.5);
        let h = HarmonicModel::constant(1.0);
        assert_eq!(
            gen_series(&h, &a, 50, 9).unwrap(),
            gen_series(&h, &a, 50, 9).unwrap()
        );
        assert_ne!(
            gen_series(&h, &a, 50, 9).unwrap(),
            gen_series(&h, &a, 50, 10).unwrap()
        );
    }
}
