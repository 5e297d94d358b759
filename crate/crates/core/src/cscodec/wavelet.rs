//! Orthonormal 1D wavelet transforms and their separable 2D use.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletKind {
    #[default]
    Haar,
    /// Periodized Daubechies wavelet with four taps.
    Daubechies4,
    /// Canonical basis: no transform along this axis.
    Identity,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

fn d4_filters() -> ([f64; 4], [f64; 4]) {
    let s = 4.0 * std::f64::consts::SQRT_2;
    let h = [
        (1.0 + SQRT3) / s,
        (3.0 + SQRT3) / s,
        (3.0 - SQRT3) / s,
        (1.0 - SQRT3) / s,
    ];
    let g = [h[3], -h[2], h[1], -h[0]];
    (h, g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    pub dimension: usize,
    pub kind: WaveletKind,
    /// Synthesis matrix: column `k` is the `k`-th atom, so `x = matrix * a`.
    pub matrix: DMatrix<f64>,
}

impl WaveletBasis {
    pub fn new(kind: WaveletKind, dimension: usize) -> Result<Self> {
        if dimension == 0 || !dimension.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "basis size {dimension} is not a power of two"
            )));
        }
        let mut matrix = DMatrix::zeros(dimension, dimension);
        let mut buf = vec![0.0; dimension];
        let mut scratch = vec![0.0; dimension];
        for k in 0..dimension {
            buf.iter_mut().for_each(|v| *v = 0.0);
            buf[k] = 1.0;
            inverse_1d(kind, &mut buf, &mut scratch);
            matrix.set_column(k, &nalgebra::DVector::from_column_slice(&buf));
        }
        Ok(Self {
            dimension,
            kind,
            matrix,
        })
    }

    pub fn haar(dimension: usize) -> Result<Self> {
        Self::new(WaveletKind::Haar, dimension)
    }

    /// Coefficients of `x`: `matrix^T x`, in place.
    pub fn forward(&self, x: &mut [f64], scratch: &mut [f64]) {
        forward_1d(self.kind, x, scratch);
    }

    /// Signal with coefficients `a`: `matrix a`, in place.
    pub fn inverse(&self, a: &mut [f64], scratch: &mut [f64]) {
        inverse_1d(self.kind, a, scratch);
    }
}

pub(crate) fn forward_1d(kind: WaveletKind, x: &mut [f64], tmp: &mut [f64]) {
    let n = x.len();
    match kind {
        WaveletKind::Identity => {}
        WaveletKind::Haar => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let mut len = n;
            while len >= 2 {
                let half = len / 2;
                for k in 0..half {
                    let (a, b) = (x[2 * k], x[2 * k + 1]);
                    tmp[k] = (a + b) * r;
                    tmp[half + k] = (a - b) * r;
                }
                x[..len].copy_from_slice(&tmp[..len]);
                len = half;
            }
        }
        WaveletKind::Daubechies4 => {
            let (h, g) = d4_filters();
            let mut len = n;
            while len >= 4 {
                let half = len / 2;
                for k in 0..half {
                    let (mut a, mut d) = (0.0, 0.0);
                    for m in 0..4 {
                        let v = x[(2 * k + m) % len];
                        a += h[m] * v;
                        d += g[m] * v;
                    }
                    tmp[k] = a;
                    tmp[half + k] = d;
                }
                x[..len].copy_from_slice(&tmp[..len]);
                len = half;
            }
        }
    }
}

pub(crate) fn inverse_1d(kind: WaveletKind, a: &mut [f64], tmp: &mut [f64]) {
    let n = a.len();
    match kind {
        WaveletKind::Identity => {}
        WaveletKind::Haar => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            let mut len = 2;
            while len <= n {
                let half = len / 2;
                for k in 0..half {
                    let (s, d) = (a[k], a[half + k]);
                    tmp[2 * k] = (s + d) * r;
                    tmp[2 * k + 1] = (s - d) * r;
                }
                a[..len].copy_from_slice(&tmp[..len]);
                len *= 2;
            }
        }
        WaveletKind::Daubechies4 => {
            let (h, g) = d4_filters();
            let mut len = 4;
            while len <= n {
                let half = len / 2;
                tmp[..len].iter_mut().for_each(|v| *v = 0.0);
                for k in 0..half {
                    let (s, d) = (a[k], a[half + k]);
                    for m in 0..4 {
                        tmp[(2 * k + m) % len] += h[m] * s + g[m] * d;
                    }
                }
                a[..len].copy_from_slice(&tmp[..len]);
                len *= 2;
            }
        }
    }
}

fn check(z: &DMatrix<f64>, bs: &WaveletBasis, bt: &WaveletBasis) -> Result<()> {
    if z.nrows() != bs.dimension || z.ncols() != bt.dimension {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} field against {}x{} bases",
            z.nrows(),
            z.ncols(),
            bs.dimension,
            bt.dimension
        )));
    }
    Ok(())
}

/// Periodic two-channel filter bank `(h, g, taps)`; `None` for the identity.
fn bank(kind: WaveletKind) -> Option<([f64; 4], [f64; 4], usize)> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        WaveletKind::Identity => None,
        WaveletKind::Haar => Some(([r, r, 0.0, 0.0], [r, -r, 0.0, 0.0], 2)),
        WaveletKind::Daubechies4 => {
            let (h, g) = d4_filters();
            Some((h, g, 4))
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

/// Transform along every row of the column-major `m`, one column at a time.
fn rows(m: &mut DMatrix<f64>, kind: WaveletKind, inverse: bool) {
    let Some((h, g, taps)) = bank(kind) else {
        return;
    };
    let (r, n) = m.shape();
    let mut buf = vec![0.0; r * n];
    let mut len = if inverse { taps } else { n };
    while len >= taps && len <= n {
        let half = len / 2;
        let src = m.as_mut_slice();
        let dst = &mut buf[..len * r];
        dst.fill(0.0);
        let col = |c: usize| c * r..(c + 1) * r;
        for k in 0..half {
            for t in 0..taps {
                let c = (2 * k + t) % len;
                if inverse {
                    let (lo, hi) = src.split_at(half * r);
                    let (s, d) = (&lo[col(k)], &hi[col(k)]);
                    let out = &mut dst[col(c)];
                    axpy(out, h[t], s);
                    axpy(out, g[t], d);
                } else {
                    let x = &src[col(c)];
                    let (lo, hi) = dst.split_at_mut(half * r);
                    axpy(&mut lo[col(k)], h[t], x);
                    axpy(&mut hi[col(k)], g[t], x);
                }
            }
        }
        src[..len * r].copy_from_slice(dst);
        len = if inverse { len * 2 } else { half };
    }
}

fn transform(m: &mut DMatrix<f64>, ks: WaveletKind, kt: WaveletKind, inverse: bool) {
    if ks != WaveletKind::Identity {
        let mut tmp = vec![0.0; m.nrows()];
        for j in 0..m.ncols() {
            let mut x = m.column_mut(j);
            if inverse {
                inverse_1d(ks, x.as_mut_slice(), &mut tmp);
            } else {
                forward_1d(ks, x.as_mut_slice(), &mut tmp);
            }
        }
    }
    rows(m, kt, inverse);
}

/// Coefficient matrix `A = Psi_S^T Z Psi_T`.
pub fn analyze(z: &DMatrix<f64>, bs: &WaveletBasis, bt: &WaveletBasis) -> Result<DMatrix<f64>> {
    check(z, bs, bt)?;
    let mut a = z.clone();
    analyze_in_place(&mut a, bs.kind, bt.kind);
    Ok(a)
}

/// Field `Z = Psi_S A Psi_T^T`.
pub fn synthesize(a: &DMatrix<f64>, bs: &WaveletBasis, bt: &WaveletBasis) -> Result<DMatrix<f64>> {
    check(a, bs, bt)?;
    let mut z = a.clone();
    synthesize_in_place(&mut z, bs.kind, bt.kind);
    Ok(z)
}

pub(crate) fn analyze_in_place(m: &mut DMatrix<f64>, ks: WaveletKind, kt: WaveletKind) {
    transform(m, ks, kt, false);
}

pub(crate) fn synthesize_in_place(m: &mut DMatrix<f64>, ks: WaveletKind, kt: WaveletKind) {
    transform(m, ks, kt, true);
}
