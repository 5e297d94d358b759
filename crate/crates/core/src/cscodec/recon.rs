//! Sparse recovery of the coefficient matrix from separable or masked observations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::plan::{vectorize, SamplingMode, SamplingPlan};
use super::wavelet::{analyze_in_place, synthesize_in_place, WaveletBasis};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// `min ||vec(A)||_1` subject to `||y - M vec(A)||_2 <= epsilon`, by Douglas-Rachford splitting.
    #[default]
    BasisPursuitDenoise,
    /// Orthogonal matching pursuit over Kronecker atoms.
    GreedyPursuit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    /// Residual bound on `||vec(Y) - M vec(A)||_2`.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub solver: Solver,
    /// Relative change at which the splitting iteration stops.
    pub tolerance: f64,
    /// Re-fit by least squares on the recovered support when it has at most this many atoms.
    pub polish_limit: usize,
    /// Coefficients below this fraction of the largest magnitude do not count toward sparsity.
    pub sparsity_threshold: f64,
    /// Soft-threshold level as a multiple of the largest least-norm coefficient.
    pub step: f64,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            max_iterations: 2000,
            solver: Solver::BasisPursuitDenoise,
            tolerance: 1e-7,
            polish_limit: 256,
            sparsity_threshold: 1e-6,
            step: 1.0,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0)
            || self.max_iterations == 0
            || !(self.tolerance > 0.0)
            || !(self.step > 0.0)
        {
            return Err(Error::InvalidParameter(
                "epsilon >= 0, max_iterations >= 1, tolerance > 0 and step > 0 required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub z_hat: DMatrix<f64>,
    pub coeffs: DMatrix<f64>,
    pub residual_norm: f64,
    pub sparsity: usize,
    pub iterations: usize,
    /// Residual bound met within the iteration budget.
    pub converged: bool,
}

/// Measurement operator acting on coefficient matrices.
trait Sensing {
    fn shape(&self) -> (usize, usize);
    fn measurements(&self) -> usize;
    fn apply(&self, a: &DMatrix<f64>) -> Vec<f64>;
    fn adjoint(&self, r: &[f64]) -> DMatrix<f64>;
    /// Euclidean projection onto `{a : ||apply(a) - y|| <= eps}`.
    fn project(&self, a: &mut DMatrix<f64>, y: &[f64], eps: f64);
    fn column(&self, i: usize, j: usize) -> Vec<f64>;
    fn column_norms(&self) -> DMatrix<f64>;
}

/// Entries of the synthesized field at arbitrary (node, interval) positions.
/// Rows of this operator are orthonormal because synthesis is orthogonal.
struct MaskOp<'a> {
    bs: &'a WaveletBasis,
    bt: &'a WaveletBasis,
    entries: Vec<(usize, usize)>,
}

impl Sensing for MaskOp<'_> {
    fn shape(&self) -> (usize, usize) {
        (self.bs.dimension, self.bt.dimension)
    }

    fn measurements(&self) -> usize {
        self.entries.len()
    }

    fn apply(&self, a: &DMatrix<f64>) -> Vec<f64> {
        let mut z = a.clone();
        synthesize_in_place(&mut z, self.bs.kind, self.bt.kind);
        self.entries.iter().map(|&(i, j)| z[(i, j)]).collect()
    }

    fn adjoint(&self, r: &[f64]) -> DMatrix<f64> {
        let (n, m) = self.shape();
        let mut z = DMatrix::zeros(n, m);
        for (&(i, j), &v) in self.entries.iter().zip(r) {
            z[(i, j)] += v;
        }
        analyze_in_place(&mut z, self.bs.kind, self.bt.kind);
        z
    }

    fn project(&self, a: &mut DMatrix<f64>, y: &[f64], eps: f64) {
        synthesize_in_place(a, self.bs.kind, self.bt.kind);
        let norm = self
            .entries
            .iter()
            .zip(y)
            .map(|(&e, q)| (a[e] - q).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > eps {
            let shrink = 1.0 - eps / norm;
            for (&e, q) in self.entries.iter().zip(y) {
                a[e] -= shrink * (a[e] - q);
            }
        }
        analyze_in_place(a, self.bs.kind, self.bt.kind);
    }

    fn column(&self, i: usize, j: usize) -> Vec<f64> {
        self.entries
            .iter()
            .map(|&(p, q)| self.bs.matrix[(p, i)] * self.bt.matrix[(q, j)])
            .collect()
    }

    fn column_norms(&self) -> DMatrix<f64> {
        let (n, m) = self.shape();
        let mut mask = DMatrix::zeros(n, m);
        for &(i, j) in &self.entries {
            mask[(i, j)] = 1.0;
        }
        let ps = self.bs.matrix.map(|v| v * v);
        let pt = self.bt.matrix.map(|v| v * v);
        (ps.transpose() * mask * pt).map(f64::sqrt)
    }
}

/// Dense separable operator `A -> B_S A B_T^T` with `B = Phi Psi`.
struct KronOp {
    b_s: DMatrix<f64>,
    b_t: DMatrix<f64>,
    u_s: DMatrix<f64>,
    s_s: DVector<f64>,
    v_s: DMatrix<f64>,
    u_t: DMatrix<f64>,
    s_t: DVector<f64>,
    v_t: DMatrix<f64>,
}

impl KronOp {
    fn new(b_s: DMatrix<f64>, b_t: DMatrix<f64>) -> Self {
        let svd_s = b_s.clone().svd(true, true);
        let svd_t = b_t.clone().svd(true, true);
        Self {
            u_s: svd_s.u.expect("requested"),
            s_s: svd_s.singular_values,
            v_s: svd_s.v_t.expect("requested").transpose(),
            u_t: svd_t.u.expect("requested"),
            s_t: svd_t.singular_values,
            v_t: svd_t.v_t.expect("requested").transpose(),
            b_s,
            b_t,
        }
    }

    fn rows(&self) -> (usize, usize) {
        (self.b_s.nrows(), self.b_t.nrows())
    }
}

impl Sensing for KronOp {
    fn shape(&self) -> (usize, usize) {
        (self.b_s.ncols(), self.b_t.ncols())
    }

    fn measurements(&self) -> usize {
        self.b_s.nrows() * self.b_t.nrows()
    }

    fn apply(&self, a: &DMatrix<f64>) -> Vec<f64> {
        vectorize(&(&self.b_s * a * self.b_t.transpose()))
    }

    fn adjoint(&self, r: &[f64]) -> DMatrix<f64> {
        let (ms, mt) = self.rows();
        let rm = DMatrix::from_row_slice(ms, mt, r);
        self.b_s.transpose() * rm * &self.b_t
    }

    fn project(&self, a: &mut DMatrix<f64>, y: &[f64], eps: f64) {
        let (ms, mt) = self.rows();
        let ym = DMatrix::from_row_slice(ms, mt, y);
        // coordinates in the row space of the Kronecker operator
        let c = self.v_s.transpose() * &*a * &self.v_t;
        let yt = self.u_s.transpose() * ym * &self.u_t;
        let (rs, rt) = c.shape();
        let tiny = 1e-12 * self.s_s.amax().max(1e-300) * self.s_t.amax().max(1e-300);
        let sigma = DMatrix::from_fn(rs, rt, |i, j| self.s_s[i] * self.s_t[j]);
        let gap = DMatrix::from_fn(rs, rt, |i, j| sigma[(i, j)] * c[(i, j)] - yt[(i, j)]);
        if gap.norm() <= eps {
            return;
        }
        let target = |i: usize, j: usize, mu: f64| -> f64 {
            let s = sigma[(i, j)];
            if s <= tiny {
                return c[(i, j)];
            }
            if mu.is_infinite() {
                yt[(i, j)] / s
            } else {
                (c[(i, j)] + mu * s * yt[(i, j)]) / (1.0 + mu * s * s)
            }
        };
        let mu = if eps == 0.0 {
            f64::INFINITY
        } else {
            // ||gap / (1 + mu sigma^2)|| = eps; decreasing in mu
            let resid = |mu: f64| -> f64 {
                gap.iter()
                    .zip(sigma.iter())
                    .map(|(g, s)| (g / (1.0 + mu * s * s)).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let mut hi = 1.0;
            while resid(hi) > eps && hi < 1e300 {
                hi *= 4.0;
            }
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if resid(mid) > eps {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        };
        let delta = DMatrix::from_fn(rs, rt, |i, j| target(i, j, mu) - c[(i, j)]);
        *a += &self.v_s * delta * self.v_t.transpose();
    }

    fn column(&self, i: usize, j: usize) -> Vec<f64> {
        let (ms, mt) = self.rows();
        let mut v = Vec::with_capacity(ms * mt);
        for p in 0..ms {
            for q in 0..mt {
                v.push(self.b_s[(p, i)] * self.b_t[(q, j)]);
            }
        }
        v
    }

    fn column_norms(&self) -> DMatrix<f64> {
        let (n, m) = self.shape();
        DMatrix::from_fn(n, m, |i, j| {
            self.b_s.column(i).norm() * self.b_t.column(j).norm()
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(op: &dyn Sensing, a: &DMatrix<f64>, y: &[f64]) -> f64 {
    norm(
        &op.apply(a)
            .iter()
            .zip(y)
            .map(|(p, q)| p - q)
            .collect::<Vec<_>>(),
    )
}

/// Least squares on a fixed support; `None` when the system is rank deficient.
fn fit_support(op: &dyn Sensing, support: &[(usize, usize)], y: &[f64]) -> Option<DMatrix<f64>> {
    let m = y.len();
    if support.is_empty() || support.len() > m {
        return None;
    }
    let mut d = DMatrix::zeros(m, support.len());
    for (k, &(i, j)) in support.iter().enumerate() {
        d.set_column(k, &DVector::from_vec(op.column(i, j)));
    }
    let qr = d.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * scale) {
        return None;
    }
    let rhs = qr.q().transpose() * DVector::from_column_slice(y);
    let c = r.solve_upper_triangular(&rhs)?;
    let (n, mt) = op.shape();
    let mut a = DMatrix::zeros(n, mt);
    for (k, &(i, j)) in support.iter().enumerate() {
        a[(i, j)] = c[k];
    }
    Some(a)
}

fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn support_of(v: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let peak = v.amax();
    (0..v.ncols())
        .flat_map(|j| (0..v.nrows()).map(move |i| (i, j)))
        .filter(|&(i, j)| v[(i, j)].abs() > 1e-9 * peak)
        .collect()
}

/// Least-squares refit on `support`, kept only when it satisfies the residual bound.
fn polish(
    op: &dyn Sensing,
    support: &[(usize, usize)],
    y: &[f64],
    cfg: &ReconstructionConfig,
) -> Option<DMatrix<f64>> {
    if support.len() > cfg.polish_limit.min(y.len()) {
        return None;
    }
    let a = fit_support(op, support, y)?;
    (residual(op, &a, y) <= cfg.epsilon + 1e-9 * norm(y).max(1e-300)).then_some(a)
}

const POLISH_EVERY: usize = 20;

fn douglas_rachford(
    op: &dyn Sensing,
    y: &[f64],
    cfg: &ReconstructionConfig,
) -> (DMatrix<f64>, usize, bool) {
    let eps = cfg.epsilon;
    let (n, m) = op.shape();
    let mut zeta = DMatrix::zeros(n, m);
    op.project(&mut zeta, y, 0.0);
    let gamma = cfg.step * zeta.amax().max(f64::MIN_POSITIVE);
    let mut x = zeta.clone();
    let mut v = zeta.clone();
    let mut done = false;
    let mut last_support: Vec<(usize, usize)> = Vec::new();
    let mut it = 0;
    while it < cfg.max_iterations {
        it += 1;
        x.copy_from(&zeta);
        op.project(&mut x, y, eps);
        for ((vk, &xk), &zk) in v.iter_mut().zip(x.iter()).zip(zeta.iter()) {
            *vk = soft(2.0 * xk - zk, gamma);
        }
        let mut diff = 0.0;
        for ((zk, &vk), &xk) in zeta.iter_mut().zip(v.iter()).zip(x.iter()) {
            let d = vk - xk;
            diff += d * d;
            *zk += d;
        }
        if diff.sqrt() <= cfg.tolerance * x.norm().max(f64::MIN_POSITIVE) {
            done = true;
            break;
        }
        if it % POLISH_EVERY == 0 {
            let support = support_of(&v);
            if support == last_support {
                if let Some(a) = polish(op, &support, y, cfg) {
                    return (a, it, true);
                }
            }
            last_support = support;
        }
    }
    match polish(op, &support_of(&v), y, cfg) {
        Some(a) => (a, it, true),
        None => (x, it, done),
    }
}

fn greedy(op: &dyn Sensing, y: &[f64], cfg: &ReconstructionConfig) -> (DMatrix<f64>, usize, bool) {
    let (n, m) = op.shape();
    let norms = op.column_norms();
    let mut support: Vec<(usize, usize)> = Vec::new();
    let mut a = DMatrix::zeros(n, m);
    let mut r = y.to_vec();
    let budget = cfg.max_iterations.min(op.measurements());
    let tol = cfg.epsilon.max(1e-12 * norm(y));
    let mut it = 0;
    while norm(&r) > tol && it < budget {
        it += 1;
        let c = op.adjoint(&r);
        let mut best = None;
        let mut best_val = 0.0;
        for j in 0..m {
            for i in 0..n {
                if norms[(i, j)] <= 1e-12 || support.contains(&(i, j)) {
                    continue;
                }
                let s = c[(i, j)].abs() / norms[(i, j)];
                if s > best_val {
                    best_val = s;
                    best = Some((i, j));
                }
            }
        }
        let Some(pick) = best else { break };
        support.push(pick);
        match fit_support(op, &support, y) {
            Some(fit) => a = fit,
            None => {
                support.pop();
                break;
            }
        }
        r = op.apply(&a).iter().zip(y).map(|(p, q)| q - p).collect();
    }
    let ok = norm(&r) <= tol * (1.0 + 1e-9) + 1e-12;
    (a, it, ok)
}

fn finish(
    op: &dyn Sensing,
    y: &[f64],
    a: DMatrix<f64>,
    iterations: usize,
    bs: &WaveletBasis,
    bt: &WaveletBasis,
    cfg: &ReconstructionConfig,
) -> ReconstructionResult {
    let residual_norm = residual(op, &a, y);
    let peak = a.amax();
    let sparsity = a
        .iter()
        .filter(|v| v.abs() > cfg.sparsity_threshold * peak)
        .count();
    let mut z_hat = a.clone();
    synthesize_in_place(&mut z_hat, bs.kind, bt.kind);
    let converged = residual_norm <= cfg.epsilon + 1e-8 * norm(y).max(1e-300);
    ReconstructionResult {
        z_hat,
        coeffs: a,
        residual_norm,
        sparsity,
        iterations,
        converged,
    }
}

fn solve(
    op: &dyn Sensing,
    y: &[f64],
    bs: &WaveletBasis,
    bt: &WaveletBasis,
    cfg: &ReconstructionConfig,
) -> ReconstructionResult {
    let (a, it, _) = match cfg.solver {
        Solver::BasisPursuitDenoise => douglas_rachford(op, y, cfg),
        Solver::GreedyPursuit => greedy(op, y, cfg),
    };
    finish(op, y, a, it, bs, bt, cfg)
}

/// Recovers `Z*` from `Y = Phi_S Z Phi_T^T`.
///
/// Non-convergence is reported through [`ReconstructionResult::converged`].
pub fn reconstruct(
    y: &DMatrix<f64>,
    plan: &SamplingPlan,
    bs: &WaveletBasis,
    bt: &WaveletBasis,
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    plan.check_observation(y)?;
    if bs.dimension != plan.n_s || bt.dimension != plan.n_t {
        return Err(Error::DimensionMismatch(
            "bases do not match the plan".into(),
        ));
    }
    let yv = vectorize(y);
    Ok(match &plan.mode {
        SamplingMode::SubsetSelection { nodes, intervals } => {
            let entries = nodes
                .iter()
                .flat_map(|&i| intervals.iter().map(move |&j| (i, j)))
                .collect();
            solve(&MaskOp { bs, bt, entries }, &yv, bs, bt, cfg)
        }
        SamplingMode::DenseRandom { .. } => {
            let op = KronOp::new(plan.phi_space() * &bs.matrix, plan.phi_time() * &bt.matrix);
            solve(&op, &yv, bs, bt, cfg)
        }
    })
}

/// Recovers a field from samples at arbitrary `(node, interval)` positions.
pub fn reconstruct_masked(
    samples: &[(usize, usize, f64)],
    bs: &WaveletBasis,
    bt: &WaveletBasis,
    cfg: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let mut seen = std::collections::HashSet::new();
    for &(i, j, v) in samples {
        if i >= bs.dimension || j >= bt.dimension {
            return Err(Error::DimensionMismatch(format!(
                "sample ({i}, {j}) outside the field"
            )));
        }
        if !seen.insert((i, j)) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "duplicate or non-finite sample at ({i}, {j})"
            )));
        }
    }
    let entries = samples.iter().map(|&(i, j, _)| (i, j)).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.2).collect();
    Ok(solve(&MaskOp { bs, bt, entries }, &y, bs, bt, cfg))
}

/// `||Z - Z*||^2 / ||Z||^2`.
pub fn mse(z: &DMatrix<f64>, z_hat: &DMatrix<f64>) -> Result<f64> {
    if z.shape() != z_hat.shape() {
        return Err(Error::DimensionMismatch("fields differ in shape".into()));
    }
    let denom = z.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((z - z_hat).norm_squared() / denom)
}
