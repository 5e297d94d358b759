//! Fixed point of the per-node Markov chain with deference.
//!
//! The unknowns are the CCA busy probabilities `alpha` (first CCA) and
//! `beta` (second CCA), the per-slot CCA probability `phi`, and the
//! stationary mass `b00` of state (0, 0). `b00` is eliminated through the
//! normalisation condition, leaving a three-dimensional map that is iterated
//! with damping until all residuals vanish.

use serde::Serialize;

use super::MacTiming;
use crate::{Error, Result};

const DAMPING: f64 = 0.5;
const MAX_ITERATIONS: usize = 10_000;
const TOLERANCE: f64 = 1e-12;
const RESIDUAL_BOUND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainSolution {
    pub h: u32,
    pub sf_len: u32,
    pub b00: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    /// `alpha + beta - alpha * beta`: a CCA pair fails.
    pub lambda: f64,
    /// Deference probability `L_s / SF`.
    pub p_d: f64,
    /// `lambda * (1 - p_d)`.
    pub omega: f64,
    /// Collision probability `1 - (1 - phi)^(h-1)`.
    pub p_c: f64,
    /// Probability that a transmission collides, `1 - h phi (1-phi)^(h-1) / (1 - (1-phi)^h)`.
    pub p_ncol: f64,
    pub beta_ack: f64,
    /// Mean channel occupancy seen by CCA1, `T_p + L_ack (1 - p_ncol)`.
    pub l_star: f64,
    pub iterations: usize,
}

/// `sum_{i=0}^{n} x^i`, safe at `x = 1`.
pub(crate) fn geometric_sum(x: f64, n: u32) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..=n {
        sum += term;
        term *= x;
    }
    sum
}

/// `1 - (1 - phi)^n` without cancellation for small `phi`.
fn one_minus_pow(phi: f64, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    -(f64::from(n) * (-phi).ln_1p()).exp_m1()
}

/// Probability that a transmission collides, given at least one of `h` nodes transmits.
fn collision_given_tx(phi: f64, h: u32) -> f64 {
    if h <= 1 {
        return 0.0;
    }
    let busy = one_minus_pow(phi, h);
    if busy <= f64::MIN_POSITIVE {
        return 0.0;
    }
    let single = f64::from(h) * phi * (1.0 - phi).powi(h as i32 - 1);
    (1.0 - single / busy).clamp(0.0, 1.0)
}

fn beta_ack(phi: f64, h: u32) -> f64 {
    if h <= 1 {
        // Only other stations can occupy the channel between CCA1 and CCA2.
        return 0.0;
    }
    let busy = one_minus_pow(phi, h);
    if busy <= f64::MIN_POSITIVE {
        return 0.0;
    }
    let p_ncol = collision_given_tx(phi, h);
    (2.0 - p_ncol) / (2.0 - p_ncol + 1.0 / busy)
}

struct Derived {
    b00: f64,
    phi: f64,
    alpha: f64,
    beta: f64,
    p_ncol: f64,
    beta_ack: f64,
    l_star: f64,
}

/// Normalisation: `b00` as a function of `(alpha, beta)`.
fn b00_from(alpha: f64, beta: f64, p_d: f64, timing: &MacTiming) -> f64 {
    let lambda = alpha + beta - alpha * beta;
    let omega = lambda * (1.0 - p_d);
    let nb = timing.nb;
    let w0 = f64::from(timing.w0());
    let l_s = f64::from(timing.l_s());
    let bracket = 3.0 + 2.0 * (1.0 - p_d) * (1.0 + (1.0 - alpha) * (1.0 + (1.0 - beta) * l_s));
    2.0 / (w0 * geometric_sum(2.0 * omega, nb) + geometric_sum(omega, nb) * bracket)
}

fn map(alpha: f64, beta: f64, phi: f64, h: u32, p_d: f64, timing: &MacTiming) -> Derived {
    let lambda = alpha + beta - alpha * beta;
    let omega = lambda * (1.0 - p_d);
    let b00 = b00_from(alpha, beta, p_d, timing);
    let phi_next = geometric_sum(omega, timing.nb) * b00;

    let p_ncol = collision_given_tx(phi, h);
    let l_star = f64::from(timing.t_p()) + f64::from(timing.l_ack) * (1.0 - p_ncol);
    let p_c = one_minus_pow(phi, h.saturating_sub(1));
    let alpha_next = (l_star * (1.0 - omega) * p_c).clamp(0.0, 1.0);
    let b_ack = beta_ack(phi, h);
    Derived {
        b00,
        phi: phi_next,
        alpha: alpha_next,
        beta: b_ack,
        p_ncol,
        beta_ack: b_ack,
        l_star,
    }
}

/// Residuals of the normalisation, the `phi`-`b00` relation, the
/// `phi`-`alpha` relation and the `phi`-`beta_ACK` closure.
pub fn residuals(sol: &ChainSolution, timing: &MacTiming) -> [f64; 4] {
    let nb = timing.nb;
    let w0 = f64::from(timing.w0());
    let l_s = f64::from(timing.l_s());
    let (a, b, p_d, omega) = (sol.alpha, sol.beta, sol.p_d, sol.omega);
    let bracket = 3.0 + 2.0 * (1.0 - p_d) * (1.0 + (1.0 - a) * (1.0 + (1.0 - b) * l_s));
    let norm =
        sol.b00 / 2.0 * (w0 * geometric_sum(2.0 * omega, nb) + geometric_sum(omega, nb) * bracket);
    let r_norm = norm - 1.0;
    let r_phi = sol.phi - geometric_sum(omega, nb) * sol.b00;
    let r_alpha = sol.alpha - (sol.l_star * (1.0 - omega) * sol.p_c).min(1.0);
    let r_beta = sol.beta - sol.beta_ack;
    [r_norm, r_phi, r_alpha, r_beta]
}

/// Solves the chain for `h` contenders in a superframe of `sf_len` slots.
pub fn solve_chain(h: u32, sf_len: u32, timing: &MacTiming) -> Result<ChainSolution> {
    solve_chain_from(h, sf_len, timing, (0.0, 0.0, 0.0))
}

/// As [`solve_chain`], starting the iteration from `(alpha, beta, phi)`.
pub fn solve_chain_from(
    h: u32,
    sf_len: u32,
    timing: &MacTiming,
    init: (f64, f64, f64),
) -> Result<ChainSolution> {
    if h == 0 {
        return Err(Error::InvalidParameter(
            "chain needs at least one contender".into(),
        ));
    }
    if sf_len <= timing.l_s() {
        return Err(Error::InvalidParameter(format!(
            "superframe of {sf_len} slots cannot hold a {}-slot exchange",
            timing.l_s()
        )));
    }
    let p_d = f64::from(timing.l_s()) / f64::from(sf_len);
    let (mut alpha, mut beta, mut phi) = init;
    let mut last = [f64::NAN; 4];
    for it in 1..=MAX_ITERATIONS {
        let next = map(alpha, beta, phi, h, p_d, timing);
        let step = (next.alpha - alpha)
            .abs()
            .max((next.beta - beta).abs())
            .max((next.phi - phi).abs());
        alpha += DAMPING * (next.alpha - alpha);
        beta += DAMPING * (next.beta - beta);
        phi += DAMPING * (next.phi - phi);
        if step < TOLERANCE {
            // Polish with an undamped evaluation so relations hold exactly.
            let sol = finish(alpha, beta, phi, h, sf_len, p_d, timing, it);
            last = residuals(&sol, timing);
            if last.iter().all(|r| r.abs() <= RESIDUAL_BOUND) {
                return Ok(sol);
            }
        }
    }
    // Damped substitution can settle into a cycle for crowded superframes.
    // Given phi, beta is explicit and alpha solves a linear equation, so the
    // fixed point reduces to a scalar root in phi.
    let sol = solve_by_bisection(h, sf_len, p_d, timing);
    let res = residuals(&sol, timing);
    if res.iter().all(|r| r.abs() <= RESIDUAL_BOUND) {
        return Ok(sol);
    }
    if last.iter().any(|r| r.is_nan()) {
        last = res;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residuals: last,
    })
}

fn alpha_beta_given_phi(phi: f64, h: u32, p_d: f64, timing: &MacTiming) -> (f64, f64) {
    let beta = beta_ack(phi, h);
    let p_ncol = collision_given_tx(phi, h);
    let l_star = f64::from(timing.t_p()) + f64::from(timing.l_ack) * (1.0 - p_ncol);
    let c = l_star * one_minus_pow(phi, h.saturating_sub(1));
    let alpha = c * (1.0 - (1.0 - p_d) * beta) / (1.0 + c * (1.0 - p_d) * (1.0 - beta));
    if alpha <= 1.0 {
        return (alpha, beta);
    }
    // alpha saturates: 1 = min(1, c * (1 - omega)) still holds when c * p_d >= 1
    (1.0, beta)
}

fn solve_by_bisection(h: u32, sf_len: u32, p_d: f64, timing: &MacTiming) -> ChainSolution {
    let gap = |phi: f64| {
        let (a, b) = alpha_beta_given_phi(phi, h, p_d, timing);
        let omega = (a + b - a * b) * (1.0 - p_d);
        phi - geometric_sum(omega, timing.nb) * b00_from(a, b, p_d, timing)
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut it = 0;
    while hi - lo > 1e-16 && it < 200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    let phi = 0.5 * (lo + hi);
    let (alpha, beta) = alpha_beta_given_phi(phi, h, p_d, timing);
    finish(
        alpha,
        beta,
        phi,
        h,
        sf_len,
        p_d,
        timing,
        MAX_ITERATIONS + it,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    alpha: f64,
    beta: f64,
    phi: f64,
    h: u32,
    sf_len: u32,
    p_d: f64,
    timing: &MacTiming,
    iterations: usize,
) -> ChainSolution {
    let d = map(alpha, beta, phi, h, p_d, timing);
    let lambda = alpha + beta - alpha * beta;
    ChainSolution {
        h,
        sf_len,
        b00: d.b00,
        alpha,
        beta,
        phi,
        lambda,
        p_d,
        omega: lambda * (1.0 - p_d),
        p_c: one_minus_pow(phi, h - 1),
        p_ncol: d.p_ncol,
        beta_ack: d.beta_ack,
        l_star: d.l_star,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn timing() -> MacTiming {
        MacTiming::default()
    }

    #[test]
    fn single_contender_never_collides() {
        let sol = solve_chain(1, 128, &timing()).unwrap();
        assert_eq!(sol.p_c, 0.0);
        assert_eq!(sol.alpha, 0.0);
        assert_eq!(sol.beta, 0.0);
        assert!(sol.phi > 0.0);
    }

    #[test]
    fn residuals_vanish_and_probabilities_are_valid() {
        let t = timing();
        for h in [1, 2, 5, 10, 20, 40, 64] {
            for bo in [2, 3, 4, 6] {
                let sol = solve_chain(h, t.sf_len(bo), &t).unwrap();
                for r in residuals(&sol, &t) {
                    assert!(r.abs() <= 1e-8, "h={h} bo={bo} residual {r}");
                }
                for p in [
                    sol.alpha, sol.beta, sol.phi, sol.b00, sol.lambda, sol.p_c, sol.p_d,
                ] {
                    assert!((0.0..=1.0).contains(&p), "h={h} bo={bo} p={p}");
                }
            }
        }
    }

    #[test]
    fn solution_independent_of_initial_guess() {
        let t = timing();
        for h in [2, 5, 10, 30] {
            let a = solve_chain_from(h, t.sf_len(4), &t, (0.0, 0.0, 0.0)).unwrap();
            let b = solve_chain_from(h, t.sf_len(4), &t, (0.6, 0.3, 0.2)).unwrap();
            assert!((a.alpha - b.alpha).abs() < 1e-6);
            assert!((a.beta - b.beta).abs() < 1e-6);
            assert!((a.phi - b.phi).abs() < 1e-6);
        }
    }

    #[test]
    fn busy_probability_grows_with_contenders() {
        let t = timing();
        let mut prev = -1.0;
        for h in 2..=20 {
            let sol = solve_chain(h, t.sf_len(4), &t).unwrap();
            assert!(sol.alpha >= prev - 1e-12, "h={h}");
            prev = sol.alpha;
        }
    }

    #[test]
    fn rejects_short_superframe() {
        assert!(solve_chain(3, 10, &timing()).is_err());
        assert!(solve_chain(0, 128, &timing()).is_err());
    }
}
