//! Generic-frame statistics.
//!
//! A generic frame is one channel access episode of a node, ending in
//! success, collision, CCA failure (all `NB + 1` attempts busy) or deference.
//! Its length PGF is a mixture of four branches built from
//!
//! - backoff in stage `j`: `B_j(z) = (1/W_j) sum_{k<W_j} z^k`
//! - a failed CCA pair: `C_f(z) = (alpha z + (1-alpha) beta z^2) / lambda`
//! - success: `sum_i w_i prod_{j<=i} B_j(z) C_f(z)^i z^2 z^{L_s}` with
//!   `w_i = lambda^i (1-lambda) / (1 - lambda^{NB+1})`
//! - collision: as success with `z^{L_c}`
//! - CCA failure: `prod_{j<=NB} B_j(z) C_f(z)^{NB+1}`
//! - deference: `z^{L_s}`
//!
//! Moments are propagated in closed form as (mean, second factorial moment)
//! pairs, which add under convolution and mix linearly.

use serde::Serialize;

use super::{ChainSolution, MacTiming};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrameStats {
    pub p_succ: f64,
    pub p_coll: f64,
    pub p_ccas: f64,
    pub p_d: f64,
    /// Mean generic-frame length in slots.
    pub t_bar: f64,
    /// Variance of the generic-frame length in slots squared.
    pub sigma2: f64,
    /// Maximum number of generic frames that fit in the superframe.
    pub k_s_max: u32,
}

/// Factorial moments `(E[X], E[X(X-1)])` of a nonnegative integer duration.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    m1: f64,
    m2: f64,
}

impl Moments {
    const ZERO: Moments = Moments { m1: 0.0, m2: 0.0 };

    fn constant(c: f64) -> Self {
        Moments {
            m1: c,
            m2: c * (c - 1.0),
        }
    }

    fn uniform(w: u32) -> Self {
        // X uniform on {0, .., w-1}
        let w = f64::from(w);
        let m1 = (w - 1.0) / 2.0;
        let m2 = (w - 1.0) * (w - 2.0) / 3.0;
        Moments { m1, m2 }
    }

    /// Sum of independent durations.
    fn convolve(self, o: Moments) -> Self {
        Moments {
            m1: self.m1 + o.m1,
            m2: self.m2 + o.m2 + 2.0 * self.m1 * o.m1,
        }
    }

    fn scale(self, w: f64) -> Self {
        Moments {
            m1: w * self.m1,
            m2: w * self.m2,
        }
    }

    fn add(self, o: Moments) -> Self {
        Moments {
            m1: self.m1 + o.m1,
            m2: self.m2 + o.m2,
        }
    }

    fn repeat(self, n: u32) -> Self {
        (0..n).fold(Moments::ZERO, |acc, _| acc.convolve(self))
    }
}

fn failed_cca_pair(sol: &ChainSolution) -> Moments {
    if sol.lambda <= 0.0 {
        return Moments::constant(1.0);
    }
    let (a, b) = (sol.alpha, sol.beta);
    let p2 = (1.0 - a) * b / sol.lambda;
    Moments {
        m1: (a + 2.0 * (1.0 - a) * b) / sol.lambda,
        m2: 2.0 * p2,
    }
}

/// Duration up to (and excluding) the final CCA pair when access succeeds in stage `i`.
fn access_in_stage(i: u32, sol: &ChainSolution, timing: &MacTiming) -> Moments {
    let backoff = (0..=i).fold(Moments::ZERO, |acc, j| {
        acc.convolve(Moments::uniform(timing.window(j)))
    });
    backoff.convolve(failed_cca_pair(sol).repeat(i))
}

fn access_branch(sol: &ChainSolution, timing: &MacTiming, tail: u32) -> Moments {
    let nb = timing.nb;
    let lam = sol.lambda;
    let norm = 1.0 - lam.powi(nb as i32 + 1);
    let mut acc = Moments::ZERO;
    for i in 0..=nb {
        let w = if norm > 0.0 {
            lam.powi(i as i32) * (1.0 - lam) / norm
        } else if i == 0 {
            1.0
        } else {
            0.0
        };
        if w == 0.0 {
            continue;
        }
        let m = access_in_stage(i, sol, timing).convolve(Moments::constant(f64::from(2 + tail)));
        acc = acc.add(m.scale(w));
    }
    acc
}

fn failure_branch(sol: &ChainSolution, timing: &MacTiming) -> Moments {
    let nb = timing.nb;
    let backoff = (0..=nb).fold(Moments::ZERO, |acc, j| {
        acc.convolve(Moments::uniform(timing.window(j)))
    });
    backoff.convolve(failed_cca_pair(sol).repeat(nb + 1))
}

/// Event probabilities and length moments of the generic frame.
pub fn frame_stats(sol: &ChainSolution, timing: &MacTiming) -> FrameStats {
    let lam_all = sol.lambda.powi(timing.nb as i32 + 1);
    let p_d = sol.p_d;
    let p_ccas = (1.0 - p_d) * lam_all;
    let p_coll = sol.p_c * (1.0 - p_d) * (1.0 - lam_all);
    let p_succ = (1.0 - p_coll - p_ccas - p_d).max(0.0);

    let ts = access_branch(sol, timing, timing.l_s());
    let tc = access_branch(sol, timing, timing.l_c());
    let tf = failure_branch(sol, timing);
    let td = Moments::constant(f64::from(timing.l_s()));
    let t = ts
        .scale(p_succ)
        .add(tc.scale(p_coll))
        .add(tf.scale(p_ccas))
        .add(td.scale(p_d));

    let t_bar = t.m1;
    let sigma2 = (t.m2 + t_bar - t_bar * t_bar).max(0.0);
    FrameStats {
        p_succ,
        p_coll,
        p_ccas,
        p_d,
        t_bar,
        sigma2,
        k_s_max: timing.max_frames(sol.sf_len),
    }
}
