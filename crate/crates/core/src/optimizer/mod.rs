//! MAC parameter search minimizing the reporting delay under the
//! sufficiency constraint, TDMA baselines, group sizing and channel counts.

mod bandwidth;

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::macmodel::{binomial_pmf, mix_participation, MacAnalytics, MacConfig, SuffixValues};
use crate::{Error, Result};

pub use bandwidth::{
    channels_required, max_group_size, scheme_delay, tdma_delay, BandwidthScenario, SamplingTable,
    Scheme,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpace {
    /// Upper bound on the number of superframes; the timing's `k_tau_max` when `None`.
    pub k_tau_max: Option<u32>,
    pub bo_min: u32,
    /// The timing's `bo_max` when `None`.
    pub bo_max: Option<u32>,
    /// Only nondecreasing beacon-order sequences.
    pub monotone_bo: bool,
    /// Same beacon order in every superframe.
    pub uniform_bo: bool,
    /// Resolution of the participation-probability grid on `[0, 1]`.
    pub p_step: f64,
    /// Golden-section refinement around the best grid point.
    pub refine: bool,
    /// Candidates with a longer delay are not considered.
    pub max_delay: Option<u64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            k_tau_max: None,
            bo_min: 0,
            bo_max: None,
            monotone_bo: true,
            uniform_bo: false,
            p_step: 0.01,
            refine: true,
            max_delay: None,
        }
    }
}

/// Dimension held fixed in a partial optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pinned {
    /// Every superframe uses this beacon order.
    Bo(u32),
    /// Participation probability.
    PS(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub config: MacConfig,
    /// `Pr{K_succ >= m_S}` at the returned `p_s`.
    pub probability: f64,
    /// Participation probability maximizing the sufficiency probability.
    pub p_best: f64,
    pub p_best_probability: f64,
    /// Beacon-order sequences whose feasibility was evaluated.
    pub evaluated: usize,
}

/// Beacon-order bounds `(lo, hi, k_max)` of a search.
fn bounds(a: &MacAnalytics, s: &SearchSpace, pinned_bo: Option<u32>) -> Result<(u32, u32, u32)> {
    let t = a.timing();
    let k_max = s.k_tau_max.unwrap_or(t.k_tau_max);
    let bo_max = s.bo_max.unwrap_or(t.bo_max);
    let (lo, hi) = match pinned_bo {
        Some(b) => (b, b),
        None => (s.bo_min, bo_max),
    };
    if k_max == 0 || lo > hi || hi > t.bo_max {
        return Err(Error::InvalidParameter(format!(
            "empty or out-of-range search space: k_tau <= {k_max}, beacon orders {lo}..={hi} (bo_max {})",
            t.bo_max
        )));
    }
    Ok((lo, hi, k_max))
}

/// Beacon orders that may precede `first` in a sequence.
fn predecessors(s: &SearchSpace, lo: u32, hi: u32, first: u32) -> std::ops::RangeInclusive<u32> {
    if s.uniform_bo {
        first..=first
    } else if s.monotone_bo {
        lo..=first
    } else {
        lo..=hi
    }
}

/// Ordering of equally good candidates: delay, then `k_tau`, then beacon orders.
fn key(bo: &[u32], delay: u64) -> (u64, usize, Vec<u32>) {
    (delay, bo.len(), bo.to_vec())
}

#[derive(Default)]
struct Branch {
    best: Option<(Vec<u32>, u64, f64, f64, f64, f64)>,
    evaluated: usize,
    best_seen: f64,
}

struct Walk<'a> {
    a: &'a MacAnalytics,
    s: &'a SearchSpace,
    p_suff: f64,
    pinned_p: Option<f64>,
    grid: &'a PGrid,
    lo: u32,
    hi: u32,
    k_max: u32,
    /// Smallest feasible delay found by any branch.
    incumbent: &'a AtomicU64,
}

impl Walk<'_> {
    /// Visits `suffix` (stored last superframe first) and every sequence
    /// obtained by prepending superframes to it.
    fn visit(
        &self,
        suffix: &mut Vec<u32>,
        values: &SuffixValues,
        delay: u64,
        out: &mut Branch,
    ) -> Result<()> {
        if delay > self.incumbent.load(Ordering::Relaxed) {
            return Ok(());
        }
        let v = assess(
            &values.profile(),
            self.p_suff,
            self.s,
            self.grid,
            self.pinned_p.is_some(),
        );
        out.evaluated += 1;
        out.best_seen = out.best_seen.max(v.best.1);
        if let Some((p, prob)) = v.chosen {
            let bo: Vec<u32> = suffix.iter().rev().copied().collect();
            if out
                .best
                .as_ref()
                .map_or(true, |b| key(&bo, delay) < key(&b.0, b.1))
            {
                out.best = Some((bo, delay, p, prob, v.best.0, v.best.1));
            }
            self.incumbent.fetch_min(delay, Ordering::Relaxed);
        }
        if suffix.len() as u32 == self.k_max {
            return Ok(());
        }
        let t = self.a.timing();
        let first = *suffix.last().expect("suffix is never empty");
        for b in predecessors(self.s, self.lo, self.hi, first) {
            let d = delay + u64::from(t.sf_len(b));
            if d > self.incumbent.load(Ordering::Relaxed) {
                // longer superframes only add delay
                if self.s.monotone_bo || self.s.uniform_bo {
                    break;
                }
                continue;
            }
            let next = values.prepend(self.a, t.sf_len(b))?;
            suffix.push(b);
            self.visit(suffix, &next, d, out)?;
            suffix.pop();
        }
        Ok(())
    }
}

/// All sequences of the search space in candidate order (test oracle helper).
#[cfg(test)]
fn candidates(a: &MacAnalytics, s: &SearchSpace, pinned_bo: Option<u32>) -> Result<Vec<Vec<u32>>> {
    let (lo, hi, k_max) = bounds(a, s, pinned_bo)?;
    let mut out = Vec::new();
    let mut stack: Vec<Vec<u32>> = (lo..=hi).map(|b| vec![b]).collect();
    while let Some(suffix) = stack.pop() {
        if suffix.len() < k_max as usize {
            for b in predecessors(s, lo, hi, *suffix.last().unwrap()) {
                let mut next = suffix.clone();
                next.push(b);
                stack.push(next);
            }
        }
        out.push(suffix.into_iter().rev().collect::<Vec<u32>>());
    }
    let t = a.timing();
    out.sort_by_key(|bo| key(bo, t.delay(bo)));
    Ok(out)
}

/// Grid points `0, step, ..., 1`.
fn p_grid(step: f64) -> Vec<f64> {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

struct Verdict {
    /// Smallest feasible grid point, else the refined maximizer when it is feasible.
    chosen: Option<(f64, f64)>,
    best: (f64, f64),
}

/// Participation grid with its binomial weights, shared by all candidates.
struct PGrid {
    p: Vec<f64>,
    /// `w[i][h] = C(n, h) p_i^h (1 - p_i)^(n - h)`.
    w: Vec<Vec<f64>>,
}

impl PGrid {
    fn new(n_s: u32, s: &SearchSpace, pinned_p: Option<f64>) -> Self {
        let p = match pinned_p {
            Some(p) => vec![p],
            None => p_grid(s.p_step),
        };
        let w = p
            .iter()
            .map(|&q| (0..=n_s).map(|h| binomial_pmf(n_s, h, q)).collect())
            .collect();
        Self { p, w }
    }
}

/// Below the target by less than this, a grid maximum is refined by golden
/// section; farther away the refinement cannot close the gap because the
/// mixture varies on the scale of the binomial spread, not the grid step.
const REFINE_WINDOW: f64 = 0.05;

fn assess(profile: &[f64], p_suff: f64, s: &SearchSpace, grid: &PGrid, pinned: bool) -> Verdict {
    let vals: Vec<f64> = grid
        .w
        .iter()
        .map(|w| {
            w.iter()
                .zip(profile)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect();
    if pinned {
        let (p, v) = (grid.p[0], vals[0]);
        return Verdict {
            chosen: (v >= p_suff).then_some((p, v)),
            best: (p, v),
        };
    }
    let (mut ib, mut vb) = (0, f64::NEG_INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v > vb {
            ib = i;
            vb = v;
        }
    }
    let mut best = (grid.p[ib], vb);
    let chosen = grid
        .p
        .iter()
        .zip(&vals)
        .find(|(_, &v)| v >= p_suff)
        .map(|(&p, &v)| (p, v));
    if s.refine && chosen.is_none() && vb >= p_suff - REFINE_WINDOW {
        best = refine(profile, &grid.p, ib, best);
    }
    let chosen = chosen.or((best.1 >= p_suff).then_some(best));
    Verdict { chosen, best }
}

fn refine(profile: &[f64], grid: &[f64], ib: usize, best: (f64, f64)) -> (f64, f64) {
    let lo = grid[ib.saturating_sub(1)];
    let hi = grid[(ib + 1).min(grid.len() - 1)];
    let r = golden_max(&|p| mix_participation(profile, p), lo, hi);
    if r.1 > best.1 {
        r
    } else {
        best
    }
}

fn search(
    a: &MacAnalytics,
    n_s: u32,
    m_s: u32,
    p_suff: f64,
    s: &SearchSpace,
    pinned: Option<Pinned>,
) -> Result<Optimum> {
    if !(p_suff > 0.0 && p_suff < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "P_suff = {p_suff} outside (0, 1)"
        )));
    }
    if m_s > n_s {
        return Err(Error::InvalidParameter(format!(
            "m_S = {m_s} exceeds n_S = {n_s}"
        )));
    }
    if !(s.p_step > 0.0 && s.p_step <= 1.0) {
        return Err(Error::InvalidParameter("p_step must lie in (0, 1]".into()));
    }
    let pinned_bo = match pinned {
        Some(Pinned::Bo(b)) => Some(b),
        _ => None,
    };
    let pinned_p = match pinned {
        Some(Pinned::PS(p)) if !(0.0..=1.0).contains(&p) => {
            return Err(Error::InvalidParameter(format!(
                "pinned p_s = {p} outside [0, 1]"
            )))
        }
        Some(Pinned::PS(p)) => Some(p),
        _ => None,
    };
    let (lo, hi, k_max) = bounds(a, s, pinned_bo)?;
    let t = a.timing();
    if m_s == 0 {
        let p = pinned_p.unwrap_or(0.0);
        return Ok(Optimum {
            config: MacConfig::new(vec![lo], p, t)?,
            probability: 1.0,
            p_best: p,
            p_best_probability: 1.0,
            evaluated: 1,
        });
    }
    let incumbent = AtomicU64::new(s.max_delay.unwrap_or(u64::MAX));
    let grid = PGrid::new(n_s, s, pinned_p);
    let walk = Walk {
        a,
        s,
        p_suff,
        pinned_p,
        grid: &grid,
        lo,
        hi,
        k_max,
        incumbent: &incumbent,
    };
    let terminal = SuffixValues::terminal(n_s, m_s);
    // Branch on the last superframe; short last superframes first so that an
    // early incumbent prunes the rest.
    let branches = (lo..=hi)
        .into_par_iter()
        .map(|last| {
            let mut out = Branch::default();
            let delay = u64::from(t.sf_len(last));
            if delay <= walk.incumbent.load(Ordering::Relaxed) {
                let values = terminal.prepend(a, t.sf_len(last))?;
                walk.visit(&mut vec![last], &values, delay, &mut out)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<Branch>>>()?;
    let evaluated = branches.iter().map(|b| b.evaluated).sum();
    let best_seen = branches.iter().map(|b| b.best_seen).fold(0.0, f64::max);
    let best = branches
        .into_iter()
        .filter_map(|b| b.best)
        .min_by(|x, y| key(&x.0, x.1).cmp(&key(&y.0, y.1)));
    match best {
        Some((bo, _, p, prob, mut p_best, mut p_best_probability)) => {
            if s.refine && pinned_p.is_none() {
                let profile = a.sufficiency_profile(n_s, m_s, &bo)?;
                let ib = grid.p.iter().position(|&q| q == p_best).unwrap_or(0);
                (p_best, p_best_probability) =
                    refine(&profile, &grid.p, ib, (p_best, p_best_probability));
            }
            Ok(Optimum {
                config: MacConfig::new(bo, p, t)?,
                probability: prob,
                p_best,
                p_best_probability,
                evaluated,
            })
        }
        None => Err(Error::NoFeasibleConfig {
            best_probability: best_seen,
        }),
    }
}

/// Minimum-delay configuration with `max_p Pr{K_succ >= m_S} >= p_suff`.
///
/// Every beacon-order sequence of the search space is considered (sequences
/// longer than the best feasible delay are pruned); ties are broken by
/// `k_tau`, then by the beacon orders. The returned `p_s` is the smallest grid
/// point meeting the target.
pub fn optimize_mac(
    a: &MacAnalytics,
    n_s: u32,
    m_s: u32,
    p_suff: f64,
    s: &SearchSpace,
) -> Result<Optimum> {
    search(a, n_s, m_s, p_suff, s, None)
}

/// As [`optimize_mac`] with one dimension held fixed.
pub fn optimize_partial(
    a: &MacAnalytics,
    n_s: u32,
    m_s: u32,
    p_suff: f64,
    pinned: Pinned,
    s: &SearchSpace,
) -> Result<Optimum> {
    search(a, n_s, m_s, p_suff, s, Some(pinned))
}
