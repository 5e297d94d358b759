//! Probability of receiving enough reports in one reporting interval.
//!
//! For `h` contenders the superframes of the interval are processed in
//! order; in each superframe the number of generic frames is drawn from a
//! Gaussian frame-count model and the successes among them from the
//! multinomial over {success, collision, deference (at most one), CCA
//! failure}. Successful nodes leave the contention, so the next superframe
//! sees `h_{i+1} = h_i - K_succ,i` contenders. A dynamic program over the
//! number of remaining contenders replaces the explicit sum over all
//! per-superframe success combinations.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::FrameStats;

/// Standard normal tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `Q((SF - k T) / sqrt(k sigma^2))`; zero outside `1 <= k <= K_{S,max}`.
pub fn prob_k_frames(k: u32, sf_len: u32, stats: &FrameStats) -> f64 {
    if k == 0 || k > stats.k_s_max {
        return 0.0;
    }
    let k = f64::from(k);
    let gap = f64::from(sf_len) - k * stats.t_bar;
    let sd = (k * stats.sigma2).sqrt();
    if sd == 0.0 {
        return if gap > 0.0 {
            0.0
        } else if gap < 0.0 {
            1.0
        } else {
            0.5
        };
    }
    q_function(gap / sd)
}

pub(crate) fn ln_choose(n: u32, k: u32) -> f64 {
    use statrs::function::gamma::ln_gamma;
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
}

/// `x^e` in log space; `0^0 = 1`.
fn ln_pow(x: f64, e: u32) -> f64 {
    if e == 0 {
        0.0
    } else {
        f64::from(e) * x.ln()
    }
}

/// Probability of `k_succ` successes among `k_frames` generic frames with at
/// most one deference frame.
pub fn prob_succ_given_frames(k_succ: u32, k_frames: u32, stats: &FrameStats) -> f64 {
    if k_succ > k_frames {
        return 0.0;
    }
    let rest = k_frames - k_succ;
    let other = stats.p_coll + stats.p_ccas;
    let base = ln_choose(k_frames, k_succ) + ln_pow(stats.p_succ, k_succ);
    let no_deference = (base + ln_pow(other, rest)).exp();
    let one_deference = if rest >= 1 {
        f64::from(rest) * stats.p_d * (base + ln_pow(other, rest - 1)).exp()
    } else {
        0.0
    };
    no_deference + one_deference
}

/// Binomial probability mass `C(n, h) p^h (1-p)^(n-h)`.
pub fn binomial_pmf(n: u32, h: u32, p: f64) -> f64 {
    if h > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if h == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if h == n { 1.0 } else { 0.0 };
    }
    (ln_choose(n, h) + f64::from(h) * p.ln() + f64::from(n - h) * (-p).ln_1p()).exp()
}

/// How the number of generic frames in a superframe is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FrameCountModel {
    /// Weight `k` frames by the Gaussian tail value `Q((SF - kT)/sqrt(k sigma^2))`,
    /// renormalised over `k` in `[K_succ, K_{S,max}]`.
    PrintedTail,
    /// Weight `k` frames by `P(S_k <= SF < S_{k+1})` under the same Gaussian
    /// approximation of the partial sums `S_k`, i.e. the difference of
    /// consecutive tail values; the last count absorbs `P(S_K <= SF)`.
    #[default]
    Renewal,
}

/// Analytic semantics of the per-superframe success distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SufficiencyModel {
    pub frame_counts: FrameCountModel,
    /// When set, the mass of `K_succ,i > h_i` is assigned to `K_succ,i = h_i`
    /// (a superframe cannot deliver more reports than it has contenders).
    pub cap_successes: bool,
    pub timeline: FrameTimeline,
}

impl Default for SufficiencyModel {
    fn default() -> Self {
        Self {
            frame_counts: FrameCountModel::Renewal,
            cap_successes: true,
            timeline: FrameTimeline::PerNode,
        }
    }
}

/// Whose frames fill the superframe in the frame-count law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTimeline {
    /// Frames of length `T` follow one another back to back.
    #[default]
    PerNode,
    /// The channel sees the superposition of `h` independent per-node frame
    /// processes; under the normal approximation this is a renewal process
    /// with mean `T/h` and variance `sigma^2/h^2`.
    Superposed,
}

/// Renewal weights over frame counts `0..=K_{S,max}`.
fn renewal_weights(sf_len: u32, stats: &FrameStats) -> Vec<f64> {
    let k_max = stats.k_s_max;
    let tail: Vec<f64> = (0..=k_max + 1)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                tail_unbounded(k, sf_len, stats)
            }
        })
        .collect();
    let mut w: Vec<f64> = (0..=k_max)
        .map(|k| (tail[k as usize + 1] - tail[k as usize]).max(0.0))
        .collect();
    w[k_max as usize] = 1.0 - tail[k_max as usize];
    w
}

/// `P(S_k > SF)` without the `K_{S,max}` cut-off.
fn tail_unbounded(k: u32, sf_len: u32, stats: &FrameStats) -> f64 {
    let mut st = *stats;
    st.k_s_max = u32::MAX;
    prob_k_frames(k, sf_len, &st)
}

/// Distribution of the number of successes in one superframe with `contenders` nodes.
///
/// Entry `s` is the probability of exactly `s` successes, for `s` in
/// `0..=contenders`. Mass lost to truncated deference multiplicities (and,
/// without capping, to `s > contenders`) is not redistributed.
pub fn sf_success_distribution(
    contenders: u32,
    sf_len: u32,
    stats: &FrameStats,
    model: &SufficiencyModel,
) -> Vec<f64> {
    let r = contenders as usize;
    let k_max = stats.k_s_max;
    let mut dist = vec![0.0; r + 1];
    if contenders == 0 {
        dist[0] = 1.0;
        return dist;
    }
    let scaled;
    let stats = match model.timeline {
        FrameTimeline::PerNode => stats,
        FrameTimeline::Superposed => {
            let h = f64::from(contenders);
            scaled = FrameStats {
                t_bar: stats.t_bar / h,
                sigma2: stats.sigma2 / (h * h),
                ..*stats
            };
            &scaled
        }
    };
    let s_top = if model.cap_successes {
        k_max
    } else {
        contenders.min(k_max)
    };
    match model.frame_counts {
        FrameCountModel::Renewal => {
            let w = renewal_weights(sf_len, stats);
            for (k, &wk) in w.iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                let k = k as u32;
                for s in 0..=k.min(s_top) {
                    dist[(s as usize).min(r)] += wk * prob_succ_given_frames(s, k, stats);
                }
            }
        }
        FrameCountModel::PrintedTail => {
            let q: Vec<f64> = (0..=k_max)
                .map(|k| prob_k_frames(k, sf_len, stats))
                .collect();
            // suffix sums for renormalisation over [s, K_max]
            let mut suffix = vec![0.0; k_max as usize + 2];
            for k in (0..=k_max as usize).rev() {
                suffix[k] = suffix[k + 1] + q[k];
            }
            for s in 0..=s_top {
                let norm = suffix[s as usize];
                if norm <= 0.0 {
                    continue;
                }
                let mass: f64 = (s..=k_max)
                    .map(|k| q[k as usize] / norm * prob_succ_given_frames(s, k, stats))
                    .sum();
                dist[(s as usize).min(r)] += mass;
            }
        }
    }
    dist
}

/// Per-superframe inputs for one contender count.
pub trait SuperframeModel {
    /// Success distribution for `contenders` nodes in a superframe of `sf_len` slots.
    fn success_distribution(
        &self,
        contenders: u32,
        sf_len: u32,
    ) -> crate::Result<std::sync::Arc<Vec<f64>>>;
    /// Expected energy of one contending node over the whole superframe (microjoules).
    fn node_energy(&self, contenders: u32, sf_len: u32) -> crate::Result<f64>;
}

/// `P(K_succ >= m_s | h)` for every `h` in `0..=n_s`.
pub fn sufficiency_profile<M: SuperframeModel + ?Sized>(
    model: &M,
    n_s: u32,
    m_s: u32,
    sf_lens: &[u32],
) -> crate::Result<Vec<f64>> {
    let mut v = SuffixValues::terminal(n_s, m_s);
    for &sf in sf_lens.iter().rev() {
        v = v.prepend(model, sf)?;
    }
    Ok(v.profile())
}

/// Backward values of a run of superframes: `V(r, need)` is the probability
/// that `r` remaining contenders still deliver `need` reports before the
/// interval ends. Prepending a superframe costs one DP step, so sequences
/// sharing a suffix share work.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffixValues {
    n: usize,
    m: usize,
    v: Vec<f64>,
}

impl SuffixValues {
    /// Values after the last superframe.
    pub fn terminal(n_s: u32, m_s: u32) -> Self {
        let (n, m) = (n_s as usize, m_s as usize);
        let mut v = vec![0.0; (n + 1) * (m + 1)];
        for r in 0..=n {
            v[r * (m + 1)] = 1.0;
        }
        Self { n, m, v }
    }

    pub fn prepend<M: SuperframeModel + ?Sized>(
        &self,
        model: &M,
        sf_len: u32,
    ) -> crate::Result<Self> {
        let (n, m) = (self.n, self.m);
        let w = m + 1;
        let mut out = vec![0.0; self.v.len()];
        out[..w].copy_from_slice(&self.v[..w]);
        for r in 1..=n {
            let dist = model.success_distribution(r as u32, sf_len)?;
            let row = &mut out[r * w..(r + 1) * w];
            for (s, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let from = &self.v[(r - s) * w..(r - s + 1) * w];
                for (need, x) in row.iter_mut().enumerate() {
                    *x += p * from[need.saturating_sub(s)];
                }
            }
        }
        Ok(Self { n, m, v: out })
    }

    /// `P(K_succ >= m_s | h)` for `h` in `0..=n_s`.
    pub fn profile(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|h| self.v[h * (self.m + 1) + self.m].clamp(0.0, 1.0))
            .collect()
    }
}

/// Returns `(P(K_succ >= m_s), E[1{K_succ >= m_s} sum_i h_i E_i])` for `h` contenders.
pub(crate) fn run_dp<M: SuperframeModel + ?Sized>(
    model: &M,
    h: u32,
    m_s: u32,
    sf_lens: &[u32],
    with_energy: bool,
) -> crate::Result<(f64, f64)> {
    if h < m_s {
        return Ok((0.0, 0.0));
    }
    let n = h as usize;
    // state: remaining contenders r; successes so far = h - r
    let mut mass = vec![0.0; n + 1];
    let mut energy = vec![0.0; n + 1];
    mass[n] = 1.0;
    for &sf in sf_lens {
        let mut next_mass = vec![0.0; n + 1];
        let mut next_energy = vec![0.0; n + 1];
        for r in 0..=n {
            if mass[r] == 0.0 && energy[r] == 0.0 {
                continue;
            }
            if r == 0 {
                next_mass[0] += mass[0];
                next_energy[0] += energy[0];
                continue;
            }
            let dist = model.success_distribution(r as u32, sf)?;
            let spent = if with_energy {
                mass[r] * r as f64 * model.node_energy(r as u32, sf)?
            } else {
                0.0
            };
            for (s, &p) in dist.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                next_mass[r - s] += mass[r] * p;
                next_energy[r - s] += (energy[r] + spent) * p;
            }
        }
        mass = next_mass;
        energy = next_energy;
    }
    let keep = n - m_s as usize;
    let prob: f64 = mass[..=keep].iter().sum();
    let en: f64 = energy[..=keep].iter().sum();
    Ok((prob.clamp(0.0, 1.0), en))
}

/// Mixes a per-`h` profile with the binomial participation law.
pub fn mix_participation(profile: &[f64], p_s: f64) -> f64 {
    let n = (profile.len() - 1) as u32;
    profile
        .iter()
        .enumerate()
        .map(|(h, &f)| {
            if f == 0.0 {
                0.0
            } else {
                binomial_pmf(n, h as u32, p_s) * f
            }
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> FrameStats {
        FrameStats {
            p_succ: 0.6,
            p_coll: 0.2,
            p_ccas: 0.15,
            p_d: 0.05,
            t_bar: 20.0,
            sigma2: 25.0,
            k_s_max: 21,
        }
    }

    /// Simpson quadrature of the standard normal density on [x, x + 12].
    fn normal_tail_quadrature(x: f64) -> f64 {
        let n = 200_000;
        let (a, b) = (x, x + 12.0);
        let h = (b - a) / n as f64;
        let f = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut s = f(a) + f(b);
        for i in 1..n {
            let t = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
        }
        s * h / 3.0
    }

    #[test]
    fn q_at_zero_gap_is_half() {
        let st = fixture();
        assert!((prob_k_frames(5, 100, &st) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn q_fixture_matches_quadrature() {
        let st = fixture();
        let v = prob_k_frames(5, 128, &st);
        let x = 28.0 / 125f64.sqrt();
        assert!((v - normal_tail_quadrature(x)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn large_gap_drives_tail_to_zero_and_overshoot_to_one() {
        let st = FrameStats {
            k_s_max: 1000,
            ..fixture()
        };
        assert!(prob_k_frames(1, 10_000, &st) < 1e-12);
        assert!(prob_k_frames(900, 128, &st) > 1.0 - 1e-12);
    }

    #[test]
    fn out_of_range_frame_counts_are_zero() {
        let st = fixture();
        assert_eq!(prob_k_frames(0, 128, &st), 0.0);
        assert_eq!(prob_k_frames(22, 128, &st), 0.0);
    }

    /// Explicit enumeration over (collisions j, deferences d, CCA failures l).
    fn enumerate(k_succ: u32, k: u32, st: &FrameStats) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let mut total = 0.0;
        for d in 0..=1u32 {
            for j in 0..=k {
                if k_succ + j + d > k {
                    continue;
                }
                let l = k - k_succ - j - d;
                let coef = fact(k) / (fact(k_succ) * fact(j) * fact(d) * fact(l));
                total += coef
                    * st.p_succ.powi(k_succ as i32)
                    * st.p_coll.powi(j as i32)
                    * st.p_d.powi(d as i32)
                    * st.p_ccas.powi(l as i32);
            }
        }
        total
    }

    #[test]
    fn multinomial_matches_enumeration() {
        let st = fixture();
        for k in 0..=8 {
            for s in 0..=k {
                let a = prob_succ_given_frames(s, k, &st);
                let b = enumerate(s, k, &st);
                assert!((a - b).abs() < 1e-12, "s={s} k={k}: {a} vs {b}");
            }
        }
        assert!((prob_succ_given_frames(1, 1, &st) - st.p_succ).abs() < 1e-15);
        let other = st.p_coll + st.p_ccas;
        let two_fail = other * other + 2.0 * other * st.p_d;
        assert!((prob_succ_given_frames(0, 2, &st) - two_fail).abs() < 1e-15);
    }

    #[test]
    fn total_over_successes_excludes_only_multiple_deferences() {
        let st = fixture();
        for k in 0..=6u32 {
            let total: f64 = (0..=k).map(|s| prob_succ_given_frames(s, k, &st)).sum();
            // all length-k strings with at most one deference
            let other = 1.0 - st.p_d;
            let expected = other.powi(k as i32)
                + f64::from(k)
                    * st.p_d
                    * other.powi(k as i32 - 1).max(0.0)
                    * f64::from((k > 0) as u8);
            assert!((total - expected).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial_pmf(5, 0, 0.0), 1.0);
        assert_eq!(binomial_pmf(5, 5, 1.0), 1.0);
        let s: f64 = (0..=20).map(|h| binomial_pmf(20, h, 0.37)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renewal_weights_sum_to_one() {
        let st = fixture();
        let w = renewal_weights(128, &st);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x >= 0.0));
    }

    /// Lossy toy superframe: each contender succeeds with a probability that
    /// depends on the superframe length, and a little mass leaks away.
    struct Toy;

    impl SuperframeModel for Toy {
        fn success_distribution(
            &self,
            r: u32,
            sf_len: u32,
        ) -> crate::Result<std::sync::Arc<Vec<f64>>> {
            let p = f64::from(sf_len) / (f64::from(sf_len) + 40.0);
            Ok(std::sync::Arc::new(
                (0..=r).map(|s| 0.97 * binomial_pmf(r, s, p)).collect(),
            ))
        }

        fn node_energy(&self, _: u32, sf_len: u32) -> crate::Result<f64> {
            Ok(f64::from(sf_len))
        }
    }

    #[test]
    fn backward_profile_matches_forward_dp() {
        for (n, m, sfs) in [
            (9u32, 3u32, vec![16u32, 32, 64]),
            (12, 12, vec![64, 64]),
            (7, 0, vec![8]),
            (5, 2, vec![]),
        ] {
            let back = sufficiency_profile(&Toy, n, m, &sfs).unwrap();
            for h in 0..=n {
                let fwd = run_dp(&Toy, h, m, &sfs, false).unwrap().0;
                assert!(
                    (back[h as usize] - fwd).abs() < 1e-12,
                    "n={n} m={m} h={h}: {} vs {fwd}",
                    back[h as usize]
                );
            }
        }
    }
}
