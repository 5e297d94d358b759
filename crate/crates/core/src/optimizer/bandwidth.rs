use serde::{Deserialize, Serialize};

use super::{optimize_mac, SearchSpace};
use crate::macmodel::{MacAnalytics, MacTiming};
use crate::{Error, Result};

/// Slots to collect `n_nodes` reports (or `m_s` when compressed) with one
/// dedicated `L_s` slot group per report.
pub fn tdma_delay(n_nodes: u32, timing: &MacTiming, compressed: bool, m_s: u32) -> u64 {
    let n = if compressed {
        m_s.min(n_nodes)
    } else {
        n_nodes
    };
    u64::from(n) * u64::from(timing.l_s())
}

/// Spatial sample count `m_S` as a function of group size, piecewise linear
/// through calibrated points and linearly extrapolated beyond them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingTable {
    /// `(n_S, m_S)` pairs, strictly increasing in `n_S`.
    pub points: Vec<(u32, u32)>,
}

impl Default for SamplingTable {
    /// Calibrated values for `n_T = 256`.
    fn default() -> Self {
        Self {
            points: vec![(48, 13), (64, 16), (80, 19), (96, 22), (128, 30), (256, 80)],
        }
    }
}

impl SamplingTable {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidParameter(
                "sampling table needs increasing n_S entries".into(),
            ));
        }
        if self.points.iter().any(|&(n, m)| m > n || n == 0) {
            return Err(Error::InvalidParameter(
                "sampling table entries need 0 < n_S and m_S <= n_S".into(),
            ));
        }
        Ok(())
    }

    /// `m_S(n_S)`, rounded up and clamped to `[1, n_S]`.
    pub fn m_s(&self, n_s: u32) -> u32 {
        let p = &self.points;
        if p.len() == 1 {
            let (n0, m0) = p[0];
            return ((f64::from(m0) * f64::from(n_s) / f64::from(n0)).ceil() as u32)
                .clamp(1, n_s.max(1));
        }
        let seg = p
            .windows(2)
            .position(|w| n_s <= w[1].0)
            .unwrap_or(p.len() - 2);
        let ((n0, m0), (n1, m1)) = (p[seg], p[seg + 1]);
        let x = f64::from(m0)
            + (f64::from(m1) - f64::from(m0)) * (f64::from(n_s) - f64::from(n0))
                / f64::from(n1 - n0);
        ((x - 1e-9).ceil().max(1.0) as u32).min(n_s.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Tdma,
    TdmaCs,
    Csma,
    CsmaCs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Tdma, Scheme::TdmaCs, Scheme::Csma, Scheme::CsmaCs];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tdma => "TDMA",
            Self::TdmaCs => "TDMA-CS",
            Self::Csma => "CSMA",
            Self::CsmaCs => "CSMA-CS",
        }
    }
}

/// Reporting delay of a scheme for a group of `n_s` nodes.
///
/// CSMA without compression needs every node's report (`m_S = n_S`).
/// `Ok(None)` means no configuration within the search bounds meets `p_suff`.
pub fn scheme_delay(
    scheme: Scheme,
    n_s: u32,
    a: &MacAnalytics,
    table: &SamplingTable,
    p_suff: f64,
    search: &SearchSpace,
) -> Result<Option<u64>> {
    let t = a.timing();
    let m_s = table.m_s(n_s);
    let needed = match scheme {
        Scheme::Tdma => return Ok(Some(tdma_delay(n_s, t, false, m_s))),
        Scheme::TdmaCs => return Ok(Some(tdma_delay(n_s, t, true, m_s))),
        Scheme::Csma => n_s,
        Scheme::CsmaCs => m_s,
    };
    match optimize_mac(a, n_s, needed, p_suff, search) {
        Ok(o) => Ok(Some(o.config.delay)),
        Err(Error::NoFeasibleConfig { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Largest group whose delay stays within `target_delay`, assuming the delay
/// is nondecreasing in group size (exponential then binary search).
pub fn max_group_size(
    scheme: Scheme,
    target_delay: u64,
    a: &MacAnalytics,
    table: &SamplingTable,
    p_suff: f64,
    search: &SearchSpace,
) -> Result<u32> {
    if target_delay == 0 {
        return Err(Error::InvalidParameter("target delay must be > 0".into()));
    }
    let bounded = SearchSpace {
        max_delay: Some(target_delay),
        ..search.clone()
    };
    let ok = |n: u32| -> Result<bool> {
        Ok(scheme_delay(scheme, n, a, table, p_suff, &bounded)?.is_some_and(|d| d <= target_delay))
    };
    if !ok(1)? {
        return Err(Error::Infeasible(format!(
            "{} cannot serve a single node within {target_delay} slots",
            scheme.name()
        )));
    }
    let (mut lo, mut hi) = (1u32, 2u32);
    while ok(hi)? {
        lo = hi;
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::Infeasible("group size unbounded".into()))?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthScenario {
    /// Total number of nodes `N`.
    pub n_total: u32,
    pub n_s_tdma: u32,
    pub n_s_csma_cs: u32,
    pub m_t: u32,
    pub n_t: u32,
}

/// Orthogonal channels: `ceil(N / n_S^TDMA)` for TDMA and
/// `round(N / n_S^CSMA-CS * m_T / n_T)` (at least one) for CSMA-CS, whose
/// groups only report in `m_T` of every `n_T` intervals.
pub fn channels_required(s: &BandwidthScenario) -> Result<(u32, u32)> {
    if s.n_s_tdma == 0 || s.n_s_csma_cs == 0 || s.n_t == 0 || s.m_t > s.n_t {
        return Err(Error::InvalidParameter(
            "group sizes and n_T must be >= 1 with m_T <= n_T".into(),
        ));
    }
    let tdma = s.n_total.div_ceil(s.n_s_tdma);
    let load =
        f64::from(s.n_total) / f64::from(s.n_s_csma_cs) * f64::from(s.m_t) / f64::from(s.n_t);
    let csma = if s.n_total == 0 {
        0
    } else {
        (load.round() as u32).max(1)
    };
    Ok((tdma, csma))
}
