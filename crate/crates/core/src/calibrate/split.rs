use crate::{Error, Result};

/// Integer `(m_S, m_T)` with `m_S m_T >= M_thresh` and
/// `m_S / m_T` close to `n_S / n_T * M_S,thresh / M_T,thresh`.
///
/// Searches three steps around the real-valued solution for the smallest
/// product, breaking ties by distance to the ratio; falls back to a full scan
/// when the window holds no admissible pair.
pub fn split(
    n_s: usize,
    n_t: usize,
    ms_thresh: usize,
    mt_thresh: usize,
    m_thresh: usize,
) -> Result<(usize, usize)> {
    if n_s == 0 || n_t == 0 || ms_thresh == 0 || mt_thresh == 0 || m_thresh == 0 {
        return Err(Error::InvalidParameter(
            "split needs positive inputs".into(),
        ));
    }
    if m_thresh > n_s * n_t {
        return Err(Error::Infeasible(format!(
            "M_thresh {m_thresh} exceeds N = {}",
            n_s * n_t
        )));
    }
    let ratio = n_s as f64 / n_t as f64 * ms_thresh as f64 / mt_thresh as f64;
    let ms_star = (m_thresh as f64 * ratio).sqrt();
    let mt_star = (m_thresh as f64 / ratio).sqrt();
    let window = |x: f64, cap: usize| {
        let lo = (x.floor() as i64 - 3).max(1) as usize;
        let hi = ((x.ceil() as i64 + 3).max(1) as usize).min(cap);
        lo..=hi
    };
    let score = |ms: usize, mt: usize| ((ms as f64 / mt as f64).ln() - ratio.ln()).abs();
    let pick = |cands: &mut dyn Iterator<Item = (usize, usize)>| {
        cands
            .filter(|&(ms, mt)| ms * mt >= m_thresh)
            .min_by(|a, b| {
                (a.0 * a.1)
                    .cmp(&(b.0 * b.1))
                    .then(score(a.0, a.1).total_cmp(&score(b.0, b.1)))
            })
    };
    let near =
        pick(&mut window(ms_star, n_s).flat_map(|ms| window(mt_star, n_t).map(move |mt| (ms, mt))));
    near.or_else(|| {
        pick(
            &mut (1..=n_s)
                .map(|ms| (ms, m_thresh.div_ceil(ms)))
                .filter(|&(_, mt)| mt <= n_t),
        )
    })
    .ok_or_else(|| Error::Infeasible("no admissible (m_S, m_T) pair".into()))
}
