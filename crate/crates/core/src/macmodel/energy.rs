use serde::{Deserialize, Serialize};

use super::chain::geometric_sum;
use super::{ChainSolution, FrameStats, MacTiming};

/// Per-slot energy rates in microjoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub e_idle: f64,
    pub e_sens: f64,
    pub e_tx: f64,
    pub e_rx: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            e_idle: 0.228,
            e_sens: 11.290,
            e_tx: 10.022,
            e_rx: 11.290,
        }
    }
}

impl EnergyParams {
    pub const ZERO: EnergyParams = EnergyParams {
        e_idle: 0.0,
        e_sens: 0.0,
        e_tx: 0.0,
        e_rx: 0.0,
    };
}

/// Stationary energy components of one contending node, in microjoules per slot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub backoff: f64,
    pub cca: f64,
    pub exchange: f64,
    pub deference: f64,
    pub total: f64,
}

/// Average per-slot energy of a node: backoff, CCA sensing, successful or
/// collided exchanges, and deference.
pub fn energy_per_node_sf(
    sol: &ChainSolution,
    _stats: &FrameStats,
    timing: &MacTiming,
    ep: &EnergyParams,
) -> EnergyBreakdown {
    let nb = timing.nb;
    let w0 = f64::from(timing.w0());
    let (a, phi, p_d, p_c) = (sol.alpha, sol.phi, sol.p_d, sol.p_c);

    let backoff = ep.e_idle / 2.0 * (w0 * sol.b00 * geometric_sum(2.0 * sol.omega, nb) + 3.0 * phi);
    let cca = ep.e_sens * (1.0 - p_d) * (2.0 - a) * phi;
    let exchange = (1.0 - sol.lambda)
        * (1.0 - p_d)
        * phi
        * (ep.e_tx * f64::from(timing.t_p())
            + ep.e_rx * f64::from(timing.l_ack) * (1.0 - p_c)
            + ep.e_idle
                * (f64::from(timing.t_ack) * (1.0 - p_c) + f64::from(timing.t_ack_ti) * p_c));
    let deference = ep.e_idle * p_d * f64::from(timing.l_s());
    EnergyBreakdown {
        backoff,
        cca,
        exchange,
        deference,
        total: backoff + cca + exchange + deference,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{frame_stats, solve_chain};
    use super::*;

    #[test]
    fn zero_rates_give_zero_energy() {
        let t = MacTiming::default();
        let sol = solve_chain(5, 128, &t).unwrap();
        let e = energy_per_node_sf(&sol, &frame_stats(&sol, &t), &t, &EnergyParams::ZERO);
        assert_eq!(e.total, 0.0);
    }

    #[test]
    fn deference_term_is_idle_rate_times_pd_times_exchange_length() {
        let t = MacTiming::default();
        let mut sol = solve_chain(5, 100, &t).unwrap();
        sol.p_d = 0.1;
        let ep = EnergyParams::default();
        let e = energy_per_node_sf(&sol, &frame_stats(&sol, &t), &t, &ep);
        assert_eq!(t.l_s(), 10);
        assert!((e.deference - 0.228).abs() < 1e-12);
    }

    #[test]
    fn total_is_sum_of_components() {
        let t = MacTiming::default();
        let sol = solve_chain(10, 256, &t).unwrap();
        let e = energy_per_node_sf(&sol, &frame_stats(&sol, &t), &t, &EnergyParams::default());
        assert!((e.total - (e.backoff + e.cca + e.exchange + e.deference)).abs() < 1e-12);
        assert!(e.backoff > 0.0 && e.cca > 0.0 && e.exchange > 0.0);
    }
}
