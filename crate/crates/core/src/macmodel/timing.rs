use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slot-denominated protocol constants of the superframe CSMA/CA scheme.
///
/// Derived lengths: packet `T_p = 5 + l_mac`, successful exchange
/// `L_s = T_p + t_ack + l_ack`, collided exchange `L_c = T_p + t_ack_ti`,
/// backoff windows `W_i = 2^priority * 2^i` for stages `0..=nb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacTiming {
    /// Base superframe length `SF_0` in slots.
    pub sf0: u32,
    pub bo_max: u32,
    pub k_tau_max: u32,
    /// Number of CCAs before a transmission; also the base backoff exponent.
    pub priority: u32,
    /// Maximum backoff stage; a node gets `nb + 1` channel access attempts.
    pub nb: u32,
    pub l_mac: u32,
    pub l_ack: u32,
    pub t_ack: u32,
    pub t_ack_ti: u32,
}

impl Default for MacTiming {
    fn default() -> Self {
        Self {
            sf0: 8,
            bo_max: 8,
            k_tau_max: 10,
            priority: 2,
            nb: 5,
            l_mac: 2,
            l_ack: 2,
            t_ack: 1,
            t_ack_ti: 4,
        }
    }
}

impl MacTiming {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sf0", self.sf0),
            ("k_tau_max", self.k_tau_max),
            ("priority", self.priority),
            ("l_ack", self.l_ack),
            ("t_ack", self.t_ack),
            ("t_ack_ti", self.t_ack_ti),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidParameter(format!(
                    "timing.{name} must be positive"
                )));
            }
        }
        if self.priority + self.nb > 20 {
            return Err(Error::InvalidParameter(
                "backoff exponent priority + nb exceeds 20".into(),
            ));
        }
        if self.bo_max > 16 {
            return Err(Error::InvalidParameter("timing.bo_max exceeds 16".into()));
        }
        Ok(())
    }

    pub fn t_p(&self) -> u32 {
        5 + self.l_mac
    }

    pub fn l_s(&self) -> u32 {
        self.t_p() + self.t_ack + self.l_ack
    }

    pub fn l_c(&self) -> u32 {
        self.t_p() + self.t_ack_ti
    }

    pub fn w0(&self) -> u32 {
        1 << self.priority
    }

    /// Backoff window of `stage` (`W_stage = W_0 * 2^stage`).
    pub fn window(&self, stage: u32) -> u32 {
        self.w0() << stage
    }

    /// `macMaxBE`, implied by `nb = macMaxBE - priority`.
    pub fn mac_max_be(&self) -> u32 {
        self.priority + self.nb
    }

    /// Superframe length for beacon order `bo`.
    pub fn sf_len(&self, bo: u32) -> u32 {
        self.sf0 << bo
    }

    /// Minimum generic-frame length used to bound frames per superframe.
    pub fn min_frame_len(&self) -> u32 {
        (self.nb + 1).min(self.l_s() + 2)
    }

    /// `K_{S,max} = floor(SF / min(NB + 1, L_s + 2))`.
    pub fn max_frames(&self, sf_len: u32) -> u32 {
        sf_len / self.min_frame_len()
    }

    /// Reporting delay `D = sum SF_0 * 2^{BO_i}`.
    pub fn delay(&self, bo: &[u32]) -> u64 {
        bo.iter().map(|&b| u64::from(self.sf_len(b))).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_lengths_match_defaults() {
        let t = MacTiming::default();
        assert_eq!(t.t_p(), 7);
        assert_eq!(t.l_s(), 10);
        assert_eq!(t.l_c(), 11);
        assert_eq!(t.w0(), 4);
        assert_eq!(t.window(5), 128);
        assert_eq!(t.mac_max_be(), 7);
        assert_eq!(t.min_frame_len(), 6);
    }

    #[test]
    fn delay_strictly_increasing_in_each_beacon_order() {
        let t = MacTiming::default();
        let base = [2u32, 3, 4];
        for i in 0..base.len() {
            let mut bumped = base;
            bumped[i] += 1;
            assert!(t.delay(&bumped) > t.delay(&base));
        }
        assert_eq!(t.delay(&[0]), u64::from(t.sf0));
    }
}
