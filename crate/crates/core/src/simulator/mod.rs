//! Slot-accurate simulation of the superframe protocol and of rolling
//! reporting campaigns.

mod campaign;
mod engine;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use campaign::{
    request_schedule, run_campaign, CampaignConfig, CampaignResult, RiRecord, WindowRecord,
};
use engine::Engine;
pub use engine::{Event, EventKind, FrameTally, NodeState, Phase, SfTrace};

use crate::macmodel::{EnergyParams, MacConfig, MacTiming};
use crate::rng::rng_from;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Traffic {
    /// One packet per participating node per reporting interval.
    SinglePacket,
    /// Every node always has a packet; a new frame starts as soon as one ends.
    Saturated,
}

/// What a single-packet node does after a collision or a channel-access failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Start a new attempt at backoff stage 0 and keep contending until the
    /// interval ends; only a success removes the node.
    #[default]
    Retry,
    /// The node gives up for the rest of the reporting interval.
    Terminal,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimOptions {
    pub failure_policy: FailurePolicy,
    /// Deferred nodes restart from backoff stage 0 in the next superframe.
    pub reset_stage_on_deference: bool,
    /// Keep per-event logs and channel occupancy in traces.
    pub record_events: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub timing: MacTiming,
    pub energy: EnergyParams,
    pub options: SimOptions,
}

impl SimConfig {
    fn engine(&self, traffic: Traffic) -> Engine<'_> {
        Engine {
            timing: &self.timing,
            energy: &self.energy,
            opts: &self.options,
            traffic,
        }
    }
}

/// Simulates one superframe with `h` fresh single-packet contenders.
pub fn run_sf(h: u32, sf_len: u32, cfg: &SimConfig, seed: u64) -> SfTrace {
    let mut rng = rng_from(seed, &[0x5f]);
    let mut nodes = vec![NodeState::idle(); h as usize];
    for n in &mut nodes {
        n.join(0, &cfg.timing, &mut rng);
    }
    cfg.engine(Traffic::SinglePacket)
        .run(&mut nodes, sf_len, 0, &mut rng, None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiOutcome {
    pub participants: u32,
    pub successes: u32,
    pub sufficient: bool,
    /// Slots from the start of the interval until the `m_S`-th success
    /// completed, or the full reporting time when it never did.
    pub delay_used: u64,
    pub reporting_time: u64,
    /// Nodes whose packet reached the control center.
    pub delivered: Vec<usize>,
    pub energy: f64,
    pub traces: Vec<SfTrace>,
}

/// Simulates one reporting interval: Bernoulli participation followed by
/// `K_tau` superframes in which successful nodes leave contention.
pub fn run_ri(
    n_s: u32,
    m_s: u32,
    mac: &MacConfig,
    cfg: &SimConfig,
    seed: u64,
) -> Result<RiOutcome> {
    if m_s > n_s {
        return Err(Error::InvalidParameter(format!(
            "m_S = {m_s} exceeds n_S = {n_s}"
        )));
    }
    if mac.bo.len() != mac.k_tau as usize {
        return Err(Error::InvalidParameter(
            "beacon-order list does not match K_tau".into(),
        ));
    }
    let t = &cfg.timing;
    let mut rng = rng_from(seed, &[0x71]);
    let mut nodes = vec![NodeState::idle(); n_s as usize];
    let mut participants = 0;
    for n in &mut nodes {
        if rand::Rng::gen_bool(&mut rng, mac.p_s) {
            n.join(0, t, &mut rng);
            participants += 1;
        }
    }
    let engine = cfg.engine(Traffic::SinglePacket);
    let mut base = 0u64;
    let mut traces = Vec::with_capacity(mac.bo.len());
    let mut delivered = Vec::new();
    let mut delay_used = None;
    for &bo in &mac.bo {
        let sf_len = t.sf_len(bo);
        let tr = engine.run(&mut nodes, sf_len, base, &mut rng, None);
        for (k, &slot) in tr.success_slots.iter().enumerate() {
            if delay_used.is_none() && delivered.len() + k + 1 == m_s as usize {
                delay_used = Some(base + u64::from(slot) + 1);
            }
        }
        delivered.extend_from_slice(&tr.successful_nodes);
        base += u64::from(sf_len);
        traces.push(tr);
        if nodes.iter().all(|n| !n.is_contending()) {
            // nothing left to simulate; remaining superframes are silent
            for &rest in &mac.bo[traces.len()..] {
                traces.push(SfTrace {
                    sf_len: t.sf_len(rest),
                    energy: vec![0.0; nodes.len()],
                    ..Default::default()
                });
            }
            break;
        }
    }
    let successes = delivered.len() as u32;
    let energy = nodes.iter().map(|n| n.energy_accum).sum();
    Ok(RiOutcome {
        participants,
        successes,
        sufficient: successes >= m_s,
        delay_used: if m_s == 0 {
            0
        } else {
            delay_used.unwrap_or(mac.delay)
        },
        reporting_time: mac.delay,
        delivered,
        energy,
        traces,
    })
}

/// Empirical counterparts of the chain and frame quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturatedStats {
    pub h: u32,
    pub sf_len: u32,
    pub superframes: u64,
    pub alpha: f64,
    pub beta: f64,
    /// CCA1 attempts per node-slot.
    pub phi: f64,
    pub p_succ: f64,
    pub p_coll: f64,
    pub p_ccas: f64,
    pub p_d: f64,
    pub t_bar: f64,
    pub sigma2: f64,
    /// Energy per node per slot, microjoules.
    pub energy_per_node_slot: f64,
    pub frames: u64,
}

/// Runs `n_sf` consecutive superframes with `h` saturated nodes.
pub fn run_saturated(
    h: u32,
    sf_len: u32,
    n_sf: u64,
    cfg: &SimConfig,
    seed: u64,
) -> Result<SaturatedStats> {
    if h == 0 || n_sf == 0 {
        return Err(Error::InvalidParameter(
            "saturated run needs nodes and superframes".into(),
        ));
    }
    let mut rng = rng_from(seed, &[0x5a]);
    let mut opts = cfg.options.clone();
    opts.record_events = false;
    let engine = Engine {
        timing: &cfg.timing,
        energy: &cfg.energy,
        opts: &opts,
        traffic: Traffic::Saturated,
    };
    let mut nodes = vec![NodeState::idle(); h as usize];
    for n in &mut nodes {
        n.join(0, &cfg.timing, &mut rng);
    }
    let mut tally = FrameTally::default();
    let (mut c1, mut b1, mut c2, mut b2) = (0u64, 0u64, 0u64, 0u64);
    let mut energy = 0.0;
    for k in 0..n_sf {
        let tr = engine.run(
            &mut nodes,
            sf_len,
            k * u64::from(sf_len),
            &mut rng,
            Some(&mut tally),
        );
        c1 += tr.cca1_count;
        b1 += tr.cca1_busy;
        c2 += tr.cca2_count;
        b2 += tr.cca2_busy;
        energy += tr.energy.iter().sum::<f64>();
    }
    let frames = tally.count();
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let node_slots = f64::from(h) * n_sf as f64 * f64::from(sf_len);
    let mean = tally.len_sum / frames.max(1) as f64;
    Ok(SaturatedStats {
        h,
        sf_len,
        superframes: n_sf,
        alpha: ratio(b1, c1),
        beta: ratio(b2, c2),
        phi: c1 as f64 / node_slots,
        p_succ: ratio(tally.by_kind[EventKind::Success as usize], frames),
        p_coll: ratio(tally.by_kind[EventKind::Collision as usize], frames),
        p_ccas: ratio(tally.by_kind[EventKind::CcaFailure as usize], frames),
        p_d: ratio(tally.by_kind[EventKind::Deference as usize], frames),
        t_bar: mean,
        sigma2: (tally.len_sq_sum / frames.max(1) as f64 - mean * mean).max(0.0),
        energy_per_node_slot: energy / node_slots,
        frames,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergySummary {
    pub per_node: Vec<f64>,
    pub total: f64,
}

/// Sums per-node energy over a sequence of superframe traces.
pub fn measure_energy(traces: &[SfTrace]) -> EnergySummary {
    let n = traces.iter().map(|t| t.energy.len()).max().unwrap_or(0);
    let mut per_node = vec![0.0; n];
    for tr in traces {
        for (acc, e) in per_node.iter_mut().zip(&tr.energy) {
            *acc += e;
        }
    }
    let total = per_node.iter().sum();
    EnergySummary { per_node, total }
}

/// Writes the event log of recorded traces as `sf,slot,node,event,frame_len`.
pub fn write_trace_csv<W: Write>(traces: &[SfTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sf", "slot", "node", "event", "frame_len"])?;
    for (k, tr) in traces.iter().enumerate() {
        for ev in &tr.events {
            let kind = match ev.kind {
                EventKind::Success => "success",
                EventKind::Collision => "collision",
                EventKind::CcaFailure => "cca_failure",
                EventKind::Deference => "deference",
            };
            w.write_record([
                k.to_string(),
                ev.slot.to_string(),
                ev.node.to_string(),
                kind.into(),
                ev.frame_len.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
