//! Slot-stepped superframe engine.

use rand::Rng;
use serde::Serialize;

use super::{FailurePolicy, SimOptions, Traffic};
use crate::macmodel::{EnergyParams, MacTiming};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NotParticipating,
    Backoff,
    Cca,
    Transmitting,
    WaitingAck,
    Deferred,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Success,
    Collision,
    CcaFailure,
    Deference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Event {
    /// Slot index within the superframe at which the frame ended.
    pub slot: u32,
    pub node: usize,
    pub kind: EventKind,
    /// Generic-frame length in slots.
    pub frame_len: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeState {
    pub backoff_stage: u32,
    pub backoff_counter: u32,
    pub cca_progress: u32,
    pub phase: Phase,
    /// CCA rounds left before the current attempt ends in a channel-access failure.
    pub attempts_left: u32,
    pub energy_accum: f64,
    frame_start: u64,
    tx_start: u64,
    collided: bool,
}

impl NodeState {
    pub fn idle() -> Self {
        Self {
            backoff_stage: 0,
            backoff_counter: 0,
            cca_progress: 0,
            phase: Phase::NotParticipating,
            attempts_left: 0,
            energy_accum: 0.0,
            frame_start: 0,
            tx_start: 0,
            collided: false,
        }
    }

    pub(crate) fn join(&mut self, at: u64, timing: &MacTiming, rng: &mut SimRng) {
        self.start_frame(at, 0, timing, rng);
    }

    fn start_frame(&mut self, at: u64, stage: u32, timing: &MacTiming, rng: &mut SimRng) {
        self.frame_start = at;
        self.backoff_stage = stage;
        self.backoff_counter = rng.gen_range(0..timing.window(stage));
        self.attempts_left = timing.nb + 1 - stage;
        self.cca_progress = 0;
        self.collided = false;
        self.phase = Phase::Backoff;
    }

    pub fn is_contending(&self) -> bool {
        !matches!(self.phase, Phase::NotParticipating | Phase::Done)
    }
}

/// Per-superframe record.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SfTrace {
    pub sf_len: u32,
    /// Nodes contending when the superframe began.
    pub contenders: u32,
    pub successes: u32,
    pub collided_nodes: u32,
    pub collision_groups: u32,
    pub cca_failures: u32,
    pub deferrals: u32,
    /// Nodes still mid-backoff or mid-exchange at the end of the superframe.
    pub unfinished: u32,
    /// Generic frames that ended inside the superframe.
    pub frames: u32,
    pub cca1_count: u64,
    pub cca1_busy: u64,
    pub cca2_count: u64,
    pub cca2_busy: u64,
    /// Slot (within the superframe) at which each success completed.
    pub success_slots: Vec<u32>,
    pub successful_nodes: Vec<usize>,
    /// Per-node energy spent in this superframe, microjoules.
    pub energy: Vec<f64>,
    /// Filled only when events are recorded.
    pub events: Vec<Event>,
    pub occupancy: Vec<bool>,
}

/// Accumulated generic-frame statistics (saturated runs).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameTally {
    pub by_kind: [u64; 4],
    pub len_sum: f64,
    pub len_sq_sum: f64,
}

impl FrameTally {
    fn push(&mut self, kind: EventKind, len: u64) {
        self.by_kind[kind as usize] += 1;
        let l = len as f64;
        self.len_sum += l;
        self.len_sq_sum += l * l;
    }

    pub fn count(&self) -> u64 {
        self.by_kind.iter().sum()
    }
}

pub(crate) struct Engine<'a> {
    pub timing: &'a MacTiming,
    pub energy: &'a EnergyParams,
    pub opts: &'a SimOptions,
    pub traffic: Traffic,
}

impl Engine<'_> {
    /// Advances every node through one superframe that starts at global slot `base`.
    pub fn run(
        &self,
        nodes: &mut [NodeState],
        sf_len: u32,
        base: u64,
        rng: &mut SimRng,
        mut tally: Option<&mut FrameTally>,
    ) -> SfTrace {
        let t = self.timing;
        let e = self.energy;
        let (t_p, l_s, l_c) = (u64::from(t.t_p()), u64::from(t.l_s()), u64::from(t.l_c()));
        let ack_gap = u64::from(t.t_ack);
        let priority = t.priority;
        let record = self.opts.record_events;

        let mut tr = SfTrace {
            sf_len,
            contenders: nodes.iter().filter(|n| n.is_contending()).count() as u32,
            energy: vec![0.0; nodes.len()],
            ..Default::default()
        };

        // Resume nodes that deferred in the previous superframe.
        for n in nodes.iter_mut() {
            if n.phase == Phase::Deferred {
                let stage = if self.opts.reset_stage_on_deference {
                    0
                } else {
                    n.backoff_stage
                };
                n.start_frame(base, stage, t, rng);
            }
        }

        let end = base + u64::from(sf_len);
        let mut busy = vec![false; sf_len as usize];
        let mut starters: Vec<usize> = Vec::new();

        for g in base..end {
            let local = (g - base) as usize;
            starters.clear();
            starters.extend(
                nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, n)| n.phase == Phase::Transmitting && n.tx_start == g)
                    .map(|(i, _)| i),
            );
            if !starters.is_empty() {
                let collided = starters.len() > 1;
                let mut mark = |from: u64, to: u64| {
                    for s in from.max(base)..to.min(end) {
                        busy[(s - base) as usize] = true;
                    }
                };
                mark(g, g + t_p);
                if !collided {
                    mark(g + t_p + ack_gap, g + l_s);
                } else {
                    tr.collision_groups += 1;
                }
                for &i in &starters {
                    nodes[i].collided = collided;
                }
            }

            for (i, n) in nodes.iter_mut().enumerate() {
                let spent = match n.phase {
                    Phase::NotParticipating | Phase::Done => 0.0,
                    Phase::Deferred => e.e_idle,
                    Phase::Transmitting | Phase::WaitingAck if g >= n.tx_start => {
                        let o = g - n.tx_start;
                        let len = if n.collided {
                            l_c.min(end - n.tx_start)
                        } else {
                            l_s
                        };
                        let rate = if o < t_p {
                            e.e_tx
                        } else if n.collided || o < t_p + ack_gap {
                            e.e_idle
                        } else {
                            e.e_rx
                        };
                        n.phase = if o + 1 < t_p {
                            Phase::Transmitting
                        } else {
                            Phase::WaitingAck
                        };
                        if o + 1 == len {
                            let kind = if n.collided {
                                EventKind::Collision
                            } else {
                                EventKind::Success
                            };
                            let frame_len = g + 1 - n.frame_start;
                            if kind == EventKind::Success {
                                tr.successes += 1;
                                tr.success_slots.push(local as u32);
                                tr.successful_nodes.push(i);
                            } else {
                                tr.collided_nodes += 1;
                            }
                            self.finish_frame(
                                n,
                                i,
                                kind,
                                g,
                                frame_len,
                                local,
                                &mut tr,
                                tally.as_deref_mut(),
                                rng,
                            );
                        }
                        rate
                    }
                    Phase::Transmitting | Phase::WaitingAck => e.e_idle,
                    Phase::Backoff if n.backoff_counter > 0 => {
                        n.backoff_counter -= 1;
                        e.e_idle
                    }
                    Phase::Backoff => {
                        // Counter expired: first CCA, unless the exchange can no longer fit.
                        if end - g < l_s + 2 {
                            n.phase = Phase::Deferred;
                            tr.deferrals += 1;
                            let frame_len = end - n.frame_start;
                            if record {
                                tr.events.push(Event {
                                    slot: local as u32,
                                    node: i,
                                    kind: EventKind::Deference,
                                    frame_len,
                                });
                            }
                            if let Some(tl) = tally.as_deref_mut() {
                                tl.push(EventKind::Deference, frame_len);
                            }
                            tr.frames += 1;
                            e.e_idle
                        } else {
                            tr.cca1_count += 1;
                            if busy[local] {
                                tr.cca1_busy += 1;
                                self.cca_failed(n, i, g, local, &mut tr, tally.as_deref_mut(), rng);
                            } else {
                                n.phase = Phase::Cca;
                                n.cca_progress = 1;
                                if n.cca_progress == priority {
                                    n.phase = Phase::Transmitting;
                                    n.tx_start = g + 1;
                                }
                            }
                            e.e_sens
                        }
                    }
                    Phase::Cca => {
                        tr.cca2_count += 1;
                        if busy[local] {
                            tr.cca2_busy += 1;
                            self.cca_failed(n, i, g, local, &mut tr, tally.as_deref_mut(), rng);
                        } else {
                            n.cca_progress += 1;
                            if n.cca_progress >= priority {
                                n.phase = Phase::Transmitting;
                                n.tx_start = g + 1;
                            }
                        }
                        e.e_sens
                    }
                };
                n.energy_accum += spent;
                tr.energy[i] += spent;
            }
        }

        tr.unfinished = nodes
            .iter()
            .filter(|n| {
                matches!(
                    n.phase,
                    Phase::Backoff | Phase::Cca | Phase::Transmitting | Phase::WaitingAck
                )
            })
            .count() as u32;
        if record {
            tr.occupancy = busy;
        }
        tr
    }

    fn cca_failed(
        &self,
        n: &mut NodeState,
        i: usize,
        g: u64,
        local: usize,
        tr: &mut SfTrace,
        tally: Option<&mut FrameTally>,
        rng: &mut SimRng,
    ) {
        n.cca_progress = 0;
        if n.backoff_stage >= self.timing.nb {
            n.attempts_left = 0;
            tr.cca_failures += 1;
            let frame_len = g + 1 - n.frame_start;
            self.finish_frame(
                n,
                i,
                EventKind::CcaFailure,
                g,
                frame_len,
                local,
                tr,
                tally,
                rng,
            );
        } else {
            n.backoff_stage += 1;
            n.attempts_left -= 1;
            n.backoff_counter = rng.gen_range(0..self.timing.window(n.backoff_stage));
            n.phase = Phase::Backoff;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_frame(
        &self,
        n: &mut NodeState,
        i: usize,
        kind: EventKind,
        g: u64,
        frame_len: u64,
        local: usize,
        tr: &mut SfTrace,
        tally: Option<&mut FrameTally>,
        rng: &mut SimRng,
    ) {
        tr.frames += 1;
        if self.opts.record_events {
            tr.events.push(Event {
                slot: local as u32,
                node: i,
                kind,
                frame_len,
            });
        }
        if let Some(tl) = tally {
            tl.push(kind, frame_len);
        }
        match (self.traffic, kind) {
            (Traffic::Saturated, _) => n.start_frame(g + 1, 0, self.timing, rng),
            (Traffic::SinglePacket, EventKind::Success) => n.phase = Phase::Done,
            (Traffic::SinglePacket, _) if self.opts.failure_policy == FailurePolicy::Retry => {
                n.start_frame(g + 1, 0, self.timing, rng)
            }
            (Traffic::SinglePacket, _) => n.phase = Phase::Done,
        }
    }
}
