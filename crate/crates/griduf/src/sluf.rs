//! The strictly local decoder engine.
//!
//! This variant removes the almost-local controller's magic wires.  The
//! controller talks only to node 0; every other node hears about stage
//! changes from its *signalee* parent in the spanning signal tree, one hop
//! per timestep, and status bits (busy, active) ride the same tree upward.
//! Every component — nodes and controller alike — reads only state committed
//! at the previous timestep.
//!
//! Stage changes stay coherent through countdowns.  Stages come in two
//! flavours:
//!
//! * **Fixed-duration stages** (Growing, Presyncing, Burning) are pure
//!   broadcasts: a node seeing its signalee switch adopts the stage with
//!   countdown `span(v)` and idles while it ticks down, so a node at tree
//!   depth k adopts at `T+1+k` and executes at `T+1+k+span(v)` =
//!   `T + controller_span` — every node executes the stage procedure on the
//!   same timestep, exactly once, then self-transitions into the following
//!   work stage.  The controller's own countdown for these stages is
//!   `controller_span - 1`, which makes it commit the successor stage at
//!   precisely the timestep the nodes self-transition, so node 0 never
//!   observes a stale stage.
//!
//! * **Work-gated stages** (Merging, Syncing, Peeling) last as long as the
//!   work does.  Nodes run the stage procedure every timestep while their
//!   signalee agrees on the stage; any node doing real work raises its busy
//!   signal, which relays up the tree one hop per timestep.  The controller
//!   enters with countdown `controller_span + 1` — exactly enough that a
//!   busy raised on the first working timestep by the furthest node arrives
//!   while the countdown reads 1 — and applies the *Doppler rule*: a busy
//!   arrival with countdown in {1, 2} resets it to 2.  Because working
//!   frontiers move at most one lattice hop (hence one tree level) per
//!   timestep, consecutive busy arrivals are at most 2 timesteps apart while
//!   work persists, so the countdown cannot run out early; once work stops,
//!   signals drain within the tree depth and the countdown expires.
//!
//! During Syncing the controller also latches arriving active signals
//! (emitted by cluster roots during Presyncing) to decide between another
//! growth round and Burning.  Nodes that keep executing a work-gated stage
//! after the controller has moved on — stage fronts exit staggered, deepest
//! last — find no work left by then (quiescence is what let the controller
//! leave), so the trailing executions are no-ops and both engines produce
//! identical corrections.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::engine::{
    apply_deliveries, apply_flips, apply_growth, default_max_timesteps, proc_burning,
    proc_growing, proc_merging, proc_peeling, proc_presyncing, proc_syncing, DecodeResult,
    DecodeState, EngineError, Scratch, Stage, StageTally,
};
use crate::graph::{CodeGraph, EdgeId, NodeId, Pointer, Signalee};
use crate::noise::{NoiseError, Syndrome};

/// One line of a strictly local decode trace, all values as committed at the
/// end of the timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SlufTraceRecord {
    pub timestep: u64,
    /// Controller stage after this timestep's update.
    pub stage: Stage,
    pub controller_countdown: u32,
    /// The controller consumed a busy signal from node 0 this timestep.
    pub busy_arrival: bool,
    /// The controller consumed an active signal from node 0 this timestep.
    pub active_arrival: bool,
    pub busy_nodes: u32,
    pub active_nodes: u32,
    pub anyons: u32,
    pub support_changes: u32,
    /// Nodes that executed a fixed-duration stage procedure this timestep
    /// (always 0 or the full node count — broadcast synchrony).
    pub fixed_executions: u32,
    /// Nodes that executed a work-gated stage procedure this timestep.
    pub work_executions: u32,
}

pub type SlufDecodeResult = DecodeResult<SlufTraceRecord>;

fn fixed_successor(stage: Stage) -> Stage {
    match stage {
        Stage::Growing => Stage::Merging,
        Stage::Presyncing => Stage::Syncing,
        Stage::Burning => Stage::Peeling,
        _ => unreachable!("only fixed-duration stages self-transition"),
    }
}

/// The strictly local engine: per-node stage registers and countdowns, tree
/// signal relays, and a message-passing controller.
#[derive(Debug)]
pub struct SlufEngine<'g> {
    g: &'g CodeGraph,
    cur: DecodeState,
    next: DecodeState,
    scratch: Scratch,
    correction: BTreeSet<EdgeId>,
    cur_stage: Vec<Stage>,
    next_stage: Vec<Stage>,
    cur_countdown: Vec<u32>,
    next_countdown: Vec<u32>,
    cur_busy_sig: Vec<bool>,
    next_busy_sig: Vec<bool>,
    cur_active_sig: Vec<bool>,
    next_active_sig: Vec<bool>,
    ctrl_stage: Stage,
    ctrl_countdown: u32,
    active_latch: bool,
    timestep: u64,
    max_timesteps: u64,
    growth_rounds: u32,
    validation_timesteps: Option<u64>,
    tally: StageTally,
    trace: Option<Vec<SlufTraceRecord>>,
}

impl<'g> SlufEngine<'g> {
    pub fn new(g: &'g CodeGraph, s: &Syndrome) -> SlufEngine<'g> {
        let n = g.num_nodes();
        let cur = DecodeState::init(g, s);
        SlufEngine {
            g,
            next: cur.clone(),
            scratch: Scratch::new(g),
            correction: BTreeSet::new(),
            cur_stage: vec![Stage::Growing; n],
            next_stage: vec![Stage::Growing; n],
            cur_countdown: vec![0; n],
            next_countdown: vec![0; n],
            cur_busy_sig: vec![false; n],
            next_busy_sig: vec![false; n],
            cur_active_sig: vec![false; n],
            next_active_sig: vec![false; n],
            ctrl_stage: Stage::Growing,
            ctrl_countdown: 0,
            active_latch: false,
            timestep: 0,
            max_timesteps: default_max_timesteps(g),
            growth_rounds: if s.is_empty() { 0 } else { 1 },
            validation_timesteps: None,
            tally: StageTally::default(),
            trace: None,
            cur,
        }
    }

    /// Like [`SlufEngine::new`] but with the listed edges already fully
    /// grown, for driving prepared cluster shapes.
    pub fn with_initial_support(
        g: &'g CodeGraph,
        s: &Syndrome,
        grown: &[EdgeId],
    ) -> Result<SlufEngine<'g>, NoiseError> {
        let mut engine = SlufEngine::new(g, s);
        for &e in grown {
            if e.idx() >= g.num_edges() {
                return Err(NoiseError::EdgeOutOfRange(e.0));
            }
            engine.cur.support[e.idx()] = 2;
            engine.next.support[e.idx()] = 2;
        }
        Ok(engine)
    }

    pub fn record_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn set_max_timesteps(&mut self, limit: u64) {
        self.max_timesteps = limit;
    }

    pub fn graph(&self) -> &'g CodeGraph {
        self.g
    }

    /// Controller stage as committed at the end of the last timestep.
    pub fn stage(&self) -> Stage {
        self.ctrl_stage
    }

    pub fn controller_countdown(&self) -> u32 {
        self.ctrl_countdown
    }

    pub fn node_stage(&self, v: NodeId) -> Stage {
        self.cur_stage[v.idx()]
    }

    pub fn node_countdown(&self, v: NodeId) -> u32 {
        self.cur_countdown[v.idx()]
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn defect(&self, v: NodeId) -> bool {
        self.cur.defect[v.idx()]
    }

    pub fn active(&self, v: NodeId) -> bool {
        self.cur.active[v.idx()]
    }

    pub fn anyon(&self, v: NodeId) -> bool {
        self.cur.anyon[v.idx()]
    }

    pub fn busy(&self, v: NodeId) -> bool {
        self.cur.busy[v.idx()]
    }

    pub fn pointer(&self, v: NodeId) -> Pointer {
        self.cur.pointer[v.idx()]
    }

    pub fn cluster_id(&self, v: NodeId) -> u32 {
        self.cur.cid[v.idx()]
    }

    pub fn support(&self, e: EdgeId) -> u8 {
        self.cur.support[e.idx()]
    }

    /// Neighbours reachable across fully grown edges.
    pub fn accessibles(&self, v: NodeId) -> Vec<NodeId> {
        self.g
            .neighbors(v)
            .iter()
            .filter(|a| self.cur.support[a.edge.idx()] == 2)
            .map(|a| a.node)
            .collect()
    }

    /// Advances one timestep: every node dispatches on its own committed
    /// stage register, then the controller consumes the signals node 0
    /// committed last timestep and updates its stage and countdown.  Returns
    /// the controller stage committed this timestep.
    pub fn step(&mut self) -> Result<Stage, EngineError> {
        if self.ctrl_stage == Stage::Done {
            return Ok(Stage::Done);
        }
        if self.timestep >= self.max_timesteps {
            return Err(EngineError::Timeout {
                limit: self.max_timesteps,
                stage: self.ctrl_stage,
            });
        }
        self.timestep += 1;
        self.tally.bump(self.ctrl_stage);

        // Signals the controller will consume this timestep (node 0's
        // commits from t-1, captured before the sweep overwrites them).
        let busy_in = self.cur_busy_sig[0];
        let active_in = self.cur_active_sig[0];

        self.next.copy_from(&self.cur);
        self.next_stage.copy_from_slice(&self.cur_stage);
        self.next_countdown.copy_from_slice(&self.cur_countdown);

        let mut fixed_executions = 0u32;
        let mut work_executions = 0u32;
        let mut support_changes = 0u32;
        let mut grew = false;

        for i in 0..self.g.num_nodes() {
            let v = NodeId(i as u32);
            let st = self.cur_stage[i];
            let mut ran_work = false;
            let mut ran_presync = false;
            match st {
                Stage::Growing | Stage::Presyncing | Stage::Burning => {
                    self.next.busy[i] = false;
                    if self.cur_countdown[i] == 0 {
                        fixed_executions += 1;
                        match st {
                            Stage::Growing => {
                                proc_growing(self.g, &self.cur, &mut self.scratch, v);
                                grew = true;
                            }
                            Stage::Presyncing => {
                                proc_presyncing(self.g, &self.cur, &mut self.next, v);
                                ran_presync = true;
                            }
                            Stage::Burning => {
                                support_changes +=
                                    proc_burning(self.g, &self.cur, &mut self.next, v);
                            }
                            _ => unreachable!(),
                        }
                        self.next_stage[i] = fixed_successor(st);
                        self.next_countdown[i] = 0;
                    } else {
                        self.next_countdown[i] = self.cur_countdown[i] - 1;
                    }
                }
                Stage::Merging | Stage::Syncing | Stage::Peeling => {
                    let sig_stage = match self.g.signalee(v) {
                        Signalee::Controller => self.ctrl_stage,
                        Signalee::Node(u) => self.cur_stage[u.idx()],
                    };
                    if sig_stage == st {
                        work_executions += 1;
                        ran_work = true;
                        match st {
                            Stage::Merging => proc_merging(
                                self.g,
                                &self.cur,
                                &mut self.next,
                                &mut self.scratch,
                                v,
                            ),
                            Stage::Syncing => {
                                proc_syncing(self.g, &self.cur, &mut self.next, v)
                            }
                            Stage::Peeling => {
                                support_changes += proc_peeling(
                                    self.g,
                                    &self.cur,
                                    &mut self.next,
                                    &mut self.scratch,
                                    &mut self.correction,
                                    v,
                                )
                            }
                            _ => unreachable!(),
                        }
                    } else {
                        self.next_stage[i] = sig_stage;
                        self.next_countdown[i] = self.g.span(v);
                        self.next.busy[i] = false;
                    }
                }
                Stage::Done => {
                    self.next.busy[i] = false;
                }
            }

            // Signal relay: children's last-timestep bits always pass
            // through; a node's own contribution requires having actually
            // run the corresponding procedure this timestep.
            let mut in_busy = false;
            let mut in_active = false;
            for &u in self.g.signal_children(v) {
                in_busy |= self.cur_busy_sig[u.idx()];
                in_active |= self.cur_active_sig[u.idx()];
            }
            self.next_busy_sig[i] = in_busy || (ran_work && self.next.busy[i]);
            self.next_active_sig[i] = in_active || (ran_presync && self.next.active[i]);
        }

        if grew {
            support_changes += apply_growth(self.g, &self.cur, &mut self.next, &mut self.scratch);
        }
        apply_deliveries(&mut self.next, &mut self.scratch);
        apply_flips(&mut self.next, &mut self.scratch);

        std::mem::swap(&mut self.cur, &mut self.next);
        std::mem::swap(&mut self.cur_stage, &mut self.next_stage);
        std::mem::swap(&mut self.cur_countdown, &mut self.next_countdown);
        std::mem::swap(&mut self.cur_busy_sig, &mut self.next_busy_sig);
        std::mem::swap(&mut self.cur_active_sig, &mut self.next_active_sig);

        // Controller update, on last timestep's signals only.
        if self.ctrl_stage == Stage::Syncing && active_in {
            self.active_latch = true;
        }
        if self.ctrl_countdown == 0 {
            let next = match self.ctrl_stage {
                Stage::Growing => Stage::Merging,
                Stage::Merging => Stage::Presyncing,
                Stage::Presyncing => Stage::Syncing,
                Stage::Syncing => {
                    if self.active_latch {
                        Stage::Growing
                    } else {
                        Stage::Burning
                    }
                }
                Stage::Burning => Stage::Peeling,
                Stage::Peeling => Stage::Done,
                Stage::Done => Stage::Done,
            };
            if self.ctrl_stage == Stage::Syncing && next == Stage::Growing {
                self.growth_rounds += 1;
            }
            if next == Stage::Syncing {
                self.active_latch = false;
            }
            if next == Stage::Burning && self.validation_timesteps.is_none() {
                self.validation_timesteps = Some(self.timestep);
            }
            self.ctrl_countdown = match next {
                // Work-gated stages: one extra tick so the furthest node's
                // first-timestep busy lands inside the Doppler window.
                Stage::Merging | Stage::Syncing | Stage::Peeling => {
                    self.g.controller_span() + 1
                }
                // Broadcast stages: commit the successor exactly when the
                // nodes self-transition.
                Stage::Growing | Stage::Presyncing | Stage::Burning => {
                    self.g.controller_span() - 1
                }
                Stage::Done => 0,
            };
            self.ctrl_stage = next;
        } else if busy_in && self.ctrl_countdown <= 2 {
            self.ctrl_countdown = 2;
        } else {
            self.ctrl_countdown -= 1;
        }

        if let Some(trace) = &mut self.trace {
            trace.push(SlufTraceRecord {
                timestep: self.timestep,
                stage: self.ctrl_stage,
                controller_countdown: self.ctrl_countdown,
                busy_arrival: busy_in,
                active_arrival: active_in,
                busy_nodes: self.cur.busy.iter().filter(|&&b| b).count() as u32,
                active_nodes: self.cur.active.iter().filter(|&&a| a).count() as u32,
                anyons: self.cur.anyon.iter().filter(|&&a| a).count() as u32,
                support_changes,
                fixed_executions,
                work_executions,
            });
        }
        Ok(self.ctrl_stage)
    }

    /// Steps until the controller commits `target`.
    pub fn run_until(&mut self, target: Stage) -> Result<(), EngineError> {
        while self.ctrl_stage != target {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<(), EngineError> {
        self.run_until(Stage::Done)
    }

    pub fn finish(self) -> SlufDecodeResult {
        debug_assert_eq!(self.ctrl_stage, Stage::Done);
        DecodeResult {
            correction: self.correction.into_iter().collect(),
            validation_timesteps: self.validation_timesteps.expect("Burning was reached"),
            total_timesteps: self.timestep,
            growth_rounds: self.growth_rounds,
            stage_timesteps: self.tally,
            trace: self.trace,
        }
    }
}

/// Complete strictly local decode of one syndrome.
pub fn run_decode_sluf(
    g: &CodeGraph,
    s: &Syndrome,
    want_trace: bool,
) -> Result<SlufDecodeResult, EngineError> {
    let mut engine = SlufEngine::new(g, s);
    if want_trace {
        engine.record_trace();
    }
    engine.run()?;
    Ok(engine.finish())
}

/// Validation duration the runtime model predicts for a decode with `rounds`
/// growth rounds: `controller_span * max(3, 4 * rounds - 1)` (each round
/// costs one broadcast plus three gated stage windows; the floor covers the
/// round-free tail).
pub fn predict_peak(controller_span: u32, rounds: u32) -> u64 {
    controller_span as u64 * (4 * rounds as u64).saturating_sub(1).max(3)
}

/// One Doppler discipline violation: a busy signal arrived outside both the
/// initial stage window and the 2-timestep chain from its predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DopplerViolation {
    pub timestep: u64,
    pub stage: Stage,
    /// Timestep the stage was committed.
    pub stage_start: u64,
    /// Timesteps since the previous busy arrival in this stage (u64::MAX if
    /// none).
    pub gap: u64,
}

/// Scan of a strictly local trace for busy arrivals that the Doppler
/// discipline does not account for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DopplerReport {
    pub arrivals: u64,
    pub violations: Vec<DopplerViolation>,
}

/// Checks every busy arrival in `trace` against the Doppler discipline: an
/// arrival during a work-gated stage must come within `controller_span + 1`
/// timesteps of the stage commit or within 2 timesteps of the previous
/// arrival in that stage; arrivals during broadcast stages (when no work can
/// be in flight) are violations outright.
pub fn doppler_monitor(controller_span: u32, trace: &[SlufTraceRecord]) -> DopplerReport {
    let mut arrivals = 0;
    let mut violations = Vec::new();
    // Stage committed at t gates arrivals consumed at t+1 onward; the
    // controller starts in Growing committed at timestep 0.
    let mut stage = Stage::Growing;
    let mut stage_start = 0u64;
    let mut last_arrival: Option<u64> = None;
    for rec in trace {
        if rec.busy_arrival {
            arrivals += 1;
            let in_window = rec.timestep <= stage_start + controller_span as u64 + 1;
            let chained = last_arrival.is_some_and(|a| rec.timestep <= a + 2);
            let gated = matches!(stage, Stage::Merging | Stage::Syncing | Stage::Peeling);
            if !gated || !(in_window || chained) {
                violations.push(DopplerViolation {
                    timestep: rec.timestep,
                    stage,
                    stage_start,
                    gap: last_arrival.map_or(u64::MAX, |a| rec.timestep - a),
                });
            }
            last_arrival = Some(rec.timestep);
        }
        if rec.stage != stage {
            stage = rec.stage;
            stage_start = rec.timestep;
            last_arrival = None;
        }
    }
    DopplerReport { arrivals, violations }
}
