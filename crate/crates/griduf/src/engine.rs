//! The almost-local decoder engine and the per-node stage procedures it
//! shares with the strictly local variant.
//!
//! Decoding is a message-passing computation over the decoding graph.  Every
//! node holds seven bits of local state (defect, active, anyon, busy, a
//! parent pointer, a cluster ID, and the support of its incident edges) and
//! repeatedly executes the *procedure* of the current stage, reading only its
//! own state and that of its lattice neighbours as committed at the previous
//! timestep.  All nodes step synchronously; edge supports are written by a
//! single owner per timestep, and anyon/defect hand-offs are accumulated as
//! XOR deliveries applied after every node has stepped, so the result is
//! independent of iteration order.
//!
//! Stages cycle through syndrome validation — Growing (active clusters put
//! half a unit of support on their incident edges), Merging (cluster IDs
//! flood toward the minimum over fully grown edges while anyons relay along
//! parent pointers toward the root), Presyncing (exactly the bulk roots still
//! holding an anyon mark themselves active), Syncing (activity floods outward
//! from those roots through each cluster) — repeating rounds until no cluster
//! is active, then Burning (edges not held by a parent pointer are dropped,
//! leaving each cluster a spanning tree) and Peeling (leaves detach one per
//! timestep, emitting a correction edge whenever a defect leaves with them).
//!
//! In this almost-local variant the controller is magic: within one timestep
//! the nodes first execute the stage the controller committed at the previous
//! timestep, then the controller inspects the freshly committed busy/active
//! flags and moves the stage on if no node is busy.  Stage changes therefore
//! reach every node one timestep after the work quiesces, with no
//! propagation cost.  The strictly local variant in [`crate::sluf`] replaces
//! exactly this controller with signal-tree message passing and reuses the
//! node procedures below unchanged.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{CodeGraph, EdgeId, NodeId, Pointer};
use crate::noise::{NoiseError, Syndrome};

/// Decoder stage, as tracked by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Growing,
    Merging,
    Presyncing,
    Syncing,
    Burning,
    Peeling,
    Done,
}

impl Stage {
    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// Whether every node executes this stage for exactly one timestep on a
    /// shared schedule (no per-node data dependence on when it finishes).
    pub fn is_fixed_duration(self) -> bool {
        matches!(self, Stage::Growing | Stage::Presyncing | Stage::Burning)
    }
}

/// Per-node and per-edge decoder state, double-buffered by the engines.
///
/// `support` is in half-units: 0 = untouched, 1 = half grown, 2 = fully
/// grown.  Only fully grown edges connect clusters.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DecodeState {
    pub defect: Vec<bool>,
    pub active: Vec<bool>,
    pub anyon: Vec<bool>,
    pub busy: Vec<bool>,
    pub pointer: Vec<Pointer>,
    pub cid: Vec<u32>,
    pub support: Vec<u8>,
}

impl DecodeState {
    pub fn init(g: &CodeGraph, s: &Syndrome) -> DecodeState {
        let n = g.num_nodes();
        let mut st = DecodeState {
            defect: vec![false; n],
            active: vec![false; n],
            anyon: vec![false; n],
            busy: vec![false; n],
            pointer: vec![Pointer::C; n],
            cid: (0..n as u32).collect(),
            support: vec![0; g.num_edges()],
        };
        for &v in s.defects() {
            st.defect[v.idx()] = true;
            st.active[v.idx()] = true;
            st.anyon[v.idx()] = true;
        }
        st
    }

    /// Overwrites self with `other`, reusing allocations.
    pub fn copy_from(&mut self, other: &DecodeState) {
        self.defect.copy_from_slice(&other.defect);
        self.active.copy_from_slice(&other.active);
        self.anyon.copy_from_slice(&other.anyon);
        self.busy.copy_from_slice(&other.busy);
        self.pointer.copy_from_slice(&other.pointer);
        self.cid.copy_from_slice(&other.cid);
        self.support.copy_from_slice(&other.support);
    }
}

/// Order-independence scratchpads: contributions from individual node
/// procedures that get applied after the whole sweep.
#[derive(Debug)]
pub(crate) struct Scratch {
    /// Per-edge support increments from Growing (each endpoint adds 1).
    inc: Vec<u8>,
    /// Per-node anyon delivery parity from Merging relays.
    deliver: Vec<bool>,
    /// Per-node defect flips from Peeling leaves.
    flip: Vec<bool>,
    any_inc: bool,
    any_deliver: bool,
    any_flip: bool,
}

impl Scratch {
    pub fn new(g: &CodeGraph) -> Scratch {
        Scratch {
            inc: vec![0; g.num_edges()],
            deliver: vec![false; g.num_nodes()],
            flip: vec![false; g.num_nodes()],
            any_inc: false,
            any_deliver: false,
            any_flip: false,
        }
    }
}

/// Growing: an active node adds half a unit of support to each incident edge
/// that is not yet fully grown.  Increments accumulate in the scratchpad so
/// an edge between two active nodes gains a full unit.
pub(crate) fn proc_growing(g: &CodeGraph, cur: &DecodeState, scratch: &mut Scratch, v: NodeId) {
    if !cur.active[v.idx()] {
        return;
    }
    for a in g.neighbors(v) {
        if cur.support[a.edge.idx()] < 2 {
            scratch.inc[a.edge.idx()] += 1;
            scratch.any_inc = true;
        }
    }
}

/// Applies accumulated growth increments, capping support at fully grown.
/// Returns the number of edges whose support changed.
pub(crate) fn apply_growth(
    g: &CodeGraph,
    cur: &DecodeState,
    next: &mut DecodeState,
    scratch: &mut Scratch,
) -> u32 {
    if !scratch.any_inc {
        return 0;
    }
    let mut changes = 0;
    for e in 0..g.num_edges() {
        let inc = scratch.inc[e];
        if inc > 0 {
            scratch.inc[e] = 0;
            let grown = (cur.support[e] + inc).min(2);
            if grown != cur.support[e] {
                next.support[e] = grown;
                changes += 1;
            }
        }
    }
    scratch.any_inc = false;
    changes
}

/// Merging: relay an anyon one hop along the parent pointer (bulk non-roots
/// only), and adopt the smallest cluster ID visible across fully grown
/// edges, pointing at the lowest-ID neighbour offering it.  Either action
/// makes the node busy.
pub(crate) fn proc_merging(
    g: &CodeGraph,
    cur: &DecodeState,
    next: &mut DecodeState,
    scratch: &mut Scratch,
    v: NodeId,
) {
    let i = v.idx();
    let mut busy = false;

    if g.is_bulk(v) && cur.pointer[i] != Pointer::C && cur.anyon[i] {
        let target = g
            .neighbor_toward(v, cur.pointer[i])
            .expect("parent pointer aims at a lattice neighbour")
            .node;
        next.anyon[i] = false;
        scratch.deliver[target.idx()] ^= true;
        scratch.any_deliver = true;
        busy = true;
    }

    let my_cid = cur.cid[i];
    let mut best: Option<(u32, NodeId, Pointer)> = None;
    for a in g.neighbors(v) {
        if cur.support[a.edge.idx()] == 2 {
            let c = cur.cid[a.node.idx()];
            if c < my_cid {
                let better = match best {
                    None => true,
                    Some((bc, bn, _)) => c < bc || (c == bc && a.node < bn),
                };
                if better {
                    best = Some((c, a.node, a.dir));
                }
            }
        }
    }
    if let Some((c, _, dir)) = best {
        next.cid[i] = c;
        next.pointer[i] = dir;
        busy = true;
    }

    next.busy[i] = busy;
}

/// Applies accumulated anyon deliveries.  A node that relayed its own anyon
/// away this timestep can simultaneously receive one; two arrivals cancel.
pub(crate) fn apply_deliveries(next: &mut DecodeState, scratch: &mut Scratch) {
    if !scratch.any_deliver {
        return;
    }
    for (i, d) in scratch.deliver.iter_mut().enumerate() {
        if *d {
            next.anyon[i] ^= true;
            *d = false;
        }
    }
    scratch.any_deliver = false;
}

/// Presyncing: exactly the bulk cluster roots still holding an anyon become
/// active (their cluster's defects could not be matched internally or to a
/// boundary), everything else goes inactive.
pub(crate) fn proc_presyncing(g: &CodeGraph, cur: &DecodeState, next: &mut DecodeState, v: NodeId) {
    let i = v.idx();
    next.active[i] = g.is_bulk(v) && cur.pointer[i] == Pointer::C && cur.anyon[i];
}

/// Syncing: activity floods from roots across fully grown edges; a node
/// turning active this timestep is busy.
pub(crate) fn proc_syncing(g: &CodeGraph, cur: &DecodeState, next: &mut DecodeState, v: NodeId) {
    let i = v.idx();
    let mut busy = false;
    if !cur.active[i] {
        for a in g.neighbors(v) {
            if cur.support[a.edge.idx()] == 2 && cur.active[a.node.idx()] {
                busy = true;
                break;
            }
        }
    }
    next.busy[i] = busy;
    if busy {
        next.active[i] = true;
    }
}

/// Burning: each node drops its owned fully grown edges that no parent
/// pointer holds, reducing every cluster to the spanning tree built during
/// Merging.  Returns the number of edges dropped.
pub(crate) fn proc_burning(g: &CodeGraph, cur: &DecodeState, next: &mut DecodeState, v: NodeId) -> u32 {
    let mut changes = 0;
    for a in g.owned_edges(v) {
        if cur.support[a.edge.idx()] == 2 {
            let held =
                cur.pointer[v.idx()] == a.dir || cur.pointer[a.node.idx()] == a.dir.opposite();
            if !held {
                next.support[a.edge.idx()] = 0;
                changes += 1;
            }
        }
    }
    changes
}

/// Peeling: a non-root node whose tree degree has dropped to one detaches
/// from its last edge; if it carries a defect, the edge joins the correction
/// and the defect hops to the far endpoint.  Returns 1 if the node peeled.
pub(crate) fn proc_peeling(
    g: &CodeGraph,
    cur: &DecodeState,
    next: &mut DecodeState,
    scratch: &mut Scratch,
    correction: &mut BTreeSet<EdgeId>,
    v: NodeId,
) -> u32 {
    let i = v.idx();
    next.busy[i] = false;
    if cur.pointer[i] == Pointer::C {
        return 0;
    }
    let mut last = None;
    let mut degree = 0;
    for a in g.neighbors(v) {
        if cur.support[a.edge.idx()] == 2 {
            degree += 1;
            if degree > 1 {
                return 0;
            }
            last = Some(a);
        }
    }
    let Some(a) = last else { return 0 };
    next.busy[i] = true;
    next.support[a.edge.idx()] = 0;
    if cur.defect[i] {
        next.defect[i] = false;
        let inserted = correction.insert(a.edge);
        debug_assert!(inserted, "peeled edge recorded twice");
        scratch.flip[a.node.idx()] ^= true;
        scratch.any_flip = true;
    }
    1
}

/// Applies accumulated defect flips from peeled leaves.
pub(crate) fn apply_flips(next: &mut DecodeState, scratch: &mut Scratch) {
    if !scratch.any_flip {
        return;
    }
    for (i, f) in scratch.flip.iter_mut().enumerate() {
        if *f {
            next.defect[i] ^= true;
            *f = false;
        }
    }
    scratch.any_flip = false;
}

/// Runs one full node sweep for `stage` from `cur` into `next` (which must
/// already be a copy of `cur`), applying the order-independence scratchpads.
/// Returns the number of support changes.
pub(crate) fn sweep_stage(
    g: &CodeGraph,
    stage: Stage,
    cur: &DecodeState,
    next: &mut DecodeState,
    scratch: &mut Scratch,
    correction: &mut BTreeSet<EdgeId>,
) -> u32 {
    let nodes = (0..g.num_nodes() as u32).map(NodeId);
    let mut support_changes = 0;
    match stage {
        Stage::Growing => {
            for v in nodes {
                proc_growing(g, cur, scratch, v);
            }
            support_changes += apply_growth(g, cur, next, scratch);
        }
        Stage::Merging => {
            for v in nodes {
                proc_merging(g, cur, next, scratch, v);
            }
            apply_deliveries(next, scratch);
        }
        Stage::Presyncing => {
            for v in nodes {
                proc_presyncing(g, cur, next, v);
            }
        }
        Stage::Syncing => {
            for v in nodes {
                proc_syncing(g, cur, next, v);
            }
        }
        Stage::Burning => {
            for v in nodes {
                support_changes += proc_burning(g, cur, next, v);
            }
        }
        Stage::Peeling => {
            for v in nodes {
                support_changes += proc_peeling(g, cur, next, scratch, correction, v);
            }
            apply_flips(next, scratch);
        }
        Stage::Done => {}
    }
    support_changes
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("decoder still in stage {stage:?} after {limit} timesteps")]
    Timeout { limit: u64, stage: Stage },
}

/// Default timestep budget: far beyond any legitimate decode, catching only
/// genuine non-termination.
pub fn default_max_timesteps(g: &CodeGraph) -> u64 {
    64 * g.num_nodes() as u64 + 16 * g.controller_span() as u64
}

/// One line of an almost-local decode trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlufTraceRecord {
    pub timestep: u64,
    /// Stage the nodes executed this timestep.
    pub executed: Stage,
    /// Controller stage committed at the end of the timestep.
    pub stage: Stage,
    pub busy_nodes: u32,
    pub active_nodes: u32,
    pub anyons: u32,
    pub support_changes: u32,
}

/// Per-stage timestep tallies over a whole decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageTally {
    pub growing: u64,
    pub merging: u64,
    pub presyncing: u64,
    pub syncing: u64,
    pub burning: u64,
    pub peeling: u64,
}

impl StageTally {
    pub fn of(&self, stage: Stage) -> u64 {
        match stage {
            Stage::Growing => self.growing,
            Stage::Merging => self.merging,
            Stage::Presyncing => self.presyncing,
            Stage::Syncing => self.syncing,
            Stage::Burning => self.burning,
            Stage::Peeling => self.peeling,
            Stage::Done => 0,
        }
    }

    pub(crate) fn bump(&mut self, stage: Stage) {
        match stage {
            Stage::Growing => self.growing += 1,
            Stage::Merging => self.merging += 1,
            Stage::Presyncing => self.presyncing += 1,
            Stage::Syncing => self.syncing += 1,
            Stage::Burning => self.burning += 1,
            Stage::Peeling => self.peeling += 1,
            Stage::Done => {}
        }
    }
}

/// Outcome of a complete decode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult<T> {
    /// Correction edge set, sorted by edge ID.
    pub correction: Vec<EdgeId>,
    /// Timestep at which the controller first committed Burning, i.e. when
    /// syndrome validation finished.
    pub validation_timesteps: u64,
    /// Timestep at which the controller committed Done.
    pub total_timesteps: u64,
    /// Number of Growing stages executed with at least one active node.
    pub growth_rounds: u32,
    pub stage_timesteps: StageTally,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<T>>,
}

pub type AlufDecodeResult = DecodeResult<AlufTraceRecord>;

/// The almost-local engine: synchronous node sweeps under a controller that
/// reads every node's flags directly.
#[derive(Debug)]
pub struct AlufEngine<'g> {
    g: &'g CodeGraph,
    cur: DecodeState,
    next: DecodeState,
    scratch: Scratch,
    correction: BTreeSet<EdgeId>,
    stage: Stage,
    timestep: u64,
    max_timesteps: u64,
    growth_rounds: u32,
    validation_timesteps: Option<u64>,
    tally: StageTally,
    trace: Option<Vec<AlufTraceRecord>>,
}

impl<'g> AlufEngine<'g> {
    pub fn new(g: &'g CodeGraph, s: &Syndrome) -> AlufEngine<'g> {
        let cur = DecodeState::init(g, s);
        AlufEngine {
            g,
            next: cur.clone(),
            scratch: Scratch::new(g),
            correction: BTreeSet::new(),
            stage: Stage::Growing,
            timestep: 0,
            max_timesteps: default_max_timesteps(g),
            growth_rounds: if s.is_empty() { 0 } else { 1 },
            validation_timesteps: None,
            tally: StageTally::default(),
            trace: None,
            cur,
        }
    }

    /// Like [`AlufEngine::new`] but with the listed edges already fully
    /// grown, for driving prepared cluster shapes.
    pub fn with_initial_support(
        g: &'g CodeGraph,
        s: &Syndrome,
        grown: &[EdgeId],
    ) -> Result<AlufEngine<'g>, NoiseError> {
        let mut engine = AlufEngine::new(g, s);
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
        self.stage
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

    /// Advances one timestep: a node sweep of the committed stage, then the
    /// controller reads the fresh flags and moves the stage on if nothing is
    /// busy.  Returns the newly committed controller stage.
    pub fn step(&mut self) -> Result<Stage, EngineError> {
        if self.stage == Stage::Done {
            return Ok(Stage::Done);
        }
        if self.timestep >= self.max_timesteps {
            return Err(EngineError::Timeout { limit: self.max_timesteps, stage: self.stage });
        }
        self.timestep += 1;
        let executed = self.stage;
        self.tally.bump(executed);

        self.next.copy_from(&self.cur);
        let support_changes = sweep_stage(
            self.g,
            executed,
            &self.cur,
            &mut self.next,
            &mut self.scratch,
            &mut self.correction,
        );
        std::mem::swap(&mut self.cur, &mut self.next);

        let any_busy = self.cur.busy.iter().any(|&b| b);
        let committed = if any_busy {
            executed
        } else {
            match executed {
                Stage::Growing => Stage::Merging,
                Stage::Merging => Stage::Presyncing,
                Stage::Presyncing => Stage::Syncing,
                Stage::Syncing => {
                    if self.cur.active.iter().any(|&a| a) {
                        Stage::Growing
                    } else {
                        Stage::Burning
                    }
                }
                Stage::Burning => Stage::Peeling,
                Stage::Peeling => Stage::Done,
                Stage::Done => Stage::Done,
            }
        };
        if executed == Stage::Syncing && committed == Stage::Growing {
            self.growth_rounds += 1;
        }
        if committed == Stage::Burning && self.validation_timesteps.is_none() {
            self.validation_timesteps = Some(self.timestep);
        }
        self.stage = committed;

        if let Some(trace) = &mut self.trace {
            trace.push(AlufTraceRecord {
                timestep: self.timestep,
                executed,
                stage: committed,
                busy_nodes: self.cur.busy.iter().filter(|&&b| b).count() as u32,
                active_nodes: self.cur.active.iter().filter(|&&a| a).count() as u32,
                anyons: self.cur.anyon.iter().filter(|&&a| a).count() as u32,
                support_changes,
            });
        }
        Ok(committed)
    }

    /// Steps until the controller commits `target` (useful for staging
    /// assertions mid-decode).
    pub fn run_until(&mut self, target: Stage) -> Result<(), EngineError> {
        while self.stage != target {
            self.step()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<(), EngineError> {
        self.run_until(Stage::Done)
    }

    pub fn finish(self) -> AlufDecodeResult {
        debug_assert_eq!(self.stage, Stage::Done);
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

/// Complete almost-local decode of one syndrome.
pub fn run_decode_aluf(
    g: &CodeGraph,
    s: &Syndrome,
    want_trace: bool,
) -> Result<AlufDecodeResult, EngineError> {
    let mut engine = AlufEngine::new(g, s);
    if want_trace {
        engine.record_trace();
    }
    engine.run()?;
    Ok(engine.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, Coords};
    use crate::noise::{sample_error, sample_seed, syndrome_of, NoiseParams};

    fn bulk(g: &CodeGraph, row: u16, col: u16) -> NodeId {
        g.node_at(Coords { sheet: 0, row, col }).unwrap()
    }

    fn syndrome(g: &CodeGraph, nodes: &[NodeId]) -> Syndrome {
        Syndrome::from_defects(g, nodes.to_vec()).unwrap()
    }

    fn edge_between(g: &CodeGraph, a: NodeId, b: NodeId) -> EdgeId {
        g.neighbors(a).iter().find(|e| e.node == b).unwrap().edge
    }

    #[test]
    fn empty_syndrome_runs_the_frozen_six_timestep_timeline() {
        let g = build_graph(5, false).unwrap();
        let result = run_decode_aluf(&g, &syndrome(&g, &[]), false).unwrap();
        assert_eq!(result.validation_timesteps, 4);
        assert_eq!(result.total_timesteps, 6);
        assert_eq!(result.growth_rounds, 0);
        assert!(result.correction.is_empty());
        assert_eq!(
            result.stage_timesteps,
            StageTally {
                growing: 1,
                merging: 1,
                presyncing: 1,
                syncing: 1,
                burning: 1,
                peeling: 1
            }
        );
    }

    #[test]
    fn initial_state_marks_exactly_the_defects() {
        let g = build_graph(3, false).unwrap();
        let v = bulk(&g, 1, 1);
        let engine = AlufEngine::new(&g, &syndrome(&g, &[v]));
        for i in 0..g.num_nodes() {
            let u = NodeId(i as u32);
            assert_eq!(engine.defect(u), u == v);
            assert_eq!(engine.active(u), u == v);
            assert_eq!(engine.anyon(u), u == v);
            assert!(!engine.busy(u));
            assert_eq!(engine.pointer(u), Pointer::C);
            assert_eq!(engine.cluster_id(u), u.0);
        }
        assert!((0..g.num_edges()).all(|e| engine.support(EdgeId(e as u32)) == 0));
    }

    #[test]
    fn accessibles_cross_only_fully_grown_edges() {
        let g = build_graph(5, false).unwrap();
        let (a, b) = (bulk(&g, 2, 2), bulk(&g, 2, 3));
        let e = edge_between(&g, a, b);
        let s = syndrome(&g, &[]);
        let engine = AlufEngine::new(&g, &s);
        assert!(engine.accessibles(a).is_empty());
        let engine = AlufEngine::with_initial_support(&g, &s, &[e]).unwrap();
        assert_eq!(engine.accessibles(a), vec![b]);
        assert_eq!(engine.accessibles(b), vec![a]);
        let bogus = EdgeId(g.num_edges() as u32);
        assert_eq!(
            AlufEngine::with_initial_support(&g, &s, &[bogus]).unwrap_err(),
            NoiseError::EdgeOutOfRange(bogus.0)
        );
    }

    #[test]
    fn adjacent_defect_pair_merges_and_corrects_with_one_edge() {
        let g = build_graph(5, false).unwrap();
        let (a, b) = (bulk(&g, 2, 2), bulk(&g, 2, 3));
        let result = run_decode_aluf(&g, &syndrome(&g, &[a, b]), false).unwrap();
        assert_eq!(result.correction, vec![edge_between(&g, a, b)]);
        assert_eq!(result.growth_rounds, 1);
    }

    /// Frozen worked example: an L-shaped three-defect cluster merges in
    /// exactly 3 timesteps (adopt IDs, relay anyons, quiesce) and syncs in
    /// exactly 2 (flood one hop from the root, quiesce).
    #[test]
    fn l_cluster_merges_in_three_timesteps_and_syncs_in_two() {
        let g = build_graph(5, false).unwrap();
        let root = bulk(&g, 1, 1); // 14: lowest ID of the three
        let right = bulk(&g, 1, 2); // 15
        let below = bulk(&g, 2, 1); // 18
        assert_eq!((root.0, right.0, below.0), (14, 15, 18));
        let mut engine = AlufEngine::new(&g, &syndrome(&g, &[root, right, below]));

        engine.run_until(Stage::Merging).unwrap();
        assert_eq!(engine.timestep(), 1); // growing took exactly one timestep
        engine.run_until(Stage::Presyncing).unwrap();
        assert_eq!(engine.tally.merging, 3);
        for v in [root, right, below] {
            assert_eq!(engine.cluster_id(v), root.0);
        }
        assert_eq!(engine.pointer(root), Pointer::C);
        assert_eq!(engine.pointer(right), Pointer::West);
        assert_eq!(engine.pointer(below), Pointer::North);
        // Two of the three anyons annihilated at the root; one survives.
        assert!(engine.anyon(root));
        assert!(!engine.anyon(right) && !engine.anyon(below));

        engine.run_until(Stage::Growing).unwrap(); // odd cluster stays active
        assert_eq!(engine.tally.syncing, 2);
        assert_eq!(engine.tally.presyncing, 1);
        for v in [root, right, below] {
            assert!(engine.active(v));
        }

        engine.run().unwrap();
        let result = engine.finish();
        assert!(result.growth_rounds >= 2);
        let pattern = crate::noise::ErrorPattern::from_edges(&g, result.correction).unwrap();
        assert_eq!(
            syndrome_of(&g, &pattern).defects(),
            &[root, right, below]
        );
    }

    /// Frozen four-round scenario: a defect one step from the West boundary,
    /// a defect in the open, and an adjacent defect pair.  Round 1 merges the
    /// pair, round 2 reaches the boundary and grows the lone defect, round 3
    /// merges lone defect with the pair, round 4 reaches the boundary.
    #[test]
    fn prepared_syndrome_takes_exactly_four_growth_rounds() {
        let g = build_graph(5, false).unwrap();
        let defects = [
            bulk(&g, 4, 1), // 26: west, merges with boundary in round 2
            bulk(&g, 2, 2), // 19: open defect
            bulk(&g, 0, 3), // 12: pair, merges in round 1
            bulk(&g, 1, 3), // 16
        ];
        assert_eq!(
            defects.iter().map(|v| v.0).collect::<Vec<_>>(),
            vec![26, 19, 12, 16]
        );
        let result = run_decode_aluf(&g, &syndrome(&g, &defects), false).unwrap();
        assert_eq!(result.growth_rounds, 4);
        let pattern = crate::noise::ErrorPattern::from_edges(&g, result.correction).unwrap();
        let mut want = defects.to_vec();
        want.sort_unstable();
        assert_eq!(syndrome_of(&g, &pattern).defects(), &want[..]);
    }

    /// Anyon parity matches syndrome parity through every validation
    /// timestep, and cluster IDs never increase and never exceed the node ID.
    #[test]
    fn stepwise_anyon_parity_and_cid_monotonicity() {
        let g = build_graph(5, true).unwrap();
        for sample in 0..20u64 {
            let params = NoiseParams::new(0.08, 0.05, sample_seed(31, 5, sample)).unwrap();
            let s = syndrome_of(&g, &sample_error(&g, &params));
            let mut engine = AlufEngine::new(&g, &s);
            let mut prev_cids: Vec<u32> = (0..g.num_nodes() as u32).collect();
            while engine.stage() != Stage::Done {
                let before_burning = engine.stage() < Stage::Burning;
                engine.step().unwrap();
                if before_burning {
                    let anyons = engine.cur.anyon.iter().filter(|&&a| a).count();
                    assert_eq!(anyons % 2, s.len() % 2, "anyon parity broke");
                }
                for i in 0..g.num_nodes() {
                    assert!(engine.cur.cid[i] <= prev_cids[i], "cid increased");
                    assert!(engine.cur.cid[i] <= i as u32, "cid above own ID");
                }
                prev_cids.copy_from_slice(&engine.cur.cid);
            }
        }
    }

    /// After Burning commits, every cluster's grown edges form a spanning
    /// tree of the cluster with exactly one pointerless root, and every
    /// non-root's pointer crosses a grown edge.
    #[test]
    fn burning_leaves_a_rooted_spanning_forest() {
        let g = build_graph(5, true).unwrap();
        for sample in 0..10u64 {
            let params = NoiseParams::new(0.08, 0.05, sample_seed(77, 5, sample)).unwrap();
            let s = syndrome_of(&g, &sample_error(&g, &params));
            let mut engine = AlufEngine::new(&g, &s);
            engine.run_until(Stage::Peeling).unwrap();

            // Connected components over fully grown edges.
            let n = g.num_nodes();
            let mut comp = vec![usize::MAX; n];
            let mut edges_in_comp = vec![0usize; n];
            for start in 0..n {
                if comp[start] != usize::MAX {
                    continue;
                }
                let mut stack = vec![NodeId(start as u32)];
                comp[start] = start;
                while let Some(v) = stack.pop() {
                    for a in g.neighbors(v) {
                        if engine.support(a.edge) == 2 {
                            edges_in_comp[start] += 1; // counts each edge twice
                            if comp[a.node.idx()] == usize::MAX {
                                comp[a.node.idx()] = start;
                                stack.push(a.node);
                            }
                        }
                    }
                }
            }
            let mut comp_sizes = vec![0usize; n];
            let mut comp_roots = vec![0usize; n];
            for i in 0..n {
                comp_sizes[comp[i]] += 1;
                if engine.pointer(NodeId(i as u32)) == Pointer::C {
                    comp_roots[comp[i]] += 1;
                } else {
                    let v = NodeId(i as u32);
                    let a = g.neighbor_toward(v, engine.pointer(v)).unwrap();
                    assert_eq!(engine.support(a.edge), 2, "pointer over missing edge");
                    assert_eq!(comp[a.node.idx()], comp[i]);
                }
            }
            for c in 0..n {
                if comp[c] == c {
                    assert_eq!(edges_in_comp[c] / 2, comp_sizes[c] - 1, "cycle survived burning");
                    assert_eq!(comp_roots[c], 1, "component must have exactly one root");
                }
            }
        }
    }

    /// After the decode completes, no bulk defects remain and the correction
    /// reproduces the syndrome.
    #[test]
    fn random_decodes_clear_bulk_defects_and_reproduce_syndromes() {
        for (d, faulty, p, q) in [(3, false, 0.1, 0.0), (5, false, 0.08, 0.0), (5, true, 0.05, 0.05)] {
            let g = build_graph(d, faulty).unwrap();
            for sample in 0..30u64 {
                let params = NoiseParams::new(p, q, sample_seed(13, d, sample)).unwrap();
                let s = syndrome_of(&g, &sample_error(&g, &params));
                let mut engine = AlufEngine::new(&g, &s);
                engine.run().unwrap();
                for i in 0..g.num_nodes() {
                    let v = NodeId(i as u32);
                    if g.is_bulk(v) {
                        assert!(!engine.defect(v), "bulk defect survived peeling");
                    }
                }
                let result = engine.finish();
                let pattern =
                    crate::noise::ErrorPattern::from_edges(&g, result.correction).unwrap();
                assert_eq!(syndrome_of(&g, &pattern), s, "correction invalid");
            }
        }
    }

    #[test]
    fn tiny_timestep_budget_times_out() {
        let g = build_graph(5, false).unwrap();
        let v = bulk(&g, 2, 2);
        let mut engine = AlufEngine::new(&g, &syndrome(&g, &[v]));
        engine.set_max_timesteps(2);
        assert_eq!(
            engine.run().unwrap_err(),
            EngineError::Timeout { limit: 2, stage: Stage::Presyncing }
        );
    }

    #[test]
    fn decodes_are_deterministic_including_traces() {
        let g = build_graph(5, true).unwrap();
        let params = NoiseParams::new(0.06, 0.04, 99).unwrap();
        let s = syndrome_of(&g, &sample_error(&g, &params));
        let a = run_decode_aluf(&g, &s, true).unwrap();
        let b = run_decode_aluf(&g, &s, true).unwrap();
        assert_eq!(a, b);
        assert!(a.trace.as_ref().unwrap().len() as u64 == a.total_timesteps);
    }
}
