//! Independent verification oracles.
//!
//! Everything here is deliberately implemented with different machinery than
//! the engines: set algebra and trail decomposition for correction checking,
//! a textbook sequential Union–Find with explicit per-round growth for the
//! cluster-partition reference, and exhaustive subset search / GF(2) linear
//! algebra for cluster activity.  Agreement between these oracles and the
//! message-passing engines is what the test suite leans on.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{BoundarySide, CodeGraph, EdgeId, NodeId, NodeKind};
use crate::noise::{syndrome_of, ErrorPattern, NoiseError, Syndrome};

/// True when the correction's syndrome equals the decoded syndrome, i.e. the
/// correction returns the code to the codespace.
pub fn check_correction(
    g: &CodeGraph,
    s: &Syndrome,
    correction: &[EdgeId],
) -> Result<bool, NoiseError> {
    let pattern = ErrorPattern::from_edges(g, correction.to_vec())?;
    Ok(&syndrome_of(g, &pattern) == s)
}

/// Classification of one piece of the leftover operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeftoverKind {
    /// Closed trail through the bulk: a stabilizer, harmless.
    Cycle,
    /// Path between two boundary nodes of the same side: also a stabilizer.
    SameBoundaryPath,
    /// Path connecting West to East: a logical operator.
    OppositeBoundaryPath,
}

/// One edge-disjoint piece of the leftover operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeftoverComponent {
    pub kind: LeftoverKind,
    pub edges: Vec<EdgeId>,
    /// Boundary endpoints for paths; absent for cycles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<(NodeId, NodeId)>,
}

/// The leftover operator `error xor correction`, decomposed into
/// edge-disjoint trails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeftoverDecomposition {
    pub leftover: Vec<EdgeId>,
    pub components: Vec<LeftoverComponent>,
}

impl LeftoverDecomposition {
    pub fn count_of(&self, kind: LeftoverKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }
}

/// A verification failure, serializable into failure reports.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "detail")]
pub enum OracleViolation {
    /// The leftover operator has a bulk node of odd degree, so the
    /// correction did not reproduce the syndrome there.
    #[error("leftover operator has odd degree at bulk node {0:?}")]
    OddBulkDegree(NodeId),
    /// A trail walk ended somewhere it never should (internal consistency
    /// failure of the decomposition itself).
    #[error("leftover trail from {0:?} ended at non-boundary node {1:?}")]
    DanglingTrail(NodeId, NodeId),
}

/// Splits the leftover operator into edge-disjoint trails: paths whose
/// endpoints are boundary nodes, then closed trails.  Fails if any bulk node
/// has odd leftover degree (the correction missed the syndrome there).
pub fn decompose_leftover(
    g: &CodeGraph,
    error: &ErrorPattern,
    correction: &[EdgeId],
) -> Result<LeftoverDecomposition, OracleViolation> {
    let leftover = error.symmetric_difference(correction);

    // Local adjacency over leftover edges only, lists ascending by edge ID.
    let mut adj: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); g.num_nodes()];
    for (j, &e) in leftover.iter().enumerate() {
        let edge = g.edge(e);
        adj[edge.u.idx()].push((j, edge.v));
        adj[edge.v.idx()].push((j, edge.u));
    }
    for (i, list) in adj.iter().enumerate() {
        let v = NodeId(i as u32);
        if g.is_bulk(v) && list.len() % 2 == 1 {
            return Err(OracleViolation::OddBulkDegree(v));
        }
    }

    let mut used = vec![false; leftover.len()];
    let mut cursor = vec![0usize; g.num_nodes()];
    // Walks from `start`, always taking the lowest-ID unused edge, until no
    // unused edge remains at the current node.  Returns (end, trail edges).
    let mut walk = |start: NodeId, used: &mut Vec<bool>| -> (NodeId, Vec<EdgeId>) {
        let mut cur = start;
        let mut trail = Vec::new();
        loop {
            let list = &adj[cur.idx()];
            let mut pos = cursor[cur.idx()];
            while pos < list.len() && used[list[pos].0] {
                pos += 1;
            }
            cursor[cur.idx()] = pos;
            let Some(&(j, other)) = list.get(pos) else {
                return (cur, trail);
            };
            used[j] = true;
            trail.push(leftover[j]);
            cur = other;
        }
    };

    let mut components = Vec::new();
    // Paths first: every odd-degree node is a boundary node (checked above),
    // and boundary nodes have graph degree 1, so "has an unused edge" is the
    // whole parity story there.
    for i in 0..g.num_nodes() as u32 {
        let b = NodeId(i);
        let NodeKind::Boundary(side) = g.node_kind(b) else { continue };
        if adj[b.idx()].iter().any(|&(j, _)| !used[j]) {
            let (end, edges) = walk(b, &mut used);
            let NodeKind::Boundary(end_side) = g.node_kind(end) else {
                return Err(OracleViolation::DanglingTrail(b, end));
            };
            let kind = if side == end_side {
                LeftoverKind::SameBoundaryPath
            } else {
                LeftoverKind::OppositeBoundaryPath
            };
            components.push(LeftoverComponent { kind, edges, endpoints: Some((b, end)) });
        }
    }
    // What remains has even degree everywhere: closed trails.
    for i in 0..g.num_nodes() as u32 {
        let v = NodeId(i);
        while adj[v.idx()].iter().any(|&(j, _)| !used[j]) {
            let (end, edges) = walk(v, &mut used);
            if end != v {
                return Err(OracleViolation::DanglingTrail(v, end));
            }
            components.push(LeftoverComponent {
                kind: LeftoverKind::Cycle,
                edges,
                endpoints: None,
            });
        }
    }
    debug_assert!(used.iter().all(|&u| u));
    debug_assert_eq!(
        components.iter().map(|c| c.edges.len()).sum::<usize>(),
        leftover.len()
    );
    Ok(LeftoverDecomposition { leftover, components })
}

/// A decode is a logical error exactly when an odd number of leftover pieces
/// cross from one boundary to the other.
pub fn is_logical_error(decomp: &LeftoverDecomposition) -> bool {
    decomp.count_of(LeftoverKind::OppositeBoundaryPath) % 2 == 1
}

/// Union–Find with union by size and path compression.
#[derive(Debug, Clone)]
struct Dsu {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu { parent: (0..n as u32).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut v: u32) -> u32 {
        let mut root = v;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[v as usize] != root {
            let up = self.parent[v as usize];
            self.parent[v as usize] = root;
            v = up;
        }
        root
    }

    /// Unions the two sets and returns the surviving root.
    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        big
    }
}

/// One cluster of the sequential reference decoder's partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterView {
    /// Members, ascending; singletons included.
    pub nodes: Vec<NodeId>,
    /// Fully grown edges with both endpoints in the cluster, ascending.
    pub edges: Vec<EdgeId>,
    /// Lowest member ID (the root under minimum-ID rooting).
    pub root: NodeId,
    pub defect_count: usize,
    pub touches_boundary: bool,
}

impl ClusterView {
    /// Lemma-style activity rule: odd defect parity and no boundary contact.
    pub fn parity_active(&self) -> bool {
        self.defect_count % 2 == 1 && !self.touches_boundary
    }
}

/// Sequential Union–Find reference decoder (validation phase only): explicit
/// per-round half-edge growth of every active cluster, merging through a DSU
/// rather than message passing.  Supports and the final partition must match
/// the engines exactly, round for round.
#[derive(Debug, Clone)]
pub struct SequentialUf<'g> {
    g: &'g CodeGraph,
    dsu: Dsu,
    support: Vec<u8>,
    /// Defect parity of the cluster, valid at DSU roots.
    parity: Vec<bool>,
    /// Boundary contact of the cluster, valid at DSU roots.
    boundary: Vec<bool>,
    defect: Vec<bool>,
    rounds: u32,
}

impl<'g> SequentialUf<'g> {
    pub fn new(g: &'g CodeGraph, s: &Syndrome) -> SequentialUf<'g> {
        let n = g.num_nodes();
        let mut parity = vec![false; n];
        let mut defect = vec![false; n];
        for &v in s.defects() {
            parity[v.idx()] = true;
            defect[v.idx()] = true;
        }
        let boundary = (0..n as u32).map(|v| !g.is_bulk(NodeId(v))).collect();
        SequentialUf {
            g,
            dsu: Dsu::new(n),
            support: vec![0; g.num_edges()],
            parity,
            boundary,
            defect,
            rounds: 0,
        }
    }

    fn cluster_active_root(&self, root: u32) -> bool {
        self.parity[root as usize] && !self.boundary[root as usize]
    }

    /// Whether the cluster containing `v` is active (odd defect parity, no
    /// boundary contact).
    pub fn cluster_active(&mut self, v: NodeId) -> bool {
        let r = self.dsu.find(v.0);
        self.cluster_active_root(r)
    }

    /// Runs one growth round: every active cluster adds half a unit to each
    /// incident not-fully-grown edge, then every edge that reached full
    /// support merges its endpoints.  Returns false (without growing) when
    /// no cluster is active, i.e. validation is complete.
    pub fn round(&mut self) -> bool {
        let n = self.g.num_nodes();
        let active: Vec<bool> = (0..n as u32)
            .map(|v| {
                let r = self.dsu.find(v);
                self.cluster_active_root(r)
            })
            .collect();
        if !active.iter().any(|&a| a) {
            return false;
        }
        self.rounds += 1;
        let mut filled = Vec::new();
        for (i, edge) in self.g.edges().iter().enumerate() {
            if self.support[i] < 2 {
                let add = active[edge.u.idx()] as u8 + active[edge.v.idx()] as u8;
                if add > 0 {
                    self.support[i] = (self.support[i] + add).min(2);
                    if self.support[i] == 2 {
                        filled.push(i);
                    }
                }
            }
        }
        for i in filled {
            let edge = self.g.edges()[i];
            let (ra, rb) = (self.dsu.find(edge.u.0), self.dsu.find(edge.v.0));
            if ra != rb {
                let parity = self.parity[ra as usize] ^ self.parity[rb as usize];
                let boundary = self.boundary[ra as usize] || self.boundary[rb as usize];
                let root = self.dsu.union(ra, rb);
                self.parity[root as usize] = parity;
                self.boundary[root as usize] = boundary;
            }
        }
        true
    }

    /// Runs growth rounds until no cluster is active.
    pub fn run(&mut self) {
        let cap = 4 * self.g.num_nodes() as u32 + 8;
        while self.round() {
            assert!(self.rounds < cap, "sequential reference failed to terminate");
        }
    }

    pub fn growth_rounds(&self) -> u32 {
        self.rounds
    }

    pub fn support(&self, e: EdgeId) -> u8 {
        self.support[e.idx()]
    }

    pub fn supports(&self) -> &[u8] {
        &self.support
    }

    /// The current cluster partition, singletons included, sorted by root.
    pub fn clusters(&mut self) -> Vec<ClusterView> {
        let n = self.g.num_nodes();
        let mut groups: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
        let mut min_id = vec![u32::MAX; n];
        for i in 0..n as u32 {
            let r = self.dsu.find(i);
            groups.entry(r).or_default().push(NodeId(i));
            min_id[r as usize] = min_id[r as usize].min(i);
        }
        let mut edges_of: BTreeMap<u32, Vec<EdgeId>> = BTreeMap::new();
        for (i, edge) in self.g.edges().iter().enumerate() {
            if self.support[i] == 2 {
                let r = self.dsu.find(edge.u.0);
                debug_assert_eq!(r, self.dsu.find(edge.v.0));
                edges_of.entry(r).or_default().push(EdgeId(i as u32));
            }
        }
        let mut out: Vec<ClusterView> = groups
            .into_iter()
            .map(|(r, nodes)| ClusterView {
                root: NodeId(min_id[r as usize]),
                defect_count: nodes.iter().filter(|v| self.defect[v.idx()]).count(),
                touches_boundary: nodes.iter().any(|&v| !self.g.is_bulk(v)),
                edges: edges_of.remove(&r).unwrap_or_default(),
                nodes,
            })
            .collect();
        out.sort_by_key(|c| c.root);
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ActivityError {
    #[error("cluster has {edges} edges, beyond the {cap}-edge enumeration cap")]
    ClusterTooLarge { edges: usize, cap: usize },
}

/// How [`brute_force_activity`] decides solvability.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivityMethod {
    /// Gray-code walk over all edge subsets; capped at 24 edges.
    Enumeration,
    /// GF(2) Gaussian elimination on the incidence system.
    LinearAlgebra,
    /// Enumeration up to 16 edges, linear algebra beyond.
    Auto,
}

const ENUMERATION_CAP: usize = 24;
const AUTO_ENUMERATION_LIMIT: usize = 16;

/// First-principles cluster activity: a cluster is active exactly when *no*
/// subset of its fully grown edges reproduces the defects inside it (so it
/// cannot yet be corrected locally and must keep growing).
pub fn brute_force_activity(
    g: &CodeGraph,
    cluster: &ClusterView,
    s: &Syndrome,
    method: ActivityMethod,
) -> Result<bool, ActivityError> {
    let k = cluster.edges.len();
    let solvable = match method {
        ActivityMethod::Enumeration => {
            if k > ENUMERATION_CAP {
                return Err(ActivityError::ClusterTooLarge { edges: k, cap: ENUMERATION_CAP });
            }
            enumeration_solvable(g, cluster, s)
        }
        ActivityMethod::LinearAlgebra => gf2_solvable(g, cluster, s),
        ActivityMethod::Auto => {
            if k <= AUTO_ENUMERATION_LIMIT {
                enumeration_solvable(g, cluster, s)
            } else {
                gf2_solvable(g, cluster, s)
            }
        }
    };
    Ok(!solvable)
}

/// Gray-code subset walk: flip one edge per step, tracking how many bulk
/// nodes disagree with the defect target.
fn enumeration_solvable(g: &CodeGraph, cluster: &ClusterView, s: &Syndrome) -> bool {
    let mut local = BTreeMap::new();
    for (i, &v) in cluster.nodes.iter().enumerate() {
        local.insert(v, i);
    }
    let mut parity = vec![false; cluster.nodes.len()];
    // Bulk endpoints of each edge, as local indices.
    let ends: Vec<[Option<usize>; 2]> = cluster
        .edges
        .iter()
        .map(|&e| {
            let edge = g.edge(e);
            [edge.u, edge.v].map(|v| if g.is_bulk(v) { local.get(&v).copied() } else { None })
        })
        .collect();
    let target: Vec<bool> = cluster.nodes.iter().map(|&v| s.contains(v)).collect();
    let mut mismatches = target.iter().filter(|&&t| t).count();
    if mismatches == 0 {
        return true; // the empty subset already works
    }
    let flip_end = |idx: usize, parity: &mut Vec<bool>, mismatches: &mut usize| {
        parity[idx] ^= true;
        if parity[idx] == target[idx] {
            *mismatches -= 1;
        } else {
            *mismatches += 1;
        }
    };
    for step in 1u64..(1u64 << cluster.edges.len()) {
        let j = step.trailing_zeros() as usize;
        for end in ends[j].iter().flatten() {
            flip_end(*end, &mut parity, &mut mismatches);
        }
        if mismatches == 0 {
            return true;
        }
    }
    false
}

/// GF(2) solvability of the incidence system: rows are the cluster's bulk
/// nodes, columns its edges, right-hand side the defect indicator.
fn gf2_solvable(g: &CodeGraph, cluster: &ClusterView, s: &Syndrome) -> bool {
    let k = cluster.edges.len();
    let words = (k + 1).div_ceil(64);
    let mut row_of = BTreeMap::new();
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for &v in &cluster.nodes {
        if g.is_bulk(v) {
            let mut row = vec![0u64; words];
            if s.contains(v) {
                row[k / 64] |= 1 << (k % 64); // augmented column
            }
            row_of.insert(v, rows.len());
            rows.push(row);
        }
    }
    for (j, &e) in cluster.edges.iter().enumerate() {
        let edge = g.edge(e);
        for v in [edge.u, edge.v] {
            if let Some(&r) = row_of.get(&v) {
                rows[r][j / 64] ^= 1 << (j % 64);
            }
        }
    }
    let bit = |row: &[u64], j: usize| row[j / 64] >> (j % 64) & 1 == 1;
    let mut pivot_row = 0;
    for col in 0..k {
        let Some(found) = (pivot_row..rows.len()).find(|&r| bit(&rows[r], col)) else {
            continue;
        };
        rows.swap(pivot_row, found);
        let pivot = rows[pivot_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivot_row && bit(row, col) {
                for (w, p) in row.iter_mut().zip(&pivot) {
                    *w ^= p;
                }
            }
        }
        pivot_row += 1;
        if pivot_row == rows.len() {
            break;
        }
    }
    // Inconsistent iff some row is zero on all edge columns but one on the
    // augmented column.
    !rows.iter().any(|row| {
        bit(row, k) && (0..k).all(|j| !bit(row, j))
    })
}
