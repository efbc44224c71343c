//! The decoding graph and its signal tree.
//!
//! One sheet of the graph is the syndrome lattice of a distance-`d` surface
//! code patch with two rough boundaries: `d` rows of `d-1` bulk nodes
//! (detectors), flanked on column 0 by West boundary nodes and on column `d`
//! by East boundary nodes, with an edge per data qubit.  With perfect
//! measurements a single sheet suffices (`tau = 0`).  With faulty
//! measurements the sheet is replicated `tau = d` times and corresponding
//! bulk nodes of consecutive sheets are joined by vertical (timelike) edges,
//! each representing a possible measurement error.
//!
//! Node IDs are assigned boundary-first — all boundary nodes of every sheet
//! (West column then East column, row-major per sheet), then all bulk nodes
//! (row-major, sheet-major).  Several decoder invariants lean on this order:
//! cluster roots are minimum-ID nodes, so any cluster containing a boundary
//! node has a boundary root.
//!
//! Every node is also given a *signalee*: the unique neighbour it forwards
//! status signals to (and adopts stage changes from) in the strictly local
//! decoder.  Signalee chains form a spanning tree rooted at node 0, which
//! talks to the controller directly.  Bulk node (t, r, c) signals downward in
//! time first (t-1, r, c), then along its row toward the West boundary
//! (r, c-1), then up its column ((r-1, 1)); every boundary node other than
//! node 0 is a leaf hanging off its unique bulk neighbour.  `span(v)` counts
//! the remaining tree depth below v's level, so a stage broadcast adopted
//! with countdown `span(v)` makes all nodes execute the stage on the same
//! timestep; `controller_span` covers the full controller-to-furthest-node
//! distance (tree depth of the furthest node plus the controller-node 0
//! link).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node in the decoding graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

/// Index of an edge in the decoding graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

impl NodeId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl EdgeId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Which rough boundary a boundary node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySide {
    West,
    East,
}

/// Node role: detector (bulk) or virtual boundary node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Bulk,
    Boundary(BoundarySide),
}

/// Lattice position: sheet (time slice), row, column.
///
/// Columns 0 and `d` are the West and East boundary columns; bulk nodes
/// occupy columns 1 through d-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coords {
    pub sheet: u16,
    pub row: u16,
    pub col: u16,
}

/// Edge class, which selects its flip probability: `Horizontal` edges live
/// inside a sheet (data-qubit errors, probability p), `Vertical` edges join
/// consecutive sheets (measurement errors, probability q).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeOrientation {
    Horizontal,
    Vertical,
}

/// A lattice direction, also used as a node's parent pointer within a cluster
/// (`C` = no pointer / cluster root).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Pointer {
    /// No pointer; the node is its cluster's root.
    C = 0,
    /// Row - 1.
    North,
    /// Row + 1.
    South,
    /// Col - 1.
    West,
    /// Col + 1.
    East,
    /// Sheet - 1.
    Down,
    /// Sheet + 1.
    Up,
}

impl Pointer {
    /// The direction pointing back the other way (`C` maps to itself).
    pub fn opposite(self) -> Pointer {
        match self {
            Pointer::C => Pointer::C,
            Pointer::North => Pointer::South,
            Pointer::South => Pointer::North,
            Pointer::West => Pointer::East,
            Pointer::East => Pointer::West,
            Pointer::Down => Pointer::Up,
            Pointer::Up => Pointer::Down,
        }
    }
}

/// Where a node forwards its status signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signalee {
    Controller,
    Node(NodeId),
}

/// One entry of a node's adjacency list.
#[derive(Debug, Clone, Copy)]
pub struct AdjEntry {
    pub node: NodeId,
    pub edge: EdgeId,
    /// Direction from the owning node toward `node`.
    pub dir: Pointer,
}

#[derive(Debug, Clone)]
struct NodeMeta {
    kind: NodeKind,
    coords: Coords,
}

#[derive(Debug, Clone, Copy)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub orientation: EdgeOrientation,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("code distance must be odd, got {0}")]
    EvenDistance(u16),
    #[error("code distance must be at least 3, got {0}")]
    DistanceTooSmall(u16),
}

/// The decoding graph, its adjacency structure, and the signal tree.
///
/// Immutable once built; decoder engines keep all mutable state outside.
#[derive(Debug, Clone)]
pub struct CodeGraph {
    d: u16,
    tau: u16,
    nodes: Vec<NodeMeta>,
    edges: Vec<Edge>,
    adj_off: Vec<u32>,
    adj: Vec<AdjEntry>,
    signalee: Vec<Signalee>,
    child_off: Vec<u32>,
    children: Vec<NodeId>,
    span: Vec<u32>,
    controller_span: u32,
    boundary_count: u32,
}

/// Builds the decoding graph for code distance `d`: a single sheet when
/// `faulty` is false (perfect measurements, `tau = 0`), or `tau = d` sheets
/// joined by vertical edges when true.
pub fn build_graph(d: u16, faulty: bool) -> Result<CodeGraph, GraphError> {
    if d % 2 == 0 {
        return Err(GraphError::EvenDistance(d));
    }
    if d < 3 {
        return Err(GraphError::DistanceTooSmall(d));
    }
    let tau = if faulty { d } else { 0 };
    Ok(CodeGraph::build(d, tau))
}

impl CodeGraph {
    fn build(d: u16, tau: u16) -> CodeGraph {
        let sheets = tau.max(1);
        let (s, dd) = (sheets as u32, d as u32);
        let boundary_count = 2 * dd * s;
        let n = (boundary_count + s * dd * (dd - 1)) as usize;

        let mut nodes = Vec::with_capacity(n);
        for t in 0..sheets {
            for (side, col) in [(BoundarySide::West, 0), (BoundarySide::East, d)] {
                for r in 0..d {
                    nodes.push(NodeMeta {
                        kind: NodeKind::Boundary(side),
                        coords: Coords { sheet: t, row: r, col },
                    });
                }
            }
        }
        for t in 0..sheets {
            for r in 0..d {
                for c in 1..d {
                    nodes.push(NodeMeta {
                        kind: NodeKind::Bulk,
                        coords: Coords { sheet: t, row: r, col: c },
                    });
                }
            }
        }
        debug_assert_eq!(nodes.len(), n);

        let id_of = |t: u16, r: u16, c: u16| -> NodeId {
            let (t, r, c) = (t as u32, r as u32, c as u32);
            let id = if c == 0 {
                t * 2 * dd + r
            } else if c == dd {
                t * 2 * dd + dd + r
            } else {
                boundary_count + t * dd * (dd - 1) + r * (dd - 1) + (c - 1)
            };
            NodeId(id)
        };

        let mut edges = Vec::new();
        // Row edges: (t, r, c) -- (t, r, c+1) for c in 0..d, d per row.
        for t in 0..sheets {
            for r in 0..d {
                for c in 0..d {
                    edges.push((id_of(t, r, c), id_of(t, r, c + 1), EdgeOrientation::Horizontal));
                }
            }
        }
        // In-plane column edges between bulk rows.
        for t in 0..sheets {
            for r in 0..d - 1 {
                for c in 1..d {
                    edges.push((id_of(t, r, c), id_of(t, r + 1, c), EdgeOrientation::Horizontal));
                }
            }
        }
        // Vertical (timelike) edges between corresponding bulk nodes.
        for t in 0..sheets - 1 {
            for r in 0..d {
                for c in 1..d {
                    edges.push((id_of(t, r, c), id_of(t + 1, r, c), EdgeOrientation::Vertical));
                }
            }
        }
        let edges: Vec<Edge> = edges
            .into_iter()
            .map(|(a, b, orientation)| Edge { u: a.min(b), v: a.max(b), orientation })
            .collect();

        // Adjacency in CSR form, entries in edge-construction order.
        let mut deg = vec![0u32; n];
        for e in &edges {
            deg[e.u.idx()] += 1;
            deg[e.v.idx()] += 1;
        }
        let mut adj_off = vec![0u32; n + 1];
        for i in 0..n {
            adj_off[i + 1] = adj_off[i] + deg[i];
        }
        let dir_between = |from: Coords, to: Coords| -> Pointer {
            if to.sheet != from.sheet {
                if to.sheet > from.sheet { Pointer::Up } else { Pointer::Down }
            } else if to.row != from.row {
                if to.row > from.row { Pointer::South } else { Pointer::North }
            } else if to.col > from.col {
                Pointer::East
            } else {
                Pointer::West
            }
        };
        let mut cursor: Vec<u32> = adj_off[..n].to_vec();
        let mut adj = vec![
            AdjEntry { node: NodeId(0), edge: EdgeId(0), dir: Pointer::C };
            adj_off[n] as usize
        ];
        for (i, e) in edges.iter().enumerate() {
            let (cu, cv) = (nodes[e.u.idx()].coords, nodes[e.v.idx()].coords);
            for (a, b, ca, cb) in [(e.u, e.v, cu, cv), (e.v, e.u, cv, cu)] {
                adj[cursor[a.idx()] as usize] = AdjEntry {
                    node: b,
                    edge: EdgeId(i as u32),
                    dir: dir_between(ca, cb),
                };
                cursor[a.idx()] += 1;
            }
        }

        // Signal tree. Chains head down in time, then west along row, then
        // north up column 1 to node 0; boundary leaves hang off their bulk
        // neighbour.
        let signalee: Vec<Signalee> = nodes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let Coords { sheet: t, row: r, col: c } = m.coords;
                if i == 0 {
                    Signalee::Controller
                } else if c == 0 {
                    Signalee::Node(id_of(t, r, 1))
                } else if c == d {
                    Signalee::Node(id_of(t, r, d - 1))
                } else if t > 0 {
                    Signalee::Node(id_of(t - 1, r, c))
                } else if c > 1 {
                    Signalee::Node(id_of(0, r, c - 1))
                } else if r > 0 {
                    Signalee::Node(id_of(0, r - 1, 1))
                } else {
                    Signalee::Node(id_of(0, 0, 0))
                }
            })
            .collect();

        // Tree depth of each node (node 0 at depth 0), then spans.
        let mut child_count = vec![0u32; n];
        for s in &signalee {
            if let Signalee::Node(p) = s {
                child_count[p.idx()] += 1;
            }
        }
        let mut child_off = vec![0u32; n + 1];
        for i in 0..n {
            child_off[i + 1] = child_off[i] + child_count[i];
        }
        let mut ccur: Vec<u32> = child_off[..n].to_vec();
        let mut children = vec![NodeId(0); child_off[n] as usize];
        for (i, s) in signalee.iter().enumerate() {
            if let Signalee::Node(p) = s {
                children[ccur[p.idx()] as usize] = NodeId(i as u32);
                ccur[p.idx()] += 1;
            }
        }
        let mut depth = vec![u32::MAX; n];
        depth[0] = 0;
        let mut queue = std::collections::VecDeque::from([NodeId(0)]);
        while let Some(v) = queue.pop_front() {
            let (lo, hi) = (child_off[v.idx()] as usize, child_off[v.idx() + 1] as usize);
            for &u in &children[lo..hi] {
                depth[u.idx()] = depth[v.idx()] + 1;
                queue.push_back(u);
            }
        }
        let max_depth = *depth.iter().max().unwrap();
        debug_assert!(depth.iter().all(|&k| k != u32::MAX), "signal tree must span");
        debug_assert_eq!(depth.iter().filter(|&&k| k == max_depth).count(), 1);
        let span: Vec<u32> = depth.iter().map(|&k| max_depth - k).collect();
        let controller_span = max_depth + 1;

        CodeGraph {
            d,
            tau,
            nodes,
            edges,
            adj_off,
            adj,
            signalee,
            child_off,
            children,
            span,
            controller_span,
            boundary_count,
        }
    }

    pub fn d(&self) -> u16 {
        self.d
    }

    /// Number of measurement rounds modelled (0 = perfect measurements).
    pub fn tau(&self) -> u16 {
        self.tau
    }

    /// Number of lattice sheets (`max(tau, 1)`).
    pub fn sheets(&self) -> u16 {
        self.tau.max(1)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Boundary nodes occupy IDs `0..boundary_count()`.
    pub fn boundary_count(&self) -> u32 {
        self.boundary_count
    }

    pub fn node_kind(&self, v: NodeId) -> NodeKind {
        self.nodes[v.idx()].kind
    }

    #[inline]
    pub fn is_bulk(&self, v: NodeId) -> bool {
        v.0 >= self.boundary_count
    }

    pub fn coords(&self, v: NodeId) -> Coords {
        self.nodes[v.idx()].coords
    }

    /// Node at the given lattice position, if one exists.
    pub fn node_at(&self, coords: Coords) -> Option<NodeId> {
        let Coords { sheet, row, col } = coords;
        if sheet >= self.sheets() || row >= self.d || col > self.d {
            return None;
        }
        let (dd, t, r, c) = (self.d as u32, sheet as u32, row as u32, col as u32);
        let id = if c == 0 {
            t * 2 * dd + r
        } else if c == dd {
            t * 2 * dd + dd + r
        } else {
            self.boundary_count + t * dd * (dd - 1) + r * (dd - 1) + (c - 1)
        };
        Some(NodeId(id))
    }

    pub fn edge(&self, e: EdgeId) -> Edge {
        self.edges[e.idx()]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[AdjEntry] {
        let (lo, hi) = (self.adj_off[v.idx()] as usize, self.adj_off[v.idx() + 1] as usize);
        &self.adj[lo..hi]
    }

    /// The edges this node owns (it is the lower-ID endpoint), so each edge
    /// has exactly one owner responsible for writing it in the engines.
    pub fn owned_edges(&self, v: NodeId) -> impl Iterator<Item = &AdjEntry> {
        self.neighbors(v).iter().filter(move |a| a.node > v)
    }

    /// The neighbour in direction `dir` from `v`, with its connecting edge.
    pub fn neighbor_toward(&self, v: NodeId, dir: Pointer) -> Option<&AdjEntry> {
        self.neighbors(v).iter().find(|a| a.dir == dir)
    }

    pub fn signalee(&self, v: NodeId) -> Signalee {
        self.signalee[v.idx()]
    }

    /// Nodes whose signalee is `v`.
    pub fn signal_children(&self, v: NodeId) -> &[NodeId] {
        let (lo, hi) = (self.child_off[v.idx()] as usize, self.child_off[v.idx() + 1] as usize);
        &self.children[lo..hi]
    }

    /// Remaining signal-tree depth below node `v`'s level; 0 for the unique
    /// furthest node.
    pub fn span(&self, v: NodeId) -> u32 {
        self.span[v.idx()]
    }

    /// Signal-tree depth of `v` (node 0 at depth 0).
    pub fn depth(&self, v: NodeId) -> u32 {
        self.controller_span - 1 - self.span[v.idx()]
    }

    /// Countdown covering a full controller-to-furthest-node broadcast,
    /// including the controller-node 0 link.
    pub fn controller_span(&self) -> u32 {
        self.controller_span
    }

    /// Serializable description of the graph (CLI `graph` subcommand).
    pub fn dump(&self) -> GraphDump {
        GraphDump {
            d: self.d,
            tau: self.tau,
            sheets: self.sheets(),
            controller_span: self.controller_span,
            node_count: self.num_nodes(),
            edge_count: self.num_edges(),
            nodes: (0..self.num_nodes())
                .map(|i| {
                    let m = &self.nodes[i];
                    let (kind, side) = match m.kind {
                        NodeKind::Bulk => ("bulk", None),
                        NodeKind::Boundary(s) => ("boundary", Some(s)),
                    };
                    NodeDump {
                        id: i as u32,
                        kind,
                        side,
                        coords: [m.coords.sheet, m.coords.row, m.coords.col],
                        span: self.span[i],
                        signalee: match self.signalee[i] {
                            Signalee::Controller => SignaleeDump::Controller("controller"),
                            Signalee::Node(p) => SignaleeDump::Node(p.0),
                        },
                        _private: (),
                    }
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .map(|(i, e)| EdgeDump {
                    id: i as u32,
                    u: e.u.0,
                    v: e.v.0,
                    orientation: e.orientation,
                })
                .collect(),
        }
    }
}

/// JSON-facing graph description.
#[derive(Serialize)]
pub struct GraphDump {
    pub d: u16,
    pub tau: u16,
    pub sheets: u16,
    pub controller_span: u32,
    pub node_count: usize,
    pub edge_count: usize,
    pub nodes: Vec<NodeDump>,
    pub edges: Vec<EdgeDump>,
}

#[derive(Serialize)]
pub struct NodeDump {
    pub id: u32,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<BoundarySide>,
    pub coords: [u16; 3],
    pub span: u32,
    pub signalee: SignaleeDump,
    #[serde(skip)]
    _private: (),
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum SignaleeDump {
    Controller(&'static str),
    Node(u32),
}

#[derive(Serialize)]
pub struct EdgeDump {
    pub id: u32,
    pub u: u32,
    pub v: u32,
    pub orientation: EdgeOrientation,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn counts(d: u32, sheets: u32) -> (usize, usize) {
        let nodes = 2 * d * sheets + sheets * d * (d - 1);
        let edges = sheets * d * d + sheets * (d - 1) * (d - 1) + (sheets - 1) * d * (d - 1);
        (nodes as usize, edges as usize)
    }

    #[test]
    fn node_and_edge_counts_match_closed_forms() {
        for (d, faulty) in [(3, false), (5, false), (3, true), (9, true), (17, true)] {
            let g = build_graph(d, faulty).unwrap();
            let (n, e) = counts(d as u32, g.sheets() as u32);
            assert_eq!(g.num_nodes(), n, "d={d} faulty={faulty}");
            assert_eq!(g.num_edges(), e, "d={d} faulty={faulty}");
            assert_eq!(g.boundary_count() as usize, 2 * d as usize * g.sheets() as usize);
        }
        // Frozen values, worked out by hand on the lattice drawings.
        assert_eq!(counts(3, 1), (12, 13));
        assert_eq!(counts(5, 1), (30, 41));
        assert_eq!(counts(3, 3), (36, 51));
        assert_eq!(counts(9, 9), (810, 1881));
        assert_eq!(counts(17, 17), (5202, 13617));
    }

    #[test]
    fn vertical_edge_count_is_sheet_gaps_times_bulk_sheet() {
        let g = build_graph(3, true).unwrap();
        let vertical = g
            .edges()
            .iter()
            .filter(|e| e.orientation == EdgeOrientation::Vertical)
            .count();
        assert_eq!(vertical, 12); // 2 sheet gaps x 6 bulk nodes per sheet
    }

    #[test]
    fn boundary_nodes_come_first_and_node_zero_is_west_corner() {
        let g = build_graph(5, true).unwrap();
        for i in 0..g.num_nodes() {
            let v = NodeId(i as u32);
            let is_boundary = matches!(g.node_kind(v), NodeKind::Boundary(_));
            assert_eq!(is_boundary, (i as u32) < g.boundary_count());
            assert_eq!(g.is_bulk(v), !is_boundary);
        }
        assert_eq!(g.coords(NodeId(0)), Coords { sheet: 0, row: 0, col: 0 });
        assert_eq!(g.node_kind(NodeId(0)), NodeKind::Boundary(BoundarySide::West));
    }

    #[test]
    fn boundary_degree_is_one_and_degrees_sum_to_twice_edges() {
        for faulty in [false, true] {
            let g = build_graph(5, faulty).unwrap();
            let mut total = 0;
            for i in 0..g.num_nodes() {
                let v = NodeId(i as u32);
                let deg = g.neighbors(v).len();
                total += deg;
                match g.node_kind(v) {
                    NodeKind::Boundary(_) => assert_eq!(deg, 1),
                    NodeKind::Bulk => assert!((2..=6).contains(&deg)),
                }
            }
            assert_eq!(total, 2 * g.num_edges());
        }
    }

    #[test]
    fn edges_are_canonical_unique_and_correctly_oriented() {
        let g = build_graph(5, true).unwrap();
        let mut seen = BTreeSet::new();
        for e in g.edges() {
            assert!(e.u < e.v);
            assert!(seen.insert((e.u, e.v)), "duplicate edge {:?}", (e.u, e.v));
            let (cu, cv) = (g.coords(e.u), g.coords(e.v));
            let want = if cu.sheet != cv.sheet {
                EdgeOrientation::Vertical
            } else {
                EdgeOrientation::Horizontal
            };
            assert_eq!(e.orientation, want);
            // Endpoints are lattice neighbours.
            let dist = (cu.sheet as i32 - cv.sheet as i32).abs()
                + (cu.row as i32 - cv.row as i32).abs()
                + (cu.col as i32 - cv.col as i32).abs();
            assert_eq!(dist, 1);
        }
    }

    #[test]
    fn adjacency_directions_are_mutually_opposite() {
        let g = build_graph(3, true).unwrap();
        for i in 0..g.num_nodes() {
            let v = NodeId(i as u32);
            for a in g.neighbors(v) {
                assert_ne!(a.dir, Pointer::C);
                let back = g
                    .neighbors(a.node)
                    .iter()
                    .find(|b| b.edge == a.edge)
                    .expect("edge listed from both endpoints");
                assert_eq!(back.node, v);
                assert_eq!(back.dir, a.dir.opposite());
                assert_eq!(g.neighbor_toward(v, a.dir).unwrap().node, a.node);
            }
        }
    }

    #[test]
    fn node_at_round_trips_all_ids() {
        let g = build_graph(5, true).unwrap();
        for i in 0..g.num_nodes() {
            let v = NodeId(i as u32);
            assert_eq!(g.node_at(g.coords(v)), Some(v));
        }
        assert_eq!(g.node_at(Coords { sheet: 5, row: 0, col: 1 }), None);
        assert_eq!(g.node_at(Coords { sheet: 0, row: 5, col: 1 }), None);
        assert_eq!(g.node_at(Coords { sheet: 0, row: 0, col: 6 }), None);
    }

    #[test]
    fn each_edge_has_exactly_one_owner_its_lower_endpoint() {
        let g = build_graph(5, false).unwrap();
        let mut owners = vec![0u32; g.num_edges()];
        for i in 0..g.num_nodes() {
            let v = NodeId(i as u32);
            for a in g.owned_edges(v) {
                assert_eq!(g.edge(a.edge).u, v);
                owners[a.edge.idx()] += 1;
            }
        }
        assert!(owners.iter().all(|&c| c == 1));
    }

    /// Walking signalee chains must reach the controller from node v in
    /// exactly depth(v) + 1 = controller_span - span(v) hops.
    #[test]
    fn signal_chains_reach_controller_in_depth_plus_one_steps() {
        for (d, faulty) in [(3, false), (5, false), (3, true), (5, true)] {
            let g = build_graph(d, faulty).unwrap();
            for i in 0..g.num_nodes() {
                let v = NodeId(i as u32);
                let mut cur = v;
                let mut steps = 0u32;
                loop {
                    steps += 1;
                    match g.signalee(cur) {
                        Signalee::Controller => break,
                        Signalee::Node(p) => {
                            assert_eq!(g.depth(p), g.depth(cur) - 1, "chains descend one level");
                            cur = p;
                        }
                    }
                    assert!(steps <= g.num_nodes() as u32, "signalee cycle at node {i}");
                }
                assert_eq!(steps, g.depth(v) + 1);
                assert_eq!(steps, g.controller_span() - g.span(v));
            }
        }
    }

    #[test]
    fn signal_children_invert_signalee() {
        let g = build_graph(5, true).unwrap();
        let mut total = 0;
        for i in 0..g.num_nodes() {
            let v = NodeId(i as u32);
            for &u in g.signal_children(v) {
                assert_eq!(g.signalee(u), Signalee::Node(v));
            }
            total += g.signal_children(v).len();
        }
        assert_eq!(total, g.num_nodes() - 1); // everyone but node 0 has a parent node
    }

    #[test]
    fn unique_furthest_node_is_last_east_boundary_node() {
        for (d, faulty) in [(3, false), (5, false), (3, true), (9, true)] {
            let g = build_graph(d, faulty).unwrap();
            let furthest: Vec<NodeId> = (0..g.num_nodes() as u32)
                .map(NodeId)
                .filter(|&v| g.span(v) == 0)
                .collect();
            assert_eq!(furthest.len(), 1);
            let f = furthest[0];
            assert_eq!(f.0, g.boundary_count() - 1);
            assert_eq!(g.node_kind(f), NodeKind::Boundary(BoundarySide::East));
            assert_eq!(
                g.coords(f),
                Coords { sheet: g.sheets() - 1, row: d - 1, col: d }
            );
        }
        // Frozen from the d=3 faulty lattice drawing: the furthest node is 17.
        let g = build_graph(3, true).unwrap();
        let f = (0..g.num_nodes() as u32).map(NodeId).find(|&v| g.span(v) == 0);
        assert_eq!(f, Some(NodeId(17)));
    }

    #[test]
    fn controller_span_closed_forms() {
        for d in [3u16, 5, 9, 15] {
            let g2 = build_graph(d, false).unwrap();
            assert_eq!(g2.controller_span(), 2 * d as u32);
            let g3 = build_graph(d, true).unwrap();
            assert_eq!(g3.controller_span(), 3 * d as u32 - 1);
        }
    }

    #[test]
    fn node_depths_follow_coordinate_sum_rules() {
        let g = build_graph(5, true).unwrap();
        for i in 0..g.num_nodes() {
            let v = NodeId(i as u32);
            let Coords { sheet: t, row: r, col: c } = g.coords(v);
            let want = if v.0 == 0 {
                0
            } else if c == 0 {
                (t + r + 2) as u32
            } else if c == g.d() {
                (t + r + g.d()) as u32
            } else {
                (t + r + c) as u32
            };
            assert_eq!(g.depth(v), want, "node {i} coords {:?}", g.coords(v));
        }
    }

    #[test]
    fn rejects_invalid_distances() {
        assert_eq!(build_graph(4, false).unwrap_err(), GraphError::EvenDistance(4));
        assert_eq!(build_graph(0, true).unwrap_err(), GraphError::EvenDistance(0));
        assert_eq!(build_graph(1, false).unwrap_err(), GraphError::DistanceTooSmall(1));
    }

    #[test]
    fn dump_is_serializable_and_consistent() {
        let g = build_graph(3, false).unwrap();
        let dump = g.dump();
        assert_eq!(dump.nodes.len(), g.num_nodes());
        assert_eq!(dump.edges.len(), g.num_edges());
        let json = serde_json::to_string(&dump).unwrap();
        assert!(json.contains("\"controller\""));
        assert!(json.contains("\"horizontal\""));
    }
}
