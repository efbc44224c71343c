//! Independent edge-flip noise and syndrome extraction.
//!
//! Each horizontal edge (data qubit) flips with probability `p` and each
//! vertical edge (measurement) with probability `q`, all independently.  The
//! sampler is a keyed counter PRF rather than a stateful generator so that a
//! sample is a pure function of `(seed, edge index)`: batches can run on any
//! number of worker threads, in any order, and reproduce byte-identical
//! results, and a failing sample can be replayed from its seed alone.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CodeGraph, EdgeId, EdgeOrientation, NodeId};

/// 64-bit finalizer with full avalanche (splitmix64's mixing function).
#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58476d1ce4e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Keyed pseudo-random word for counter pair `(a, b)` under `seed`.
#[inline]
pub(crate) fn prf(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(seed ^ a.wrapping_mul(0x9e3779b97f4a7c15)) ^ b.wrapping_mul(0xd1b54a32d192ed03))
}

/// Uniform double in [0, 1) from the top 53 bits.
#[inline]
fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives the noise seed for one sample of a batch, keyed by code distance
/// and sample index.  Both decoders of a paired run use the same sample seed,
/// so they decode identical error patterns.
pub fn sample_seed(base: u64, d: u16, sample_index: u64) -> u64 {
    prf(base, d as u64 + 1, sample_index.wrapping_add(1))
}

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("probability {name} = {value} must lie in [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("edge {0} out of range")]
    EdgeOutOfRange(u32),
    #[error("edge {0} listed twice")]
    DuplicateEdge(u32),
    #[error("node {0} out of range")]
    NodeOutOfRange(u32),
    #[error("node {0} is a boundary node and cannot carry a defect")]
    BoundaryDefect(u32),
    #[error("node {0} listed twice")]
    DuplicateDefect(u32),
}

/// Edge-flip probabilities and the sampling key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p: f64,
    pub q: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub fn new(p: f64, q: f64, seed: u64) -> Result<NoiseParams, NoiseError> {
        for (name, value) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(NoiseError::InvalidProbability { name, value });
            }
        }
        Ok(NoiseParams { p, q, seed })
    }
}

/// A set of flipped edges, sorted by edge ID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorPattern {
    edges: Vec<EdgeId>,
}

impl ErrorPattern {
    /// Builds a pattern from an explicit edge list (sorted and deduplicated
    /// on the way in; out-of-range edges are rejected).
    pub fn from_edges(g: &CodeGraph, mut edges: Vec<EdgeId>) -> Result<ErrorPattern, NoiseError> {
        edges.sort_unstable();
        for w in edges.windows(2) {
            if w[0] == w[1] {
                return Err(NoiseError::DuplicateEdge(w[0].0));
            }
        }
        if let Some(&last) = edges.last() {
            if last.idx() >= g.num_edges() {
                return Err(NoiseError::EdgeOutOfRange(last.0));
            }
        }
        Ok(ErrorPattern { edges })
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    /// Symmetric difference with another edge set (used to form the leftover
    /// operator error + correction).
    pub fn symmetric_difference(&self, other: &[EdgeId]) -> Vec<EdgeId> {
        debug_assert!(other.windows(2).all(|w| w[0] < w[1]));
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.edges.len() || j < other.len() {
            match (self.edges.get(i), other.get(j)) {
                (Some(&a), Some(&b)) if a == b => {
                    i += 1;
                    j += 1;
                }
                (Some(&a), Some(&b)) if a < b => {
                    out.push(a);
                    i += 1;
                }
                (Some(_), Some(&b)) => {
                    out.push(b);
                    j += 1;
                }
                (Some(&a), None) => {
                    out.push(a);
                    i += 1;
                }
                (None, Some(&b)) => {
                    out.push(b);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        out
    }
}

/// The set of bulk nodes with odd flipped-edge parity, sorted by node ID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Syndrome {
    defects: Vec<NodeId>,
}

impl Syndrome {
    /// Builds a syndrome from an explicit defect list (boundary nodes and
    /// duplicates are rejected).
    pub fn from_defects(g: &CodeGraph, mut defects: Vec<NodeId>) -> Result<Syndrome, NoiseError> {
        defects.sort_unstable();
        for w in defects.windows(2) {
            if w[0] == w[1] {
                return Err(NoiseError::DuplicateDefect(w[0].0));
            }
        }
        for &v in &defects {
            if v.idx() >= g.num_nodes() {
                return Err(NoiseError::NodeOutOfRange(v.0));
            }
            if !g.is_bulk(v) {
                return Err(NoiseError::BoundaryDefect(v.0));
            }
        }
        Ok(Syndrome { defects })
    }

    pub fn defects(&self) -> &[NodeId] {
        &self.defects
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.defects.binary_search(&v).is_ok()
    }
}

/// Samples an error pattern: each edge flips independently with the
/// probability matching its orientation.
pub fn sample_error(g: &CodeGraph, params: &NoiseParams) -> ErrorPattern {
    let mut edges = Vec::new();
    for (i, e) in g.edges().iter().enumerate() {
        let prob = match e.orientation {
            EdgeOrientation::Horizontal => params.p,
            EdgeOrientation::Vertical => params.q,
        };
        if unit_f64(prf(params.seed, 0xed6e, i as u64)) < prob {
            edges.push(EdgeId(i as u32));
        }
    }
    ErrorPattern { edges }
}

/// The syndrome of an error pattern: bulk nodes incident to an odd number of
/// flipped edges.  Boundary nodes carry no detectors and never appear.
pub fn syndrome_of(g: &CodeGraph, pattern: &ErrorPattern) -> Syndrome {
    let mut parity = vec![false; g.num_nodes()];
    for &e in pattern.edges() {
        let edge = g.edge(e);
        parity[edge.u.idx()] ^= true;
        parity[edge.v.idx()] ^= true;
    }
    let defects = parity
        .iter()
        .enumerate()
        .filter(|&(i, &odd)| odd && g.is_bulk(NodeId(i as u32)))
        .map(|(i, _)| NodeId(i as u32))
        .collect();
    Syndrome { defects }
}
