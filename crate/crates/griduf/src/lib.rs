//! Cycle-accurate simulation of local Union–Find decoders for surface codes.
//!
//! The crate models two message-passing decoder architectures over the same
//! decoding graph — an *almost-local* variant (`engine`), where a global
//! controller observes every node's status flags directly, and a *strictly
//! local* variant (`sluf`), where stage changes and status bits propagate hop
//! by hop through a spanning signal tree and every component acts only on
//! state committed one timestep earlier.  Both produce identical corrections;
//! they differ in how many hardware timesteps the same decoding work costs.
//!
//! Supporting modules: [`graph`] builds the decoding graph (2D for perfect
//! measurements, 3D for repeated faulty measurements), [`noise`] samples
//! independent edge flips and computes syndromes, [`oracle`] provides
//! independent verification (correction validity, leftover-operator
//! decomposition, a sequential Union–Find reference, brute-force cluster
//! activity), and [`experiment`] runs batched decoding experiments and the
//! statistics used to study runtime scaling.

pub mod engine;
pub mod experiment;
pub mod graph;
pub mod noise;
pub mod oracle;
pub mod sluf;

pub use engine::{run_decode_aluf, AlufEngine, DecodeResult, EngineError, Stage};
pub use experiment::{
    fit_loglog_slope, group_summary, histogram, parse_csv, run_batch, summarize, write_csv,
    BatchOutput, DecoderKind, ExperimentConfig, ExperimentError, Metric, RuntimeRecord,
    SlopeFit, SummaryStats,
};
pub use graph::{build_graph, CodeGraph, EdgeId, GraphError, NodeId};
pub use noise::{sample_error, syndrome_of, ErrorPattern, NoiseParams, Syndrome};
pub use oracle::{
    brute_force_activity, check_correction, decompose_leftover, is_logical_error,
    ActivityMethod, ClusterView, LeftoverDecomposition, LeftoverKind, OracleViolation,
    SequentialUf,
};
pub use sluf::{run_decode_sluf, SlufEngine};
