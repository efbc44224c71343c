//! Batch experiments over decoder, code distance, and noise strength.
//!
//! Every decoded sample is verified on the spot: the correction must
//! reproduce the syndrome and the leftover operator must decompose into
//! stabilizers and logical crossings.  A verification failure aborts the
//! batch and surfaces the offending sample's seed so it can be replayed.
//!
//! Batches are deterministic functions of their configuration: each sample's
//! error is keyed by (seed, distance, sample index) alone, records are
//! ordered by (decoder, distance, sample index), and the CSV encoding is
//! byte-stable, so output is identical no matter how many worker threads
//! ran the batch.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{run_decode_aluf, EngineError};
use crate::graph::{build_graph, CodeGraph, EdgeId, GraphError};
use crate::noise::{
    sample_error, sample_seed, syndrome_of, NoiseError, NoiseParams, Syndrome,
};
use crate::oracle::{
    check_correction, decompose_leftover, is_logical_error, OracleViolation,
};
use crate::sluf::run_decode_sluf;

/// Which decoder ran a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Aluf,
    Sluf,
}

impl DecoderKind {
    pub const ALL: [DecoderKind; 2] = [DecoderKind::Aluf, DecoderKind::Sluf];

    pub fn as_str(self) -> &'static str {
        match self {
            DecoderKind::Aluf => "aluf",
            DecoderKind::Sluf => "sluf",
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<DecoderKind, String> {
        match s {
            "aluf" => Ok(DecoderKind::Aluf),
            "sluf" => Ok(DecoderKind::Sluf),
            other => Err(format!("unknown decoder {other:?} (expected aluf or sluf)")),
        }
    }
}

/// One batch of decodes: the full (decoder, distance, sample) grid.  All
/// graphs carry a measurement-fault history of depth equal to the distance.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub decoders: Vec<DecoderKind>,
    pub distances: Vec<u16>,
    /// In-sheet edge flip probability.
    pub p: f64,
    /// Between-sheet edge flip probability.
    pub q: f64,
    pub samples: u32,
    pub seed: u64,
    /// Worker threads; 0 picks the runtime default.
    pub workers: usize,
    /// Also capture per-timestep traces (large; off for bulk runs).
    pub record_traces: bool,
}

/// Outcome of one decoded sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeRecord {
    pub decoder: DecoderKind,
    pub d: u16,
    pub p: f64,
    pub q: f64,
    pub sample_index: u32,
    pub validation_timesteps: u64,
    pub total_timesteps: u64,
    pub growth_rounds: u32,
    pub logical_error: bool,
}

/// One sample's per-timestep trace, for the batch sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct TraceSidecarEntry {
    pub decoder: DecoderKind,
    pub d: u16,
    pub sample_index: u32,
    pub sample_seed: u64,
    pub trace: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    /// Sorted by (decoder, distance, sample index).
    pub records: Vec<RuntimeRecord>,
    /// Present only when traces were requested, in record order.
    pub traces: Vec<TraceSidecarEntry>,
}

/// A decoded sample whose correction failed independent verification.  The
/// serialized form carries the sample seed so the instance can be replayed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationFailure {
    pub decoder: DecoderKind,
    pub d: u16,
    pub sample_index: u32,
    pub sample_seed: u64,
    #[serde(flatten)]
    pub violation: OracleViolation,
}

impl fmt::Display for VerificationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "decoder {} at d={} sample {} (seed {:#018x}): {}",
            self.decoder, self.d, self.sample_index, self.sample_seed, self.violation
        )
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("decoder {decoder} at d={d} sample {sample_index}: {source}")]
    Engine {
        decoder: DecoderKind,
        d: u16,
        sample_index: u32,
        source: EngineError,
    },
    #[error("verification failed: {0}")]
    Verification(VerificationFailure),
    #[error("worker pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

struct DecodeOutcome {
    correction: Vec<EdgeId>,
    validation_timesteps: u64,
    total_timesteps: u64,
    growth_rounds: u32,
    trace: Option<serde_json::Value>,
}

fn decode_with(
    g: &CodeGraph,
    decoder: DecoderKind,
    s: &Syndrome,
    want_trace: bool,
) -> Result<DecodeOutcome, EngineError> {
    fn to_value<T: Serialize>(t: Vec<T>) -> serde_json::Value {
        serde_json::to_value(t).expect("trace records serialize")
    }
    Ok(match decoder {
        DecoderKind::Aluf => {
            let r = run_decode_aluf(g, s, want_trace)?;
            DecodeOutcome {
                correction: r.correction,
                validation_timesteps: r.validation_timesteps,
                total_timesteps: r.total_timesteps,
                growth_rounds: r.growth_rounds,
                trace: r.trace.map(to_value),
            }
        }
        DecoderKind::Sluf => {
            let r = run_decode_sluf(g, s, want_trace)?;
            DecodeOutcome {
                correction: r.correction,
                validation_timesteps: r.validation_timesteps,
                total_timesteps: r.total_timesteps,
                growth_rounds: r.growth_rounds,
                trace: r.trace.map(to_value),
            }
        }
    })
}

/// Decodes, verifies, and records one sample of the grid.
fn run_sample(
    g: &CodeGraph,
    cfg: &ExperimentConfig,
    decoder: DecoderKind,
    d: u16,
    sample_index: u32,
) -> Result<(RuntimeRecord, Option<TraceSidecarEntry>), ExperimentError> {
    let seed = sample_seed(cfg.seed, d, sample_index as u64);
    let params = NoiseParams::new(cfg.p, cfg.q, seed)?;
    let error = sample_error(g, &params);
    let s = syndrome_of(g, &error);
    let outcome = decode_with(g, decoder, &s, cfg.record_traces).map_err(|source| {
        ExperimentError::Engine { decoder, d, sample_index, source }
    })?;
    let decomp = decompose_leftover(g, &error, &outcome.correction).map_err(|violation| {
        ExperimentError::Verification(VerificationFailure {
            decoder,
            d,
            sample_index,
            sample_seed: seed,
            violation,
        })
    })?;
    debug_assert!(check_correction(g, &s, &outcome.correction).unwrap_or(false));
    let record = RuntimeRecord {
        decoder,
        d,
        p: cfg.p,
        q: cfg.q,
        sample_index,
        validation_timesteps: outcome.validation_timesteps,
        total_timesteps: outcome.total_timesteps,
        growth_rounds: outcome.growth_rounds,
        logical_error: is_logical_error(&decomp),
    };
    let trace = outcome.trace.map(|trace| TraceSidecarEntry {
        decoder,
        d,
        sample_index,
        sample_seed: seed,
        trace,
    });
    Ok((record, trace))
}

/// Runs the whole grid.  Output is a pure function of the configuration
/// minus `workers`: every sample is decoded independently from its own seed
/// and results are assembled in grid order.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchOutput, ExperimentError> {
    if cfg.decoders.is_empty() {
        return Err(ExperimentError::InvalidConfig("no decoders selected".into()));
    }
    if cfg.distances.is_empty() {
        return Err(ExperimentError::InvalidConfig("no distances selected".into()));
    }
    if cfg.samples == 0 {
        return Err(ExperimentError::InvalidConfig("sample count must be positive".into()));
    }
    NoiseParams::new(cfg.p, cfg.q, 0)?;

    let graphs: Vec<(u16, CodeGraph)> = cfg
        .distances
        .iter()
        .map(|&d| Ok((d, build_graph(d, true)?)))
        .collect::<Result<_, GraphError>>()?;

    let mut jobs = Vec::with_capacity(cfg.decoders.len() * graphs.len() * cfg.samples as usize);
    for &decoder in &cfg.decoders {
        for (gi, &(d, _)) in graphs.iter().enumerate() {
            for sample_index in 0..cfg.samples {
                jobs.push((decoder, gi, d, sample_index));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let results: Vec<Result<_, ExperimentError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(decoder, gi, d, sample_index)| {
                run_sample(&graphs[gi].1, cfg, decoder, d, sample_index)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(jobs.len());
    let mut traces = Vec::new();
    for result in results {
        let (record, trace) = result?;
        records.push(record);
        traces.extend(trace);
    }
    debug_assert!(records
        .windows(2)
        .all(|w| (w[0].decoder, w[0].d, w[0].sample_index)
            <= (w[1].decoder, w[1].d, w[1].sample_index)));
    Ok(BatchOutput { records, traces })
}

pub const CSV_HEADER: &str =
    "decoder,d,p,q,sample_index,validation_timesteps,total_timesteps,growth_rounds,logical_error";

/// Writes records as CSV with the fixed header.  Floats print in shortest
/// round-trip form, so the byte stream is reproducible.
pub fn write_csv<W: Write>(mut w: W, records: &[RuntimeRecord]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.decoder,
            r.d,
            r.p,
            r.q,
            r.sample_index,
            r.validation_timesteps,
            r.total_timesteps,
            r.growth_rounds,
            r.logical_error as u8,
        )?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad CSV header: expected {CSV_HEADER:?}, found {found:?}")]
    Header { found: String },
    #[error("CSV line {line}: {message}")]
    Field { line: usize, message: String },
}

/// Parses CSV produced by [`write_csv`].
pub fn parse_csv<R: BufRead>(r: R) -> Result<Vec<RuntimeRecord>, CsvError> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end() != CSV_HEADER {
        return Err(CsvError::Header { found: header });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(CsvError::Field {
                line: line_no,
                message: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let field = |idx: usize, what: &str, err: String| CsvError::Field {
            line: line_no,
            message: format!("{what} (column {}): {err}", idx + 1),
        };
        macro_rules! parse {
            ($idx:expr, $what:expr) => {
                fields[$idx]
                    .parse()
                    .map_err(|e| field($idx, $what, format!("{e}")))?
            };
        }
        let logical_error = match fields[8] {
            "0" => false,
            "1" => true,
            other => {
                return Err(field(8, "logical_error", format!("expected 0 or 1, found {other:?}")))
            }
        };
        records.push(RuntimeRecord {
            decoder: parse!(0, "decoder"),
            d: parse!(1, "d"),
            p: parse!(2, "p"),
            q: parse!(3, "q"),
            sample_index: parse!(4, "sample_index"),
            validation_timesteps: parse!(5, "validation_timesteps"),
            total_timesteps: parse!(6, "total_timesteps"),
            growth_rounds: parse!(7, "growth_rounds"),
            logical_error,
        });
    }
    Ok(records)
}

/// Which per-sample duration a summary or fit looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Validation,
    Total,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Validation => "validation",
            Metric::Total => "total",
        }
    }

    pub fn value(self, r: &RuntimeRecord) -> u64 {
        match self {
            Metric::Validation => r.validation_timesteps,
            Metric::Total => r.total_timesteps,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Metric, String> {
        match s {
            "validation" => Ok(Metric::Validation),
            "total" => Ok(Metric::Total),
            other => Err(format!("unknown metric {other:?} (expected validation or total)")),
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean (0 for fewer than two samples).
    pub stderr: f64,
}

pub fn summarize(values: &[f64]) -> SummaryStats {
    let n = values.len();
    if n == 0 {
        return SummaryStats { n: 0, mean: f64::NAN, stderr: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return SummaryStats { n, mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    SummaryStats { n, mean, stderr: (var / n as f64).sqrt() }
}

/// Per-(decoder, distance) summary of a metric, sorted by decoder then
/// distance.
pub fn group_summary(
    records: &[RuntimeRecord],
    metric: Metric,
) -> Vec<(DecoderKind, u16, SummaryStats)> {
    let mut groups: std::collections::BTreeMap<(DecoderKind, u16), Vec<f64>> =
        std::collections::BTreeMap::new();
    for r in records {
        groups.entry((r.decoder, r.d)).or_default().push(metric.value(r) as f64);
    }
    groups
        .into_iter()
        .map(|((decoder, d), values)| (decoder, d, summarize(&values)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("log-log fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("log-log fit needs positive abscissas and means")]
    NonPositive,
}

/// Relative-error floor for fit weights: a point whose standard error is
/// zero (or implausibly tiny) is treated as having this relative error.
const MIN_RELATIVE_STDERR: f64 = 1e-9;

/// Weighted least-squares slope of ln(mean) against ln(d).  Weights are
/// inverse variances of ln(mean), using stderr/mean as the log-space
/// standard error.
pub fn fit_loglog_slope(points: &[(f64, SummaryStats)]) -> Result<SlopeFit, FitError> {
    if points.len() < 3 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if points.iter().any(|&(d, s)| d <= 0.0 || !(s.mean > 0.0)) {
        return Err(FitError::NonPositive);
    }
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, s) in points {
        let x = d.ln();
        let y = s.mean.ln();
        let sigma = (s.stderr / s.mean).max(MIN_RELATIVE_STDERR);
        let w = 1.0 / (sigma * sigma);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let delta = sw * sxx - sx * sx;
    Ok(SlopeFit {
        slope: (sw * sxy - sx * sy) / delta,
        slope_stderr: (sw / delta).sqrt(),
        intercept: (sxx * sy - sx * sxy) / delta,
        points: points.len(),
    })
}

/// Fixed-width histogram anchored at zero: bin `i` covers
/// `[i*width, (i+1)*width)`.  Returns (bin lower edge, count) for the
/// contiguous bin range from the smallest to the largest occupied bin.
pub fn histogram(values: &[u64], bin_width: u64) -> Vec<(u64, u64)> {
    assert!(bin_width > 0, "bin width must be positive");
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().min().unwrap() / bin_width;
    let hi = values.iter().max().unwrap() / bin_width;
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for &v in values {
        counts[(v / bin_width - lo) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| ((lo + i as u64) * bin_width, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            decoders: vec![DecoderKind::Aluf, DecoderKind::Sluf],
            distances: vec![3, 5],
            p: 0.01,
            q: 0.01,
            samples: 12,
            seed: 97,
            workers: 1,
            record_traces: false,
        }
    }

    #[test]
    fn batches_cover_the_grid_in_order() {
        let out = run_batch(&small_config()).unwrap();
        assert_eq!(out.records.len(), 2 * 2 * 12);
        assert!(out.traces.is_empty());
        let keys: Vec<_> =
            out.records.iter().map(|r| (r.decoder, r.d, r.sample_index)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted);
        assert!(out.records.iter().all(|r| r.p == 0.01 && r.q == 0.01));
        // Both decoders saw identical instances, so growth rounds agree
        // sample by sample.
        let (aluf, sluf): (Vec<_>, Vec<_>) =
            out.records.iter().partition(|r| r.decoder == DecoderKind::Aluf);
        for (a, s) in aluf.iter().zip(&sluf) {
            assert_eq!((a.d, a.sample_index), (s.d, s.sample_index));
            assert_eq!(a.growth_rounds, s.growth_rounds);
            assert_eq!(a.logical_error, s.logical_error);
            assert!(a.validation_timesteps <= s.validation_timesteps);
        }
    }

    #[test]
    fn csv_bytes_are_identical_across_worker_counts() {
        let mut cfg = small_config();
        let mut outputs = Vec::new();
        for workers in [1, 2, 4] {
            cfg.workers = workers;
            let out = run_batch(&cfg).unwrap();
            let mut bytes = Vec::new();
            write_csv(&mut bytes, &out.records).unwrap();
            outputs.push(bytes);
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn csv_round_trips() {
        let out = run_batch(&small_config()).unwrap();
        let mut bytes = Vec::new();
        write_csv(&mut bytes, &out.records).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().starts_with("aluf,3,0.01,0.01,0,"));
        let parsed = parse_csv(&bytes[..]).unwrap();
        assert_eq!(parsed, out.records);
    }

    #[test]
    fn csv_parser_rejects_malformed_input() {
        assert!(matches!(
            parse_csv("nonsense\n".as_bytes()).unwrap_err(),
            CsvError::Header { .. }
        ));
        let bad_row = format!("{CSV_HEADER}\naluf,3,0.01\n");
        assert!(matches!(
            parse_csv(bad_row.as_bytes()).unwrap_err(),
            CsvError::Field { line: 2, .. }
        ));
        let bad_flag = format!("{CSV_HEADER}\naluf,3,0.01,0.01,0,4,6,0,yes\n");
        assert!(matches!(
            parse_csv(bad_flag.as_bytes()).unwrap_err(),
            CsvError::Field { line: 2, .. }
        ));
    }

    #[test]
    fn traces_are_captured_when_requested() {
        let mut cfg = small_config();
        cfg.distances = vec![3];
        cfg.samples = 2;
        cfg.record_traces = true;
        let out = run_batch(&cfg).unwrap();
        assert_eq!(out.traces.len(), out.records.len());
        for (entry, record) in out.traces.iter().zip(&out.records) {
            assert_eq!(entry.decoder, record.decoder);
            assert_eq!(entry.sample_index, record.sample_index);
            assert_eq!(
                entry.trace.as_array().unwrap().len() as u64,
                record.total_timesteps
            );
            assert_eq!(entry.sample_seed, sample_seed(cfg.seed, 3, record.sample_index as u64));
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let mut cfg = small_config();
        cfg.samples = 0;
        assert!(matches!(run_batch(&cfg).unwrap_err(), ExperimentError::InvalidConfig(_)));
        let mut cfg = small_config();
        cfg.distances = vec![4];
        assert!(matches!(run_batch(&cfg).unwrap_err(), ExperimentError::Graph(_)));
        let mut cfg = small_config();
        cfg.p = 1.5;
        assert!(matches!(run_batch(&cfg).unwrap_err(), ExperimentError::Noise(_)));
        let mut cfg = small_config();
        cfg.decoders.clear();
        assert!(matches!(run_batch(&cfg).unwrap_err(), ExperimentError::InvalidConfig(_)));
    }

    #[test]
    fn noisy_small_codes_log_some_logical_errors() {
        let cfg = ExperimentConfig {
            decoders: vec![DecoderKind::Aluf],
            distances: vec![3],
            p: 0.12,
            q: 0.12,
            samples: 150,
            seed: 3,
            workers: 0,
            record_traces: false,
        };
        let out = run_batch(&cfg).unwrap();
        let failures = out.records.iter().filter(|r| r.logical_error).count();
        assert!(failures > 0, "expected some logical errors at this noise level");
        assert!(failures < out.records.len());
    }

    #[test]
    fn verification_failures_serialize_with_replay_seed() {
        let failure = VerificationFailure {
            decoder: DecoderKind::Sluf,
            d: 9,
            sample_index: 41,
            sample_seed: 0x1234,
            violation: OracleViolation::OddBulkDegree(crate::graph::NodeId(7)),
        };
        let json = serde_json::to_value(&failure).unwrap();
        assert_eq!(json["decoder"], "sluf");
        assert_eq!(json["sample_seed"], 0x1234);
        assert_eq!(json["kind"], "odd_bulk_degree");
        assert_eq!(json["detail"], 7);
    }

    #[test]
    fn summaries_compute_mean_and_standard_error() {
        let s = summarize(&[2.0, 4.0, 6.0, 8.0]);
        assert_eq!(s.n, 4);
        assert!((s.mean - 5.0).abs() < 1e-12);
        // Sample stddev of {2,4,6,8} is sqrt(20/3); stderr divides by sqrt(4).
        assert!((s.stderr - (20.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        assert_eq!(summarize(&[7.0]).stderr, 0.0);
        assert!(summarize(&[]).mean.is_nan());
    }

    #[test]
    fn group_summary_partitions_by_decoder_and_distance() {
        let out = run_batch(&small_config()).unwrap();
        let groups = group_summary(&out.records, Metric::Validation);
        assert_eq!(groups.len(), 4);
        assert_eq!(
            groups.iter().map(|&(k, d, _)| (k, d)).collect::<Vec<_>>(),
            vec![
                (DecoderKind::Aluf, 3),
                (DecoderKind::Aluf, 5),
                (DecoderKind::Sluf, 3),
                (DecoderKind::Sluf, 5),
            ]
        );
        assert!(groups.iter().all(|&(_, _, s)| s.n == 12 && s.mean > 0.0));
        // The strictly local decoder is never faster than the almost-local
        // one on the same instances.
        assert!(groups[2].2.mean > groups[0].2.mean);
    }

    #[test]
    fn loglog_fit_recovers_a_known_power_law() {
        let points: Vec<(f64, SummaryStats)> = [5.0f64, 9.0, 13.0, 17.0]
            .iter()
            .map(|&d| {
                let mean = 3.0 * d.powf(1.4);
                (d, SummaryStats { n: 100, mean, stderr: 0.02 * mean })
            })
            .collect();
        let fit = fit_loglog_slope(&points).unwrap();
        assert!((fit.slope - 1.4).abs() < 1e-9, "slope {}", fit.slope);
        assert!((fit.intercept - 3.0f64.ln()).abs() < 1e-9);
        assert_eq!(fit.points, 4);
        assert!(fit.slope_stderr > 0.0);

        // Heteroscedastic weights still recover an exact power law.
        let uneven: Vec<(f64, SummaryStats)> = points
            .iter()
            .enumerate()
            .map(|(i, &(d, s))| {
                (d, SummaryStats { stderr: s.mean * 0.01 * (i + 1) as f64, ..s })
            })
            .collect();
        let fit = fit_loglog_slope(&uneven).unwrap();
        assert!((fit.slope - 1.4).abs() < 1e-9);
    }

    #[test]
    fn loglog_fit_rejects_degenerate_input() {
        let s = SummaryStats { n: 10, mean: 5.0, stderr: 0.1 };
        assert_eq!(
            fit_loglog_slope(&[(3.0, s), (5.0, s)]).unwrap_err(),
            FitError::TooFewPoints(2)
        );
        let zero = SummaryStats { n: 10, mean: 0.0, stderr: 0.0 };
        assert_eq!(
            fit_loglog_slope(&[(3.0, s), (5.0, s), (7.0, zero)]).unwrap_err(),
            FitError::NonPositive
        );
    }

    #[test]
    fn histograms_bin_from_zero_anchored_edges() {
        let values = [3, 4, 5, 23, 24, 47];
        assert_eq!(
            histogram(&values, 21),
            vec![(0, 3), (21, 2), (42, 1)]
        );
        assert_eq!(histogram(&values, 1)[0], (3, 1));
        let ones = histogram(&values, 1);
        assert_eq!(ones.len(), 45); // contiguous from 3 through 47
        assert_eq!(ones.iter().map(|&(_, c)| c).sum::<u64>(), 6);
        assert!(histogram(&[], 5).is_empty());
        // Gap bins are present with zero counts.
        assert_eq!(histogram(&[0, 63], 21), vec![(0, 1), (21, 0), (42, 0), (63, 1)]);
    }
}
