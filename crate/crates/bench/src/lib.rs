//! Benchmark harness for the evaluation engine: sweeps the configuration
//! matrix on one core, checks every case against the scalar oracle before
//! timing it, and reports process CPU time per batch.

pub mod cpu_time;
pub mod report;

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use odt_core::synthetic::SyntheticError;
use odt_core::{
    deserialize_model, evaluate_scalar, generate_features, generate_synthetic_model, DocumentError, EvalConfig,
    EvalError, Evaluator, FeatureMatrix, Layout, LeafPrecision, LeafStrategy, ObliviousModel, SyntheticSpec,
    TailPolicy, VectorWidth, BLOCK_SIZES,
};

use cpu_time::{mean_std, process_cpu_time};

pub const MIN_REPETITIONS: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("cannot read model {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot load model {path}: {source}")]
    Document { path: PathBuf, source: DocumentError },
    #[error("cannot generate synthetic model: {0}")]
    Synthetic(#[from] SyntheticError),
    #[error("baseline case {0:?} is not in the case list")]
    UnknownBaseline(String),
    #[error("{0} repetitions requested, at least {MIN_REPETITIONS} needed")]
    Repetitions(usize),
    #[error("batch size must be positive")]
    EmptyBatch,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Where the benchmarked model comes from.
#[derive(Debug, Clone)]
pub enum ModelSource {
    File(PathBuf),
    Synthetic(SyntheticSpec),
}

impl ModelSource {
    pub fn load(&self) -> Result<ObliviousModel, BenchError> {
        match self {
            ModelSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
                    path: path.clone(),
                    source,
                })?;
                deserialize_model(&text).map_err(|source| BenchError::Document {
                    path: path.clone(),
                    source,
                })
            }
            ModelSource::Synthetic(spec) => Ok(generate_synthetic_model(spec)?),
        }
    }
}

impl fmt::Display for ModelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSource::File(path) => write!(f, "{}", path.display()),
            ModelSource::Synthetic(s) => write!(
                f,
                "synthetic {} features x {} borders, {} trees of depth {}, seed {}",
                s.n_features, s.borders_per_feature, s.n_trees, s.depth, s.seed
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCase {
    pub config: EvalConfig,
    pub layout: Layout,
    pub batch_size: usize,
    pub repetitions: usize,
}

impl BenchCase {
    /// Stable identifier, e.g. `w256-naive-b128-scalar-object-major`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.config, self.layout.name())
    }
}

/// Which parts of the configuration matrix to enumerate.
#[derive(Debug, Clone)]
pub struct MatrixSpec {
    pub strategies: Vec<LeafStrategy>,
    pub widths: Vec<VectorWidth>,
    pub blocks: Vec<usize>,
    pub layouts: Vec<Layout>,
    pub tail_policy: TailPolicy,
    pub batch_size: usize,
    pub repetitions: usize,
}

impl MatrixSpec {
    /// Every strategy, host width, block size and layout.
    pub fn full(batch_size: usize, repetitions: usize) -> Self {
        Self {
            strategies: LeafStrategy::ALL.to_vec(),
            widths: VectorWidth::supported(),
            blocks: BLOCK_SIZES.to_vec(),
            layouts: vec![Layout::ObjectMajor, Layout::FeatureMajor],
            tail_policy: TailPolicy::ScalarTail,
            batch_size,
            repetitions,
        }
    }

    /// Cases in strategy, width, block, layout order. Strategy/width pairs
    /// without a kernel are left out; pairs the host lacks are kept and
    /// later reported as skipped.
    pub fn cases(&self) -> Vec<BenchCase> {
        let mut out = Vec::new();
        for &strategy in &self.strategies {
            for &width in &self.widths {
                if !strategy.accepts_width(width) {
                    continue;
                }
                for &block_size in &self.blocks {
                    for &layout in &self.layouts {
                        out.push(BenchCase {
                            config: EvalConfig {
                                block_size,
                                width,
                                strategy,
                                tail_policy: self.tail_policy,
                            },
                            layout,
                            batch_size: self.batch_size,
                            repetitions: self.repetitions,
                        });
                    }
                }
            }
        }
        out
    }
}

/// The case relative deviations are measured against: 128-bit naive at
/// block 128 when present, otherwise the first case.
pub fn default_baseline(cases: &[BenchCase]) -> Option<String> {
    let preferred = cases.iter().find(|c| {
        c.config.strategy == LeafStrategy::Naive
            && c.config.width == VectorWidth::W128
            && c.config.block_size == 128
            && c.layout == Layout::ObjectMajor
            && c.config.width.is_supported()
    });
    preferred.or(cases.first()).map(BenchCase::id)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CaseStatus {
    /// Output matched the oracle and the case was timed.
    Verified,
    /// The host cannot run this configuration.
    Skipped(String),
    /// Output disagreed with the oracle; the case was not timed.
    Failed(String),
}

impl CaseStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CaseStatus::Verified => "verified",
            CaseStatus::Skipped(_) => "skipped",
            CaseStatus::Failed(_) => "FAILED",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub case: BenchCase,
    pub status: CaseStatus,
    /// Mean CPU seconds per batch, present for verified cases.
    pub mean_s: Option<f64>,
    pub std_s: Option<f64>,
    /// `(time - base_time) / base_time` against the baseline case.
    pub d: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HostInfo {
    pub arch: &'static str,
    pub os: &'static str,
    pub cpu: String,
    pub features: Vec<&'static str>,
    pub widest_width: VectorWidth,
    pub debug_assertions: bool,
    pub version: &'static str,
}

impl HostInfo {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .map(|l| l.split(':').nth(1).unwrap_or("").trim().to_string())
            })
            .unwrap_or_else(|| "unknown".to_string());
        Self {
            arch: std::env::consts::ARCH,
            os: std::env::consts::OS,
            cpu,
            features: odt_core::width::host_features(),
            widest_width: VectorWidth::widest_supported(),
            debug_assertions: cfg!(debug_assertions),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub host: HostInfo,
    pub model: String,
    pub baseline: String,
    pub rows: Vec<CaseResult>,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.status, CaseStatus::Failed(_)))
            .count()
    }
}

fn tolerance(precision: LeafPrecision) -> f64 {
    match precision {
        LeafPrecision::Binary64 => 1e-12,
        LeafPrecision::Binary16 => 1e-6,
    }
}

/// Index of the first prediction off the oracle by more than the relative tolerance.
fn mismatch(got: &[f64], expected: &[f64], tol: f64) -> Option<usize> {
    got.iter()
        .zip(expected)
        .position(|(a, b)| a != b && (a - b).abs() > tol * a.abs().max(b.abs()))
}

/// Inputs and oracle predictions shared by all cases of one batch size.
struct Workload {
    inputs: HashMap<Layout, FeatureMatrix>,
    oracle: HashMap<LeafPrecision, Vec<f64>>,
}

impl Workload {
    fn new(model: &ObliviousModel, batch_size: usize, seed: u64) -> Result<Self, BenchError> {
        if batch_size == 0 {
            return Err(BenchError::EmptyBatch);
        }
        let object_major = generate_features(model, batch_size, Layout::ObjectMajor, seed);
        let mut oracle = HashMap::new();
        for precision in [LeafPrecision::Binary64, LeafPrecision::Binary16] {
            // Dimensions come from the model itself, so this cannot fail.
            oracle.insert(
                precision,
                evaluate_scalar(model, &object_major, precision).expect("matching dimensions"),
            );
        }
        let feature_major = object_major.to_layout(Layout::FeatureMajor);
        let inputs = HashMap::from([
            (Layout::ObjectMajor, object_major),
            (Layout::FeatureMajor, feature_major),
        ]);
        Ok(Self { inputs, oracle })
    }
}

/// Mean/std of CPU time per batch. The first run is checked against the
/// oracle; the next `warmup` runs are untimed.
fn run_case(
    model: &ObliviousModel,
    case: &BenchCase,
    workload: &Workload,
    warmup: usize,
) -> Result<(CaseStatus, Option<(f64, f64)>), BenchError> {
    let config = case.config;
    if !config.strategy.runs_on_host(config.width) {
        let reason = format!("host lacks {}-bit support for {}", config.width.bits(), config.strategy);
        return Ok((CaseStatus::Skipped(reason), None));
    }
    let x = &workload.inputs[&case.layout];
    let mut evaluator = Evaluator::new(model, config)?;
    let mut out = vec![0.0; x.n_objects()];
    evaluator.evaluate_into(x, &mut out)?;
    let precision = config.strategy.precision();
    let expected = &workload.oracle[&precision];
    if let Some(i) = mismatch(&out, expected, tolerance(precision)) {
        let reason = format!("object {i}: {} vs oracle {}", out[i], expected[i]);
        return Ok((CaseStatus::Failed(reason), None));
    }
    for _ in 0..warmup {
        evaluator.evaluate_into(x, &mut out)?;
    }
    let mut samples = Vec::with_capacity(case.repetitions);
    for _ in 0..case.repetitions {
        let start = process_cpu_time();
        evaluator.evaluate_into(std::hint::black_box(x), &mut out)?;
        std::hint::black_box(&out);
        samples.push(process_cpu_time() - start);
    }
    Ok((CaseStatus::Verified, Some(mean_std(&samples))))
}

/// Options shared by matrix and sweep runs.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub warmup: usize,
    pub feature_seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            warmup: 2,
            feature_seed: 42,
        }
    }
}

/// Times every case in order. Each case's output is checked against the
/// oracle before timing; mismatching cases are reported as failed and not
/// timed, and cases the host cannot run are reported as skipped.
pub fn run_matrix(
    source: &ModelSource,
    cases: &[BenchCase],
    baseline: &str,
    options: RunOptions,
) -> Result<BenchReport, BenchError> {
    let model = source.load()?;
    run_matrix_on(&model, &source.to_string(), cases, baseline, options)
}

/// [`run_matrix`] on an already loaded model.
pub fn run_matrix_on(
    model: &ObliviousModel,
    model_name: &str,
    cases: &[BenchCase],
    baseline: &str,
    options: RunOptions,
) -> Result<BenchReport, BenchError> {
    if !cases.iter().any(|c| c.id() == baseline) {
        return Err(BenchError::UnknownBaseline(baseline.to_string()));
    }
    if let Some(c) = cases.iter().find(|c| c.repetitions < MIN_REPETITIONS) {
        return Err(BenchError::Repetitions(c.repetitions));
    }
    let mut workloads: HashMap<usize, Workload> = HashMap::new();
    let mut rows = Vec::with_capacity(cases.len());
    for case in cases {
        let workload = match workloads.entry(case.batch_size) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(Workload::new(model, case.batch_size, options.feature_seed)?),
        };
        let (status, timing) = run_case(model, case, workload, options.warmup)?;
        rows.push(CaseResult {
            case: *case,
            status,
            mean_s: timing.map(|t| t.0),
            std_s: timing.map(|t| t.1),
            d: None,
        });
    }
    let base = rows.iter().find(|r| r.case.id() == baseline).and_then(|r| r.mean_s);
    if let Some(base) = base {
        for row in &mut rows {
            row.d = row.mean_s.map(|t| (t - base) / base);
        }
    }
    Ok(BenchReport {
        host: HostInfo::detect(),
        model: model_name.to_string(),
        baseline: baseline.to_string(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub batch_size: usize,
    pub status: CaseStatus,
    pub mean_s: Option<f64>,
    pub std_s: Option<f64>,
    /// Number of blocks the batch splits into.
    pub blocks: usize,
    /// Objects handled by scalar code in the last block's leaf stage.
    pub scalar_tail: usize,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub host: HostInfo,
    pub model: String,
    pub config: EvalConfig,
    pub layout: Layout,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.status, CaseStatus::Failed(_)))
            .count()
    }
}

/// Mean CPU time per batch for each batch size under one configuration.
pub fn run_batch_sweep(
    source: &ModelSource,
    config: EvalConfig,
    layout: Layout,
    batch_sizes: &[usize],
    repetitions: usize,
    options: RunOptions,
) -> Result<SweepTable, BenchError> {
    let model = source.load()?;
    run_batch_sweep_on(
        &model,
        &source.to_string(),
        config,
        layout,
        batch_sizes,
        repetitions,
        options,
    )
}

/// [`run_batch_sweep`] on an already loaded model.
pub fn run_batch_sweep_on(
    model: &ObliviousModel,
    model_name: &str,
    config: EvalConfig,
    layout: Layout,
    batch_sizes: &[usize],
    repetitions: usize,
    options: RunOptions,
) -> Result<SweepTable, BenchError> {
    if repetitions < MIN_REPETITIONS {
        return Err(BenchError::Repetitions(repetitions));
    }
    let group = config.strategy.group_size(config.width);
    let mut rows = Vec::with_capacity(batch_sizes.len());
    for &batch_size in batch_sizes {
        let workload = Workload::new(model, batch_size, options.feature_seed)?;
        let case = BenchCase {
            config,
            layout,
            batch_size,
            repetitions,
        };
        let (status, timing) = run_case(model, &case, &workload, options.warmup)?;
        let blocks = odt_core::plan_blocks(batch_size, config.block_size);
        let last = blocks.last().map_or(0, |r| r.len());
        rows.push(SweepRow {
            batch_size,
            status,
            mean_s: timing.map(|t| t.0),
            std_s: timing.map(|t| t.1),
            blocks: blocks.len(),
            scalar_tail: odt_core::apply_tail_policy(config.tail_policy, group, last).scalar_objects,
        });
    }
    Ok(SweepTable {
        host: HostInfo::detect(),
        model: model_name.to_string(),
        config,
        layout,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid sweep {0:?}, expected a..b or a..b:step with 1 <= a <= b")]
pub struct SweepParseError(String);

/// Parses `a..b` or `a..b:step`; both ends inclusive.
pub fn parse_sweep(text: &str) -> Result<Vec<usize>, SweepParseError> {
    let err = || SweepParseError(text.to_string());
    let (range, step) = match text.split_once(':') {
        Some((r, s)) => (r, s.parse::<usize>().map_err(|_| err())?),
        None => (text, 1),
    };
    let (a, b) = range.split_once("..").ok_or_else(err)?;
    let (a, b) = (
        a.parse::<usize>().map_err(|_| err())?,
        b.parse::<usize>().map_err(|_| err())?,
    );
    if a == 0 || a > b || step == 0 {
        return Err(err());
    }
    Ok((a..=b).step_by(step).collect())
}
