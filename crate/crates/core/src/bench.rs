//! Repeated-run benchmark protocol: every algorithm runs `R` times, either
//! from shared K-Means++ prototypes or from its own initialization, and
//! each metric is summarized as mean and sample standard deviation.

use std::collections::hash_map::DefaultHasher;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::clustering::{
    fcm_fit, hard_assign, initial_prototypes, kmeans_fit, kmeanspp_seed, pocs_fit, ClusterConfig,
    Init, DEFAULT_FUZZIFIER,
};
use crate::data::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, clustering_error, ErrorKind};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    KMeans,
    KMeansPlusPlus,
    Fcm,
    Pocs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::KMeans,
        Algorithm::KMeansPlusPlus,
        Algorithm::Fcm,
        Algorithm::Pocs,
    ];

    /// Identifier used on the command line and in CSV output.
    pub fn id(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::KMeansPlusPlus => "kmeanspp",
            Algorithm::Fcm => "fcm",
            Algorithm::Pocs => "pocs",
        }
    }

    /// Column heading for text tables.
    pub fn title(self) -> &'static str {
        match self {
            Algorithm::KMeans => "K-Means",
            Algorithm::KMeansPlusPlus => "K-Means++",
            Algorithm::Fcm => "FCM",
            Algorithm::Pocs => "POCS-based",
        }
    }

    /// Initialization used when the algorithm runs on its own.
    pub fn default_init(self) -> Init {
        match self {
            Algorithm::KMeans | Algorithm::Fcm => Init::RandomPick,
            Algorithm::KMeansPlusPlus | Algorithm::Pocs => Init::KMeansPlusPlus,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?} (expected kmeans, kmeanspp, fcm or pocs)")))
    }
}

/// Hard partition produced by any of the algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub prototypes: Vec<Point>,
    pub assignments: Vec<usize>,
    pub own_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Fits `algorithm` with `config` as given; `config.init` is honored.
pub fn fit(
    algorithm: Algorithm,
    data: &EmbeddingDataset,
    config: &ClusterConfig,
    fuzzifier: f64,
) -> Result<FitOutcome> {
    match algorithm {
        Algorithm::KMeans | Algorithm::KMeansPlusPlus => {
            let m = kmeans_fit(data, config)?;
            Ok(FitOutcome {
                prototypes: m.prototypes,
                assignments: m.assignments,
                own_objective: m.own_objective,
                iterations: m.iterations,
                converged: m.converged,
            })
        }
        Algorithm::Pocs => {
            let m = pocs_fit(data, config)?;
            Ok(FitOutcome {
                prototypes: m.prototypes,
                assignments: m.assignments,
                own_objective: m.own_objective,
                iterations: m.iterations,
                converged: m.converged,
            })
        }
        Algorithm::Fcm => {
            let m = fcm_fit(data, config, fuzzifier)?;
            let assignments = hard_assign(&m);
            Ok(FitOutcome {
                prototypes: m.prototypes,
                assignments,
                own_objective: m.objective,
                iterations: m.iterations,
                converged: m.converged,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub error_sse: f64,
    pub error_sum_dist: f64,
    pub own_objective: f64,
    /// Present when the dataset carries labels.
    pub accuracy_pct: Option<f64>,
    /// Initialization plus iterations, in milliseconds.
    pub elapsed_ms: f64,
    /// Initialization alone.
    pub seed_ms: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs one fit and scores it. Only initialization and the fit itself are
/// timed; scoring happens after the clock stops.
pub fn run_once(
    algorithm: Algorithm,
    data: &EmbeddingDataset,
    config: &ClusterConfig,
    fuzzifier: f64,
) -> Result<(RunResult, FitOutcome)> {
    let start = Instant::now();
    let init = initial_prototypes(data, config)?;
    let seed_ms = ms_since(start);
    let resolved = config.clone().with_init(Init::Provided(init));
    let outcome = fit(algorithm, data, &resolved, fuzzifier)?;
    let elapsed_ms = ms_since(start);

    let error_sse = clustering_error(data, &outcome.prototypes, &outcome.assignments, ErrorKind::Sse);
    let error_sum_dist =
        clustering_error(data, &outcome.prototypes, &outcome.assignments, ErrorKind::SumDist);
    if !(error_sse.is_finite() && outcome.own_objective.is_finite()) {
        return Err(Error::NonFinite(format!("{algorithm} produced a non-finite objective")));
    }
    let accuracy_pct = match (data.labels(), data.n_classes()) {
        (Some(labels), Some(classes)) => Some(accuracy(&outcome.assignments, labels, config.k, classes)?),
        _ => None,
    };
    Ok((
        RunResult {
            algorithm,
            error_sse,
            error_sum_dist,
            own_objective: outcome.own_objective,
            accuracy_pct,
            elapsed_ms,
            seed_ms,
            iterations: outcome.iterations,
            converged: outcome.converged,
            seed: config.rng_seed,
        },
        outcome,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Every algorithm starts from the same K-Means++ prototypes.
    SharedInit,
    /// Each algorithm initializes on its own.
    IndependentInit,
}

impl Condition {
    pub fn id(self) -> &'static str {
        match self {
            Condition::SharedInit => "shared",
            Condition::IndependentInit => "independent",
        }
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(Condition::SharedInit),
            "independent" => Ok(Condition::IndependentInit),
            _ => Err(Error::invalid(format!("unknown condition {s:?} (expected shared or independent)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// `k`, iteration limits and the base seed; `init` is overridden per run.
    pub base: ClusterConfig,
    pub repetitions: usize,
    pub condition: Condition,
    pub fuzzifier: f64,
    /// With timing off, runs may execute in parallel and time metrics are
    /// recorded as zero.
    pub timing: bool,
    /// Every repetition reuses the base seed instead of `base + r`.
    pub fixed_seed: bool,
}

impl BenchConfig {
    pub fn new(base: ClusterConfig, repetitions: usize, condition: Condition) -> Self {
        BenchConfig {
            base,
            repetitions,
            condition,
            fuzzifier: DEFAULT_FUZZIFIER,
            timing: true,
            fixed_seed: false,
        }
    }
}

/// One scheduled run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub rep: usize,
    pub algorithm: Algorithm,
    pub config: ClusterConfig,
    /// Time spent drawing the shared prototypes this run starts from.
    pub shared_seed_ms: f64,
}

/// Schedules `repetitions × algorithms` runs. Repetition `r` uses seed
/// `base_seed + r` (or `base_seed` with `fixed_seed`); under `SharedInit` one K-Means++ draw with that seed is
/// handed to every algorithm.
pub fn plan(
    algorithms: &[Algorithm],
    data: &EmbeddingDataset,
    config: &BenchConfig,
) -> Result<Vec<PlannedRun>> {
    if config.repetitions == 0 {
        return Err(Error::invalid("repetitions must be at least 1"));
    }
    if algorithms.is_empty() {
        return Err(Error::invalid("no algorithms selected"));
    }
    config.base.validate(data)?;
    let mut runs = Vec::with_capacity(config.repetitions * algorithms.len());
    for rep in 0..config.repetitions {
        let offset = if config.fixed_seed { 0 } else { rep as u64 };
        let seed = config.base.rng_seed.wrapping_add(offset);
        let (shared, shared_seed_ms) = match config.condition {
            Condition::SharedInit => {
                let start = Instant::now();
                let protos = kmeanspp_seed(data, config.base.k, seed)?;
                (Some(protos), ms_since(start))
            }
            Condition::IndependentInit => (None, 0.0),
        };
        for &algorithm in algorithms {
            let init = match &shared {
                Some(p) => Init::Provided(p.clone()),
                None => algorithm.default_init(),
            };
            runs.push(PlannedRun {
                rep,
                algorithm,
                config: config.base.clone().with_seed(seed).with_init(init),
                shared_seed_ms,
            });
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    ErrorSse,
    ErrorSumDist,
    OwnObjective,
    Accuracy,
    ElapsedMs,
    SeedMs,
    Iterations,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::ErrorSse,
        Metric::ErrorSumDist,
        Metric::OwnObjective,
        Metric::Accuracy,
        Metric::ElapsedMs,
        Metric::SeedMs,
        Metric::Iterations,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Metric::ErrorSse => "clustering_error",
            Metric::ErrorSumDist => "sum_distance",
            Metric::OwnObjective => "own_objective",
            Metric::Accuracy => "accuracy",
            Metric::ElapsedMs => "time_ms",
            Metric::SeedMs => "seed_ms",
            Metric::Iterations => "iterations",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Metric::ErrorSse => "clustering error",
            Metric::ErrorSumDist => "sum of distances",
            Metric::OwnObjective => "own objective",
            Metric::Accuracy => "classification accuracy",
            Metric::ElapsedMs => "execution time (ms)",
            Metric::SeedMs => "seeding time (ms)",
            Metric::Iterations => "iterations",
        }
    }

    pub fn is_timing(self) -> bool {
        matches!(self, Metric::ElapsedMs | Metric::SeedMs)
    }

    fn value(self, r: &RunResult) -> Option<f64> {
        match self {
            Metric::ErrorSse => Some(r.error_sse),
            Metric::ErrorSumDist => Some(r.error_sum_dist),
            Metric::OwnObjective => Some(r.own_objective),
            Metric::Accuracy => r.accuracy_pct,
            Metric::ElapsedMs => Some(r.elapsed_ms),
            Metric::SeedMs => Some(r.seed_ms),
            Metric::Iterations => Some(r.iterations as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single sample.
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Stat {
    let n = values.len();
    if n == 0 {
        return Stat { mean: f64::NAN, std: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Stat { mean, std }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub stats: Vec<(Metric, Stat)>,
}

impl AlgorithmSummary {
    pub fn get(&self, metric: Metric) -> Option<Stat> {
        self.stats.iter().find(|(m, _)| *m == metric).map(|(_, s)| *s)
    }
}

/// Record confirming that one shared initialization reached every
/// algorithm unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedInitRecord {
    pub rep: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub fingerprint: u64,
    pub identical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub dataset: String,
    pub condition: Condition,
    pub repetitions: usize,
    pub timing: bool,
    pub algorithms: Vec<Algorithm>,
    /// Sorted by algorithm order, then repetition.
    pub runs: Vec<RunResult>,
    pub summaries: Vec<AlgorithmSummary>,
    pub shared_inits: Vec<SharedInitRecord>,
}

impl BenchmarkReport {
    pub fn summary(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.summaries.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn stat(&self, algorithm: Algorithm, metric: Metric) -> Option<Stat> {
        self.summary(algorithm).and_then(|s| s.get(metric))
    }

    /// Metrics present in this report, in canonical order.
    pub fn metrics(&self) -> Vec<Metric> {
        Metric::ALL
            .into_iter()
            .filter(|m| self.timing || !m.is_timing())
            .filter(|m| *m != Metric::Accuracy || self.runs.iter().all(|r| r.accuracy_pct.is_some()))
            .collect()
    }
}

fn fingerprint(protos: &[Point]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in protos {
        for c in p.iter() {
            c.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

fn shared_init_records(planned: &[PlannedRun]) -> Vec<SharedInitRecord> {
    let mut records: Vec<SharedInitRecord> = Vec::new();
    for run in planned {
        let Init::Provided(protos) = &run.config.init else {
            continue;
        };
        let fp = fingerprint(protos);
        match records.iter_mut().find(|r| r.rep == run.rep) {
            Some(r) => {
                r.algorithms.push(run.algorithm);
                r.identical &= r.fingerprint == fp;
            }
            None => records.push(SharedInitRecord {
                rep: run.rep,
                seed: run.config.rng_seed,
                algorithms: vec![run.algorithm],
                fingerprint: fp,
                identical: true,
            }),
        }
    }
    records
}

/// Builds per-algorithm summaries. The result does not depend on the order
/// of `runs`.
pub fn aggregate(algorithms: &[Algorithm], runs: &[RunResult], timing: bool) -> Vec<AlgorithmSummary> {
    algorithms
        .iter()
        .map(|&algorithm| {
            let mut mine: Vec<&RunResult> = runs.iter().filter(|r| r.algorithm == algorithm).collect();
            mine.sort_by_key(|r| r.seed);
            let stats = Metric::ALL
                .into_iter()
                .filter(|m| timing || !m.is_timing())
                .filter_map(|m| {
                    let values: Option<Vec<f64>> = mine.iter().map(|r| m.value(r)).collect();
                    values.filter(|v| !v.is_empty()).map(|v| (m, mean_std(&v)))
                })
                .collect();
            AlgorithmSummary { algorithm, stats }
        })
        .collect()
}

pub fn benchmark(
    algorithms: &[Algorithm],
    data: &EmbeddingDataset,
    config: &BenchConfig,
) -> Result<BenchmarkReport> {
    let planned = plan(algorithms, data, config)?;
    let execute = |p: &PlannedRun| -> Result<RunResult> {
        let (mut r, _) = run_once(p.algorithm, data, &p.config, config.fuzzifier)?;
        if config.timing {
            r.seed_ms += p.shared_seed_ms;
            r.elapsed_ms += p.shared_seed_ms;
        } else {
            r.seed_ms = 0.0;
            r.elapsed_ms = 0.0;
        }
        Ok(r)
    };
    // Timed runs are serial; untimed runs are spread over threads.
    let mut runs: Vec<RunResult> = if config.timing {
        planned.iter().map(execute).collect::<Result<_>>()?
    } else {
        planned.par_iter().map(execute).collect::<Result<_>>()?
    };
    runs.sort_by_key(|r| {
        (
            algorithms.iter().position(|a| *a == r.algorithm).unwrap_or(usize::MAX),
            r.seed,
        )
    });
    let summaries = aggregate(algorithms, &runs, config.timing);
    Ok(BenchmarkReport {
        dataset: data.name().to_string(),
        condition: config.condition,
        repetitions: config.repetitions,
        timing: config.timing,
        algorithms: algorithms.to_vec(),
        runs,
        summaries,
        shared_inits: shared_init_records(&planned),
    })
}

/// Metrics shown in text tables: error, time and accuracy.
pub const TABLE_METRICS: [Metric; 3] = [Metric::ErrorSse, Metric::ElapsedMs, Metric::Accuracy];

/// Aligned text tables, one per metric: rows are datasets, columns are
/// algorithms, cells are `mean±std` with one decimal. Metrics absent from
/// every report are skipped.
pub fn render_tables(reports: &[BenchmarkReport], metrics: &[Metric]) -> String {
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for r in reports {
        for a in &r.algorithms {
            if !algorithms.contains(a) {
                algorithms.push(*a);
            }
        }
    }
    let mut out = String::new();
    for &metric in metrics {
        if !reports.iter().any(|r| r.metrics().contains(&metric)) {
            continue;
        }
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec![String::new()];
        header.extend(algorithms.iter().map(|a| a.title().to_string()));
        grid.push(header);
        for r in reports {
            let mut row = vec![r.dataset.clone()];
            for &a in &algorithms {
                row.push(match r.stat(a, metric) {
                    Some(s) => format!("{:.1}±{:.1}", s.mean, s.std),
                    None => "-".to_string(),
                });
            }
            grid.push(row);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
            .collect();
        let condition = reports.first().map_or("", |r| r.condition.id());
        let reps = reports.first().map_or(0, |r| r.repetitions);
        let _ = writeln!(out, "{} ({condition} init, R={reps})", metric.title());
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (cell, &w))| {
                    let pad = w - cell.chars().count();
                    if c == 0 {
                        format!("{cell}{}", " ".repeat(pad))
                    } else {
                        format!("{}{cell}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out.push('\n');
    }
    out
}

pub const CSV_HEADER: &str = "dataset,condition,algorithm,metric,mean,std,R";

/// One row per dataset × algorithm × metric.
pub fn render_csv(reports: &[BenchmarkReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for s in &r.summaries {
            for (m, stat) in &s.stats {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:?},{:?},{}",
                    r.dataset,
                    r.condition.id(),
                    s.algorithm.id(),
                    m.id(),
                    stat.mean,
                    stat.std,
                    r.repetitions
                );
            }
        }
    }
    out
}
