//! `pocs-bench`: generate data, fit one clustering, run repeated benchmarks
//! and train the MNIST autoencoder.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O or parse failure,
//! 4 numeric failure. Errors go to stderr as one line,
//! `error[invalid|io|numeric]: message`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pocs_cluster::autoencoder::{self, AdamConfig, AeModel, TrainConfig};
use pocs_cluster::bench::{self, Algorithm, BenchConfig, Condition, TABLE_METRICS};
use pocs_cluster::clustering::{self, ClusterConfig};
use pocs_cluster::data::{self, EmbeddingDataset, MixtureSpec};
use pocs_cluster::{Error, ErrorKind, Result};

#[derive(Parser, Debug)]
#[command(name = "pocs-bench", version, about = "POCS-based clustering experiments")]
struct Cli {
    /// Base RNG seed for generation, initialization and training.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a labeled Gaussian-mixture CSV.
    Gen(GenArgs),
    /// Fit one algorithm once and write its prototypes and assignments.
    Cluster(ClusterArgs),
    /// Repeat each algorithm and report mean±std per metric.
    Bench(BenchArgs),
    /// Train the autoencoder on MNIST and write 32-d embeddings.
    TrainAe(TrainArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum LabelColumn {
    /// Last column is a label when the header names it `label`.
    Auto,
    /// Last column is always a label.
    Last,
    /// No label column.
    None,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Label column handling for CSV inputs.
    #[arg(long, value_enum, default_value_t = LabelColumn::Auto)]
    labels: LabelColumn,
    /// Standardize every feature to zero mean and unit variance.
    #[arg(long)]
    standardize: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    points_per_cluster: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Centers are drawn uniformly from [-box, box] per coordinate.
    #[arg(long = "center-box", default_value_t = 10.0)]
    center_box: f64,
    /// Output file; defaults to `<out-dir>/mixture.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    algo: Algorithm,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = clustering::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = clustering::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = clustering::DEFAULT_FUZZIFIER)]
    fuzzifier: f64,
    #[command(flatten)]
    input: DataArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated algorithm list.
    #[arg(long, value_delimiter = ',', default_value = "kmeans,kmeanspp,fcm,pocs")]
    algos: Vec<Algorithm>,
    /// Dataset CSV; repeat for several rows per table.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value = "independent")]
    condition: Condition,
    #[arg(long, default_value_t = clustering::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = clustering::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = clustering::DEFAULT_FUZZIFIER)]
    fuzzifier: f64,
    /// Reuse the base seed in every repetition.
    #[arg(long)]
    fixed_seed: bool,
    /// Drop timing metrics so reports are byte-reproducible.
    #[arg(long)]
    no_time: bool,
    /// Also write the CSV report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    input: DataArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    mnist_images: PathBuf,
    #[arg(long)]
    mnist_labels: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 256)]
    batch: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    /// Train on the first N images only.
    #[arg(long, default_value_t = 10_000)]
    subset: usize,
    /// Images to embed after training; defaults to the training subset.
    #[arg(long, requires = "embed_labels")]
    embed_images: Option<PathBuf>,
    #[arg(long, requires = "embed_images")]
    embed_labels: Option<PathBuf>,
    /// Checkpoint path; defaults to `<out-dir>/ae.ckpt`.
    #[arg(long)]
    out_model: Option<PathBuf>,
    /// Embedding CSV path; defaults to `<out-dir>/embeddings.csv`.
    #[arg(long)]
    out_embeddings: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[invalid]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (tag, code) = match e.kind() {
                ErrorKind::InvalidArgument => ("invalid", 2),
                ErrorKind::Io => ("io", 3),
                ErrorKind::Numeric => ("numeric", 4),
            };
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{tag}]: {msg}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(cli, a),
        Command::Cluster(a) => cmd_cluster(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
        Command::TrainAe(a) => cmd_train_ae(cli, a),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("--{name} must be a positive finite number, got {v}")))
    }
}

fn load_dataset(path: &Path, input: &DataArgs) -> Result<EmbeddingDataset> {
    let has_label = match input.labels {
        LabelColumn::Last => true,
        LabelColumn::None => false,
        LabelColumn::Auto => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let header = text.lines().next().unwrap_or("");
            header.rsplit(',').next().is_some_and(|c| c.trim() == "label")
        }
    };
    let ds = data::load_csv(path, has_label)?;
    Ok(if input.standardize { ds.standardized() } else { ds })
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    check_positive("center-box", a.center_box)?;
    let spec = MixtureSpec {
        n_clusters: a.clusters,
        dim: a.dim,
        points_per_cluster: a.points_per_cluster,
        center_box: (-a.center_box, a.center_box),
        sigma: a.sigma,
        rng_seed: cli.seed,
    };
    let ds = data::gen_mixture(&spec)?;
    let out = a.out.clone().unwrap_or_else(|| cli.out_dir.join("mixture.csv"));
    write_file(&out, &ds.to_csv())?;
    println!("wrote {} n={} d={} k={}", out.display(), ds.len(), ds.dim(), a.clusters);
    Ok(())
}

fn points_csv(points: &[pocs_cluster::Point]) -> String {
    let dim = points.first().map_or(0, |p| p.dim());
    let mut out: String = (0..dim).map(|j| format!("f{j}")).collect::<Vec<_>>().join(",");
    out.push('\n');
    for p in points {
        let cells: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn cmd_cluster(cli: &Cli, a: &ClusterArgs) -> Result<()> {
    check_positive("tol", a.tol)?;
    let ds = load_dataset(&a.data, &a.input)?;
    let config = ClusterConfig::new(a.k)
        .with_seed(cli.seed)
        .with_init(a.algo.default_init())
        .with_tol(a.tol)
        .with_max_iter(a.max_iter);
    config.validate(&ds)?;
    let (result, outcome) = bench::run_once(a.algo, &ds, &config, a.fuzzifier)?;

    ensure_dir(&cli.out_dir)?;
    write_file(&cli.out_dir.join("prototypes.csv"), &points_csv(&outcome.prototypes))?;
    let mut assignments = String::from("index,cluster\n");
    for (i, c) in outcome.assignments.iter().enumerate() {
        let _ = writeln!(assignments, "{i},{c}");
    }
    write_file(&cli.out_dir.join("assignments.csv"), &assignments)?;

    let accuracy = result.accuracy_pct.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
    match cli.format {
        Format::Table => println!(
            "algorithm={} k={} n={} sse={:.4} sum_dist={:.4} objective={:.4} accuracy={} time_ms={:.3} iterations={} converged={}",
            a.algo.id(),
            a.k,
            ds.len(),
            result.error_sse,
            result.error_sum_dist,
            result.own_objective,
            accuracy,
            result.elapsed_ms,
            result.iterations,
            result.converged
        ),
        Format::Csv => {
            println!("algorithm,k,n,sse,sum_dist,objective,accuracy,time_ms,iterations,converged");
            println!(
                "{},{},{},{:?},{:?},{:?},{},{:?},{},{}",
                a.algo.id(),
                a.k,
                ds.len(),
                result.error_sse,
                result.error_sum_dist,
                result.own_objective,
                result.accuracy_pct.map_or_else(String::new, |v| format!("{v:?}")),
                result.elapsed_ms,
                result.iterations,
                result.converged
            );
        }
    }
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    check_positive("tol", a.tol)?;
    if a.algos.is_empty() {
        return Err(Error::invalid("--algos must name at least one algorithm"));
    }
    let datasets: Vec<EmbeddingDataset> =
        a.data.iter().map(|p| load_dataset(p, &a.input)).collect::<Result<_>>()?;
    let base = ClusterConfig::new(a.k)
        .with_seed(cli.seed)
        .with_tol(a.tol)
        .with_max_iter(a.max_iter);
    let mut config = BenchConfig::new(base, a.reps, a.condition);
    config.fuzzifier = a.fuzzifier;
    config.timing = !a.no_time;
    config.fixed_seed = a.fixed_seed;

    let mut reports = Vec::with_capacity(datasets.len());
    for ds in &datasets {
        let report = bench::benchmark(&a.algos, ds, &config)?;
        for r in &report.shared_inits {
            let algos: Vec<&str> = r.algorithms.iter().map(|a| a.id()).collect();
            eprintln!(
                "shared-init dataset={} rep={} seed={} algorithms={} identical={} fingerprint={:016x}",
                report.dataset,
                r.rep,
                r.seed,
                algos.join(","),
                r.identical,
                r.fingerprint
            );
        }
        reports.push(report);
    }

    let csv = bench::render_csv(&reports);
    if let Some(out) = &a.out {
        write_file(out, &csv)?;
    }
    match cli.format {
        Format::Table => print!("{}", bench::render_tables(&reports, &TABLE_METRICS)),
        Format::Csv => print!("{csv}"),
    }
    Ok(())
}

fn cmd_train_ae(cli: &Cli, a: &TrainArgs) -> Result<()> {
    if a.epochs == 0 {
        return Err(Error::invalid("--epochs must be at least 1"));
    }
    if a.batch == 0 {
        return Err(Error::invalid("--batch must be at least 1"));
    }
    if a.subset == 0 {
        return Err(Error::invalid("--subset must be at least 1"));
    }
    if !(a.lr.is_finite() && a.lr >= 0.0) {
        return Err(Error::invalid(format!("--lr must be a nonnegative finite number, got {}", a.lr)));
    }
    let full = data::load_idx(&a.mnist_images, &a.mnist_labels, true)?;
    if full.dim() != autoencoder::MNIST_DIM {
        return Err(Error::DimensionMismatch {
            expected: autoencoder::MNIST_DIM,
            actual: full.dim(),
        });
    }
    let train_set = full.head(a.subset);
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        rng_seed: cli.seed,
        adam: AdamConfig { lr: a.lr, ..AdamConfig::default() },
        ..TrainConfig::default()
    };
    let model = AeModel::mnist(cli.seed);
    println!(
        "training on {} images, encoder params {}, decoder params {}",
        train_set.len(),
        model.encoder_params(),
        model.decoder_params()
    );
    let start = Instant::now();
    let outcome = autoencoder::train_with(model, &train_set, &config, |epoch, loss| {
        println!("epoch {}/{} loss={loss:.6}", epoch + 1, a.epochs);
    })?;
    let first = outcome.loss_curve[0];
    let last = *outcome.loss_curve.last().expect("epochs >= 1");
    println!(
        "initial_loss={first:.6} final_loss={last:.6} train_s={:.1}",
        start.elapsed().as_secs_f64()
    );

    let model_path = a.out_model.clone().unwrap_or_else(|| cli.out_dir.join("ae.ckpt"));
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    autoencoder::save_checkpoint(&outcome.model, cli.seed, &model_path)?;

    let embed_set = match (&a.embed_images, &a.embed_labels) {
        (Some(i), Some(l)) => data::load_idx(i, l, true)?,
        _ => train_set,
    };
    let embeddings = autoencoder::embed(&outcome.model, &embed_set)?;
    let emb_path = a.out_embeddings.clone().unwrap_or_else(|| cli.out_dir.join("embeddings.csv"));
    write_file(&emb_path, &embeddings.to_csv())?;
    println!(
        "wrote {} and {} n={} d={}",
        model_path.display(),
        emb_path.display(),
        embeddings.len(),
        embeddings.dim()
    );
    Ok(())
}
