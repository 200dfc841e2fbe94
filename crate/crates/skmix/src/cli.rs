//! The `skmix` binary: sketch raw data, fit mixtures on the sketches, score and
//! evaluate, and run the synthetic/bias/timing experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable or malformed data,
//! 3 numerical failure. Every command is deterministic given its full flag set
//! (including `--seed`) in single-threaded mode; the fit's restart r derives its
//! seed as `seed + r`, and sketching derives all index draws and the sign flip
//! from the sketch seed alone.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{
    bias_experiment, cluster_accuracy, make_synthetic, summarize_timings, timing_benchmark,
    write_bias_csv, write_synth_csv, write_timing_csv, BiasConfig, SynthSpec, TimingConfig,
};
use crate::gmm::{e_step, fit_restarts, CovarianceKind, FitConfig};
use crate::ingest::{read_idx_labels, CsvRows, IdxReader};
use crate::model::{Basis, ModelFile};
use crate::sketch::file::{read_sketch_file, write_sketch_file};
use crate::sketch::{sketch_dataset, SketchSpec, SketchedDataset};

/// Parse `args` (argv-style, program name first) and run the selected command.
/// Returns the process exit code instead of exiting, so tests can drive it.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; those print to stdout and exit 0.
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Parser)]
#[command(
    name = "skmix",
    version,
    about = "One-pass Gaussian mixture fitting on randomly subsampled feature sketches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precondition and subsample raw data into a .skmx sketch file
    Sketch(SketchArgs),
    /// Fit a Gaussian mixture to a sketch file and write a model JSON
    Fit(FitArgs),
    /// Assign each sketched row to its most responsible component
    Predict(PredictArgs),
    /// Score a model's hard labels against true labels
    Eval(EvalArgs),
    /// Generate the mixed-scale synthetic benchmark dataset as CSV
    Synth(SynthArgs),
    /// Monte Carlo check that sketched quadratics are unbiased, as CSV
    Bias(BiasArgs),
    /// Per-iteration EM timing sweep over sketch sizes, as CSV
    Bench(BenchArgs),
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sketch(a) => cmd_sketch(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Bias(a) => cmd_bias(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CovArg {
    /// One variance per component and feature
    #[value(alias = "diagonal")]
    Diag,
    /// One variance per component
    Spherical,
}

impl From<CovArg> for CovarianceKind {
    fn from(value: CovArg) -> Self {
        match value {
            CovArg::Diag => CovarianceKind::Diagonal,
            CovArg::Spherical => CovarianceKind::Spherical,
        }
    }
}

#[derive(Args)]
#[command(group(
    clap::ArgGroup::new("source").required(true).args(["input", "images"])
))]
struct SketchArgs {
    /// Numeric CSV input (one point per row, optional header line)
    #[arg(long, value_name = "CSV")]
    input: Option<PathBuf>,
    /// Treat the final CSV column as an integer label and carry it into the sketch
    #[arg(long, requires = "input")]
    label_col: bool,
    /// IDX image file (MNIST layout); requires --labels
    #[arg(long, value_name = "IDX", requires = "labels")]
    images: Option<PathBuf>,
    /// IDX label file accompanying --images
    #[arg(long, value_name = "IDX", requires = "images")]
    labels: Option<PathBuf>,
    /// Keep only rows whose label is in this comma-separated list
    #[arg(long, value_delimiter = ',', requires = "labels")]
    digits: Vec<u32>,
    /// Coordinates kept per row
    #[arg(long)]
    q: usize,
    /// Leading coordinates shared by all rows
    #[arg(long, default_value_t = 0)]
    qs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output .skmx path
    #[arg(long, value_name = "SKMX")]
    output: PathBuf,
}

fn cmd_sketch(args: SketchArgs) -> Result<()> {
    let start = Instant::now();
    let ds = if let Some(csv_path) = &args.input {
        sketch_csv(csv_path, args.label_col, args.q, args.qs, args.seed)?
    } else {
        let images = args.images.as_ref().expect("clap group guarantees a source");
        let labels = args.labels.as_ref().expect("clap requires labels with images");
        sketch_idx(images, labels, &args.digits, args.q, args.qs, args.seed)?
    };
    if ds.n() == 0 {
        return Err(Error::invalid("no rows survived ingestion"));
    }
    write_sketch_file(&args.output, &ds)?;
    println!(
        "sketched n={} p={} q={} q_shared={} -> {} in {:.3}s",
        ds.n(),
        ds.spec.p,
        ds.spec.q,
        ds.spec.q_shared,
        args.output.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

/// Stream a CSV through the sketcher. The first row fixes P; labels, when asked
/// for, are collected alongside without a second pass.
fn sketch_csv(
    path: &Path,
    label_col: bool,
    q: usize,
    q_shared: usize,
    seed: u64,
) -> Result<SketchedDataset> {
    let mut rows = CsvRows::open(path, label_col)?;
    let (first_row, first_label) = match rows.next() {
        Some(item) => item?,
        None => return Err(Error::format(0, "csv holds no data rows".to_string())),
    };
    let spec = SketchSpec { p: first_row.len(), q, q_shared, seed };
    let mut labels: Vec<u32> = first_label.into_iter().collect();
    let mut ds = {
        let stream = std::iter::once(Ok(first_row)).chain(rows.map(|item| {
            item.map(|(row, label)| {
                if let Some(l) = label {
                    labels.push(l);
                }
                row
            })
        }));
        sketch_dataset(stream, &spec)?
    };
    if label_col {
        ds.labels = Some(labels);
    }
    Ok(ds)
}

/// Stream an IDX image file through the sketcher, keeping rows whose label is in
/// `digits` (all rows when `digits` is empty).
fn sketch_idx(
    images: &Path,
    labels_path: &Path,
    digits: &[u32],
    q: usize,
    q_shared: usize,
    seed: u64,
) -> Result<SketchedDataset> {
    let all_labels = read_idx_labels(labels_path)?;
    let reader = IdxReader::open(images)?;
    if reader.n() != all_labels.len() {
        return Err(Error::invalid(format!(
            "{} images but {} labels",
            reader.n(),
            all_labels.len()
        )));
    }
    let spec = SketchSpec { p: reader.row_len(), q, q_shared, seed };
    let mut kept_labels: Vec<u32> = Vec::new();
    let mut ds = {
        let keep = |l: u32| digits.is_empty() || digits.contains(&l);
        let stream = reader.zip(all_labels.iter()).filter_map(|(row, &label)| match row {
            Err(e) => Some(Err(e)),
            Ok(_) if !keep(label) => None,
            Ok(row) => {
                kept_labels.push(label);
                Some(Ok(row))
            }
        });
        sketch_dataset(stream, &spec)?
    };
    ds.labels = Some(kept_labels);
    Ok(ds)
}

#[derive(Args)]
struct FitArgs {
    /// Input .skmx sketch file
    #[arg(long, value_name = "SKMX")]
    sketch: PathBuf,
    /// Number of mixture components
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = CovArg::Diag)]
    cov: CovArg,
    /// Relative log-likelihood change below which EM stops
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent fits to run; the best final log-likelihood wins
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// Worker threads for the E-step and mean M-step (1 = deterministic reference)
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Store means in the original basis instead of the preconditioned one
    #[arg(long)]
    original_basis: bool,
    /// Output model JSON path
    #[arg(long, value_name = "JSON")]
    output: PathBuf,
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let start = Instant::now();
    let ds = read_sketch_file(&args.sketch)?;
    let cfg = FitConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        num_threads: args.threads,
        ..FitConfig::new(args.k, args.cov.into(), args.seed)
    };
    let report = fit_restarts(&ds, &cfg, args.restarts)?;
    let basis = if args.original_basis { Basis::Original } else { Basis::Preconditioned };
    let model = ModelFile::from_fit(&report, &ds, &cfg, basis)?;
    model.save(&args.output)?;
    println!(
        "fit k={} cov={} restarts={}: loglik={:.6} iterations={} converged={} -> {} in {:.3}s",
        args.k,
        cfg.covariance,
        args.restarts,
        report.final_loglik(),
        report.iterations,
        report.converged,
        args.output.display(),
        start.elapsed().as_secs_f64()
    );
    println!(
        "phase seconds: init={:.3} e_step={:.3} m_step={:.3}",
        report.timings.init_s, report.timings.e_step_s, report.timings.m_step_s
    );
    Ok(())
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit`
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    /// Sketch file to score (must match the model's P, Q, and seed)
    #[arg(long, value_name = "SKMX")]
    sketch: PathBuf,
    /// Write hard labels here (one per line); stdout when omitted
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let (labels, _) = predict_labels(&args.model, &args.sketch)?;
    match &args.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            for l in &labels {
                writeln!(w, "{l}")?;
            }
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            for l in &labels {
                writeln!(w, "{l}")?;
            }
        }
    }
    Ok(())
}

/// Shared predict path: load, check compatibility, run one E-step, take argmaxes.
/// Returns the sketch too so eval can reuse its embedded labels without rereading.
fn predict_labels(model_path: &Path, sketch_path: &Path) -> Result<(Vec<u32>, SketchedDataset)> {
    let model = ModelFile::load(model_path)?;
    let ds = read_sketch_file(sketch_path)?;
    model.check_compatible(&ds)?;
    let params = model.preconditioned_params()?;
    let (resp, _) = e_step(&ds, &params)?;
    Ok((resp.hard_labels(), ds))
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    #[arg(long, value_name = "SKMX")]
    sketch: PathBuf,
    /// IDX label file; defaults to the labels embedded in the sketch
    #[arg(long, value_name = "IDX")]
    labels: Option<PathBuf>,
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (pred, ds) = predict_labels(&args.model, &args.sketch)?;
    let truth = match &args.labels {
        Some(path) => read_idx_labels(path)?,
        None => {
            ds.labels.ok_or_else(|| Error::invalid("sketch carries no labels; pass --labels"))?
        }
    };
    let report = cluster_accuracy(&pred, &truth)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("accuracy report serializes"));
    Ok(())
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    k_big: usize,
    #[arg(long, default_value_t = 2)]
    k_small: usize,
    #[arg(long, default_value_t = 250)]
    n_big: usize,
    #[arg(long, default_value_t = 50)]
    n_small: usize,
    #[arg(long, default_value_t = 20)]
    d_latent: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Spectral-norm ratio between big and small cluster covariances
    #[arg(long, default_value_t = 10.0)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (features f0..f{P-1} plus a final label column)
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        k_big: args.k_big,
        k_small: args.k_small,
        n_big: args.n_big,
        n_small: args.n_small,
        d_latent: args.d_latent,
        p: args.p,
        variance_ratio: args.ratio,
        seed: args.seed,
    };
    let ds = make_synthetic(&spec)?;
    let mut w = BufWriter::new(File::create(&args.output)?);
    write_synth_csv(&ds, &mut w)?;
    w.flush()?;
    println!(
        "synthesized n={} p={} clusters={} -> {}",
        ds.rows.len(),
        spec.p,
        spec.k_total(),
        args.output.display()
    );
    Ok(())
}

#[derive(Args)]
struct BiasArgs {
    /// Ambient dimension of each trial
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 10000)]
    trials: usize,
    /// Comma-separated Q/P sampling fractions
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.1, 0.2, 0.5])]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
}

fn cmd_bias(args: BiasArgs) -> Result<()> {
    let config = BiasConfig {
        p: args.p,
        q_over_p: args.fractions.clone(),
        trials: args.trials,
        seed: args.seed,
    };
    let points = bias_experiment(&config)?;
    let mut w = BufWriter::new(File::create(&args.output)?);
    write_bias_csv(&points, &mut w)?;
    w.flush()?;
    for pt in &points {
        println!(
            "q/p={:.2} (q={}): mean rel err D = {:.2e} +- {:.2e}, density {:.2e} +- {:.2e}",
            pt.q_over_p, pt.q, pt.mean_rel_err_d, pt.stderr_d, pt.mean_rel_err_p, pt.stderr_p
        );
    }
    println!("wrote {}", args.output.display());
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 20000)]
    n: usize,
    #[arg(long, default_value_t = 1024)]
    p: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Comma-separated sketch sizes to sweep
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32, 64, 128])]
    q: Vec<usize>,
    #[arg(long, value_enum, default_value_t = CovArg::Diag)]
    cov: CovArg,
    /// Timed EM cycles per sweep point (after one untimed warmup)
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also time the dense-EM reference at Q = P
    #[arg(long)]
    dense: bool,
    /// Output CSV path
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    // The harness is single-threaded by construction, so timings are comparable.
    let config = TimingConfig {
        n: args.n,
        p: args.p,
        k: args.k,
        q_list: args.q.clone(),
        covariance: args.cov.into(),
        iters: args.iters,
        seed: args.seed,
        include_dense: args.dense,
    };
    let rows = timing_benchmark(&config)?;
    let mut w = BufWriter::new(File::create(&args.output)?);
    write_timing_csv(&rows, &mut w)?;
    w.flush()?;
    for s in summarize_timings(&rows) {
        println!(
            "{} q={}: median {:.4}s per iteration (iqr {:.4}s)",
            s.method, s.q, s.median_seconds, s.iqr_seconds
        );
    }
    println!("wrote {}", args.output.display());
    Ok(())
}
