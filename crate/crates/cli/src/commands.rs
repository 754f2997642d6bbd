use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use tlp_core::analysis::{classical_mds, knn_cv, relative_stress, separation_report};
use tlp_core::bench::{
    classification_study, separation_study, standard_metrics, ClassificationStudy, SeparationStudy,
};
use tlp_core::color::{ot_histogram_map, recolor, spatially_correlated_map, RecolorJob};
use tlp_core::cost::{ot_normalize, CostParams, Lambda};
use tlp_core::distance::{
    distance, lambda_heuristic, pairwise_matrix_with_workers, DistanceMatrix, DistanceSpec, Method,
    SolverChoice, SolverSettings,
};
use tlp_core::io::{
    read_dataset, read_matrix, read_pnm, read_signals, write_dataset, write_matrix, write_pnm,
    SCHEMA_VERSION,
};
use tlp_core::measure::Signal;
use tlp_core::sinkhorn::Epsilon;
use tlp_core::synth::{
    dataset_1d, dataset_2d, gen_example_pair, ExampleKind, ExampleParams, OneDClass, OneDClassSpec,
};
use tlp_core::TlpError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: {1}")]
    Usage(&'static str, String),
    #[error("{0}: {1}")]
    Compute(&'static str, String),
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Classifies a library error: bad input and I/O are usage errors, the rest
/// are computation failures.
fn tag(cmd: &'static str) -> impl Fn(TlpError) -> CliError {
    move |e| match e {
        TlpError::Io { .. } | TlpError::Parse { .. } | TlpError::InvalidArgument(_) => {
            CliError::Usage(cmd, e.to_string())
        }
        _ => CliError::Compute(cmd, e.to_string()),
    }
}

/// TL^p transportation distances between signals and images.
#[derive(Debug, Parser)]
#[command(name = "tlp", version, about)]
pub struct Cli {
    /// Worker threads for pairwise computations (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance between two signals (CSV) or images (PGM/PPM).
    Dist(DistArgs),
    /// Pairwise distance matrix of a dataset.
    Pairwise(PairwiseArgs),
    /// Classical MDS embedding of a distance matrix.
    Mds(MdsArgs),
    /// Cross-validated 1-nearest-neighbour classification and class separation.
    Classify(ClassifyArgs),
    /// Seeded benchmark suites on the synthetic classes.
    Bench(BenchArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Spatially correlated colour transfer.
    Recolor(RecolorArgs),
    /// Colour transfer by optimal transport of colour histograms only.
    Histspec(HistspecArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SpecArgs {
    /// Distance: tlp, ot, lp, dlp, dtlp, wlp, wtlp or pushforward_ot.
    #[arg(long, default_value = "tlp")]
    pub method: String,
    /// Exponent p >= 1.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Transport scale: a number, `inf`, or `auto` for the length-scale heuristic.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// Solver: exact, sinkhorn, multiscale or auto.
    #[arg(long, default_value = "auto")]
    pub solver: String,
    /// Sinkhorn epsilon relative to the largest cost.
    #[arg(long)]
    pub epsilon_scale: Option<f64>,
    /// Blend weight of the weighted methods.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Histogram bins per channel of the pushforward OT distance.
    #[arg(long, default_value_t = 64)]
    pub bins: usize,
}

fn solver_settings(
    cmd: &'static str,
    solver: &str,
    epsilon_scale: Option<f64>,
) -> CliResult<SolverSettings> {
    let choice: SolverChoice = solver.parse().map_err(tag(cmd))?;
    let mut s = SolverSettings::new(choice);
    if let Some(e) = epsilon_scale {
        s.sinkhorn.epsilon = Epsilon::Relative(e);
        s.sinkhorn.validate().map_err(tag(cmd))?;
    }
    Ok(s)
}

fn parse_lambda(cmd: &'static str, text: &str, signals: &[Signal], p: f64) -> CliResult<f64> {
    if text.eq_ignore_ascii_case("auto") {
        return lambda_heuristic(signals, p).map_err(tag(cmd));
    }
    text.parse::<f64>().map_err(|_| {
        CliError::Usage(
            cmd,
            format!("lambda must be a number, 'inf' or 'auto', got '{text}'"),
        )
    })
}

impl SpecArgs {
    fn resolve(&self, cmd: &'static str, signals: &[Signal]) -> CliResult<DistanceSpec> {
        let method: Method = self.method.parse().map_err(tag(cmd))?;
        let lambda = parse_lambda(cmd, &self.lambda, signals, self.p)?;
        let params = CostParams::new(self.p, Lambda::from_f64(lambda).map_err(tag(cmd))?)
            .map_err(tag(cmd))?;
        let mut spec = DistanceSpec::new(method, params).with_solver(solver_settings(
            cmd,
            &self.solver,
            self.epsilon_scale,
        )?);
        spec.alpha = self.alpha;
        spec.histogram_bins = self.bins;
        spec.validate().map_err(tag(cmd))?;
        Ok(spec)
    }
}

/// `lambda` as JSON, with the limits written as `0` and `"inf"`.
fn lambda_json(l: Lambda) -> Value {
    match l {
        Lambda::Infinity => json!("inf"),
        other => json!(other.as_f64()),
    }
}

fn spec_json(spec: &DistanceSpec) -> Value {
    json!({
        "method": spec.method.name(),
        "p": spec.params.p,
        "lambda": lambda_json(spec.params.lambda),
        "solver": spec.solver,
        "alpha": spec.alpha,
        "histogram_bins": spec.histogram_bins,
    })
}

fn emit(
    cmd: &'static str,
    config: Value,
    result: impl Serialize,
    out: Option<&Path>,
) -> CliResult<()> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": cmd,
        "config": config,
        "result": result,
    });
    let text =
        serde_json::to_string_pretty(&doc).map_err(|e| CliError::Compute(cmd, e.to_string()))?;
    match out {
        Some(path) => fs::write(path, text + "\n")
            .map_err(|e| CliError::Usage(cmd, format!("{}: {e}", path.display()))),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(CliError::Usage(cmd, e.to_string()))
            }
            _ => Ok(()),
        },
    }
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "ppm" | "pnm")
    )
}

fn read_inputs(cmd: &'static str, paths: &[PathBuf]) -> CliResult<Vec<Signal>> {
    let images = paths.iter().filter(|p| is_image(p)).count();
    if images == 0 {
        return read_signals(paths).map_err(tag(cmd));
    }
    if images != paths.len() {
        return Err(CliError::Usage(
            cmd,
            "cannot mix images and signal CSVs".into(),
        ));
    }
    paths
        .iter()
        .map(|p| {
            read_pnm(p)
                .and_then(|img| img.to_signal())
                .map_err(tag(cmd))
        })
        .collect()
}

/// OT compares densities, so its inputs are shifted and rescaled together.
fn prepare(cmd: &'static str, signals: Vec<Signal>, spec: &DistanceSpec) -> CliResult<Vec<Signal>> {
    if spec.method == Method::Ot {
        ot_normalize(&signals).map_err(tag(cmd))
    } else {
        Ok(signals)
    }
}

fn workers(n: Option<usize>) -> usize {
    n.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Args)]
pub struct DistArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    #[command(flatten)]
    pub spec: SpecArgs,
}

fn cmd_dist(a: DistArgs) -> CliResult<()> {
    const CMD: &str = "dist";
    let paths = [a.first.clone(), a.second.clone()];
    let signals = read_inputs(CMD, &paths)?;
    let spec = a.spec.resolve(CMD, &signals)?;
    let signals = prepare(CMD, signals, &spec)?;
    let start = Instant::now();
    let d = distance(&signals[0], &signals[1], &spec).map_err(tag(CMD))?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let config = json!({ "inputs": paths, "spec": spec_json(&spec) });
    let result = json!({
        "method": spec.method.name(),
        "p": spec.params.p,
        "lambda": lambda_json(spec.params.lambda),
        "solver": spec.solver.choice.name(),
        "distance": d,
        "runtime_ms": runtime_ms,
    });
    emit(CMD, config, result, None)
}

#[derive(Debug, Args)]
pub struct PairwiseArgs {
    /// Dataset directory with `labels.json`.
    #[arg(long, conflicts_with = "inputs")]
    pub dataset: Option<PathBuf>,
    /// Signal CSVs or images, labelled by file stem.
    pub inputs: Vec<PathBuf>,
    /// Matrix CSV to write (a `.json` sidecar holds the distance settings).
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub spec: SpecArgs,
}

fn cmd_pairwise(a: PairwiseArgs, threads: usize) -> CliResult<()> {
    const CMD: &str = "pairwise";
    let (signals, labels) = match &a.dataset {
        Some(dir) => {
            let (s, l, _) = read_dataset(dir).map_err(tag(CMD))?;
            (s, l)
        }
        None if a.inputs.is_empty() => {
            return Err(CliError::Usage(CMD, "give --dataset or input files".into()))
        }
        None => {
            let labels = a
                .inputs
                .iter()
                .map(|p| {
                    p.file_stem().map_or_else(
                        || p.display().to_string(),
                        |s| s.to_string_lossy().into_owned(),
                    )
                })
                .collect();
            (read_inputs(CMD, &a.inputs)?, labels)
        }
    };
    let spec = a.spec.resolve(CMD, &signals)?;
    let signals = prepare(CMD, signals, &spec)?;
    let start = Instant::now();
    let m = pairwise_matrix_with_workers(&signals, &labels, &spec, threads).map_err(tag(CMD))?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    write_matrix(&m, &a.out).map_err(tag(CMD))?;
    let config =
        json!({ "dataset": a.dataset, "inputs": a.inputs, "out": a.out, "spec": spec_json(&spec) });
    let result = json!({
        "n": m.len(),
        "max_triangle_violation": m.max_triangle_violation(),
        "runtime_ms": runtime_ms,
    });
    emit(CMD, config, result, None)
}

#[derive(Debug, Args)]
pub struct MdsArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Coordinates CSV to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn write_coordinates(
    path: &Path,
    labels: &[String],
    coords: &[f64],
    k: usize,
) -> std::io::Result<()> {
    let mut text = String::from("label");
    for c in 1..=k {
        text.push_str(&format!(",y{c}"));
    }
    text.push('\n');
    for (i, l) in labels.iter().enumerate() {
        text.push_str(l);
        for v in &coords[i * k..(i + 1) * k] {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    fs::write(path, text)
}

fn cmd_mds(a: MdsArgs) -> CliResult<()> {
    const CMD: &str = "mds";
    let m = read_matrix(&a.matrix).map_err(tag(CMD))?;
    let e = classical_mds(&m, a.k).map_err(tag(CMD))?;
    let rel = relative_stress(&m, &e.coordinates, a.k).map_err(tag(CMD))?;
    if let Some(out) = &a.out {
        write_coordinates(out, m.labels(), &e.coordinates, a.k)
            .map_err(|err| CliError::Usage(CMD, format!("{}: {err}", out.display())))?;
    }
    let config = json!({ "matrix": a.matrix, "k": a.k, "out": a.out });
    let result = json!({ "labels": m.labels(), "embedding": e, "relative_stress": rel });
    emit(CMD, config, result, None)
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Matrix CSV whose header holds the class labels.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn cmd_classify(a: ClassifyArgs) -> CliResult<()> {
    const CMD: &str = "classify";
    let m: DistanceMatrix = read_matrix(&a.matrix).map_err(tag(CMD))?;
    let labels = m.labels().to_vec();
    let cv = knn_cv(&labels, &m, a.folds, a.seed).map_err(tag(CMD))?;
    let sep = separation_report(&m, &labels).map_err(tag(CMD))?;
    let config = json!({ "matrix": a.matrix, "folds": a.folds, "seed": a.seed });
    let result = json!({ "accuracy": cv.accuracy(), "cv": cv, "separation": sep });
    emit(CMD, config, result, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Solver: exact, sinkhorn, multiscale or auto.
    #[arg(long, default_value = "auto")]
    pub solver: String,
    /// 2d: members per class.
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    /// 2d: grid width.
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    /// 2d: grid height.
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    /// 2d: cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// 2d: largest MDS dimension of the stress curve.
    #[arg(long, default_value_t = 5)]
    pub max_dims: usize,
    /// 1d: largest per-class sample size.
    #[arg(long, default_value_t = 64)]
    pub max_n: usize,
    /// 1d: Monte-Carlo resamples.
    #[arg(long, default_value_t = 32)]
    pub resamples: usize,
    /// 1d: samples per signal.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Report JSON to write instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    const CMD: &str = "bench";
    let solver = solver_settings(CMD, &a.solver, None)?;
    match a.suite {
        Suite::TwoD => {
            let study = ClassificationStudy {
                count: a.count,
                width: a.width,
                height: a.height,
                folds: a.folds,
                max_dims: a.max_dims,
                seed: a.seed,
            };
            let ds = dataset_2d(a.count, a.width, a.height, a.seed).map_err(tag(CMD))?;
            let metrics = standard_metrics(ds.signals(), a.p, &solver).map_err(tag(CMD))?;
            let report = classification_study(&study, &metrics).map_err(tag(CMD))?;
            let summary: Vec<Value> = report
                .metrics
                .iter()
                .map(|m| {
                    json!({
                        "metric": m.metric.name,
                        "accuracy": m.cv.accuracy(),
                        "relative_stress_k2": m.relative_stress[1],
                    })
                })
                .collect();
            let config = json!({ "suite": "2d", "p": a.p, "solver": solver, "study": study });
            emit(
                CMD,
                config,
                json!({ "summary": summary, "report": report }),
                a.out.as_deref(),
            )
        }
        Suite::OneD => {
            if a.max_n < 2 {
                return Err(CliError::Usage(CMD, "max-n must be at least 2".into()));
            }
            let study = SeparationStudy {
                base: OneDClassSpec {
                    n: a.n,
                    ..OneDClassSpec::new(OneDClass::Hump)
                },
                sizes: (2..=a.max_n).collect(),
                resamples: a.resamples,
                seed: a.seed,
            };
            let pilot = dataset_1d(&study.base, 4, a.seed).map_err(tag(CMD))?;
            let metrics = standard_metrics(pilot.signals(), a.p, &solver).map_err(tag(CMD))?;
            let report = separation_study(&study, &metrics).map_err(tag(CMD))?;
            let summary: Vec<Value> = report
                .metrics
                .iter()
                .map(|m| json!({ "metric": m.metric.name, "n_star": m.n_star }))
                .collect();
            let config = json!({ "suite": "1d", "p": a.p, "solver": solver, "study": study });
            emit(
                CMD,
                config,
                json!({ "summary": summary, "report": report }),
                a.out.as_deref(),
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthSuite {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
    Example,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub suite: SynthSuite,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Members per class.
    #[arg(long, default_value_t = 25)]
    pub count: usize,
    /// 1d and example: samples per signal.
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// 2d: grid width.
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    /// 2d: grid height.
    #[arg(long, default_value_t = 32)]
    pub height: usize,
    /// example: shift_renorm, high_freq or translated_bump.
    #[arg(long, default_value = "translated_bump")]
    pub kind: String,
    /// example: amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// example: translation in bump widths.
    #[arg(long)]
    pub shift: Option<f64>,
    /// example: vertical offset before renormalization.
    #[arg(long)]
    pub offset: Option<f64>,
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    const CMD: &str = "synth";
    let (signals, labels, params) = match a.suite {
        SynthSuite::OneD => {
            let base = OneDClassSpec {
                n: a.n,
                ..OneDClassSpec::new(OneDClass::Hump)
            };
            let ds = dataset_1d(&base, a.count, a.seed).map_err(tag(CMD))?;
            (ds.signals().to_vec(), ds.labels().to_vec(), json!(base))
        }
        SynthSuite::TwoD => {
            let ds = dataset_2d(a.count, a.width, a.height, a.seed).map_err(tag(CMD))?;
            let params = json!({ "count": a.count, "width": a.width, "height": a.height });
            (ds.signals().to_vec(), ds.labels().to_vec(), params)
        }
        SynthSuite::Example => {
            let kind: ExampleKind = a.kind.parse().map_err(tag(CMD))?;
            let d = ExampleParams::default();
            let params = ExampleParams {
                amplitude: a.amplitude.unwrap_or(d.amplitude),
                shift: a.shift.unwrap_or(d.shift),
                offset: a.offset.unwrap_or(d.offset),
                n: a.n,
                ..d
            };
            let (f, g) = gen_example_pair(kind, &params).map_err(tag(CMD))?;
            let config = json!({ "kind": kind.to_string(), "params": params });
            (vec![f, g], vec!["f".to_string(), "g".to_string()], config)
        }
    };
    write_dataset(&a.out, &signals, &labels).map_err(tag(CMD))?;
    let suite = a
        .suite
        .to_possible_value()
        .map(|v| v.get_name().to_string());
    let config = json!({ "suite": suite, "seed": a.seed, "out": a.out, "params": params });
    emit(CMD, config, json!({ "items": signals.len() }), None)
}

#[derive(Debug, Args)]
pub struct RecolorArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub exemplar: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Solver: exact, sinkhorn, multiscale or auto.
    #[arg(long, default_value = "exact")]
    pub solver: String,
    /// Sinkhorn epsilon relative to the largest cost.
    #[arg(long)]
    pub epsilon_scale: Option<f64>,
    /// Solve on strided copies of at most this many pixels per side.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_recolor(a: RecolorArgs) -> CliResult<()> {
    const CMD: &str = "recolor";
    let source = read_pnm(&a.source).map_err(tag(CMD))?;
    let exemplar = read_pnm(&a.exemplar).map_err(tag(CMD))?;
    let params =
        CostParams::new(a.p, Lambda::from_f64(a.lambda).map_err(tag(CMD))?).map_err(tag(CMD))?;
    let mut job = RecolorJob::new(source.clone(), exemplar.clone(), params);
    job.solver = solver_settings(CMD, &a.solver, a.epsilon_scale)?;
    job.subsample = a.subsample;
    job.validate().map_err(tag(CMD))?;
    let start = Instant::now();
    let map = spatially_correlated_map(&job).map_err(tag(CMD))?;
    let out = recolor(&source, &exemplar, &map).map_err(tag(CMD))?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    write_pnm(&out, &a.out, 255).map_err(tag(CMD))?;
    let config = json!({
        "source": a.source,
        "exemplar": a.exemplar,
        "lambda": a.lambda,
        "p": a.p,
        "solver": job.solver,
        "subsample": a.subsample,
        "out": a.out,
    });
    let result = json!({
        "is_permutation": map.is_permutation,
        "mean_displacement": map.mean_displacement(),
        "runtime_ms": runtime_ms,
    });
    emit(CMD, config, result, None)
}

#[derive(Debug, Args)]
pub struct HistspecArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub exemplar: PathBuf,
    /// Histogram bins per channel.
    #[arg(long, default_value_t = 16)]
    pub bins: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn cmd_histspec(a: HistspecArgs) -> CliResult<()> {
    const CMD: &str = "histspec";
    let source = read_pnm(&a.source).map_err(tag(CMD))?;
    let exemplar = read_pnm(&a.exemplar).map_err(tag(CMD))?;
    let map = ot_histogram_map(&source, &exemplar, a.bins, a.p).map_err(tag(CMD))?;
    let out = map.apply(&source).map_err(tag(CMD))?;
    write_pnm(&out, &a.out, 255).map_err(tag(CMD))?;
    let config = json!({ "source": a.source, "exemplar": a.exemplar, "bins": a.bins, "p": a.p, "out": a.out });
    emit(
        CMD,
        config,
        json!({ "occupied_bins": map.bins.len(), "split": map.split }),
        None,
    )
}

pub fn run(cli: Cli) -> CliResult<()> {
    let threads = workers(cli.workers);
    if threads == 0 {
        return Err(CliError::Usage("tlp", "--workers must be positive".into()));
    }
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    match cli.command {
        Command::Dist(a) => cmd_dist(a),
        Command::Pairwise(a) => cmd_pairwise(a, threads),
        Command::Mds(a) => cmd_mds(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Recolor(a) => cmd_recolor(a),
        Command::Histspec(a) => cmd_histspec(a),
    }
}
