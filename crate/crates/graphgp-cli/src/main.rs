//! Command-line driver: synthetic data generation, model fitting, prediction,
//! evaluation, and spectrum export. Every run writes a manifest sufficient to
//! reproduce it, and all outputs are deterministic for a fixed seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use graphgp::gp::{
    log_marginal_likelihood, posterior_predict, test_log_likelihood, GpError, GraphContext,
    Hyperparameters, InputModel, OutputKernel, TrainingSet,
};
use graphgp::graph::{
    eigendecompose, knn_graph, laplacian, random_graph, threshold_graph, Graph, LaplacianVariant,
    RandomGraphKind,
};
use graphgp::io::{
    atomic_write, baseline_kind_from_name, encode_f64, graph_fingerprint, key_values_to_string,
    optimizer_config_from_key_values, optimizer_config_to_key_values, read_graph, read_key_values,
    read_matrix_csv, write_graph, write_matrix_csv, IoError, ModelArtifact,
};
use graphgp::kernels::BaselineKind;
use graphgp::learner::{
    constrained_fit, fit_baseline, initialize_hyperparameters, FitError, InputInit,
    OptimizerConfig, SpectrumHint,
};
use graphgp::synth::{generate_filtered_signals, generate_wishart_dataset, GroundTruthFilter};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Debug)]
enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::File { .. } => CliError::Io(e.to_string()),
            IoError::Parse { .. } | IoError::Format { .. } => CliError::Validation(e.to_string()),
            IoError::Graph(_) | IoError::Gp(_) | IoError::Kernel(_) => {
                CliError::Validation(e.to_string())
            }
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Diverged(_) | FitError::InitializationFailed | FitError::Gp(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<GpError> for CliError {
    fn from(e: GpError) -> Self {
        match e {
            GpError::NumericalFailure(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<graphgp::graph::GraphError> for CliError {
    fn from(e: graphgp::graph::GraphError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<graphgp::kernels::KernelError> for CliError {
    fn from(e: graphgp::kernels::KernelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<graphgp::synth::SynthError> for CliError {
    fn from(e: graphgp::synth::SynthError) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "graphgp", version, about = "Gaussian processes on graphs with learned polynomial spectral kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic filtered graph signals.
    Synth(SynthArgs),
    /// Fit a model to training signals.
    Fit(FitArgs),
    /// Posterior prediction at test inputs.
    Predict(PredictArgs),
    /// Per-fold posterior log-likelihoods on held-out signals.
    Eval(EvalArgs),
    /// Export a model's spectral response over [0, 1].
    Spectrum(SpectrumArgs),
    /// Build or inspect a graph.
    Graph(GraphArgs),
}

#[derive(Args)]
struct OptimizerArgs {
    /// Optimizer config file (flat `key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gamma_beta: Option<f64>,
    #[arg(long)]
    gamma_lagrange: Option<f64>,
    #[arg(long)]
    gamma_lengthscale: Option<f64>,
    #[arg(long)]
    gamma_noise: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    inner_steps: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    unconstrained_iters: Option<usize>,
    #[arg(long)]
    grid_limit: Option<usize>,
    #[arg(long)]
    grid_seed: Option<u64>,
}

impl OptimizerArgs {
    fn resolve(&self) -> Result<OptimizerConfig, CliError> {
        let mut cfg = OptimizerConfig::default();
        if let Some(path) = &self.config {
            let map = read_key_values(path)?;
            cfg = optimizer_config_from_key_values(&cfg, &map, path)?;
        }
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(
            gamma_beta,
            gamma_lagrange,
            gamma_lengthscale,
            gamma_noise,
            max_outer,
            inner_steps,
            tolerance,
            unconstrained_iters,
            grid_limit,
            grid_seed
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Random graph spec (`sensor:M` or `ba:M,INITIAL,ATTACH`), exclusive
    /// with --graph-file.
    #[arg(long)]
    graph: Option<String>,
    /// Existing edge-list file.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Ground-truth filter: `lowpass-taylor`, `bandpass`, or `custom:c0,c1,..`.
    #[arg(long, default_value = "lowpass-taylor")]
    filter: String,
    /// Number of signals.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Signal-to-noise ratio in dB; omit for noiseless signals.
    #[arg(long)]
    snr: Option<f64>,
    /// Couple signals through an inverse-Wishart input covariance.
    #[arg(long)]
    wishart: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    graph_file: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    signals: PathBuf,
    /// Polynomial degree; exclusive with --kernel.
    #[arg(long)]
    degree: Option<usize>,
    /// Baseline kernel name (e.g. `standard`, `regularized-laplacian`).
    #[arg(long)]
    kernel: Option<String>,
    /// Walk length for the p-step baseline.
    #[arg(long)]
    p: Option<usize>,
    /// Input-space model: `identity`, `se`, or `gram:FILE`.
    #[arg(long, default_value = "identity")]
    input_model: String,
    /// Grid hint for the polynomial search: `lowpass` or `general`.
    #[arg(long, default_value = "lowpass")]
    hint: String,
    /// Skip the constrained phase; report possible spectrum negativity.
    #[arg(long)]
    unconstrained: bool,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    optimizer: OptimizerArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graph_file: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    test_inputs: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graph_file: PathBuf,
    #[arg(long)]
    inputs: PathBuf,
    #[arg(long)]
    signals: PathBuf,
    #[arg(long)]
    test_inputs: PathBuf,
    #[arg(long)]
    test_signals: PathBuf,
    /// Number of folds the test signals are split into.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Signals per fold; overrides --folds when set.
    #[arg(long)]
    fold_size: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    graph_file: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphArgs {
    /// Random graph spec (`sensor:M` or `ba:M,INITIAL,ATTACH`).
    #[arg(long)]
    random: Option<String>,
    /// Coordinates CSV to build from.
    #[arg(long)]
    coords: Option<PathBuf>,
    /// k for a k-nearest-neighbor graph over --coords.
    #[arg(long)]
    knn: Option<usize>,
    /// Distance threshold graph over --coords.
    #[arg(long)]
    threshold: Option<f64>,
    /// Existing graph to inspect instead of building one.
    #[arg(long)]
    inspect: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::Graph(a) => cmd_graph(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn parse_graph_spec(spec: &str, seed: u64) -> Result<Graph, CliError> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Validation(format!("bad graph spec {spec:?}, expected kind:params")))?;
    let kind = match kind {
        "sensor" => {
            let nodes: usize = rest
                .parse()
                .map_err(|e| CliError::Validation(format!("bad node count in {spec:?}: {e}")))?;
            RandomGraphKind::Sensor { nodes }
        }
        "ba" => {
            let parts: Vec<usize> = rest
                .split(',')
                .map(|s| s.parse())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Validation(format!("bad parameters in {spec:?}: {e}")))?;
            let [nodes, initial, attach] = parts[..] else {
                return Err(CliError::Validation(format!(
                    "ba spec needs nodes,initial,attach, got {spec:?}"
                )));
            };
            RandomGraphKind::BarabasiAlbert {
                nodes,
                initial,
                attach,
            }
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown random graph kind {other:?}"
            )))
        }
    };
    Ok(random_graph(kind, seed)?)
}

fn parse_filter_spec(spec: &str) -> Result<GroundTruthFilter, CliError> {
    match spec {
        "lowpass-taylor" => Ok(GroundTruthFilter::low_pass_taylor()),
        "bandpass" => Ok(GroundTruthFilter::band_pass()),
        other => {
            let coeffs = other.strip_prefix("custom:").ok_or_else(|| {
                CliError::Validation(format!("unknown filter {other:?}; use lowpass-taylor, bandpass, or custom:c0,c1,.."))
            })?;
            let coeffs: Vec<f64> = coeffs
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Validation(format!("bad coefficient in {other:?}: {e}")))?;
            Ok(GroundTruthFilter::custom("custom", coeffs)?)
        }
    }
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn sha256_hex(data: &str) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(data.as_bytes());
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One manifest per run: the full command line, a hash of the effective
/// config, the seed, and the tool version. No timestamps, so reruns are
/// byte-identical.
fn write_manifest(
    dir: &Path,
    extra: &[(&str, String)],
) -> Result<(), CliError> {
    let mut map = BTreeMap::new();
    let args: Vec<String> = std::env::args().skip(1).collect();
    map.insert("command".to_string(), args.join(" "));
    map.insert(
        "version".to_string(),
        env!("CARGO_PKG_VERSION").to_string(),
    );
    for (k, v) in extra {
        map.insert((*k).to_string(), v.clone());
    }
    atomic_write(&dir.join("manifest.txt"), &key_values_to_string(&map))?;
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<(), CliError> {
    let graph = match (&a.graph, &a.graph_file) {
        (Some(spec), None) => parse_graph_spec(spec, a.seed)?,
        (None, Some(path)) => read_graph(path)?,
        _ => {
            return Err(CliError::Validation(
                "provide exactly one of --graph or --graph-file".into(),
            ))
        }
    };
    let truth = parse_filter_spec(&a.filter)?;
    ensure_out_dir(&a.out)?;

    let ds = if a.wishart {
        generate_wishart_dataset(&graph, &truth, a.n, a.snr, a.seed)?
    } else {
        let snr = a.snr.ok_or_else(|| {
            CliError::Validation("--snr is required unless --wishart is set".into())
        })?;
        generate_filtered_signals(&graph, &truth, a.n, snr, a.seed)?
    };

    write_graph(&a.out.join("graph.txt"), &graph)?;
    write_matrix_csv(&a.out.join("inputs.csv"), ds.inputs(), "x")?;
    write_matrix_csv(&a.out.join("signals.csv"), ds.signals(), "node")?;
    write_matrix_csv(&a.out.join("clean_signals.csv"), ds.clean_signals(), "node")?;
    if let Some(c) = ds.input_covariance() {
        write_matrix_csv(&a.out.join("input_covariance.csv"), c, "x")?;
    }

    let mut extra = vec![
        ("seed", a.seed.to_string()),
        ("graph_fingerprint", graph_fingerprint(&graph)),
        ("filter", a.filter.clone()),
        (
            "filter_coefficients",
            truth
                .coefficients()
                .iter()
                .map(|&c| encode_f64(c))
                .collect::<Vec<_>>()
                .join(" "),
        ),
        ("num_signals", a.n.to_string()),
        ("noise_variance", encode_f64(ds.noise_variance())),
    ];
    if let Some(snr) = a.snr {
        extra.push(("snr_db", encode_f64(snr)));
    }
    write_manifest(&a.out, &extra)?;
    println!(
        "wrote {} signals on {} nodes to {}",
        a.n,
        graph.num_nodes(),
        a.out.display()
    );
    Ok(())
}

fn parse_input_init(spec: &str) -> Result<InputInit, CliError> {
    match spec {
        "identity" => Ok(InputInit::Identity),
        "se" => Ok(InputInit::SquaredExponential),
        other => {
            let path = other.strip_prefix("gram:").ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown input model {other:?}; use identity, se, or gram:FILE"
                ))
            })?;
            Ok(InputInit::FixedGram(read_matrix_csv(Path::new(path))?))
        }
    }
}

fn load_training(
    graph_file: &Path,
    inputs: &Path,
    signals: &Path,
) -> Result<(GraphContext, TrainingSet), CliError> {
    let graph = read_graph(graph_file)?;
    let x = read_matrix_csv(inputs)?;
    let y = read_matrix_csv(signals)?;
    if y.ncols() != graph.num_nodes() {
        return Err(CliError::Validation(format!(
            "signals have {} columns but the graph has {} nodes",
            y.ncols(),
            graph.num_nodes()
        )));
    }
    if x.nrows() != y.nrows() {
        return Err(CliError::Validation(format!(
            "{} inputs vs {} signals",
            x.nrows(),
            y.nrows()
        )));
    }
    let ctx = GraphContext::new(graph)?;
    let data = TrainingSet::new(x, y)?;
    Ok((ctx, data))
}

fn describe_model(h: &Hyperparameters) -> String {
    let mut out = String::new();
    match &h.output {
        OutputKernel::Polynomial(f) => {
            let coeffs: Vec<String> = f.coefficients().iter().map(|&c| encode_f64(c)).collect();
            let _ = writeln!(out, "output_kernel = polynomial");
            let _ = writeln!(out, "beta = {}", coeffs.join(" "));
        }
        OutputKernel::Baseline(b) => {
            let _ = writeln!(out, "output_kernel = {}", b.kind.name());
            if let BaselineKind::PStepRandomWalk { p } = b.kind {
                let _ = writeln!(out, "p = {p}");
            }
            if let Some(alpha) = b.alpha {
                let _ = writeln!(out, "alpha = {}", encode_f64(alpha));
            }
        }
    }
    match &h.input {
        InputModel::Identity => {
            let _ = writeln!(out, "input_model = identity");
        }
        InputModel::SquaredExponential(cfg) => {
            let _ = writeln!(out, "input_model = squared-exponential");
            let _ = writeln!(out, "lengthscale = {}", encode_f64(cfg.lengthscale));
            let _ = writeln!(out, "input_variance = {}", encode_f64(cfg.variance));
        }
        InputModel::FixedGram { scale, .. } => {
            let _ = writeln!(out, "input_model = fixed-gram");
            let _ = writeln!(out, "input_scale = {}", encode_f64(*scale));
        }
    }
    let _ = writeln!(out, "noise_variance = {}", encode_f64(h.noise_variance));
    out
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let (ctx, data) = load_training(&a.graph_file, &a.inputs, &a.signals)?;
    let cfg = a.optimizer.resolve()?;
    let input_init = parse_input_init(&a.input_model)?;
    ensure_out_dir(&a.out)?;

    let hint = match a.hint.as_str() {
        "lowpass" => SpectrumHint::LowPass,
        "general" => SpectrumHint::General,
        other => {
            return Err(CliError::Validation(format!(
                "unknown hint {other:?}; use lowpass or general"
            )))
        }
    };

    let mut report_text = String::new();
    let hyperparameters = match (a.degree, &a.kernel) {
        (Some(degree), None) => {
            let (init, record) =
                initialize_hyperparameters(&data, &ctx, degree, hint, &input_init, &cfg)?;
            let _ = writeln!(report_text, "phase = polynomial degree {degree}");
            let _ = writeln!(
                report_text,
                "grid_candidates_evaluated = {}",
                record.candidates_evaluated
            );
            let _ = writeln!(
                report_text,
                "grid_beta = {}",
                record
                    .grid_beta
                    .iter()
                    .map(|&c| encode_f64(c))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            let _ = writeln!(report_text, "grid_log_marginal = {}", encode_f64(record.grid_lml));
            let _ = writeln!(
                report_text,
                "refined_log_marginal = {}",
                encode_f64(record.refined_lml)
            );
            if a.unconstrained {
                let min_spectrum = match &init.output {
                    OutputKernel::Polynomial(f) => ctx
                        .scaled()
                        .eigenvalues()
                        .iter()
                        .map(|&l| f.evaluate(l))
                        .fold(f64::INFINITY, f64::min),
                    _ => unreachable!(),
                };
                let _ = writeln!(report_text, "constrained = false");
                let _ = writeln!(report_text, "min_spectrum_value = {}", encode_f64(min_spectrum));
                let _ = writeln!(
                    report_text,
                    "spectrum_nonnegative = {}",
                    min_spectrum >= -1e-8
                );
                if min_spectrum < -1e-8 {
                    let _ = writeln!(
                        report_text,
                        "warning = unconstrained spectrum is negative at some graph frequencies"
                    );
                }
                init
            } else {
                let fit = constrained_fit(&data, &ctx, degree, &cfg, &init)?;
                let _ = writeln!(report_text, "constrained = true");
                let _ = writeln!(report_text, "feasible = {}", fit.feasible);
                let _ = writeln!(report_text, "outer_iterations = {}", fit.trace.len());
                let _ = writeln!(report_text, "trace = iteration,lagrangian,nll,max_violation");
                for t in &fit.trace {
                    let _ = writeln!(
                        report_text,
                        "trace_point = {},{},{},{}",
                        t.iteration,
                        encode_f64(t.lagrangian),
                        encode_f64(t.nll),
                        encode_f64(t.max_violation)
                    );
                }
                fit.hyperparameters
            }
        }
        (None, Some(kernel)) => {
            let kind = baseline_kind_from_name(kernel, a.p).ok_or_else(|| {
                CliError::Validation(format!(
                    "unknown baseline kernel {kernel:?} (p-step also needs --p)"
                ))
            })?;
            let _ = writeln!(report_text, "phase = baseline {}", kind.name());
            let h = fit_baseline(&data, &ctx, kind, &input_init, &cfg)?;
            let _ = writeln!(report_text, "constrained = false");
            h
        }
        _ => {
            return Err(CliError::Validation(
                "provide exactly one of --degree or --kernel".into(),
            ))
        }
    };

    let lml = log_marginal_likelihood(&hyperparameters, &data, &ctx)?;
    let _ = writeln!(report_text, "log_marginal_likelihood = {}", encode_f64(lml));
    report_text.push_str(&describe_model(&hyperparameters));

    let artifact = ModelArtifact::new(ctx.graph(), hyperparameters);
    artifact.save(&a.out.join("model.txt"))?;
    atomic_write(&a.out.join("report.txt"), &report_text)?;
    write_manifest(
        &a.out,
        &[
            ("graph_fingerprint", artifact.graph_fingerprint.clone()),
            ("config_hash", sha256_hex(&key_values_to_string(&optimizer_config_to_key_values(&cfg)))),
            ("grid_seed", cfg.grid_seed.to_string()),
        ],
    )?;
    println!(
        "fit complete, log marginal likelihood {lml:.6}, model at {}",
        a.out.join("model.txt").display()
    );
    Ok(())
}

fn load_model_for_graph(model: &Path, ctx: &GraphContext) -> Result<ModelArtifact, CliError> {
    let artifact = ModelArtifact::load(model)?;
    if !artifact.matches_graph(ctx.graph()) {
        return Err(CliError::Validation(
            "model was trained on a different graph (fingerprint mismatch)".into(),
        ));
    }
    Ok(artifact)
}

fn cmd_predict(a: PredictArgs) -> Result<(), CliError> {
    let (ctx, data) = load_training(&a.graph_file, &a.inputs, &a.signals)?;
    let artifact = load_model_for_graph(&a.model, &ctx)?;
    let x_star = read_matrix_csv(&a.test_inputs)?;
    if x_star.ncols() != data.inputs().ncols() {
        return Err(CliError::Validation(format!(
            "test inputs have {} columns, training inputs {}",
            x_star.ncols(),
            data.inputs().ncols()
        )));
    }
    ensure_out_dir(&a.out)?;
    let posterior = posterior_predict(&artifact.hyperparameters, &data, &ctx, &x_star)?;
    write_matrix_csv(&a.out.join("mean.csv"), &posterior.mean, "node")?;
    let m = posterior.num_nodes();
    let variances = DMatrix::from_fn(posterior.num_inputs(), m, |t, j| {
        posterior.covariance[(t * m + j, t * m + j)]
    });
    write_matrix_csv(&a.out.join("variance.csv"), &variances, "node")?;
    write_manifest(
        &a.out,
        &[("graph_fingerprint", artifact.graph_fingerprint.clone())],
    )?;
    println!(
        "predicted {} test signals to {}",
        posterior.num_inputs(),
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let (ctx, data) = load_training(&a.graph_file, &a.inputs, &a.signals)?;
    let artifact = load_model_for_graph(&a.model, &ctx)?;
    let x_star = read_matrix_csv(&a.test_inputs)?;
    let y_star = read_matrix_csv(&a.test_signals)?;
    if x_star.nrows() != y_star.nrows() {
        return Err(CliError::Validation(format!(
            "{} test inputs vs {} test signals",
            x_star.nrows(),
            y_star.nrows()
        )));
    }
    if y_star.ncols() != ctx.num_nodes() {
        return Err(CliError::Validation(format!(
            "test signals have {} columns but the graph has {} nodes",
            y_star.ncols(),
            ctx.num_nodes()
        )));
    }
    let total = x_star.nrows();
    let folds = match a.fold_size {
        Some(size) => {
            if size == 0 || size > total {
                return Err(CliError::Validation(format!(
                    "fold size {size} invalid for {total} test signals"
                )));
            }
            total / size
        }
        None => a.folds,
    };
    if folds == 0 || folds > total {
        return Err(CliError::Validation(format!(
            "{folds} folds invalid for {total} test signals"
        )));
    }
    ensure_out_dir(&a.out)?;

    // contiguous folds; a remainder shorter than a full fold is dropped
    let fold_size = total / folds;
    let mut values = Vec::with_capacity(folds);
    for f in 0..folds {
        let start = f * fold_size;
        let xf = x_star.rows(start, fold_size).into_owned();
        let yf = y_star.rows(start, fold_size).into_owned();
        let posterior = posterior_predict(&artifact.hyperparameters, &data, &ctx, &xf)?;
        values.push(test_log_likelihood(&posterior, &yf)?);
    }
    let mean = values.iter().sum::<f64>() / folds as f64;
    let stderr = if folds > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (folds as f64 - 1.0);
        (var / folds as f64).sqrt()
    } else {
        0.0
    };

    let mut csv = String::from("fold,posterior_log_likelihood\n");
    for (f, v) in values.iter().enumerate() {
        let _ = writeln!(csv, "{f},{}", encode_f64(*v));
    }
    let _ = writeln!(csv, "mean,{}", encode_f64(mean));
    let _ = writeln!(csv, "stderr,{}", encode_f64(stderr));
    if folds == 1 {
        let _ = writeln!(csv, "warning,single fold: standard error is not estimable");
    }
    atomic_write(&a.out.join("metrics.csv"), &csv)?;
    write_manifest(
        &a.out,
        &[
            ("graph_fingerprint", artifact.graph_fingerprint.clone()),
            ("folds", folds.to_string()),
            ("fold_size", fold_size.to_string()),
        ],
    )?;
    println!("mean posterior log-likelihood {mean:.6} (stderr {stderr:.6}) over {folds} folds");
    Ok(())
}

/// Spectral transfer of the model's output gram, as a function of the
/// relevant Laplacian eigenvalue. Polynomial models report `g`; baselines
/// report the gram's transfer function directly where one exists.
fn spectrum_function(
    h: &Hyperparameters,
    ctx: &GraphContext,
) -> Result<(Box<dyn Fn(f64) -> f64>, f64, Vec<f64>), CliError> {
    match &h.output {
        OutputKernel::Polynomial(f) => {
            let f = f.clone();
            let eigenvalues = ctx.scaled().eigenvalues().as_slice().to_vec();
            Ok((Box::new(move |l| f.evaluate(l)), 1.0, eigenvalues))
        }
        OutputKernel::Baseline(b) => {
            let alpha = b.alpha;
            let normalized = eigendecompose(
                &laplacian(ctx.graph(), LaplacianVariant::Normalized)?,
                LaplacianVariant::Normalized,
            )?;
            let eigenvalues = normalized.eigenvalues().as_slice().to_vec();
            let max_l = *eigenvalues.last().unwrap();
            let func: Box<dyn Fn(f64) -> f64> = match b.kind {
                BaselineKind::Standard => Box::new(|_| 1.0),
                BaselineKind::RegularizedLaplacian => {
                    let a = alpha.unwrap();
                    Box::new(move |l| 1.0 / (1.0 + a * l))
                }
                BaselineKind::Diffusion => {
                    let a = alpha.unwrap();
                    Box::new(move |l| (-a * l / 2.0).exp())
                }
                BaselineKind::PStepRandomWalk { p } => {
                    let a = alpha.unwrap();
                    Box::new(move |l| (a - l).powi(p as i32))
                }
                BaselineKind::Cosine => {
                    Box::new(|l| (l * std::f64::consts::PI / 4.0).cos())
                }
                BaselineKind::GlobalFiltering => {
                    // acts on the combinatorial Laplacian instead
                    let a = alpha.unwrap();
                    let comb = eigendecompose(
                        &laplacian(ctx.graph(), LaplacianVariant::Combinatorial)?,
                        LaplacianVariant::Combinatorial,
                    )?;
                    let eigenvalues = comb.eigenvalues().as_slice().to_vec();
                    let max_l = *eigenvalues.last().unwrap();
                    return Ok((
                        Box::new(move |l| 1.0 / (1.0 + a * l).powi(2)),
                        max_l,
                        eigenvalues,
                    ));
                }
                BaselineKind::LaplacianPseudoinverse => {
                    let comb = eigendecompose(
                        &laplacian(ctx.graph(), LaplacianVariant::Combinatorial)?,
                        LaplacianVariant::Combinatorial,
                    )?;
                    let eigenvalues = comb.eigenvalues().as_slice().to_vec();
                    let max_l = *eigenvalues.last().unwrap();
                    let tol = 1e-10 * max_l;
                    return Ok((
                        Box::new(move |l| if l > tol { 1.0 / l } else { 0.0 }),
                        max_l,
                        eigenvalues,
                    ));
                }
                BaselineKind::LocalAveraging => {
                    return Err(CliError::Validation(
                        "local-averaging has no spectral transfer function to export".into(),
                    ))
                }
            };
            Ok((func, max_l, eigenvalues))
        }
    }
}

fn cmd_spectrum(a: SpectrumArgs) -> Result<(), CliError> {
    if !(a.grid_step > 0.0 && a.grid_step <= 1.0) {
        return Err(CliError::Validation(format!(
            "grid step must be in (0, 1], got {}",
            a.grid_step
        )));
    }
    let graph = read_graph(&a.graph_file)?;
    let ctx = GraphContext::new(graph)?;
    let artifact = load_model_for_graph(&a.model, &ctx)?;
    let (g, domain_max, eigenvalues) = spectrum_function(&artifact.hyperparameters, &ctx)?;
    ensure_out_dir(&a.out)?;

    // dense grid over the spectral domain, then the graph's own frequencies
    let steps = (1.0 / a.grid_step).round() as usize;
    let mut rows: Vec<(f64, bool)> = (0..=steps)
        .map(|i| (domain_max * i as f64 / steps as f64, false))
        .collect();
    rows.extend(eigenvalues.iter().map(|&l| (l, true)));

    let peak = rows
        .iter()
        .map(|&(l, _)| g(l))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(CliError::Numerical(format!(
            "spectrum peak {peak} is not positive, cannot scale"
        )));
    }

    let mut csv = String::from("lambda,g,g_scaled,is_eigenvalue\n");
    for (l, flagged) in rows {
        let v = g(l);
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            encode_f64(l),
            encode_f64(v),
            encode_f64(v / peak),
            u8::from(flagged)
        );
    }
    atomic_write(&a.out.join("spectrum.csv"), &csv)?;
    write_manifest(
        &a.out,
        &[
            ("graph_fingerprint", artifact.graph_fingerprint.clone()),
            ("grid_step", encode_f64(a.grid_step)),
        ],
    )?;
    println!("wrote spectrum to {}", a.out.join("spectrum.csv").display());
    Ok(())
}

fn cmd_graph(a: GraphArgs) -> Result<(), CliError> {
    let graph = match (&a.random, &a.coords, &a.inspect) {
        (Some(spec), None, None) => parse_graph_spec(spec, a.seed)?,
        (None, Some(path), None) => {
            let coords = read_matrix_csv(path)?;
            match (a.knn, a.threshold) {
                (Some(k), None) => knn_graph(&coords, k)?,
                (None, Some(t)) => threshold_graph(&coords, t)?,
                _ => {
                    return Err(CliError::Validation(
                        "with --coords, provide exactly one of --knn or --threshold".into(),
                    ))
                }
            }
        }
        (None, None, Some(path)) => read_graph(path)?,
        _ => {
            return Err(CliError::Validation(
                "provide exactly one of --random, --coords, or --inspect".into(),
            ))
        }
    };

    let sd = eigendecompose(
        &laplacian(&graph, LaplacianVariant::Combinatorial)?,
        LaplacianVariant::Combinatorial,
    )?;
    println!("nodes = {}", graph.num_nodes());
    println!("edges = {}", graph.edges().len());
    println!("connected = {}", graph.is_connected());
    println!(
        "laplacian_lambda_max = {}",
        encode_f64(sd.eigenvalues()[graph.num_nodes() - 1])
    );
    println!("fingerprint = {}", graph_fingerprint(&graph));

    if let Some(out) = &a.out {
        ensure_out_dir(out)?;
        write_graph(&out.join("graph.txt"), &graph)?;
        write_manifest(
            out,
            &[
                ("seed", a.seed.to_string()),
                ("graph_fingerprint", graph_fingerprint(&graph)),
            ],
        )?;
        println!("wrote graph to {}", out.join("graph.txt").display());
    }
    Ok(())
}
