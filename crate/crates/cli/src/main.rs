//! `rqf` command-line tool: simulate data, fit single penalties or BIC
//! paths, predict, evaluate on grids and score against known truth.
//!
//! Exit status: 0 on success, 1 on invalid input or any other error, 2 when
//! a fit stopped at its iteration cap (outputs are still written).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rqf_core::data_model::DEFAULT_DELTA;
use rqf_core::io;
use rqf_core::metrics::{mse, pair_confusion_all};
use rqf_core::model_select::{lambda_path, DEFAULT_LAMBDA_MIN_RATIO, DEFAULT_N_LAMBDA};
use rqf_core::predict::{eval_grid, predict_quantile, t_grid, tau_grid};
use rqf_core::simulate::{generate, QuantileMode, SimSpec};
use rqf_core::{build_knn_graph, fit, CoefMatrix, Dataset, FitResult, SolverConfig};

use config::FileConfig;

#[derive(Parser, Debug)]
#[command(name = "rqf", version)]
#[command(about = "Regional quantile regression with a KNN fused-lasso penalty")]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Optional `key = value` file supplying defaults for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel parts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a dataset from the varying random-coefficient model.
    Simulate(SimulateArgs),
    /// Fit a single penalty level.
    Fit(FitArgs),
    /// Fit a descending penalty path and keep the BIC choice.
    Path(PathArgs),
    /// Predict conditional quantiles at query points.
    Predict(PredictArgs),
    /// Evaluate fitted coefficient surfaces on a (t, tau) grid.
    Grid(GridArgs),
    /// Compare a fit with the true coefficients.
    Eval(EvalArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Mode {
    Random,
    Grid19,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_enum)]
    quantile_mode: Option<Mode>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Solver settings shared by `fit` and `path`.
#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol_primal: Option<f64>,
    #[arg(long)]
    tol_dual: Option<f64>,
    #[arg(long)]
    fuse_eps: Option<f64>,
    /// Center and scale continuous covariates before fitting. Reported
    /// coefficients are mapped back to the original scale.
    #[arg(long)]
    standardize: bool,
    /// Quantile interval used to draw levels when the data has no `tau`.
    #[arg(long)]
    delta_lo: Option<f64>,
    #[arg(long)]
    delta_hi: Option<f64>,
    /// Write the neighbor graph as `edge_id,i,k`.
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PathArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    n_lambda: Option<usize>,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Coefficients of the BIC-selected fit.
    #[arg(long)]
    best_fit: Option<PathBuf>,
    /// Manifest of the BIC-selected fit.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    fit: PathBuf,
    /// Training data; when given it must match the points stored in the fit.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    query: PathBuf,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    t_steps: Option<usize>,
    #[arg(long)]
    tau_lo: Option<f64>,
    #[arg(long)]
    tau_hi: Option<f64>,
    #[arg(long)]
    tau_steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    fit: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Relative threshold below which estimated differences count as zero.
    #[arg(long)]
    fuse_eps: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Outcome of a successful command.
enum Status {
    Done,
    NotConverged,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => {
            eprintln!("warning: fit stopped at the iteration cap; results were written with converged = false");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(args) => simulate(&file, seed, args),
        Command::Fit(args) => fit_cmd(&file, seed, args),
        Command::Path(args) => path_cmd(&file, seed, args),
        Command::Predict(args) => predict_cmd(&file, args),
        Command::Grid(args) => grid_cmd(&file, args),
        Command::Eval(args) => eval_cmd(&file, args),
    }
}

fn simulate(file: &FileConfig, seed: u64, args: SimulateArgs) -> Result<Status> {
    let n = file.pick("n", args.n, 1000)?;
    let d = file.pick("d", args.d, 9)?;
    let mode = match args.quantile_mode {
        Some(m) => m,
        None => Mode::from_str(&file.pick("quantile_mode", None, "random".to_string())?, true)
            .map_err(|e| anyhow::anyhow!("quantile_mode: {e}"))?,
    };
    let spec = SimSpec {
        n,
        d,
        seed,
        mode: match mode {
            Mode::Random => QuantileMode::default(),
            Mode::Grid19 => QuantileMode::Grid19,
        },
    };
    let (dataset, truth) = generate(&spec)?;
    io::write_dataset(&args.out, &dataset)?;
    if let Some(path) = &args.truth {
        io::write_truth(path, &truth)?;
    }
    println!("simulated {} rows with {} covariates", dataset.n(), dataset.p);
    Ok(Status::Done)
}

/// Dataset as seen by the solver plus what is needed to map coefficients
/// back to the original covariate scale.
struct Prepared {
    original: Dataset,
    working: Dataset,
    scaling: Option<Scaling>,
}

struct Scaling {
    intercept: usize,
    columns: Vec<usize>,
    stats: Vec<(f64, f64)>,
}

impl Scaling {
    /// With `x_std = (x - m) / s`, a row's linear predictor is unchanged by
    /// `b_j = b_std_j / s_j` and `b_0 = b_std_0 - sum_j b_std_j m_j / s_j`.
    fn to_original(&self, beta: &CoefMatrix) -> CoefMatrix {
        let mut out = beta.clone();
        for i in 0..beta.n() {
            let mut shift = 0.0;
            for (&j, &(m, s)) in self.columns.iter().zip(&self.stats) {
                let b = beta.get(i, j) / s;
                out.set(i, j, b);
                shift += b * m;
            }
            out.set(i, self.intercept, beta.get(i, self.intercept) - shift);
        }
        out
    }
}

fn load_dataset(file: &FileConfig, seed: u64, args: &SolverArgs) -> Result<Prepared> {
    let delta = (
        file.pick("delta_lo", args.delta_lo, DEFAULT_DELTA.0)?,
        file.pick("delta_hi", args.delta_hi, DEFAULT_DELTA.1)?,
    );
    let original = io::read_dataset(&args.data)?.into_dataset(delta, seed)?;
    if !file.switch("standardize", args.standardize)? {
        return Ok(Prepared {
            working: original.clone(),
            original,
            scaling: None,
        });
    }
    let intercept = (0..original.p)
        .find(|&j| {
            let v = original.x(0, j);
            v != 0.0 && (0..original.n()).all(|i| original.x(i, j) == v)
        })
        .context("--standardize needs a constant intercept column to absorb the centering")?;
    let columns = original.continuous_columns();
    let (working, stats) = original.standardized(&columns)?;
    Ok(Prepared {
        original,
        working,
        scaling: Some(Scaling {
            intercept,
            columns,
            stats,
        }),
    })
}

fn solver_config(file: &FileConfig, seed: u64, args: &SolverArgs, lambda: f64) -> Result<SolverConfig> {
    let base = SolverConfig::default();
    Ok(SolverConfig {
        lambda,
        k: file.pick("k", args.k, base.k)?,
        eta: file.pick("eta", args.eta, base.eta)?,
        max_iter: file.pick("max_iter", args.max_iter, base.max_iter)?,
        tol_primal: file.pick("tol_primal", args.tol_primal, base.tol_primal)?,
        tol_dual: file.pick("tol_dual", args.tol_dual, base.tol_dual)?,
        fuse_eps: file.pick("fuse_eps", args.fuse_eps, base.fuse_eps)?,
        seed,
        ..base
    })
}

fn original_beta(prep: &Prepared, fit: &FitResult) -> CoefMatrix {
    match &prep.scaling {
        Some(s) => s.to_original(&fit.beta_hat),
        None => fit.beta_hat.clone(),
    }
}

fn fit_cmd(file: &FileConfig, seed: u64, args: FitArgs) -> Result<Status> {
    let Some(lambda) = file.lookup("lambda", args.lambda)? else {
        bail!("--lambda is required (on the command line or in the config file)");
    };
    let prep = load_dataset(file, seed, &args.solver)?;
    let cfg = solver_config(file, seed, &args.solver, lambda)?;
    let graph = build_knn_graph(&prep.working.points(), cfg.k)?;
    if let Some(path) = &args.solver.edges {
        io::write_edges(path, &graph)?;
    }
    let result = fit(&prep.working, &graph, &cfg)?;
    io::write_fit(&args.out, &prep.original.points(), &original_beta(&prep, &result))?;
    if let Some(path) = &args.manifest {
        io::write_manifest(path, &io::RunManifest::from_fit(&result, cfg.eta, cfg.k))?;
    }
    println!(
        "lambda {} iters {} converged {} objective {} support {}",
        result.lambda,
        result.iters,
        result.converged,
        result.objective.total,
        result.support_total()
    );
    Ok(if result.converged { Status::Done } else { Status::NotConverged })
}

fn path_cmd(file: &FileConfig, seed: u64, args: PathArgs) -> Result<Status> {
    let prep = load_dataset(file, seed, &args.solver)?;
    let cfg = solver_config(file, seed, &args.solver, 0.0)?;
    let n_lambda = file.pick("n_lambda", args.n_lambda, DEFAULT_N_LAMBDA)?;
    let ratio = file.pick("lambda_min_ratio", args.lambda_min_ratio, DEFAULT_LAMBDA_MIN_RATIO)?;
    let graph = build_knn_graph(&prep.working.points(), cfg.k)?;
    if let Some(path) = &args.solver.edges {
        io::write_edges(path, &graph)?;
    }
    let path = lambda_path(&prep.working, &graph, &cfg, n_lambda, ratio)?;
    io::write_path(&args.out, &path)?;
    let best = path.best();
    if let Some(out) = &args.best_fit {
        io::write_fit(out, &prep.original.points(), &original_beta(&prep, best))?;
    }
    if let Some(out) = &args.manifest {
        io::write_manifest(out, &io::RunManifest::from_fit(best, cfg.eta, cfg.k))?;
    }
    println!(
        "selected lambda {} (index {} of {}) bic {} support {}",
        best.lambda,
        path.selected + 1,
        path.lambdas.len(),
        path.bics[path.selected],
        best.support_total()
    );
    Ok(if best.converged { Status::Done } else { Status::NotConverged })
}

/// Loads a fit and, when `data` is given, checks it was fitted on that data.
fn load_fit(fit_path: &Path, data: Option<&Path>) -> Result<io::FitCsv> {
    let fit = io::read_fit(fit_path)?;
    if let Some(data) = data {
        let raw = io::read_dataset(data)?;
        let consistent = raw.t.len() == fit.points.len()
            && raw.t.iter().zip(&fit.points).all(|(t, p)| *t == p.0)
            && raw
                .tau
                .as_ref()
                .is_none_or(|tau| tau.iter().zip(&fit.points).all(|(tau, p)| *tau == p.1));
        if !consistent {
            bail!(
                "{} does not match the training points stored in {}",
                data.display(),
                fit_path.display()
            );
        }
    }
    Ok(fit)
}

fn predict_cmd(file: &FileConfig, args: PredictArgs) -> Result<Status> {
    let fit = load_fit(&args.fit, args.data.as_deref())?;
    let k = file.pick("k", args.k, 5)?;
    let queries = io::read_queries(&args.query)?;
    let values = queries
        .points
        .iter()
        .zip(&queries.x)
        .map(|(&q, x)| predict_quantile(&fit.beta, &fit.points, x, q, k))
        .collect::<rqf_core::Result<Vec<f64>>>()?;
    io::write_predictions(&args.out, &queries.points, &values)?;
    println!("predicted {} quantiles", values.len());
    Ok(Status::Done)
}

fn grid_cmd(file: &FileConfig, args: GridArgs) -> Result<Status> {
    let fit = load_fit(&args.fit, args.data.as_deref())?;
    let k = file.pick("k", args.k, 5)?;
    let t_steps = file.pick("t_steps", args.t_steps, 100)?;
    let tau_lo = file.pick("tau_lo", args.tau_lo, 0.05)?;
    let tau_hi = file.pick("tau_hi", args.tau_hi, 0.95)?;
    let tau_steps = file.pick("tau_steps", args.tau_steps, 90)?;
    if t_steps == 0 || tau_steps == 0 || !(tau_lo < tau_hi) {
        bail!("grid needs positive step counts and tau_lo < tau_hi");
    }
    let grid = eval_grid(&fit.beta, &fit.points, &t_grid(t_steps), &tau_grid(tau_lo, tau_hi, tau_steps), k)?;
    io::write_grid(&args.out, &grid)?;
    println!("evaluated {} grid cells for {} covariates", grid.cells(), grid.p);
    Ok(Status::Done)
}

fn eval_cmd(file: &FileConfig, args: EvalArgs) -> Result<Status> {
    let fit = io::read_fit(&args.fit)?;
    let truth = io::read_truth(&args.truth)?;
    if (truth.n(), truth.p()) != (fit.beta.n(), fit.beta.p()) {
        bail!(
            "fit is {}x{} but truth is {}x{}",
            fit.beta.n(),
            fit.beta.p(),
            truth.n(),
            truth.p()
        );
    }
    let cfg = SolverConfig {
        fuse_eps: file.pick("fuse_eps", args.fuse_eps, SolverConfig::default().fuse_eps)?,
        ..SolverConfig::default()
    };
    let eps = cfg.fuse_threshold(&fit.beta);
    let per_covariate = pair_confusion_all(&fit.beta, &truth, eps)?;
    let err = mse(&fit.beta, &truth)?;
    io::write_metrics(&args.out, &per_covariate, err)?;

    let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    println!("{:>4} {:>9} {:>9} {:>9} {:>9}", "j", "precision", "recall", "tnr", "npv");
    for (j, pc) in per_covariate.iter().enumerate() {
        println!(
            "{:>4} {:>9} {:>9} {:>9} {:>9}",
            j + 1,
            show(pc.precision),
            show(pc.recall),
            show(pc.tnr),
            show(pc.npv)
        );
    }
    println!("mse {err}");
    Ok(Status::Done)
}
