//! `advreg` command-line driver.
//!
//! Exit codes: 0 success, 1 a verify property failed, 2 usage or input error,
//! 3 solver non-convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use advreg::datagen::{ScenarioKind, ScenarioSpec, DEFAULT_TEST_SIZE};
use advreg::experiments::{
    cmd_compare, cmd_path, cmd_sweep, cmd_threshold_curve, cmd_verify, emit_svg, CompareArgs, GridSpec, Method,
    PlotData, SweepArgs, ThresholdCurveArgs, TuningRule, VerifyArgs,
};
use advreg::{AdvError, NormKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "advreg", version, about = "Adversarially trained linear regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regularization path: coefficients at every grid point (CSV).
    Path(GridCmd),
    /// Train/test error against the knob with the interpolation threshold (CSV).
    Sweep(GridCmd),
    /// Interpolation threshold as a function of the width p (CSV).
    ThresholdCurve(CurveCmd),
    /// Tuned methods compared by normalized test error (JSON).
    Compare(CompareCmd),
    /// Property self-check with observed margins (JSON).
    Verify(VerifyCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Gaussian,
    Latent,
    Fourier,
    Projection,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    L2,
    Linf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Adv,
    Lasso,
    Ridge,
    SqrtLasso,
    MinNorm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TuneArg {
    Grid,
    Cv,
    Heuristic,
    Pivotal,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    scenario: ScenarioArg,
    /// CSV input (csv scenario; optional base data for fourier).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Response column of the CSV input.
    #[arg(long)]
    target: Option<String>,
    /// Training samples [default: 60; csv: half the rows].
    #[arg(long)]
    n: Option<usize>,
    /// Features, or projections for the projection scenario.
    #[arg(long, default_value_t = 200)]
    p: usize,
    /// Latent dimension, or input dimension for projections.
    #[arg(long)]
    d: Option<usize>,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Standard deviation of the random Fourier frequencies.
    #[arg(long)]
    sigma_w: Option<f64>,
    /// Number of nonzero true coefficients (gaussian).
    #[arg(long)]
    sparsity: Option<usize>,
    /// Synthetic test points (csv: the held-out rows are used instead).
    #[arg(long, default_value_t = DEFAULT_TEST_SIZE)]
    test_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "linf")]
    attack: AttackArg,
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional SVG plot.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct GridCmd {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "adv")]
    method: MethodArg,
    /// Smallest knob (δ or λ); default depends on the method and data.
    #[arg(long)]
    grid_min: Option<f64>,
    /// Largest knob.
    #[arg(long)]
    grid_max: Option<f64>,
    /// Geometric grid size [default: 48 per decade of span].
    #[arg(long)]
    grid_points: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CurveCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated widths; defaults to --p alone.
    #[arg(long, value_delimiter = ',')]
    p_list: Vec<usize>,
    /// Repetitions per width; rows report medians.
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompareCmd {
    #[command(flatten)]
    data: DataArgs,
    /// Methods to tune (repeatable); interpolators are always reported.
    #[arg(long, value_enum, default_values = ["adv", "lasso"])]
    method: Vec<MethodArg>,
    /// Tuning rule per method, in order; missing entries use grid search.
    #[arg(long, value_enum)]
    tune: Vec<TuneArg>,
    /// Cross-validation folds for `--tune cv`.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Coarse tuning grid size [default: 12 per decade of span].
    #[arg(long)]
    grid_points: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyCmd {
    /// Random instances per check.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scales the computed threshold in the transition check (negative control).
    #[arg(long, default_value_t = 1.0, hide = true)]
    delta_bar_scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    NonConvergence(String),
    Invariant,
}

impl From<AdvError> for Failure {
    fn from(e: AdvError) -> Self {
        match e {
            AdvError::NonConvergence(_) | AdvError::Factorization(_) => Failure::NonConvergence(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn attack(a: AttackArg) -> NormKind {
    match a {
        AttackArg::L2 => NormKind::L2,
        AttackArg::Linf => NormKind::Linf,
    }
}

fn method(m: MethodArg) -> Method {
    match m {
        MethodArg::Adv => Method::Adv,
        MethodArg::Lasso => Method::Lasso,
        MethodArg::Ridge => Method::Ridge,
        MethodArg::SqrtLasso => Method::SqrtLasso,
        MethodArg::MinNorm => Method::MinNorm,
    }
}

fn tuning(t: TuneArg) -> TuningRule {
    match t {
        TuneArg::Grid => TuningRule::GridSearch,
        TuneArg::Cv => TuningRule::CrossValidation,
        TuneArg::Heuristic => TuningRule::HeuristicDelta,
        TuneArg::Pivotal => TuningRule::PivotalDelta,
    }
}

fn scenario(a: &DataArgs) -> Result<ScenarioSpec, Failure> {
    let kind = match a.scenario {
        ScenarioArg::Gaussian => ScenarioKind::Gaussian,
        ScenarioArg::Latent => ScenarioKind::Latent,
        ScenarioArg::Fourier => ScenarioKind::FourierFeatures,
        ScenarioArg::Projection => ScenarioKind::RandomProjection,
        ScenarioArg::Csv => ScenarioKind::CsvFile,
    };
    if kind == ScenarioKind::CsvFile && (a.csv.is_none() || a.target.is_none()) {
        return Err(Failure::Usage("--scenario csv needs --csv PATH and --target NAME".into()));
    }
    let n = match (a.n, kind) {
        (Some(n), _) => n,
        (None, ScenarioKind::CsvFile) => 0,
        (None, _) => 60,
    };
    let mut spec = ScenarioSpec::new(kind, n, a.p, a.seed);
    spec.sigma = a.sigma;
    if let Some(d) = a.d {
        spec.d = d;
    }
    if let Some(w) = a.sigma_w {
        spec.sigma_w = w;
    }
    spec.sparsity = a.sparsity;
    spec.test_size = a.test_size;
    spec.csv_path = a.csv.clone();
    spec.target = a.target.clone();
    Ok(spec)
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_svg(path: Option<&Path>, plot: &PlotData) -> Result<(), Failure> {
    if let Some(p) = path {
        let svg = emit_svg(plot)?;
        fs::write(p, svg).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn run_grid(cmd: &GridCmd, is_path: bool) -> Result<(), Failure> {
    let mut args = SweepArgs::new(scenario(&cmd.data)?, method(cmd.method), attack(cmd.data.attack));
    args.grid = GridSpec {
        min: cmd.grid_min,
        max: cmd.grid_max,
        points: cmd.grid_points,
        ..GridSpec::default()
    };
    let table = if is_path { cmd_path(&args)? } else { cmd_sweep(&args)? };
    write_out(cmd.output.out.as_deref(), &table.to_csv())?;
    let plot = if is_path { table.path_plot() } else { table.mse_plot() };
    write_svg(cmd.output.svg.as_deref(), &plot)?;
    if !table.all_converged() {
        let n = table.rows.iter().filter(|r| !r.converged).count();
        return Err(Failure::NonConvergence(format!("{n} grid point(s) did not converge")));
    }
    Ok(())
}

fn run_curve(cmd: &CurveCmd) -> Result<(), Failure> {
    let ps = if cmd.p_list.is_empty() { vec![cmd.data.p] } else { cmd.p_list.clone() };
    let args = ThresholdCurveArgs {
        scenario: scenario(&cmd.data)?,
        attack: attack(cmd.data.attack),
        ps,
        repetitions: cmd.repetitions,
    };
    let curve = cmd_threshold_curve(&args)?;
    write_out(cmd.output.out.as_deref(), &curve.to_csv())?;
    write_svg(cmd.output.svg.as_deref(), &curve.plot())
}

fn run_compare(cmd: &CompareCmd) -> Result<(), Failure> {
    if cmd.tune.len() > cmd.method.len() {
        return Err(Failure::Usage("more --tune values than --method values".into()));
    }
    let methods = cmd
        .method
        .iter()
        .enumerate()
        .map(|(i, &m)| (method(m), cmd.tune.get(i).map(|&t| tuning(t)).unwrap_or(TuningRule::GridSearch)))
        .collect();
    let mut args = CompareArgs::new(scenario(&cmd.data)?, attack(cmd.data.attack), methods);
    args.folds = cmd.folds;
    args.grid.points = cmd.grid_points;
    let report = cmd_compare(&args)?;
    write_out(cmd.output.out.as_deref(), &to_json(&report))?;
    if cmd.output.svg.is_some() {
        eprintln!("advreg: compare produces no plot; --svg ignored");
    }
    if !report.all_converged() {
        return Err(Failure::NonConvergence("a tuned fit did not converge".into()));
    }
    Ok(())
}

fn run_verify(cmd: &VerifyCmd) -> Result<(), Failure> {
    let args = VerifyArgs {
        trials: cmd.trials,
        seed: cmd.seed,
        delta_bar_scale: cmd.delta_bar_scale,
    };
    let report = cmd_verify(&args)?;
    write_out(cmd.out.as_deref(), &to_json(&report))?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Invariant)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Path(c) => run_grid(c, true),
        Command::Sweep(c) => run_grid(c, false),
        Command::ThresholdCurve(c) => run_curve(c),
        Command::Compare(c) => run_compare(c),
        Command::Verify(c) => run_verify(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant) => {
            eprintln!("advreg: verify: at least one property failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("advreg: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NonConvergence(msg)) => {
            eprintln!("advreg: {msg}");
            ExitCode::from(3)
        }
    }
}
