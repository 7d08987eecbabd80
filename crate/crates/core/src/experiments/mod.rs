//! Experiment drivers: data loading, estimator dispatch, grids, tables and
//! the reports behind the command-line subcommands.

mod compare;
mod svg;
mod sweep;
mod verify;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::{self, LabeledSplit, ScenarioKind, ScenarioSpec, Truth};
use crate::error::{AdvError, Result};
use crate::norms::{norm, Dataset, NormKind};
use crate::objective::{adv_test_mse, AdvConfig};
use crate::solvers::{
    min_norm_interpolator, solve_adv, solve_adv_linmap, solve_lasso, solve_ridge, solve_sqrt_lasso, FitResult,
    SolverOptions,
};
use crate::theory;

pub use compare::{cmd_compare, compare_problem, CompareArgs, CompareReport, CompareRow, TuningRule};
pub use svg::{emit_svg, AxesSpec, PlotData, Scale, YSeries};
pub use sweep::{cmd_path, cmd_sweep, cmd_threshold_curve, sweep_problem, SweepArgs, ThresholdCurve, ThresholdCurveArgs, ThresholdRow};
pub use verify::{cmd_verify, CheckOutcome, VerifyArgs, VerifyReport};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Estimator families exposed by the drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Adv,
    Lasso,
    Ridge,
    SqrtLasso,
    MinNorm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Adv => "adv",
            Method::Lasso => "lasso",
            Method::Ridge => "ridge",
            Method::SqrtLasso => "sqrt-lasso",
            Method::MinNorm => "min-norm",
        }
    }

    /// Name of the tuning knob: `delta` for adversarial training, `lambda`
    /// for the penalized baselines.
    pub fn knob_name(self) -> &'static str {
        match self {
            Method::Adv => "delta",
            Method::MinNorm => "none",
            _ => "lambda",
        }
    }

    /// Norm used to summarize the coefficient size along a path.
    pub fn coef_norm(self, attack: NormKind) -> NormKind {
        match self {
            Method::Adv | Method::MinNorm => attack.dual(),
            Method::Ridge => NormKind::L2,
            Method::Lasso | Method::SqrtLasso => NormKind::L1,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = AdvError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adv" => Ok(Method::Adv),
            "lasso" => Ok(Method::Lasso),
            "ridge" => Ok(Method::Ridge),
            "sqrt-lasso" => Ok(Method::SqrtLasso),
            "min-norm" => Ok(Method::MinNorm),
            other => Err(AdvError::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Training and test data in the input space. For the projection scenario the
/// model is `θ` with inputs mapped by `S`; every prediction is `xᵀSᵀθ`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub train: Dataset,
    pub test: Dataset,
    /// `p × d` map for the projection scenario.
    pub s: Option<DMatrix<f64>>,
    pub truth: Option<Truth>,
    pub warnings: Vec<String>,
}

impl Problem {
    pub fn from_split(split: LabeledSplit) -> Self {
        Problem {
            train: split.train,
            test: split.test,
            s: None,
            truth: split.truth,
            warnings: Vec::new(),
        }
    }

    /// Design seen by estimators that act on the features directly.
    pub fn feature_train(&self) -> Dataset {
        match &self.s {
            Some(s) => Dataset {
                x: &self.train.x * s.transpose(),
                y: self.train.y.clone(),
            },
            None => self.train.clone(),
        }
    }

    /// Coefficients in the input space.
    pub fn input_coefficients(&self, fitted: &DVector<f64>) -> DVector<f64> {
        match &self.s {
            Some(s) => s.tr_mul(fitted),
            None => fitted.clone(),
        }
    }

    /// Default evaluation radius: `0.01·mean‖x‖₂` for the ℓ2 attack and
    /// `0.01·mean‖x‖₁` for ℓ∞, over the test inputs.
    pub fn delta_test(&self, attack: NormKind) -> f64 {
        let kind = if attack == NormKind::Linf { NormKind::L1 } else { attack };
        let x = &self.test.x;
        let total: f64 = (0..x.nrows()).map(|i| norm(&x.row(i).transpose(), kind)).sum();
        0.01 * total / x.nrows() as f64
    }

    /// `(δ̄, zero threshold)` on the training data, `None` where undefined
    /// (e.g. δ̄ without full row rank).
    pub fn thresholds(&self, attack: NormKind) -> (Option<f64>, Option<f64>) {
        match &self.s {
            Some(s) => (
                theory::delta_bar_linmap(&self.train, s, attack).ok(),
                theory::zero_threshold_linmap(&self.train, s, attack).ok(),
            ),
            None => (
                theory::delta_bar(&self.train, attack).ok(),
                Some(theory::zero_threshold(&self.train, attack)),
            ),
        }
    }
}

/// Builds the train/test problem for a scenario. CSV inputs are normalized
/// (centered, unit-scale columns) and split 50/50 unless `n` asks otherwise.
pub fn load_problem(spec: &ScenarioSpec) -> Result<Problem> {
    match spec.kind {
        ScenarioKind::Gaussian => Ok(Problem::from_split(datagen::gen_gaussian(spec)?)),
        ScenarioKind::Latent => Ok(Problem::from_split(datagen::gen_latent(spec)?)),
        ScenarioKind::FourierFeatures => {
            let base = match &spec.csv_path {
                Some(path) => datagen::load_csv(path, spec.target.as_deref().unwrap_or("target"))?,
                None => datagen::load_csv(&datagen::diabetes_csv_path(), "target")?,
            };
            Ok(Problem::from_split(datagen::gen_fourier(spec, &base)?))
        }
        ScenarioKind::RandomProjection => {
            let ps = datagen::gen_projection(spec)?;
            Ok(Problem {
                train: ps.raw_train,
                test: ps.raw_test,
                s: Some(ps.s),
                truth: ps.projected.truth,
                warnings: Vec::new(),
            })
        }
        ScenarioKind::CsvFile => {
            let path = spec
                .csv_path
                .as_ref()
                .ok_or_else(|| AdvError::InvalidArgument("csv scenario needs a file path".into()))?;
            let target = spec
                .target
                .as_deref()
                .ok_or_else(|| AdvError::InvalidArgument("csv scenario needs a target column".into()))?;
            let raw = datagen::load_csv(path, target)?;
            let norm = datagen::normalize(&raw)?;
            let frac = if spec.n > 0 && spec.n < raw.n() {
                spec.n as f64 / raw.n() as f64
            } else {
                0.5
            };
            let split = datagen::split(&norm.data, frac, spec.seed)?;
            let mut problem = Problem::from_split(split);
            problem.warnings = norm.warnings;
            Ok(problem)
        }
    }
}

/// Fits one estimator at one knob value. `knob` is `δ` for adversarial
/// training, `λ` for the baselines and ignored for interpolators.
pub fn fit_method(problem: &Problem, method: Method, attack: NormKind, knob: f64, opts: &SolverOptions) -> Result<FitResult> {
    match method {
        Method::Adv => {
            let cfg = AdvConfig::new(knob, attack)?;
            match &problem.s {
                Some(s) => solve_adv_linmap(&problem.train, s, &cfg, opts),
                None => solve_adv(&problem.train, &cfg, opts),
            }
        }
        Method::Lasso => solve_lasso(&problem.feature_train(), knob, opts),
        Method::Ridge => solve_ridge(&problem.feature_train(), knob),
        Method::SqrtLasso => solve_sqrt_lasso(&problem.feature_train(), knob, opts),
        Method::MinNorm => min_norm_interpolator(&problem.feature_train(), attack),
    }
}

/// Geometric grid with `points` values from `min` to `max` inclusive.
pub fn geometric_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max >= min) || !max.is_finite() || points == 0 {
        return Err(AdvError::InvalidArgument(format!(
            "grid needs 0 < min ≤ max and at least one point (got {min}, {max}, {points})"
        )));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    if max == min {
        return Err(AdvError::InvalidArgument("a grid with several points needs min < max".into()));
    }
    let (lmin, lmax) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|k| (lmin + (lmax - lmin) * k as f64 / (points - 1) as f64).exp())
        .collect())
}

/// Number of points giving `per_decade` points per factor of ten.
pub fn points_for_span(min: f64, max: f64, per_decade: f64) -> usize {
    ((max / min).log10() * per_decade).ceil().max(1.0) as usize + 1
}

/// Grid overrides; unset fields fall back to method-specific defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
    pub per_decade: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: None,
            max: None,
            points: None,
            per_decade: 48.0,
        }
    }
}

/// Default knob range: `[0.05·δ̄, 2·zero threshold]` for adversarial training,
/// `[1e-4, 2]·λ_max` for Lasso, `[1e-3, 2]·λ_max` for the square-root Lasso and
/// `[1e-8, 1e2]` for ridge.
pub fn default_range(problem: &Problem, method: Method, attack: NormKind) -> (f64, f64) {
    let d = problem.feature_train();
    let nf = d.n() as f64;
    match method {
        Method::Adv => {
            let (db, zt) = problem.thresholds(attack);
            let zt = zt.filter(|v| *v > 0.0).unwrap_or(1.0);
            let lo = db.filter(|v| v.is_finite() && *v > 0.0).map(|v| 0.05 * v).unwrap_or(1e-3 * zt);
            (lo.min(zt), 2.0 * zt)
        }
        Method::Lasso => {
            let lmax = 2.0 * d.x.tr_mul(&d.y).amax() / nf;
            (1e-4 * lmax, 2.0 * lmax)
        }
        Method::SqrtLasso => {
            let lmax = d.x.tr_mul(&d.y).amax() / (nf.sqrt() * d.y.norm().max(f64::MIN_POSITIVE));
            (1e-3 * lmax, 2.0 * lmax)
        }
        Method::Ridge => (1e-8, 1e2),
        Method::MinNorm => (0.0, 0.0),
    }
}

pub fn build_grid(problem: &Problem, method: Method, attack: NormKind, spec: &GridSpec) -> Result<Vec<f64>> {
    if method == Method::MinNorm {
        return Ok(vec![0.0]);
    }
    let (dmin, dmax) = default_range(problem, method, attack);
    let min = spec.min.unwrap_or(dmin);
    let max = spec.max.unwrap_or(dmax);
    let points = match spec.points {
        Some(k) => k,
        None if min > 0.0 && max > min => points_for_span(min, max, spec.per_decade),
        None => 1,
    };
    if points == 0 {
        return Err(AdvError::InvalidArgument("empty grid".into()));
    }
    geometric_grid(min, max, points)
}

/// Run metadata embedded in every output so it can be regenerated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub scenario: ScenarioSpec,
    pub method: Option<Method>,
    pub attack: NormKind,
    pub seed: u64,
    pub delta_bar: Option<f64>,
    pub zero_threshold: Option<f64>,
    pub delta_test: Option<f64>,
    pub knob: String,
    pub notes: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str, scenario: &ScenarioSpec, method: Option<Method>, attack: NormKind) -> Self {
        Metadata {
            tool: "advreg".into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            scenario: scenario.clone(),
            method,
            attack,
            seed: scenario.seed,
            delta_bar: None,
            zero_threshold: None,
            delta_test: None,
            knob: method.map(|m| m.knob_name()).unwrap_or("none").into(),
            notes: Vec::new(),
        }
    }

    /// `# key: value` comment lines for the head of a CSV file.
    pub fn comment_lines(&self) -> String {
        let json = serde_json::to_string(self).expect("metadata serializes");
        format!("# advreg {}\n# metadata: {}\n", self.version, json)
    }
}

/// One grid point of a path or sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub knob: f64,
    pub train_mse: f64,
    pub test_mse: f64,
    pub adv_test_mse: f64,
    /// Coefficient size in the method's natural norm.
    pub coef_norm: f64,
    pub certificate_residual: f64,
    pub converged: bool,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub metadata: Metadata,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.metadata.comment_lines();
        let p = self.rows.first().map(|r| r.coefficients.len()).unwrap_or(0);
        let mut header = vec![
            "knob".to_string(),
            "train_mse".into(),
            "test_mse".into(),
            "adv_test_mse".into(),
            "coef_norm".into(),
            "certificate_residual".into(),
            "converged".into(),
        ];
        header.extend((0..p).map(|j| format!("beta_{j}")));
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![
                fmt_f(r.knob),
                fmt_f(r.train_mse),
                fmt_f(r.test_mse),
                fmt_f(r.adv_test_mse),
                fmt_f(r.coef_norm),
                fmt_f(r.certificate_residual),
                r.converged.to_string(),
            ];
            fields.extend(r.coefficients.iter().map(|&v| fmt_f(v)));
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

/// Evaluates a fit on the problem's train and test data.
pub(crate) fn evaluate(
    problem: &Problem,
    method: Method,
    attack: NormKind,
    knob: f64,
    fit: &FitResult,
    delta_test: f64,
) -> Result<SweepRow> {
    let theta = fit.coefficients();
    let beta = problem.input_coefficients(&theta);
    let test_cfg = AdvConfig::new(delta_test, attack)?;
    Ok(SweepRow {
        knob,
        train_mse: problem.train.mse(&beta),
        test_mse: problem.test.mse(&beta),
        adv_test_mse: adv_test_mse(&beta, &problem.test, &test_cfg)?,
        coef_norm: norm(&theta, method.coef_norm(attack)),
        certificate_residual: fit.certificate_residual,
        converged: fit.converged,
        coefficients: fit.beta.clone(),
    })
}

/// Normalized test MSE: test MSE over the variance of the test responses.
pub fn nmse(problem: &Problem, beta_input: &DVector<f64>) -> f64 {
    let y = &problem.test.y;
    let mean = y.mean();
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64;
    problem.test.mse(beta_input) / var.max(f64::MIN_POSITIVE)
}
