//! Head-to-head comparison of tuned estimators by normalized test error.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{build_grid, fit_method, geometric_grid, load_problem, nmse, GridSpec, Metadata, Method, Problem};
use crate::datagen::ScenarioSpec;
use crate::error::{AdvError, Result};
use crate::norms::{norm, Dataset, NormKind};
use crate::rng::{stream, Purpose};
use crate::solvers::SolverOptions;
use crate::theory;

/// How a method's knob is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningRule {
    /// Best test error over the grid (oracle tuning).
    GridSearch,
    /// K-fold cross-validation on the training split.
    CrossValidation,
    /// Random-noise heuristic: `c‖Xᵀξ‖/‖ξ‖` with a Gaussian probe `ξ`.
    HeuristicDelta,
    /// `K·M·√(ln p / n)` with `M = max_i ‖x_i‖_∞` and `K = 1`.
    PivotalDelta,
    /// No knob (interpolators).
    Untuned,
}

impl TuningRule {
    pub fn name(self) -> &'static str {
        match self {
            TuningRule::GridSearch => "grid",
            TuningRule::CrossValidation => "cv",
            TuningRule::HeuristicDelta => "heuristic",
            TuningRule::PivotalDelta => "pivotal",
            TuningRule::Untuned => "none",
        }
    }
}

impl fmt::Display for TuningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TuningRule {
    type Err = AdvError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(TuningRule::GridSearch),
            "cv" => Ok(TuningRule::CrossValidation),
            "heuristic" => Ok(TuningRule::HeuristicDelta),
            "pivotal" => Ok(TuningRule::PivotalDelta),
            "none" => Ok(TuningRule::Untuned),
            other => Err(AdvError::InvalidArgument(format!("unknown tuning rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareArgs {
    pub scenario: ScenarioSpec,
    pub attack: NormKind,
    /// Methods to tune; the minimum-norm interpolators are always added.
    pub methods: Vec<(Method, TuningRule)>,
    /// Coarse search grid; grid search refines around the best point.
    pub grid: GridSpec,
    pub folds: usize,
    pub options: SolverOptions,
}

impl CompareArgs {
    pub fn new(scenario: ScenarioSpec, attack: NormKind, methods: Vec<(Method, TuningRule)>) -> Self {
        CompareArgs {
            scenario,
            attack,
            methods,
            grid: GridSpec { per_decade: 12.0, ..GridSpec::default() },
            folds: 5,
            options: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    /// Attack norm for adversarial training and the interpolators.
    pub attack: Option<NormKind>,
    pub tuning: TuningRule,
    /// Selected `δ` or `λ`; `None` for interpolators.
    pub knob: Option<f64>,
    pub test_mse: f64,
    pub nmse: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub metadata: Metadata,
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn find(&self, method: Method, tuning: TuningRule) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.method == method && r.tuning == tuning)
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

fn test_nmse(problem: &Problem, method: Method, attack: NormKind, knob: f64, opts: &SolverOptions) -> Result<(f64, f64, bool)> {
    let fit = fit_method(problem, method, attack, knob, opts)?;
    let beta = problem.input_coefficients(&fit.coefficients());
    Ok((problem.test.mse(&beta), nmse(problem, &beta), fit.converged))
}

/// Oracle tuning: coarse grid, then a finer grid between the neighbours of
/// the best coarse point.
fn grid_search(problem: &Problem, method: Method, attack: NormKind, args: &CompareArgs) -> Result<f64> {
    let grid = build_grid(problem, method, attack, &args.grid)?;
    let score = |k: f64| test_nmse(problem, method, attack, k, &args.options).map(|r| r.1);
    let mut scores = Vec::with_capacity(grid.len());
    for &k in &grid {
        scores.push(score(k)?);
    }
    let best = argmin(&scores);
    if grid.len() < 3 {
        return Ok(grid[best]);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut knob, mut val) = (grid[best], scores[best]);
    for k in geometric_grid(lo, hi, 9)? {
        let s = score(k)?;
        if s < val {
            (knob, val) = (k, s);
        }
    }
    Ok(knob)
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) })
        .0
}

fn subset(d: &Dataset, idx: &[usize]) -> Dataset {
    Dataset {
        x: d.x.select_rows(idx),
        y: d.y.select_rows(idx),
    }
}

/// K-fold cross-validation over the coarse grid on the training split.
fn cross_validate(problem: &Problem, method: Method, attack: NormKind, args: &CompareArgs) -> Result<f64> {
    let n = problem.train.n();
    let k = args.folds;
    if k < 2 || k > n {
        return Err(AdvError::InvalidArgument(format!("cross-validation needs 2 ≤ folds ≤ n (got {k})")));
    }
    let grid = build_grid(problem, method, attack, &args.grid)?;
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut stream(args.scenario.seed, Purpose::Folds));
    let mut errors = vec![0.0; grid.len()];
    for f in 0..k {
        let held: Vec<usize> = order.iter().copied().skip(f).step_by(k).collect();
        let kept: Vec<usize> = order.iter().copied().enumerate().filter(|(i, _)| i % k != f).map(|(_, j)| j).collect();
        let fold = Problem {
            train: subset(&problem.train, &kept),
            test: subset(&problem.train, &held),
            s: problem.s.clone(),
            truth: None,
            warnings: Vec::new(),
        };
        for (g, &knob) in grid.iter().enumerate() {
            let fit = fit_method(&fold, method, attack, knob, &args.options)?;
            let beta = fold.input_coefficients(&fit.coefficients());
            errors[g] += fold.test.mse(&beta) * held.len() as f64;
        }
    }
    Ok(grid[argmin(&errors)])
}

/// `c‖Xᵀξ‖/‖ξ‖₁` in the attack norm (the ℓ∞ rule of the noise heuristic, and
/// its ℓ2 analogue), or the square-root Lasso rule `c‖Xᵀξ‖_∞/‖ξ‖₂`.
fn heuristic(problem: &Problem, method: Method, attack: NormKind, seed: u64) -> Result<f64> {
    let z = problem.feature_train();
    match (method, attack) {
        (Method::Adv, NormKind::Linf) => Ok(theory::heuristic_delta(&z.x, theory::HEURISTIC_DELTA_C, seed)),
        (Method::Adv, _) => {
            let probe = theory::normal_probe(z.n(), seed);
            Ok(theory::HEURISTIC_DELTA_C * norm(&z.x.tr_mul(&probe), attack) / probe.lp_norm(1))
        }
        (Method::SqrtLasso, _) => Ok(theory::sqrt_lasso_heuristic_lambda(&z.x, theory::HEURISTIC_SQRT_LASSO_C, seed)),
        _ => Err(AdvError::InvalidArgument(format!("no noise heuristic for {}", method.name()))),
    }
}

fn pivotal(problem: &Problem, method: Method) -> Result<f64> {
    if method != Method::Adv {
        return Err(AdvError::InvalidArgument(format!("pivotal radius applies to adv, not {}", method.name())));
    }
    let z = problem.feature_train();
    let m = z.x.amax();
    theory::pivotal_delta(z.n(), z.p() as f64, m, 1.0)
}

/// Tunes every requested method and reports normalized test MSE
/// (test MSE / variance of the test responses), plus the minimum-norm
/// interpolators for both attack norms as untuned baselines.
pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport> {
    args.options.validate()?;
    let problem = load_problem(&args.scenario)?;
    compare_problem(args, &problem)
}

/// [`cmd_compare`] on an already loaded problem.
pub fn compare_problem(args: &CompareArgs, problem: &Problem) -> Result<CompareReport> {
    let mut rows = Vec::new();
    for &(method, rule) in &args.methods {
        if method == Method::MinNorm {
            continue;
        }
        let knob = match rule {
            TuningRule::GridSearch => grid_search(problem, method, args.attack, args)?,
            TuningRule::CrossValidation => cross_validate(problem, method, args.attack, args)?,
            TuningRule::HeuristicDelta => heuristic(problem, method, args.attack, args.scenario.seed)?,
            TuningRule::PivotalDelta => pivotal(problem, method)?,
            TuningRule::Untuned => {
                return Err(AdvError::InvalidArgument(format!("{} needs a tuning rule", method.name())))
            }
        };
        let (test_mse, nm, converged) = test_nmse(problem, method, args.attack, knob, &args.options)?;
        rows.push(CompareRow {
            method,
            attack: (method == Method::Adv).then_some(args.attack),
            tuning: rule,
            knob: Some(knob),
            test_mse,
            nmse: nm,
            converged,
        });
    }
    for attack in [NormKind::Linf, NormKind::L2] {
        let (test_mse, nm, converged) = test_nmse(problem, Method::MinNorm, attack, 0.0, &args.options)?;
        rows.push(CompareRow {
            method: Method::MinNorm,
            attack: Some(attack),
            tuning: TuningRule::Untuned,
            knob: None,
            test_mse,
            nmse: nm,
            converged,
        });
    }
    let mut meta = Metadata::new("compare", &args.scenario, None, args.attack);
    let (db, zt) = problem.thresholds(args.attack);
    meta.delta_bar = db;
    meta.zero_threshold = zt;
    meta.delta_test = Some(problem.delta_test(args.attack));
    meta.notes = problem.warnings.clone();
    meta.notes.push("nmse = test mse / variance of test responses".into());
    Ok(CompareReport { metadata: meta, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::ScenarioKind;

    #[test]
    fn rule_names_roundtrip() {
        for r in [
            TuningRule::GridSearch,
            TuningRule::CrossValidation,
            TuningRule::HeuristicDelta,
            TuningRule::PivotalDelta,
            TuningRule::Untuned,
        ] {
            assert_eq!(r.name().parse::<TuningRule>().unwrap(), r);
        }
    }

    #[test]
    fn interpolators_always_reported() {
        let mut spec = ScenarioSpec::new(ScenarioKind::Gaussian, 12, 30, 5);
        spec.test_size = 100;
        spec.sparsity = Some(3);
        let args = CompareArgs::new(spec, NormKind::Linf, vec![(Method::Ridge, TuningRule::CrossValidation)]);
        let rep = cmd_compare(&args).unwrap();
        assert_eq!(rep.rows.len(), 3);
        assert_eq!(rep.rows.iter().filter(|r| r.method == Method::MinNorm).count(), 2);
        assert!(rep.rows.iter().all(|r| r.nmse.is_finite() && r.nmse > 0.0));
    }
}
