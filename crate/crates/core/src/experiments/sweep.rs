//! Regularization paths, radius sweeps and threshold-versus-width curves.

use serde::{Deserialize, Serialize};

use super::{build_grid, evaluate, fit_method, fmt_f, load_problem, GridSpec, Metadata, Method, Problem, SweepTable};
use super::{AxesSpec, PlotData, Scale, YSeries};
use crate::datagen::{ScenarioKind, ScenarioSpec};
use crate::error::{AdvError, Result};
use crate::norms::{norm, Dataset, NormKind};
use crate::rng::derive_seed;
use crate::solvers::SolverOptions;
use crate::theory;

/// Inputs shared by `path` and `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    pub scenario: ScenarioSpec,
    pub method: Method,
    pub attack: NormKind,
    pub grid: GridSpec,
    pub options: SolverOptions,
}

impl SweepArgs {
    pub fn new(scenario: ScenarioSpec, method: Method, attack: NormKind) -> Self {
        SweepArgs {
            scenario,
            method,
            attack,
            grid: GridSpec::default(),
            options: SolverOptions::default(),
        }
    }
}

fn run_grid(command: &str, args: &SweepArgs, problem: &Problem) -> Result<SweepTable> {
    args.options.validate()?;
    let grid = build_grid(problem, args.method, args.attack, &args.grid)?;
    let (db, zt) = problem.thresholds(args.attack);
    let delta_test = problem.delta_test(args.attack);
    let mut meta = Metadata::new(command, &args.scenario, Some(args.method), args.attack);
    meta.delta_bar = db;
    meta.zero_threshold = zt;
    meta.delta_test = Some(delta_test);
    meta.notes = problem.warnings.clone();
    let rows = grid
        .iter()
        .map(|&knob| {
            let fit = fit_method(problem, args.method, args.attack, knob, &args.options)?;
            evaluate(problem, args.method, args.attack, knob, &fit, delta_test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { metadata: meta, rows })
}

/// Regularization path: coefficients at every grid point.
pub fn cmd_path(args: &SweepArgs) -> Result<SweepTable> {
    let problem = load_problem(&args.scenario)?;
    run_grid("path", args, &problem)
}

/// Train/test error against the knob, with `δ̄` and the zero threshold in the
/// metadata.
pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepTable> {
    let problem = load_problem(&args.scenario)?;
    run_grid("sweep", args, &problem)
}

/// Runs a grid on an already loaded problem.
pub fn sweep_problem(command: &str, args: &SweepArgs, problem: &Problem) -> Result<SweepTable> {
    run_grid(command, args, problem)
}

impl SweepTable {
    /// Largest knob whose training error is at most `tol` (the empirical
    /// interpolation threshold), if any.
    pub fn last_interpolating(&self, tol: f64) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.train_mse <= tol)
            .map(|r| r.knob)
            .fold(None, |acc: Option<f64>, k| Some(acc.map_or(k, |a| a.max(k))))
    }

    /// Whether the empirical transition lies within one grid step of the
    /// theoretical threshold `δ̄`: the last interpolating grid point is at or
    /// below `δ̄` and its successor above `δ̄`, up to one neighbouring step.
    pub fn transition_within_one_step(&self, tol: f64) -> Option<bool> {
        let db = self.metadata.delta_bar?;
        let knobs: Vec<f64> = self.rows.iter().map(|r| r.knob).collect();
        let last = self.last_interpolating(tol)?;
        let i = knobs.iter().position(|&k| k == last)?;
        // Grid index bracketing δ̄: knobs[j] ≤ δ̄ < knobs[j+1].
        let j = knobs.iter().rposition(|&k| k <= db)?;
        Some(i.abs_diff(j) <= 1)
    }

    /// MSE curves against `1/knob` on a log axis with the `1/δ̄` marker.
    pub fn mse_plot(&self) -> PlotData {
        let x: Vec<f64> = self.rows.iter().map(|r| 1.0 / r.knob).collect();
        let series = vec![
            YSeries { name: "train MSE".into(), values: self.rows.iter().map(|r| r.train_mse).collect() },
            YSeries { name: "test MSE".into(), values: self.rows.iter().map(|r| r.test_mse).collect() },
            YSeries { name: "adversarial test MSE".into(), values: self.rows.iter().map(|r| r.adv_test_mse).collect() },
        ];
        let method = self.metadata.method.map(|m| m.name()).unwrap_or("");
        PlotData {
            x,
            series,
            axes: AxesSpec {
                title: format!("{method} ({}) — {}", self.metadata.attack.name(), self.metadata.command),
                x_label: format!("1/{}", self.metadata.knob),
                y_label: "mean squared error".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                marker: self.metadata.delta_bar.filter(|d| *d > 0.0 && d.is_finite()).map(|d| 1.0 / d),
                marker_label: "1/δ̄".into(),
            },
        }
    }

    /// Coefficient trajectories against `1/knob` on a log axis.
    pub fn path_plot(&self) -> PlotData {
        let p = self.rows.first().map(|r| r.coefficients.len()).unwrap_or(0);
        let series = (0..p)
            .map(|j| YSeries {
                name: format!("β{j}"),
                values: self.rows.iter().map(|r| r.coefficients[j]).collect(),
            })
            .collect();
        let method = self.metadata.method.map(|m| m.name()).unwrap_or("");
        PlotData {
            x: self.rows.iter().map(|r| 1.0 / r.knob).collect(),
            series,
            axes: AxesSpec {
                title: format!("{method} ({}) regularization path", self.metadata.attack.name()),
                x_label: format!("1/{}", self.metadata.knob),
                y_label: "coefficient".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Linear,
                marker: self.metadata.delta_bar.filter(|d| *d > 0.0 && d.is_finite()).map(|d| 1.0 / d),
                marker_label: "1/δ̄".into(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurveArgs {
    pub scenario: ScenarioSpec,
    pub attack: NormKind,
    pub ps: Vec<usize>,
    pub repetitions: usize,
}

/// Medians over repetitions for one width `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub p: usize,
    pub delta_bar: f64,
    /// Singular-value bracket on `δ̄` (already divided by `n`); `NaN` for
    /// the projection scenario, where it does not apply.
    pub lower: f64,
    pub upper: f64,
    pub zero_threshold: f64,
    /// `0.01·mean‖x‖` over the training inputs (ℓ2 for the ℓ2 attack, ℓ1 for ℓ∞).
    pub reference: f64,
    /// Whether the bracket held in every repetition.
    pub bracket_held: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub metadata: Metadata,
    pub rows: Vec<ThresholdRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn reference_radius(x: &Dataset, attack: NormKind) -> f64 {
    let kind = if attack == NormKind::Linf { NormKind::L1 } else { attack };
    let total: f64 = (0..x.n()).map(|i| norm(&x.x.row(i).transpose(), kind)).sum();
    0.01 * total / x.n() as f64
}

/// `δ̄`, its bracket, the zero threshold and the reference radius as functions
/// of the width `p` at fixed `n`; medians over the repetitions.
pub fn cmd_threshold_curve(args: &ThresholdCurveArgs) -> Result<ThresholdCurve> {
    if args.ps.is_empty() || args.repetitions == 0 {
        return Err(AdvError::InvalidArgument("need at least one p and one repetition".into()));
    }
    let n = args.scenario.n;
    if let Some(&p) = args.ps.iter().find(|&&p| p < n) {
        return Err(AdvError::InvalidArgument(format!(
            "p = {p} < n = {n}: the design cannot have full row rank"
        )));
    }
    let mut rows = Vec::with_capacity(args.ps.len());
    for &p in &args.ps {
        let (mut db, mut lo, mut hi, mut zt, mut rf) = (vec![], vec![], vec![], vec![], vec![]);
        let mut held = true;
        for r in 0..args.repetitions {
            let mut spec = args.scenario.clone();
            spec.p = p;
            spec.seed = derive_seed(args.scenario.seed, r as u64);
            // Only the training split matters here.
            spec.test_size = spec.test_size.min(n.max(1));
            let problem = load_problem(&spec)?;
            let (d, z) = problem.thresholds(args.attack);
            let d = d.ok_or_else(|| AdvError::RankDeficient { rank: 0, required: n })?;
            let z = z.unwrap_or(f64::NAN);
            let (l, h) = if problem.s.is_none() {
                let (l, h) = theory::delta_bar_bounds(&problem.train, args.attack)?;
                (l / n as f64, h / n as f64)
            } else {
                (f64::NAN, f64::NAN)
            };
            if l.is_finite() && !(l <= d * (1.0 + 1e-9) && d <= h * (1.0 + 1e-9)) {
                held = false;
            }
            db.push(d);
            lo.push(l);
            hi.push(h);
            zt.push(z);
            rf.push(reference_radius(&problem.train, args.attack));
        }
        rows.push(ThresholdRow {
            p,
            delta_bar: median(db),
            lower: median(lo),
            upper: median(hi),
            zero_threshold: median(zt),
            reference: median(rf),
            bracket_held: held,
        });
    }
    let mut meta = Metadata::new("threshold-curve", &args.scenario, Some(Method::Adv), args.attack);
    meta.knob = "p".into();
    meta.notes.push(format!("p values: {:?}", args.ps));
    meta.notes.push(format!("aggregation: median over {} repetitions", args.repetitions));
    if args.scenario.kind == ScenarioKind::RandomProjection {
        meta.notes.push("singular-value bracket not applicable to projected designs".into());
    }
    Ok(ThresholdCurve { metadata: meta, rows })
}

impl ThresholdCurve {
    pub fn to_csv(&self) -> String {
        let mut out = self.metadata.comment_lines();
        out.push_str("p,delta_bar,delta_bar_lower,delta_bar_upper,zero_threshold,reference,bracket_held\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.p,
                fmt_f(r.delta_bar),
                fmt_f(r.lower),
                fmt_f(r.upper),
                fmt_f(r.zero_threshold),
                fmt_f(r.reference),
                r.bracket_held
            ));
        }
        out
    }

    /// `δ̄` is nondecreasing across rows ordered by increasing `p`.
    pub fn nondecreasing(&self) -> bool {
        let mut rows: Vec<&ThresholdRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.p);
        rows.windows(2).all(|w| w[1].delta_bar >= w[0].delta_bar)
    }

    pub fn plot(&self) -> PlotData {
        let x = self.rows.iter().map(|r| r.p as f64).collect();
        let col = |f: fn(&ThresholdRow) -> f64| self.rows.iter().map(f).collect::<Vec<_>>();
        let mut series = vec![
            YSeries { name: "δ̄ (median)".into(), values: col(|r| r.delta_bar) },
            YSeries { name: "0.01·mean‖x‖".into(), values: col(|r| r.reference) },
        ];
        if self.rows.iter().all(|r| r.lower.is_finite()) {
            series.push(YSeries { name: "lower bound".into(), values: col(|r| r.lower) });
            series.push(YSeries { name: "upper bound".into(), values: col(|r| r.upper) });
        }
        PlotData {
            x,
            series,
            axes: AxesSpec {
                title: format!("interpolation threshold ({} attack)", self.metadata.attack.name()),
                x_label: "number of features p".into(),
                y_label: "radius".into(),
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                marker: None,
                marker_label: String::new(),
            },
        }
    }
}
