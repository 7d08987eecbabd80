//! Self-check suite: runs the library's core properties on fresh random
//! instances and reports observed margins.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::norms::{norm, Dataset, NormKind};
use crate::objective::{adv_risk, adv_risk_sampled, colset_worst_disturbance, robust_colset_worst_value, robust_objective, AdvConfig};
use crate::rng::{derive_seed, stream, Purpose};
use crate::solvers::{min_norm_interpolator, solve_adv, solve_ridge, SolverOptions};
use crate::theory;

use super::TOOL_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyArgs {
    pub trials: usize,
    pub seed: u64,
    /// Multiplies the computed `δ̄` before the transition check. `1.0` in
    /// normal runs; other values are a negative control.
    pub delta_bar_scale: f64,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        VerifyArgs { trials: 10, seed: 0, delta_bar_scale: 1.0 }
    }
}

/// One property: `margin` is the worst observed value divided by its
/// tolerance (≤ 1 passes) unless stated otherwise in `detail`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub tool: String,
    pub version: String,
    pub args: VerifyArgs,
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

fn gaussian(rng: &mut impl Rng, n: usize, p: usize) -> Dataset {
    let mut draw = || <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut *rng);
    let x = DMatrix::from_fn(n, p, |_, _| draw());
    let y = DVector::from_fn(n, |_, _| draw());
    Dataset { x, y }
}

struct Tally {
    name: &'static str,
    trials: usize,
    failures: usize,
    margin: f64,
    detail: String,
}

impl Tally {
    fn new(name: &'static str, detail: &str) -> Self {
        Tally { name, trials: 0, failures: 0, margin: 0.0, detail: detail.into() }
    }

    /// Records one trial with ratio `observed / tolerance`.
    fn record(&mut self, ratio: f64) {
        self.trials += 1;
        let r = if ratio.is_nan() { f64::INFINITY } else { ratio };
        if r > 1.0 {
            self.failures += 1;
        }
        self.margin = self.margin.max(r);
    }

    fn finish(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name.into(),
            passed: self.failures == 0 && self.trials > 0,
            trials: self.trials,
            failures: self.failures,
            margin: self.margin,
            detail: self.detail,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

const ATTACKS: [NormKind; 2] = [NormKind::L2, NormKind::Linf];

/// Runs every property `trials` times per attack norm.
pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyReport> {
    let opts = SolverOptions::default();
    let mut rng = stream(args.seed, Purpose::Probe);
    let mut dual = Tally::new("dual-form equals brute-force attack", "relative gap / 1e-9");
    let mut bracket = Tally::new("singular-value bracket contains n·δ̄", "violation indicator");
    let mut transition = Tally::new("interpolation transition at δ̄", "train mse at 0.9δ̄ / 1e-6, or 1e-6 / train mse at 1.1δ̄");
    let mut zero = Tally::new("zero solution above the zero threshold", "‖β̂‖ / 1e-6 above, 1e-6 / ‖β̂‖ below");
    let mut cert = Tally::new("certified optimality of adversarial fits", "certificate / 1e-6, or a perturbation beating the fit");
    let mut ridge = Tally::new("ridge approaches min-ℓ2 interpolator", "relative distance / 1e-4");
    let mut robust = Tally::new("column-bounded worst case attains closed form", "relative gap / 1e-9");
    let mut pivot = Tally::new("δ* invariant to noise scale", "relative change / 1e-12");

    for t in 0..args.trials {
        for attack in ATTACKS {
            // Closed form against the constructed maximizer plus samples.
            let (n, p) = (rng.random_range(1..=5), rng.random_range(1..=6));
            let d = gaussian(&mut rng, n, p);
            let beta = gaussian(&mut rng, p, 1).x.column(0).into_owned();
            let cfg = AdvConfig::new(rng.random_range(0.01..2.0), attack)?;
            let closed = adv_risk(&beta, &d, &cfg);
            let brute = adv_risk_sampled(&beta, &d, &cfg, 64, derive_seed(args.seed, t as u64))?;
            dual.record(rel(closed, brute) / 1e-9);

            // Bracket on a wide random design.
            let (n, p) = (rng.random_range(3..=12), rng.random_range(13..=40));
            let d = gaussian(&mut rng, n, p);
            let db = theory::delta_bar(&d, attack)?;
            let (lo, hi) = theory::delta_bar_bounds(&d, attack)?;
            let nd = n as f64 * db;
            bracket.record(if lo <= nd * (1.0 + 1e-9) && nd <= hi * (1.0 + 1e-9) { 0.0 } else { 2.0 });

            // Transition and certification on a moderately wide design.
            let d = gaussian(&mut rng, 15, 40);
            let db = theory::delta_bar(&d, attack)? * args.delta_bar_scale;
            let below = solve_adv(&d, &AdvConfig::new(0.9 * db, attack)?, &opts)?;
            let above = solve_adv(&d, &AdvConfig::new(1.1 * db, attack)?, &opts)?;
            let mse_below = d.mse(&below.coefficients());
            let mse_above = d.mse(&above.coefficients());
            transition.record((mse_below / 1e-6).max(1e-6 / mse_above));
            for (fit, delta) in [(&below, 0.9 * db), (&above, 1.1 * db)] {
                let cfg = AdvConfig::new(delta, attack)?;
                let b = fit.coefficients();
                let f0 = adv_risk(&b, &d, &cfg);
                let mut beaten = false;
                for _ in 0..20 {
                    let dir = gaussian(&mut rng, d.p(), 1).x.column(0).into_owned();
                    let step = 1e-4 * (1.0 + b.norm()) * rng.random::<f64>();
                    if adv_risk(&(&b + dir * step), &d, &cfg) < f0 * (1.0 - 1e-12) - 1e-15 {
                        beaten = true;
                    }
                }
                let ok = fit.converged && !beaten;
                cert.record(if ok { fit.certificate_residual / 1e-6 } else { f64::INFINITY });
            }

            // Zero threshold.
            let d = gaussian(&mut rng, 8, 12);
            let zt = theory::zero_threshold(&d, attack);
            let hi_fit = solve_adv(&d, &AdvConfig::new(1.05 * zt, attack)?, &opts)?;
            let lo_fit = solve_adv(&d, &AdvConfig::new(0.95 * zt, attack)?, &opts)?;
            let reg = attack.dual();
            zero.record((norm(&hi_fit.coefficients(), reg) / 1e-6).max(1e-6 / norm(&lo_fit.coefficients(), reg)));
        }

        // Ridge limit.
        let d = gaussian(&mut rng, 10, 25);
        let r = solve_ridge(&d, 1e-8)?.coefficients();
        let m = min_norm_interpolator(&d, NormKind::L2)?.coefficients();
        ridge.record((&r - &m).norm() / m.norm() / 1e-4);

        // Column-bounded robust regression.
        let d = gaussian(&mut rng, 6, 4);
        let beta = gaussian(&mut rng, 4, 1).x.column(0).into_owned();
        let delta = rng.random_range(0.01..2.0);
        let w = colset_worst_disturbance(&beta, &d, delta);
        robust.record(rel(robust_objective(&beta, &d, &w), robust_colset_worst_value(&beta, &d, delta)) / 1e-9);

        // Pivotality of δ*.
        let d = gaussian(&mut rng, 20, 40);
        let a = theory::delta_star(&d.x, &d.y)?;
        let b = theory::delta_star(&d.x, &(&d.y * 10.0))?;
        pivot.record(rel(a, b) / 1e-12);
    }

    let checks: Vec<CheckOutcome> = [dual, bracket, transition, zero, cert, ridge, robust, pivot]
        .into_iter()
        .map(Tally::finish)
        .collect();
    Ok(VerifyReport {
        tool: "advreg".into(),
        version: TOOL_VERSION.into(),
        args: *args,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
