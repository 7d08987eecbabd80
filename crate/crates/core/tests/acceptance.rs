//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.
//!
//! Reference values are computed here independently of the library (explicit
//! attack constructions, pseudo-inverses, dual feasibility checks) wherever the
//! library would otherwise be checked against itself.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use advreg::datagen::{gen_gaussian, ScenarioKind, ScenarioSpec};
use advreg::experiments::{cmd_sweep, cmd_threshold_curve, load_problem, Method, SweepArgs, ThresholdCurveArgs};
use advreg::objective::{
    adv_loss_general, colset_worst_disturbance, loss_value, robust_colset_worst_value, robust_objective,
    rowset_worst_value, sampled_attack_risk,
};
use advreg::solvers::{
    basis_pursuit, lasso_kkt_violation, lasso_objective, min_norm_interpolator, optimality_residual, solve_adv,
    solve_dual_certificate, solve_lasso, solve_ridge,
};
use advreg::theory::{
    delta_bar, delta_bar_bounds, delta_star, lasso_bound_rhs, lasso_lambda_star, prediction_bound_rhs,
    shrinkage_equiv_check, zero_threshold,
};
use advreg::{adv_risk, AdvConfig, Dataset, FitResult, GeneralLossKind, NormKind, SolverOptions};

const ATTACKS: [NormKind; 2] = [NormKind::L2, NormKind::Linf];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Outcome { passed, detail }
    }
}

enum Objective {
    Adv(AdvConfig),
    Lasso(f64),
}

struct Recorded {
    data: Dataset,
    objective: Objective,
    fit: FitResult,
}

/// Every fit produced by the other criteria, re-examined by the certification criterion.
#[derive(Default)]
struct Fits(Vec<Recorded>);

impl Fits {
    fn adv(&mut self, d: &Dataset, cfg: AdvConfig, fit: &FitResult) {
        self.0.push(Recorded { data: d.clone(), objective: Objective::Adv(cfg), fit: fit.clone() });
    }

    fn lasso(&mut self, d: &Dataset, lambda: f64, fit: &FitResult) {
        self.0.push(Recorded { data: d.clone(), objective: Objective::Lasso(lambda), fit: fit.clone() });
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(r)
}

fn normal_matrix(r: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| normal(r))
}

fn normal_vector(r: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(r))
}

/// Dual of the attack norm, written out explicitly.
fn reg_norm(beta: &DVector<f64>, attack: NormKind) -> f64 {
    match attack {
        NormKind::L2 => beta.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Linf => beta.iter().map(|v| v.abs()).sum(),
        NormKind::L1 => beta.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

fn attack_norm(v: &DVector<f64>, attack: NormKind) -> f64 {
    match attack {
        NormKind::L2 => v.norm(),
        NormKind::Linf => v.amax(),
        NormKind::L1 => v.lp_norm(1),
    }
}

/// Unit attack-norm vector maximizing `zᵀβ`.
fn aligned_unit(beta: &DVector<f64>, attack: NormKind) -> DVector<f64> {
    match attack {
        NormKind::L2 => {
            let nb = beta.norm();
            if nb == 0.0 {
                DVector::zeros(beta.len())
            } else {
                beta / nb
            }
        }
        _ => beta.map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 }),
    }
}

fn random_ball(r: &mut ChaCha8Rng, p: usize, attack: NormKind, radius: f64) -> DVector<f64> {
    match attack {
        NormKind::L2 => {
            let g = normal_vector(r, p);
            let u: f64 = r.random();
            &g * (radius * u.powf(1.0 / p as f64) / g.norm())
        }
        _ => DVector::from_fn(p, |_, _| radius * (2.0 * r.random::<f64>() - 1.0)),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn gaussian(n: usize, p: usize, seed: u64, test_size: usize) -> advreg::datagen::LabeledSplit {
    let mut spec = ScenarioSpec::new(ScenarioKind::Gaussian, n, p, seed);
    spec.test_size = test_size;
    gen_gaussian(&spec).expect("gaussian scenario")
}

/// Minimum-ℓ2 interpolator `Xᵀ(XXᵀ)⁻¹y`.
fn pinv_interpolator(d: &Dataset) -> DVector<f64> {
    let k = &d.x * d.x.transpose();
    let a = k.lu().solve(&d.y).expect("full row rank");
    d.x.tr_mul(&a)
}

/// Checks a claimed minimum-ℓ1 interpolator through weak duality with a dual
/// vector: `Xβ = y`, `‖Xᵀα‖_∞ ≤ 1` and `‖β‖₁ = αᵀy`. Returns the duality gap.
fn l1_optimality_gap(d: &Dataset, beta: &DVector<f64>) -> f64 {
    let alpha = solve_dual_certificate(d, NormKind::Linf).expect("dual").alpha_vec();
    let feas = d.x.tr_mul(&alpha).amax();
    let interp = (&d.x * beta - &d.y).amax() / d.y.amax();
    let gap = rel(beta.lp_norm(1), alpha.dot(&d.y));
    gap.max((feas - 1.0).max(0.0)).max(interp)
}

fn loss_kinds() -> [GeneralLossKind; 4] {
    [
        GeneralLossKind::SquaredRegression,
        GeneralLossKind::AbsoluteRegression,
        GeneralLossKind::Hinge,
        GeneralLossKind::Logistic,
    ]
}

fn dual_form_equivalence() -> Outcome {
    let mut worst_rel = 0.0f64;
    let mut sampled_excess = 0.0f64;
    let mut failures = 0;
    for inst in 0..1000u64 {
        let mut r = rng(1000 + inst);
        let n = r.random_range(1..=5);
        let p = r.random_range(1..=6);
        let attack = ATTACKS[(inst % 2) as usize];
        let kind = loss_kinds()[((inst / 2) % 4) as usize];
        let x = normal_matrix(&mut r, n, p);
        let beta = DVector::from_fn(p, |_, _| if r.random::<f64>() < 0.2 { 0.0 } else { normal(&mut r) });
        let delta = r.random_range(0.01..1.0);
        let y: Vec<f64> = (0..n)
            .map(|_| if kind.is_classification() { if r.random::<bool>() { 1.0 } else { -1.0 } } else { normal(&mut r) })
            .collect();
        let cfg = AdvConfig::new(delta, attack).unwrap();
        let margin = delta * reg_norm(&beta, attack);
        let g = aligned_unit(&beta, attack) * delta;
        let mut closed_total = 0.0;
        for i in 0..n {
            let xi = x.row(i).transpose();
            let inner = xi.dot(&beta);
            let closed = adv_loss_general(inner, y[i], margin, kind).unwrap();
            closed_total += closed;
            // Constructed maximizer: push the prediction away from the target.
            let s = if kind.is_classification() { -y[i] } else if y[i] - inner < 0.0 { 1.0 } else { -1.0 };
            let dx = &g * s;
            debug_assert!(attack_norm(&dx, attack) <= delta * (1.0 + 1e-12));
            let brute = loss_value((&xi + &dx).dot(&beta), y[i], kind).unwrap();
            let e = rel(closed, brute);
            worst_rel = worst_rel.max(e);
            if e > 1e-9 {
                failures += 1;
            }
            for _ in 0..50 {
                let dx = random_ball(&mut r, p, attack, delta);
                let v = loss_value((&xi + dx).dot(&beta), y[i], kind).unwrap();
                let excess = (v - closed) / closed.abs().max(1e-300);
                sampled_excess = sampled_excess.max(excess);
                if v > closed * (1.0 + 1e-12) + 1e-15 {
                    failures += 1;
                }
            }
        }
        if kind == GeneralLossKind::SquaredRegression {
            let d = Dataset::new(x.clone(), DVector::from_vec(y.clone())).unwrap();
            let lib = adv_risk(&beta, &d, &cfg);
            let e = rel(lib, closed_total / n as f64);
            worst_rel = worst_rel.max(e);
            let sampled = sampled_attack_risk(&beta, &d, &cfg, 20, inst, false).unwrap();
            if e > 1e-9 || sampled > lib * (1.0 + 1e-12) + 1e-15 {
                failures += 1;
            }
        }
    }
    Outcome::new(
        failures == 0,
        format!("1000 instances, worst relative gap {worst_rel:.1e}, max sampled excess {sampled_excess:.1e}, {failures} failures"),
    )
}

fn interpolation_transition(fits: &mut Fits) -> Outcome {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let mut worst_norm_gap = 0.0f64;
    for seed in 0..20u64 {
        let d = gaussian(60, 200, seed, 1).train;
        for attack in ATTACKS {
            let db = delta_bar(&d, attack).unwrap();
            let mn = match attack {
                NormKind::L2 => pinv_interpolator(&d),
                _ => {
                    let b = basis_pursuit(&d, &opts).unwrap().coefficients();
                    let gap = l1_optimality_gap(&d, &b);
                    if gap > 1e-8 {
                        failures.push(format!("seed {seed}: min-l1 interpolator gap {gap:.1e}"));
                    }
                    b
                }
            };
            let mn_norm = reg_norm(&mn, attack);
            let below = AdvConfig::new(0.9 * db, attack).unwrap();
            let above = AdvConfig::new(1.1 * db, attack).unwrap();
            let lo = solve_adv(&d, &below, &opts).unwrap();
            let hi = solve_adv(&d, &above, &opts).unwrap();
            fits.adv(&d, below, &lo);
            fits.adv(&d, above, &hi);
            let blo = lo.coefficients();
            let mse_lo = d.mse(&blo);
            let mse_hi = d.mse(&hi.coefficients());
            let ng = rel(reg_norm(&blo, attack), mn_norm);
            worst_norm_gap = worst_norm_gap.max(ng);
            if !lo.converged || !hi.converged {
                failures.push(format!("seed {seed} {}: unconverged", attack.name()));
            }
            if mse_lo > 1e-6 || ng > 1e-4 {
                failures.push(format!("seed {seed} {}: 0.9δ̄ mse {mse_lo:.1e} norm gap {ng:.1e}", attack.name()));
            }
            if mse_hi <= 1e-6 {
                failures.push(format!("seed {seed} {}: 1.1δ̄ mse {mse_hi:.1e}", attack.name()));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("20 seeds x 2 norms, worst norm gap {worst_norm_gap:.1e}; {}", failures.join("; ")),
    )
}

fn zero_solution_threshold(fits: &mut Fits) -> Outcome {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    for inst in 0..50u64 {
        let mut r = rng(3000 + inst);
        let n = r.random_range(5..=15);
        let p = r.random_range(5..=30);
        let x = normal_matrix(&mut r, n, p);
        let y = &x * normal_vector(&mut r, p) + normal_vector(&mut r, n);
        let d = Dataset::new(x, y).unwrap();
        for attack in ATTACKS {
            let oracle = attack_norm(&d.x.tr_mul(&d.y), attack) / d.y.lp_norm(1);
            let zt = zero_threshold(&d, attack);
            if rel(zt, oracle) > 1e-12 {
                failures.push(format!("inst {inst}: threshold {zt} vs {oracle}"));
            }
            for (f, want_zero) in [(0.95, false), (1.05, true)] {
                let cfg = AdvConfig::new(f * zt, attack).unwrap();
                let fit = solve_adv(&d, &cfg, &opts).unwrap();
                fits.adv(&d, cfg, &fit);
                let nb = reg_norm(&fit.coefficients(), attack);
                if !fit.converged || (nb <= 1e-6) != want_zero {
                    failures.push(format!("inst {inst} {} at {f}: norm {nb:.1e}", attack.name()));
                }
            }
        }
    }
    Outcome::new(failures.is_empty(), format!("50 instances x 2 norms; {}", failures.join("; ")))
}

fn delta_bar_bracket() -> Outcome {
    let mut failures = Vec::new();
    let mut tightest = f64::INFINITY;
    for inst in 0..100u64 {
        let mut r = rng(4000 + inst);
        let n = r.random_range(3..=20);
        let p = r.random_range(n..=4 * n);
        let scales = DVector::from_fn(p, |_, _| r.random_range(0.2..3.0));
        let x = DMatrix::from_fn(n, p, |_, j| scales[j] * normal(&mut r));
        let y = normal_vector(&mut r, n);
        let d = Dataset::new(x, y).unwrap();
        let sv = d.x.singular_values();
        let s1 = sv.max();
        let sn = sv.min();
        let sp = (p as f64).sqrt();
        for attack in ATTACKS {
            let (lo, hi) = match attack {
                NormKind::L2 => (sn, sp * s1),
                _ => (sn / sp, sp * s1),
            };
            let (llo, lhi) = delta_bar_bounds(&d, attack).unwrap();
            let ndb = n as f64 * delta_bar(&d, attack).unwrap();
            tightest = tightest.min((ndb / lo).min(hi / ndb));
            if rel(llo, lo) > 1e-10 || rel(lhi, hi) > 1e-10 {
                failures.push(format!("inst {inst}: library bracket differs"));
            }
            if ndb < lo * (1.0 - 1e-9) || ndb > hi * (1.0 + 1e-9) {
                failures.push(format!("inst {inst} {}: nδ̄ {ndb} outside [{lo}, {hi}]", attack.name()));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("100 instances x 2 norms, closest approach ratio {tightest:.3}; {}", failures.join("; ")),
    )
}

fn prediction_bounds(fits: &mut Fits) -> Outcome {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let (mut adv_ratio, mut lasso_ratio) = (0.0f64, 0.0f64);
    for trial in 0..100u64 {
        let mut spec = ScenarioSpec::new(ScenarioKind::Gaussian, 100, 200, 5000 + trial);
        spec.sparsity = Some(5);
        spec.test_size = 1;
        let split = gen_gaussian(&spec).unwrap();
        let truth = split.truth.unwrap();
        let d = split.train;
        let bstar = DVector::from_vec(truth.coefficients);
        let eps = DVector::from_vec(truth.train_noise);
        let n = d.n() as f64;
        let xe = d.x.tr_mul(&eps).amax();
        let ds = 3.0 * xe / eps.lp_norm(1);
        let ls = 3.0 * xe / n;
        if rel(ds, delta_star(&d.x, &eps).unwrap()) > 1e-12 || rel(ls, lasso_lambda_star(&d.x, &eps).unwrap()) > 1e-12 {
            failures.push(format!("trial {trial}: threshold formulas differ"));
        }
        let b1 = bstar.lp_norm(1);
        let pred_err = |b: &DVector<f64>| (&d.x * (b - &bstar)).norm_squared() / n;

        let delta = 1.05 * ds;
        let cfg = AdvConfig::new(delta, NormKind::Linf).unwrap();
        let fit = solve_adv(&d, &cfg, &opts).unwrap();
        fits.adv(&d, cfg, &fit);
        let rhs = 8.0 * delta * b1 * (eps.lp_norm(1) / n + 10.0 * delta * b1);
        if rel(rhs, prediction_bound_rhs(delta, b1, eps.lp_norm(1), d.n())) > 1e-12 {
            failures.push(format!("trial {trial}: bound formula differs"));
        }
        let lhs = pred_err(&fit.coefficients());
        adv_ratio = adv_ratio.max(lhs / rhs);
        if !fit.converged || lhs > rhs {
            failures.push(format!("trial {trial}: adversarial {lhs:.3e} > {rhs:.3e}"));
        }

        let lambda = 1.05 * ls;
        let lf = solve_lasso(&d, lambda, &opts).unwrap();
        fits.lasso(&d, lambda, &lf);
        let lrhs = 8.0 * lambda * b1;
        if rel(lrhs, lasso_bound_rhs(lambda, b1)) > 1e-12 {
            failures.push(format!("trial {trial}: lasso bound formula differs"));
        }
        let llhs = pred_err(&lf.coefficients());
        lasso_ratio = lasso_ratio.max(llhs / lrhs);
        if !lf.converged || llhs > lrhs {
            failures.push(format!("trial {trial}: lasso {llhs:.3e} > {lrhs:.3e}"));
        }

        let eps10 = &eps * 10.0;
        let piv = rel(delta_star(&d.x, &eps10).unwrap(), delta_star(&d.x, &eps).unwrap());
        let lam = lasso_lambda_star(&d.x, &eps10).unwrap() / lasso_lambda_star(&d.x, &eps).unwrap();
        if piv >= 1e-12 || rel(lam, 10.0) > 1e-12 {
            failures.push(format!("trial {trial}: pivotality δ* change {piv:.1e}, λ* ratio {lam}"));
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "100 trials, max LHS/RHS adversarial {adv_ratio:.3}, lasso {lasso_ratio:.3}; {}",
            failures.join("; ")
        ),
    )
}

/// Gap `√A − √B` between adversarial and plain test MSE, with its
/// delta-method standard error.
fn gap_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let m = a.len() as f64;
    let ma = a.iter().sum::<f64>() / m;
    let mb = b.iter().sum::<f64>() / m;
    let (ga, gb) = (0.5 / ma.sqrt(), -0.5 / mb.sqrt());
    let var = a
        .iter()
        .zip(b)
        .map(|(ai, bi)| {
            let v = ga * (ai - ma) + gb * (bi - mb);
            v * v
        })
        .sum::<f64>()
        / (m - 1.0);
    (ma.sqrt() - mb.sqrt(), (var / m).sqrt())
}

fn robustness_gap() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let split = gaussian(60, 200, 6000 + seed, 10_000);
        let (train, test) = (&split.train, &split.test);
        let mean_norm = |k: NormKind| {
            (0..test.n()).map(|i| {
                let xi = test.x.row(i).transpose();
                match k {
                    NormKind::L2 => xi.norm(),
                    _ => xi.lp_norm(1),
                }
            })
            .sum::<f64>()
                / test.n() as f64
        };
        // (train norm, test attack, √p factor)
        for (train_attack, test_attack, mismatched) in
            [(NormKind::L2, NormKind::L2, false), (NormKind::Linf, NormKind::Linf, false), (NormKind::L2, NormKind::Linf, true)]
        {
            let beta = match train_attack {
                NormKind::L2 => pinv_interpolator(train),
                _ => min_norm_interpolator(train, NormKind::Linf).unwrap().coefficients(),
            };
            let db = delta_bar(train, train_attack).unwrap();
            let risk = adv_risk(&beta, train, &AdvConfig::new(db, train_attack).unwrap());
            let delta_test = 0.01 * mean_norm(test_attack);
            let margin = delta_test * reg_norm(&beta, test_attack);
            let r = test.residuals(&beta);
            let a: Vec<f64> = r.iter().map(|ri| (ri.abs() + margin).powi(2)).collect();
            let b: Vec<f64> = r.iter().map(|ri| ri * ri).collect();
            let (gap, se) = gap_with_se(&a, &b);
            let factor = if mismatched { (train.p() as f64).sqrt() } else { 1.0 };
            let bound = delta_test / db * risk.sqrt() * factor;
            worst = worst.max((gap - bound) / se.max(f64::MIN_POSITIVE));
            if gap > bound + 3.0 * se {
                failures.push(format!(
                    "seed {seed} {}→{}: gap {gap:.4} > {bound:.4} + 3·{se:.1e}",
                    train_attack.name(),
                    test_attack.name()
                ));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!("20 seeds x (l2, linf, l2→linf), max (gap−bound)/SE {worst:.2}; {}", failures.join("; ")),
    )
}

fn limit_convergence(fits: &mut Fits) -> Outcome {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let mut ridge_worst = 0.0f64;
    for inst in 0..20u64 {
        let mut r = rng(7000 + inst);
        let x = normal_matrix(&mut r, 30, 80);
        let y = normal_vector(&mut r, 30);
        let d = Dataset::new(x, y).unwrap();
        let ridge = solve_ridge(&d, 1e-8).unwrap().coefficients();
        let mn = pinv_interpolator(&d);
        let e = (&ridge - &mn).norm() / mn.norm();
        ridge_worst = ridge_worst.max(e);
        if e > 1e-4 {
            failures.push(format!("ridge inst {inst}: {e:.1e}"));
        }
    }
    let mut unique = 0;
    let mut final_gap = 0.0f64;
    for inst in 0..12u64 {
        let mut r = rng(7100 + inst);
        let x = normal_matrix(&mut r, 20, 50);
        let y = &x * normal_vector(&mut r, 50) + normal_vector(&mut r, 20) * 0.5;
        let d = Dataset::new(x, y).unwrap();
        let bp = basis_pursuit(&d, &opts).unwrap().coefficients();
        if l1_optimality_gap(&d, &bp) > 1e-8 {
            failures.push(format!("lasso inst {inst}: basis pursuit not certified"));
            continue;
        }
        // Sufficient for uniqueness: independent support columns and a
        // strictly feasible dual off the support.
        let alpha = solve_dual_certificate(&d, NormKind::Linf).unwrap().alpha_vec();
        let corr = d.x.tr_mul(&alpha);
        let cut = 1e-9 * bp.amax();
        let support: Vec<usize> = (0..d.p()).filter(|&j| bp[j].abs() > cut).collect();
        let xs = d.x.select_columns(&support);
        let rank = xs.singular_values().iter().filter(|&&s| s > 1e-10).count();
        let strict = (0..d.p()).filter(|j| !support.contains(j)).all(|j| corr[j].abs() < 1.0 - 1e-7);
        if rank < support.len() || !strict {
            continue;
        }
        unique += 1;
        let target = bp.lp_norm(1);
        let lmax = 2.0 * d.x.tr_mul(&d.y).amax() / d.n() as f64;
        let mut prev = 0.0;
        for k in 0..31 {
            let lambda = lmax * 10f64.powf(-6.0 * k as f64 / 30.0);
            let fit = solve_lasso(&d, lambda, &opts).unwrap();
            fits.lasso(&d, lambda, &fit);
            let l1 = fit.coefficients().lp_norm(1);
            if l1 < prev * (1.0 - 1e-9) || l1 > target * (1.0 + 1e-9) {
                failures.push(format!("lasso inst {inst} step {k}: ‖β‖₁ {l1} after {prev}, limit {target}"));
            }
            prev = l1;
        }
        let g = (target - prev) / target;
        final_gap = final_gap.max(g);
        if g > 1e-4 {
            failures.push(format!("lasso inst {inst}: final gap {g:.1e}"));
        }
    }
    if unique < 5 {
        failures.push(format!("only {unique} instances with a unique basis-pursuit solution"));
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "ridge worst {ridge_worst:.1e} over 20; lasso paths on {unique} unique instances, final gap {final_gap:.1e}; {}",
            failures.join("; ")
        ),
    )
}

fn robust_regression() -> Outcome {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for inst in 0..500u64 {
        let mut r = rng(8000 + inst);
        let n = r.random_range(2..=8);
        let p = r.random_range(1..=6);
        let x = normal_matrix(&mut r, n, p);
        let y = normal_vector(&mut r, n);
        let d = Dataset::new(x, y).unwrap();
        let beta = DVector::from_fn(p, |_, _| if r.random::<f64>() < 0.2 { 0.0 } else { normal(&mut r) });
        let delta = r.random_range(0.01..2.0);
        let res = d.residuals(&beta);

        // Column-bounded disturbances.
        let closed = res.norm() + delta * beta.lp_norm(1);
        let u = if res.norm() > 0.0 { &res / res.norm() } else { DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }) };
        let mut dist = DMatrix::zeros(n, p);
        for j in 0..p {
            if beta[j] != 0.0 {
                dist.set_column(j, &(&u * (-delta * beta[j].signum())));
            }
        }
        let lib_dist = colset_worst_disturbance(&beta, &d, delta);
        let cols_ok = (0..p).all(|j| lib_dist.column(j).norm() <= delta * (1.0 + 1e-12));
        let e = rel(robust_objective(&beta, &d, &dist), closed)
            .max(rel(robust_objective(&beta, &d, &lib_dist), closed))
            .max(rel(robust_colset_worst_value(&beta, &d, delta), closed));
        worst = worst.max(e);
        let mut sampled_ok = true;
        for _ in 0..10 {
            let mut m = normal_matrix(&mut r, n, p);
            for j in 0..p {
                let c = m.column(j).norm();
                let s = delta * r.random::<f64>() / c;
                m.column_mut(j).scale_mut(s);
            }
            sampled_ok &= robust_objective(&beta, &d, &m) <= closed * (1.0 + 1e-12);
        }
        if e > 1e-9 || !cols_ok || !sampled_ok {
            failures += 1;
        }

        // Row-bounded disturbances.
        let attack = ATTACKS[(inst % 2) as usize];
        let cfg = AdvConfig::new(delta, attack).unwrap();
        let margin = delta * reg_norm(&beta, attack);
        let closed = res.iter().map(|ri| (ri.abs() + margin).powi(2)).sum::<f64>().sqrt();
        let g = aligned_unit(&beta, attack) * delta;
        let mut rows = DMatrix::zeros(n, p);
        for i in 0..n {
            let s = if res[i] < 0.0 { 1.0 } else { -1.0 };
            rows.set_row(i, &(&g * s).transpose());
        }
        let e = rel(robust_objective(&beta, &d, &rows), closed)
            .max(rel(rowset_worst_value(&beta, &d, &cfg), closed))
            .max(rel(adv_risk(&beta, &d, &cfg) * n as f64, closed * closed));
        worst = worst.max(e);
        if e > 1e-9 {
            failures += 1;
        }
    }
    Outcome::new(
        failures == 0,
        format!("500 instances each, worst relative gap {worst:.1e}, {failures} failures"),
    )
}

fn shrinkage_equivalence(fits: &mut Fits) -> Outcome {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for inst in 0..50u64 {
        let mut r = rng(9000 + inst);
        let n = r.random_range(10..=30);
        let p = r.random_range(5..=40);
        let mut x = normal_matrix(&mut r, n, p);
        for mut c in x.column_iter_mut() {
            let m = c.mean();
            c.add_scalar_mut(-m);
        }
        let bstar = normal_vector(&mut r, p) * 0.1;
        let y = (&x * &bstar + normal_vector(&mut r, n) * 0.3).add_scalar(5.0);
        if y.min() <= 0.0 {
            failures.push(format!("inst {inst}: nonpositive response"));
            continue;
        }
        let d = Dataset::new(x, y).unwrap();
        let zt = zero_threshold(&d, NormKind::Linf);
        let mut checked = false;
        for f in [0.5, 0.7, 0.9] {
            let cfg = AdvConfig::new(f * zt, NormKind::Linf).unwrap();
            let fit = solve_adv(&d, &cfg, &opts).unwrap();
            fits.adv(&d, cfg, &fit);
            let rep = shrinkage_equiv_check(&fit.coefficients(), &d, &cfg).unwrap();
            if !rep.conditions_met {
                continue;
            }
            checked = true;
            worst = worst.max(rep.modified_objective_residual);
            if !fit.converged || rep.modified_objective_residual > 1e-6 {
                failures.push(format!("inst {inst}: residual {:.1e}", rep.modified_objective_residual));
            }
            break;
        }
        if !checked {
            failures.push(format!("inst {inst}: norm condition never met"));
        }
    }
    Outcome::new(failures.is_empty(), format!("50 instances, worst residual {worst:.1e}; {}", failures.join("; ")))
}

fn solver_certification(fits: &Fits) -> Outcome {
    let mut failures = Vec::new();
    let mut converged = 0;
    let mut worst_cert = 0.0f64;
    for (k, rec) in fits.0.iter().enumerate() {
        if !rec.fit.converged {
            continue;
        }
        converged += 1;
        let beta = rec.fit.coefficients();
        let d = &rec.data;
        let (obj, cert): (Box<dyn Fn(&DVector<f64>) -> f64>, f64) = match rec.objective {
            Objective::Adv(cfg) => (Box::new(move |b| adv_risk(b, d, &cfg)), optimality_residual(&beta, d, &cfg).unwrap()),
            Objective::Lasso(l) => (Box::new(move |b| lasso_objective(b, d, l)), lasso_kkt_violation(&beta, d, l)),
        };
        worst_cert = worst_cert.max(cert).max(rec.fit.certificate_residual);
        if cert > 1e-6 || rec.fit.certificate_residual > 1e-6 {
            failures.push(format!("fit {k}: certificate {cert:.1e}"));
        }
        let base = obj(&beta);
        let scale = beta.amax().max(1e-3);
        let mut r = rng(10_000 + k as u64);
        for t in 0..100 {
            let step = scale * 10f64.powi(-(t % 4) - 2);
            let dir = if t % 2 == 0 {
                normal_vector(&mut r, beta.len())
            } else {
                let mut e = DVector::zeros(beta.len());
                e[r.random_range(0..beta.len())] = if r.random::<bool>() { 1.0 } else { -1.0 };
                e
            };
            let v = obj(&(&beta + dir * step));
            if v < base - 1e-12 * base.abs().max(1e-12) {
                failures.push(format!("fit {k}: perturbation improves {base:.6e} to {v:.6e}"));
                break;
            }
        }
    }
    Outcome::new(
        failures.is_empty() && converged > 0,
        format!(
            "{converged} converged fits of {}, worst certificate {worst_cert:.1e}; {}",
            fits.0.len(),
            failures.iter().take(5).cloned().collect::<Vec<_>>().join("; ")
        ),
    )
}

fn end_to_end_figures(fits: &mut Fits) -> Outcome {
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    for attack in ATTACKS {
        let mut spec = ScenarioSpec::new(ScenarioKind::Gaussian, 60, 200, 11);
        spec.test_size = 1000;
        let args = SweepArgs::new(spec.clone(), Method::Adv, attack);
        let table = cmd_sweep(&args).unwrap();
        let ok = table.transition_within_one_step(1e-6);
        notes.push(format!(
            "{} sweep: {} points, last interpolating {:.4e}, δ̄ {:.4e}",
            attack.name(),
            table.rows.len(),
            table.last_interpolating(1e-6).unwrap_or(f64::NAN),
            table.metadata.delta_bar.unwrap_or(f64::NAN)
        ));
        if ok != Some(true) || !table.all_converged() {
            failures.push(format!("{} sweep transition {ok:?}, converged {}", attack.name(), table.all_converged()));
        }
        let train = load_problem(&spec).unwrap().train;
        for row in table.rows.iter().step_by(8) {
            let cfg = AdvConfig::new(row.knob, attack).unwrap();
            let beta = DVector::from_vec(row.coefficients.clone());
            let fit = FitResult {
                objective_value: adv_risk(&beta, &train, &cfg),
                beta: row.coefficients.clone(),
                certificate_residual: row.certificate_residual,
                iterations_used: 0,
                converged: row.converged,
            };
            fits.adv(&train, cfg, &fit);
        }

        let curve = cmd_threshold_curve(&ThresholdCurveArgs {
            scenario: ScenarioSpec { test_size: 1, ..ScenarioSpec::new(ScenarioKind::Gaussian, 60, 80, 12) },
            attack,
            ps: vec![80, 120, 200, 400],
            repetitions: 5,
        })
        .unwrap();
        let values: Vec<String> = curve.rows.iter().map(|r| format!("{:.4}", r.delta_bar)).collect();
        notes.push(format!("{} δ̄(p) medians [{}]", attack.name(), values.join(", ")));
        if !curve.nondecreasing() {
            failures.push(format!("{} threshold curve not nondecreasing", attack.name()));
        }
    }
    Outcome::new(failures.is_empty(), format!("{}; {}", notes.join("; "), failures.join("; ")))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut fits = Fits::default();
    let mut results: Vec<(&str, Outcome, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut(&mut Fits) -> Outcome, fits: &mut Fits| {
        let t = Instant::now();
        let mut out = f(fits);
        let secs = t.elapsed().as_secs_f64();
        let limit = match &name[..2] {
            "01" => 30.0,
            "02" => 300.0,
            _ => f64::INFINITY,
        };
        if secs >= limit {
            out.passed = false;
            out.detail.push_str(&format!("; runtime over {limit}s"));
        }
        println!("{} {name} ({secs:.1}s): {}", if out.passed { "PASS" } else { "FAIL" }, out.detail);
        results.push((name, out, secs));
    };
    run("01 dual-form equivalence", &mut |_| dual_form_equivalence(), &mut fits);
    run("02 interpolation transition", &mut interpolation_transition, &mut fits);
    run("03 zero-solution threshold", &mut zero_solution_threshold, &mut fits);
    run("04 interpolation threshold bracket", &mut |_| delta_bar_bracket(), &mut fits);
    run("05 prediction bounds and pivotality", &mut prediction_bounds, &mut fits);
    run("06 robustness gap", &mut |_| robustness_gap(), &mut fits);
    run("07 limit convergence", &mut limit_convergence, &mut fits);
    run("08 robust-regression equivalences", &mut |_| robust_regression(), &mut fits);
    run("09 shrinkage equivalence", &mut shrinkage_equivalence, &mut fits);
    run("11 end-to-end figures", &mut end_to_end_figures, &mut fits);
    run("10 solver certification", &mut |f| solver_certification(f), &mut fits);
    let total = start.elapsed().as_secs_f64();
    let time_ok = total < 20.0 * 60.0;
    println!("{} total runtime {total:.0}s (limit 1200s)", if time_ok { "PASS" } else { "FAIL" });
    let failed: Vec<&str> = results.iter().filter(|(_, o, _)| !o.passed).map(|(n, _, _)| *n).collect();
    if failed.is_empty() && time_ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
