//! Thresholds, bounds and radius-selection rules as pure functions.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AdvError, Result};
use crate::linalg::require_full_row_rank;
use crate::norms::{norm, sign0, Dataset, NormKind};
use crate::objective::AdvConfig;
use crate::rng::{stream, Purpose};
use crate::solvers::{box_least_squares, solve_dual_certificate};

/// Thresholds for one dataset and attack norm. The bracket fields bound
/// `delta_bar` itself (the singular-value bounds divided by `n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub delta_bar: f64,
    pub delta_bar_lower: f64,
    pub delta_bar_upper: f64,
    pub zero_threshold: f64,
    pub attack: NormKind,
}

/// Observed prediction error against a theoretical right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub delta_star: f64,
    pub bound_rhs: f64,
    pub lhs_observed: f64,
    pub holds: bool,
}

impl BoundReport {
    pub fn new(delta_star: f64, bound_rhs: f64, lhs_observed: f64) -> Self {
        BoundReport {
            delta_star,
            bound_rhs,
            lhs_observed,
            holds: lhs_observed <= bound_rhs,
        }
    }
}

/// Interpolation threshold `δ̄ = 1/(n‖α̂‖_∞)` with `α̂` the dual solution.
/// Infinite when `y = 0` (the zero interpolator is then always optimal).
pub fn delta_bar(d: &Dataset, attack: NormKind) -> Result<f64> {
    let cert = solve_dual_certificate(d, attack)?;
    let amax = cert.alpha_vec().amax();
    Ok(if amax == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (d.n() as f64 * amax)
    })
}

/// Bracket `(lower, upper)` on `n·δ̄` from the extreme singular values:
/// `σ_n/√p ≤ nδ̄ ≤ √p σ₁` for the ℓ∞ attack, `σ_n ≤ nδ̄ ≤ √p σ₁` for ℓ2.
pub fn delta_bar_bounds(d: &Dataset, attack: NormKind) -> Result<(f64, f64)> {
    let sv = require_full_row_rank(&d.x)?;
    let (s1, sn) = (sv[0], sv[d.n() - 1]);
    let sp = (d.p() as f64).sqrt();
    match attack {
        NormKind::Linf => Ok((sn / sp, sp * s1)),
        NormKind::L2 => Ok((sn, sp * s1)),
        other => Err(AdvError::UnsupportedAttack(other)),
    }
}

/// Smallest radius at which `β = 0` minimizes the adversarial risk:
/// `‖Xᵀy‖/‖y‖₁` in the attack norm; zero when `y = 0`.
pub fn zero_threshold(d: &Dataset, attack: NormKind) -> f64 {
    let y1 = d.y.lp_norm(1);
    if y1 == 0.0 {
        return 0.0;
    }
    norm(&d.x.tr_mul(&d.y), attack) / y1
}

/// Design `XP` with `P = Sᵀ(SSᵀ)⁻¹S`, whose dual problem defines the
/// interpolation threshold of the linear-map objective.
pub fn linmap_projected_design(raw: &Dataset, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.ncols() != raw.p() {
        return Err(AdvError::DimensionMismatch {
            expected: raw.p(),
            got: s.ncols(),
            context: "projection columns vs input dimension",
        });
    }
    let g = s * s.transpose();
    let ginv_s = g
        .cholesky()
        .ok_or(AdvError::Factorization("S Sᵀ not positive definite"))?
        .solve(s);
    Ok(&raw.x * s.transpose() * ginv_s)
}

/// `δ̄` for the objective `(1/n)Σ(|y_i − x_iᵀSᵀθ| + δ‖Sᵀθ‖_*)²`.
///
/// The dual of `min ‖Sᵀθ‖_* s.t. XSᵀθ = y` is `max αᵀy` over
/// `Xᵀα ∈ B + null(S)` with `B` the attack-norm unit ball. For ℓ2 this is
/// `‖PXᵀα‖₂ ≤ 1` with `P = Sᵀ(SSᵀ)⁻¹S`. For ℓ∞ it is the box LP
/// `‖Xᵀα − Nw‖_∞ ≤ 1` in `(α, w)`, with `N` a basis of `null(S)`.
pub fn delta_bar_linmap(raw: &Dataset, s: &DMatrix<f64>, attack: NormKind) -> Result<f64> {
    let xp = linmap_projected_design(raw, s)?;
    let z = &raw.x * s.transpose();
    let rank = crate::linalg::numerical_rank(&crate::linalg::singular_values(&z));
    if rank < raw.n() {
        return Err(AdvError::RankDeficient { rank, required: raw.n() });
    }
    let alpha = match attack {
        NormKind::L2 => crate::solvers::solve_dual_certificate_unchecked(&xp, &raw.y, attack)?,
        NormKind::Linf => {
            let nb = crate::linalg::null_basis(s);
            let (n, k) = (raw.n(), nb.ncols());
            let mut aug = DMatrix::zeros(n + k, raw.p());
            aug.rows_mut(0, n).copy_from(&raw.x);
            aug.rows_mut(n, k).copy_from(&(-nb.transpose()));
            let mut y = DVector::zeros(n + k);
            y.rows_mut(0, n).copy_from(&raw.y);
            let full = crate::solvers::solve_box_lp(&aug, &y)?.alpha;
            full.rows(0, n).into_owned()
        }
        other => return Err(AdvError::UnsupportedAttack(other)),
    };
    let amax = alpha.amax();
    Ok(if amax == 0.0 { f64::INFINITY } else { 1.0 / (raw.n() as f64 * amax) })
}

/// Smallest `δ` at which `θ = 0` minimizes the linear-map objective:
/// `min{‖g‖ : Sg = SXᵀy}/‖y‖₁` in the attack norm. Closed form `‖PXᵀy‖₂/‖y‖₁`
/// for ℓ2. For ℓ∞, `min_w ‖c + Nw‖_∞` with `c = Xᵀy` equals `1/τ*` for the box
/// LP `max τ s.t. ‖τc + Nw‖_∞ ≤ 1`.
pub fn zero_threshold_linmap(raw: &Dataset, s: &DMatrix<f64>, attack: NormKind) -> Result<f64> {
    let y1 = raw.y.lp_norm(1);
    if y1 == 0.0 {
        return Ok(0.0);
    }
    let xp = linmap_projected_design(raw, s)?;
    let g = xp.tr_mul(&raw.y);
    if g.amax() == 0.0 {
        return Ok(0.0);
    }
    match attack {
        NormKind::L2 => Ok(g.norm() / y1),
        NormKind::Linf => {
            let c = raw.x.tr_mul(&raw.y);
            let nb = crate::linalg::null_basis(s);
            let k = nb.ncols();
            let mut a = DMatrix::zeros(1 + k, raw.p());
            a.row_mut(0).copy_from(&c.transpose());
            a.rows_mut(1, k).copy_from(&nb.transpose());
            let mut e1 = DVector::zeros(1 + k);
            e1[0] = 1.0;
            let tau = crate::solvers::solve_box_lp(&a, &e1)?.alpha[0];
            if !(tau > 0.0) {
                return Err(AdvError::NonConvergence("zero-threshold LP returned a nonpositive scale".into()));
            }
            Ok(1.0 / (tau * y1))
        }
        other => Err(AdvError::UnsupportedAttack(other)),
    }
}

pub fn threshold_report(d: &Dataset, attack: NormKind) -> Result<ThresholdReport> {
    let db = delta_bar(d, attack)?;
    let (lo, hi) = delta_bar_bounds(d, attack)?;
    let nf = d.n() as f64;
    Ok(ThresholdReport {
        delta_bar: db,
        delta_bar_lower: lo / nf,
        delta_bar_upper: hi / nf,
        zero_threshold: zero_threshold(d, attack),
        attack,
    })
}

/// `δ* = 3‖Xᵀε‖_∞/‖ε‖₁`, the radius above which the ℓ∞ prediction bound holds.
pub fn delta_star(x: &DMatrix<f64>, eps: &DVector<f64>) -> Result<f64> {
    check_noise(x, eps)?;
    Ok(3.0 * x.tr_mul(eps).amax() / eps.lp_norm(1))
}

/// The matching Lasso level `3‖Xᵀε‖_∞/n`, which scales with the noise.
pub fn lasso_lambda_star(x: &DMatrix<f64>, eps: &DVector<f64>) -> Result<f64> {
    check_noise(x, eps)?;
    Ok(3.0 * x.tr_mul(eps).amax() / x.nrows() as f64)
}

fn check_noise(x: &DMatrix<f64>, eps: &DVector<f64>) -> Result<()> {
    if eps.len() != x.nrows() {
        return Err(AdvError::DimensionMismatch {
            expected: x.nrows(),
            got: eps.len(),
            context: "noise length vs design rows",
        });
    }
    if eps.amax() == 0.0 {
        return Err(AdvError::InvalidArgument("noise vector must be nonzero".into()));
    }
    Ok(())
}

/// `8δ‖β*‖₁(‖ε‖₁/n + 10δ‖β*‖₁)`.
pub fn prediction_bound_rhs(delta: f64, beta_star_l1: f64, eps_l1: f64, n: usize) -> f64 {
    8.0 * delta * beta_star_l1 * (eps_l1 / n as f64 + 10.0 * delta * beta_star_l1)
}

/// `8λ‖β*‖₁`.
pub fn lasso_bound_rhs(lambda: f64, beta_star_l1: f64) -> f64 {
    8.0 * lambda * beta_star_l1
}

/// `(δ_test/δ̄)·√R`, times `√p` when training and test attack norms differ.
pub fn robustness_gap_bound(risk_at_delta_bar: f64, delta_test: f64, delta_bar: f64, mismatched: bool, p: usize) -> Result<f64> {
    if !(delta_bar > 0.0) {
        return Err(AdvError::InvalidArgument(format!("delta_bar must be positive, got {delta_bar}")));
    }
    let base = delta_test / delta_bar * risk_at_delta_bar.max(0.0).sqrt();
    Ok(if mismatched { base * (p as f64).sqrt() } else { base })
}

/// `K·M·√(ln p / n)`.
pub fn pivotal_delta(n: usize, p: f64, m: f64, k: f64) -> Result<f64> {
    if n == 0 || !(p >= 2.0) || !(m > 0.0) || !(k > 0.0) {
        return Err(AdvError::InvalidArgument("pivotal radius needs n ≥ 1, p ≥ 2, M > 0, K > 0".into()));
    }
    Ok(k * m * (p.ln() / n as f64).sqrt())
}

pub const HEURISTIC_DELTA_C: f64 = 0.5;
pub const HEURISTIC_SQRT_LASSO_C: f64 = 0.1;

pub(crate) fn normal_probe(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = stream(seed, Purpose::Heuristic);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

/// `c‖Xᵀξ‖_∞/‖ξ‖₁` for a standard normal probe `ξ` drawn from `seed`.
pub fn heuristic_delta(x: &DMatrix<f64>, c: f64, seed: u64) -> f64 {
    heuristic_delta_with(x, c, &normal_probe(x.nrows(), seed))
}

/// [`heuristic_delta`] with an explicit probe vector.
pub fn heuristic_delta_with(x: &DMatrix<f64>, c: f64, xi: &DVector<f64>) -> f64 {
    let l1 = xi.lp_norm(1);
    if l1 == 0.0 {
        return 0.0;
    }
    c * x.tr_mul(xi).amax() / l1
}

/// `c‖Xᵀξ‖_∞/‖ξ‖₂` for the square-root Lasso.
pub fn sqrt_lasso_heuristic_lambda(x: &DMatrix<f64>, c: f64, seed: u64) -> f64 {
    let xi = normal_probe(x.nrows(), seed);
    let l2 = xi.norm();
    if l2 == 0.0 {
        return 0.0;
    }
    c * x.tr_mul(&xi).amax() / l2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageReport {
    /// `y > 0`, centered columns and the norm condition all hold.
    pub conditions_met: bool,
    /// The norm condition holds but with less than 10% slack.
    pub near_binding: bool,
    /// `‖β̂‖_*` divided by `min_i |y_i|/‖x_i‖`.
    pub norm_ratio: f64,
    pub modified_objective_residual: f64,
}

/// Checks the Lasso-type reformulation of ℓ∞/ℓ2 adversarial training around
/// `β̂`: computes the subgradient residual of
/// `(1/n)‖y − Xβ‖² + (δ‖β‖_* + sᵀy/n)²` with `s = sign(y − Xβ̂)`, which
/// reduces to `‖y‖₁/n` when the signs follow a positive `y`.
pub fn shrinkage_equiv_check(beta_hat: &DVector<f64>, d: &Dataset, cfg: &AdvConfig) -> Result<ShrinkageReport> {
    let reg = match cfg.attack {
        NormKind::L2 | NormKind::Linf => cfg.regularizer(),
        other => return Err(AdvError::UnsupportedAttack(other)),
    };
    if beta_hat.len() != d.p() {
        return Err(AdvError::DimensionMismatch {
            expected: d.p(),
            got: beta_hat.len(),
            context: "coefficient length vs features",
        });
    }
    let n = d.n();
    let nf = n as f64;
    let ones = DVector::from_element(n, 1.0);
    let centered = d.x.tr_mul(&ones).amax() <= 1e-8 * nf * d.x.amax();
    let positive = d.y.iter().all(|&v| v > 0.0);
    let limit = (0..n)
        .map(|i| {
            let xn = norm(&d.x.row(i).transpose(), cfg.attack);
            if xn == 0.0 {
                f64::INFINITY
            } else {
                d.y[i].abs() / xn
            }
        })
        .fold(f64::INFINITY, f64::min);
    let bnorm = norm(beta_hat, reg);
    let norm_ratio = if limit > 0.0 { bnorm / limit } else { f64::INFINITY };

    let r = d.residuals(beta_hat);
    let sy: f64 = r.iter().zip(d.y.iter()).map(|(ri, yi)| sign0(*ri) * yi).sum();
    let c = 2.0 * cfg.delta * (cfg.delta * bnorm + sy / nf);
    let mut a = d.x.tr_mul(&r) * (-2.0 / nf);
    let residual = match reg {
        NormKind::L1 => {
            let cut = 1e-9 * beta_hat.amax();
            let mut th = DVector::zeros(d.p());
            for j in 0..d.p() {
                if beta_hat[j].abs() > cut {
                    a[j] += c * beta_hat[j].signum();
                } else {
                    th[j] = c.abs();
                }
            }
            box_least_squares(&a, &DMatrix::zeros(d.p(), 0), &th)
        }
        _ => {
            if bnorm > 0.0 {
                a.axpy(c / bnorm, beta_hat, 1.0);
                a.norm()
            } else {
                (a.norm() - c.abs()).max(0.0)
            }
        }
    };
    Ok(ShrinkageReport {
        conditions_met: positive && centered && norm_ratio <= 1.0,
        near_binding: norm_ratio <= 1.0 && norm_ratio > 0.9,
        norm_ratio,
        modified_objective_residual: residual,
    })
}
