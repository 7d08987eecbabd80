//! Ridge, Lasso and square-root Lasso.

use nalgebra::DVector;

use super::{interp::basis_pursuit_with_dual, FitResult, SolverOptions};
use crate::error::{AdvError, Result};
use crate::linalg::{min_norm_lstsq, numerical_rank, singular_values, spd_solve};
use crate::norms::Dataset;

/// Minimizes `(1/n)‖y − Xβ‖² + λ‖β‖₂²`, using the dual form when `p > n`.
pub fn solve_ridge(d: &Dataset, lambda: f64) -> Result<FitResult> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(AdvError::InvalidArgument(format!("ridge lambda must be positive, got {lambda}")));
    }
    let (n, p) = (d.n(), d.p());
    let nl = n as f64 * lambda;
    let beta = if p > n {
        let mut k = &d.x * d.x.transpose();
        for i in 0..n {
            k[(i, i)] += nl;
        }
        d.x.tr_mul(&spd_solve(&k, &d.y)?)
    } else {
        let mut g = d.x.tr_mul(&d.x);
        for i in 0..p {
            g[(i, i)] += nl;
        }
        spd_solve(&g, &d.x.tr_mul(&d.y))?
    };
    let r = d.residuals(&beta);
    let grad = d.x.tr_mul(&r) * (-2.0 / n as f64) + &beta * (2.0 * lambda);
    Ok(FitResult {
        objective_value: r.norm_squared() / n as f64 + lambda * beta.norm_squared(),
        certificate_residual: grad.norm(),
        beta: beta.as_slice().to_vec(),
        iterations_used: 1,
        converged: true,
    })
}

pub fn lasso_objective(beta: &DVector<f64>, d: &Dataset, lambda: f64) -> f64 {
    d.mse(beta) + lambda * beta.lp_norm(1)
}

/// Largest violation of the Lasso subgradient conditions
/// `(2/n)x_jᵀr = λ sign(β_j)` (or `|·| ≤ λ` at zero).
pub fn lasso_kkt_violation(beta: &DVector<f64>, d: &Dataset, lambda: f64) -> f64 {
    let g = d.x.tr_mul(&d.residuals(beta)) * (2.0 / d.n() as f64);
    kkt_violation(&g, beta, lambda)
}

fn kkt_violation(g: &DVector<f64>, beta: &DVector<f64>, lambda: f64) -> f64 {
    g.iter()
        .zip(beta.iter())
        .map(|(&gj, &bj)| {
            if bj != 0.0 {
                (gj - lambda * bj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimizes `(1/n)‖y − Xβ‖² + λ‖β‖₁` by following the exact homotopy path
/// from `λ_max`; cyclic coordinate descent with soft-thresholding and an exact
/// support solve takes over if the path breaks down numerically.
pub fn solve_lasso(d: &Dataset, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    lasso_from(d, lambda, DVector::zeros(d.p()), opts)
}

pub(crate) fn lasso_from(d: &Dataset, lambda: f64, start: DVector<f64>, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(AdvError::InvalidArgument(format!("lasso lambda must be non-negative, got {lambda}")));
    }
    let (n, p) = (d.n(), d.p());
    let nf = n as f64;
    let tol = opts.certificate_tolerance;
    if let Some((beta, steps)) = lasso_homotopy(d, lambda) {
        let v = lasso_kkt_violation(&beta, d, lambda);
        if v <= 0.01 * tol {
            return Ok(FitResult {
                objective_value: lasso_objective(&beta, d, lambda),
                certificate_residual: v,
                beta: beta.as_slice().to_vec(),
                iterations_used: steps,
                converged: true,
            });
        }
    }
    let col_sq: Vec<f64> = (0..p).map(|j| d.x.column(j).norm_squared()).collect();
    let thresh = nf * lambda / 2.0;
    let mut beta = start;
    let mut r = d.residuals(&beta);
    let mut best = beta.clone();
    let mut best_viol = lasso_kkt_violation(&beta, d, lambda);
    let mut sweeps = 0;
    while sweeps < opts.max_iterations {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let xj = d.x.column(j);
            let rho = xj.dot(&r) + col_sq[j] * beta[j];
            let new = rho.signum() * (rho.abs() - thresh).max(0.0) / col_sq[j];
            let delta = new - beta[j];
            if delta != 0.0 {
                r.axpy(-delta, &xj, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs() * col_sq[j].sqrt());
            }
        }
        if sweeps % 10 == 0 || max_change == 0.0 {
            r = d.residuals(&beta);
            if let Some(polished) = polish_support(d, lambda, &beta) {
                let v = lasso_kkt_violation(&polished, d, lambda);
                if v <= 0.01 * tol && v < best_viol {
                    best = polished;
                    best_viol = v;
                    break;
                }
            }
            let v = lasso_kkt_violation(&beta, d, lambda);
            if v < best_viol {
                best = beta.clone();
                best_viol = v;
            }
            if v <= 0.01 * tol || max_change == 0.0 {
                break;
            }
        }
    }
    Ok(FitResult {
        objective_value: lasso_objective(&best, d, lambda),
        certificate_residual: best_viol,
        beta: best.as_slice().to_vec(),
        iterations_used: sweeps,
        converged: best_viol <= tol,
    })
}

/// Piecewise-linear Lasso path in `μ = nλ/2`. On the active set `A` with signs
/// `s`, `β_A(μ) = a − μb` with `a = G⁻¹X_Aᵀy`, `b = G⁻¹s`, `G = X_AᵀX_A`; the
/// path kinks where an inactive correlation reaches `±μ` or an active
/// coefficient crosses zero. Returns `None` if `G` becomes singular or the
/// step budget runs out.
fn lasso_homotopy(d: &Dataset, lambda: f64) -> Option<(DVector<f64>, usize)> {
    let (n, p) = (d.n(), d.p());
    let target = n as f64 * lambda / 2.0;
    let c0 = d.x.tr_mul(&d.y);
    let (j0, cmax) = c0.iter().enumerate().fold((0, 0.0), |acc, (j, &c)| if c.abs() > acc.1 { (j, c.abs()) } else { acc });
    if cmax <= target {
        return Some((DVector::zeros(p), 0));
    }
    let mut active = vec![j0];
    let mut signs = vec![c0[j0].signum()];
    let mut mu = cmax;
    let budget = 20 * (n + p);
    for step in 1..=budget {
        let xa = d.x.select_columns(&active);
        let chol = xa.tr_mul(&xa).cholesky()?;
        let s = DVector::from_column_slice(&signs);
        let a = chol.solve(&xa.tr_mul(&d.y));
        let b = chol.solve(&s);
        let resid0 = &d.y - &xa * &a;
        let u = d.x.tr_mul(&resid0);
        let v = d.x.tr_mul(&(&xa * &b));
        // Next kink strictly below μ.
        let below = mu * (1.0 - 1e-12);
        let mut next = target;
        let mut event: Option<(usize, bool, f64)> = None;
        for j in 0..p {
            if active.contains(&j) {
                continue;
            }
            for sgn in [1.0, -1.0] {
                let den = sgn - v[j];
                if den.abs() > 1e-300 {
                    let m = u[j] / den;
                    if m > next && m < below {
                        next = m;
                        event = Some((j, true, sgn));
                    }
                }
            }
        }
        for (k, &j) in active.iter().enumerate() {
            if b[k] != 0.0 {
                let m = a[k] / b[k];
                if m > next && m < below {
                    next = m;
                    event = Some((j, false, 0.0));
                }
            }
        }
        mu = next;
        match event {
            None => {
                let coef = &a - &b * mu;
                let mut beta = DVector::zeros(p);
                for (k, &j) in active.iter().enumerate() {
                    beta[j] = coef[k];
                }
                return Some((beta, step));
            }
            Some((j, true, sgn)) => {
                active.push(j);
                signs.push(sgn);
            }
            Some((j, false, _)) => {
                let k = active.iter().position(|&i| i == j)?;
                active.remove(k);
                signs.remove(k);
                if active.is_empty() {
                    return None;
                }
            }
        }
    }
    None
}

/// Solves the Lasso stationarity equations exactly on the support of `beta`
/// with its sign pattern; `None` if the support is not a valid basis.
fn polish_support(d: &Dataset, lambda: f64, beta: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..d.p()).filter(|&j| beta[j] != 0.0).collect();
    if support.is_empty() || support.len() > d.n() {
        return None;
    }
    let xs = d.x.select_columns(&support);
    let signs = DVector::from_iterator(support.len(), support.iter().map(|&j| beta[j].signum()));
    let rhs = xs.tr_mul(&d.y) - signs.clone() * (d.n() as f64 * lambda / 2.0);
    let bs = xs.tr_mul(&xs).cholesky()?.solve(&rhs);
    if bs.iter().zip(signs.iter()).any(|(b, s)| b * s <= 0.0 || !b.is_finite()) {
        return None;
    }
    let mut out = DVector::zeros(d.p());
    for (k, &j) in support.iter().enumerate() {
        out[j] = bs[k];
    }
    Some(out)
}

pub fn sqrt_lasso_objective(beta: &DVector<f64>, d: &Dataset, lambda: f64) -> f64 {
    d.mse(beta).sqrt() + lambda * beta.lp_norm(1)
}

/// Minimizes `√((1/n)‖y − Xβ‖²) + λ‖β‖₁`.
///
/// Away from interpolation this alternates a noise-level estimate
/// `σ = ‖r‖/√n` with a Lasso at `2λσ`. When the minimum-ℓ1 interpolator is
/// optimal (λ ≤ 1/(√n‖α‖₂) for a basis-pursuit dual α) it is returned directly
/// and certified by that dual.
pub fn solve_sqrt_lasso(d: &Dataset, lambda: f64, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(AdvError::InvalidArgument(format!("sqrt-lasso lambda must be non-negative, got {lambda}")));
    }
    let (n, p) = (d.n(), d.p());
    let nf = n as f64;
    let fit = |beta: DVector<f64>, cert: f64, iters: usize| FitResult {
        objective_value: sqrt_lasso_objective(&beta, d, lambda),
        certificate_residual: cert,
        beta: beta.as_slice().to_vec(),
        iterations_used: iters,
        converged: cert <= opts.certificate_tolerance,
    };
    let y_norm = d.y.norm();
    if y_norm == 0.0 || lambda >= d.x.tr_mul(&d.y).amax() / (nf.sqrt() * y_norm) {
        let zero = DVector::zeros(p);
        let cert = sqrt_lasso_violation(&zero, d, lambda);
        return Ok(fit(zero, cert, 0));
    }
    let full_row_rank = p >= n && numerical_rank(&singular_values(&d.x)) == n;
    if lambda == 0.0 {
        let beta = min_norm_lstsq(&d.x, &d.y);
        let g = d.x.tr_mul(&d.residuals(&beta));
        return Ok(fit(beta, g.norm() / nf, 1));
    }
    if full_row_rank {
        let (beta, alpha, iters) = basis_pursuit_with_dual(d, opts)?;
        if lambda * nf.sqrt() * alpha.norm() <= 1.0 {
            // Subgradient v = λ√n α of the loss at r = 0 has ‖v‖₂ ≤ 1 and
            // Xᵀv/√n = λXᵀα ∈ λ∂‖β‖₁; remaining error is the dual gap.
            let gap = (beta.lp_norm(1) - alpha.dot(&d.y)).abs() * lambda;
            return Ok(fit(beta, gap, iters));
        }
    }
    let mut sigma = y_norm / nf.sqrt();
    let mut beta = DVector::zeros(p);
    let mut total = 0;
    for _ in 0..500 {
        let inner = lasso_from(d, 2.0 * lambda * sigma, beta.clone(), opts)?;
        total += inner.iterations_used;
        beta = inner.coefficients();
        let new_sigma = d.residuals(&beta).norm() / nf.sqrt();
        let done = (new_sigma - sigma).abs() <= 1e-13 * sigma.max(f64::MIN_POSITIVE);
        sigma = new_sigma;
        if done || sigma == 0.0 {
            break;
        }
    }
    let cert = sqrt_lasso_violation(&beta, d, lambda);
    Ok(fit(beta, cert, total))
}

fn sqrt_lasso_violation(beta: &DVector<f64>, d: &Dataset, lambda: f64) -> f64 {
    let r = d.residuals(beta);
    let nf = d.n() as f64;
    let sigma = r.norm() / nf.sqrt();
    if sigma == 0.0 {
        return f64::INFINITY;
    }
    let g = d.x.tr_mul(&r) / (nf * sigma);
    kkt_violation(&g, beta, lambda)
}
