//! Minimum-norm interpolators and the dual certificate problem.

use nalgebra::{DMatrix, DVector};

use super::{lp::solve_box_lp, DualCertificate, FitResult, SolverOptions};
use crate::error::{AdvError, Result};
use crate::linalg::{min_norm_lstsq, require_full_row_rank};
use crate::norms::{norm, Dataset, NormKind};

/// Minimum `‖·‖_*`-norm solution of `Xβ = y` for the given attack norm. The
/// certificate residual is the relative duality gap against the dual problem.
pub fn min_norm_interpolator(d: &Dataset, attack: NormKind) -> Result<FitResult> {
    require_full_row_rank(&d.x)?;
    match attack {
        NormKind::L2 => {
            let beta = min_norm_lstsq(&d.x, &d.y);
            let cert = solve_dual_certificate(d, attack)?;
            Ok(interp_result(d, beta, &cert.alpha_vec(), NormKind::L2, 1))
        }
        NormKind::Linf => basis_pursuit(d, &SolverOptions::default()),
        other => Err(AdvError::UnsupportedAttack(other)),
    }
}

fn interp_result(d: &Dataset, beta: DVector<f64>, alpha: &DVector<f64>, reg: NormKind, iterations: usize) -> FitResult {
    let value = norm(&beta, reg);
    let gap = (value - alpha.dot(&d.y)).abs() / value.max(f64::MIN_POSITIVE);
    let residual = (&d.x * &beta - &d.y).amax();
    let converged = residual <= 1e-8 * (1.0 + d.y.amax()) && gap <= 1e-6;
    FitResult {
        beta: beta.as_slice().to_vec(),
        objective_value: value,
        certificate_residual: if value == 0.0 { 0.0 } else { gap },
        iterations_used: iterations,
        converged,
    }
}

/// Minimum-ℓ1 interpolation. ADMM on `min ‖z‖₁ s.t. Xβ = y, β = z` with a
/// cached factorization of `XXᵀ`; every few hundred iterations the current
/// support is tested as a vertex, which certifies itself through the dual
/// vector `α = X_S^{-ᵀ} sign(β_S)`. Falls back to the interior-point LP.
pub fn basis_pursuit(d: &Dataset, opts: &SolverOptions) -> Result<FitResult> {
    let (beta, alpha, iters) = basis_pursuit_with_dual(d, opts)?;
    Ok(interp_result(d, beta, &alpha, NormKind::L1, iters))
}

pub(crate) fn basis_pursuit_with_dual(
    d: &Dataset,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    opts.validate()?;
    require_full_row_rank(&d.x)?;
    let (n, p) = (d.n(), d.p());
    if d.y.amax() == 0.0 {
        return Ok((DVector::zeros(p), DVector::zeros(n), 0));
    }
    let x = &d.x;
    let chol = (x * x.transpose())
        .cholesky()
        .ok_or(AdvError::Factorization("X Xᵀ not positive definite"))?;
    let project = |v: &DVector<f64>| -> DVector<f64> { v - x.tr_mul(&chol.solve(&(x * v - &d.y))) };

    let mut beta = project(&DVector::zeros(p));
    let mut z = beta.clone();
    let mut u = DVector::<f64>::zeros(p);
    let rho = p as f64 / beta.lp_norm(1).max(f64::MIN_POSITIVE);
    let thresh = 1.0 / rho;
    let check_every = 200;
    let budget = opts.max_iterations.min(50_000);
    for it in 1..=budget {
        beta = project(&(&z - &u));
        let v = &beta + &u;
        z = v.map(|t| t.signum() * (t.abs() - thresh).max(0.0));
        u += &beta - &z;
        if it % check_every == 0 {
            if let Some((b, a)) = vertex_from(x, &d.y, &z) {
                return Ok((b, a, it));
            }
        }
    }
    let sol = solve_box_lp(x, &d.y)?;
    Ok((sol.beta, sol.alpha, budget + sol.iterations))
}

/// Treats the `n` largest entries of `z` as a basis and returns the vertex
/// with its dual if the pair is primal/dual feasible (hence optimal).
fn vertex_from(x: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| z[b].abs().partial_cmp(&z[a].abs()).unwrap_or(std::cmp::Ordering::Equal));
    if z[order[n - 1]] == 0.0 {
        return None;
    }
    let support = &order[..n];
    let xs = x.select_columns(support);
    let bs = xs.clone().lu().solve(y)?;
    let signs = bs.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    let alpha = xs.transpose().lu().solve(&signs)?;
    if x.tr_mul(&alpha).amax() > 1.0 + 1e-10 {
        return None;
    }
    let mut beta = DVector::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        beta[j] = bs[k];
    }
    if (x * &beta - y).amax() > 1e-10 * (1.0 + y.amax()) {
        return None;
    }
    Some((beta, alpha))
}

/// Dual solution without the rank check; `X` may have fewer independent
/// columns than its width as long as its rows are independent.
pub(crate) fn solve_dual_certificate_unchecked(x: &DMatrix<f64>, y: &DVector<f64>, attack: NormKind) -> Result<DVector<f64>> {
    if y.amax() == 0.0 {
        return Ok(DVector::zeros(x.nrows()));
    }
    match attack {
        NormKind::L2 => {
            // Pseudo-inverse of XXᵀ: handles designs whose columns are
            // projected onto a subspace but whose rows are independent.
            let gram = x * x.transpose();
            let k = match gram.clone().cholesky() {
                Some(ch) => ch.solve(y),
                None => {
                    let eps = 1e-12 * gram.diagonal().amax();
                    gram.pseudo_inverse(eps).map_err(AdvError::Factorization)? * y
                }
            };
            let q = k.dot(y);
            Ok(if q > 0.0 { k / q.sqrt() } else { DVector::zeros(x.nrows()) })
        }
        NormKind::Linf => Ok(solve_box_lp(x, y)?.alpha),
        other => Err(AdvError::UnsupportedAttack(other)),
    }
}

/// Solves `max αᵀy s.t. ‖Xᵀα‖ ≤ 1` in the attack norm.
pub fn solve_dual_certificate(d: &Dataset, attack: NormKind) -> Result<DualCertificate> {
    require_full_row_rank(&d.x)?;
    let alpha = solve_dual_certificate_unchecked(&d.x, &d.y, attack)?;
    let constraint_norm = norm(&d.x.tr_mul(&alpha), attack);
    Ok(DualCertificate {
        objective: alpha.dot(&d.y),
        constraint_norm,
        alpha: alpha.as_slice().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_l1_on_identity() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0]).unwrap();
        let fit = min_norm_interpolator(&d, NormKind::Linf).unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 1e-10 && (fit.beta[1] - 1.0).abs() < 1e-10);
        assert!((fit.objective_value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn min_l2_row_space() {
        let d = Dataset::from_rows(&[vec![1.0, 1.0]], &[2.0]).unwrap();
        let fit = min_norm_interpolator(&d, NormKind::L2).unwrap();
        assert!((fit.beta[0] - 1.0).abs() < 1e-12 && (fit.beta[1] - 1.0).abs() < 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn min_l1_degenerate_vertex() {
        let d = Dataset::from_rows(&[vec![1.0, 1.0]], &[2.0]).unwrap();
        let fit = min_norm_interpolator(&d, NormKind::Linf).unwrap();
        let b = fit.coefficients();
        assert!((b.lp_norm(1) - 2.0).abs() < 1e-10);
        assert!(b.iter().filter(|v| v.abs() > 1e-12).count() == 1);
    }

    #[test]
    fn dual_examples() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, -2.0]).unwrap();
        let c = solve_dual_certificate(&d, NormKind::Linf).unwrap();
        assert!((c.alpha[0] - 1.0).abs() < 1e-10 && (c.alpha[1] + 1.0).abs() < 1e-10);
        assert!((c.objective - 5.0).abs() < 1e-9);
        let z = Dataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0]).unwrap();
        let c = solve_dual_certificate(&z, NormKind::L2).unwrap();
        assert_eq!(c.objective, 0.0);
    }

    #[test]
    fn underparametrized_rejected() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0]], &[1.0, 1.0]).unwrap();
        assert!(min_norm_interpolator(&d, NormKind::L2).is_err());
    }
}
