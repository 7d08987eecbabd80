//! Primal-dual interior-point method for the box-constrained LP
//! `max yᵀα s.t. ‖Xᵀα‖_∞ ≤ 1`, paired with basis pursuit
//! `min ‖β‖₁ s.t. Xβ = y`.

use nalgebra::{DMatrix, DVector};

use crate::error::{AdvError, Result};
use crate::linalg::spd_solve;

/// Primal and dual solutions with their residuals.
#[derive(Debug, Clone)]
pub struct BoxLpSolution {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    pub iterations: usize,
    /// `‖Xβ − y‖_∞`.
    pub primal_residual: f64,
    /// `max(‖Xᵀα‖_∞ − 1, 0)`.
    pub dual_infeasibility: f64,
    /// `|‖β‖₁ − yᵀα|`.
    pub gap: f64,
}

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-13;

/// Mehrotra predictor-corrector on the standard form
/// `min 1ᵀ(x⁺ + x⁻) s.t. X(x⁺ − x⁻) = y, x ≥ 0`, whose dual is the box LP.
/// The iterate is then purified to a vertex through its active set.
pub fn solve_box_lp(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<BoxLpSolution> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(AdvError::DimensionMismatch {
            expected: n,
            got: y.len(),
            context: "response length vs design rows",
        });
    }
    if y.amax() == 0.0 {
        return Ok(finish(x, y, DVector::zeros(n), DVector::zeros(p), 0));
    }
    // Work with unit-scale y; α is scale-free, β scales linearly.
    let ys = y.amax();
    let yn = y / ys;
    let m = 2 * p;

    let xxt = x * x.transpose();
    let beta0 = spd_solve(&(&xxt * 2.0), &yn).map(|a| x.tr_mul(&a))?;
    let mut xv = DVector::from_fn(m, |j, _| if j < p { beta0[j] } else { -beta0[j - p] });
    let mut s = DVector::from_element(m, 1.0);
    let mut alpha = DVector::<f64>::zeros(n);
    let dx = (-1.5 * xv.min()).max(0.0);
    xv.add_scalar_mut(dx);
    let xs = xv.dot(&s);
    let (sx, ss) = (xs / s.sum(), xs / xv.sum());
    xv.add_scalar_mut(0.5 * sx.max(1e-8));
    s.add_scalar_mut(0.5 * ss.max(1e-8));

    let apply_a = |v: &DVector<f64>| -> DVector<f64> {
        let d = DVector::from_fn(p, |j, _| v[j] - v[j + p]);
        x * d
    };
    let apply_at = |a: &DVector<f64>| -> DVector<f64> {
        let g = x.tr_mul(a);
        DVector::from_fn(m, |j, _| if j < p { g[j] } else { -g[j - p] })
    };

    let mut iters = 0;
    for it in 0..MAX_ITER {
        iters = it + 1;
        let rp = &yn - apply_a(&xv);
        let rd = DVector::from_element(m, 1.0) - apply_at(&alpha) - &s;
        let mu = xv.dot(&s) / m as f64;
        let pobj = xv.sum();
        let dobj = yn.dot(&alpha);
        if rp.amax() <= TOL * (1.0 + yn.amax())
            && rd.amax() <= TOL
            && (pobj - dobj).abs() <= TOL * (1.0 + pobj.abs())
        {
            break;
        }
        let d = DVector::from_fn(m, |j, _| xv[j] / s[j]);
        let dsum = DVector::from_fn(p, |j, _| d[j] + d[j + p]);
        let mut normal = crate::linalg::weighted_gram(&x.transpose(), dsum.as_slice());
        let reg = 1e-14 * normal.diagonal().amax().max(1e-300);
        for i in 0..n {
            normal[(i, i)] += reg;
        }
        let chol = match normal.cholesky() {
            Some(c) => c,
            None => break,
        };
        let solve_dir = |rc: &DVector<f64>| {
            let sinv_rc = DVector::from_fn(m, |j, _| rc[j] / s[j]);
            let rhs = &rp - apply_a(&sinv_rc) + apply_a(&d.component_mul(&rd));
            let da = chol.solve(&rhs);
            let dsv = &rd - apply_at(&da);
            let dxv = DVector::from_fn(m, |j, _| (rc[j] - xv[j] * dsv[j]) / s[j]);
            (dxv, da, dsv)
        };
        let step_len = |v: &DVector<f64>, dv: &DVector<f64>| {
            let mut a: f64 = 1.0;
            for j in 0..v.len() {
                if dv[j] < 0.0 {
                    a = a.min(-v[j] / dv[j]);
                }
            }
            a
        };
        // Predictor.
        let rc_aff = -xv.component_mul(&s);
        let (dxa, _, dsa) = solve_dir(&rc_aff);
        let ap = step_len(&xv, &dxa);
        let ad = step_len(&s, &dsa);
        let mu_aff = (&xv + &dxa * ap).dot(&(&s + &dsa * ad)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        // Corrector.
        let rc = DVector::from_fn(m, |j, _| -xv[j] * s[j] + sigma * mu - dxa[j] * dsa[j]);
        let (dxv, da, dsv) = solve_dir(&rc);
        let ap = (0.995 * step_len(&xv, &dxv)).min(1.0);
        let ad = (0.995 * step_len(&s, &dsv)).min(1.0);
        xv += &dxv * ap;
        alpha += &da * ad;
        s += &dsv * ad;
    }

    let beta = DVector::from_fn(p, |j, _| xv[j] - xv[j + p]);
    let sol = purify(x, &yn, &alpha, &beta).unwrap_or_else(|| (alpha.clone(), beta.clone()));
    let (mut a, b) = sol;
    let cn = x.tr_mul(&a).amax();
    if cn > 1.0 {
        a /= cn;
    }
    Ok(finish(x, y, a, b * ys, iters))
}

fn finish(x: &DMatrix<f64>, y: &DVector<f64>, alpha: DVector<f64>, beta: DVector<f64>, iterations: usize) -> BoxLpSolution {
    let primal_residual = (x * &beta - y).amax();
    let dual_infeasibility = (x.tr_mul(&alpha).amax() - 1.0).max(0.0);
    let gap = (beta.lp_norm(1) - y.dot(&alpha)).abs();
    BoxLpSolution {
        alpha,
        beta,
        iterations,
        primal_residual,
        dual_infeasibility,
        gap,
    }
}

/// Snaps an interior iterate to the vertex identified by its `n` most active
/// coordinates, keeping the result only if it is feasible and no worse.
fn purify(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, p) = x.shape();
    if n > p {
        return None;
    }
    let g = x.tr_mul(alpha);
    let mut order: Vec<usize> = (0..p).collect();
    let score = |j: usize| {
        let b = beta[j].abs();
        b / (b + (1.0 - g[j].abs()).max(0.0) + 1e-300)
    };
    order.sort_by(|&a, &b| score(b).partial_cmp(&score(a)).unwrap_or(std::cmp::Ordering::Equal));
    let support = &order[..n];
    let xs = x.select_columns(support);
    let lu = xs.clone().lu();
    let bs = lu.solve(y)?;
    let signs = DVector::from_fn(n, |k, _| {
        let v = g[support[k]];
        if v >= 0.0 {
            1.0
        } else {
            -1.0
        }
    });
    let a_new = xs.transpose().lu().solve(&signs)?;

    let mut b_new = DVector::zeros(p);
    for (k, &j) in support.iter().enumerate() {
        b_new[j] = bs[k];
    }
    let feas = x.tr_mul(&a_new).amax();
    let consistent = support
        .iter()
        .enumerate()
        .all(|(k, _)| bs[k] == 0.0 || bs[k].signum() == signs[k] || bs[k].abs() <= 1e-12 * bs.amax());
    let scale = 1.0 + y.amax();
    let res = (x * &b_new - y).amax();
    let old_obj = beta.lp_norm(1);
    if !a_new.iter().all(|v| v.is_finite())
        || feas > 1.0 + 1e-9
        || !consistent
        || res > 1e-10 * scale
        || b_new.lp_norm(1) > old_obj * (1.0 + 1e-7) + 1e-12
    {
        return None;
    }
    Some((a_new, b_new))
}
