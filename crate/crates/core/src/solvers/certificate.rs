//! Optimality certificate: distance from zero to the subdifferential of the
//! adversarial risk, minimized over the free subgradient selections.

use nalgebra::{DMatrix, DVector};

use super::RegMap;
use crate::error::{AdvError, Result};
use crate::linalg::{min_norm_lstsq, spd_solve};
use crate::norms::{norm, sign0, Dataset, NormKind};
use crate::objective::AdvConfig;

/// Thresholds below which a residual or a regularizer coordinate is treated as
/// sitting exactly on a kink. Both are relative: residuals against `‖y‖_∞`,
/// coordinates against the larger of `‖w‖_∞` and `‖y‖_∞ / max|X|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateTolerances {
    pub residual_rtol: f64,
    pub coef_rtol: f64,
}

impl Default for CertificateTolerances {
    fn default() -> Self {
        CertificateTolerances {
            residual_rtol: 1e-9,
            coef_rtol: 1e-9,
        }
    }
}

/// Upper bound on `dist(0, ∂R^adv(β))`.
///
/// Residuals at a kink contribute a free sign in `[-1, 1]`; zero coordinates of
/// `β` (L1 regularizer) a free entry in `[-1, 1]`; and `β = 0` under the L2
/// regularizer the whole unit ball. The minimization over those selections is
/// exact for boxes and for the ball.
pub fn optimality_residual(beta: &DVector<f64>, d: &Dataset, cfg: &AdvConfig) -> Result<f64> {
    optimality_residual_with(beta, d, cfg, CertificateTolerances::default())
}

pub fn optimality_residual_with(
    beta: &DVector<f64>,
    d: &Dataset,
    cfg: &AdvConfig,
    tol: CertificateTolerances,
) -> Result<f64> {
    d.check_beta(beta)?;
    residual_general(&d.x, &d.y, beta, &RegMap::Identity, cfg, tol)
}

/// Certificate for the linear-map objective `(1/n)Σ(|y_i − x_iᵀSᵀθ| + δ‖Sᵀθ‖_*)²`.
pub fn optimality_residual_linmap(
    theta: &DVector<f64>,
    d: &Dataset,
    s: &DMatrix<f64>,
    cfg: &AdvConfig,
) -> Result<f64> {
    if s.ncols() != d.p() || theta.len() != s.nrows() {
        return Err(AdvError::DimensionMismatch {
            expected: d.p(),
            got: s.ncols(),
            context: "projection columns vs input dimension",
        });
    }
    let z = &d.x * s.transpose();
    residual_general(&z, &d.y, theta, &RegMap::Matrix(s.transpose()), cfg, CertificateTolerances::default())
}

pub(crate) fn residual_general(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    theta: &DVector<f64>,
    reg: &RegMap,
    cfg: &AdvConfig,
    tol: CertificateTolerances,
) -> Result<f64> {
    let reg_kind = match cfg.attack {
        NormKind::L2 | NormKind::Linf => cfg.regularizer(),
        other => return Err(AdvError::UnsupportedAttack(other)),
    };
    let n = z.nrows();
    let p = z.ncols();
    let w = reg.apply(theta);
    let reg_norm = norm(&w, reg_kind);
    let r = y - z * theta;
    let y_scale = y.amax();
    let res_tol = tol.residual_rtol * y_scale;
    let z_scale = z.amax().max(f64::MIN_POSITIVE);
    let coef_tol = tol.coef_rtol * w.amax().max(y_scale / z_scale);

    let nf = n as f64;
    let losses: Vec<f64> = r.iter().map(|ri| ri.abs() + cfg.delta * reg_norm).collect();
    let total: f64 = losses.iter().sum();
    let c = 2.0 / nf * total * cfg.delta;

    let mut a = DVector::zeros(p);
    let mut free_cols: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let zi = z.row(i).transpose();
        if r[i].abs() <= res_tol {
            free_cols.push(zi * (-2.0 / nf * losses[i]));
        } else {
            a.axpy(-2.0 / nf * losses[i] * r[i].signum(), &zi, 1.0);
        }
    }

    let mut thresholds = DVector::zeros(p);
    match reg_kind {
        NormKind::L1 => {
            let mut fixed = DVector::zeros(w.len());
            let mut free_k = Vec::new();
            for k in 0..w.len() {
                if w[k].abs() > coef_tol {
                    fixed[k] = sign0(w[k]);
                } else {
                    free_k.push(k);
                }
            }
            a.axpy(c, &reg.apply_t(&fixed), 1.0);
            match reg {
                RegMap::Identity => {
                    for &k in &free_k {
                        thresholds[k] = c;
                    }
                }
                RegMap::Matrix(b) => {
                    for &k in &free_k {
                        free_cols.push(b.row(k).transpose() * c);
                    }
                }
            }
        }
        NormKind::L2 => {
            if norm(&w, NormKind::L2) > coef_tol {
                a.axpy(c / reg_norm, &reg.apply_t(&w), 1.0);
            } else {
                // Unit-ball selection; sign freedom at kinks is left fixed at
                // zero, which can only overstate the distance.
                return Ok(match reg {
                    RegMap::Identity => (a.norm() - c).max(0.0),
                    RegMap::Matrix(b) => ball_least_squares(&a, &(b.transpose() * c)),
                });
            }
        }
        NormKind::Linf => unreachable!("Linf regularizer comes from an L1 attack"),
    }

    let g = if free_cols.is_empty() {
        DMatrix::zeros(p, 0)
    } else {
        DMatrix::from_columns(&free_cols)
    };
    Ok(box_least_squares(&a, &g, &thresholds))
}

fn huber_parts(v: &DVector<f64>, th: &DVector<f64>) -> (f64, DVector<f64>, Vec<bool>) {
    let mut f = 0.0;
    let mut s = DVector::zeros(v.len());
    let mut act = vec![false; v.len()];
    for j in 0..v.len() {
        let excess = v[j].abs() - th[j];
        if excess > 0.0 || th[j] == 0.0 {
            let e = excess.max(0.0);
            f += 0.5 * e * e;
            s[j] = v[j].signum() * e;
            act[j] = true;
        }
    }
    (f, s, act)
}

/// Minimizes `‖ψ(a + Gξ)‖₂` over `ξ ∈ [-1, 1]^k`, where `ψ_j(v) = sign(v)(|v| − c_j)_+`
/// shrinks row `j` by its threshold `c_j` (zero for plain rows). Uses a
/// projected semismooth Newton method; any returned value is attained by a
/// feasible `ξ`, so it is a valid upper bound even if iterations run out.
pub(crate) fn box_least_squares(a: &DVector<f64>, g: &DMatrix<f64>, th: &DVector<f64>) -> f64 {
    let fast = box_ls_newton(a, g, th);
    let scale = a.norm() + g.norm();
    if fast <= 1e-13 * scale || g.ncols() == 0 {
        return fast;
    }
    // Many free columns (e.g. a whole ball of kinks) can stall the active-set
    // iteration; fall back to an interior-point solve and keep the better bound.
    fast.min(box_ls_ipm(a, g, th))
}

fn box_ls_newton(a: &DVector<f64>, g: &DMatrix<f64>, th: &DVector<f64>) -> f64 {
    let k = g.ncols();
    let mut xi = DVector::zeros(k);
    let eval = |xi: &DVector<f64>| {
        let v = a + g * xi;
        huber_parts(&v, th)
    };
    let (mut f, mut s, mut act) = eval(&xi);
    if k == 0 {
        return (2.0 * f).sqrt();
    }
    // Warm start from the unconstrained least-squares minimizer, clipped.
    if let Ok(x0) = spd_solve(&(g.tr_mul(g) + DMatrix::identity(k, k) * 1e-12 * g.norm_squared().max(1e-300)), &(-g.tr_mul(a))) {
        let x0 = x0.map(|v| v.clamp(-1.0, 1.0));
        let (f0, s0, a0) = eval(&x0);
        if f0 < f {
            xi = x0;
            f = f0;
            s = s0;
            act = a0;
        }
    }
    let scale = a.norm() + g.norm();
    for _ in 0..200 {
        if (2.0 * f).sqrt() <= 1e-300 {
            break;
        }
        let grad = g.tr_mul(&s);
        let pg: f64 = (0..k)
            .map(|i| (xi[i] - (xi[i] - grad[i]).clamp(-1.0, 1.0)).abs())
            .fold(0.0, f64::max);
        if pg <= 1e-15 * scale.max(1e-300) {
            break;
        }
        let eps = pg.min(1e-12);
        let free: Vec<usize> = (0..k)
            .filter(|&i| !((xi[i] <= -1.0 + eps && grad[i] > 0.0) || (xi[i] >= 1.0 - eps && grad[i] < 0.0)))
            .collect();
        let mut dir = DVector::zeros(k);
        if !free.is_empty() {
            let rows: Vec<usize> = (0..g.nrows()).filter(|&j| act[j]).collect();
            let mut gf = DMatrix::zeros(rows.len(), free.len());
            for (ri, &j) in rows.iter().enumerate() {
                for (ci, &col) in free.iter().enumerate() {
                    gf[(ri, ci)] = g[(j, col)];
                }
            }
            let mut h = gf.tr_mul(&gf);
            let reg = 1e-13 * h.diagonal().amax().max(1e-300);
            for i in 0..free.len() {
                h[(i, i)] += reg;
            }
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -grad[i]));
            if let Ok(df) = spd_solve(&h, &rhs) {
                for (ci, &i) in free.iter().enumerate() {
                    dir[i] = df[ci];
                }
            }
        }
        let mut improved = false;
        for attempt in 0..2 {
            let d = if attempt == 0 { dir.clone() } else { -&grad / g.norm_squared().max(1e-300) };
            let mut step = 1.0;
            for _ in 0..60 {
                let cand = (&xi + &d * step).map(|v| v.clamp(-1.0, 1.0));
                let (fc, sc, ac) = eval(&cand);
                let decrease = grad.dot(&(&cand - &xi));
                if fc <= f + 1e-4 * decrease.min(0.0) && fc < f {
                    xi = cand;
                    f = fc;
                    s = sc;
                    act = ac;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if improved {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    (2.0 * f).sqrt()
}

/// Interior-point solve of `min ½‖a + Mζ‖²` over `ζ ∈ [-1, 1]^m`, where
/// `M = [G, diag(c_j)]` turns each threshold row into an extra bounded
/// column. The final iterate is polished by re-solving on its free set.
fn box_ls_ipm(a: &DVector<f64>, g: &DMatrix<f64>, th: &DVector<f64>) -> f64 {
    let rows = a.len();
    let thr: Vec<usize> = (0..rows).filter(|&j| th[j] > 0.0).collect();
    let k = g.ncols() + thr.len();
    let mut m = DMatrix::zeros(rows, k);
    m.columns_mut(0, g.ncols()).copy_from(g);
    for (c, &j) in thr.iter().enumerate() {
        m[(j, g.ncols() + c)] = th[j];
    }
    let value = |z: &DVector<f64>| (a + &m * z).norm();
    let solve = |d: &DVector<f64>, rhs: &DVector<f64>| -> Option<DVector<f64>> {
        if k <= rows {
            let mut h = m.tr_mul(&m);
            for i in 0..k {
                h[(i, i)] += d[i];
            }
            h.cholesky().map(|c| c.solve(rhs))
        } else {
            // Woodbury: (D + MᵀM)⁻¹ = D⁻¹ − D⁻¹Mᵀ(I + MD⁻¹Mᵀ)⁻¹MD⁻¹.
            let dinv = d.map(|v| 1.0 / v);
            let md = DMatrix::from_fn(rows, k, |r, c| m[(r, c)] * dinv[c]);
            let mut inner = &md * m.transpose();
            for i in 0..rows {
                inner[(i, i)] += 1.0;
            }
            let u = dinv.component_mul(rhs);
            let w = inner.cholesky()?.solve(&(&m * &u));
            Some(u - dinv.component_mul(&m.tr_mul(&w)))
        }
    };

    let mut z = DVector::zeros(k);
    let mut zl = DVector::from_element(k, 1.0);
    let mut zu = DVector::from_element(k, 1.0);
    let scale2 = (a.norm() + m.norm()).powi(2).max(1e-300);
    // Iterates stay strictly feasible; keep the best one, since the Newton
    // systems lose accuracy once the gap reaches roundoff.
    let mut best_z = z.clone();
    let mut best = value(&z);
    for _ in 0..200 {
        let sl = z.map(|v| v + 1.0);
        let su = z.map(|v| 1.0 - v);
        let gap = sl.dot(&zl) + su.dot(&zu);
        let grad = m.tr_mul(&(a + &m * &z));
        let rd = &grad - &zl + &zu;
        if gap <= 1e-15 * scale2 && rd.amax() <= 1e-13 * scale2.sqrt() {
            break;
        }
        let mu = 0.1 * gap / (2 * k) as f64;
        let d = DVector::from_fn(k, |i, _| zl[i] / sl[i] + zu[i] / su[i]);
        let rhs = DVector::from_fn(k, |i, _| -grad[i] + mu / sl[i] - mu / su[i]);
        let Some(dz) = solve(&d, &rhs) else { break };
        let dzl = DVector::from_fn(k, |i, _| (mu - sl[i] * zl[i] - zl[i] * dz[i]) / sl[i]);
        let dzu = DVector::from_fn(k, |i, _| (mu - su[i] * zu[i] + zu[i] * dz[i]) / su[i]);
        let mut step: f64 = 1.0;
        for i in 0..k {
            if dz[i] < 0.0 {
                step = step.min(-0.99 * sl[i] / dz[i]);
            }
            if dz[i] > 0.0 {
                step = step.min(0.99 * su[i] / dz[i]);
            }
            if dzl[i] < 0.0 {
                step = step.min(-0.99 * zl[i] / dzl[i]);
            }
            if dzu[i] < 0.0 {
                step = step.min(-0.99 * zu[i] / dzu[i]);
            }
        }
        z += &dz * step;
        zl += &dzl * step;
        zu += &dzu * step;
        let v = value(&z);
        if v < best {
            best = v;
            best_z = z.clone();
        }
    }
    let z = best_z;

    // Polish: fix coordinates pinned at a bound, re-solve the rest exactly.
    let pinned = |i: usize| z[i].abs() >= 1.0 - 1e-7;
    let free: Vec<usize> = (0..k).filter(|&i| !pinned(i)).collect();
    if !free.is_empty() {
        let mut fixed = z.map(|v| if v.abs() >= 1.0 - 1e-7 { v.signum() } else { 0.0 });
        let base = a + &m * &fixed;
        let sol = min_norm_lstsq(&m.select_columns(&free), &(-base));
        if sol.amax() <= 1.0 {
            for (c, &i) in free.iter().enumerate() {
                fixed[i] = sol[c];
            }
            best = best.min(value(&fixed));
        }
    }
    best
}

/// `min ‖a + Cw‖₂` over the Euclidean unit ball (trust-region subproblem).
pub(crate) fn ball_least_squares(a: &DVector<f64>, c: &DMatrix<f64>) -> f64 {
    let svd = c.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let sv = &svd.singular_values;
    let au = u.tr_mul(a);
    let outside = (a.norm_squared() - au.norm_squared()).max(0.0);
    let top = sv.max();
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > 1e-12 * top).collect();
    let omega_norm = |mu: f64| -> f64 {
        keep.iter()
            .map(|&k| (sv[k] * au[k] / (sv[k] * sv[k] + mu)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let value = |mu: f64| -> f64 {
        let mut tot = outside;
        for k in 0..sv.len() {
            if keep.contains(&k) {
                let om = -sv[k] * au[k] / (sv[k] * sv[k] + mu);
                tot += (au[k] + sv[k] * om).powi(2);
            } else {
                tot += au[k] * au[k];
            }
        }
        tot.max(0.0).sqrt()
    };
    if omega_norm(0.0) <= 1.0 {
        return value(0.0);
    }
    let (mut lo, mut hi) = (0.0, top * top + 1.0);
    while omega_norm(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if omega_norm(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    value(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_ls_interior_solution_is_exact() {
        let a = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let g = DMatrix::identity(3, 3);
        let r = box_least_squares(&a, &g, &DVector::zeros(3));
        assert!(r < 1e-14);
    }

    #[test]
    fn box_ls_clipped_solution() {
        let a = DVector::from_vec(vec![3.0, 0.5]);
        let g = DMatrix::identity(2, 2);
        let r = box_least_squares(&a, &g, &DVector::zeros(2));
        assert!((r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn box_ls_threshold_rows() {
        // row 0 plain with free variable, row 1 thresholded at 1 with no variable
        let a = DVector::from_vec(vec![0.5, 1.5]);
        let g = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let th = DVector::from_vec(vec![0.0, 1.0]);
        let r = box_least_squares(&a, &g, &th);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ball_ls_cases() {
        let a = DVector::from_vec(vec![0.5, 0.0]);
        let c = DMatrix::identity(2, 2);
        assert!(ball_least_squares(&a, &c) < 1e-12);
        let a = DVector::from_vec(vec![3.0, 4.0]);
        assert!((ball_least_squares(&a, &c) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_solution_certificate_matches_closed_form() {
        let d = Dataset::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.7, -1.0]], &[1.0, 2.0, -0.5]).unwrap();
        let xty = d.x.tr_mul(&d.y);
        let y1 = norm(&d.y, NormKind::L1);
        for attack in [NormKind::L2, NormKind::Linf] {
            let thr = norm(&xty, attack) / y1;
            let zero = DVector::zeros(2);
            let above = AdvConfig::new(1.01 * thr, attack).unwrap();
            assert!(optimality_residual(&zero, &d, &above).unwrap() <= 1e-12);
            let half = AdvConfig::new(0.5 * thr, attack).unwrap();
            let lower = (norm(&xty, attack) - 0.5 * thr * y1) * 2.0 / 3.0;
            assert!(optimality_residual(&zero, &d, &half).unwrap() >= lower * (1.0 - 1e-12));
        }
    }

    #[test]
    fn l1_attack_rejected() {
        let d = Dataset::from_rows(&[vec![1.0]], &[1.0]).unwrap();
        let cfg = AdvConfig::new(0.1, NormKind::L1).unwrap();
        assert!(optimality_residual(&DVector::zeros(1), &d, &cfg).is_err());
    }
}

