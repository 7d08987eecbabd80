//! Adversarial training via a log-barrier method on the epigraph form
//!
//! ```text
//! min (1/n)Σ(u_i + δt)²   s.t.  u_i ≥ |y_i − z_iᵀθ|,  t ≥ ‖Bθ‖_*
//! ```
//!
//! with `Z = X` and `B = I` for the plain problem, `Z = XSᵀ` and `B = Sᵀ` for
//! the linear-map variant. For the ℓ1 regularizer the epigraph is split into
//! `v_k ≥ |w_k|`, `t ≥ Σv_k`; for ℓ2 the second-order cone barrier
//! `−log(t² − ‖w‖²)` is used. The per-sample variables `u` (and `v`) are
//! eliminated in closed form, so each Newton step solves a `(p+1)`-dimensional
//! system. Exact line search along the Newton direction keeps the iteration
//! stable at large barrier weights.

use nalgebra::{DMatrix, DVector};

use super::certificate::{residual_general, CertificateTolerances};
use super::{FitResult, RegMap, SolverOptions};
use crate::error::{AdvError, Result};
use crate::linalg::{min_norm_lstsq, null_basis, weighted_gram};
use crate::norms::{norm, Dataset, NormKind};
use crate::objective::AdvConfig;

/// Minimizes `(1/n)Σ(|y_i − x_iᵀβ| + δ‖β‖_*)²`.
pub fn solve_adv(d: &Dataset, cfg: &AdvConfig, opts: &SolverOptions) -> Result<FitResult> {
    solve_general(&d.x, &d.y, RegMap::Identity, cfg, opts)
}

/// Minimizes `(1/n)Σ(|y_i − x_iᵀSᵀθ| + δ‖Sᵀθ‖_*)²` for `S` of shape `p × d`
/// where `d` is the number of columns of `X`.
pub fn solve_adv_linmap(d: &Dataset, s: &DMatrix<f64>, cfg: &AdvConfig, opts: &SolverOptions) -> Result<FitResult> {
    if s.ncols() != d.p() {
        return Err(AdvError::DimensionMismatch {
            expected: d.p(),
            got: s.ncols(),
            context: "projection columns vs input dimension",
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(AdvError::InvalidArgument("projection matrix has non-finite entries".into()));
    }
    let z = &d.x * s.transpose();
    solve_general(&z, &d.y, RegMap::Matrix(s.transpose()), cfg, opts)
}

fn objective(z: &DMatrix<f64>, y: &DVector<f64>, b: &RegMap, reg: NormKind, delta: f64, theta: &DVector<f64>) -> f64 {
    let r = y - z * theta;
    let pen = delta * norm(&b.apply(theta), reg);
    r.iter().map(|ri| (ri.abs() + pen).powi(2)).sum::<f64>() / y.len() as f64
}

fn solve_general(z: &DMatrix<f64>, y: &DVector<f64>, b: RegMap, cfg: &AdvConfig, opts: &SolverOptions) -> Result<FitResult> {
    opts.validate()?;
    let reg = match cfg.attack {
        NormKind::L2 | NormKind::Linf => cfg.regularizer(),
        other => return Err(AdvError::UnsupportedAttack(other)),
    };
    let p = z.ncols();
    let certify = |theta: DVector<f64>, iters: usize| -> Result<FitResult> {
        let res = residual_general(z, y, &theta, &b, cfg, CertificateTolerances::default())?;
        Ok(FitResult {
            objective_value: objective(z, y, &b, reg, cfg.delta, &theta),
            certificate_residual: res,
            beta: theta.as_slice().to_vec(),
            iterations_used: iters,
            converged: res <= opts.certificate_tolerance,
        })
    };
    if cfg.delta == 0.0 {
        return certify(min_norm_lstsq(z, y), 1);
    }
    let scale = (y.norm_squared() / y.len() as f64).sqrt();
    if scale == 0.0 {
        return certify(DVector::zeros(p), 0);
    }
    let ys = y / scale;
    let mut barrier = Barrier::new(z, &ys, &b, reg == NormKind::L1, cfg.delta);
    let iters = barrier.run(opts);
    let theta = &barrier.theta * scale;

    // Candidates: raw iterate, iterate with negligible regularizer coordinates
    // snapped to zero, and the zero vector. Keep the lowest objective; ties
    // go to the simpler candidate.
    let mut candidates = vec![DVector::zeros(p)];
    if reg == NormKind::L1 {
        match &b {
            RegMap::Identity => {
                let cut = 1e-9 * theta.amax();
                let snapped = theta.map(|v| if v.abs() <= cut { 0.0 } else { v });
                if let Some(polished) = polish_interpolating(z, y, &theta) {
                    candidates.push(polished);
                }
                if let Some(polished) = polish_fixed_signs(z, y, cfg.delta, &theta) {
                    candidates.push(polished);
                }
                candidates.push(snapped);
            }
            RegMap::Matrix(bm) => {
                if let Some(polished) = polish_interpolating_map(z, y, bm, &theta) {
                    candidates.push(polished);
                }
            }
        }
    }
    candidates.push(theta);
    let mut best = candidates[0].clone();
    let mut best_obj = objective(z, y, &b, reg, cfg.delta, &best);
    for c in candidates.into_iter().skip(1) {
        let o = objective(z, y, &b, reg, cfg.delta, &c);
        if o < best_obj {
            best_obj = o;
            best = c;
        }
    }
    certify(best, iters)
}

/// Below the interpolation threshold the ℓ1 solution interpolates on a
/// support of at most `n` coordinates; re-solving `Z_S θ_S = y` there removes
/// the barrier's roundoff, which at small `δ` leaves many tiny coordinates.
/// The support is the coordinates above `1e-7·‖θ‖_∞`, truncated to the `n`
/// largest. Returns `None` unless the iterate nearly interpolates and the
/// signs survive.
fn polish_interpolating(z: &DMatrix<f64>, y: &DVector<f64>, theta: &DVector<f64>) -> Option<DVector<f64>> {
    let cut = 1e-7 * theta.amax();
    let mut support: Vec<usize> = (0..theta.len()).filter(|&j| theta[j].abs() > cut).collect();
    support.sort_by(|&a, &b| theta[b].abs().total_cmp(&theta[a].abs()));
    support.truncate(z.nrows());
    support.sort_unstable();
    if support.is_empty() {
        return None;
    }
    let r = y - z * theta;
    if r.amax() > 1e-6 * y.amax() {
        return None;
    }
    let zs = z.select_columns(&support);
    let sol = min_norm_lstsq(&zs, y);
    if (y - &zs * &sol).amax() > 1e-12 * y.amax() {
        return None;
    }
    let mut out = DVector::zeros(theta.len());
    for (k, &j) in support.iter().enumerate() {
        if sol[k] * theta[j] <= 0.0 {
            return None;
        }
        out[j] = sol[k];
    }
    Some(out)
}

/// Away from interpolation, with the residual signs `s`, the interpolated rows
/// `E` and the support signs `σ` fixed, the ℓ1 objective is the quadratic
/// `(1/n)‖b − Aβ_S‖²` with rows `s_iy_i − (s_ix_i − δσ)ᵀβ_S` off `E` and
/// `δσᵀβ_S` on `E`, subject to `X_Eβ_S = y_E`. The iterate is re-solved on
/// that face; `None` if any sign flips.
fn polish_fixed_signs(z: &DMatrix<f64>, y: &DVector<f64>, delta: f64, theta: &DVector<f64>) -> Option<DVector<f64>> {
    let n = z.nrows();
    let cut = 1e-7 * theta.amax();
    let support: Vec<usize> = (0..theta.len()).filter(|&j| theta[j].abs() > cut).collect();
    if support.is_empty() {
        return None;
    }
    let r = y - z * theta;
    let kink_tol = 1e-7 * y.amax();
    let kinks: Vec<usize> = (0..n).filter(|&i| r[i].abs() <= kink_tol).collect();
    if kinks.len() == n {
        return None;
    }
    let sigma = DVector::from_iterator(support.len(), support.iter().map(|&j| theta[j].signum()));
    let zs = z.select_columns(&support);
    let mut a = DMatrix::zeros(n, support.len());
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let si = if r[i].abs() <= kink_tol { 0.0 } else { r[i].signum() };
        for k in 0..support.len() {
            a[(i, k)] = si * zs[(i, k)] - delta * sigma[k];
        }
        b[i] = si * y[i];
    }
    let (base, free) = if kinks.is_empty() {
        (DVector::zeros(support.len()), DMatrix::identity(support.len(), support.len()))
    } else {
        let ze = zs.select_rows(&kinks);
        let ye = DVector::from_iterator(kinks.len(), kinks.iter().map(|&i| y[i]));
        (min_norm_lstsq(&ze, &ye), null_basis(&ze))
    };
    let w = min_norm_lstsq(&(&a * &free), &(&b - &a * &base));
    let sol = base + free * w;
    let mut out = DVector::zeros(theta.len());
    for (k, &j) in support.iter().enumerate() {
        if sol[k] * sigma[k] <= 0.0 {
            return None;
        }
        out[j] = sol[k];
    }
    let r2 = y - z * &out;
    for i in 0..n {
        let ok = if r[i].abs() <= kink_tol { r2[i].abs() <= 1e-9 * y.amax() } else { r2[i] * r[i] > 0.0 };
        if !ok {
            return None;
        }
    }
    Some(out)
}

/// Linear-map analogue of [`polish_interpolating`]: at a nondegenerate vertex
/// of `min ‖Bθ‖₁ s.t. Zθ = y` exactly `p − n` entries of `Bθ` vanish, so the
/// smallest ones are set to zero and the square system re-solved.
fn polish_interpolating_map(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    b: &DMatrix<f64>,
    theta: &DVector<f64>,
) -> Option<DVector<f64>> {
    let (n, p) = z.shape();
    let w = b * theta;
    if p <= n || p - n > w.len() || (y - z * theta).amax() > 1e-6 * y.amax() {
        return None;
    }
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| w[i].abs().total_cmp(&w[j].abs()));
    let zeros = &order[..p - n];
    let mut sys = DMatrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for (k, &i) in zeros.iter().enumerate() {
        sys.row_mut(k).copy_from(&b.row(i));
    }
    sys.view_mut((p - n, 0), (n, p)).copy_from(z);
    rhs.rows_mut(p - n, n).copy_from(y);
    let sol = min_norm_lstsq(&sys, &rhs);
    if (y - z * &sol).amax() > 1e-12 * y.amax() {
        return None;
    }
    let ws = b * &sol;
    let scale = w.amax();
    for &i in &order[p - n..] {
        if ws[i] * w[i] <= 0.0 && w[i].abs() > 1e-9 * scale {
            return None;
        }
    }
    Some(sol)
}

struct Barrier<'a> {
    z: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    b: &'a RegMap,
    l1: bool,
    delta: f64,
    n: usize,
    theta: DVector<f64>,
    u: DVector<f64>,
    t: f64,
    v: DVector<f64>,
}

/// Newton direction with the directional quantities needed by the line search.
struct Direction {
    theta: DVector<f64>,
    u: DVector<f64>,
    t: f64,
    v: DVector<f64>,
    /// `ZΔθ`.
    z_dir: DVector<f64>,
    /// `BΔθ`.
    w_dir: DVector<f64>,
    decrement: f64,
}

impl<'a> Barrier<'a> {
    fn new(z: &'a DMatrix<f64>, y: &'a DVector<f64>, b: &'a RegMap, l1: bool, delta: f64) -> Self {
        let n = z.nrows();
        let p = z.ncols();
        let dd = if l1 { b.out_dim(p) } else { 0 };
        let u = y.map(|v| v.abs() + 1.0);
        let v = DVector::from_element(dd, 1.0);
        let t = if l1 { dd as f64 + 1.0 } else { 1.0 };
        Barrier { z, y, b, l1, delta, n, theta: DVector::zeros(p), u, t, v }
    }

    fn degree(&self) -> f64 {
        if self.l1 {
            (2 * self.n + 2 * self.v.len() + 1) as f64
        } else {
            (2 * self.n + 2) as f64
        }
    }

    fn objective(&self) -> f64 {
        let nf = self.n as f64;
        self.u.iter().map(|ui| (ui + self.delta * self.t).powi(2)).sum::<f64>() / nf
    }

    fn run(&mut self, opts: &SolverOptions) -> usize {
        let m = self.degree();
        let gap_target = 1e-2 * opts.smoothing_floor;
        let mut tau = m / self.objective().max(1e-3);
        let mut iters = 0;
        loop {
            iters += self.center(tau, opts.max_iterations.saturating_sub(iters));
            if m / tau <= gap_target || iters >= opts.max_iterations {
                break;
            }
            tau = (tau * 25.0).min(m / gap_target);
        }
        iters
    }

    fn center(&mut self, tau: f64, budget: usize) -> usize {
        let mut prev = f64::INFINITY;
        let mut stalls = 0;
        for k in 0..budget.min(500) {
            let Some(dir) = self.direction(tau) else {
                return k + 1;
            };
            // Near the roundoff floor the decrement stops shrinking; that is
            // as centered as the iterate can get.
            if dir.decrement <= 1e-10 {
                return k + 1;
            }
            if dir.decrement <= 1e-2 && dir.decrement > 0.25 * prev {
                stalls += 1;
                if stalls >= 2 {
                    return k + 1;
                }
            }
            prev = dir.decrement;
            let step = self.line_search(tau, &dir);
            if step == 0.0 {
                return k + 1;
            }
            self.theta.axpy(step, &dir.theta, 1.0);
            self.u.axpy(step, &dir.u, 1.0);
            self.t += step * dir.t;
            if self.l1 {
                self.v.axpy(step, &dir.v, 1.0);
            }
        }
        budget.min(500)
    }

    fn direction(&self, tau: f64) -> Option<Direction> {
        let (z, n, p) = (self.z, self.n, self.z.ncols());
        let nf = n as f64;
        let delta = self.delta;
        let r = self.y - z * &self.theta;
        let a = &self.u - &r;
        let bb = &self.u + &r;
        let c2 = 2.0 * tau / nf;
        let cut = 2.0 * tau * delta / nf;

        let du_diag = DVector::from_fn(n, |i, _| c2 + a[i].powi(-2) + bb[i].powi(-2));
        let e = DVector::from_fn(n, |i, _| a[i].powi(-2) - bb[i].powi(-2));
        let kappa: Vec<f64> = (0..n)
            .map(|i| {
                let dsum = a[i].powi(-2) + bb[i].powi(-2);
                (dsum * c2 + 4.0 / (a[i] * a[i] * bb[i] * bb[i])) / du_diag[i]
            })
            .collect();
        let q = DVector::from_fn(n, |i, _| self.u[i] + delta * self.t);
        let gu = DVector::from_fn(n, |i, _| c2 * q[i] - 1.0 / a[i] - 1.0 / bb[i]);
        let mut g_theta = z.tr_mul(&DVector::from_fn(n, |i, _| 1.0 / bb[i] - 1.0 / a[i]));
        let mut g_t = c2 * delta * q.sum();

        let mut h = weighted_gram(z, &kappa);
        let mut h_t = -z.tr_mul(&DVector::from_fn(n, |i, _| e[i] * cut / du_diag[i]));
        let mut h_tt = cut * delta * (0..n).map(|i| (du_diag[i] - c2) / du_diag[i]).sum::<f64>();
        let mut gr_theta = &g_theta - z.tr_mul(&DVector::from_fn(n, |i, _| e[i] * gu[i] / du_diag[i]));
        let mut gr_t = g_t - cut * (0..n).map(|i| gu[i] / du_diag[i]).sum::<f64>();

        let w = self.b.apply(&self.theta);
        let mut l1_parts = None;
        if self.l1 {
            let dd = w.len();
            let c = &self.v - &w;
            let ee = &self.v + &w;
            let gg = self.t - self.v.sum();
            let dv = DVector::from_fn(dd, |k, _| c[k].powi(-2) + ee[k].powi(-2));
            let f = DVector::from_fn(dd, |k, _| ee[k].powi(-2) - c[k].powi(-2));
            let gamma = gg.powi(-2);
            let s_inv: f64 = dv.iter().map(|x| 1.0 / x).sum();
            let rho = gamma / (1.0 + gamma * s_inv);
            let g_w = DVector::from_fn(dd, |k, _| 1.0 / c[k] - 1.0 / ee[k]);
            let g_v = DVector::from_fn(dd, |k, _| -1.0 / c[k] - 1.0 / ee[k] + 1.0 / gg);
            g_t -= 1.0 / gg;
            gr_t -= 1.0 / gg;
            let hv = hvv_inv(&g_v, &dv, rho);
            let gw_eff = &g_w - f.component_mul(&hv);
            gr_t += gamma * hv.sum();
            let diag: Vec<f64> = (0..dd).map(|k| 4.0 / (c[k] * c[k] * ee[k] * ee[k] * dv[k])).collect();
            let fq = f.component_div(&dv);
            let qv = self.b.apply_t(&fq);
            match self.b {
                RegMap::Identity => {
                    for k in 0..dd {
                        h[(k, k)] += diag[k];
                    }
                }
                RegMap::Matrix(bm) => h += weighted_gram(bm, &diag),
            }
            h.ger(rho, &qv, &qv, 1.0);
            h_t.axpy(rho, &qv, 1.0);
            h_tt += rho;
            g_theta += self.b.apply_t(&g_w);
            gr_theta += self.b.apply_t(&gw_eff);
            l1_parts = Some((g_v, dv, f, gamma, rho));
        } else {
            let hh = self.t * self.t - w.norm_squared();
            let btw = self.b.apply_t(&w);
            h.ger(4.0 / (hh * hh), &btw, &btw, 1.0);
            match self.b {
                RegMap::Identity => {
                    for k in 0..p {
                        h[(k, k)] += 2.0 / hh;
                    }
                }
                RegMap::Matrix(bm) => h += bm.tr_mul(bm) * (2.0 / hh),
            }
            h_t.axpy(-4.0 * self.t / (hh * hh), &btw, 1.0);
            h_tt += 4.0 * self.t * self.t / (hh * hh) - 2.0 / hh;
            let gw = self.b.apply_t(&(&w * (2.0 / hh)));
            g_theta += &gw;
            gr_theta += &gw;
            g_t -= 2.0 * self.t / hh;
            gr_t -= 2.0 * self.t / hh;
        }

        // Assemble and solve the reduced (θ, t) system with Jacobi scaling.
        let mut k = DMatrix::zeros(p + 1, p + 1);
        k.view_mut((0, 0), (p, p)).copy_from(&h);
        for i in 0..p {
            k[(i, p)] = h_t[i];
            k[(p, i)] = h_t[i];
        }
        k[(p, p)] = h_tt;
        let mut rhs = DVector::zeros(p + 1);
        rhs.rows_mut(0, p).copy_from(&(-&gr_theta));
        rhs[p] = -gr_t;
        let sc = DVector::from_fn(p + 1, |i, _| 1.0 / k[(i, i)].abs().max(1e-300).sqrt());
        for i in 0..=p {
            for j in 0..=p {
                k[(i, j)] *= sc[i] * sc[j];
            }
        }
        let scaled_rhs = rhs.component_mul(&sc);
        let sol = match k.clone().cholesky() {
            Some(ch) => ch.solve(&scaled_rhs),
            None => {
                for i in 0..=p {
                    k[(i, i)] += 1e-12;
                }
                k.cholesky()?.solve(&scaled_rhs)
            }
        }
        .component_mul(&sc);
        let d_theta = sol.rows(0, p).into_owned();
        let d_t = sol[p];
        let z_dir = z * &d_theta;
        let d_u = DVector::from_fn(n, |i, _| -(gu[i] + e[i] * z_dir[i] + cut * d_t) / du_diag[i]);
        let w_dir = self.b.apply(&d_theta);
        let mut d_v = DVector::zeros(self.v.len());
        let mut decrement = -(g_theta.dot(&d_theta) + g_t * d_t + gu.dot(&d_u));
        if let Some((g_v, dv, f, gamma, rho)) = l1_parts {
            let kv = DVector::from_fn(g_v.len(), |k, _| g_v[k] + f[k] * w_dir[k] - gamma * d_t);
            d_v = -hvv_inv(&kv, &dv, rho);
            decrement -= g_v.dot(&d_v);
        }
        if !decrement.is_finite() || d_theta.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(Direction {
            theta: d_theta,
            u: d_u,
            t: d_t,
            v: d_v,
            z_dir,
            w_dir,
            decrement,
        })
    }

    /// Exact minimization of the barrier function along the Newton direction,
    /// by bisection on its directional derivative.
    fn line_search(&self, tau: f64, dir: &Direction) -> f64 {
        let nf = self.n as f64;
        let r = self.y - self.z * &self.theta;
        let a = &self.u - &r;
        let bb = &self.u + &r;
        let da = &dir.u + &dir.z_dir;
        let db = &dir.u - &dir.z_dir;
        let w = self.b.apply(&self.theta);
        let mut smax = f64::INFINITY;
        let mut bound = |s: &DVector<f64>, ds: &DVector<f64>| {
            for i in 0..s.len() {
                if ds[i] < 0.0 {
                    smax = smax.min(-s[i] / ds[i]);
                }
            }
        };
        bound(&a, &da);
        bound(&bb, &db);
        let (c, ee, dc, de, gg, dg) = if self.l1 {
            let c = &self.v - &w;
            let ee = &self.v + &w;
            let dc = &dir.v - &dir.w_dir;
            let de = &dir.v + &dir.w_dir;
            bound(&c, &dc);
            bound(&ee, &de);
            let gg = self.t - self.v.sum();
            let dg = dir.t - dir.v.sum();
            if dg < 0.0 {
                smax = smax.min(-gg / dg);
            }
            (c, ee, dc, de, gg, dg)
        } else {
            let e0 = DVector::zeros(0);
            (e0.clone(), e0.clone(), e0.clone(), e0, 0.0, 0.0)
        };
        if !self.l1 {
            // Largest step keeping t² − ‖w‖² > 0 with t > 0.
            let qa = dir.t * dir.t - dir.w_dir.norm_squared();
            let qb = 2.0 * (self.t * dir.t - w.dot(&dir.w_dir));
            let qc = self.t * self.t - w.norm_squared();
            if let Some(root) = smallest_positive_root(qa, qb, qc) {
                smax = smax.min(root);
            }
            if dir.t < 0.0 {
                smax = smax.min(-self.t / dir.t);
            }
        }
        let q0 = DVector::from_fn(self.n, |i, _| self.u[i] + self.delta * self.t);
        let dq = DVector::from_fn(self.n, |i, _| dir.u[i] + self.delta * dir.t);
        let deriv = |s: f64| -> f64 {
            let mut g = 0.0;
            for i in 0..self.n {
                g += tau * 2.0 / nf * (q0[i] + s * dq[i]) * dq[i];
                g -= da[i] / (a[i] + s * da[i]) + db[i] / (bb[i] + s * db[i]);
            }
            if self.l1 {
                for k in 0..c.len() {
                    g -= dc[k] / (c[k] + s * dc[k]) + de[k] / (ee[k] + s * de[k]);
                }
                g -= dg / (gg + s * dg);
            } else {
                let tt = self.t + s * dir.t;
                let ws = &w + &dir.w_dir * s;
                let hh = tt * tt - ws.norm_squared();
                let dh = 2.0 * (tt * dir.t - ws.dot(&dir.w_dir));
                g -= dh / hh;
            }
            g
        };
        let hi_cap = if smax.is_finite() { 0.995 * smax } else { 1.0 };
        let mut hi = hi_cap.min(1.0);
        if deriv(hi) <= 0.0 {
            return hi;
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if deriv(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }
}

/// `(diag(D) + γ11ᵀ)⁻¹ g` with `ρ = γ/(1 + γΣ1/D)`.
fn hvv_inv(g: &DVector<f64>, dv: &DVector<f64>, rho: f64) -> DVector<f64> {
    let base = g.component_div(dv);
    let s = base.sum();
    DVector::from_fn(g.len(), |k, _| base[k] - rho * s / dv[k])
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    if a.abs() < 1e-300 {
        return if b < 0.0 { Some(-c / b) } else { None };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let qq = -0.5 * (b + b.signum() * sq);
    let mut roots = [qq / a, if qq != 0.0 { c / qq } else { f64::INFINITY }];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    roots.into_iter().find(|&r| r > 0.0 && r.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::adv_risk;

    #[test]
    fn single_point_interpolates_below_threshold() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0]], &[1.0]).unwrap();
        let cfg = AdvConfig::new(0.5, NormKind::L2).unwrap();
        let f = solve_adv(&d, &cfg, &SolverOptions::default()).unwrap();
        assert!((f.beta[0] - 1.0).abs() < 1e-8 && f.beta[1].abs() < 1e-8, "{:?}", f.beta);
        assert!(f.converged, "{}", f.certificate_residual);
    }

    #[test]
    fn single_point_zero_above_threshold() {
        let d = Dataset::from_rows(&[vec![1.0, 0.0]], &[1.0]).unwrap();
        let cfg = AdvConfig::new(1.5, NormKind::L2).unwrap();
        let f = solve_adv(&d, &cfg, &SolverOptions::default()).unwrap();
        assert!(f.coefficients().amax() < 1e-10);
        assert!(f.converged);
    }

    #[test]
    fn small_instance_both_norms_certified() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.2, -0.3, 0.5, -1.0, 0.8, -0.7, 0.4, 1.2, 0.3, 0.9, -0.2]);
        let d = Dataset::new(x, DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3])).unwrap();
        for attack in [NormKind::L2, NormKind::Linf] {
            for delta in [0.01, 0.1, 0.3] {
                let cfg = AdvConfig::new(delta, attack).unwrap();
                let f = solve_adv(&d, &cfg, &SolverOptions::default()).unwrap();
                assert!(f.converged, "{attack:?} {delta}: {}", f.certificate_residual);
                assert!((f.objective_value - adv_risk(&f.coefficients(), &d, &cfg)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_map_matches_plain() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -0.3, 0.5, 0.8, 1.1]);
        let d = Dataset::new(x, DVector::from_vec(vec![1.0, -0.5, 2.0])).unwrap();
        let cfg = AdvConfig::new(0.1, NormKind::Linf).unwrap();
        let a = solve_adv(&d, &cfg, &SolverOptions::default()).unwrap();
        let b = solve_adv_linmap(&d, &DMatrix::identity(2, 2), &cfg, &SolverOptions::default()).unwrap();
        assert!((a.coefficients() - b.coefficients()).amax() < 1e-6);
    }
}
