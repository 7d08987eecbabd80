//! Dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{AdvError, Result};

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Singular values in non-increasing order.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = x.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

pub fn numerical_rank(sv: &[f64]) -> usize {
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * top).count()
}

/// Errors unless `x` has numerical rank equal to its row count.
pub fn require_full_row_rank(x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let sv = singular_values(x);
    let rank = numerical_rank(&sv);
    if rank < x.nrows() {
        return Err(AdvError::RankDeficient {
            rank,
            required: x.nrows(),
        });
    }
    Ok(sv)
}

/// Minimum-Euclidean-norm least-squares solution via a truncated SVD.
pub fn min_norm_lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if x.is_empty() {
        return DVector::zeros(x.ncols());
    }
    let svd = x.clone().svd(true, true);
    let top = svd.singular_values.max();
    let cutoff = RANK_RTOL * top;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut beta = DVector::zeros(x.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            let coef = u.column(k).dot(y) / s;
            beta.axpy(coef, &vt.row(k).transpose(), 1.0);
        }
    }
    beta
}

/// Orthonormal basis of `null(S)`: right singular vectors of `S`, padded with
/// zero rows to square so the full basis is returned.
pub(crate) fn null_basis(s: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, k) = s.shape();
    if m == 0 || k == 0 {
        return DMatrix::identity(k, k);
    }
    let mut sq = DMatrix::zeros(m.max(k), k);
    sq.view_mut((0, 0), (m, k)).copy_from(s);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let top = svd.singular_values.amax();
    let rows: Vec<usize> = (0..k).filter(|&j| svd.singular_values[j] <= RANK_RTOL * top).collect();
    vt.select_rows(&rows).transpose()
}

/// `Zᵀ diag(w) Z` for non-negative weights.
pub fn weighted_gram(z: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut zs = z.clone();
    for (i, mut row) in zs.row_iter_mut().enumerate() {
        row *= w[i].max(0.0).sqrt();
    }
    zs.tr_mul(&zs)
}

/// Solves a symmetric positive (semi)definite system, adding a small diagonal
/// shift when the plain factorization fails.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    let scale = a.diagonal().amax().max(1e-300);
    let mut shift = 1e-14 * scale;
    for _ in 0..12 {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(b));
        }
        shift *= 100.0;
    }
    Err(AdvError::Factorization("symmetric system not positive definite"))
}
