//! Norms, their duals, and subgradient selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AdvError, Result};

/// Norm tag for the attack ball. The dual tag is the induced regularizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl NormKind {
    pub fn dual(self) -> NormKind {
        dual_kind(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = AdvError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(NormKind::L1),
            "l2" => Ok(NormKind::L2),
            "linf" | "inf" | "l-inf" => Ok(NormKind::Linf),
            other => Err(AdvError::InvalidArgument(format!("unknown norm '{other}'"))),
        }
    }
}

impl std::fmt::Display for NormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn dual_kind(k: NormKind) -> NormKind {
    match k {
        NormKind::L1 => NormKind::Linf,
        NormKind::L2 => NormKind::L2,
        NormKind::Linf => NormKind::L1,
    }
}

pub fn norm(v: &DVector<f64>, k: NormKind) -> f64 {
    norm_slice(v.as_slice(), k)
}

pub fn norm_slice(v: &[f64], k: NormKind) -> f64 {
    match k {
        NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
        NormKind::L2 => {
            // scaled accumulation, avoids overflow for huge entries
            let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if scale == 0.0 || !scale.is_finite() {
                return scale;
            }
            scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
        }
        NormKind::Linf => v.iter().fold(0.0f64, |m, x| m.max(x.abs())),
    }
}

/// A member of the subdifferential of `‖·‖_k` at `v`.
///
/// The result `g` satisfies `‖g‖_{dual(k)} ≤ 1` and `gᵀv = ‖v‖_k`. At kinks the
/// minimum-Euclidean-norm member is returned: zeros for the zero coordinates of
/// an L1 argument, the zero vector for L2 at the origin, and an even split over
/// tied maximal coordinates for Linf.
pub fn norm_subgradient(v: &DVector<f64>, k: NormKind) -> DVector<f64> {
    let p = v.len();
    match k {
        NormKind::L1 => v.map(sign0),
        NormKind::L2 => {
            let nv = norm(v, NormKind::L2);
            if nv == 0.0 {
                DVector::zeros(p)
            } else {
                v / nv
            }
        }
        NormKind::Linf => {
            let m = norm(v, NormKind::Linf);
            if m == 0.0 {
                return DVector::zeros(p);
            }
            let ties: Vec<usize> = (0..p).filter(|&j| v[j].abs() == m).collect();
            let w = 1.0 / ties.len() as f64;
            let mut g = DVector::zeros(p);
            for j in ties {
                g[j] = w * v[j].signum();
            }
            g
        }
    }
}

#[inline]
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Training or test data: `n` samples (rows of `x`) with responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(AdvError::InvalidDataset(format!(
                "design must be non-empty, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(AdvError::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
                context: "response length vs design rows",
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(AdvError::InvalidDataset("non-finite entry".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != p) {
            return Err(AdvError::InvalidDataset("ragged rows".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        Dataset::new(x, DVector::from_column_slice(y))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }

    pub fn mse(&self, beta: &DVector<f64>) -> f64 {
        self.residuals(beta).norm_squared() / self.n() as f64
    }

    pub(crate) fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.p() {
            return Err(AdvError::DimensionMismatch {
                expected: self.p(),
                got: beta.len(),
                context: "coefficient length vs features",
            });
        }
        Ok(())
    }
}
