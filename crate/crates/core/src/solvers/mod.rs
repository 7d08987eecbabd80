//! Estimators: adversarial training, baselines, interpolators and the dual
//! certificate problem.

mod adv;
mod baselines;
mod certificate;
mod interp;
mod lp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AdvError, Result};

pub use adv::{solve_adv, solve_adv_linmap};
pub use baselines::{lasso_kkt_violation, lasso_objective, solve_lasso, solve_ridge, solve_sqrt_lasso, sqrt_lasso_objective};
pub use certificate::{
    optimality_residual, optimality_residual_linmap, optimality_residual_with, CertificateTolerances,
};
pub use interp::{basis_pursuit, min_norm_interpolator, solve_dual_certificate};
pub(crate) use interp::solve_dual_certificate_unchecked;
pub use lp::{solve_box_lp, BoxLpSolution};
pub(crate) use certificate::box_least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative objective accuracy targeted by the iterative methods.
    pub objective_tolerance: f64,
    /// Absolute bound on the optimality residual for a fit to count as converged.
    pub certificate_tolerance: f64,
    /// Final barrier / smoothing parameter.
    pub smoothing_floor: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 200_000,
            objective_tolerance: 1e-8,
            certificate_tolerance: 1e-6,
            smoothing_floor: 1e-10,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.objective_tolerance > 0.0)
            || !(self.certificate_tolerance > 0.0)
            || !(self.smoothing_floor > 0.0)
            || self.max_iterations == 0
        {
            return Err(AdvError::InvalidArgument(
                "solver tolerances and iteration budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Estimated coefficients with solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub objective_value: f64,
    pub certificate_residual: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn coefficients(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta)
    }
}

/// Solution of `max αᵀy` subject to `‖Xᵀα‖ ≤ 1` in the attack norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub alpha: Vec<f64>,
    pub constraint_norm: f64,
    pub objective: f64,
}

impl DualCertificate {
    pub fn alpha_vec(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.alpha)
    }
}

/// Linear map applied to the parameter before the regularizer: `w = Bθ`.
#[derive(Debug, Clone)]
pub(crate) enum RegMap {
    Identity,
    /// `d × p` matrix `Sᵀ`.
    Matrix(DMatrix<f64>),
}

impl RegMap {
    pub(crate) fn apply(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            RegMap::Identity => theta.clone(),
            RegMap::Matrix(b) => b * theta,
        }
    }

    /// `Bᵀ g`.
    pub(crate) fn apply_t(&self, g: &DVector<f64>) -> DVector<f64> {
        match self {
            RegMap::Identity => g.clone(),
            RegMap::Matrix(b) => b.tr_mul(g),
        }
    }

    pub(crate) fn out_dim(&self, p: usize) -> usize {
        match self {
            RegMap::Identity => p,
            RegMap::Matrix(b) => b.nrows(),
        }
    }
}
