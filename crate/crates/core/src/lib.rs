//! Adversarially trained linear regression through its dual-norm closed form.
//!
//! The adversarial risk `max_{‖Δx_i‖ ≤ δ} (1/n)Σ(y_i − (x_i + Δx_i)ᵀβ)²` equals
//! `(1/n)Σ(|y_i − x_iᵀβ| + δ‖β‖_*)²`, where `‖·‖_*` is the dual of the attack
//! norm. This crate evaluates that objective, minimizes it with certified
//! solvers, computes the associated thresholds and bounds, and drives the
//! experiments that exercise them.

pub mod datagen;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod norms;
pub mod objective;
pub mod rng;
pub mod solvers;
pub mod theory;

pub use error::{AdvError, Result};
pub use norms::{dual_kind, norm, norm_subgradient, Dataset, NormKind};
pub use objective::{adv_risk, AdvConfig, GeneralLossKind};
pub use solvers::{DualCertificate, FitResult, SolverOptions};
