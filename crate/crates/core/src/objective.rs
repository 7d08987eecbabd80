//! Adversarial risk in closed form and by explicit attack.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AdvError, Result};
use crate::norms::{norm, norm_subgradient, Dataset, NormKind};
use crate::rng::{stream, Purpose};

/// Attack radius and the norm of the perturbation ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvConfig {
    pub delta: f64,
    pub attack: NormKind,
}

impl AdvConfig {
    pub fn new(delta: f64, attack: NormKind) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(AdvError::InvalidArgument(format!(
                "attack radius must be finite and non-negative, got {delta}"
            )));
        }
        Ok(AdvConfig { delta, attack })
    }

    /// The regularizer norm induced by the attack ball.
    pub fn regularizer(&self) -> NormKind {
        self.attack.dual()
    }
}

/// `(1/n) Σ (|y_i − x_iᵀβ| + δ‖β‖_*)²`.
///
/// Panics if `beta` does not have one entry per feature.
pub fn adv_risk(beta: &DVector<f64>, d: &Dataset, cfg: &AdvConfig) -> f64 {
    assert_eq!(beta.len(), d.p(), "coefficient length vs features");
    let pen = cfg.delta * norm(beta, cfg.regularizer());
    let r = d.residuals(beta);
    r.iter().map(|ri| (ri.abs() + pen).powi(2)).sum::<f64>() / d.n() as f64
}

/// Mean squared error after adding the per-row perturbations `delta_x`.
pub fn perturbed_mse(beta: &DVector<f64>, d: &Dataset, delta_x: &DMatrix<f64>) -> f64 {
    let r = &d.y - (&d.x + delta_x) * beta;
    r.norm_squared() / d.n() as f64
}

/// Rows `Δx_i = −sign(r_i) δ g`, with `g` the unit-ball maximizer of `zᵀβ`.
///
/// Rows with a zero residual use `−δ g` (either sign attains the maximum). When
/// `β = 0` every perturbation is worst case and the zero matrix is returned.
pub fn worst_case_perturbations(beta: &DVector<f64>, d: &Dataset, cfg: &AdvConfig) -> DMatrix<f64> {
    assert_eq!(beta.len(), d.p(), "coefficient length vs features");
    let mut out = DMatrix::zeros(d.n(), d.p());
    if cfg.delta == 0.0 {
        return out;
    }
    let g = norm_subgradient(beta, cfg.regularizer()) * cfg.delta;
    let r = d.residuals(beta);
    for i in 0..d.n() {
        let s = if r[i] < 0.0 { 1.0 } else { -1.0 };
        out.row_mut(i).copy_from(&(g.transpose() * s));
    }
    out
}

/// Uniform draw from the `k`-norm ball of the given radius in `R^p`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, p: usize, k: NormKind, radius: f64) -> DVector<f64> {
    match k {
        NormKind::Linf => DVector::from_fn(p, |_, _| radius * (2.0 * rng.random::<f64>() - 1.0)),
        NormKind::L2 => {
            let dir: DVector<f64> = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
            let nd = dir.norm();
            if nd == 0.0 {
                return DVector::zeros(p);
            }
            let rad = radius * rng.random::<f64>().powf(1.0 / p as f64);
            dir * (rad / nd)
        }
        NormKind::L1 => {
            let e: Vec<f64> = (0..=p).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = e.iter().sum();
            DVector::from_fn(p, |j, _| {
                let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                radius * s * e[j] / total
            })
        }
    }
}

/// Per-row maximum of the perturbed squared error over `samples` random ball
/// points, optionally together with the constructed worst case.
pub fn sampled_attack_risk(
    beta: &DVector<f64>,
    d: &Dataset,
    cfg: &AdvConfig,
    samples: usize,
    seed: u64,
    include_worst_case: bool,
) -> Result<f64> {
    if samples == 0 {
        return Err(AdvError::InvalidArgument("samples must be at least 1".into()));
    }
    d.check_beta(beta)?;
    let mut rng = stream(seed, Purpose::Attack);
    let worst = include_worst_case.then(|| worst_case_perturbations(beta, d, cfg));
    let mut total = 0.0;
    for i in 0..d.n() {
        let xb = d.x.row(i).transpose().dot(beta);
        let mut best = (d.y[i] - xb).powi(2);
        for _ in 0..samples {
            let dx = sample_ball(&mut rng, d.p(), cfg.attack, cfg.delta);
            best = best.max((d.y[i] - xb - dx.dot(beta)).powi(2));
        }
        if let Some(w) = &worst {
            let dxb = w.row(i).transpose().dot(beta);
            best = best.max((d.y[i] - xb - dxb).powi(2));
        }
        total += best;
    }
    Ok(total / d.n() as f64)
}

/// Brute-force estimate of the adversarial risk including the constructed
/// maximizer; equals [`adv_risk`] up to rounding.
pub fn adv_risk_sampled(
    beta: &DVector<f64>,
    d: &Dataset,
    cfg: &AdvConfig,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    sampled_attack_risk(beta, d, cfg, samples, seed, true)
}

/// Adversarial MSE on held-out data.
pub fn adv_test_mse(beta: &DVector<f64>, test: &Dataset, cfg: &AdvConfig) -> Result<f64> {
    test.check_beta(beta)?;
    Ok(adv_risk(beta, test, cfg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneralLossKind {
    SquaredRegression,
    AbsoluteRegression,
    Hinge,
    Logistic,
}

impl GeneralLossKind {
    pub fn is_classification(self) -> bool {
        matches!(self, GeneralLossKind::Hinge | GeneralLossKind::Logistic)
    }
}

fn softplus(z: f64) -> f64 {
    // log(1 + e^z)
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_label(y: f64, kind: GeneralLossKind) -> Result<()> {
    if kind.is_classification() && y != 1.0 && y != -1.0 {
        return Err(AdvError::InvalidArgument(format!(
            "classification label must be -1 or +1, got {y}"
        )));
    }
    Ok(())
}

/// Loss of prediction `pred = xᵀβ` against target `y`, without an adversary.
pub fn loss_value(pred: f64, y: f64, kind: GeneralLossKind) -> Result<f64> {
    check_label(y, kind)?;
    Ok(match kind {
        GeneralLossKind::SquaredRegression => (y - pred).powi(2),
        GeneralLossKind::AbsoluteRegression => (y - pred).abs(),
        GeneralLossKind::Hinge => (1.0 - y * pred).max(0.0),
        GeneralLossKind::Logistic => softplus(-y * pred),
    })
}

/// Worst-case loss when the prediction can move by at most `margin = δ‖β‖_*`.
///
/// Regression kinds evaluate `ℓ(|y − inner| + margin)`; classification kinds
/// evaluate `ℓ(y·inner − margin)`.
pub fn adv_loss_general(inner: f64, y: f64, margin: f64, kind: GeneralLossKind) -> Result<f64> {
    if !(margin >= 0.0) {
        return Err(AdvError::InvalidArgument(format!("margin must be non-negative, got {margin}")));
    }
    check_label(y, kind)?;
    Ok(match kind {
        GeneralLossKind::SquaredRegression => ((y - inner).abs() + margin).powi(2),
        GeneralLossKind::AbsoluteRegression => (y - inner).abs() + margin,
        GeneralLossKind::Hinge => (1.0 - (y * inner - margin)).max(0.0),
        GeneralLossKind::Logistic => softplus(-(y * inner - margin)),
    })
}

/// The perturbation of a single input attaining [`adv_loss_general`].
pub fn worst_case_perturbation_general(
    beta: &DVector<f64>,
    inner: f64,
    y: f64,
    cfg: &AdvConfig,
    kind: GeneralLossKind,
) -> DVector<f64> {
    let g = norm_subgradient(beta, cfg.regularizer()) * cfg.delta;
    let s = if kind.is_classification() {
        -y
    } else if y - inner < 0.0 {
        1.0
    } else {
        -1.0
    };
    g * s
}

/// `‖y − (X + Δ)β‖₂` for an explicit disturbance matrix.
pub fn robust_objective(beta: &DVector<f64>, d: &Dataset, disturbance: &DMatrix<f64>) -> f64 {
    (&d.y - (&d.x + disturbance) * beta).norm()
}

/// Closed form of `max ‖y − (X + Δ)β‖₂` over disturbances whose columns have
/// Euclidean norm at most `delta`: `‖y − Xβ‖₂ + δ‖β‖₁`.
pub fn robust_colset_worst_value(beta: &DVector<f64>, d: &Dataset, delta: f64) -> f64 {
    d.residuals(beta).norm() + delta * norm(beta, NormKind::L1)
}

/// Column-bounded disturbance attaining [`robust_colset_worst_value`]: column
/// `j` is `−δ sign(β_j) u` with `u` the unit residual direction. With a zero
/// residual any unit `u` works; the first basis vector is used.
pub fn colset_worst_disturbance(beta: &DVector<f64>, d: &Dataset, delta: f64) -> DMatrix<f64> {
    let r = d.residuals(beta);
    let nr = r.norm();
    let u = if nr > 0.0 {
        r / nr
    } else {
        let mut e = DVector::zeros(d.n());
        e[0] = 1.0;
        e
    };
    let mut out = DMatrix::zeros(d.n(), d.p());
    for j in 0..d.p() {
        let s = crate::norms::sign0(beta[j]);
        if s != 0.0 {
            out.column_mut(j).copy_from(&(&u * (-delta * s)));
        }
    }
    out
}

/// Value of the row-bounded robust objective at its maximizer, built from
/// [`worst_case_perturbations`]. Its square divided by `n` is the adversarial risk.
pub fn rowset_worst_value(beta: &DVector<f64>, d: &Dataset, cfg: &AdvConfig) -> f64 {
    robust_objective(beta, d, &worst_case_perturbations(beta, d, cfg))
}
