//! Saturated control from the critic, the non-quadratic input penalty and the
//! running cost of the discounted objective.
//!
//! The control is `û = -u_m tanh(τ₂)` with
//! `τ₂ = (1/2u_m) R⁻¹ Gᵀ(z) ∇ϑ(z)ᵀ Ŵ`, and the penalty is
//! `C(u) = 2u_m Σᵢ Rᵢ ∫₀^{uᵢ} tanh⁻¹(ν/u_m) dν`, evaluated in closed form.

use alloc::vec;
use alloc::vec::Vec;

use crate::critic::CriticState;
use crate::dynamics::AugmentedModel;
use crate::error::{check_len, Error, Result};
use crate::linalg::{tr_mul_vec_into, Matrix};

/// Default relative interior margin for the penalty domain guard.
pub const DEFAULT_DOMAIN_MARGIN: f64 = 1e-12;

/// Saturation bound `u_m` and diagonal input weight `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlConstraint {
    u_max: f64,
    r_diag: Vec<f64>,
    margin: f64,
}

impl ControlConstraint {
    pub fn new(u_max: f64, r_diag: Vec<f64>) -> Result<Self> {
        if !(u_max > 0.0 && u_max.is_finite()) {
            return Err(Error::config("u_m must be positive and finite"));
        }
        if r_diag.is_empty() || r_diag.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(Error::config(
                "R diagonal entries must be positive and finite",
            ));
        }
        Ok(ControlConstraint {
            u_max,
            r_diag,
            margin: DEFAULT_DOMAIN_MARGIN,
        })
    }

    /// Relative margin: the penalty rejects `|uᵢ| ≥ u_m (1 - margin)`.
    pub fn with_domain_margin(mut self, margin: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&margin) {
            return Err(Error::config("domain margin must lie in [0, 1)"));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn r_diag(&self) -> &[f64] {
        &self.r_diag
    }

    pub fn input_dim(&self) -> usize {
        self.r_diag.len()
    }

    pub fn domain_margin(&self) -> f64 {
        self.margin
    }
}

/// State weight `Q` (diagonal of the error block of `Q₁`) and discount `γ`.
///
/// The desired-state block of `Q₁` is zero by construction, so
/// `zᵀQ₁z = eᵀQe`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q_diag: Vec<f64>,
    gamma: f64,
}

impl CostWeights {
    pub fn new(q_diag: Vec<f64>, gamma: f64) -> Result<Self> {
        if q_diag.is_empty() || q_diag.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::config(
                "Q diagonal entries must be positive and finite",
            ));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::config("discount gamma must be nonnegative"));
        }
        Ok(CostWeights { q_diag, gamma })
    }

    pub fn q_diag(&self) -> &[f64] {
        &self.q_diag
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Full `Q₁ = diag(Q, 0)`.
    pub fn q1_matrix(&self) -> Matrix {
        let n = self.q_diag.len();
        let mut d = vec![0.0; 2 * n];
        d[..n].copy_from_slice(&self.q_diag);
        Matrix::from_diagonal(&d)
    }

    /// `zᵀQ₁z`, reading only the error half of `z`.
    pub fn state_cost(&self, z: &[f64]) -> f64 {
        self.q_diag.iter().zip(z).map(|(q, e)| q * e * e).sum()
    }
}

/// `ln(1 - tanh²τ)` without cancellation for large `|τ|`.
#[inline]
pub fn ln_sech2(tau: f64) -> f64 {
    let a = libm::fabs(tau);
    core::f64::consts::LN_2 * 2.0 - 2.0 * a - 2.0 * libm::log1p(libm::exp(-2.0 * a))
}

pub(crate) fn tau2_into(
    g: &[f64],
    grad_v: &[f64],
    cc: &ControlConstraint,
    dim: usize,
    out: &mut [f64],
) {
    let m = cc.input_dim();
    tr_mul_vec_into(g, dim, m, grad_v, out);
    let scale = 0.5 / cc.u_max;
    for (t, r) in out.iter_mut().zip(&cc.r_diag) {
        *t *= scale / r;
    }
}

fn check_dims(
    model: &AugmentedModel,
    critic: &CriticState,
    cc: &ControlConstraint,
    z: &[f64],
) -> Result<()> {
    check_len("augmented state", model.dim(), z.len())?;
    check_len("critic basis dimension", model.dim(), critic.basis().dim())?;
    check_len("R diagonal", model.input_dim(), cc.input_dim())
}

/// `τ₂(z) = (1/2u_m) R⁻¹ Gᵀ(z) ∇ϑ(z)ᵀ Ŵ`.
pub fn tau2(
    model: &AugmentedModel,
    critic: &CriticState,
    cc: &ControlConstraint,
    z: &[f64],
) -> Result<Vec<f64>> {
    check_dims(model, critic, cc, z)?;
    let grad_v = critic.value_gradient(z)?;
    let g = model.coupling(z)?;
    let mut out = vec![0.0; cc.input_dim()];
    tau2_into(g.as_slice(), &grad_v, cc, model.dim(), &mut out);
    Ok(out)
}

/// `û(z) = -u_m tanh(τ₂(z))`.
pub fn constrained_control(
    model: &AugmentedModel,
    critic: &CriticState,
    cc: &ControlConstraint,
    z: &[f64],
) -> Result<Vec<f64>> {
    let mut u = tau2(model, critic, cc, z)?;
    for ui in &mut u {
        *ui = saturate(*ui, cc.u_max);
    }
    Ok(u)
}

#[inline]
pub(crate) fn saturate(tau: f64, u_max: f64) -> f64 {
    -u_max * libm::tanh(tau)
}

/// Closed form of `2u_m Σᵢ Rᵢ ∫₀^{uᵢ} tanh⁻¹(ν/u_m) dν`:
/// `Σᵢ Rᵢ [2u_m uᵢ tanh⁻¹(uᵢ/u_m) + u_m² ln(1 - uᵢ²/u_m²)]`.
pub fn control_penalty(u: &[f64], cc: &ControlConstraint) -> Result<f64> {
    check_len("control input", cc.input_dim(), u.len())?;
    let um = cc.u_max;
    let limit = um * (1.0 - cc.margin);
    let mut total = 0.0;
    for (&ui, &ri) in u.iter().zip(&cc.r_diag) {
        if !(libm::fabs(ui) < limit) {
            return Err(Error::Domain {
                what: "control input for the saturation penalty",
                value: ui,
            });
        }
        let s = ui / um;
        let ln_term = libm::log1p(-s) + libm::log1p(s);
        total += ri * (2.0 * um * ui * libm::atanh(s) + um * um * ln_term);
    }
    Ok(total)
}

/// Running cost `d_M(z)² + zᵀQ₁z + C(u)`; `d_m` is `d_M(z)` already evaluated.
pub fn utility(
    z: &[f64],
    u: &[f64],
    cost: &CostWeights,
    cc: &ControlConstraint,
    d_m: f64,
) -> Result<f64> {
    check_len("augmented state", 2 * cost.q_diag.len(), z.len())?;
    Ok(d_m * d_m + cost.state_cost(z) + control_penalty(u, cc)?)
}
