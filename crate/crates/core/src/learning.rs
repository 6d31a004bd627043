//! HJB residual and critic weight update laws.
//!
//! Three laws share one set of local quantities ([`CriticPoint`]):
//!
//! - [`UpdateLaw::VariableGain`]: normalized gradient descent on the HJB
//!   residual scaled by `g₁ = |ê|^{k₂} + l`, a Lyapunov-repair term gated by
//!   `Ξ`, and the `K₁/K₂` shaping term, also scaled by `g₁`.
//! - [`UpdateLaw::ConstantRate`]: the same three terms with `g₁ ≡ 1`.
//! - [`UpdateLaw::PlainGradient`]: `-α φ ê / (1 + φᵀφ)²` alone.
//!
//! With `φ = ∇ϑ(F + Gû) - γϑ`, `m_s = 1 + φᵀφ`, `B = diag(tanh²τ₂ᵢ)`:
//!
//! ```text
//! Ẇ = -α g₁ (φ/m_s²) ê
//!     + (α/2) Ξ ∇ϑ G R⁻¹ (I - B) Gᵀ z
//!     + α g₁ [ (K₁ ϕᵀ - K₂) Ŵ + u_m ∇ϑ G (tanh τ₂ - sgn τ₂) (ϕᵀ Ŵ / m_s) ],   ϕ = φ/m_s
//! ```
//!
//! The repair term is `-α ∂Σ/∂Ŵ` for `Σ = zᵀ(F + Gû)`; the `R⁻¹` factor keeps
//! that identity exact when `R ≠ I`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::analysis::assemble_m;
use crate::control::{ln_sech2, saturate, tau2_into, ControlConstraint, CostWeights};
use crate::critic::{CriticState, RegressorBasis};
use crate::dynamics::AugmentedModel;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, mul_vec_into, tr_mul_vec_into, Matrix};

/// Which critic update law drives `Ŵ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UpdateLaw {
    VariableGain,
    ConstantRate,
    PlainGradient,
}

impl UpdateLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateLaw::VariableGain => "variable",
            UpdateLaw::ConstantRate => "constant",
            UpdateLaw::PlainGradient => "plain",
        }
    }
}

impl fmt::Display for UpdateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UpdateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "variable" => Ok(UpdateLaw::VariableGain),
            "constant" => Ok(UpdateLaw::ConstantRate),
            "plain" => Ok(UpdateLaw::PlainGradient),
            other => Err(Error::Config(alloc::format!(
                "unknown update law `{other}` (expected variable, constant or plain)"
            ))),
        }
    }
}

/// Tuning constants shared by all update laws.
#[derive(Debug, Clone, PartialEq)]
pub struct LawConfig {
    pub(crate) alpha: f64,
    pub(crate) gain_exponent: f64,
    pub(crate) gain_offset: f64,
    pub(crate) k1: Vec<f64>,
    pub(crate) k2: Matrix,
    pub(crate) constraint: ControlConstraint,
    pub(crate) cost: CostWeights,
}

/// Default `l`.
pub const DEFAULT_GAIN_OFFSET: f64 = 0.01;
/// Default scale of `K₁ = c·1` and `K₂ = c·I`.
pub const DEFAULT_SHAPING_GAIN: f64 = 0.1;

impl LawConfig {
    /// Validates every constant, including positive definiteness of
    /// `M = [[1, -½K₁ᵀ], [-½K₁, K₂]]`.
    pub fn new(
        alpha: f64,
        gain_exponent: f64,
        gain_offset: f64,
        k1: Vec<f64>,
        k2: Matrix,
        constraint: ControlConstraint,
        cost: CostWeights,
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(
                "learning rate alpha must be finite and nonnegative",
            ));
        }
        if !(gain_exponent > 0.0 && gain_exponent.is_finite()) {
            return Err(Error::config("gain exponent k2 must be positive"));
        }
        if !(gain_offset > 0.0 && gain_offset.is_finite()) {
            return Err(Error::config("gain offset l must be positive"));
        }
        if k2.rows() != k1.len() || k2.cols() != k1.len() {
            return Err(Error::config(alloc::format!(
                "K2 must be {n}x{n} to match K1 of length {n}",
                n = k1.len()
            )));
        }
        if !k2.is_symmetric() {
            return Err(Error::config(
                "K2 must be symmetric so that M = [[1, -K1ᵀ/2], [-K1/2, K2]] is symmetric positive definite",
            ));
        }
        let m = assemble_m(&k1, &k2)?;
        if !m.pd_ok {
            return Err(Error::Config(alloc::format!(
                "K1/K2 make M = [[1, -K1ᵀ/2], [-K1/2, K2]] not positive definite (lambda_min = {})",
                m.lambda_min
            )));
        }
        Ok(LawConfig {
            alpha,
            gain_exponent,
            gain_offset,
            k1,
            k2,
            constraint,
            cost,
        })
    }

    /// Defaults for the shaping gains: `l = 0.01`, `K₁ = 0.1·1`, `K₂ = 0.1·I`.
    pub fn with_defaults(
        n_terms: usize,
        alpha: f64,
        gain_exponent: f64,
        constraint: ControlConstraint,
        cost: CostWeights,
    ) -> Result<Self> {
        Self::new(
            alpha,
            gain_exponent,
            DEFAULT_GAIN_OFFSET,
            vec![DEFAULT_SHAPING_GAIN; n_terms],
            Matrix::from_diagonal(&vec![DEFAULT_SHAPING_GAIN; n_terms]),
            constraint,
            cost,
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gain_exponent(&self) -> f64 {
        self.gain_exponent
    }

    pub fn gain_offset(&self) -> f64 {
        self.gain_offset
    }

    pub fn k1(&self) -> &[f64] {
        &self.k1
    }

    pub fn k2(&self) -> &Matrix {
        &self.k2
    }

    pub fn gamma(&self) -> f64 {
        self.cost.gamma()
    }

    pub fn constraint(&self) -> &ControlConstraint {
        &self.constraint
    }

    pub fn cost(&self) -> &CostWeights {
        &self.cost
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::config(
                "learning rate alpha must be finite and nonnegative",
            ));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub(crate) fn check_against(&self, model: &AugmentedModel, critic: &CriticState) -> Result<()> {
        check_len(
            "K1 (one gain per regressor)",
            critic.basis().len(),
            self.k1.len(),
        )?;
        check_len("critic basis dimension", model.dim(), critic.basis().dim())?;
        check_len("R diagonal", model.input_dim(), self.constraint.input_dim())?;
        check_len("Q diagonal", model.state_dim(), self.cost.q_diag().len())
    }
}

/// Per-evaluation diagnostics of an update law.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDiagnostics {
    pub e_hjb: f64,
    pub g1: f64,
    pub sigma: f64,
    /// Lyapunov-repair indicator `Ξ`.
    pub xi: bool,
    pub term1: Vec<f64>,
    pub term2: Vec<f64>,
    pub term3: Vec<f64>,
}

/// Critic-related quantities at one augmented state.
#[derive(Debug, Clone)]
pub struct CriticPoint {
    pub z: Vec<f64>,
    /// `ϑ(z)`
    pub theta: Vec<f64>,
    /// `∇ϑ(z)`, `N × 2n`
    pub jacobian: Matrix,
    /// `F(z)`
    pub drift: Vec<f64>,
    /// `G(z)`, `2n × m`
    pub coupling: Matrix,
    /// `∇ϑᵀŴ`
    pub value_gradient: Vec<f64>,
    pub tau2: Vec<f64>,
    /// Noise-free control `-u_m tanh τ₂`.
    pub u_hat: Vec<f64>,
    /// `d_M(z)`
    pub d_m: f64,
}

impl CriticPoint {
    pub fn evaluate(
        model: &AugmentedModel,
        critic: &CriticState,
        constraint: &ControlConstraint,
        z: &[f64],
    ) -> Result<Self> {
        check_len("augmented state", model.dim(), z.len())?;
        check_len("critic basis dimension", model.dim(), critic.basis().dim())?;
        check_len("R diagonal", model.input_dim(), constraint.input_dim())?;
        Ok(Self::evaluate_unchecked(
            model,
            critic.basis(),
            critic.weights(),
            constraint,
            z,
        ))
    }

    /// Dimensions must already agree.
    pub(crate) fn evaluate_unchecked(
        model: &AugmentedModel,
        basis: &RegressorBasis,
        weights: &[f64],
        constraint: &ControlConstraint,
        z: &[f64],
    ) -> Self {
        let dim = model.dim();
        let n_terms = basis.len();
        let m = model.input_dim();

        let mut theta = vec![0.0; n_terms];
        basis.eval_into(z, &mut theta);
        let mut jacobian = Matrix::zeros(n_terms, dim);
        basis.jacobian_into(z, jacobian.as_mut_slice());
        let mut drift = vec![0.0; dim];
        model.drift_into(z, &mut drift);
        let mut coupling = Matrix::zeros(dim, m);
        model.coupling_into(z, coupling.as_mut_slice());

        let mut value_gradient = vec![0.0; dim];
        tr_mul_vec_into(
            jacobian.as_slice(),
            n_terms,
            dim,
            weights,
            &mut value_gradient,
        );
        let mut tau2 = vec![0.0; m];
        tau2_into(
            coupling.as_slice(),
            &value_gradient,
            constraint,
            dim,
            &mut tau2,
        );
        let u_max = constraint.u_max();
        let u_hat = tau2.iter().map(|&t| saturate(t, u_max)).collect();

        CriticPoint {
            z: z.to_vec(),
            theta,
            jacobian,
            drift,
            coupling,
            value_gradient,
            tau2,
            u_hat,
            d_m: model.uncertainty_bound(z),
        }
    }

    /// `ê = Ŵᵀ∇ϑF - γŴᵀϑ + zᵀQ₁z + d_M² + u_m² Σᵢ Rᵢ ln(1 - tanh²τ₂ᵢ)`.
    pub fn hjb_error(&self, weights: &[f64], cfg: &LawConfig) -> f64 {
        let um = cfg.constraint.u_max();
        let log_term: f64 = self
            .tau2
            .iter()
            .zip(cfg.constraint.r_diag())
            .map(|(&t, &r)| r * ln_sech2(t))
            .sum();
        dot(&self.value_gradient, &self.drift) - cfg.gamma() * dot(weights, &self.theta)
            + cfg.cost.state_cost(&self.z)
            + self.d_m * self.d_m
            + um * um * log_term
    }

    /// `ż = F(z) + G(z)u`.
    pub fn closed_loop_rate(&self, u: &[f64]) -> Vec<f64> {
        let mut zdot = self.drift.clone();
        let m = self.coupling.cols();
        for (i, zd) in zdot.iter_mut().enumerate() {
            *zd += dot(&self.coupling.as_slice()[i * m..(i + 1) * m], u);
        }
        zdot
    }

    /// `φ = ∇ϑ(F + Gu) - γϑ`.
    pub fn regressor_rate(&self, u: &[f64], gamma: f64) -> Vec<f64> {
        let zdot = self.closed_loop_rate(u);
        let mut phi = vec![0.0; self.theta.len()];
        mul_vec_into(
            self.jacobian.as_slice(),
            self.jacobian.rows(),
            self.jacobian.cols(),
            &zdot,
            &mut phi,
        );
        for (p, t) in phi.iter_mut().zip(&self.theta) {
            *p -= gamma * t;
        }
        phi
    }

    /// `∇ϑ(z) G(z) v` for `v ∈ ℝᵐ`.
    fn jac_g(&self, v: &[f64]) -> Vec<f64> {
        let dim = self.coupling.rows();
        let mut gv = vec![0.0; dim];
        mul_vec_into(
            self.coupling.as_slice(),
            dim,
            self.coupling.cols(),
            v,
            &mut gv,
        );
        let mut out = vec![0.0; self.theta.len()];
        mul_vec_into(
            self.jacobian.as_slice(),
            self.jacobian.rows(),
            dim,
            &gv,
            &mut out,
        );
        out
    }

    /// Weight derivative of `law` and its diagnostics. `u` is the control
    /// entering `φ` and `Σ` (normally [`CriticPoint::u_hat`]).
    pub fn weight_derivative(
        &self,
        law: UpdateLaw,
        weights: &[f64],
        cfg: &LawConfig,
        u: &[f64],
    ) -> (Vec<f64>, UpdateDiagnostics) {
        let n_terms = self.theta.len();
        let alpha = cfg.alpha;
        let e_hjb = self.hjb_error(weights, cfg);
        let zdot = self.closed_loop_rate(u);
        let sigma = dot(&self.z, &zdot);
        let xi = !(sigma < 0.0);

        let phi = self.regressor_rate(u, cfg.gamma());
        let ms = 1.0 + dot(&phi, &phi);

        let g1 = match law {
            UpdateLaw::VariableGain => variable_gain(e_hjb, cfg),
            UpdateLaw::ConstantRate | UpdateLaw::PlainGradient => 1.0,
        };

        // g₁ applied last so the variable term is exactly g₁ times the constant one
        let c1 = -alpha * e_hjb / (ms * ms);
        let term1: Vec<f64> = phi.iter().map(|p| g1 * (c1 * p)).collect();

        if law == UpdateLaw::PlainGradient {
            let zeros = vec![0.0; n_terms];
            return (
                term1.clone(),
                UpdateDiagnostics {
                    e_hjb,
                    g1,
                    sigma,
                    xi,
                    term1,
                    term2: zeros.clone(),
                    term3: zeros,
                },
            );
        }

        let term2 = if xi {
            let dim = self.z.len();
            let m = self.coupling.cols();
            let mut w = vec![0.0; m];
            tr_mul_vec_into(self.coupling.as_slice(), dim, m, &self.z, &mut w);
            for ((wi, &t), &r) in w.iter_mut().zip(&self.tau2).zip(cfg.constraint.r_diag()) {
                let th = libm::tanh(t);
                *wi *= (1.0 - th * th) / r;
            }
            let mut t2 = self.jac_g(&w);
            t2.iter_mut().for_each(|v| *v *= 0.5 * alpha);
            t2
        } else {
            vec![0.0; n_terms]
        };

        // ϕᵀŴ with ϕ = φ/m_s
        let vphi_w = dot(&phi, weights) / ms;
        let bracket: Vec<f64> = self
            .tau2
            .iter()
            .map(|&t| libm::tanh(t) - signum0(t))
            .collect();
        let sat = self.jac_g(&bracket);
        let k2w = cfg
            .k2
            .mul_vec(weights)
            .expect("K2 dimension checked at load");
        let um = cfg.constraint.u_max();
        let c3 = alpha * g1;
        let term3: Vec<f64> = (0..n_terms)
            .map(|j| c3 * (cfg.k1[j] * vphi_w - k2w[j] + um * sat[j] * vphi_w / ms))
            .collect();

        let wdot = (0..n_terms)
            .map(|j| term1[j] + term2[j] + term3[j])
            .collect();
        (
            wdot,
            UpdateDiagnostics {
                e_hjb,
                g1,
                sigma,
                xi,
                term1,
                term2,
                term3,
            },
        )
    }
}

/// `sgn` with `sgn(0) = 0`.
#[inline]
fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn point(
    model: &AugmentedModel,
    critic: &CriticState,
    cfg: &LawConfig,
    z: &[f64],
) -> Result<CriticPoint> {
    cfg.check_against(model, critic)?;
    CriticPoint::evaluate(model, critic, &cfg.constraint, z)
}

/// HJB residual `ê(z, Ŵ)`.
pub fn hjb_error(
    model: &AugmentedModel,
    critic: &CriticState,
    cfg: &LawConfig,
    z: &[f64],
) -> Result<f64> {
    Ok(point(model, critic, cfg, z)?.hjb_error(critic.weights(), cfg))
}

/// `g₁ = |ê|^{k₂} + l`.
pub fn variable_gain(e_hjb: f64, cfg: &LawConfig) -> f64 {
    libm::pow(libm::fabs(e_hjb), cfg.gain_exponent) + cfg.gain_offset
}

/// `Σ = zᵀ(F(z) + G(z)û)` and `Ξ` (`false` iff `Σ < 0`).
pub fn lyapunov_rate(model: &AugmentedModel, z: &[f64], u_hat: &[f64]) -> Result<(f64, bool)> {
    check_len("control input", model.input_dim(), u_hat.len())?;
    let drift = model.drift(z)?;
    let g = model.coupling(z)?;
    let gu = g.mul_vec(u_hat)?;
    let sigma: f64 = z
        .iter()
        .zip(drift.iter().zip(&gu))
        .map(|(zi, (f, b))| zi * (f + b))
        .sum();
    Ok((sigma, !(sigma < 0.0)))
}

fn update(
    law: UpdateLaw,
    model: &AugmentedModel,
    critic: &CriticState,
    cfg: &LawConfig,
    z: &[f64],
) -> Result<(Vec<f64>, UpdateDiagnostics)> {
    let p = point(model, critic, cfg, z)?;
    Ok(p.weight_derivative(law, critic.weights(), cfg, &p.u_hat))
}

pub fn variable_gain_update(
    model: &AugmentedModel,
    critic: &CriticState,
    cfg: &LawConfig,
    z: &[f64],
) -> Result<(Vec<f64>, UpdateDiagnostics)> {
    update(UpdateLaw::VariableGain, model, critic, cfg, z)
}

pub fn constant_rate_update(
    model: &AugmentedModel,
    critic: &CriticState,
    cfg: &LawConfig,
    z: &[f64],
) -> Result<(Vec<f64>, UpdateDiagnostics)> {
    update(UpdateLaw::ConstantRate, model, critic, cfg, z)
}

pub fn plain_gd_update(
    model: &AugmentedModel,
    critic: &CriticState,
    cfg: &LawConfig,
    z: &[f64],
) -> Result<Vec<f64>> {
    update(UpdateLaw::PlainGradient, model, critic, cfg, z).map(|(w, _)| w)
}

impl UpdateDiagnostics {
    /// Human-readable one-liner, mostly for logs.
    pub fn summary(&self) -> String {
        alloc::format!(
            "e_hjb={:.6e} g1={:.6e} sigma={:.6e} xi={}",
            self.e_hjb,
            self.g1,
            self.sigma,
            u8::from(self.xi)
        )
    }
}
