//! Diagnostics from the ultimate-boundedness argument.
//!
//! Nothing here certifies stability at runtime: `b_N`, `γ₁` and `α₂` depend on
//! ideal-weight quantities that are unknowable, so callers supply estimates and
//! this module evaluates the formulas.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, Matrix};

/// `M = [[1, -½K₁ᵀ], [-½K₁, K₂]]` with its smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix {
    pub matrix: Matrix,
    pub lambda_min: f64,
    pub pd_ok: bool,
}

pub fn assemble_m(k1: &[f64], k2: &Matrix) -> Result<GainMatrix> {
    let n = k1.len();
    if k2.rows() != n || k2.cols() != n {
        return Err(Error::Dimension {
            what: "K2 (must be N x N for K1 of length N)",
            expected: n,
            got: k2.rows(),
        });
    }
    if !k2.is_symmetric() {
        return Err(Error::config("K2 must be symmetric"));
    }
    let mut m = Matrix::zeros(n + 1, n + 1);
    m[(0, 0)] = 1.0;
    for i in 0..n {
        m[(0, i + 1)] = -0.5 * k1[i];
        m[(i + 1, 0)] = -0.5 * k1[i];
        for j in 0..n {
            m[(i + 1, j + 1)] = k2[(i, j)];
        }
    }
    let eig = m.symmetric_eigenvalues()?;
    let scale = eig.iter().fold(1.0f64, |a, e| a.max(libm::fabs(*e)));
    // eigenvalues within rounding of zero are reported as exactly zero
    let lambda_min = if libm::fabs(eig[0]) <= 64.0 * f64::EPSILON * scale {
        0.0
    } else {
        eig[0]
    };
    Ok(GainMatrix {
        matrix: m,
        lambda_min,
        pd_ok: lambda_min > 0.0,
    })
}

/// Upper end of the domain of [`gamma_factor`], `3 - √8`.
pub const GAMMA1_MAX: f64 = 3.0 - 2.0 * core::f64::consts::SQRT_2;
const GAMMA1_ROOT_HI: f64 = 3.0 + 2.0 * core::f64::consts::SQRT_2;

/// `Γ = ½(1 - γ₁) + √(¼(1 - γ₁)² - γ₁)` for `γ₁ ∈ [0, 3 - √8]`.
pub fn gamma_factor(gamma1: f64) -> Result<f64> {
    if !(gamma1 >= 0.0 && gamma1 <= GAMMA1_MAX) {
        return Err(Error::Domain {
            what: "gamma1 for the scaling factor (valid range [0, 3 - sqrt 8])",
            value: gamma1,
        });
    }
    let half = 0.5 * (1.0 - gamma1);
    // ¼(1 - γ)² - γ = ¼(r₁ - γ)(r₂ - γ); the factored form keeps the root at r₁
    // exact, the expanded one keeps Γ(0) = 1 exact
    let disc = if gamma1 <= 0.5 * GAMMA1_MAX {
        half * half - gamma1
    } else {
        0.25 * (GAMMA1_MAX - gamma1) * (GAMMA1_ROOT_HI - gamma1)
    };
    Ok(half + libm::sqrt(disc))
}

/// `Γ′ = ½(1 - γ₁ + α₂) + √((½(1 - γ₁ + α₂))² + γ₁)`.
pub fn gamma_prime_factor(gamma1: f64, alpha2: f64) -> Result<f64> {
    if !(gamma1 >= 0.0) {
        return Err(Error::Domain {
            what: "gamma1",
            value: gamma1,
        });
    }
    if !(alpha2 >= 0.0) {
        return Err(Error::Domain {
            what: "alpha2",
            value: alpha2,
        });
    }
    let half = 0.5 * (1.0 - gamma1 + alpha2);
    Ok(half + libm::sqrt(half * half + gamma1))
}

/// `T_m = √(Σᵢ min(|τ₁ᵢ - τ₂ᵢ|², 4))`, which bounds `‖tanh τ₁ - tanh τ₂‖`.
pub fn tanh_diff_bound(tau1: &[f64], tau2: &[f64]) -> Result<f64> {
    check_len("tau vectors", tau1.len(), tau2.len())?;
    let s: f64 = tau1
        .iter()
        .zip(tau2)
        .map(|(a, b)| {
            let d = a - b;
            (d * d).min(4.0)
        })
        .sum();
    Ok(libm::sqrt(s))
}

/// `(b_N / λ_min(M)) · factor / √(1 + ‖φ‖²)`.
pub fn uub_weight_bound(b_n: f64, m: &GainMatrix, phi: &[f64], factor: f64) -> Result<f64> {
    if !(m.lambda_min > 0.0) {
        return Err(Error::Domain {
            what: "lambda_min(M) for the weight bound",
            value: m.lambda_min,
        });
    }
    if !(b_n > 0.0) {
        return Err(Error::Domain {
            what: "b_N",
            value: b_n,
        });
    }
    let p = norm(phi);
    Ok(b_n / m.lambda_min * factor / libm::sqrt(1.0 + p * p))
}

/// Caller-supplied estimates of the proof constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub gamma1: f64,
    pub alpha2: f64,
    pub b_n: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        BoundInputs {
            gamma1: 0.1,
            alpha2: 0.0,
            b_n: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub lambda_min_m: f64,
    pub pd_ok: bool,
    /// `None` outside `γ₁ ∈ [0, 3 - √8]`.
    pub gamma_factor: Option<f64>,
    pub gamma_prime_factor: f64,
    /// `2√m`
    pub t_m_cap: f64,
    /// Variable-gain weight bound (`Γ` scaling), when defined.
    pub weight_bound: Option<f64>,
    /// Constant-rate reference bound (factor 1), when defined.
    pub weight_bound_constant: Option<f64>,
}

pub fn bound_report(
    k1: &[f64],
    k2: &Matrix,
    inputs: BoundInputs,
    phi: &[f64],
    input_dim: usize,
) -> Result<BoundReport> {
    let m = assemble_m(k1, k2)?;
    let gamma = gamma_factor(inputs.gamma1).ok();
    let gamma_prime = gamma_prime_factor(inputs.gamma1, inputs.alpha2)?;
    let weight_bound = gamma.and_then(|g| uub_weight_bound(inputs.b_n, &m, phi, g).ok());
    let weight_bound_constant = uub_weight_bound(inputs.b_n, &m, phi, 1.0).ok();
    Ok(BoundReport {
        lambda_min_m: m.lambda_min,
        pd_ok: m.pd_ok,
        gamma_factor: gamma,
        gamma_prime_factor: gamma_prime,
        t_m_cap: 2.0 * libm::sqrt(input_dim as f64),
        weight_bound,
        weight_bound_constant,
    })
}

impl BoundReport {
    /// `key=value` lines; undefined values print as `undefined`.
    pub fn to_lines(&self) -> Vec<(&'static str, alloc::string::String)> {
        use alloc::format;
        use alloc::string::ToString;
        let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x}"));
        alloc::vec![
            ("lambda_min_M", format!("{}", self.lambda_min_m)),
            ("pd_ok", format!("{}", self.pd_ok)),
            ("gamma_factor", opt(self.gamma_factor)),
            ("gamma_prime_factor", format!("{}", self.gamma_prime_factor)),
            ("t_m_cap", format!("{}", self.t_m_cap)),
            ("weight_bound", opt(self.weight_bound)),
            (
                "weight_bound_constant_rate",
                opt(self.weight_bound_constant)
            ),
        ]
    }
}
