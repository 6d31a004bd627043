//! Monomial regressor basis and the linear-in-weights value estimate
//! `V̂(z) = Ŵᵀϑ(z)`.
//!
//! Every term has total degree at least one, so `ϑ(0) = 0` holds for any
//! valid basis. Term order is part of the public contract: weights are
//! interpreted positionally against it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Matrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressorBasis {
    dim: usize,
    terms: Vec<Vec<u32>>,
}

#[inline]
fn ipow(x: f64, p: u32) -> f64 {
    match p {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => {
            let mut acc = 1.0;
            for _ in 0..p {
                acc *= x;
            }
            acc
        }
    }
}

impl RegressorBasis {
    /// Each term is an exponent tuple over `z`.
    pub fn new(terms: Vec<Vec<u32>>) -> Result<Self> {
        let dim = terms
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::config("regressor basis needs at least one term"))?;
        if dim == 0 {
            return Err(Error::config(
                "regressor terms must have at least one exponent",
            ));
        }
        for (j, t) in terms.iter().enumerate() {
            check_len("regressor term exponents", dim, t.len())?;
            if t.iter().all(|&p| p == 0) {
                return Err(Error::config(alloc::format!(
                    "regressor term {} is constant; every term needs degree >= 1",
                    j + 1
                )));
            }
            if terms[..j].contains(t) {
                return Err(Error::config(alloc::format!(
                    "regressor term {} duplicates an earlier term",
                    j + 1
                )));
            }
        }
        Ok(RegressorBasis { dim, terms })
    }

    /// Number of terms `N`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Length of `z` the basis expects.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn eval(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("augmented state", self.dim, z.len())?;
        let mut out = vec![0.0; self.len()];
        self.eval_into(z, &mut out);
        Ok(out)
    }

    pub(crate) fn eval_into(&self, z: &[f64], out: &mut [f64]) {
        for (o, t) in out.iter_mut().zip(&self.terms) {
            *o = t.iter().zip(z).map(|(&p, &x)| ipow(x, p)).product();
        }
    }

    /// `∂ϑ_j/∂z_k` as an `N × 2n` matrix.
    pub fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        check_len("augmented state", self.dim, z.len())?;
        let mut out = Matrix::zeros(self.len(), self.dim);
        self.jacobian_into(z, out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn jacobian_into(&self, z: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (j, t) in self.terms.iter().enumerate() {
            let row = &mut out[j * d..(j + 1) * d];
            for k in 0..d {
                let pk = t[k];
                row[k] = if pk == 0 {
                    0.0
                } else {
                    let mut v = f64::from(pk) * ipow(z[k], pk - 1);
                    for (l, (&pl, &zl)) in t.iter().zip(z).enumerate() {
                        if l != k && pl != 0 {
                            v *= ipow(zl, pl);
                        }
                    }
                    v
                };
            }
        }
    }

    pub fn total_degree(&self, j: usize) -> u32 {
        self.terms[j].iter().sum()
    }
}

/// Quadratic basis over the 4-dimensional augmented state of the 2-D benchmark:
/// `[z₁², z₂², z₃², z₄², z₁z₂, z₁z₃, z₁z₄, z₂z₃, z₂z₄, z₃z₄]`.
pub fn tracking_basis_2d() -> RegressorBasis {
    quadratic_basis(4)
}

/// All squares followed by all cross products `z_i z_j` (`i < j`) in
/// lexicographic order.
pub fn quadratic_basis(dim: usize) -> RegressorBasis {
    let mut terms = Vec::new();
    for i in 0..dim {
        let mut t = vec![0; dim];
        t[i] = 2;
        terms.push(t);
    }
    for i in 0..dim {
        for j in (i + 1)..dim {
            let mut t = vec![0; dim];
            t[i] = 1;
            t[j] = 1;
            terms.push(t);
        }
    }
    RegressorBasis::new(terms).expect("quadratic basis is well-formed")
}

/// Basis plus current weight estimate `Ŵ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticState {
    basis: RegressorBasis,
    weights: Vec<f64>,
}

impl CriticState {
    pub fn new(basis: RegressorBasis, weights: Vec<f64>) -> Result<Self> {
        check_len("critic weights", basis.len(), weights.len())?;
        Ok(CriticState { basis, weights })
    }

    pub fn zeros(basis: RegressorBasis) -> Self {
        let weights = vec![0.0; basis.len()];
        CriticState { basis, weights }
    }

    pub fn basis(&self) -> &RegressorBasis {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        check_len("critic weights", self.weights.len(), weights.len())?;
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    /// `Ŵᵀϑ(z)`.
    pub fn value_estimate(&self, z: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, &self.basis.eval(z)?))
    }

    /// `∇V̂(z) = ∇ϑ(z)ᵀŴ`.
    pub fn value_gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.basis.jacobian(z)?.tr_mul_vec(&self.weights)
    }
}
