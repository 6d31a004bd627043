//! Plants, reference generators and the augmented tracking system.
//!
//! The plant is control-affine, `ẋ = f(x) + g(x)u`, and the reference is
//! autonomous, `ẋ_d = H(x_d)`. Tracking is posed on the augmented state
//! `z = [e; x_d]` with `e = x - x_d`, giving
//!
//! ```text
//! ż = F(z) + G(z)u,   F(z) = [f(e + x_d) - H(x_d); H(x_d)],   G(z) = [g(e + x_d); 0]
//! ```
//!
//! Matched uncertainty is not injected into the dynamics. It only enters the
//! running cost through the bound `d_M(z)`, which defaults to zero.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;

/// `(state, out)` evaluation callback.
pub type VectorField = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// Scalar map over the augmented state.
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Control-affine plant `ẋ = f(x) + g(x)u` with an optional matched-uncertainty bound.
#[derive(Clone)]
pub struct PlantModel {
    n: usize,
    m: usize,
    drift: VectorField,
    coupling: VectorField,
    uncertainty_bound: Option<ScalarField>,
}

impl PlantModel {
    /// `coupling` writes `g(x)` row-major into an `n × m` buffer.
    pub fn new<F, G>(n: usize, m: usize, drift: F, coupling: G) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if n == 0 || m == 0 {
            return Err(Error::config(
                "plant state and input dimensions must be positive",
            ));
        }
        Ok(PlantModel {
            n,
            m,
            drift: Arc::new(drift),
            coupling: Arc::new(coupling),
            uncertainty_bound: None,
        })
    }

    /// Sets `d_M(z)`, evaluated on the augmented state. Must be nonnegative.
    pub fn with_uncertainty_bound<D>(mut self, bound: D) -> Self
    where
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.uncertainty_bound = Some(Arc::new(bound));
        self
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    pub fn coupling(&self, x: &[f64], out: &mut [f64]) {
        (self.coupling)(x, out)
    }

    pub fn uncertainty_bound(&self, z: &[f64]) -> f64 {
        self.uncertainty_bound.as_ref().map_or(0.0, |d| d(z))
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("has_uncertainty_bound", &self.uncertainty_bound.is_some())
            .finish_non_exhaustive()
    }
}

/// Autonomous reference generator `ẋ_d = H(x_d)` with `H(0) = 0`.
#[derive(Clone)]
pub struct ReferenceModel {
    n: usize,
    dynamics: VectorField,
}

impl ReferenceModel {
    pub fn new<H>(n: usize, dynamics: H) -> Result<Self>
    where
        H: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if n == 0 {
            return Err(Error::config("reference dimension must be positive"));
        }
        Ok(ReferenceModel {
            n,
            dynamics: Arc::new(dynamics),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn eval(&self, xd: &[f64], out: &mut [f64]) {
        (self.dynamics)(xd, out)
    }
}

impl fmt::Debug for ReferenceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReferenceModel")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

/// Augmented state `z = [e; x_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState(Vec<f64>);

impl AugmentedState {
    pub fn from_parts(error: &[f64], desired: &[f64]) -> Result<Self> {
        check_len("desired state", error.len(), desired.len())?;
        let mut z = Vec::with_capacity(2 * error.len());
        z.extend_from_slice(error);
        z.extend_from_slice(desired);
        Ok(AugmentedState(z))
    }

    /// Builds `z` from the plant state and the desired state.
    pub fn from_tracking(x: &[f64], xd: &[f64]) -> Result<Self> {
        check_len("desired state", x.len(), xd.len())?;
        let e: Vec<f64> = x.iter().zip(xd).map(|(a, b)| a - b).collect();
        Self::from_parts(&e, xd)
    }

    pub fn from_vec(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() || z.len() % 2 != 0 {
            return Err(Error::config(
                "augmented state must have even, positive length",
            ));
        }
        Ok(AugmentedState(z))
    }

    pub fn error(&self) -> &[f64] {
        &self.0[..self.0.len() / 2]
    }

    pub fn desired(&self) -> &[f64] {
        &self.0[self.0.len() / 2..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// The augmented error/reference system `ż = F(z) + G(z)u`.
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    plant: PlantModel,
    reference: ReferenceModel,
}

/// Composes a plant and a reference of the same dimension.
pub fn augment(plant: PlantModel, reference: ReferenceModel) -> Result<AugmentedModel> {
    if plant.state_dim() != reference.dim() {
        return Err(Error::config(alloc::format!(
            "plant has {} states but reference has {}",
            plant.state_dim(),
            reference.dim()
        )));
    }
    Ok(AugmentedModel { plant, reference })
}

impl AugmentedModel {
    pub fn plant(&self) -> &PlantModel {
        &self.plant
    }

    pub fn reference(&self) -> &ReferenceModel {
        &self.reference
    }

    /// Dimension `n` of the plant (and of the reference).
    pub fn state_dim(&self) -> usize {
        self.plant.n
    }

    /// Dimension `2n` of `z`.
    pub fn dim(&self) -> usize {
        2 * self.plant.n
    }

    pub fn input_dim(&self) -> usize {
        self.plant.m
    }

    /// Writes `F(z)` into `out` (length `2n`).
    pub fn drift_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.plant.n;
        let (e, xd) = z.split_at(n);
        let mut x = [0.0f64; 8];
        let mut heap;
        let x: &mut [f64] = if n <= x.len() {
            &mut x[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for ((xi, ei), di) in x.iter_mut().zip(e).zip(xd) {
            *xi = ei + di;
        }
        let (top, bottom) = out.split_at_mut(n);
        self.plant.drift(x, top);
        self.reference.eval(xd, bottom);
        for (t, h) in top.iter_mut().zip(bottom.iter()) {
            *t -= h;
        }
    }

    /// Writes `G(z)` row-major into `out` (`2n × m`); the lower `n` rows are zero.
    pub fn coupling_into(&self, z: &[f64], out: &mut [f64]) {
        let n = self.plant.n;
        let m = self.plant.m;
        let (e, xd) = z.split_at(n);
        let mut x = [0.0f64; 8];
        let mut heap;
        let x: &mut [f64] = if n <= x.len() {
            &mut x[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for ((xi, ei), di) in x.iter_mut().zip(e).zip(xd) {
            *xi = ei + di;
        }
        let (top, bottom) = out.split_at_mut(n * m);
        self.plant.coupling(x, top);
        bottom.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn drift(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("augmented state", self.dim(), z.len())?;
        let mut out = vec![0.0; self.dim()];
        self.drift_into(z, &mut out);
        Ok(out)
    }

    pub fn coupling(&self, z: &[f64]) -> Result<Matrix> {
        check_len("augmented state", self.dim(), z.len())?;
        let mut out = Matrix::zeros(self.dim(), self.input_dim());
        self.coupling_into(z, out.as_mut_slice());
        Ok(out)
    }

    /// `d_M(z)`.
    pub fn uncertainty_bound(&self, z: &[f64]) -> f64 {
        self.plant.uncertainty_bound(z)
    }
}

/// The two-state benchmark plant tracking an undamped oscillator at 7 rad/s.
///
/// Plant: `ẋ₁ = -x₁ + x₂`, `ẋ₂ = -(x₁ + 1)x₂ - 49x₁ + 0.5cos³(x₁)sin(x₂) + u`.
/// Reference: `ẋ_d1 = x_d2`, `ẋ_d2 = -49x_d1`.
pub fn preset_system_2d() -> (PlantModel, ReferenceModel) {
    let plant = PlantModel::new(
        2,
        1,
        |x: &[f64], out: &mut [f64]| {
            let (x1, x2) = (x[0], x[1]);
            let c = libm::cos(x1);
            out[0] = -x1 + x2;
            out[1] = -(x1 + 1.0) * x2 - 49.0 * x1 + 0.5 * c * c * c * libm::sin(x2);
        },
        |_x: &[f64], out: &mut [f64]| {
            out[0] = 0.0;
            out[1] = 1.0;
        },
    )
    .expect("preset dimensions are positive");
    let reference = ReferenceModel::new(2, |xd: &[f64], out: &mut [f64]| {
        out[0] = xd[1];
        out[1] = -49.0 * xd[0];
    })
    .expect("preset dimension is positive");
    (plant, reference)
}

/// [`preset_system_2d`] already composed.
pub fn preset_augmented_2d() -> AugmentedModel {
    let (p, r) = preset_system_2d();
    augment(p, r).expect("preset dimensions agree")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_fixed_point_and_coupling() {
        let model = preset_augmented_2d();
        assert_eq!(model.drift(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        let g = model.coupling(&[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn preset_plant_values() {
        let (plant, reference) = preset_system_2d();
        let mut out = [0.0; 2];
        plant.drift(&[0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 0.0]);
        reference.eval(&[1.0, 0.0], &mut out);
        assert_eq!(out, [0.0, -49.0]);

        plant.drift(&[0.5, -0.5], &mut out);
        let c = 0.5f64.cos();
        // -(x1 + 1) x2 - 49 x1 = 0.75 - 24.5
        let expected = -23.75 + 0.5 * c * c * c * (-0.5f64).sin();
        assert_eq!(out[0], -1.0);
        assert!((out[1] - expected).abs() < 1e-13);
    }

    #[test]
    fn augmented_drift_by_hand() {
        let model = preset_augmented_2d();
        let z = [0.1, 0.2, 0.3, 0.4];
        // x = e + x_d = (0.4, 0.6)
        let (x1, x2) = (0.4f64, 0.6f64);
        let f1 = -x1 + x2;
        let f2 = -(x1 + 1.0) * x2 - 49.0 * x1 + 0.5 * x1.cos().powi(3) * x2.sin();
        let h = [0.4, -49.0 * 0.3];
        let expected = [f1 - h[0], f2 - h[1], h[0], h[1]];
        let got = model.drift(&z).unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-13, "{got:?} vs {expected:?}");
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let (plant, _) = preset_system_2d();
        let reference = ReferenceModel::new(3, |_: &[f64], o: &mut [f64]| o.fill(0.0)).unwrap();
        assert!(matches!(augment(plant, reference), Err(Error::Config(_))));
        let model = preset_augmented_2d();
        assert!(matches!(
            model.drift(&[0.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn uncertainty_bound_defaults_to_zero() {
        let model = preset_augmented_2d();
        assert_eq!(model.uncertainty_bound(&[1.0, 2.0, 3.0, 4.0]), 0.0);
        let (p, r) = preset_system_2d();
        let p = p.with_uncertainty_bound(|z: &[f64]| 0.5 * libm::fabs(z[0]));
        let model = augment(p, r).unwrap();
        assert_eq!(model.uncertainty_bound(&[-2.0, 0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn augmented_state_split() {
        let z = AugmentedState::from_tracking(&[1.5, 1.5], &[1.0, 0.0]).unwrap();
        assert_eq!(z.error(), &[0.5, 1.5]);
        assert_eq!(z.desired(), &[1.0, 0.0]);
        assert!(AugmentedState::from_vec(vec![1.0; 3]).is_err());
    }
}
