use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Classical fourth-order Runge–Kutta with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` in place by `dt`, given the first stage `k1 = f(t, y)`.
    pub fn step_with_first_stage<F>(
        &mut self,
        mut deriv: F,
        t: f64,
        y: &mut [f64],
        dt: f64,
        k1: &[f64],
    ) where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let h2 = 0.5 * dt;
        for ((tmp, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(k1) {
            *tmp = yi + h2 * k;
        }
        deriv(t + h2, &self.tmp, &mut self.k2);
        for ((tmp, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k2) {
            *tmp = yi + h2 * k;
        }
        deriv(t + h2, &self.tmp, &mut self.k3);
        for ((tmp, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(&self.k3) {
            *tmp = yi + dt * k;
        }
        deriv(t + dt, &self.tmp, &mut self.k4);
        let h6 = dt / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h6 * (k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    pub fn step<F>(&mut self, mut deriv: F, t: f64, y: &mut [f64], dt: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let mut k1 = vec![0.0; y.len()];
        deriv(t, y, &mut k1);
        self.step_with_first_stage(deriv, t, y, dt, &k1);
    }
}

/// One RK4 step from `(t, y)`. `step_index` is reported if the result is not finite.
pub fn rk4_step<F>(deriv: F, y: &[f64], t: f64, dt: f64, step_index: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::config("integration step dt must be positive"));
    }
    let mut out = y.to_vec();
    Rk4::new(y.len()).step(deriv, t, &mut out, dt);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite { step: step_index })
    }
}
