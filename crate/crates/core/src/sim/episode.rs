use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::dither::dither;
use super::integrate::Rk4;
use super::metrics::{convergence_time, max_abs_input, steady_state_error};
use crate::critic::CriticState;
use crate::dynamics::AugmentedModel;
use crate::error::{check_len, Error, Result};
use crate::learning::{CriticPoint, LawConfig, UpdateLaw};
use crate::linalg::dot;

/// Episode settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Fixed RK4 step (s).
    pub dt: f64,
    /// Horizon (s).
    pub t_end: f64,
    /// Initial plant state `x(0)`.
    pub x0: Vec<f64>,
    /// Initial desired state `x_d(0)`.
    pub xd0: Vec<f64>,
    /// Initial critic weights `Ŵ(0)`.
    pub w0: Vec<f64>,
    pub dither_on: bool,
    pub dither_scale: f64,
    /// Feed the dithered input (instead of the noise-free `û`) into `φ` and `Σ`.
    pub dither_in_learning: bool,
    /// Reserved for randomized sweeps; the episode itself is deterministic.
    pub seed: u64,
    /// Keep every `record_stride`-th step (the final step is always kept).
    pub record_stride: usize,
    pub convergence_window: f64,
    pub convergence_tol: f64,
    pub steady_window: f64,
}

impl SimConfig {
    /// `dt = 1e-3`, dithering on at unit scale, stride 1, and a 50 s window
    /// with `1e-3` tolerance for the convergence metric.
    pub fn new(t_end: f64, x0: Vec<f64>, xd0: Vec<f64>, w0: Vec<f64>) -> Self {
        SimConfig {
            dt: 1e-3,
            t_end,
            x0,
            xd0,
            w0,
            dither_on: true,
            dither_scale: 1.0,
            dither_in_learning: false,
            seed: 0,
            record_stride: 1,
            convergence_window: 50.0,
            convergence_tol: 1e-3,
            steady_window: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt must be positive"));
        }
        if !(self.t_end > self.dt && self.t_end.is_finite()) {
            return Err(Error::config("t_end must exceed dt"));
        }
        check_len("desired initial state", self.x0.len(), self.xd0.len())?;
        if self.record_stride == 0 {
            return Err(Error::config("record_stride must be at least 1"));
        }
        if !self.dither_scale.is_finite() {
            return Err(Error::config("dither_scale must be finite"));
        }
        if !(self.convergence_window >= 0.0
            && self.convergence_tol >= 0.0
            && self.steady_window >= 0.0)
        {
            return Err(Error::config(
                "metric windows and tolerance must be nonnegative",
            ));
        }
        Ok(())
    }

    /// Number of integration steps, `round(t_end / dt)`.
    pub fn steps(&self) -> usize {
        libm::round(self.t_end / self.dt) as usize
    }
}

/// Snapshot at the start of an accepted step (plus one at the horizon).
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub z: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub weights: Vec<f64>,
    pub e_hjb: f64,
    pub g1: f64,
    pub xi: bool,
    pub sigma: f64,
    pub v_hat: f64,
}

impl TelemetryRecord {
    pub fn error_norm(&self) -> f64 {
        let n = self.z.len() / 2;
        libm::sqrt(dot(&self.z[..n], &self.z[..n]))
    }
}

/// Receives every kept record as the episode runs.
pub trait TelemetrySink {
    fn record(&mut self, rec: &TelemetryRecord);
}

impl TelemetrySink for () {
    fn record(&mut self, _rec: &TelemetryRecord) {}
}

impl<S: TelemetrySink + ?Sized> TelemetrySink for &mut S {
    fn record(&mut self, rec: &TelemetryRecord) {
        (**self).record(rec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub law: UpdateLaw,
    /// `None` when the weights never settle within the horizon.
    pub convergence_time: Option<f64>,
    pub steady_state_rms: f64,
    pub final_weights: Vec<f64>,
    /// Largest `|u_applied,i|` over every step.
    pub max_abs_u: f64,
    pub steps: usize,
    pub trajectory: Vec<TelemetryRecord>,
}

impl ExperimentResult {
    pub fn convergence_time(&self, window: f64, tol: f64) -> Option<f64> {
        convergence_time(&self.trajectory, window, tol)
    }

    pub fn steady_state_error(&self, window: f64) -> f64 {
        steady_state_error(&self.trajectory, window)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("episode diverged at step {step} (t = {t} s)")]
    Diverged {
        step: usize,
        t: f64,
        /// Everything recorded before the failure.
        partial: Box<ExperimentResult>,
    },
}

struct Evaluator<'a> {
    model: &'a AugmentedModel,
    critic: &'a CriticState,
    law: UpdateLaw,
    cfg: &'a LawConfig,
    sim: &'a SimConfig,
    dim: usize,
}

struct Sample {
    point: CriticPoint,
    u_applied: Vec<f64>,
    e_hjb: f64,
    g1: f64,
    xi: bool,
    sigma: f64,
}

impl Evaluator<'_> {
    fn sample(&self, t: f64, y: &[f64], out: &mut [f64]) -> Sample {
        let (z, w) = y.split_at(self.dim);
        let point = CriticPoint::evaluate_unchecked(
            self.model,
            self.critic.basis(),
            w,
            self.cfg.constraint(),
            z,
        );
        let u_max = self.cfg.constraint().u_max();
        let u_applied: Vec<f64> = if self.sim.dither_on {
            let n = self.sim.dither_scale * dither(t);
            point
                .u_hat
                .iter()
                .map(|u| (u + n).clamp(-u_max, u_max))
                .collect()
        } else {
            point.u_hat.clone()
        };
        let u_learn = if self.sim.dither_in_learning {
            &u_applied
        } else {
            &point.u_hat
        };
        let (wdot, diag) = point.weight_derivative(self.law, w, self.cfg, u_learn);
        let zdot = point.closed_loop_rate(&u_applied);
        out[..self.dim].copy_from_slice(&zdot);
        out[self.dim..].copy_from_slice(&wdot);
        Sample {
            point,
            u_applied,
            e_hjb: diag.e_hjb,
            g1: diag.g1,
            xi: diag.xi,
            sigma: diag.sigma,
        }
    }

    fn record(&self, t: f64, y: &[f64], s: Sample) -> TelemetryRecord {
        let (z, w) = y.split_at(self.dim);
        TelemetryRecord {
            t,
            z: z.to_vec(),
            u_applied: s.u_applied,
            weights: w.to_vec(),
            e_hjb: s.e_hjb,
            g1: s.g1,
            xi: s.xi,
            sigma: s.sigma,
            v_hat: dot(w, &s.point.theta),
        }
    }
}

/// Integrates `ż = F(z) + G(z)u_applied` and `Ẇ = law(z, Ŵ)` as one vector.
pub fn run_episode(
    model: &AugmentedModel,
    critic0: &CriticState,
    law: UpdateLaw,
    cfg: &LawConfig,
    sim: &SimConfig,
) -> Result<ExperimentResult, EpisodeError> {
    run_episode_with_sink(model, critic0, law, cfg, sim, &mut ())
}

/// [`run_episode`], streaming every kept record to `sink` as it is produced.
pub fn run_episode_with_sink<S: TelemetrySink + ?Sized>(
    model: &AugmentedModel,
    critic0: &CriticState,
    law: UpdateLaw,
    cfg: &LawConfig,
    sim: &SimConfig,
    sink: &mut S,
) -> Result<ExperimentResult, EpisodeError> {
    sim.validate()?;
    cfg.check_against(model, critic0)?;
    check_len("initial plant state", model.state_dim(), sim.x0.len())?;
    check_len("initial weights", critic0.basis().len(), sim.w0.len())?;

    let dim = model.dim();
    let n = model.state_dim();
    let mut y = Vec::with_capacity(dim + sim.w0.len());
    y.extend(sim.x0.iter().zip(&sim.xd0).map(|(x, xd)| x - xd));
    y.extend_from_slice(&sim.xd0);
    y.extend_from_slice(&sim.w0);
    debug_assert_eq!(y.len(), dim + critic0.basis().len());
    debug_assert_eq!(y[n..dim], sim.xd0[..]);

    let eval = Evaluator {
        model,
        critic: critic0,
        law,
        cfg,
        sim,
        dim,
    };
    let steps = sim.steps();
    let stride = sim.record_stride;
    let mut rk = Rk4::new(y.len());
    let mut k1 = vec![0.0; y.len()];
    let mut trajectory = Vec::with_capacity(steps / stride + 2);
    let mut max_abs_u = 0.0f64;

    let finish = |trajectory: Vec<TelemetryRecord>, y: &[f64], max_abs_u: f64, steps: usize| {
        let convergence =
            convergence_time(&trajectory, sim.convergence_window, sim.convergence_tol);
        let rms = steady_state_error(&trajectory, sim.steady_window);
        ExperimentResult {
            law,
            convergence_time: convergence,
            steady_state_rms: rms,
            final_weights: y[dim..].to_vec(),
            max_abs_u: max_abs_u.max(max_abs_input(&trajectory)),
            steps,
            trajectory,
        }
    };

    for step in 0..=steps {
        let t = step as f64 * sim.dt;
        let sample = eval.sample(t, &y, &mut k1);
        let finite = k1.iter().all(|v| v.is_finite()) && sample.e_hjb.is_finite();
        max_abs_u = sample
            .u_applied
            .iter()
            .fold(max_abs_u, |a, u| a.max(libm::fabs(*u)));
        if !finite {
            let partial = finish(trajectory, &y, max_abs_u, step);
            return Err(EpisodeError::Diverged {
                step,
                t,
                partial: Box::new(partial),
            });
        }
        if step % stride == 0 || step == steps {
            let rec = eval.record(t, &y, sample);
            sink.record(&rec);
            trajectory.push(rec);
        }
        if step == steps {
            break;
        }
        rk.step_with_first_stage(
            |tt, yy, out| {
                eval.sample(tt, yy, out);
            },
            t,
            &mut y,
            sim.dt,
            &k1,
        );
        if !y.iter().all(|v| v.is_finite()) {
            let partial = finish(trajectory, &y, max_abs_u, step + 1);
            return Err(EpisodeError::Diverged {
                step: step + 1,
                t: t + sim.dt,
                partial: Box::new(partial),
            });
        }
    }

    Ok(finish(trajectory, &y, max_abs_u, steps))
}
