//! Running scenarios to disk and comparing two of them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vgcritic_core::analysis::{bound_report, BoundReport};
use vgcritic_core::critic::CriticState;
use vgcritic_core::learning::CriticPoint;
use vgcritic_core::sim::{
    convergence_time, max_abs_input, run_episode_with_sink, steady_state_error, EpisodeError,
    ExperimentResult, SimConfig, TelemetryRecord,
};

use crate::config::{Built, ConfigError, Scenario};
use crate::telemetry::{read_telemetry, CsvSink, ReadError};

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const SCENARIO_FILE: &str = "scenario.cfg";
pub const COMPARISON_FILE: &str = "comparison.txt";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenarios must agree on {0}")]
    Mismatch(String),
    #[error("{name}: episode diverged at t = {t} s (step {step}); partial telemetry kept in {}", dir.display())]
    Diverged {
        name: String,
        step: usize,
        t: f64,
        dir: PathBuf,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Read(#[from] ReadError),
}

impl RunError {
    /// Process exit code: 2 for bad input, 1 for divergence, 3 for IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Mismatch(_) => 2,
            RunError::Diverged { .. } => 1,
            RunError::Io { .. } | RunError::Csv(_) | RunError::Read(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Headline numbers written to `summary.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub convergence_time: Option<f64>,
    pub steady_state_rms: f64,
    pub max_abs_u: f64,
}

impl Metrics {
    pub fn from_records(records: &[TelemetryRecord], sim: &SimConfig) -> Self {
        Metrics {
            convergence_time: convergence_time(
                records,
                sim.convergence_window,
                sim.convergence_tol,
            ),
            steady_state_rms: steady_state_error(records, sim.steady_window),
            max_abs_u: max_abs_input(records),
        }
    }

    fn from_result(r: &ExperimentResult) -> Self {
        Metrics {
            convergence_time: r.convergence_time,
            steady_state_rms: r.steady_state_rms,
            max_abs_u: r.max_abs_u,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

pub struct RunOutcome {
    pub result: ExperimentResult,
    pub metrics: Metrics,
    pub bounds: BoundReport,
    pub dir: PathBuf,
}

fn final_bounds(
    sc: &Scenario,
    built: &Built,
    last: Option<&TelemetryRecord>,
) -> Result<BoundReport, ConfigError> {
    let cfg = &built.law_cfg;
    let phi = match last {
        Some(rec) => {
            let mut critic: CriticState = built.critic.clone();
            critic
                .set_weights(&rec.weights)
                .map_err(|source| ConfigError::Invalid {
                    section: "critic",
                    source,
                })?;
            let p = CriticPoint::evaluate(&built.model, &critic, cfg.constraint(), &rec.z)
                .map_err(|source| ConfigError::Invalid {
                    section: "system",
                    source,
                })?;
            p.regressor_rate(&p.u_hat, cfg.gamma())
        }
        None => vec![0.0; cfg.k1().len()],
    };
    bound_report(cfg.k1(), cfg.k2(), sc.bounds, &phi, built.model.input_dim()).map_err(|source| {
        ConfigError::Invalid {
            section: "analysis",
            source,
        }
    })
}

fn write_summary(
    path: &Path,
    sc: &Scenario,
    status: &str,
    metrics: &Metrics,
    steps: usize,
    final_weights: &[f64],
    bounds: &BoundReport,
) -> Result<(), RunError> {
    let mut s = String::new();
    let _ = writeln!(s, "scenario={}", sc.name);
    let _ = writeln!(s, "law={}", sc.law);
    let _ = writeln!(s, "status={status}");
    let _ = writeln!(
        s,
        "convergence_time_s={}",
        fmt_opt(metrics.convergence_time)
    );
    let _ = writeln!(s, "steady_state_rms={}", metrics.steady_state_rms);
    let _ = writeln!(s, "max_abs_u={}", metrics.max_abs_u);
    let _ = writeln!(s, "steps={steps}");
    let w: Vec<String> = final_weights.iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(s, "final_weights={}", w.join(","));
    s.push_str("\n[bounds]\n");
    for (k, v) in bounds.to_lines() {
        let _ = writeln!(s, "{k}={v}");
    }
    fs::write(path, s).map_err(io_err(path))
}

/// Runs one scenario, writing `telemetry.csv`, `summary.txt` and the
/// effective `scenario.cfg` into `out`. On divergence the partial telemetry
/// and a `status=diverged` summary are kept.
pub fn run_scenario(sc: &Scenario, out: &Path) -> Result<RunOutcome, RunError> {
    let built = sc.build()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let cfg_path = out.join(SCENARIO_FILE);
    fs::write(&cfg_path, sc.to_config_string()).map_err(io_err(&cfg_path))?;

    let csv_path = out.join(TELEMETRY_FILE);
    let mut sink = CsvSink::create(
        &csv_path,
        built.model.dim(),
        built.model.input_dim(),
        built.critic.basis().len(),
    )?;
    log::info!(
        "{}: {} law, {} steps of {} s",
        sc.name,
        sc.law,
        sc.sim.steps(),
        sc.sim.dt
    );
    let res = run_episode_with_sink(
        &built.model,
        &built.critic,
        sc.law,
        &built.law_cfg,
        &sc.sim,
        &mut sink,
    );
    sink.finish()?;

    let summary_path = out.join(SUMMARY_FILE);
    match res {
        Ok(result) => {
            let metrics = Metrics::from_result(&result);
            let bounds = final_bounds(sc, &built, result.trajectory.last())?;
            write_summary(
                &summary_path,
                sc,
                "completed",
                &metrics,
                result.steps,
                &result.final_weights,
                &bounds,
            )?;
            log::info!(
                "{}: convergence_time_s={} steady_state_rms={} max_abs_u={}",
                sc.name,
                fmt_opt(metrics.convergence_time),
                metrics.steady_state_rms,
                metrics.max_abs_u
            );
            Ok(RunOutcome {
                result,
                metrics,
                bounds,
                dir: out.to_path_buf(),
            })
        }
        Err(EpisodeError::Invalid(source)) => Err(ConfigError::Invalid {
            section: "sim",
            source,
        }
        .into()),
        Err(EpisodeError::Diverged { step, t, partial }) => {
            let metrics = Metrics::from_result(&partial);
            let bounds = final_bounds(sc, &built, partial.trajectory.last())?;
            write_summary(
                &summary_path,
                sc,
                "diverged",
                &metrics,
                partial.steps,
                &partial.final_weights,
                &bounds,
            )?;
            Err(RunError::Diverged {
                name: sc.name.clone(),
                step,
                t,
                dir: out.to_path_buf(),
            })
        }
    }
}

/// Fields two scenarios must share to be compared.
pub fn check_shared(a: &Scenario, b: &Scenario) -> Result<(), RunError> {
    if a.system != b.system {
        return Err(RunError::Mismatch("[system]".into()));
    }
    if a.params.u_max != b.params.u_max {
        return Err(RunError::Mismatch(format!(
            "[law] u_max ({} vs {})",
            a.params.u_max, b.params.u_max
        )));
    }
    if a.sim.seed != b.sim.seed {
        return Err(RunError::Mismatch(format!(
            "[sim] seed ({} vs {})",
            a.sim.seed, b.sim.seed
        )));
    }
    if a.sim != b.sim {
        return Err(RunError::Mismatch("[sim]".into()));
    }
    Ok(())
}

/// `a / b`, with `0 / 0 = 1`.
pub fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: Metrics,
    pub b: Metrics,
    /// `None` when either run never settles.
    pub convergence_time_ratio: Option<f64>,
    pub steady_state_rms_ratio: f64,
    pub max_abs_u_ratio: f64,
}

impl Comparison {
    pub fn new(a: Metrics, b: Metrics) -> Self {
        Comparison {
            convergence_time_ratio: a
                .convergence_time
                .zip(b.convergence_time)
                .map(|(x, y)| ratio(x, y)),
            steady_state_rms_ratio: ratio(a.steady_state_rms, b.steady_state_rms),
            max_abs_u_ratio: ratio(a.max_abs_u, b.max_abs_u),
            a,
            b,
        }
    }

    pub fn to_text(&self, a: &Scenario, b: &Scenario) -> String {
        let mut s = String::new();
        for (tag, sc, m) in [("a", a, &self.a), ("b", b, &self.b)] {
            let _ = writeln!(s, "{tag}.scenario={}", sc.name);
            let _ = writeln!(s, "{tag}.law={}", sc.law);
            let _ = writeln!(
                s,
                "{tag}.convergence_time_s={}",
                fmt_opt(m.convergence_time)
            );
            let _ = writeln!(s, "{tag}.steady_state_rms={}", m.steady_state_rms);
            let _ = writeln!(s, "{tag}.max_abs_u={}", m.max_abs_u);
        }
        let _ = writeln!(
            s,
            "ratio.convergence_time={}",
            fmt_opt(self.convergence_time_ratio)
        );
        let _ = writeln!(s, "ratio.steady_state_rms={}", self.steady_state_rms_ratio);
        let _ = writeln!(s, "ratio.max_abs_u={}", self.max_abs_u_ratio);
        s
    }
}

/// Runs both scenarios concurrently into `out/a` and `out/b`, then computes
/// the ratios `a / b` from the telemetry files they wrote.
pub fn compare(a: &Scenario, b: &Scenario, out: &Path) -> Result<Comparison, RunError> {
    check_shared(a, b)?;
    a.build()?;
    b.build()?;
    let (dir_a, dir_b) = (out.join("a"), out.join("b"));
    let (ra, rb) = std::thread::scope(|s| {
        let ha = s.spawn(|| run_scenario(a, &dir_a));
        let hb = s.spawn(|| run_scenario(b, &dir_b));
        (ha.join(), hb.join())
    });
    let ra = ra.unwrap_or_else(|p| std::panic::resume_unwind(p));
    let rb = rb.unwrap_or_else(|p| std::panic::resume_unwind(p));
    ra?;
    rb?;
    let ma = Metrics::from_records(&read_telemetry(&dir_a.join(TELEMETRY_FILE))?, &a.sim);
    let mb = Metrics::from_records(&read_telemetry(&dir_b.join(TELEMETRY_FILE))?, &b.sim);
    let cmp = Comparison::new(ma, mb);
    let path = out.join(COMPARISON_FILE);
    fs::write(&path, cmp.to_text(a, b)).map_err(io_err(&path))?;
    Ok(cmp)
}

/// Parses `key=value` lines (sections ignored) from a summary or comparison file.
pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>, RunError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}
