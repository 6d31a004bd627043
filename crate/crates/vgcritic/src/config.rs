//! Scenario files: flat `key = value` lines grouped under `[section]` headers.
//!
//! ```text
//! [scenario]
//! name = um9-variable
//! law = variable            # variable | constant | plain
//!
//! [system]
//! preset = tracking-2d         # or n, m, f1.., g1_1.., h1.., d_m as expressions
//!
//! [critic]
//! basis = tracking-2d          # tracking-2d | quadratic | terms = 2,0,0,0; 0,2,0,0; ...
//!
//! [law]
//! alpha = 35.9
//! k2 = 1.4                  # gain exponent
//! K1 = 0.001                # one value is broadcast over the basis
//! K2 = 0.001                # one value means 0.001 * I, rows are `;`-separated
//! ...
//! ```
//!
//! [`Scenario::to_config_string`] writes every field in canonical form, so
//! parsing its output yields an identical [`Scenario`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use vgcritic_core::analysis::BoundInputs;
use vgcritic_core::control::{ControlConstraint, CostWeights};
use vgcritic_core::critic::{quadratic_basis, tracking_basis_2d, CriticState, RegressorBasis};
use vgcritic_core::dynamics::{
    augment, preset_system_2d, AugmentedModel, PlantModel, ReferenceModel,
};
use vgcritic_core::learning::{LawConfig, UpdateLaw, DEFAULT_GAIN_OFFSET, DEFAULT_SHAPING_GAIN};
use vgcritic_core::linalg::Matrix;
use vgcritic_core::sim::SimConfig;

use crate::expr::{Expr, ExprError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("[{section}] {key}: {msg}")]
    Field {
        section: &'static str,
        key: String,
        msg: String,
    },
    #[error("[{section}] {key}: {source}")]
    Expression {
        section: &'static str,
        key: String,
        source: ExprError,
    },
    #[error("[{section}] {source}")]
    Invalid {
        section: &'static str,
        source: vgcritic_core::Error,
    },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

fn in_section(section: &'static str) -> impl Fn(vgcritic_core::Error) -> ConfigError {
    move |source| ConfigError::Invalid { section, source }
}

fn field(section: &'static str, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        section,
        key: key.to_string(),
        msg: msg.into(),
    }
}

/// Plant and reference given as expression strings.
#[derive(Debug, Clone, PartialEq)]
pub struct InlineSystem {
    pub n: usize,
    pub m: usize,
    /// `f₁..fₙ` over `x1..xn`.
    pub f: Vec<String>,
    /// `g` row-major, `n × m`, over `x1..xn`.
    pub g: Vec<String>,
    /// `h₁..hₙ` over `xd1..xdn`.
    pub h: Vec<String>,
    /// `d_M` over `z1..z2n`.
    pub d_m: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemSpec {
    /// Only `tracking-2d` ships.
    Preset(String),
    Inline(InlineSystem),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisSpec {
    Tracking2d,
    /// Every quadratic monomial over `z`.
    Quadratic,
    Terms(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawParams {
    pub alpha: f64,
    pub k2: f64,
    pub l: f64,
    pub k1_gains: Vec<f64>,
    pub k2_gains: Matrix,
    pub gamma: f64,
    pub u_max: f64,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub law: UpdateLaw,
    pub system: SystemSpec,
    pub basis: BasisSpec,
    pub params: LawParams,
    pub sim: SimConfig,
    pub bounds: BoundInputs,
}

/// Runtime objects assembled from a [`Scenario`].
pub struct Built {
    pub model: AugmentedModel,
    pub critic: CriticState,
    pub law_cfg: LawConfig,
}

const PRESET_NAMES: [&str; 6] = [
    "um9-variable",
    "um9-constant",
    "um9-plain",
    "um18-variable",
    "um18-constant",
    "um18-plain",
];

/// Names accepted by [`preset`].
pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}

/// Shaping gain scale used by the shipped scenarios. Larger values make the
/// variable-gain transient stiff at `dt = 1e-3`.
pub const PRESET_SHAPING_GAIN: f64 = 1e-3;

/// The two-input-bound experiment on the 2-D plant.
pub fn preset(name: &str) -> Result<Scenario, ConfigError> {
    let (bound, law) = name
        .split_once('-')
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    let law: UpdateLaw = law
        .parse()
        .map_err(|_| ConfigError::UnknownPreset(name.to_string()))?;
    let (u_max, alpha, k2, t_end) = match bound {
        "um9" => (9.0, 35.9, 1.4, 1500.0),
        "um18" => (1.8, 92.9, 0.7, 3000.0),
        _ => return Err(ConfigError::UnknownPreset(name.to_string())),
    };
    let n_terms = 10;
    Ok(Scenario {
        name: name.to_string(),
        law,
        system: SystemSpec::Preset("tracking-2d".into()),
        basis: BasisSpec::Tracking2d,
        params: LawParams {
            alpha,
            k2,
            l: DEFAULT_GAIN_OFFSET,
            k1_gains: vec![PRESET_SHAPING_GAIN; n_terms],
            k2_gains: Matrix::from_diagonal(&vec![PRESET_SHAPING_GAIN; n_terms]),
            gamma: 0.1,
            u_max,
            r: vec![1.0],
            q: vec![10.0, 10.0],
        },
        sim: SimConfig::new(t_end, vec![1.5, 1.5], vec![0.5, 0.0], vec![0.0; n_terms]),
        bounds: BoundInputs::default(),
    })
}

fn state_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn compile(
    section: &'static str,
    key: &str,
    src: &str,
    vars: &[String],
) -> Result<Expr, ConfigError> {
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    Expr::parse(src, &names).map_err(|source| ConfigError::Expression {
        section,
        key: key.to_string(),
        source,
    })
}

impl InlineSystem {
    fn build(&self) -> Result<(PlantModel, ReferenceModel), ConfigError> {
        let xs = state_names("x", self.n);
        let xds = state_names("xd", self.n);
        let zs = state_names("z", 2 * self.n);
        let f: Vec<Expr> = self
            .f
            .iter()
            .enumerate()
            .map(|(i, s)| compile("system", &format!("f{}", i + 1), s, &xs))
            .collect::<Result<_, _>>()?;
        let g: Vec<Expr> = self
            .g
            .iter()
            .enumerate()
            .map(|(k, s)| {
                compile(
                    "system",
                    &format!("g{}_{}", k / self.m + 1, k % self.m + 1),
                    s,
                    &xs,
                )
            })
            .collect::<Result<_, _>>()?;
        let h: Vec<Expr> = self
            .h
            .iter()
            .enumerate()
            .map(|(i, s)| compile("system", &format!("h{}", i + 1), s, &xds))
            .collect::<Result<_, _>>()?;
        let (f, g, h) = (Arc::new(f), Arc::new(g), Arc::new(h));
        let mut plant = PlantModel::new(
            self.n,
            self.m,
            move |x: &[f64], out: &mut [f64]| {
                for (o, e) in out.iter_mut().zip(f.iter()) {
                    *o = e.eval(x);
                }
            },
            move |x: &[f64], out: &mut [f64]| {
                for (o, e) in out.iter_mut().zip(g.iter()) {
                    *o = e.eval(x);
                }
            },
        )
        .map_err(in_section("system"))?;
        if let Some(src) = &self.d_m {
            let d = compile("system", "d_m", src, &zs)?;
            // only d_M² enters the cost
            plant = plant.with_uncertainty_bound(move |z: &[f64]| d.eval(z).abs());
        }
        let reference = ReferenceModel::new(self.n, move |xd: &[f64], out: &mut [f64]| {
            for (o, e) in out.iter_mut().zip(h.iter()) {
                *o = e.eval(xd);
            }
        })
        .map_err(in_section("system"))?;
        Ok((plant, reference))
    }
}

impl SystemSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            SystemSpec::Preset(_) => 2,
            SystemSpec::Inline(s) => s.n,
        }
    }

    pub fn build(&self) -> Result<AugmentedModel, ConfigError> {
        let (p, r) = match self {
            SystemSpec::Preset(name) if name == "tracking-2d" => preset_system_2d(),
            SystemSpec::Preset(name) => {
                return Err(field(
                    "system",
                    "preset",
                    format!("unknown system `{name}`"),
                ))
            }
            SystemSpec::Inline(s) => s.build()?,
        };
        augment(p, r).map_err(in_section("system"))
    }
}

impl BasisSpec {
    pub fn build(&self, dim: usize) -> Result<RegressorBasis, ConfigError> {
        Ok(match self {
            BasisSpec::Tracking2d => {
                if dim != 4 {
                    return Err(field(
                        "critic",
                        "basis",
                        "tracking-2d needs a 2-state plant",
                    ));
                }
                tracking_basis_2d()
            }
            BasisSpec::Quadratic => quadratic_basis(dim),
            BasisSpec::Terms(t) => RegressorBasis::new(t.clone()).map_err(in_section("critic"))?,
        })
    }

    fn len(&self, dim: usize) -> usize {
        match self {
            BasisSpec::Tracking2d => 10,
            BasisSpec::Quadratic => dim * (dim + 1) / 2,
            BasisSpec::Terms(t) => t.len(),
        }
    }
}

impl Scenario {
    /// Validates every nested config and assembles the runtime objects.
    pub fn build(&self) -> Result<Built, ConfigError> {
        let model = self.system.build()?;
        let basis = self.basis.build(model.dim())?;
        let p = &self.params;
        let constraint = ControlConstraint::new(p.u_max, p.r.clone()).map_err(in_section("law"))?;
        let cost = CostWeights::new(p.q.clone(), p.gamma).map_err(in_section("law"))?;
        let law_cfg = LawConfig::new(
            p.alpha,
            p.k2,
            p.l,
            p.k1_gains.clone(),
            p.k2_gains.clone(),
            constraint,
            cost,
        )
        .map_err(in_section("law"))?;
        let critic = CriticState::new(basis, self.sim.w0.clone()).map_err(|_| {
            field(
                "sim",
                "w0",
                format!("expected {} entries", self.basis.len(model.dim())),
            )
        })?;
        self.sim.validate().map_err(in_section("sim"))?;
        if self.sim.x0.len() != model.state_dim() {
            return Err(field(
                "sim",
                "x0",
                format!("expected {} entries", model.state_dim()),
            ));
        }
        if p.r.len() != model.input_dim() {
            return Err(field(
                "law",
                "R",
                format!("expected {} entries", model.input_dim()),
            ));
        }
        if p.q.len() != model.state_dim() {
            return Err(field(
                "law",
                "Q",
                format!("expected {} entries", model.state_dim()),
            ));
        }
        Ok(Built {
            model,
            critic,
            law_cfg,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let sections = split_sections(text)?;
        let mut r = Reader { sections };
        let s = r.scenario()?;
        r.finish()?;
        Ok(s)
    }

    /// Canonical text form; [`Scenario::parse`] inverts it exactly.
    pub fn to_config_string(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(o, "[scenario]\nname = {}\nlaw = {}\n", self.name, self.law);
        o.push_str("[system]\n");
        match &self.system {
            SystemSpec::Preset(p) => {
                let _ = writeln!(o, "preset = {p}");
            }
            SystemSpec::Inline(s) => {
                let _ = writeln!(o, "n = {}\nm = {}", s.n, s.m);
                for (i, e) in s.f.iter().enumerate() {
                    let _ = writeln!(o, "f{} = {e}", i + 1);
                }
                for (k, e) in s.g.iter().enumerate() {
                    let _ = writeln!(o, "g{}_{} = {e}", k / s.m + 1, k % s.m + 1);
                }
                for (i, e) in s.h.iter().enumerate() {
                    let _ = writeln!(o, "h{} = {e}", i + 1);
                }
                if let Some(d) = &s.d_m {
                    let _ = writeln!(o, "d_m = {d}");
                }
            }
        }
        o.push_str("\n[critic]\n");
        match &self.basis {
            BasisSpec::Tracking2d => o.push_str("basis = tracking-2d\n"),
            BasisSpec::Quadratic => o.push_str("basis = quadratic\n"),
            BasisSpec::Terms(t) => {
                let rows: Vec<String> = t
                    .iter()
                    .map(|r| r.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
                    .collect();
                let _ = writeln!(o, "terms = {}", rows.join("; "));
            }
        }
        let p = &self.params;
        let k2_rows: Vec<String> = (0..p.k2_gains.rows())
            .map(|i| list(p.k2_gains.row(i)))
            .collect();
        let _ = writeln!(
            o,
            "\n[law]\nalpha = {}\nk2 = {}\nl = {}\nK1 = {}\nK2 = {}\ngamma = {}\nu_max = {}\nR = {}\nQ = {}",
            p.alpha,
            p.k2,
            p.l,
            list(&p.k1_gains),
            k2_rows.join("; "),
            p.gamma,
            p.u_max,
            list(&p.r),
            list(&p.q)
        );
        let s = &self.sim;
        let _ = writeln!(
            o,
            "\n[sim]\ndt = {}\nt_end = {}\nx0 = {}\nxd0 = {}\nw0 = {}\ndither = {}\ndither_scale = {}\n\
             dither_in_learning = {}\nseed = {}\nrecord_stride = {}\nconvergence_window = {}\n\
             convergence_tol = {}\nsteady_window = {}",
            s.dt,
            s.t_end,
            list(&s.x0),
            list(&s.xd0),
            list(&s.w0),
            s.dither_on,
            s.dither_scale,
            s.dither_in_learning,
            s.seed,
            s.record_stride,
            s.convergence_window,
            s.convergence_tol,
            s.steady_window
        );
        let b = &self.bounds;
        let _ = writeln!(
            o,
            "\n[analysis]\ngamma1 = {}\nalpha2 = {}\nb_n = {}",
            b.gamma1, b.alpha2, b.b_n
        );
        o
    }
}

fn list(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

type Sections = BTreeMap<String, BTreeMap<String, (usize, String)>>;

fn split_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                })?
                .trim()
                .to_string();
            if out.contains_key(&name) {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("section [{name}] appears twice"),
                });
            }
            out.insert(name.clone(), BTreeMap::new());
            current = Some(name);
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let sec = current.as_ref().ok_or_else(|| ConfigError::Syntax {
            line: line_no,
            msg: "key outside of any section".into(),
        })?;
        let map = out.get_mut(sec).expect("section inserted above");
        let key = k.trim().to_string();
        if map
            .insert(key.clone(), (line_no, v.trim().to_string()))
            .is_some()
        {
            return Err(ConfigError::Syntax {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(out)
}

const SECTIONS: [&str; 6] = ["scenario", "system", "critic", "law", "sim", "analysis"];

struct Reader {
    sections: Sections,
}

impl Reader {
    fn take(&mut self, section: &'static str, key: &str) -> Option<String> {
        self.sections.get_mut(section)?.remove(key).map(|(_, v)| v)
    }

    fn required(&mut self, section: &'static str, key: &str) -> Result<String, ConfigError> {
        self.take(section, key)
            .ok_or_else(|| field(section, key, "missing"))
    }

    fn num<T: std::str::FromStr>(
        &mut self,
        section: &'static str,
        key: &str,
        default: Option<T>,
    ) -> Result<T, ConfigError> {
        match self.take(section, key) {
            Some(v) => v
                .parse()
                .map_err(|_| field(section, key, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| field(section, key, "missing")),
        }
    }

    fn list(
        &mut self,
        section: &'static str,
        key: &str,
        default: Option<Vec<f64>>,
    ) -> Result<Vec<f64>, ConfigError> {
        match self.take(section, key) {
            Some(v) => parse_list(&v).map_err(|m| field(section, key, m)),
            None => default.ok_or_else(|| field(section, key, "missing")),
        }
    }

    fn flag(
        &mut self,
        section: &'static str,
        key: &str,
        default: bool,
    ) -> Result<bool, ConfigError> {
        match self.take(section, key).as_deref() {
            None => Ok(default),
            Some("true" | "on" | "1") => Ok(true),
            Some("false" | "off" | "0") => Ok(false),
            Some(v) => Err(field(
                section,
                key,
                format!("expected true/false, got `{v}`"),
            )),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        for (sec, keys) in &self.sections {
            let Some(&s) = SECTIONS.iter().find(|s| **s == sec.as_str()) else {
                let line = keys.values().map(|(l, _)| *l).min().unwrap_or(0);
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("unknown section [{sec}]"),
                });
            };
            if let Some((k, _)) = keys.iter().next() {
                return Err(field(s, k, "unknown key"));
            }
        }
        Ok(())
    }

    fn system(&mut self) -> Result<SystemSpec, ConfigError> {
        if let Some(p) = self.take("system", "preset") {
            return Ok(SystemSpec::Preset(p));
        }
        let n: usize = self.num("system", "n", None)?;
        let m: usize = self.num("system", "m", None)?;
        let mut f = Vec::with_capacity(n);
        let mut h = Vec::with_capacity(n);
        let mut g = Vec::with_capacity(n * m);
        for i in 1..=n {
            f.push(self.required("system", &format!("f{i}"))?);
            h.push(self.required("system", &format!("h{i}"))?);
            for j in 1..=m {
                g.push(self.required("system", &format!("g{i}_{j}"))?);
            }
        }
        let d_m = self.take("system", "d_m");
        Ok(SystemSpec::Inline(InlineSystem { n, m, f, g, h, d_m }))
    }

    fn basis(&mut self) -> Result<BasisSpec, ConfigError> {
        let basis = self.take("critic", "basis");
        let terms = self.take("critic", "terms");
        match (basis.as_deref(), terms) {
            (Some(_), Some(_)) => Err(field(
                "critic",
                "terms",
                "give either `basis` or `terms`, not both",
            )),
            (None | Some("quadratic"), None) => Ok(BasisSpec::Quadratic),
            (Some("tracking-2d"), None) => Ok(BasisSpec::Tracking2d),
            (Some(b), None) => Err(field("critic", "basis", format!("unknown basis `{b}`"))),
            (None, Some(t)) => {
                let rows = t
                    .split(';')
                    .map(|row| {
                        row.split(',')
                            .map(|e| e.trim().parse::<u32>())
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| field("critic", "terms", e.to_string()))?;
                Ok(BasisSpec::Terms(rows))
            }
        }
    }

    fn scenario(&mut self) -> Result<Scenario, ConfigError> {
        let name = self.required("scenario", "name")?;
        let law_s = self.required("scenario", "law")?;
        let law: UpdateLaw = law_s.parse().map_err(|_| {
            field(
                "scenario",
                "law",
                format!("expected variable, constant or plain, got `{law_s}`"),
            )
        })?;
        let system = self.system()?;
        let basis = self.basis()?;
        let n = system.state_dim();
        let n_terms = basis.len(2 * n);

        let k1_gains = match self.list("law", "K1", Some(vec![DEFAULT_SHAPING_GAIN]))? {
            v if v.len() == 1 => vec![v[0]; n_terms],
            v => v,
        };
        let k2_gains = match self.take("law", "K2") {
            None => Matrix::from_diagonal(&vec![DEFAULT_SHAPING_GAIN; n_terms]),
            Some(v) => {
                let rows = v
                    .split(';')
                    .map(parse_list)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| field("law", "K2", m))?;
                if rows.len() == 1 && rows[0].len() == 1 {
                    Matrix::from_diagonal(&vec![rows[0][0]; n_terms])
                } else {
                    Matrix::from_rows(&rows).map_err(|e| field("law", "K2", e.to_string()))?
                }
            }
        };
        let params = LawParams {
            alpha: self.num("law", "alpha", None)?,
            k2: self.num("law", "k2", None)?,
            l: self.num("law", "l", Some(DEFAULT_GAIN_OFFSET))?,
            k1_gains,
            k2_gains,
            gamma: self.num("law", "gamma", Some(0.1))?,
            u_max: self.num("law", "u_max", None)?,
            r: self.list("law", "R", Some(vec![1.0]))?,
            q: self.list("law", "Q", Some(vec![10.0; n]))?,
        };

        let t_end = self.num("sim", "t_end", None)?;
        let x0 = self.list("sim", "x0", None)?;
        let xd0 = self.list("sim", "xd0", None)?;
        let w0 = self.list("sim", "w0", Some(vec![0.0; n_terms]))?;
        let mut sim = SimConfig::new(t_end, x0, xd0, w0);
        sim.dt = self.num("sim", "dt", Some(sim.dt))?;
        sim.dither_on = self.flag("sim", "dither", sim.dither_on)?;
        sim.dither_scale = self.num("sim", "dither_scale", Some(sim.dither_scale))?;
        sim.dither_in_learning = self.flag("sim", "dither_in_learning", sim.dither_in_learning)?;
        sim.seed = self.num("sim", "seed", Some(sim.seed))?;
        sim.record_stride = self.num("sim", "record_stride", Some(sim.record_stride))?;
        sim.convergence_window =
            self.num("sim", "convergence_window", Some(sim.convergence_window))?;
        sim.convergence_tol = self.num("sim", "convergence_tol", Some(sim.convergence_tol))?;
        sim.steady_window = self.num("sim", "steady_window", Some(sim.steady_window))?;

        let d = BoundInputs::default();
        let bounds = BoundInputs {
            gamma1: self.num("analysis", "gamma1", Some(d.gamma1))?,
            alpha2: self.num("analysis", "alpha2", Some(d.alpha2))?,
            b_n: self.num("analysis", "b_n", Some(d.b_n))?,
        };
        Ok(Scenario {
            name,
            law,
            system,
            basis,
            params,
            sim,
            bounds,
        })
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(|e| {
            let e = e.trim();
            e.parse::<f64>()
                .map_err(|_| format!("cannot parse `{e}` as a number"))
        })
        .collect()
}
