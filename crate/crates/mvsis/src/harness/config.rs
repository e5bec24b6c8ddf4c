//! Experiment configuration: parsing of the flat `key = value` grammar and
//! construction of the model presets it names.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment                   (also allowed after a value)
//! [experiment]                section header, or [model]
//! key = value                 number, "string", bare word or list
//! alpha = [-0.08, 0, 0.5, 1]  lists use brackets or bare commas
//! ```
//!
//! Keys that appear before any header belong to `[experiment]`. Every key
//! may appear at most once, unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::asymptotics::LimitData;
use crate::error::{Error, Result};
use crate::model::{
    bernardi, build_representative, build_tractable, cai, gghmp, wang, BernardiParams, CaiParams, Family,
    GeneralModel, PhiFn, PopulationFunction, RepresentativeParams, SimulatedModelParams, TimeFunction,
    TractableParams, WangParams,
};

/// Experiment identifiers accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    /// Coupled sweep over `alpha` in the extinction regime.
    Extinction,
    /// Coupled sweep over `alpha` in the persistence regime with levels.
    Persistence,
    /// Sweep over initial values with shared noise.
    Transition,
    /// Strong convergence study on dyadic meshes.
    Converge,
    /// Per-particle Lyapunov exponents.
    Lyapunov,
    /// Monte Carlo audit of the moment bounds.
    Bounds,
    /// Extinction and persistence reports without simulation.
    Analyze,
}

impl ExperimentId {
    /// All identifiers in a fixed order.
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Extinction,
        ExperimentId::Persistence,
        ExperimentId::Transition,
        ExperimentId::Converge,
        ExperimentId::Lyapunov,
        ExperimentId::Bounds,
        ExperimentId::Analyze,
    ];

    /// Name used on the command line and in reports.
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Extinction => "extinction",
            ExperimentId::Persistence => "persistence",
            ExperimentId::Transition => "transition",
            ExperimentId::Converge => "converge",
            ExperimentId::Lyapunov => "lyapunov",
            ExperimentId::Bounds => "bounds",
            ExperimentId::Analyze => "analyze",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment id '{s}'")))
    }
}

/// A parsed right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    /// A single unquoted or quoted token.
    Scalar(String),
    /// A bracketed or comma-separated list.
    List(Vec<String>),
}

/// One `key = value` entry with its source line.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    /// Parsed value.
    pub value: Value,
    /// One-based line number.
    pub line: usize,
}

/// Sections of a configuration file before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    /// Entries of `[experiment]`.
    pub experiment: BTreeMap<String, Entry>,
    /// Entries of `[model]`.
    pub model: BTreeMap<String, Entry>,
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('"') && s.ends_with('"')) || (s.starts_with('\'') && s.ends_with('\''))) {
        s[1..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quote = None;
    for (i, c) in line.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), _) if c == q => quote = None,
            (None, '#') => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_value(text: &str, line: usize) -> Result<Value> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::Config(format!("line {line}: missing value")));
    }
    let bracketed = text.starts_with('[');
    if bracketed && !text.ends_with(']') {
        return Err(Error::Config(format!("line {line}: unterminated list")));
    }
    if bracketed || text.contains(',') {
        let inner = if bracketed { &text[1..text.len() - 1] } else { text };
        let items: Vec<String> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(unquote).collect()
        };
        if items.iter().any(|s| s.is_empty()) {
            return Err(Error::Config(format!("line {line}: empty list item")));
        }
        return Ok(Value::List(items));
    }
    Ok(Value::Scalar(unquote(text)))
}

impl RawConfig {
    /// Parses the grammar without interpreting keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut in_model = false;
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let body = strip_comment(full).trim();
            if body.is_empty() {
                continue;
            }
            if body.starts_with('[') && !body.contains('=') {
                in_model = match body {
                    "[experiment]" => false,
                    "[model]" => true,
                    other => return Err(Error::Config(format!("line {line}: unknown section {other}"))),
                };
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value'")))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Config(format!("line {line}: invalid key '{key}'")));
            }
            let value = parse_value(value, line)?;
            let section = if in_model { &mut raw.model } else { &mut raw.experiment };
            if section.insert(key.to_string(), Entry { value, line }).is_some() {
                return Err(Error::Config(format!("line {line}: duplicate key '{key}'")));
            }
        }
        Ok(raw)
    }
}

fn parse_f64(key: &str, s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: '{key}' expects a number, got '{s}'")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("line {line}: '{key}' must be finite")));
    }
    Ok(v)
}

fn scalar<'a>(key: &str, e: &'a Entry) -> Result<&'a str> {
    match &e.value {
        Value::Scalar(s) => Ok(s),
        Value::List(_) => Err(Error::Config(format!("line {}: '{key}' expects a single value", e.line))),
    }
}

fn number(key: &str, e: &Entry) -> Result<f64> {
    parse_f64(key, scalar(key, e)?, e.line)
}

fn numbers(key: &str, e: &Entry) -> Result<Vec<f64>> {
    match &e.value {
        Value::Scalar(s) => Ok(vec![parse_f64(key, s, e.line)?]),
        Value::List(items) => items.iter().map(|s| parse_f64(key, s, e.line)).collect(),
    }
}

fn integer<T: FromStr>(key: &str, e: &Entry) -> Result<T> {
    let s = scalar(key, e)?;
    s.parse()
        .map_err(|_| Error::Config(format!("line {}: '{key}' expects a nonnegative integer, got '{s}'", e.line)))
}

/// Model preset with its scalar parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    /// Preset name.
    pub preset: Family,
    /// Parameter regime of the `gghmp` preset (1 or 2).
    pub regime: u8,
    /// Scalar parameters keyed by name.
    pub values: BTreeMap<String, f64>,
}

const GGHMP_KEYS: &[&str] = &["N", "beta", "gamma", "mu", "sigma"];
const REPRESENTATIVE_KEYS: &[&str] = &[
    "N", "beta0", "beta", "gamma", "mu", "beta1", "c12", "c21", "c22", "g11", "g12", "g21", "eta0",
];
const WANG_KEYS: &[&str] = &["N", "beta_init", "beta_e", "theta", "xi", "beta1", "mu", "gamma"];
const CAI_KEYS: &[&str] = &["N", "beta", "beta1", "a1", "a2", "a3", "sigma1", "sigma2", "mu", "gamma"];
const BERNARDI_KEYS: &[&str] = &["N", "beta", "beta1", "sigma", "mu", "gamma"];
const TRACTABLE_KEYS: &[&str] = &[
    "N", "c0", "c11", "c12", "c21", "c22", "phi0", "phi1", "phi2", "g11", "g12", "g21", "g22", "zeta1", "zeta2",
    "eta11", "eta12", "eta21", "eta22",
];

fn defaults_for(preset: Family, regime: u8) -> Vec<(&'static str, f64)> {
    match preset {
        Family::Gghmp => {
            let p = if regime == 2 {
                SimulatedModelParams::persistence_regime(0.0)
            } else {
                SimulatedModelParams::extinction_regime(0.0)
            };
            vec![("N", p.n), ("beta", p.beta), ("gamma", p.gamma), ("mu", p.mu), ("sigma", p.sigma)]
        }
        Family::Representative => vec![
            ("N", 100.0),
            ("beta0", 0.0),
            ("beta", 0.5),
            ("gamma", 25.0),
            ("mu", 20.0),
            ("beta1", 0.0),
            ("c12", 0.0),
            ("c21", 0.0),
            ("c22", 0.0),
            ("g11", 0.0),
            ("g12", 0.0),
            ("g21", 0.0),
            ("eta0", 1.0),
        ],
        Family::Wang => vec![
            ("N", 100.0),
            ("beta_init", 0.5),
            ("beta_e", 0.5),
            ("theta", 1.0),
            ("xi", 0.01),
            ("beta1", 0.0),
            ("mu", 20.0),
            ("gamma", 25.0),
        ],
        Family::Cai => vec![
            ("N", 100.0),
            ("beta", 0.5),
            ("beta1", 0.0),
            ("a1", 1.0),
            ("a2", 0.0),
            ("a3", 1.0),
            ("sigma1", 0.01),
            ("sigma2", 0.0),
            ("mu", 20.0),
            ("gamma", 25.0),
        ],
        Family::Bernardi => vec![
            ("N", 100.0),
            ("beta", 0.5),
            ("beta1", 0.0),
            ("sigma", 0.01),
            ("mu", 20.0),
            ("gamma", 25.0),
        ],
        Family::Tractable | Family::General => vec![
            ("N", 100.0),
            ("c0", 0.0),
            ("c11", -45.0),
            ("c12", 0.5),
            ("c21", 0.0),
            ("c22", 0.0),
            ("phi0", 0.0),
            ("phi1", 0.0),
            ("phi2", 0.0),
            ("g11", 0.0),
            ("g12", 0.0),
            ("g21", 0.0),
            ("g22", 0.0),
            ("zeta1", 1.0),
            ("zeta2", 1.0),
            ("eta11", 1.0),
            ("eta12", 1.0),
            ("eta21", 1.0),
            ("eta22", 1.0),
        ],
    }
}

fn allowed_keys(preset: Family) -> &'static [&'static str] {
    match preset {
        Family::Gghmp => GGHMP_KEYS,
        Family::Representative => REPRESENTATIVE_KEYS,
        Family::Wang => WANG_KEYS,
        Family::Cai => CAI_KEYS,
        Family::Bernardi => BERNARDI_KEYS,
        Family::Tractable | Family::General => TRACTABLE_KEYS,
    }
}

fn as_config_error(e: Error) -> Error {
    match e {
        Error::InvalidInput(msg) => Error::Config(msg),
        other => other,
    }
}

impl ModelConfig {
    /// Preset with its default parameters.
    pub fn preset(preset: Family, regime: u8) -> Result<Self> {
        if preset == Family::General {
            return Err(Error::Config("the general family has no configurable preset".into()));
        }
        if !(regime == 1 || regime == 2) {
            return Err(Error::Config(format!("params must be 1 or 2, got {regime}")));
        }
        let values = defaults_for(preset, regime)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Ok(Self { preset, regime, values })
    }

    fn from_entries(entries: &BTreeMap<String, Entry>, regime_default: u8) -> Result<Self> {
        let preset = match entries.get("model") {
            Some(e) => scalar("model", e)?.parse::<Family>().map_err(as_config_error)?,
            None => Family::Gghmp,
        };
        let regime = match entries.get("params") {
            Some(e) => {
                if preset != Family::Gghmp {
                    return Err(Error::Config(format!(
                        "line {}: 'params' only applies to the gghmp preset",
                        e.line
                    )));
                }
                integer::<u8>("params", e)?
            }
            None => regime_default,
        };
        let mut cfg = Self::preset(preset, regime)?;
        let allowed = allowed_keys(preset);
        for (key, e) in entries {
            if key == "model" || key == "params" {
                continue;
            }
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{key}' for model '{}'",
                    e.line,
                    preset.name()
                )));
            }
            cfg.values.insert(key.clone(), number(key, e)?);
        }
        Ok(cfg)
    }

    /// Value of a parameter (present for every allowed key).
    pub fn get(&self, key: &str) -> f64 {
        self.values.get(key).copied().unwrap_or(0.0)
    }

    /// Sets a parameter.
    pub fn set(&mut self, key: &str, value: f64) -> &mut Self {
        self.values.insert(key.to_string(), value);
        self
    }

    /// Whether the preset supports the `beta_1 = alpha beta` sweep.
    pub fn supports_alpha(&self) -> bool {
        !matches!(self.preset, Family::Tractable | Family::General)
    }

    /// Reference transmission rate scaled by `alpha` in sweeps.
    fn alpha_base(&self) -> f64 {
        match self.preset {
            Family::Wang => self.get("beta_e"),
            _ => self.get("beta"),
        }
    }

    /// Parameters of the `gghmp` preset.
    pub fn simulated_params(&self, alpha: f64, i0: f64) -> SimulatedModelParams {
        SimulatedModelParams {
            n: self.get("N"),
            beta: self.get("beta"),
            gamma: self.get("gamma"),
            mu: self.get("mu"),
            sigma: self.get("sigma"),
            alpha,
            i0,
        }
    }

    /// Builds the model for one sweep entry. `alpha = None` keeps the
    /// configured `beta1`; otherwise `beta1 = alpha * beta`.
    pub fn build(&self, alpha: Option<f64>, i0: f64) -> Result<GeneralModel> {
        self.build_inner(alpha, i0).map_err(as_config_error)
    }

    fn build_inner(&self, alpha: Option<f64>, i0: f64) -> Result<GeneralModel> {
        let c = |k: &str| TimeFunction::constant(self.get(k));
        let pop = PopulationFunction::constant(self.get("N"));
        if let Some(a) = alpha {
            if !self.supports_alpha() {
                return Err(Error::Config(format!("model '{}' has no alpha sweep", self.preset.name())));
            }
            if !(a >= -1.0) {
                return Err(Error::Config(format!("alpha must be at least -1, got {a}")));
            }
        }
        let beta1 = || match alpha {
            Some(a) => TimeFunction::constant(a * self.alpha_base()),
            None => c("beta1"),
        };
        match self.preset {
            Family::Gghmp => gghmp(&self.simulated_params(alpha.unwrap_or(0.0), i0)),
            Family::Representative => build_representative(RepresentativeParams {
                beta0: c("beta0"),
                beta: c("beta"),
                gamma: c("gamma"),
                mu: c("mu"),
                beta1: beta1(),
                c12: c("c12"),
                c21: c("c21"),
                c22: c("c22"),
                g11: c("g11"),
                g12: c("g12"),
                g21: c("g21"),
                eta0: self.get("eta0"),
                population: pop,
                sample_horizon: 100.0,
            }),
            Family::Wang => wang(&WangParams {
                beta_init: self.get("beta_init"),
                beta_e: self.get("beta_e"),
                theta: self.get("theta"),
                xi: self.get("xi"),
                beta1: beta1(),
                mu: c("mu"),
                gamma: c("gamma"),
                population: pop,
            }),
            Family::Cai => cai(&CaiParams {
                beta: c("beta"),
                beta1: beta1(),
                a: [c("a1"), c("a2"), c("a3")],
                sigma1: c("sigma1"),
                sigma2: c("sigma2"),
                mu: c("mu"),
                gamma: c("gamma"),
                population: pop,
            }),
            Family::Bernardi => bernardi(&BernardiParams {
                beta: c("beta"),
                beta1: beta1(),
                sigma: c("sigma"),
                mu: c("mu"),
                gamma: c("gamma"),
                population: pop,
            }),
            Family::Tractable | Family::General => {
                let linear = |k: f64| -> PhiFn { Arc::new(move |_t: f64, x: f64| k * x) };
                let ks = [self.get("phi0"), self.get("phi1"), self.get("phi2")];
                build_tractable(TractableParams {
                    c0: c("c0"),
                    c11: c("c11"),
                    c12: c("c12"),
                    c21: c("c21"),
                    c22: c("c22"),
                    phi: [linear(ks[0]), linear(ks[1]), linear(ks[2])],
                    lipschitz: ks.map(f64::abs),
                    g: [c("g11"), c("g12"), c("g21"), c("g22")],
                    zeta: [self.get("zeta1"), self.get("zeta2")],
                    eta: [self.get("eta11"), self.get("eta12"), self.get("eta21"), self.get("eta22")],
                    population: pop,
                })
            }
        }
    }

    /// Asymptotic limits for one sweep entry, `None` for the tractable class.
    pub fn limits(&self, alpha: Option<f64>, i0: f64) -> Result<Option<LimitData>> {
        match self.preset {
            Family::Gghmp => Ok(Some(LimitData::simulated(&self.simulated_params(alpha.unwrap_or(0.0), i0)))),
            Family::Tractable | Family::General => Ok(None),
            _ => {
                let model = self.build(alpha, i0)?;
                let p = model
                    .representative_params()
                    .ok_or_else(|| Error::Unavailable("model has no representative coefficients".into()))?;
                LimitData::from_params(p).map(Some)
            }
        }
    }
}

/// Fully resolved configuration of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Experiment to run.
    pub experiment: ExperimentId,
    /// Model preset and parameters.
    pub model: ModelConfig,
    /// Time horizon `T`.
    pub t_end: f64,
    /// Number of equidistant steps.
    pub steps: usize,
    /// Number of particles `M`.
    pub particles: usize,
    /// Seed of the Brownian driver.
    pub seed: u64,
    /// Interaction strengths swept with `beta_1 = alpha beta`; empty keeps
    /// the configured `beta1`.
    pub alphas: Vec<f64>,
    /// Initial values swept with shared noise.
    pub i0s: Vec<f64>,
    /// Output directory.
    pub out_dir: PathBuf,
    /// Number of particles per run written to `paths.csv`.
    pub sample_paths: usize,
    /// Row stride of `paths.csv`; `None` picks one giving at most 1001 rows.
    pub paths_every: Option<usize>,
    /// Moment order of the convergence study.
    pub p: f64,
    /// Coarsest and finest tested dyadic levels, meshes `2^{-level} T`.
    pub levels: (u32, u32),
    /// Dyadic level of the self-coupled reference.
    pub reference_level: u32,
    /// Start of the Lyapunov fitting window.
    pub window_start: f64,
    /// Limits of `alpha E[I]` per sweep entry for the level report.
    pub alpha_mean_limits: Vec<f64>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "experiment",
    "model",
    "T",
    "steps",
    "M",
    "seed",
    "alpha",
    "i0",
    "out",
    "paths",
    "paths_every",
    "p",
    "levels",
    "reference_level",
    "window_start",
    "alpha_mean_limits",
];

const EXTINCTION_ALPHAS: [f64; 4] = [-0.5, 0.0, 0.25, 0.5];
const PERSISTENCE_ALPHAS: [f64; 4] = [-0.08, 0.0, 0.5, 1.0];

impl ExperimentConfig {
    /// Defaults of an experiment with the `gghmp` preset.
    pub fn defaults(id: ExperimentId) -> Self {
        let regime = if id == ExperimentId::Persistence { 2 } else { 1 };
        let model = ModelConfig::preset(Family::Gghmp, regime).expect("gghmp preset");
        let mut cfg = Self {
            experiment: id,
            model,
            t_end: 1.0,
            steps: 1000,
            particles: 10_000,
            seed: 0,
            alphas: EXTINCTION_ALPHAS.to_vec(),
            i0s: vec![50.0],
            out_dir: PathBuf::from("out").join(id.name()),
            sample_paths: 4,
            paths_every: None,
            p: 2.0,
            levels: (4, 9),
            reference_level: 13,
            window_start: 0.2,
            alpha_mean_limits: Vec::new(),
        };
        match id {
            ExperimentId::Extinction | ExperimentId::Analyze => {}
            ExperimentId::Persistence => {
                cfg.alphas = PERSISTENCE_ALPHAS.to_vec();
                cfg.t_end = 10.0;
                cfg.steps = 10_000;
            }
            ExperimentId::Transition => {
                cfg.alphas = vec![2.5];
                cfg.i0s = vec![1.0, 50.0];
                cfg.t_end = 10.0;
                cfg.steps = 10_000;
                cfg.sample_paths = 3;
            }
            ExperimentId::Converge => {
                cfg.alphas = vec![0.0];
                cfg.t_end = 0.5;
                cfg.particles = 512;
                cfg.steps = 1 << 13;
            }
            ExperimentId::Lyapunov => cfg.alphas = vec![0.0],
            ExperimentId::Bounds => {
                cfg.alphas = vec![0.0];
                cfg.t_end = 0.05;
                cfg.steps = 50;
            }
        }
        cfg
    }

    /// Parses configuration text for experiment `id`.
    pub fn parse(id: ExperimentId, text: &str) -> Result<Self> {
        Self::from_raw(id, &RawConfig::parse(text)?)
    }

    /// Reads and parses a configuration file.
    pub fn from_file(id: ExperimentId, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(id, &text)
    }

    /// Interprets parsed sections, filling unspecified keys with defaults.
    pub fn from_raw(id: ExperimentId, raw: &RawConfig) -> Result<Self> {
        let ex = &raw.experiment;
        for (key, e) in ex {
            if !EXPERIMENT_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key '{key}' in [experiment]", e.line)));
            }
        }
        if let Some(e) = ex.get("experiment") {
            let named: ExperimentId = scalar("experiment", e)?.parse()?;
            if named != id {
                return Err(Error::Config(format!(
                    "line {}: config is for experiment '{named}', not '{id}'",
                    e.line
                )));
            }
        }
        let mut cfg = Self::defaults(id);
        let mut model_entries = raw.model.clone();
        if let Some(e) = ex.get("model") {
            if model_entries.insert("model".into(), e.clone()).is_some() {
                return Err(Error::Config(format!("line {}: 'model' given in both sections", e.line)));
            }
        }
        cfg.model = ModelConfig::from_entries(&model_entries, cfg.model.regime)?;
        if cfg.model.preset == Family::Gghmp && cfg.model.regime == 2 && id == ExperimentId::Analyze {
            cfg.alphas = PERSISTENCE_ALPHAS.to_vec();
        }
        if !cfg.model.supports_alpha() || (cfg.model.preset != Family::Gghmp && !ex.contains_key("alpha")) {
            cfg.alphas.clear();
        }
        if let Some(e) = ex.get("T") {
            cfg.t_end = number("T", e)?;
        }
        if let Some(e) = ex.get("steps") {
            cfg.steps = integer("steps", e)?;
        }
        if let Some(e) = ex.get("M") {
            cfg.particles = integer("M", e)?;
        }
        if let Some(e) = ex.get("seed") {
            cfg.seed = integer("seed", e)?;
        }
        if let Some(e) = ex.get("alpha") {
            if !cfg.model.supports_alpha() {
                return Err(Error::Config(format!(
                    "line {}: model '{}' has no alpha sweep",
                    e.line,
                    cfg.model.preset.name()
                )));
            }
            cfg.alphas = numbers("alpha", e)?;
        }
        if let Some(e) = ex.get("i0") {
            cfg.i0s = numbers("i0", e)?;
        }
        if let Some(e) = ex.get("out") {
            cfg.out_dir = PathBuf::from(scalar("out", e)?);
        }
        if let Some(e) = ex.get("paths") {
            cfg.sample_paths = integer("paths", e)?;
        }
        if let Some(e) = ex.get("paths_every") {
            cfg.paths_every = Some(integer("paths_every", e)?);
        }
        if let Some(e) = ex.get("p") {
            cfg.p = number("p", e)?;
        }
        if let Some(e) = ex.get("levels") {
            let v = numbers("levels", e)?;
            if v.len() != 2 || v.iter().any(|x| x.fract() != 0.0 || *x < 0.0 || *x > 30.0) {
                return Err(Error::Config(format!(
                    "line {}: 'levels' expects two integers in [0, 30]",
                    e.line
                )));
            }
            cfg.levels = (v[0] as u32, v[1] as u32);
        }
        if let Some(e) = ex.get("reference_level") {
            cfg.reference_level = integer("reference_level", e)?;
        }
        if id == ExperimentId::Converge && !ex.contains_key("steps") {
            cfg.steps = 1usize << cfg.reference_level.min(30);
        }
        if let Some(e) = ex.get("window_start") {
            cfg.window_start = number("window_start", e)?;
        }
        if let Some(e) = ex.get("alpha_mean_limits") {
            cfg.alpha_mean_limits = numbers("alpha_mean_limits", e)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return err(format!("T must be positive, got {}", self.t_end));
        }
        if self.steps == 0 {
            return err("steps must be at least 1".into());
        }
        if self.particles == 0 {
            return err("M must be at least 1".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= -1.0)) {
            return err(format!("alpha entries must be at least -1, got {a}"));
        }
        if self.i0s.is_empty() {
            return err("i0 list is empty".into());
        }
        if let Some(x) = self.i0s.iter().find(|x| !(**x >= 0.0)) {
            return err(format!("i0 entries must be nonnegative, got {x}"));
        }
        if self.paths_every == Some(0) {
            return err("paths_every must be at least 1".into());
        }
        if !(self.p >= 1.0) {
            return err(format!("p must be at least 1, got {}", self.p));
        }
        if self.experiment == ExperimentId::Converge {
            let (lo, hi) = self.levels;
            if lo > hi {
                return err(format!("levels must be increasing, got {lo} > {hi}"));
            }
            if self.reference_level < hi + 3 || self.reference_level > 30 {
                return err(format!(
                    "reference_level must be at least {} (three levels finer than {hi}) and at most 30",
                    hi + 3
                ));
            }
            if self.steps != 1usize << self.reference_level {
                return err(format!("converge needs steps = 2^{}", self.reference_level));
            }
        }
        if self.experiment == ExperimentId::Lyapunov && !(self.window_start >= 0.0 && self.window_start < self.t_end)
        {
            return err(format!("window_start must lie in [0, T), got {}", self.window_start));
        }
        if !self.alpha_mean_limits.is_empty() && self.alpha_mean_limits.len() != self.alphas.len() {
            return err("alpha_mean_limits needs one value per alpha".into());
        }
        Ok(())
    }

    /// Sweep entries: `Some(alpha)` per listed alpha, or one `None` entry
    /// keeping the configured `beta1`.
    pub fn sweep(&self) -> Vec<Option<f64>> {
        if self.alphas.is_empty() {
            vec![None]
        } else {
            self.alphas.iter().map(|&a| Some(a)).collect()
        }
    }
}
