//! Run configuration.
//!
//! The file format is TOML restricted to one level of sections:
//!
//! ```toml
//! [pulse]
//! theta_b_pi = 1.80   # blue pulse area in units of π
//! theta_r_pi = 6.96
//! t_p = 1.0           # ps
//! delta = 6.0         # rad/ps
//!
//! [model]
//! backend = "weak_coupling"   # unitary | weak_coupling | polaron
//! ```
//!
//! Every key is optional and falls back to the defaults below. Unknown
//! sections or keys are errors. `--set section.key=value` overrides are
//! applied on top of the file; the value is read as a TOML literal, or as a
//! string if it does not parse as one.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use dichro_core::bath::BathSpec;
use dichro_core::drive::PulseSpec;
use dichro_core::dynamics::{
    Backend, EndTime, InitialState, ModelSpec, SolverConfig, DEFAULT_RECORD_INTERVAL, EMISSION_MAX_TIME,
    EMISSION_THRESHOLD,
};
use dichro_core::qcore::DensityMatrix;
use dichro_core::sps::CavitySpec;

use crate::error::{Result, SweepError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    Unitary,
    WeakCoupling,
    Polaron,
}

impl From<BackendName> for Backend {
    fn from(b: BackendName) -> Self {
        match b {
            BackendName::Unitary => Backend::Unitary,
            BackendName::WeakCoupling => Backend::WeakCoupling,
            BackendName::Polaron => Backend::Polaron,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialName {
    Ground,
    Excited,
}

/// Quantity mapped by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    /// Exciton population at 3t_p (bulk run).
    #[serde(rename = "P_X")]
    PX,
    /// Collected photons per pulse.
    N,
    /// Indistinguishability.
    I,
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::PX => "P_X",
            Observable::N => "N",
            Observable::I => "I",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub theta_b_pi: f64,
    pub theta_r_pi: f64,
    pub t_p: f64,
    pub delta: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { theta_b_pi: 1.80, theta_r_pi: 6.96, t_p: 1.0, delta: 6.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    pub alpha: f64,
    pub omega_c: f64,
    pub temperature: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        let b = BathSpec::gaas();
        Self { alpha: b.alpha, omega_c: b.omega_c, temperature: b.temperature }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavitySection {
    /// Whether `trace` and `sweep` include the cavity; `fom`, `bounds` and
    /// `scan` always do.
    pub enabled: bool,
    pub g: f64,
    pub kappa: f64,
    pub gamma_b: f64,
    pub gamma_d: f64,
    pub gamma_coll: f64,
    pub n_max: usize,
}

impl Default for CavitySection {
    fn default() -> Self {
        let c = CavitySpec::micropillar();
        Self {
            enabled: false,
            g: c.g,
            kappa: c.kappa,
            gamma_b: c.gamma_b,
            gamma_d: c.gamma_d,
            gamma_coll: c.gamma_coll,
            n_max: c.n_max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub backend: BackendName,
    pub initial_state: InitialName,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { backend: BackendName::WeakCoupling, initial_state: InitialName::Ground }
    }
}

/// Solver settings; unset values follow the model-dependent defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dt: Option<f64>,
    pub ds: Option<f64>,
    pub s_max: f64,
    pub t_start: Option<f64>,
    /// Fixed end time; unset means 3t_p for bulk runs and the emission rule
    /// with a cavity.
    pub t_end: Option<f64>,
    pub record_interval: f64,
    pub positivity_floor: f64,
    pub emission_threshold: f64,
    pub emission_max: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            dt: None,
            ds: None,
            s_max: dichro_core::dynamics::DEFAULT_S_MAX,
            t_start: None,
            t_end: None,
            record_interval: DEFAULT_RECORD_INTERVAL,
            positivity_floor: DensityMatrix::POSITIVITY_FLOOR,
            emission_threshold: EMISSION_THRESHOLD,
            emission_max: EMISSION_MAX_TIME,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub theta_b_min_pi: f64,
    pub theta_b_max_pi: f64,
    /// Defaults to 81 without phonons, 41 otherwise.
    pub theta_b_points: Option<usize>,
    pub theta_r_min_pi: f64,
    pub theta_r_max_pi: f64,
    pub theta_r_points: Option<usize>,
    pub observable: Observable,
    /// Polish the grid maximum with a simplex search.
    pub refine: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            theta_b_min_pi: 0.0,
            theta_b_max_pi: 8.0,
            theta_b_points: None,
            theta_r_min_pi: 0.0,
            theta_r_max_pi: 8.0,
            theta_r_points: None,
            observable: Observable::PX,
            refine: false,
        }
    }
}

impl SweepSection {
    /// Grid points along (Θ_b, Θ_r). Unitary cells are cheap, so their
    /// default grid is finer.
    pub fn points(&self, backend: Backend) -> (usize, usize) {
        let default = if backend == Backend::Unitary { 81 } else { 41 };
        (self.theta_b_points.unwrap_or(default), self.theta_r_points.unwrap_or(default))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    /// Pulse widths (ps); the detuning follows δ = 6/t_p.
    pub t_p_list: Vec<f64>,
    /// Points per axis of the coarse area grid before refinement.
    pub coarse_points: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self { t_p_list: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], coarse_points: 17 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub pulse: PulseSection,
    pub bath: BathSection,
    pub cavity: CavitySection,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub scan: ScanSection,
    pub output: OutputSection,
}

/// `section.key` for every recognised key.
pub fn valid_keys() -> Vec<String> {
    let mut keys = BTreeSet::new();
    let mut table = toml::Table::try_from(Settings::default()).expect("defaults serialise");
    // Optional keys are absent from the serialised defaults.
    let optional = [
        ("solver", "dt"),
        ("solver", "ds"),
        ("solver", "t_start"),
        ("solver", "t_end"),
        ("sweep", "theta_b_points"),
        ("sweep", "theta_r_points"),
    ];
    for (section, key) in optional {
        if let Some(toml::Value::Table(t)) = table.get_mut(section) {
            t.insert(key.into(), toml::Value::Float(0.0));
        }
    }
    for (section, value) in &table {
        if let toml::Value::Table(t) = value {
            for key in t.keys() {
                keys.insert(format!("{section}.{key}"));
            }
        }
    }
    keys.into_iter().collect()
}

fn config_error(msg: impl std::fmt::Display) -> SweepError {
    SweepError::Config(format!("{msg}\nvalid keys: {}", valid_keys().join(", ")))
}

fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key v was just written"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl Settings {
    /// Parses configuration text and applies `section.key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| SweepError::Config(format!("{e}")))?;
        for item in overrides {
            let (path, raw) = item
                .split_once('=')
                .ok_or_else(|| SweepError::Config(format!("override `{item}` is not section.key=value")))?;
            let (section, key) = path
                .trim()
                .split_once('.')
                .ok_or_else(|| config_error(format!("override key `{path}` must be section.key")))?;
            let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(t) = entry else {
                return Err(config_error(format!("`{section}` is not a section")));
            };
            t.insert(key.to_string(), parse_literal(raw.trim()));
        }
        let known = valid_keys();
        for (section, value) in &table {
            let toml::Value::Table(t) = value else {
                return Err(config_error(format!("top-level key `{section}` must be a [section]")));
            };
            for key in t.keys() {
                let full = format!("{section}.{key}");
                if !known.contains(&full) {
                    return Err(config_error(format!("unknown key `{full}`")));
                }
            }
        }
        let settings: Settings = table.try_into().map_err(config_error)?;
        settings.check()?;
        Ok(settings)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| SweepError::Config(format!("cannot read config file {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    /// TOML text that parses back to the same settings.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialise")
    }

    fn check(&self) -> Result<()> {
        let s = &self.sweep;
        if s.theta_b_points.is_some_and(|n| n < 2) || s.theta_r_points.is_some_and(|n| n < 2) {
            return Err(SweepError::Config("sweep axes need at least 2 points".into()));
        }
        if s.theta_b_max_pi <= s.theta_b_min_pi || s.theta_r_max_pi <= s.theta_r_min_pi {
            return Err(SweepError::Config("sweep ranges must have max > min".into()));
        }
        if s.theta_b_min_pi < 0.0 || s.theta_r_min_pi < 0.0 {
            return Err(SweepError::Config("pulse areas must be non-negative".into()));
        }
        if self.scan.coarse_points < 2 {
            return Err(SweepError::Config("scan.coarse_points must be at least 2".into()));
        }
        if self.solver.record_interval <= 0.0 {
            return Err(SweepError::Config("solver.record_interval must be positive".into()));
        }
        self.model_spec()?.validate()?;
        Ok(())
    }

    pub fn pulse(&self) -> Result<PulseSpec> {
        let p = &self.pulse;
        Ok(PulseSpec::new(p.theta_b_pi * PI, p.theta_r_pi * PI, p.t_p, p.delta)?)
    }

    pub fn bath(&self) -> Result<BathSpec> {
        let b = &self.bath;
        Ok(BathSpec::new(b.alpha, b.omega_c, b.temperature)?)
    }

    pub fn cavity_spec(&self) -> CavitySpec {
        let c = &self.cavity;
        CavitySpec {
            g: c.g,
            kappa: c.kappa,
            gamma_b: c.gamma_b,
            gamma_d: c.gamma_d,
            gamma_coll: c.gamma_coll,
            n_max: c.n_max,
        }
    }

    /// The configured model; the cavity is attached only when enabled.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut pulse = self.pulse()?;
        let initial_state = match self.model.initial_state {
            InitialName::Ground => InitialState::Ground,
            InitialName::Excited => {
                pulse = PulseSpec::off(pulse.t_p);
                InitialState::Excited
            }
        };
        Ok(ModelSpec {
            pulse,
            bath: self.bath()?,
            cavity: self.cavity.enabled.then(|| self.cavity_spec()),
            backend: self.model.backend.into(),
            initial_state,
        })
    }

    /// Default discretisation for `model` with the configured overrides.
    pub fn solver_for(&self, model: &ModelSpec) -> SolverConfig {
        self.solver.config_for(model)
    }
}

impl SolverSection {
    /// Default discretisation for `model` with these overrides applied.
    pub fn config_for(&self, model: &ModelSpec) -> SolverConfig {
        let mut cfg = SolverConfig::for_model(model);
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(ds) = self.ds {
            cfg.ds = ds;
        }
        cfg.s_max = self.s_max;
        if let Some(t0) = self.t_start {
            cfg.t_start = t0;
        }
        cfg.end = match (self.t_end, model.cavity.is_some()) {
            (Some(t), _) => EndTime::Fixed(t),
            (None, true) => EndTime::Emission { threshold: self.emission_threshold, max: self.emission_max },
            (None, false) => EndTime::Fixed(3.0 * model.pulse.t_p),
        };
        cfg.record_stride = ((self.record_interval / cfg.dt).round() as usize).max(1);
        cfg.positivity_floor = self.positivity_floor;
        cfg
    }
}
