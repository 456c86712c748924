//! Experiment configuration: TOML text with sections, validated and echoed
//! into the run manifest.
//!
//! ```toml
//! mode = "converge"        # coeffs | simulate-kinetic | simulate-fluid | converge
//! out = "out"
//! workers = 1
//!
//! [grid]
//! dim = 1
//! modes = 32
//!
//! [basis]
//! order = 4
//!
//! [time]
//! dt = 0.01
//! t_end = 1.0
//! cadence = 10             # steps between snapshots
//!
//! [physics]
//! eps = "0.5,0.25,0.125"   # or an array
//! coefficients = "two-species"
//!
//! [seed]
//! profile = "shear-wave"
//! amplitude = 0.01
//! ```

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Result, VmbError};
use crate::seed::SeedProfile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Coeffs,
    SimulateKinetic,
    SimulateFluid,
    Converge,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Coeffs => "coeffs",
            Mode::SimulateKinetic => "simulate-kinetic",
            Mode::SimulateFluid => "simulate-fluid",
            Mode::Converge => "converge",
        }
    }
}

/// Which viscosity/conductivity the fluid reference uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientChoice {
    /// μ/2, κ/2, σ: what the two-species kinetic equation relaxes to
    #[default]
    TwoSpecies,
    /// μ, κ, σ exactly as computed
    AsDefined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub modes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 1, modes: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub order: usize,
    /// coeffs mode: also solve at order + 1 and report the relative change
    pub refine: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        BasisConfig { order: 4, refine: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub cadence: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { dt: 0.01, t_end: 1.0, cadence: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(deserialize_with = "de_eps")]
    pub eps: Vec<f64>,
    pub coefficients: CoefficientChoice,
    pub mu: Option<f64>,
    pub kappa: Option<f64>,
    pub sigma: Option<f64>,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            eps: vec![0.5, 0.25, 0.125],
            coefficients: CoefficientChoice::default(),
            mu: None,
            kappa: None,
            sigma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedConfig {
    pub profile: SeedProfile,
    pub amplitude: f64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        SeedConfig { profile: SeedProfile::ShearWave, amplitude: 1e-2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticConfig {
    pub nonlinear: bool,
    pub enforce_gauss: bool,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    /// smallness above which a warning is emitted
    pub amplitude_limit: f64,
    pub checkpoint: bool,
}

impl Default for KineticConfig {
    fn default() -> Self {
        KineticConfig {
            nonlinear: true,
            enforce_gauss: true,
            fp_tol: 1e-14,
            fp_max_iter: 100,
            amplitude_limit: 0.1,
            checkpoint: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// largest allowed later/earlier ratio for R_ohm and R_bsq
    pub contraction: f64,
    pub refinement: f64,
    pub isotropy: f64,
    pub gauss: f64,
    pub conservation: f64,
    /// E₀(t)/E₀(0) bound
    pub energy_growth: f64,
    /// max/min spread of ∫ε⁻²‖ℙ⊥G‖²_ν dt across ε
    pub dissipation_spread: f64,
    pub fluid_divergence: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            contraction: 0.9,
            refinement: 0.02,
            isotropy: 1e-6,
            gauss: 1e-8,
            conservation: 1e-6,
            energy_growth: 2.0,
            dissipation_spread: 3.0,
            fluid_divergence: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub seed: SeedConfig,
    #[serde(default)]
    pub kinetic: KineticConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EpsSpec {
    One(f64),
    List(Vec<f64>),
    Text(String),
}

fn de_eps<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    match EpsSpec::deserialize(d)? {
        EpsSpec::One(x) => Ok(vec![x]),
        EpsSpec::List(v) => Ok(v),
        EpsSpec::Text(s) => parse_eps_list(&s).map_err(serde::de::Error::custom),
    }
}

/// "1,0.5,0.25" → [1, 0.5, 0.25] (not yet validated or sorted).
pub fn parse_eps_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad eps entry '{t}': {e}")))
        .collect()
}

/// Overrides taken from the command line, applied after the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub eps: Option<Vec<f64>>,
    pub modes: Option<usize>,
    pub order: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

/// A validated config plus the list of fields that were filled from defaults.
#[derive(Clone, Debug)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub defaulted: Vec<String>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line where `section.key` (or top-level `key`) is assigned; 0 if absent.
fn line_of_key(text: &str, section: Option<&str>, key: &str) -> usize {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = Some(line.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        if lhs.trim() == key && current.as_deref() == section {
            return i + 1;
        }
    }
    0
}

fn leaf_paths(v: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, x) in t {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                if x.is_table() {
                    leaf_paths(x, &p, out);
                } else {
                    out.push(p);
                }
            }
        }
        _ => out.push(prefix.to_string()),
    }
}

fn has_path(v: &toml::Value, path: &str) -> bool {
    let mut cur = v;
    for part in path.split('.') {
        match cur.get(part) {
            Some(x) => cur = x,
            None => return false,
        }
    }
    true
}

impl ExperimentConfig {
    /// Default config for a mode (what a config file with only `mode` gives).
    pub fn for_mode(mode: Mode) -> ExperimentConfig {
        parse_config(&format!("mode = \"{}\"\n", mode.name())).expect("default config is valid").config
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parse and validate a config text.
pub fn parse_config(text: &str) -> Result<ResolvedConfig> {
    parse_with_overrides(text, &Overrides::default())
}

pub fn parse_with_overrides(text: &str, ov: &Overrides) -> Result<ResolvedConfig> {
    let mut text = text.to_string();
    if let Some(m) = ov.mode {
        // let a subcommand stand in for a missing `mode` line
        if line_of_key(&text, None, "mode") == 0 {
            text = format!("mode = \"{}\"\n{text}", m.name());
        }
    }
    let parsed: ExperimentConfig = toml::from_str(&text).map_err(|e| VmbError::Parse {
        line: e.span().map(|s| line_of_offset(&text, s.start)).unwrap_or(0),
        msg: e.message().to_string(),
    })?;
    let raw: toml::Value = toml::from_str(&text).map_err(|e| VmbError::Parse { line: 0, msg: e.to_string() })?;
    let mut cfg = parsed;
    if let Some(m) = ov.mode {
        if cfg.mode != m {
            return Err(VmbError::Parse {
                line: line_of_key(&text, None, "mode"),
                msg: format!("config mode '{}' does not match requested mode '{}'", cfg.mode.name(), m.name()),
            });
        }
    }
    let mut overridden: Vec<&str> = Vec::new();
    if let Some(o) = &ov.out {
        cfg.out = o.clone();
        overridden.push("out");
    }
    if let Some(e) = &ov.eps {
        cfg.physics.eps = e.clone();
        overridden.push("physics.eps");
    }
    if let Some(m) = ov.modes {
        cfg.grid.modes = m;
        overridden.push("grid.modes");
    }
    if let Some(k) = ov.order {
        cfg.basis.order = k;
        overridden.push("basis.order");
    }
    if let Some(dt) = ov.dt {
        cfg.time.dt = dt;
        overridden.push("time.dt");
    }
    if let Some(t) = ov.t_end {
        cfg.time.t_end = t;
        overridden.push("time.t_end");
    }
    validate(&mut cfg, &text)?;

    let full = toml::Value::try_from(&cfg).map_err(|e| VmbError::Config(e.to_string()))?;
    let mut all = Vec::new();
    leaf_paths(&full, "", &mut all);
    let defaulted = all
        .into_iter()
        .filter(|p| !has_path(&raw, p) && !overridden.contains(&p.as_str()))
        .collect();
    Ok(ResolvedConfig { config: cfg, defaulted })
}

fn validate(cfg: &mut ExperimentConfig, text: &str) -> Result<()> {
    let err = |section: Option<&str>, key: &str, msg: String| VmbError::Parse { line: line_of_key(text, section, key), msg };
    if !(1..=3).contains(&cfg.grid.dim) {
        return Err(err(Some("grid"), "dim", format!("grid.dim must be 1, 2 or 3, got {}", cfg.grid.dim)));
    }
    let m = cfg.grid.modes;
    if !(4..=128).contains(&m) || m % 2 != 0 {
        return Err(err(Some("grid"), "modes", format!("grid.modes must be even and in 4..=128, got {m}")));
    }
    if cfg.grid.dim == 3 && m > 32 {
        return Err(err(Some("grid"), "modes", format!("grid.modes above 32 in 3D is outside desk scale, got {m}")));
    }
    if !(2..=6).contains(&cfg.basis.order) {
        return Err(err(Some("basis"), "order", format!("basis.order must be in 2..=6, got {}", cfg.basis.order)));
    }
    if !(cfg.time.dt > 0.0 && cfg.time.dt.is_finite()) {
        return Err(err(Some("time"), "dt", format!("time.dt must be positive, got {}", cfg.time.dt)));
    }
    if !(cfg.time.t_end >= 0.0 && cfg.time.t_end.is_finite()) {
        return Err(err(Some("time"), "t_end", format!("time.t_end must be >= 0, got {}", cfg.time.t_end)));
    }
    let steps = cfg.time.t_end / cfg.time.dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(err(Some("time"), "t_end", format!("t_end = {} is not a whole number of dt = {}", cfg.time.t_end, cfg.time.dt)));
    }
    if cfg.time.cadence == 0 {
        return Err(err(Some("time"), "cadence", "time.cadence must be >= 1".into()));
    }
    let eps = &mut cfg.physics.eps;
    if eps.is_empty() {
        return Err(err(Some("physics"), "eps", "physics.eps must not be empty".into()));
    }
    for &e in eps.iter() {
        if !(e > 0.0 && e <= 1.0) {
            return Err(err(Some("physics"), "eps", format!("eps = {e} outside (0, 1]")));
        }
    }
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eps.dedup();
    for (key, v) in [("mu", cfg.physics.mu), ("kappa", cfg.physics.kappa), ("sigma", cfg.physics.sigma)] {
        if let Some(x) = v {
            if !(x > 0.0 && x.is_finite()) {
                return Err(err(Some("physics"), key, format!("physics.{key} must be positive, got {x}")));
            }
        }
    }
    if !(cfg.seed.amplitude >= 0.0 && cfg.seed.amplitude.is_finite()) {
        return Err(err(Some("seed"), "amplitude", format!("seed.amplitude must be >= 0, got {}", cfg.seed.amplitude)));
    }
    if cfg.workers == 0 {
        return Err(err(None, "workers", "workers must be >= 1".into()));
    }
    if !(cfg.kinetic.fp_tol > 0.0) || cfg.kinetic.fp_max_iter == 0 {
        return Err(err(Some("kinetic"), "fp_tol", "fixed-point tolerance and iteration cap must be positive".into()));
    }
    Ok(())
}

impl FromStr for Mode {
    type Err = VmbError;
    fn from_str(s: &str) -> Result<Mode> {
        Ok(match s {
            "coeffs" => Mode::Coeffs,
            "simulate-kinetic" => Mode::SimulateKinetic,
            "simulate-fluid" => Mode::SimulateFluid,
            "converge" => Mode::Converge,
            _ => return Err(VmbError::Config(format!("unknown mode '{s}'"))),
        })
    }
}
