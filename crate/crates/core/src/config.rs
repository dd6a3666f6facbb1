//! Run configuration: a strict TOML schema.
//!
//! Physics keys (`physics.nu`, `physics.s`, `potential.name`) have no
//! defaults; numerical-policy keys do, and the resolved configuration echoed
//! next to the outputs lists every injected default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::ScanSpec;
use crate::geometry::{HeightSpec, QuadratureSpec};
use crate::potential::{Piece, PotentialSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown key `{key}`{}", at_line(*line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("missing block [{0}]")]
    MissingBlock(String),
    #[error("missing key `{key}`{}", at_line(*line))]
    MissingKey { key: String, line: Option<usize> },
    #[error("invalid value for `{key}`{}: {message}", at_line(*line))]
    TypeError { key: String, line: Option<usize>, message: String },
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::MissingBlock(_) => "MissingBlock",
            ConfigError::MissingKey { .. } => "MissingKey",
            ConfigError::TypeError { .. } => "TypeError",
            ConfigError::Read { .. } => "ConfigRead",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub length: f64,
    pub height: HeightSpec,
    #[serde(default = "QuadratureSpec::new")]
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisBlock {
    pub k: usize,
    pub m: usize,
    #[serde(default = "default_dense_limit")]
    pub dense_tensor_limit: usize,
}

fn default_dense_limit() -> usize {
    crate::operators::DENSE_TENSOR_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsBlock {
    pub nu: f64,
    pub s: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Keep the convective term `B`.
    #[serde(default = "yes")]
    pub convection: bool,
    /// Keep the wall law term `(jₙ'(v_N), z_N)`.
    #[serde(default = "yes")]
    pub boundary_law: bool,
}

fn default_lambda() -> f64 {
    0.2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<Piece>>,
    #[serde(default = "default_n_mollify")]
    pub n_mollify: u32,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<u32>,
}

fn default_n_mollify() -> u32 {
    32
}

fn default_margin() -> f64 {
    crate::certify::DEFAULT_MARGIN
}

fn default_tolerance() -> f64 {
    crate::mollifier::DEFAULT_TOLERANCE
}

fn default_n_list() -> Vec<u32> {
    vec![4, 8, 16, 32, 64, 128, 256]
}

impl PotentialBlock {
    pub fn spec(&self) -> Result<PotentialSpec, ConfigError> {
        let bad = |key: &str, message: &str| ConfigError::TypeError {
            key: format!("potential.{key}"),
            line: None,
            message: message.to_string(),
        };
        let extra_alpha = self.alpha.is_some() && self.name != "gaussian_well";
        let extra_pieces = (self.breakpoints.is_some() || self.pieces.is_some()) && self.name != "piecewise";
        if extra_alpha {
            return Err(bad("alpha", "only used by gaussian_well"));
        }
        if extra_pieces {
            return Err(bad("pieces", "only used by piecewise"));
        }
        match self.name.as_str() {
            "quadratic" => Ok(PotentialSpec::Quadratic),
            "pressure_drop" => Ok(PotentialSpec::PressureDrop),
            "gaussian_well" => Ok(PotentialSpec::GaussianWell {
                alpha: self.alpha.ok_or_else(|| ConfigError::MissingKey { key: "potential.alpha".into(), line: None })?,
            }),
            "piecewise" => Ok(PotentialSpec::Piecewise {
                breakpoints: self.breakpoints.clone().unwrap_or_default(),
                pieces: self
                    .pieces
                    .clone()
                    .ok_or_else(|| ConfigError::MissingKey { key: "potential.pieces".into(), line: None })?,
            }),
            other => Err(bad("name", &format!("unknown potential `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Zero,
    /// Random coefficients scaled to `‖v0‖_H = radius`.
    RandomHBall { radius: f64 },
    /// Random data at `factor` times the asymptotic ball radius.
    RandomScaled { factor: f64 },
    /// `amp` times the `index`-th Stokes eigenmode.
    Eigenmode { index: usize, amp: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Etd2,
    ImexEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationBlock {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "default_initial")]
    pub initial: InitialSpec,
    /// Steps between checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_energy_tol")]
    pub energy_tol_factor: f64,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

fn default_scheme() -> SchemeName {
    SchemeName::Etd2
}

fn default_initial() -> InitialSpec {
    InitialSpec::RandomScaled { factor: 10.0 }
}

fn default_energy_tol() -> f64 {
    10.0
}

fn default_blowup() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractorBlock {
    /// Window grid spacing; defaults to `10·dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_step: Option<f64>,
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    #[serde(default = "default_t_section")]
    pub t_section: f64,
    #[serde(default = "default_section_samples")]
    pub section_samples: usize,
    #[serde(default = "default_section_spacing")]
    pub section_spacing: f64,
    #[serde(default = "default_ball_tol")]
    pub ball_tolerance: f64,
    #[serde(default = "default_lady_samples")]
    pub ladyzhenskaya_samples: usize,
}

fn default_ensemble() -> usize {
    8
}
fn default_t_section() -> f64 {
    8.0
}
fn default_section_samples() -> usize {
    5
}
fn default_section_spacing() -> f64 {
    0.25
}
fn default_ball_tol() -> f64 {
    1e-2
}
fn default_lady_samples() -> usize {
    400
}

impl Default for AttractorBlock {
    fn default() -> Self {
        AttractorBlock {
            window_step: None,
            ensemble: default_ensemble(),
            t_section: default_t_section(),
            section_samples: default_section_samples(),
            section_spacing: default_section_spacing(),
            ball_tolerance: default_ball_tol(),
            ladyzhenskaya_samples: default_lady_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default)]
    pub plots: bool,
    /// Write every `stride`-th sample to `trajectory.csv`.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Directory for the basis and operator cache; unset disables caching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<String>,
}

fn default_dir() -> String {
    "out".into()
}
fn default_stride() -> usize {
    1
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: default_dir(), plots: false, stride: default_stride(), cache_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryBlock,
    pub basis: BasisBlock,
    pub physics: PhysicsBlock,
    pub potential: PotentialBlock,
    pub integration: IntegrationBlock,
    #[serde(default)]
    pub attractor: AttractorBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

const BLOCKS: [&str; 7] = ["geometry", "basis", "physics", "potential", "integration", "attractor", "output"];

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Read { path: path.display().to_string(), message: e.to_string() })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| translate(&e, text))?;
    cfg.validate(text)?;
    Ok(cfg)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn between_backticks(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(msg[start..start + len].to_string())
}

fn translate(e: &toml::de::Error, text: &str) -> ConfigError {
    let msg = e.message();
    let line = e.span().map(|s| line_of(text, s.start));
    if msg.starts_with("unknown field") {
        let key = between_backticks(msg).unwrap_or_default();
        return ConfigError::UnknownKey { key, line };
    }
    if msg.starts_with("missing field") {
        let key = between_backticks(msg).unwrap_or_default();
        if BLOCKS.contains(&key.as_str()) && line.is_none_or(|l| l == 1) {
            return ConfigError::MissingBlock(key);
        }
        return ConfigError::MissingKey { key, line };
    }
    if msg.starts_with("unknown variant") {
        return ConfigError::TypeError { key: locate_key_name(text, e).unwrap_or_default(), line, message: msg.to_string() };
    }
    ConfigError::TypeError { key: locate_key_name(text, e).unwrap_or_default(), line, message: msg.trim().to_string() }
}

fn locate_key_name(text: &str, e: &toml::de::Error) -> Option<String> {
    let span = e.span()?;
    let line_start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = &text[line_start..];
    let eq = line.find('=')?;
    Some(line[..eq].trim().to_string())
}

/// Line of `key` inside `[block]`, for diagnostics.
pub fn locate(text: &str, block: &str, key: &str) -> Option<usize> {
    let mut in_block = false;
    for (i, raw) in text.lines().enumerate() {
        let l = raw.trim();
        if l.starts_with('[') {
            in_block = l.trim_matches(|c| c == '[' || c == ']').trim() == block;
            continue;
        }
        if in_block {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl RunConfig {
    pub fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |block: &str, key: &str, message: &str| ConfigError::TypeError {
            key: format!("{block}.{key}"),
            line: locate(text, block, key),
            message: message.to_string(),
        };
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.geometry.length) {
            return Err(fail("geometry", "length", "must be positive"));
        }
        if self.basis.m == 0 {
            return Err(fail("basis", "m", "must be at least 1"));
        }
        if !pos(self.physics.nu) {
            return Err(fail("physics", "nu", "must be positive"));
        }
        if !self.physics.s.is_finite() {
            return Err(fail("physics", "s", "must be finite"));
        }
        if !pos(self.physics.lambda) {
            return Err(fail("physics", "lambda", "must be positive"));
        }
        if self.potential.n_mollify == 0 {
            return Err(fail("potential", "n_mollify", "must be at least 1"));
        }
        if !(self.potential.margin > 0.0 && self.potential.margin <= 1.0) {
            return Err(fail("potential", "margin", "must lie in (0, 1]"));
        }
        if !pos(self.potential.tolerance) {
            return Err(fail("potential", "tolerance", "must be positive"));
        }
        if self.potential.n_list.is_empty() || self.potential.n_list.contains(&0) {
            return Err(fail("potential", "n_list", "must be nonempty positive indices"));
        }
        let scan = &self.potential.scan;
        if !(scan.lo < scan.hi) || scan.points < 2 {
            return Err(fail("potential", "scan", "need lo < hi and at least 2 points"));
        }
        self.potential.spec().map_err(|e| match e {
            ConfigError::TypeError { key, message, .. } => {
                let short = key.trim_start_matches("potential.").to_string();
                ConfigError::TypeError { line: locate(text, "potential", &short), key, message }
            }
            other => other,
        })?;
        if !pos(self.integration.dt) {
            return Err(fail("integration", "dt", "must be positive"));
        }
        if !pos(self.integration.t_end) {
            return Err(fail("integration", "t_end", "must be positive"));
        }
        if !pos(self.integration.energy_tol_factor) {
            return Err(fail("integration", "energy_tol_factor", "must be positive"));
        }
        if !pos(self.integration.blowup_factor) {
            return Err(fail("integration", "blowup_factor", "must be positive"));
        }
        match self.integration.initial {
            InitialSpec::RandomHBall { radius } if !(radius >= 0.0 && radius.is_finite()) => {
                return Err(fail("integration", "initial", "radius must be nonnegative"));
            }
            InitialSpec::RandomScaled { factor } if !(factor >= 0.0 && factor.is_finite()) => {
                return Err(fail("integration", "initial", "factor must be nonnegative"));
            }
            _ => {}
        }
        if let Some(h) = self.attractor.window_step {
            if !pos(h) {
                return Err(fail("attractor", "window_step", "must be positive"));
            }
        }
        if self.attractor.ensemble == 0 {
            return Err(fail("attractor", "ensemble", "must be at least 1"));
        }
        if !pos(self.attractor.t_section) {
            return Err(fail("attractor", "t_section", "must be positive"));
        }
        if self.output.stride == 0 {
            return Err(fail("output", "stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Fully resolved configuration as TOML.
    pub fn resolved(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn window_step(&self) -> f64 {
        self.attractor.window_step.unwrap_or(10.0 * self.integration.dt)
    }
}

/// Canonical configuration used by the acceptance suite and as a template.
pub const CANONICAL: &str = r#"[geometry]
length = 6.283185307179586
height = { mean = 1.0 }

[basis]
k = 4
m = 6

[physics]
nu = 1.0
s = 1.0
lambda = 0.2

[potential]
name = "pressure_drop"
n_mollify = 32

[integration]
dt = 1e-3
t_end = 10.0
initial = { kind = "random_scaled", factor = 10.0 }
seed = 7
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_parses_and_round_trips() {
        let c = parse_config_str(CANONICAL).unwrap();
        assert_eq!(c.basis.k, 4);
        let echo = c.resolved();
        let again = parse_config_str(&echo).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.resolved(), echo);
    }

    #[test]
    fn misspelled_key_is_named() {
        let text = CANONICAL.replace("nu = 1.0", "viscosty = 1.0");
        match parse_config_str(&text).unwrap_err() {
            ConfigError::UnknownKey { key, line } => {
                assert_eq!(key, "viscosty");
                assert_eq!(line, Some(10));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_dt_is_a_type_error() {
        let text = CANONICAL.replace("dt = 1e-3", "dt = -1e-3");
        match parse_config_str(&text).unwrap_err() {
            ConfigError::TypeError { key, line, .. } => {
                assert_eq!(key, "integration.dt");
                assert_eq!(line, Some(19));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_block_detected() {
        let text = CANONICAL.replace("[physics]\nnu = 1.0\ns = 1.0\nlambda = 0.2\n", "");
        assert!(matches!(parse_config_str(&text).unwrap_err(), ConfigError::MissingBlock(b) if b == "physics"));
    }

    #[test]
    fn physics_keys_have_no_defaults() {
        let text = CANONICAL.replace("nu = 1.0\n", "");
        assert!(matches!(parse_config_str(&text).unwrap_err(), ConfigError::MissingKey { key, .. } if key == "nu"));
    }

    #[test]
    fn wrong_type_reports_line() {
        let text = CANONICAL.replace("k = 4", "k = \"four\"");
        match parse_config_str(&text).unwrap_err() {
            ConfigError::TypeError { line, .. } => assert_eq!(line, Some(6)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stray_potential_parameter_rejected() {
        let text = CANONICAL.replace("n_mollify = 32", "n_mollify = 32\nalpha = 1.0");
        assert!(matches!(parse_config_str(&text).unwrap_err(), ConfigError::TypeError { .. }));
    }
}
