//! Experiment configuration: a TOML file with top-level grids and one
//! optional section per test. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use cmj_core::forest::SiblingOrder;
use cmj_core::ladder::AgeConvention;
use cmj_core::models::{calibrate_criticality, CharacteristicSpec, Variant};
use cmj_core::verify::Tolerances;
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub life: cmj_core::models::LifeLaw,
    /// Rescale the free parameter so that `E μ(V) = 1` before running.
    #[serde(default)]
    pub calibrate: bool,
    #[serde(default = "default_calibration_budget")]
    pub calibration_budget: u64,
}

fn default_calibration_budget() -> u64 {
    200_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n: usize,
    pub order: SiblingOrder,
    pub contour: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            order: SiblingOrder::default(),
            contour: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionsConfig {
    /// Times at which `μ(t)/t` is compared with `1/a`.
    pub t_grid: Vec<f64>,
    pub n_samples_r1: u64,
    pub n_samples_r2: u64,
    pub r1_threshold: f64,
    pub r2_threshold: f64,
    pub x: f64,
    /// Defaults to `a/2`.
    pub a_prime: Option<f64>,
}

impl Default for AssumptionsConfig {
    fn default() -> Self {
        Self {
            t_grid: vec![10.0, 100.0, 1000.0],
            n_samples_r1: 20_000,
            n_samples_r2: 100_000,
            r1_threshold: 0.05,
            r2_threshold: 0.1,
            x: 1.0,
            a_prime: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailConfig {
    pub n_samples: u64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self { n_samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaplaceConfig {
    pub p: Option<u64>,
    pub n_replicas: usize,
}

impl Default for LaplaceConfig {
    fn default() -> Self {
        Self {
            p: None,
            n_replicas: 10_000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderLawConfig {
    pub n_samples: usize,
    pub max_steps: u64,
    pub n_boot: usize,
    pub convention: AgeConvention,
}

impl Default for LadderLawConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            max_steps: 1_000_000,
            n_boot: 200,
            convention: AgeConvention::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointTailConfig {
    pub p: Option<u64>,
    pub xy_grid: Vec<(f64, f64)>,
    pub walks_per_pvp: f64,
    pub min_walks: u64,
    pub max_steps: u64,
    pub convention: AgeConvention,
}

impl Default for JointTailConfig {
    fn default() -> Self {
        Self {
            p: None,
            xy_grid: vec![(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)],
            walks_per_pvp: 4000.0,
            min_walks: 20_000,
            max_steps: 10_000_000,
            convention: AgeConvention::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityConfig {
    pub p: Option<u64>,
    pub t: Option<f64>,
    pub n_replicas: usize,
    pub order: SiblingOrder,
    pub convention: AgeConvention,
    pub twin_r_scale: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            p: None,
            t: None,
            n_replicas: 2000,
            order: SiblingOrder::default(),
            convention: AgeConvention::default(),
            twin_r_scale: 1.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FddConfig {
    pub n_replicas: usize,
    pub order: SiblingOrder,
    pub twin_a_scale: f64,
}

impl Default for FddConfig {
    fn default() -> Self {
        Self {
            n_replicas: 500,
            order: SiblingOrder::default(),
            twin_a_scale: 1.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    /// Both default to the model when it is the counterexample.
    pub gamma: Option<f64>,
    pub gamma_prime: Option<f64>,
    pub n_replicas: usize,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            gamma_prime: None,
            n_replicas: 2000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSampleConfig {
    pub horizon: f64,
    pub n_paths: usize,
    /// Use the exponent with `Γ(1−γ)` in the numerator (the default is the
    /// exponent of the scaled Lukasiewicz path).
    pub declared_exponent: bool,
}

impl Default for LimitSampleConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            n_paths: 10,
            declared_exponent: false,
        }
    }
}

pub const TESTS: [&str; 9] = [
    "check-assumptions",
    "tail",
    "laplace",
    "ladder-law",
    "joint-tail",
    "identity",
    "fdd",
    "counterexample",
    "limit-sample",
];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub workers: Option<usize>,
    pub model: ModelConfig,
    #[serde(default = "default_p_grid")]
    pub p_grid: Vec<u64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_x_grid")]
    pub x_grid: Vec<f64>,
    #[serde(default = "default_x_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
    /// Tests run by `all`; every analysis test when absent.
    #[serde(default)]
    pub tests: Option<Vec<String>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub check_assumptions: AssumptionsConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub laplace: LaplaceConfig,
    #[serde(default)]
    pub ladder_law: LadderLawConfig,
    #[serde(default)]
    pub joint_tail: JointTailConfig,
    #[serde(default)]
    pub identity: IdentityConfig,
    #[serde(default)]
    pub fdd: FddConfig,
    #[serde(default)]
    pub counterexample: CounterexampleConfig,
    #[serde(default)]
    pub limit_sample: LimitSampleConfig,
}

fn default_output() -> PathBuf {
    PathBuf::from("cmjlab-out")
}

fn default_p_grid() -> Vec<u64> {
    vec![1000, 10_000]
}

fn default_t_grid() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn default_x_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn default_mesh() -> f64 {
    1e-3
}

/// A validated configuration together with the hash of its source text.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ExperimentConfig,
    pub spec: CharacteristicSpec,
    pub sha256: String,
}

impl Loaded {
    pub fn largest_p(&self) -> u64 {
        *self.config.p_grid.iter().max().expect("validated")
    }

    pub fn largest_t(&self) -> f64 {
        self.config.t_grid.iter().copied().fold(f64::MIN, f64::max)
    }
}

pub fn load(path: &Path) -> Result<Loaded, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Loaded, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text)?;
    let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
    let raw = CharacteristicSpec::new(config.model.variant.clone(), config.model.life.clone())
        .map_err(|e| ConfigError::Invalid(format!("model: {e}")))?;
    validate(&config)?;
    let spec = if config.model.calibrate {
        calibrate_criticality(&raw, 1e-3, config.model.calibration_budget, config.seed)
            .map_err(|e| ConfigError::Invalid(format!("calibration: {e}")))?
            .spec
    } else {
        raw
    };
    Ok(Loaded { config, spec, sha256 })
}

fn validate(c: &ExperimentConfig) -> Result<(), ConfigError> {
    if c.p_grid.is_empty() || c.p_grid.contains(&0) {
        return invalid("p_grid must be non-empty and positive");
    }
    if c.t_grid.is_empty() || c.t_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return invalid("t_grid must be non-empty and positive");
    }
    if c.x_grid.is_empty() || c.x_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return invalid("x_grid must be non-empty and positive");
    }
    if c.lambda_grid.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return invalid("lambda_grid entries must be nonnegative");
    }
    if !(c.mesh > 0.0 && c.mesh.is_finite()) {
        return invalid("mesh must be positive");
    }
    if c.workers == Some(0) {
        return invalid("workers must be positive");
    }
    let t = &c.tolerances;
    for (name, v) in [
        ("tail_rel", t.tail_rel),
        ("laplace_abs", t.laplace_abs),
        ("joint_tail_rel", t.joint_tail_rel),
        ("co_convergence", t.co_convergence),
        ("slope_rel", t.slope_rel),
        ("compliant_slope", t.compliant_slope),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return invalid(format!("tolerances.{name} must be positive"));
        }
    }
    if !(t.ks_p > 0.0 && t.ks_p < 1.0) || !(t.confidence > 0.0 && t.confidence < 1.0) {
        return invalid("tolerances.ks_p and tolerances.confidence must lie in (0, 1)");
    }
    if let Some(tests) = &c.tests {
        for name in tests {
            if !TESTS.contains(&name.as_str()) {
                return invalid(format!("unknown test '{name}'; known: {}", TESTS.join(", ")));
            }
        }
    }
    for (name, n) in [
        ("simulate.n", c.simulate.n as u64),
        ("tail.n_samples", c.tail.n_samples),
        ("laplace.n_replicas", c.laplace.n_replicas as u64),
        ("ladder_law.n_samples", c.ladder_law.n_samples as u64),
        ("identity.n_replicas", c.identity.n_replicas as u64),
        ("fdd.n_replicas", c.fdd.n_replicas as u64),
        ("counterexample.n_replicas", c.counterexample.n_replicas as u64),
        ("check_assumptions.n_samples_r1", c.check_assumptions.n_samples_r1),
        ("check_assumptions.n_samples_r2", c.check_assumptions.n_samples_r2),
    ] {
        if n == 0 {
            return invalid(format!("{name} must be positive"));
        }
    }
    if c.limit_sample.horizon / c.mesh < 1000.0 - 1e-9 {
        return invalid("limit_sample.horizon / mesh must be at least 1000");
    }
    Ok(())
}
