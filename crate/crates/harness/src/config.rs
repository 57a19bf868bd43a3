//! JSON experiment configuration.
//!
//! A configuration is a single versioned document. Unknown fields are
//! rejected and every validation message starts with the path of the
//! offending field.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use shmf_core::bessel::{default_quad_order, load_or_build, BasisCache, EigenBasis};
use shmf_core::blowup::chi_field;
use shmf_core::modal::ModalField;
use shmf_core::noise::{make_spectrum, NoiseSpectrum, SpectrumKind, MAX_NOISE_MODES};
use shmf_core::solver::{dt_floor_for_threshold, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Latest time reachable by a noise path.
pub const MAX_T_STAR: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `solver.tol`.
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() || self.field == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub basis: BasisBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    pub noise: NoiseBlock,
    pub initial: InitialBlock,
    #[serde(default)]
    pub mc: McBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisBlock {
    pub n_modes: usize,
    /// Quadrature nodes; `2 n_modes + 32` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_quad: Option<usize>,
}

impl Default for BasisBlock {
    fn default() -> Self {
        Self { n_modes: 64, n_quad: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub beta: f64,
    pub dt_init: f64,
    /// Step floor; matched to `blowup_grad_threshold` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_min: Option<f64>,
    pub dt_max: f64,
    pub tol: f64,
    pub blowup_grad_threshold: f64,
    pub growth_window: usize,
    pub max_steps: usize,
    pub max_floor_steps: usize,
    pub snapshot_every: usize,
    pub adaptive: bool,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::<f64>::default();
        Self {
            beta: d.beta,
            dt_init: d.dt_init,
            dt_min: None,
            dt_max: d.dt_max,
            tol: d.tol,
            blowup_grad_threshold: 100.0,
            growth_window: d.growth_window,
            max_steps: d.max_steps,
            max_floor_steps: d.max_floor_steps,
            snapshot_every: d.snapshot_every,
            adaptive: d.adaptive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseBlock {
    /// `σ_k = amplitude · x_k^{-exponent}`.
    PowerLaw { amplitude: f64, exponent: f64, beta_target: f64 },
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialBlock {
    /// The parabola `χ_k`.
    ChiK { k: f64 },
    /// `scale · χ_k`.
    ScaledChi { k: f64, scale: f64 },
    /// Modal coefficients; missing modes are zero.
    ModalList { coeffs: Vec<f64> },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McBlock {
    pub n_paths: u64,
    pub seed: u64,
    /// Horizon `t*` of `P(τ ≤ t*)`; also the end time of `simulate`.
    pub t_star: f64,
    pub workers: usize,
}

impl Default for McBlock {
    fn default() -> Self {
        Self { n_paths: 200, seed: 2024, t_star: 1.0, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Write one snapshot CSV per path.
    pub write_trajectories: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), write_trajectories: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyBlock {
    pub epsilons: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub lambda0: f64,
    pub fd_step: f64,
    pub n_r_harmonic: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub max_doublings: usize,
    pub f_grid: usize,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        Self {
            epsilons: vec![0.25, 0.5],
            lambdas: vec![0.1, 1.0, 10.0],
            lambda0: 0.1,
            fd_step: 1e-4,
            n_r_harmonic: 50,
            n_t: 50,
            n_r: 50,
            max_doublings: 8,
            f_grid: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    /// Start of the steering path; the `initial` block when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<InitialBlock>,
    pub target: InitialBlock,
    pub t1: f64,
    #[serde(default)]
    pub linear: bool,
    /// Solver tolerance for the steered run.
    #[serde(default = "default_control_tol")]
    pub tol: f64,
}

fn default_control_tol() -> f64 {
    1e-5
}

impl Default for ControlBlock {
    fn default() -> Self {
        Self {
            source: Some(InitialBlock::ScaledChi { k: 1.0, scale: 0.5 }),
            target: InitialBlock::ChiK { k: 1.0 },
            t1: 0.5,
            linear: false,
            tol: default_control_tol(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            basis: BasisBlock::default(),
            solver: SolverBlock::default(),
            noise: NoiseBlock::PowerLaw { amplitude: 0.1, exponent: 3.5, beta_target: 2.5 },
            initial: InitialBlock::ChiK { k: 8.0 },
            mc: McBlock::default(),
            output: OutputBlock::default(),
            verify: Some(VerifyBlock::default()),
            control: Some(ControlBlock::default()),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("{v} must be positive and finite")))
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON document.
    pub fn from_json_str(s: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            ConfigError::new(field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let n = self.basis.n_modes;
        if n == 0 || n > MAX_NOISE_MODES {
            return Err(ConfigError::new("basis.n_modes", format!("{n} outside [1, {MAX_NOISE_MODES}]")));
        }
        if let Some(m) = self.basis.n_quad {
            if m < 2 * n {
                return Err(ConfigError::new("basis.n_quad", format!("{m} below 2 n_modes = {}", 2 * n)));
            }
        }
        let s = &self.solver;
        positive("solver.beta", s.beta)?;
        positive("solver.dt_init", s.dt_init)?;
        positive("solver.dt_max", s.dt_max)?;
        positive("solver.tol", s.tol)?;
        positive("solver.blowup_grad_threshold", s.blowup_grad_threshold)?;
        if let Some(d) = s.dt_min {
            positive("solver.dt_min", d)?;
        }
        if s.growth_window == 0 {
            return Err(ConfigError::new("solver.growth_window", "must be at least 1"));
        }
        if let NoiseBlock::PowerLaw { amplitude, exponent, beta_target } = self.noise {
            positive("noise.amplitude", amplitude)?;
            positive("noise.beta_target", beta_target)?;
            if !(exponent > beta_target + 0.5) {
                return Err(ConfigError::new(
                    "noise.exponent",
                    format!(
                        "{exponent} must exceed beta_target + 1/2 = {} for trace-class noise",
                        beta_target + 0.5
                    ),
                ));
            }
        }
        self.initial.validate("initial", n)?;
        let mc = &self.mc;
        if mc.n_paths == 0 {
            return Err(ConfigError::new("mc.n_paths", "must be at least 1"));
        }
        if !(mc.t_star > 0.0 && mc.t_star <= MAX_T_STAR) {
            return Err(ConfigError::new("mc.t_star", format!("{} outside (0, {MAX_T_STAR}]", mc.t_star)));
        }
        if mc.workers == 0 {
            return Err(ConfigError::new("mc.workers", "must be at least 1"));
        }
        if let Some(v) = &self.verify {
            for (i, &e) in v.epsilons.iter().enumerate() {
                if !(e > 0.0 && e < 1.0) {
                    return Err(ConfigError::new(format!("verify.epsilons[{i}]"), format!("{e} outside (0, 1)")));
                }
            }
            for (i, &l) in v.lambdas.iter().enumerate() {
                positive(&format!("verify.lambdas[{i}]"), l)?;
            }
            positive("verify.lambda0", v.lambda0)?;
            positive("verify.fd_step", v.fd_step)?;
            for (name, val) in [("n_r_harmonic", v.n_r_harmonic), ("n_t", v.n_t), ("n_r", v.n_r), ("f_grid", v.f_grid)] {
                if val < 2 {
                    return Err(ConfigError::new(format!("verify.{name}"), "must be at least 2"));
                }
            }
        }
        if let Some(c) = &self.control {
            if let Some(src) = &c.source {
                src.validate("control.source", n)?;
            }
            c.target.validate("control.target", n)?;
            positive("control.t1", c.t1)?;
            positive("control.tol", c.tol)?;
        }
        Ok(())
    }

    /// Extra hypotheses of blow-up experiments: `β ∈ (2, 4)`.
    pub fn validate_blowup(&self) -> Result<(), ConfigError> {
        let beta = self.solver.beta;
        if !(beta > 2.0 && beta < 4.0) {
            return Err(ConfigError::new("solver.beta", format!("{beta} outside (2, 4) required for blow-up experiments")));
        }
        Ok(())
    }

    /// Solver configuration for a run ending at `t_end`.
    pub fn solver_config(&self, t_end: f64) -> SolverConfig<f64> {
        let s = &self.solver;
        let cfg = SolverConfig {
            beta: s.beta,
            t_end,
            dt_init: s.dt_init,
            dt_max: s.dt_max,
            tol: s.tol,
            adaptive: s.adaptive,
            growth_window: s.growth_window,
            max_steps: s.max_steps,
            max_floor_steps: s.max_floor_steps,
            snapshot_every: s.snapshot_every,
            ..Default::default()
        };
        match s.dt_min {
            Some(d) => SolverConfig { dt_min: d, blowup_grad_threshold: s.blowup_grad_threshold, ..cfg },
            None => cfg.with_blowup_threshold(s.blowup_grad_threshold),
        }
    }

    /// Step floor actually used by the solver.
    pub fn resolved_dt_min(&self) -> f64 {
        self.solver.dt_min.unwrap_or_else(|| dt_floor_for_threshold(self.solver.blowup_grad_threshold))
    }
}

impl InitialBlock {
    fn validate(&self, field: &str, n_modes: usize) -> Result<(), ConfigError> {
        match self {
            InitialBlock::ChiK { k } => positive(&format!("{field}.k"), *k),
            InitialBlock::ScaledChi { k, scale } => {
                positive(&format!("{field}.k"), *k)?;
                if !scale.is_finite() {
                    return Err(ConfigError::new(format!("{field}.scale"), "must be finite"));
                }
                Ok(())
            }
            InitialBlock::ModalList { coeffs } => {
                if coeffs.len() > n_modes {
                    return Err(ConfigError::new(
                        format!("{field}.coeffs"),
                        format!("{} coefficients for {n_modes} modes", coeffs.len()),
                    ));
                }
                if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
                    return Err(ConfigError::new(format!("{field}.coeffs[{i}]"), "must be finite"));
                }
                Ok(())
            }
            InitialBlock::Zero => Ok(()),
        }
    }

    pub fn build(&self, basis: &Arc<EigenBasis<f64>>) -> ModalField<f64> {
        match self {
            InitialBlock::ChiK { k } => chi_field(basis, *k),
            InitialBlock::ScaledChi { k, scale } => chi_field(basis, *k).scale(*scale),
            InitialBlock::ModalList { coeffs } => {
                let mut c = coeffs.clone();
                c.resize(basis.n_modes(), 0.0);
                ModalField::from_coeffs(basis, c).expect("length matches the basis")
            }
            InitialBlock::Zero => ModalField::zeros(basis),
        }
    }
}

/// A validated configuration with its basis, spectrum and initial datum built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub basis: Arc<EigenBasis<f64>>,
    /// `None` when the noise is off.
    pub spectrum: Option<Arc<NoiseSpectrum<f64>>>,
    pub h0: ModalField<f64>,
}

impl Experiment {
    /// Builds the experiment, reusing Bessel zeros from `cache` when given.
    pub fn build(config: ExperimentConfig, cache: Option<&BasisCache>) -> Result<Self, ConfigError> {
        config.validate()?;
        let n = config.basis.n_modes;
        let m = config.basis.n_quad.unwrap_or_else(|| default_quad_order(n));
        let basis = load_or_build::<f64>(n, m, cache).map_err(|e| ConfigError::new("basis", e.to_string()))?;
        let spectrum = match config.noise {
            NoiseBlock::PowerLaw { amplitude, exponent, beta_target } => Some(Arc::new(
                make_spectrum(SpectrumKind::PowerLaw, amplitude, exponent, &basis, beta_target)
                    .map_err(|e| ConfigError::new("noise", e.to_string()))?,
            )),
            NoiseBlock::Off => None,
        };
        config
            .solver_config(config.mc.t_star)
            .validate()
            .map_err(|e| ConfigError::new("solver", e.to_string()))?;
        let h0 = config.initial.build(&basis);
        Ok(Self { config, basis, spectrum, h0 })
    }
}
