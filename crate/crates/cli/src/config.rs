//! Experiment configuration: a TOML document with explicit units and no
//! defaults for physical parameters.
//!
//! Every experiment names the sections and checks it needs; [`validate`]
//! reports all missing or inconsistent entries before any computation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sctf_core::dynamics::Catalog;
use sctf_core::gabor::{gaussian_window, GaussianFrameSpec, WindowKind};
use sctf_core::modulation::PhaseSpaceSampling;
use sctf_core::{Grid, Lattice, PlanckPair};

use crate::error::CliError;

/// The experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    FrameBounds,
    DualWindow,
    Stft,
    ModNorm,
    Flow,
    Beam,
    Parametrix,
    ErrorScaling,
    ResidualScaling,
    GaborMatrix,
    UniformBounds,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::FrameBounds => "frame-bounds",
            ExperimentKind::DualWindow => "dual-window",
            ExperimentKind::Stft => "stft",
            ExperimentKind::ModNorm => "mod-norm",
            ExperimentKind::Flow => "flow",
            ExperimentKind::Beam => "beam",
            ExperimentKind::Parametrix => "parametrix",
            ExperimentKind::ErrorScaling => "error-scaling",
            ExperimentKind::ResidualScaling => "residual-scaling",
            ExperimentKind::GaborMatrix => "gabor-matrix",
            ExperimentKind::UniformBounds => "uniform-bounds",
        };
        f.write_str(s)
    }
}

/// Periodic grid `[-L/2, L/2)` with `points` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Period `L` (position units).
    pub length: f64,
    /// Sample count `M`, a power of two.
    pub points: usize,
}

/// Lattice `h^{1/2} (alpha Z x beta Z)` truncated to `|k|, |l| <= k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k_max: usize,
}

/// A Hamiltonian from the built-in catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    /// `free`, `harmonic`, `pendulum` or `perturbed_harmonic`.
    pub name: String,
    /// Coupling of `perturbed_harmonic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Times and step sizes (time units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Horizon `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Output times within `[0, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Step of the classical trajectories.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_dt: Option<f64>,
    /// Initial step of the self-converged split-step reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_dt: Option<f64>,
    /// Central-difference step of the residual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_fd: Option<f64>,
}

/// Test states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    /// `T^hbar(x, xi) phi_0^hbar`.
    Coherent { x: f64, xi: f64 },
    /// Unit-norm `exp(-(x - center)^2 / (2 width^2) + i momentum x / hbar)`,
    /// the same profile at every `hbar` up to the phase.
    Gaussian { center: f64, width: f64, momentum: f64 },
    /// Seeded random superpositions of atoms within `inner_fraction` of the
    /// lattice hull.
    RandomHull { count: usize, inner_fraction: f64, seed: u64 },
}

/// Rectangular phase-space sampling in unscaled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub x_extent: f64,
    pub xi_extent: f64,
    pub dx: f64,
    pub dxi: f64,
}

/// Mixed-norm exponents and weight exponents `s` of `v_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormConfig {
    pub p: f64,
    pub q: f64,
    pub s: Vec<f64>,
}

/// Gabor-matrix storage and analysis parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    /// Relative storage floor.
    pub floor: f64,
    /// Relative sparsification threshold.
    pub threshold: f64,
    /// Random coefficient vectors for the sparse-apply error.
    pub vectors: usize,
    /// Off-lattice pairs for the envelope check.
    pub envelope_samples: usize,
    /// Fraction of the lattice hull from which the off-lattice sources are drawn.
    pub inner_fraction: f64,
    /// Half-width of the target box around the image, in units of `h^{1/2}`.
    pub spread: f64,
    pub seed: u64,
}

/// Pass/fail thresholds. Each experiment requires its own subset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bound_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_reconstruction_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_energy_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_route_discrepancy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_symplectic_defect: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_energy_drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_beam_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_initial_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_parametrix_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_decay_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_constant_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_kept_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_application_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_envelope_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_growth: Option<f64>,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Planck constants `hbar`.
    pub hbar: Vec<f64>,
    /// Seed of Krylov start vectors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixConfig>,
    #[serde(default)]
    pub checks: ChecksConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Sections an experiment reads.
#[derive(Debug, Clone, Copy)]
struct Needs {
    lattice: bool,
    hamiltonian: bool,
    t: bool,
    times: bool,
    beam_dt: bool,
    split_dt: bool,
    dt_fd: bool,
    state: bool,
    sampling: bool,
    norm: bool,
    matrix: bool,
    seed: bool,
    min_hbars: usize,
}

const NONE: Needs = Needs {
    lattice: false,
    hamiltonian: false,
    t: false,
    times: false,
    beam_dt: false,
    split_dt: false,
    dt_fd: false,
    state: false,
    sampling: false,
    norm: false,
    matrix: false,
    seed: false,
    min_hbars: 1,
};

fn needs(kind: ExperimentKind) -> Needs {
    use ExperimentKind::*;
    match kind {
        FrameBounds => Needs { lattice: true, seed: true, ..NONE },
        DualWindow => Needs { lattice: true, state: true, ..NONE },
        Stft => Needs { state: true, sampling: true, lattice: true, ..NONE },
        ModNorm => Needs { state: true, sampling: true, norm: true, lattice: true, ..NONE },
        Flow => Needs { hamiltonian: true, t: true, beam_dt: true, state: true, ..NONE },
        Beam => Needs { hamiltonian: true, times: true, beam_dt: true, split_dt: true, state: true, ..NONE },
        Parametrix => Needs {
            lattice: true,
            hamiltonian: true,
            times: true,
            beam_dt: true,
            split_dt: true,
            state: true,
            ..NONE
        },
        ErrorScaling => Needs {
            lattice: true,
            hamiltonian: true,
            t: true,
            beam_dt: true,
            split_dt: true,
            state: true,
            min_hbars: 2,
            ..NONE
        },
        ResidualScaling => Needs {
            hamiltonian: true,
            t: true,
            beam_dt: true,
            dt_fd: true,
            state: true,
            min_hbars: 2,
            ..NONE
        },
        GaborMatrix => Needs {
            lattice: true,
            hamiltonian: true,
            t: true,
            beam_dt: true,
            split_dt: true,
            matrix: true,
            ..NONE
        },
        UniformBounds => Needs {
            lattice: true,
            hamiltonian: true,
            times: true,
            beam_dt: true,
            state: true,
            sampling: true,
            norm: true,
            min_hbars: 2,
            ..NONE
        },
    }
}

/// Names of the checks an experiment requires.
pub fn required_checks(kind: ExperimentKind) -> &'static [&'static str] {
    use ExperimentKind::*;
    match kind {
        FrameBounds => &["max_bound_spread", "min_lower_bound"],
        DualWindow => &["max_reconstruction_error"],
        Stft => &["max_energy_defect"],
        ModNorm => &["max_route_discrepancy"],
        Flow => &["max_symplectic_defect", "max_energy_drift"],
        Beam => &["max_beam_error"],
        Parametrix => &["max_initial_error", "max_parametrix_error"],
        ErrorScaling => &["slope_min", "slope_max", "ratio_min", "ratio_max"],
        ResidualScaling => &["slope_min", "slope_max"],
        GaborMatrix => &[
            "min_decay_exponent",
            "max_constant_spread",
            "max_kept_fraction",
            "max_application_error",
            "max_envelope_ratio",
        ],
        UniformBounds => &["max_growth"],
    }
}

impl ChecksConfig {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "max_bound_spread" => self.max_bound_spread,
            "min_lower_bound" => self.min_lower_bound,
            "max_reconstruction_error" => self.max_reconstruction_error,
            "max_energy_defect" => self.max_energy_defect,
            "max_route_discrepancy" => self.max_route_discrepancy,
            "max_symplectic_defect" => self.max_symplectic_defect,
            "max_energy_drift" => self.max_energy_drift,
            "max_beam_error" => self.max_beam_error,
            "max_initial_error" => self.max_initial_error,
            "max_parametrix_error" => self.max_parametrix_error,
            "slope_min" => self.slope_min,
            "slope_max" => self.slope_max,
            "ratio_min" => self.ratio_min,
            "ratio_max" => self.ratio_max,
            "min_decay_exponent" => self.min_decay_exponent,
            "max_constant_spread" => self.max_constant_spread,
            "max_kept_fraction" => self.max_kept_fraction,
            "max_application_error" => self.max_application_error,
            "max_envelope_ratio" => self.max_envelope_ratio,
            "max_growth" => self.max_growth,
            _ => None,
        }
    }

    /// A required threshold; [`validate`] guarantees presence.
    pub fn require(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("check {name} was validated"))
    }
}

fn positive(errors: &mut Vec<String>, name: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errors.push(format!("{name} = {v} must be positive and finite"));
    }
}

/// All problems of `cfg` for running `requested`, empty when it is valid.
pub fn validate(cfg: &ExperimentConfig, requested: ExperimentKind) -> Vec<String> {
    let mut errors = Vec::new();
    if cfg.experiment != requested {
        errors.push(format!(
            "config describes experiment `{}` but `{requested}` was requested",
            cfg.experiment
        ));
    }
    let kind = cfg.experiment;
    let need = needs(kind);
    let grid = match Grid::new(cfg.grid.length, cfg.grid.points) {
        Ok(g) => Some(g),
        Err(e) => {
            errors.push(format!("grid: {e}"));
            None
        }
    };
    if cfg.hbar.len() < need.min_hbars {
        errors.push(format!("hbar: {kind} needs at least {} values", need.min_hbars));
    }
    let mut pairs = Vec::new();
    for &h in &cfg.hbar {
        match PlanckPair::new(h) {
            Ok(p) => pairs.push(p),
            Err(e) => errors.push(format!("hbar: {e}")),
        }
    }
    let mut missing = |present: bool, needed: bool, name: &str| {
        if needed && !present {
            errors.push(format!("[{name}] is required by {kind}"));
        }
    };
    missing(cfg.lattice.is_some(), need.lattice, "lattice");
    missing(cfg.hamiltonian.is_some(), need.hamiltonian, "hamiltonian");
    missing(cfg.state.is_some(), need.state, "state");
    missing(cfg.sampling.is_some(), need.sampling, "sampling");
    missing(cfg.norm.is_some(), need.norm, "norm");
    missing(cfg.matrix.is_some(), need.matrix, "matrix");
    let time_needed = need.t || need.times || need.beam_dt || need.split_dt || need.dt_fd;
    missing(cfg.time.is_some(), time_needed, "time");
    if need.seed && cfg.seed.is_none() {
        errors.push(format!("seed is required by {kind}"));
    }
    if let Some(time) = &cfg.time {
        let fields = [
            (need.t, time.t, "time.t"),
            (need.beam_dt, time.beam_dt, "time.beam_dt"),
            (need.split_dt, time.split_dt, "time.split_dt"),
            (need.dt_fd, time.dt_fd, "time.dt_fd"),
        ];
        for (needed, value, name) in fields {
            match (needed, value) {
                (true, None) => errors.push(format!("{name} is required by {kind}")),
                (_, Some(v)) => positive(&mut errors, name, v),
                _ => {}
            }
        }
        match (&time.times, need.times) {
            (None, true) => errors.push(format!("time.times is required by {kind}")),
            (Some(ts), _) => {
                if ts.is_empty() || ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    errors.push("time.times must be a nonempty list of nonnegative times".into());
                }
                if ts.windows(2).any(|w| w[1] <= w[0]) {
                    errors.push("time.times must be strictly increasing".into());
                }
            }
            _ => {}
        }
    }
    if let Some(h) = &cfg.hamiltonian {
        if let Err(e) = Catalog::from_name(&h.name, h.epsilon) {
            errors.push(format!("hamiltonian: {e}"));
        }
    }
    if let (Some(lat), Some(grid)) = (&cfg.lattice, &grid) {
        match GaussianFrameSpec::new(lat.alpha, lat.beta, lat.k_max) {
            Err(e) => errors.push(format!("lattice: {e}")),
            Ok(_) => {
                for hp in &pairs {
                    if let Err(e) = Lattice::new(lat.alpha, lat.beta, hp.sqrt_h(), lat.k_max, grid) {
                        errors.push(format!("lattice at hbar = {}: {e}", hp.hbar()));
                    }
                    if let Err(e) = gaussian_window(WindowKind::Phi0Hbar, *hp, grid) {
                        errors.push(format!("window at hbar = {}: {e}", hp.hbar()));
                    }
                }
            }
        }
    }
    if let Some(state) = &cfg.state {
        match state {
            StateConfig::Coherent { x, xi } => {
                if !(x.is_finite() && xi.is_finite()) {
                    errors.push("state: coherent center must be finite".into());
                }
            }
            StateConfig::Gaussian { center, width, momentum } => {
                positive(&mut errors, "state.width", *width);
                if !(center.is_finite() && momentum.is_finite()) {
                    errors.push("state: center and momentum must be finite".into());
                }
            }
            StateConfig::RandomHull { count, inner_fraction, .. } => {
                if *count == 0 {
                    errors.push("state.count must be positive".into());
                }
                if !(*inner_fraction > 0.0 && *inner_fraction <= 1.0) {
                    errors.push(format!("state.inner_fraction = {inner_fraction} must lie in (0, 1]"));
                }
                if cfg.lattice.is_none() {
                    errors.push("state: random-hull needs [lattice]".into());
                }
            }
        }
        let coherent_only = matches!(kind, ExperimentKind::Flow | ExperimentKind::Beam | ExperimentKind::ResidualScaling);
        if coherent_only && !matches!(state, StateConfig::Coherent { .. }) {
            errors.push(format!("state: {kind} launches from a phase-space point; use kind = \"coherent\""));
        }
        if kind == ExperimentKind::ErrorScaling && matches!(state, StateConfig::RandomHull { .. }) {
            errors.push("state: error-scaling needs one state per hbar; use coherent or gaussian".into());
        }
    }
    if let Some(s) = &cfg.sampling {
        if let Err(e) = PhaseSpaceSampling::symmetric(s.x_extent, s.xi_extent, s.dx, s.dxi) {
            errors.push(format!("sampling: {e}"));
        }
    }
    if let Some(n) = &cfg.norm {
        for (name, v) in [("norm.p", n.p), ("norm.q", n.q)] {
            if !(v >= 1.0) {
                errors.push(format!("{name} = {v} must lie in [1, inf]"));
            }
        }
        if n.s.is_empty() || n.s.iter().any(|s| !s.is_finite()) {
            errors.push("norm.s must be a nonempty list of finite exponents".into());
        }
    }
    if let Some(m) = &cfg.matrix {
        if !(m.floor >= 0.0 && m.floor < 1.0) {
            errors.push(format!("matrix.floor = {} must lie in [0, 1)", m.floor));
        }
        if !(m.threshold >= 0.0 && m.threshold < 1.0) {
            errors.push(format!("matrix.threshold = {} must lie in [0, 1)", m.threshold));
        }
        if !(m.inner_fraction > 0.0 && m.inner_fraction <= 1.0) {
            errors.push(format!("matrix.inner_fraction = {} must lie in (0, 1]", m.inner_fraction));
        }
        positive(&mut errors, "matrix.spread", m.spread);
        if m.vectors == 0 || m.envelope_samples == 0 {
            errors.push("matrix.vectors and matrix.envelope_samples must be positive".into());
        }
    }
    for name in required_checks(kind) {
        match cfg.checks.get(name) {
            None => errors.push(format!("checks.{name} is required by {kind}")),
            Some(v) if !v.is_finite() => errors.push(format!("checks.{name} must be finite")),
            _ => {}
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAME: &str = r#"
experiment = "frame-bounds"
hbar = [0.15915494309189535, 0.1]
seed = 7

[grid]
length = 32.0
points = 2048

[lattice]
alpha = 0.5
beta = 1.0
k_max = 12

[checks]
max_bound_spread = 0.01
min_lower_bound = 0.0
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(FRAME).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::FrameBounds);
        assert!(validate(&cfg, ExperimentKind::FrameBounds).is_empty());
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = FRAME.replace("k_max = 12", "k_max = 12\nkmax = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = FRAME.replace("seed = 7", "seed = 7\nverbose = true");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn physics_parameters_have_no_defaults() {
        let text = FRAME.replace("hbar = [0.15915494309189535, 0.1]\n", "");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = FRAME.replace("[lattice]\nalpha = 0.5\nbeta = 1.0\nk_max = 12\n", "");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let errors = validate(&cfg, ExperimentKind::FrameBounds);
        assert!(errors.iter().any(|e| e.contains("[lattice]")), "{errors:?}");
    }

    #[test]
    fn oversized_lattice_and_wrong_kind_are_reported_together() {
        let text = FRAME.replace("k_max = 12", "k_max = 80");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let errors = validate(&cfg, ExperimentKind::DualWindow);
        assert!(errors.iter().any(|e| e.contains("requested")));
        assert!(errors.iter().any(|e| e.starts_with("lattice at hbar")));
    }

    #[test]
    fn missing_checks_are_reported() {
        let text = FRAME.replace("min_lower_bound = 0.0\n", "");
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let errors = validate(&cfg, ExperimentKind::FrameBounds);
        assert_eq!(errors, vec!["checks.min_lower_bound is required by frame-bounds".to_string()]);
    }
}
