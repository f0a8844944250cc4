//! Flat `key = value` experiment configuration with dotted section keys.
//!
//! Every key has a default; unknown keys, duplicate keys and malformed values
//! are rejected with the offending key path.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use soliton_core::dynamics::Formulation;
use soliton_core::Grid;

use crate::output::fmt_f64;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Spectrum,
    Modulate,
    Monotonicity,
    Virial,
    Phase,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Simulate,
        Experiment::Spectrum,
        Experiment::Modulate,
        Experiment::Monotonicity,
        Experiment::Virial,
        Experiment::Phase,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Spectrum => "spectrum",
            Experiment::Modulate => "modulate",
            Experiment::Monotonicity => "monotonicity",
            Experiment::Virial => "virial",
            Experiment::Phase => "phase",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationKind {
    None,
    Bump,
    Random,
}

impl PerturbationKind {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::Bump => "bump",
            PerturbationKind::Random => "random",
        }
    }
}

impl FromStr for PerturbationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(PerturbationKind::None),
            "bump" => Ok(PerturbationKind::Bump),
            "random" => Ok(PerturbationKind::Random),
            _ => Err(format!("unknown perturbation kind `{s}` (none, bump, random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    /// Number of Gaussian bumps drawn by the `random` kind.
    pub modes: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub half_length: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorSpec {
    pub scheme: Formulation,
    /// `None` picks the largest `1e-3 / 2^m` with `dt k_max² <= 2`.
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Steps between snapshots; `None` picks 10 for the monotonicity audit
    /// and 100 otherwise.
    pub stride: Option<usize>,
    pub v_guard: f64,
    /// Also run the other two formulations and compare.
    pub compare: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsSpec {
    pub r_grid: Vec<f64>,
    /// `None` means `{-σ_c, 0, σ_c}`.
    pub sigma_grid: Option<Vec<f64>>,
    /// `None` means `ν_c = sqrt(1 - c²)/8`.
    pub nu: Option<f64>,
    pub k_max: u32,
    /// Half-width of the co-moving window for the local distance.
    pub window: f64,
    /// Fraction of the run treated as transient.
    pub transient: f64,
    pub soliton_check: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub edge: bool,
    pub edge_half_length: f64,
    pub edge_points: usize,
    pub restarts: usize,
    pub random_pairs: usize,
    pub eigenvalues: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationSpec {
    pub scaling: bool,
    pub recovery_grid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub speed: f64,
    pub position: f64,
    pub phase: f64,
    pub perturbation: PerturbationSpec,
    pub grid: GridSpec,
    pub integrator: IntegratorSpec,
    pub diagnostics: DiagnosticsSpec,
    pub spectrum: SpectrumSpec,
    pub modulation: ModulationSpec,
    pub phase_window: f64,
    pub sweep_speeds: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Simulate,
            speed: 0.6,
            position: 0.0,
            phase: 0.0,
            perturbation: PerturbationSpec {
                kind: PerturbationKind::None,
                amplitude: 1e-2,
                width: 1.0,
                center: 0.0,
                modes: 4,
                seed: None,
            },
            grid: GridSpec {
                half_length: None,
                points: None,
            },
            integrator: IntegratorSpec {
                scheme: Formulation::Hydro,
                dt: None,
                t_final: 1.0,
                stride: None,
                v_guard: 0.05,
                compare: false,
            },
            diagnostics: DiagnosticsSpec {
                r_grid: vec![5.0, 10.0, 15.0],
                sigma_grid: None,
                nu: None,
                k_max: 3,
                window: 10.0,
                transient: 0.2,
                soliton_check: true,
            },
            spectrum: SpectrumSpec {
                edge: true,
                edge_half_length: 80.0,
                edge_points: 1024,
                restarts: 4,
                random_pairs: 10,
                eigenvalues: 20,
            },
            modulation: ModulationSpec {
                scaling: true,
                recovery_grid: true,
            },
            phase_window: 4.0,
            sweep_speeds: vec![0.3, 0.6, 0.9],
            output_dir: None,
        }
    }
}

/// Every accepted key, in canonical order.
pub const KEYS: [&str; 35] = [
    "experiment",
    "physics.c",
    "physics.position",
    "physics.phase",
    "perturbation.kind",
    "perturbation.amplitude",
    "perturbation.width",
    "perturbation.center",
    "perturbation.modes",
    "perturbation.seed",
    "grid.half_length",
    "grid.points",
    "integrator.scheme",
    "integrator.dt",
    "integrator.t_final",
    "integrator.stride",
    "integrator.v_guard",
    "integrator.compare",
    "diagnostics.r_grid",
    "diagnostics.sigma_grid",
    "diagnostics.nu",
    "diagnostics.k_max",
    "diagnostics.window",
    "diagnostics.transient",
    "diagnostics.soliton_check",
    "spectrum.edge",
    "spectrum.edge_half_length",
    "spectrum.edge_points",
    "spectrum.restarts",
    "spectrum.random_pairs",
    "spectrum.eigenvalues",
    "modulation.scaling",
    "modulation.recovery_grid",
    "phase.window_radius",
    "sweep.speeds",
];

const AUTO: &str = "auto";

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    let x: f64 = value
        .parse()
        .map_err(|_| invalid(key, format!("expected a number, got `{value}`")))?;
    if !x.is_finite() {
        return Err(invalid(key, format!("expected a finite number, got `{value}`")));
    }
    Ok(x)
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("expected a non-negative integer, got `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(key, format!("expected true or false, got `{value}`"))),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|s| parse_f64(key, s.trim())).collect()
}

fn auto_or<T>(value: &str, f: impl FnOnce(&str) -> Result<T, ConfigError>) -> Result<Option<T>, ConfigError> {
    if value == AUTO {
        Ok(None)
    } else {
        f(value).map(Some)
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",")
}

fn fmt_opt<T>(x: &Option<T>, f: impl Fn(&T) -> String) -> String {
    x.as_ref().map(f).unwrap_or_else(|| AUTO.to_string())
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "experiment" => self.experiment = value.parse().map_err(|e: String| invalid(key, e))?,
            "physics.c" => self.speed = parse_f64(key, value)?,
            "physics.position" => self.position = parse_f64(key, value)?,
            "physics.phase" => self.phase = parse_f64(key, value)?,
            "perturbation.kind" => {
                self.perturbation.kind = value.parse().map_err(|e: String| invalid(key, e))?
            }
            "perturbation.amplitude" => self.perturbation.amplitude = parse_f64(key, value)?,
            "perturbation.width" => self.perturbation.width = parse_f64(key, value)?,
            "perturbation.center" => self.perturbation.center = parse_f64(key, value)?,
            "perturbation.modes" => self.perturbation.modes = parse_usize(key, value)?,
            "perturbation.seed" => {
                self.perturbation.seed = auto_or(value, |v| {
                    v.parse()
                        .map_err(|_| invalid(key, format!("expected an unsigned 64-bit integer, got `{v}`")))
                })?
            }
            "grid.half_length" => self.grid.half_length = auto_or(value, |v| parse_f64(key, v))?,
            "grid.points" => self.grid.points = auto_or(value, |v| parse_usize(key, v))?,
            "integrator.scheme" => {
                self.integrator.scheme = value
                    .parse()
                    .map_err(|_| invalid(key, format!("unknown scheme `{value}` (spin, hydro, psi)")))?
            }
            "integrator.dt" => self.integrator.dt = auto_or(value, |v| parse_f64(key, v))?,
            "integrator.t_final" => self.integrator.t_final = parse_f64(key, value)?,
            "integrator.stride" => self.integrator.stride = auto_or(value, |v| parse_usize(key, v))?,
            "integrator.v_guard" => self.integrator.v_guard = parse_f64(key, value)?,
            "integrator.compare" => self.integrator.compare = parse_bool(key, value)?,
            "diagnostics.r_grid" => self.diagnostics.r_grid = parse_list(key, value)?,
            "diagnostics.sigma_grid" => {
                self.diagnostics.sigma_grid = auto_or(value, |v| parse_list(key, v))?
            }
            "diagnostics.nu" => self.diagnostics.nu = auto_or(value, |v| parse_f64(key, v))?,
            "diagnostics.k_max" => {
                self.diagnostics.k_max = value
                    .parse()
                    .map_err(|_| invalid(key, format!("expected a small integer, got `{value}`")))?
            }
            "diagnostics.window" => self.diagnostics.window = parse_f64(key, value)?,
            "diagnostics.transient" => self.diagnostics.transient = parse_f64(key, value)?,
            "diagnostics.soliton_check" => self.diagnostics.soliton_check = parse_bool(key, value)?,
            "spectrum.edge" => self.spectrum.edge = parse_bool(key, value)?,
            "spectrum.edge_half_length" => self.spectrum.edge_half_length = parse_f64(key, value)?,
            "spectrum.edge_points" => self.spectrum.edge_points = parse_usize(key, value)?,
            "spectrum.restarts" => self.spectrum.restarts = parse_usize(key, value)?,
            "spectrum.random_pairs" => self.spectrum.random_pairs = parse_usize(key, value)?,
            "spectrum.eigenvalues" => self.spectrum.eigenvalues = parse_usize(key, value)?,
            "modulation.scaling" => self.modulation.scaling = parse_bool(key, value)?,
            "modulation.recovery_grid" => self.modulation.recovery_grid = parse_bool(key, value)?,
            "phase.window_radius" => self.phase_window = parse_f64(key, value)?,
            "sweep.speeds" => self.sweep_speeds = parse_list(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Canonical textual value of a key.
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "experiment" => self.experiment.name().to_string(),
            "physics.c" => fmt_f64(self.speed),
            "physics.position" => fmt_f64(self.position),
            "physics.phase" => fmt_f64(self.phase),
            "perturbation.kind" => self.perturbation.kind.name().to_string(),
            "perturbation.amplitude" => fmt_f64(self.perturbation.amplitude),
            "perturbation.width" => fmt_f64(self.perturbation.width),
            "perturbation.center" => fmt_f64(self.perturbation.center),
            "perturbation.modes" => self.perturbation.modes.to_string(),
            "perturbation.seed" => fmt_opt(&self.perturbation.seed, |s| s.to_string()),
            "grid.half_length" => fmt_opt(&self.grid.half_length, |x| fmt_f64(*x)),
            "grid.points" => fmt_opt(&self.grid.points, |n| n.to_string()),
            "integrator.scheme" => self.integrator.scheme.name().to_string(),
            "integrator.dt" => fmt_opt(&self.integrator.dt, |x| fmt_f64(*x)),
            "integrator.t_final" => fmt_f64(self.integrator.t_final),
            "integrator.stride" => fmt_opt(&self.integrator.stride, |n| n.to_string()),
            "integrator.v_guard" => fmt_f64(self.integrator.v_guard),
            "integrator.compare" => self.integrator.compare.to_string(),
            "diagnostics.r_grid" => fmt_list(&self.diagnostics.r_grid),
            "diagnostics.sigma_grid" => fmt_opt(&self.diagnostics.sigma_grid, |s| fmt_list(s)),
            "diagnostics.nu" => fmt_opt(&self.diagnostics.nu, |x| fmt_f64(*x)),
            "diagnostics.k_max" => self.diagnostics.k_max.to_string(),
            "diagnostics.window" => fmt_f64(self.diagnostics.window),
            "diagnostics.transient" => fmt_f64(self.diagnostics.transient),
            "diagnostics.soliton_check" => self.diagnostics.soliton_check.to_string(),
            "spectrum.edge" => self.spectrum.edge.to_string(),
            "spectrum.edge_half_length" => fmt_f64(self.spectrum.edge_half_length),
            "spectrum.edge_points" => self.spectrum.edge_points.to_string(),
            "spectrum.restarts" => self.spectrum.restarts.to_string(),
            "spectrum.random_pairs" => self.spectrum.random_pairs.to_string(),
            "spectrum.eigenvalues" => self.spectrum.eigenvalues.to_string(),
            "modulation.scaling" => self.modulation.scaling.to_string(),
            "modulation.recovery_grid" => self.modulation.recovery_grid.to_string(),
            "phase.window_radius" => fmt_f64(self.phase_window),
            "sweep.speeds" => fmt_list(&self.sweep_speeds),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            message: format!("override must be `key=value`, got `{assignment}`"),
        })?;
        self.set(key.trim(), value)
    }

    /// Every key with its resolved value, one per line, in canonical order.
    /// The output directory is not part of the canonical form.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The integrator step; `auto` keeps the explicit stages stable on the
    /// highest resolved wavenumber.
    pub fn time_step(&self) -> Result<f64, ConfigError> {
        if let Some(dt) = self.integrator.dt {
            return Ok(dt);
        }
        let k_max = std::f64::consts::PI / self.build_grid()?.spacing();
        let mut dt = 1e-3;
        while dt * k_max * k_max > 2.0 {
            dt *= 0.5;
        }
        Ok(dt)
    }

    pub fn snapshot_stride(&self) -> usize {
        match (self.integrator.stride, self.experiment) {
            (Some(n), _) => n,
            (None, Experiment::Monotonicity) => 10,
            (None, _) => 100,
        }
    }

    /// `σ_c = sqrt(1 - c²)/4`.
    pub fn sigma_limit(&self) -> f64 {
        (1.0 - self.speed * self.speed).sqrt() / 4.0
    }

    pub fn sigma_values(&self) -> Vec<f64> {
        match &self.diagnostics.sigma_grid {
            Some(s) => s.clone(),
            None => {
                let s = self.sigma_limit();
                vec![-s, 0.0, s]
            }
        }
    }

    /// The simulation grid; `auto` picks the speed-adapted default, widened
    /// to a half-length of 80 for the monotonicity audit.
    pub fn build_grid(&self) -> Result<Grid, ConfigError> {
        let grid = match (self.grid.half_length, self.grid.points) {
            (Some(l), Some(n)) => Grid::new(l, n),
            (None, None) => {
                let base = Grid::for_speed(self.speed).map_err(|e| invalid("physics.c", e.to_string()))?;
                if self.experiment == Experiment::Monotonicity && base.half_length() < 80.0 {
                    let n = ((160.0 / base.spacing()).ceil() as usize).next_power_of_two();
                    Grid::new(80.0, n)
                } else {
                    Ok(base)
                }
            }
            _ => {
                return Err(invalid(
                    "grid",
                    "grid.half_length and grid.points must both be set or both be auto",
                ))
            }
        };
        grid.map_err(|e| invalid("grid", e.to_string()))
    }

    /// Checks every precondition the selected experiment relies on.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let c = self.speed;
        if !(c.abs() < 1.0) {
            return Err(invalid("physics.c", format!("speed must satisfy |c| < 1, got {c}")));
        }
        if c == 0.0 {
            return Err(invalid("physics.c", "the black soliton c = 0 is excluded"));
        }
        let p = &self.perturbation;
        if !(p.amplitude >= 0.0) {
            return Err(invalid("perturbation.amplitude", "must be non-negative"));
        }
        if !(p.width > 0.0) {
            return Err(invalid("perturbation.width", "must be positive"));
        }
        if p.kind == PerturbationKind::Random {
            if p.seed.is_none() {
                return Err(invalid(
                    "perturbation.seed",
                    "a seed is required for random perturbations",
                ));
            }
            if p.modes == 0 {
                return Err(invalid("perturbation.modes", "must be positive"));
            }
        }
        self.build_grid()?;
        let it = &self.integrator;
        if it.dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(invalid("integrator.dt", "must be positive"));
        }
        if !(it.t_final >= 0.0) {
            return Err(invalid("integrator.t_final", "must be non-negative"));
        }
        if it.stride == Some(0) {
            return Err(invalid("integrator.stride", "must be positive"));
        }
        if !(it.v_guard > 0.0 && it.v_guard < 1.0) {
            return Err(invalid("integrator.v_guard", "must lie in (0, 1)"));
        }
        if self.experiment != Experiment::Spectrum {
            let bump = match self.perturbation.kind {
                PerturbationKind::None => 0.0,
                _ => self.perturbation.amplitude,
            };
            let depth = (1.0 - c * c).sqrt() + bump;
            if depth > 1.0 - it.v_guard {
                return Err(invalid(
                    "integrator.v_guard",
                    format!(
                        "initial max |v| can reach {depth}, above the ceiling {}; lower the guard",
                        1.0 - it.v_guard
                    ),
                ));
            }
        }
        let d = &self.diagnostics;
        let limit = self.sigma_limit();
        if self.experiment == Experiment::Monotonicity {
            if d.r_grid.is_empty() {
                return Err(invalid("diagnostics.r_grid", "must not be empty"));
            }
            let sigmas = self.sigma_values();
            if sigmas.is_empty() {
                return Err(invalid("diagnostics.sigma_grid", "must not be empty"));
            }
            if let Some(s) = sigmas.iter().find(|s| s.abs() > limit * (1.0 + 1e-12)) {
                return Err(invalid(
                    "diagnostics.sigma_grid",
                    format!("{s} lies outside [-{limit}, {limit}]"),
                ));
            }
            if (it.t_final / self.time_step()?).round() as usize / self.snapshot_stride() < 5 {
                return Err(invalid(
                    "integrator.stride",
                    "the audit needs at least five snapshots after the initial one",
                ));
            }
        }
        if let Some(nu) = d.nu {
            if !(nu > 0.0) {
                return Err(invalid("diagnostics.nu", "must be positive"));
            }
        }
        if d.k_max > 8 {
            return Err(invalid("diagnostics.k_max", "must be at most 8"));
        }
        if !(d.window > 0.0) {
            return Err(invalid("diagnostics.window", "must be positive"));
        }
        if !(d.transient >= 0.0 && d.transient < 1.0) {
            return Err(invalid("diagnostics.transient", "must lie in [0, 1)"));
        }
        let s = &self.spectrum;
        if !(s.edge_half_length > 0.0) {
            return Err(invalid("spectrum.edge_half_length", "must be positive"));
        }
        if s.edge && self.experiment == Experiment::Spectrum {
            Grid::new(s.edge_half_length, s.edge_points)
                .map_err(|e| invalid("spectrum.edge_points", e.to_string()))?;
        }
        if s.restarts == 0 {
            return Err(invalid("spectrum.restarts", "must be positive"));
        }
        if !(self.phase_window > 0.0) {
            return Err(invalid("phase.window_radius", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_comments_and_dotted_keys() {
        let cfg = ExperimentConfig::parse(
            "# speed sweep\nexperiment = spectrum\nphysics.c = 0.8 # fast\n\ndiagnostics.r_grid = 5, 10\ngrid.points = auto\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, Experiment::Spectrum);
        assert_eq!(cfg.speed, 0.8);
        assert_eq!(cfg.diagnostics.r_grid, vec![5.0, 10.0]);
        assert_eq!(cfg.grid.points, None);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(matches!(
            ExperimentConfig::parse("physics.speed = 0.5"),
            Err(ConfigError::UnknownKey(k)) if k == "physics.speed"
        ));
        assert!(matches!(
            ExperimentConfig::parse("physics.c = 0.5\nphysics.c = 0.6"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("physics.c"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        let err = ExperimentConfig::parse("integrator.dt = fast").unwrap_err();
        assert!(err.to_string().starts_with("integrator.dt:"), "{err}");
    }

    #[test]
    fn validation_reports_field_paths() {
        let cfg = ExperimentConfig {
            speed: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().starts_with("physics.c:"));
        let mut cfg = ExperimentConfig::default();
        cfg.perturbation.kind = PerturbationKind::Random;
        assert!(cfg.validate().unwrap_err().to_string().starts_with("perturbation.seed:"));
        cfg.perturbation.seed = Some(7);
        cfg.validate().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.grid.points = Some(256);
        assert!(cfg.validate().unwrap_err().to_string().starts_with("grid:"));
        let mut cfg = ExperimentConfig {
            experiment: Experiment::Monotonicity,
            ..Default::default()
        };
        cfg.integrator.t_final = 5.0;
        cfg.diagnostics.sigma_grid = Some(vec![0.5]);
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .starts_with("diagnostics.sigma_grid:"));
    }

    #[test]
    fn monotonicity_auto_grid_is_wide() {
        let cfg = ExperimentConfig {
            experiment: Experiment::Monotonicity,
            ..Default::default()
        };
        let g = cfg.build_grid().unwrap();
        assert_eq!(g.half_length(), 80.0);
        assert_eq!(g.len(), 2048);
        assert_eq!(cfg.snapshot_stride(), 10);
    }

    #[test]
    fn auto_step_shrinks_on_fine_grids() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.time_step().unwrap(), 1e-3);
        cfg.speed = 0.4;
        let g = cfg.build_grid().unwrap();
        let dt = cfg.time_step().unwrap();
        let k = std::f64::consts::PI / g.spacing();
        assert!(dt < 1e-3 && dt * k * k <= 2.0 && 2.0 * dt * k * k > 2.0);
        cfg.integrator.dt = Some(1e-3);
        assert_eq!(cfg.time_step().unwrap(), 1e-3);
    }

    #[test]
    fn deep_solitons_need_a_lower_guard() {
        let mut cfg = ExperimentConfig {
            speed: 0.3,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.starts_with("integrator.v_guard:"), "{err}");
        cfg.integrator.v_guard = 0.01;
        cfg.validate().unwrap();
        cfg.experiment = Experiment::Spectrum;
        cfg.integrator.v_guard = 0.05;
        cfg.validate().unwrap();
    }

    #[test]
    fn hash_ignores_output_dir_and_tracks_values() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.speed = 0.61;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    proptest! {
        #[test]
        fn canonical_form_round_trips(
            c in -0.99f64..0.99,
            amp in 0.0f64..0.1,
            seed in prop::option::of(any::<u64>()),
            r in prop::collection::vec(-20.0f64..20.0, 1..4),
            kind in prop_oneof![Just("none"), Just("bump"), Just("random")],
            scheme in prop_oneof![Just("spin"), Just("hydro"), Just("psi")],
        ) {
            let mut cfg = ExperimentConfig {
                speed: c,
                ..Default::default()
            };
            cfg.perturbation.amplitude = amp;
            cfg.perturbation.seed = seed;
            cfg.perturbation.kind = kind.parse().unwrap();
            cfg.integrator.scheme = scheme.parse().unwrap();
            cfg.diagnostics.r_grid = r;
            let back = ExperimentConfig::parse(&cfg.canonical()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
