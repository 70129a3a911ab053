//! Run configuration, read from JSON.
//!
//! Every field has a default, so `{}` is a valid config: an Ising chain of
//! nine spins with `ω = 1`, `h_x = J = 1`, `g = 0.2`, `θ = 3π/7`, `φ = 0`,
//! twenty periods and a hundred realizations.

use std::f64::consts::PI;
use std::path::Path;

use chaos_probe_core::operators::{
    EnvironmentModel, HeisenbergConfig, IsingConfig, LongRangeConfig, ProbeConfig, SpinRegister,
    XxzConfig,
};
use chaos_probe_core::spectral::SectorKind;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::stats::linspace;

/// Environment variable overriding the memory ceiling, in MiB.
pub const MEMORY_LIMIT_ENV: &str = "CHAOS_PROBE_MEMORY_LIMIT_MB";

/// Default memory ceiling, in MiB.
pub const DEFAULT_MEMORY_LIMIT_MB: u64 = 4096;

/// Largest chain the register type accepts here; the memory guard is the
/// binding limit.
const REGISTER_LIMIT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Trace,
    PhaseSweep,
    EtaSweep,
    Nonmarkov,
    Convergence,
    Le,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Ising {
        #[serde(default = "one")]
        hx: f64,
        #[serde(default)]
        hz: f64,
        #[serde(default = "one")]
        j: f64,
    },
    /// Fields drawn uniformly from `[-h, h]` for every realization.
    Heisenberg {
        #[serde(default = "half")]
        h: f64,
    },
    Xxz {
        #[serde(default = "half")]
        mu: f64,
        #[serde(default)]
        lambda: f64,
    },
    Longrange {
        #[serde(default = "one")]
        j0: f64,
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_bz0")]
        bz0: f64,
        #[serde(default)]
        ge: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_gamma() -> f64 {
    1.3
}
fn default_bz0() -> f64 {
    5.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::Ising {
            hx: 1.0,
            hz: 0.0,
            j: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Ising { .. } => "ising",
            ModelConfig::Heisenberg { .. } => "heisenberg",
            ModelConfig::Xxz { .. } => "xxz",
            ModelConfig::Longrange { .. } => "longrange",
        }
    }

    pub fn parameters(&self) -> &'static [&'static str] {
        match self {
            ModelConfig::Ising { .. } => &["hx", "hz", "j"],
            ModelConfig::Heisenberg { .. } => &["h"],
            ModelConfig::Xxz { .. } => &["mu", "lambda"],
            ModelConfig::Longrange { .. } => &["j0", "gamma", "bz0", "ge"],
        }
    }

    /// Probe coupling used when the config leaves `g` unset.
    pub fn default_coupling(&self) -> f64 {
        match self {
            ModelConfig::Heisenberg { .. } => 0.005,
            ModelConfig::Xxz { .. } => 0.1,
            _ => 0.2,
        }
    }

    pub fn is_disordered(&self) -> bool {
        matches!(self, ModelConfig::Heisenberg { .. })
    }

    /// Copy with one parameter replaced.
    pub fn with(&self, parameter: &str, value: f64) -> Result<Self> {
        let mut m = self.clone();
        let slot = match (&mut m, parameter) {
            (ModelConfig::Ising { hx, .. }, "hx") => hx,
            (ModelConfig::Ising { hz, .. }, "hz") => hz,
            (ModelConfig::Ising { j, .. }, "j") => j,
            (ModelConfig::Heisenberg { h }, "h") => h,
            (ModelConfig::Xxz { mu, .. }, "mu") => mu,
            (ModelConfig::Xxz { lambda, .. }, "lambda") => lambda,
            (ModelConfig::Longrange { j0, .. }, "j0") => j0,
            (ModelConfig::Longrange { gamma, .. }, "gamma") => gamma,
            (ModelConfig::Longrange { bz0, .. }, "bz0") => bz0,
            (ModelConfig::Longrange { ge, .. }, "ge") => ge,
            _ => {
                return Err(CliError::config(
                    "sweep.parameter",
                    format!(
                        "`{parameter}` is not a parameter of the {} model",
                        self.name()
                    ),
                ))
            }
        };
        *slot = value;
        Ok(m)
    }

    /// Concrete Hamiltonian; disordered models draw their fields from `rng`.
    pub fn environment<R: Rng + ?Sized>(&self, len: usize, rng: &mut R) -> EnvironmentModel {
        match *self {
            ModelConfig::Ising { hx, hz, j } => EnvironmentModel::Ising(IsingConfig { hx, hz, j }),
            ModelConfig::Heisenberg { h } => {
                EnvironmentModel::Heisenberg(HeisenbergConfig::random(h, len, rng))
            }
            ModelConfig::Xxz { mu, lambda } => EnvironmentModel::Xxz(XxzConfig { mu, lambda }),
            ModelConfig::Longrange { j0, gamma, bz0, ge } => {
                EnvironmentModel::LongRange(LongRangeConfig { j0, gamma, bz0, ge })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSettings {
    #[serde(default = "one")]
    pub omega: f64,
    /// Falls back to the model's default coupling.
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

fn default_theta() -> f64 {
    3.0 * PI / 7.0
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            omega: 1.0,
            g: None,
            theta: default_theta(),
            phi: 0.0,
        }
    }
}

/// Sweep values, either listed or as an inclusive linear grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values {
        values: Vec<f64>,
    },
    Linear {
        start: f64,
        stop: f64,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    #[serde(flatten)]
    pub grid: Grid,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match &self.grid {
            Grid::Values { values } => values.clone(),
            Grid::Linear {
                start,
                stop,
                points,
            } => linspace(*start, *stop, *points),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorSpec {
    Full,
    ParityEven,
    ParityOdd,
    Magnetization(usize),
    MagnetizationEven(usize),
    MagnetizationOdd(usize),
}

impl SectorSpec {
    pub fn kind(self) -> Option<SectorKind> {
        match self {
            SectorSpec::Full => None,
            SectorSpec::ParityEven => Some(SectorKind::ParityEven),
            SectorSpec::ParityOdd => Some(SectorKind::ParityOdd),
            SectorSpec::Magnetization(n) => Some(SectorKind::Magnetization(n)),
            SectorSpec::MagnetizationEven(n) => {
                Some(SectorKind::MagnetizationParity { n, even: true })
            }
            SectorSpec::MagnetizationOdd(n) => {
                Some(SectorKind::MagnetizationParity { n, even: false })
            }
        }
    }
}

/// Level-statistics sub-run, joined with the dynamics on the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    #[serde(rename = "L")]
    pub len: usize,
    pub sector: SectorSpec,
    /// Disorder realizations averaged per sweep value.
    #[serde(default)]
    pub realizations: Option<usize>,
    /// Keep the sector even if the Hamiltonian leaks out of it; the block
    /// is then a projection.
    #[serde(default)]
    pub allow_leakage: bool,
}

/// Where the decoherence factor of a sweep point comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseSource {
    /// One trace per random product state.
    #[default]
    Realizations,
    /// The maximally mixed environment, once per disorder draw.
    Effective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizeOrientation {
    Inverted,
    #[default]
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_experiment")]
    pub experiment: Experiment,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub probe: ProbeSettings,
    #[serde(rename = "L", default = "default_len")]
    pub len: usize,
    #[serde(default = "default_periods")]
    pub periods: usize,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub spectral: Option<SpectralConfig>,
    #[serde(default)]
    pub phase_source: PhaseSource,
    /// Draw `θ, φ` of the probe afresh for every realization.
    #[serde(default)]
    pub randomize_probe: bool,
    #[serde(default)]
    pub orientation: NormalizeOrientation,
    /// Upper end of the time window used by `convergence`.
    #[serde(default)]
    pub t_max: Option<f64>,
}

fn default_experiment() -> Experiment {
    Experiment::PhaseSweep
}
fn default_len() -> usize {
    9
}
fn default_periods() -> usize {
    20
}
fn default_steps() -> usize {
    chaos_probe_core::dephasing::DEFAULT_STEPS_PER_PERIOD
}
fn default_realizations() -> usize {
    100
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

/// A manifest written by a previous run also works as a config.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Manifest { config: RunConfig },
    Plain(RunConfig),
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = match serde_json::from_str::<ConfigFile>(text) {
            Ok(ConfigFile::Manifest { config }) | Ok(ConfigFile::Plain(config)) => config,
            // reparse as a plain config for a precise message
            Err(_) => serde_json::from_str::<RunConfig>(text)?,
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn coupling(&self) -> f64 {
        self.probe
            .g
            .unwrap_or_else(|| self.model.default_coupling())
    }

    pub fn probe(&self) -> Result<ProbeConfig> {
        ProbeConfig::new(
            self.probe.omega,
            self.coupling(),
            self.probe.theta,
            self.probe.phi,
        )
        .map_err(|e| CliError::config("probe", e.to_string()))
    }

    pub fn register(&self) -> Result<SpinRegister> {
        SpinRegister::with_limit(self.len, REGISTER_LIMIT)
            .map_err(|e| CliError::config("L", e.to_string()))
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        self.sweep.as_ref().map(Sweep::values).unwrap_or_default()
    }

    /// Model at every sweep value; the base model alone without a sweep.
    pub fn sweep_models(&self) -> Result<Vec<(Option<f64>, ModelConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.model.clone())]),
            Some(s) => s
                .values()
                .into_iter()
                .map(|v| Ok((Some(v), self.model.with(&s.parameter, v)?)))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.len == 0 {
            return Err(CliError::config("L", "must be at least 1"));
        }
        if self.periods == 0 {
            return Err(CliError::config("periods", "must be at least 1"));
        }
        if self.steps_per_period < 2 {
            return Err(CliError::config("steps_per_period", "must be at least 2"));
        }
        if self.realizations == 0 {
            return Err(CliError::config("realizations", "must be at least 1"));
        }
        self.probe()?;
        self.register()?;
        if let Some(s) = &self.sweep {
            if s.values().is_empty() {
                return Err(CliError::config("sweep", "grid is empty"));
            }
            if s.values().iter().any(|v| !v.is_finite()) {
                return Err(CliError::config("sweep", "values must be finite"));
            }
            self.model.with(&s.parameter, 0.0)?;
        }
        for (_, model) in self.sweep_models()? {
            if let ModelConfig::Heisenberg { h } = model {
                if !(h >= 0.0) {
                    return Err(CliError::config("model.h", "must be non-negative"));
                }
            }
            if let ModelConfig::Longrange { gamma, .. } = model {
                if !(gamma > 0.0) {
                    return Err(CliError::config("model.gamma", "must be positive"));
                }
            }
        }
        match self.experiment {
            Experiment::Trace | Experiment::Le if self.sweep.is_some() => {
                return Err(CliError::config("sweep", "not used by this experiment"));
            }
            Experiment::PhaseSweep | Experiment::EtaSweep | Experiment::Nonmarkov
                if self.sweep.is_none() =>
            {
                return Err(CliError::config("sweep", "required by this experiment"));
            }
            Experiment::EtaSweep if self.spectral.is_none() => {
                return Err(CliError::config("spectral", "required by eta-sweep"));
            }
            Experiment::Convergence | Experiment::Le if self.model.is_disordered() => {
                return Err(CliError::config(
                    "model",
                    "this experiment needs a fixed Hamiltonian",
                ));
            }
            _ => {}
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(CliError::config("t_max", "must be positive"));
            }
        }
        if let Some(sp) = &self.spectral {
            if sp.len < 3 {
                return Err(CliError::config("spectral.L", "must be at least 3"));
            }
            if let SectorSpec::Magnetization(n)
            | SectorSpec::MagnetizationEven(n)
            | SectorSpec::MagnetizationOdd(n) = sp.sector
            {
                if n > sp.len {
                    return Err(CliError::config(
                        "spectral.sector",
                        "more excitations than spins",
                    ));
                }
            }
            match sp.realizations {
                Some(0) => {
                    return Err(CliError::config(
                        "spectral.realizations",
                        "must be at least 1",
                    ))
                }
                None if self.model.is_disordered() => {
                    return Err(CliError::config(
                        "spectral.realizations",
                        "required for disordered models",
                    ))
                }
                _ => {}
            }
        }
        self.check_memory(memory_limit_bytes()?)
    }

    fn time_samples(&self) -> u64 {
        (self.periods * self.steps_per_period + 1) as u64
    }

    /// Rough peak memory of the run in bytes.
    pub fn memory_estimate(&self, workers: usize) -> u64 {
        let dim = 1u64 << self.len.min(40);
        // Hamiltonians, eigenvectors and overlaps, complex doubles
        let dense = 8 * dim * dim * 16;
        let tables = 2 * dim * self.time_samples() * 16;
        let per_worker = 2 * dim * self.time_samples() * 16 / 8 + dim * dim * 16;
        let dynamics = dense + tables + workers.max(1) as u64 * per_worker;
        let spectral = self.spectral.as_ref().map_or(0, |sp| {
            let d = sector_dim(sp.len, sp.sector);
            4 * d * d * 16 * workers.max(1) as u64
        });
        dynamics.max(spectral)
    }

    pub fn check_memory(&self, limit: u64) -> Result<()> {
        let need = self.memory_estimate(1);
        if need > limit {
            return Err(CliError::config(
                "L",
                format!(
                    "needs about {} MiB, above the {} MiB ceiling (set {MEMORY_LIMIT_ENV} to raise it)",
                    need >> 20,
                    limit >> 20
                ),
            ));
        }
        Ok(())
    }
}

fn sector_dim(len: usize, sector: SectorSpec) -> u64 {
    let full = 1u64 << len.min(40);
    match sector {
        SectorSpec::Full => full,
        SectorSpec::ParityEven | SectorSpec::ParityOdd => full / 2 + 1,
        SectorSpec::Magnetization(n) => binomial(len, n),
        SectorSpec::MagnetizationEven(n) | SectorSpec::MagnetizationOdd(n) => {
            binomial(len, n) / 2 + 1
        }
    }
}

fn binomial(len: usize, n: usize) -> u64 {
    if n > len {
        return 0;
    }
    (0..n).fold(1u64, |c, k| c * (len - k) as u64 / (k as u64 + 1))
}

/// Memory ceiling from the environment, or the default.
pub fn memory_limit_bytes() -> Result<u64> {
    match std::env::var(MEMORY_LIMIT_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map(|mb| mb << 20)
            .map_err(|_| CliError::config(MEMORY_LIMIT_ENV, "must be a whole number of MiB")),
        Err(_) => Ok(DEFAULT_MEMORY_LIMIT_MB << 20),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg.experiment, Experiment::PhaseSweep);
        assert_eq!(
            cfg.model,
            ModelConfig::Ising {
                hx: 1.0,
                hz: 0.0,
                j: 1.0
            }
        );
        assert_eq!(
            (cfg.len, cfg.periods, cfg.steps_per_period, cfg.realizations),
            (9, 20, 200, 100)
        );
        assert_eq!(cfg.coupling(), 0.2);
        assert_eq!(cfg.probe.theta, 3.0 * PI / 7.0);
    }

    #[test]
    fn model_default_couplings() {
        let cfg = RunConfig::from_json(r#"{"model": {"kind": "heisenberg"}}"#).unwrap();
        assert_eq!(cfg.coupling(), 0.005);
        let cfg = RunConfig::from_json(r#"{"model": {"kind": "xxz", "mu": 0.5}}"#).unwrap();
        assert_eq!(cfg.coupling(), 0.1);
        let cfg = RunConfig::from_json(r#"{"model": {"kind": "longrange"}, "probe": {"g": 0.3}}"#)
            .unwrap();
        assert_eq!(cfg.coupling(), 0.3);
    }

    #[test]
    fn sweep_parameter_must_belong_to_model() {
        let cfg =
            RunConfig::from_json(r#"{"sweep": {"parameter": "lambda", "values": [0.1]}}"#).unwrap();
        match cfg.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "sweep.parameter"),
            other => panic!("{other:?}"),
        }
        let cfg = RunConfig::from_json(
            r#"{"sweep": {"parameter": "hz", "start": 0, "stop": 1, "points": 3}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.sweep_values(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"lenght": 3}"#).is_err());
    }

    #[test]
    fn disordered_spectral_runs_need_realizations() {
        let text = r#"{"experiment": "eta-sweep", "model": {"kind": "heisenberg"},
            "sweep": {"parameter": "h", "values": [0.5]},
            "spectral": {"L": 8, "sector": {"magnetization": 4}}}"#;
        let err = RunConfig::from_json(text).unwrap().validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn memory_guard() {
        let cfg =
            RunConfig::from_json(r#"{"L": 16, "sweep": {"parameter": "hz", "values": [0.5]}}"#)
                .unwrap();
        assert!(cfg.check_memory(DEFAULT_MEMORY_LIMIT_MB << 20).is_err());
        assert!(cfg.check_memory(u64::MAX).is_ok());
        let small =
            RunConfig::from_json(r#"{"L": 6, "sweep": {"parameter": "hz", "values": [0.5]}}"#)
                .unwrap();
        assert!(small.check_memory(DEFAULT_MEMORY_LIMIT_MB << 20).is_ok());
    }

    #[test]
    fn sector_dimensions() {
        assert_eq!(sector_dim(12, SectorSpec::Magnetization(6)), 924);
        assert_eq!(sector_dim(15, SectorSpec::Magnetization(5)), 3003);
        assert_eq!(sector_dim(13, SectorSpec::MagnetizationOdd(5)), 644);
    }

    #[test]
    fn manifest_round_trip() {
        let cfg = RunConfig::from_json(r#"{"L": 5, "seed": 9}"#).unwrap();
        let manifest = serde_json::json!({ "config": cfg, "version": "0.1.0" }).to_string();
        assert_eq!(RunConfig::from_json(&manifest).unwrap(), cfg);
    }
}
