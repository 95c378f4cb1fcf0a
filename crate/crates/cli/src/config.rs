//! TOML scenario files.
//!
//! ```toml
//! [atom]
//! energies = [0.0, 1.0, 3.0]
//! kappa21 = 1.0
//! kappa31 = 1.0
//! kappa32 = 1.0
//!
//! [spectra]
//! lr_scale = 1.0                 # optional multiplier on the ↔ rates
//!
//! [spectra.lr]
//! kind = "per-frequency"         # or "gibbs" (needs beta) or "tabulated"
//! points = [[1.0, 1.0], [2.0, 2.0], [3.0, 2.5]]
//!
//! [spectra.ud]
//! kind = "gibbs"
//! beta = 1.0
//!
//! [initial]
//! populations = [1.0, 0.0, 0.0]  # optional, ground state by default
//!
//! [integration]
//! t_end = 50.0
//! dt = 1e-3                      # optional
//! tol = 1e-8                     # stationarity threshold on |dP/dt|
//! sample_every = 1
//!
//! [output]
//! trajectory = "trajectory.csv"
//! stationary = "stationary.txt"
//! sweep = "sweep.csv"
//!
//! [[sweep.axis]]
//! parameter = "beta31"           # beta21/31/32, kappa21/31/32, lr_scale
//! start = 2.0
//! stop = 4.0
//! points = 101
//! spacing = "linear"             # or "log"; alternatively values = [...]
//! ```

use std::path::{Path, PathBuf};

use distorted_balance::prelude::*;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub atom: AtomSection,
    pub spectra: SpectraSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub output: OutputSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    pub energies: [f64; 3],
    pub kappa21: f64,
    pub kappa31: f64,
    pub kappa32: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectraSection {
    pub lr: SpectrumSection,
    pub ud: SpectrumSection,
    #[serde(default = "one")]
    pub lr_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum SpectrumSection {
    #[serde(rename = "gibbs")]
    Gibbs { beta: f64 },
    #[serde(rename = "per-frequency")]
    PerFrequency { points: Vec<[f64; 2]> },
    #[serde(rename = "tabulated")]
    Tabulated { points: Vec<[f64; 2]> },
}

impl SpectrumSection {
    fn build(&self) -> Result<OccupationSpectrum, SpectralError> {
        let pairs = |p: &[[f64; 2]]| p.iter().map(|&[w, b]| (w, b)).collect::<Vec<_>>();
        match self {
            SpectrumSection::Gibbs { beta } => OccupationSpectrum::gibbs(*beta),
            SpectrumSection::PerFrequency { points } => OccupationSpectrum::per_frequency(pairs(points)),
            SpectrumSection::Tabulated { points } => OccupationSpectrum::tabulated(pairs(points)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default = "ground")]
    pub populations: [f64; 3],
}

fn ground() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            populations: ground(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    pub dt: Option<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_stride")]
    pub sample_every: usize,
}

fn default_t_end() -> f64 {
    50.0
}

fn default_tol() -> f64 {
    1e-8
}

fn default_stride() -> usize {
    1
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: None,
            tol: default_tol(),
            sample_every: default_stride(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trajectory: Option<PathBuf>,
    pub stationary: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Vec<AxisSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSection {
    pub parameter: String,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

impl AxisSection {
    fn build(&self) -> Result<SweepAxis, ConfigError> {
        let parameter = SweepParameter::parse(&self.parameter)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown sweep parameter `{}`", self.parameter)))?;
        let axis = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => SweepAxis::new(parameter, v.clone())?,
            (None, Some(a), Some(b), Some(n)) => match self.spacing {
                Spacing::Linear => SweepAxis::linspace(parameter, a, b, n)?,
                Spacing::Log => SweepAxis::logspace(parameter, a, b, n)?,
            },
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "axis `{}` needs either `values` or all of `start`, `stop`, `points`",
                    self.parameter
                )))
            }
        };
        Ok(axis)
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Validates every section and assembles the scenario.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let a = &self.atom;
        let atom = ThreeLevelAtom::new(a.energies, Couplings::new(a.kappa21, a.kappa31, a.kappa32))
            .map_err(ScenarioError::from)?;
        let lr = self.spectra.lr.build().map_err(ScenarioError::from)?;
        let ud = self.spectra.ud.build().map_err(ScenarioError::from)?;
        let initial = AtomState::new(self.initial.populations).map_err(ScenarioError::from)?;
        let i = &self.integration;
        let controls = IntegrationControls {
            dt: i.dt,
            t_end: i.t_end,
            sample_every: i.sample_every,
        };
        let scenario = Scenario::new(atom, Spectra::new(lr, ud), initial, controls, i.tol)?
            .with_lr_scale(self.spectra.lr_scale)?;
        Ok(scenario)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ConfigError> {
        let section = self
            .sweep
            .as_ref()
            .ok_or_else(|| ConfigError::Invalid("no [[sweep.axis]] section in config".into()))?;
        let axes = section
            .axis
            .iter()
            .map(AxisSection::build)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SweepSpec::new(self.scenario()?, axes)?)
    }
}
