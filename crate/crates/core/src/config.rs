//! JSON run configuration with sections `model`, `discretization`, `study`
//! and `output`. Every field has a default, so `{}` is a valid file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::StudyConfig;
use crate::linear_errors::Modes;
use crate::noise::{NoiseTape, DEFAULT_M_MASTER, DEFAULT_N_MASTER};
use crate::nonlinearity::CubicCoefficients;
use crate::scheme::{max_chi, DiscretizationParams, InitialValue, ModelParams, DEFAULT_GAMMA};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(rename = "T", default = "one")]
    pub horizon: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default = "allen_cahn")]
    pub a: [f64; 4],
    #[serde(default)]
    pub xi: XiSpec,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            nu: 1.0,
            a: allen_cahn(),
            xi: XiSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum XiSpec {
    Preset(String),
    Coefficients { coeffs: Vec<f64> },
}

impl Default for XiSpec {
    fn default() -> Self {
        XiSpec::Preset("bump".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    #[serde(rename = "M", default = "default_resolution")]
    pub m: usize,
    #[serde(rename = "N", default = "default_resolution")]
    pub n: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Defaults to the largest admissible value for `gamma`.
    #[serde(default)]
    pub chi: Option<f64>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            m: default_resolution(),
            n: default_resolution(),
            gamma: DEFAULT_GAMMA,
            chi: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModesSpec {
    Count(usize),
    Named(AllModes),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllModes {
    All,
}

impl From<ModesSpec> for Modes {
    fn from(m: ModesSpec) -> Self {
        match m {
            ModesSpec::Count(n) => Modes::Finite(n),
            ModesSpec::Named(AllModes::All) => Modes::All,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapeSection {
    #[serde(default = "default_m_master")]
    pub m_master: usize,
    #[serde(default = "default_n_master")]
    pub n_master: usize,
}

impl Default for TapeSection {
    fn default() -> Self {
        Self {
            m_master: DEFAULT_M_MASTER,
            n_master: DEFAULT_N_MASTER,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    #[serde(default = "default_grid")]
    pub m_grid: Vec<usize>,
    #[serde(default = "default_modes_grid")]
    pub n_grid: Vec<ModesSpec>,
    #[serde(default = "default_m_ref")]
    pub m_ref: usize,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    #[serde(default)]
    pub temporal_n: Option<usize>,
    #[serde(default)]
    pub spatial_m: Option<usize>,
    #[serde(default = "default_paths")]
    pub paths: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub exact_linear: bool,
    /// Path simulated by `simulate`.
    #[serde(default)]
    pub path_index: u64,
    #[serde(default)]
    pub tape: TapeSection,
    /// Randomized trials per audit in `check`.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            m_grid: default_grid(),
            n_grid: default_modes_grid(),
            m_ref: default_m_ref(),
            n_ref: default_n_ref(),
            temporal_n: None,
            spatial_m: None,
            paths: default_paths(),
            seed: 0,
            exact_linear: false,
            path_index: 0,
            tape: TapeSection::default(),
            trials: default_trials(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn allen_cahn() -> [f64; 4] {
    [0.0, 1.0, 0.0, -1.0]
}
fn default_resolution() -> usize {
    64
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_grid() -> Vec<usize> {
    (0..7).map(|i| 1 << i).collect()
}
fn default_modes_grid() -> Vec<ModesSpec> {
    default_grid().into_iter().map(ModesSpec::Count).collect()
}
fn default_m_ref() -> usize {
    2048
}
fn default_n_ref() -> usize {
    128
}
fn default_paths() -> u64 {
    100
}
fn default_m_master() -> usize {
    DEFAULT_M_MASTER
}
fn default_n_master() -> usize {
    DEFAULT_N_MASTER
}
fn default_trials() -> usize {
    1000
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl Config {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn model(&self) -> Result<ModelParams> {
        let m = &self.model;
        let a = CubicCoefficients::from_array(m.a).map_err(config_err)?;
        let xi = match &m.xi {
            XiSpec::Preset(name) => match name.as_str() {
                "zero" => InitialValue::Zero,
                "first_mode" => InitialValue::FirstMode,
                "bump" => InitialValue::Bump,
                other => return Err(Error::Config(format!("unknown xi preset {other:?}"))),
            },
            XiSpec::Coefficients { coeffs } => InitialValue::Coefficients(coeffs.clone()),
        };
        ModelParams::new(m.horizon, m.nu, a, xi).map_err(config_err)
    }

    pub fn gamma_chi(&self) -> (f64, f64) {
        let gamma = self.discretization.gamma;
        (
            gamma,
            self.discretization.chi.unwrap_or_else(|| max_chi(gamma)),
        )
    }

    pub fn discretization(&self) -> Result<DiscretizationParams> {
        let (gamma, chi) = self.gamma_chi();
        DiscretizationParams::new(self.discretization.m, self.discretization.n, gamma, chi)
            .map_err(config_err)
    }

    /// Tape for `simulate`, checked against the configured resolution.
    pub fn tape(&self) -> Result<NoiseTape> {
        let t = &self.study.tape;
        let d = self.discretization()?;
        if t.m_master == 0 || !t.m_master.is_multiple_of(d.m) {
            return Err(Error::Config(format!(
                "M = {} does not divide m_master = {}",
                d.m, t.m_master
            )));
        }
        if d.n > t.n_master {
            return Err(Error::Config(format!(
                "N = {} exceeds n_master = {}",
                d.n, t.n_master
            )));
        }
        NoiseTape::new(self.study.seed, t.m_master, t.n_master, self.model.horizon)
            .map_err(config_err)
    }

    pub fn heat_grid(&self) -> Result<(Vec<usize>, Vec<Modes>)> {
        let m = &self.study.m_grid;
        let n: Vec<Modes> = self.study.n_grid.iter().map(|&x| x.into()).collect();
        if m.is_empty() || n.is_empty() {
            return Err(Error::Config("m_grid and n_grid must be non-empty".into()));
        }
        if m.contains(&0) || n.contains(&Modes::Finite(0)) {
            return Err(Error::Config("grid entries must be positive".into()));
        }
        Ok((m.clone(), n))
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let (gamma, chi) = self.gamma_chi();
        let n_grid = self
            .study
            .n_grid
            .iter()
            .map(|&x| match Modes::from(x) {
                Modes::Finite(n) => Ok(n),
                Modes::All => Err(Error::Config("converge needs finite N values".into())),
            })
            .collect::<Result<_>>()?;
        let cfg = StudyConfig {
            model: self.model()?,
            gamma,
            chi,
            m_grid: self.study.m_grid.clone(),
            n_grid,
            m_ref: self.study.m_ref,
            n_ref: self.study.n_ref,
            temporal_n: self.study.temporal_n,
            spatial_m: self.study.spatial_m,
            paths: self.study.paths,
            seed: self.study.seed,
            exact_linear: self.study.exact_linear,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}
