//! Run configuration: one JSON document per invocation.
//!
//! Every parameter has a fixed default so that a config written today
//! reproduces the same artifact later. Defaults use scaled units (ħ = 1,
//! γ = 1, n̄ = 0).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use symplectic_lindblad::analysis::SWEEP_D_SECOND;
use symplectic_lindblad::model::SystemDescriptor;
use symplectic_lindblad::states::StateDescriptor;
use symplectic_lindblad::{ChordState, GridSpec, OpenSystem, Vec2};

use crate::failure::Failure;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub state: Option<StateDescriptor>,
    /// Evolution time.
    #[serde(default)]
    pub t: Option<f64>,
    /// Sample times for curves; defaults to 0, 0.25, …, 5.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridConfig,
    /// Time step (Langevin and Fokker–Planck).
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    /// Number of Langevin paths.
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Record stride for Langevin summaries; 0 keeps only the final time.
    #[serde(default)]
    pub record_every: usize,
    #[serde(default = "defaults::horizon")]
    pub horizon: f64,
    #[serde(default = "defaults::floor")]
    pub floor: f64,
    /// Uniform-field sweep parameters.
    #[serde(default = "defaults::d_prime")]
    pub d_prime: f64,
    #[serde(default = "defaults::d_seconds")]
    pub d_seconds: Vec<f64>,
    /// Times at which `det M(−t)` is tabulated alongside a positivity run.
    #[serde(default)]
    pub det_curve: Option<Vec<f64>>,
    /// `wigner` or `chord` for `evolve`.
    #[serde(default)]
    pub output: EvolveOutput,
    /// Fock truncation for `oracle-compare`; 0 picks one from the state.
    #[serde(default)]
    pub fock_dim: usize,
    /// Also report the self-convergence order of the Fokker–Planck run.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

mod defaults {
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn n() -> usize {
        10_000
    }
    pub fn horizon() -> f64 {
        100.0
    }
    pub fn floor() -> f64 {
        1e-8
    }
    pub fn d_prime() -> f64 {
        2.0
    }
    pub fn d_seconds() -> Vec<f64> {
        super::SWEEP_D_SECOND.to_vec()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EvolveOutput {
    #[default]
    Wigner,
    Chord,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default = "grid_half_width")]
    pub half_width: f64,
    #[serde(default = "grid_n")]
    pub n: usize,
}

fn grid_half_width() -> f64 {
    8.0
}

fn grid_n() -> usize {
    128
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            half_width: grid_half_width(),
            n: grid_n(),
        }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, Failure> {
        Ok(GridSpec::centered(Vec2::from(self.center), self.half_width, self.n)?)
    }
}

/// Either a named preset or an explicit quadratic system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub enum SystemConfig {
    Preset(Preset),
    Explicit(SystemDescriptor),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    PhotonBath {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default)]
        nbar: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
    /// `p²/2 + q`; `epsilon` is the sign carried by `l″`.
    UniformField {
        #[serde(default = "defaults::d_prime")]
        d_prime: f64,
        d_second: f64,
        #[serde(default = "one")]
        epsilon: f64,
        #[serde(default = "one")]
        hbar: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl TryFrom<Value> for SystemConfig {
    type Error = serde_json::Error;

    fn try_from(v: Value) -> Result<Self, Self::Error> {
        if v.get("preset").is_some() {
            serde_json::from_value(v).map(SystemConfig::Preset)
        } else {
            serde_json::from_value(v).map(SystemConfig::Explicit)
        }
    }
}

impl From<SystemConfig> for Value {
    fn from(s: SystemConfig) -> Value {
        let v = match s {
            SystemConfig::Preset(p) => serde_json::to_value(p),
            SystemConfig::Explicit(d) => serde_json::to_value(d),
        };
        v.unwrap_or(Value::Null)
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<OpenSystem, Failure> {
        let sys = match *self {
            SystemConfig::Preset(Preset::PhotonBath {
                omega,
                gamma,
                nbar,
                hbar,
            }) => OpenSystem::photon_bath(omega, gamma, nbar, hbar)?,
            SystemConfig::Preset(Preset::UniformField {
                d_prime,
                d_second,
                epsilon,
                hbar,
            }) => OpenSystem::uniform_field(d_prime, d_second, epsilon, hbar)?,
            SystemConfig::Explicit(ref d) => OpenSystem::from_descriptor(d)?,
        };
        Ok(sys)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |msg: &str| Err(Failure::Config(msg.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive");
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return bad("floor must lie in (0, 1)");
        }
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                return bad("t must be finite and nonnegative");
            }
        }
        if let Some(times) = &self.times {
            if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return bad("times must be finite and nonnegative");
            }
        }
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if let Some(sys) = &self.system {
            sys.build()?;
        }
        if self.state.is_some() {
            self.state()?;
        }
        self.grid.spec()?;
        Ok(())
    }

    pub fn system(&self) -> Result<OpenSystem, Failure> {
        self.system
            .as_ref()
            .ok_or_else(|| Failure::Config("config needs a \"system\"".into()))?
            .build()
    }

    pub fn hbar(&self) -> Result<f64, Failure> {
        Ok(self.system()?.hbar)
    }

    pub fn state(&self) -> Result<ChordState, Failure> {
        let d = self
            .state
            .as_ref()
            .ok_or_else(|| Failure::Config("config needs a \"state\"".into()))?;
        Ok(d.build(self.hbar().unwrap_or(1.0))?)
    }

    pub fn time(&self) -> Result<f64, Failure> {
        self.t.ok_or_else(|| Failure::Config("config needs \"t\"".into()))
    }

    pub fn times(&self) -> Vec<f64> {
        self.times
            .clone()
            .unwrap_or_else(|| (0..=20).map(|k| 0.25 * k as f64).collect())
    }
}
