use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wong_core::equilibria::SolverOptions;
use wong_core::dynamics::Method;
use wong_core::system::{AffineConnection, InvariantPotential};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Geometry,
    Integrate,
    Equilibria,
    LatticeGeometry,
    LatticeIntegrate,
    LatticeEquilibria,
    Report,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Geometry => "geometry",
            Self::Integrate => "integrate",
            Self::Equilibria => "equilibria",
            Self::LatticeGeometry => "lattice-geometry",
            Self::LatticeIntegrate => "lattice-integrate",
            Self::LatticeEquilibria => "lattice-equilibria",
            Self::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub subcommand: Option<Subcommand>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub system: Option<SystemConfig>,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    TwoVector {
        #[serde(default)]
        potential: InvariantPotential,
    },
    KaluzaKlein {
        connection: AffineConnection,
        #[serde(default)]
        base_metric: Option<Vec<Vec<f64>>>,
        #[serde(default = "one")]
        fiber_scale: f64,
        #[serde(default)]
        base_potential: Option<Vec<Vec<f64>>>,
    },
}

fn one() -> f64 {
    1.0
}

/// Initial shape, velocity and momentum. Missing entries default to the
/// system's reference point and zero velocity and momentum; `random` draws
/// the shape from the seed instead.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub q: Option<Vec<f64>>,
    #[serde(default)]
    pub q_dot: Option<Vec<f64>>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub random: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub t_end: f64,
    pub dt: f64,
    pub method: Method,
    /// Write every `stride`-th sample.
    pub stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 1e-3,
            method: Method::Rk4,
            stride: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumConfig {
    pub eigen_index: usize,
    pub scale_guess: f64,
    pub q_guess: Option<Vec<f64>>,
    /// Extra random starts drawn from the seed, solved in parallel.
    pub random_starts: usize,
    pub solver: SolverOptions,
    pub verify: bool,
    pub verify_t_end: f64,
    pub verify_dt: f64,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            eigen_index: 0,
            scale_guess: 1.0,
            q_guess: None,
            random_starts: 0,
            solver: SolverOptions::default(),
            verify: true,
            verify_t_end: 1.0,
            verify_dt: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldInit {
    Zero,
    Random { amplitude: f64 },
    /// JSON array with the flattened field.
    File { path: PathBuf },
}

impl Default for FieldInit {
    fn default() -> Self {
        Self::Zero
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub side: usize,
    pub spacing: f64,
    pub field: FieldInit,
    /// Amplitude of the random initial field velocity (projected transverse).
    pub velocity_amplitude: f64,
    /// Amplitude of the random initial momentum.
    pub momentum_amplitude: f64,
    /// Compare against the generic pipeline; defaults to on for side 2.
    pub cross_check: Option<bool>,
    pub t_end: f64,
    pub dt: f64,
    pub stride: usize,
    pub eigen_index: usize,
    pub scale_guess: f64,
    pub solver: SolverOptions,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            side: 2,
            spacing: 1.0,
            field: FieldInit::Zero,
            velocity_amplitude: 0.0,
            momentum_amplitude: 0.0,
            cross_check: None,
            t_end: 0.1,
            dt: 0.01,
            stride: 1,
            eigen_index: 0,
            scale_guess: 0.0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub identity: f64,
    pub killing: f64,
    pub energy_drift: f64,
    pub constraint: f64,
    pub vertical: f64,
    pub horizontal: f64,
    pub frozen_shape: f64,
    pub momentum_drift: f64,
    pub coulomb: f64,
    pub cross_check: f64,
    pub lattice_vertical: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-9,
            killing: 1e-7,
            energy_drift: 1e-7,
            constraint: 1e-9,
            vertical: 1e-10,
            horizontal: 1e-7,
            frozen_shape: 1e-6,
            momentum_drift: 1e-8,
            coulomb: 1e-12,
            cross_check: 1e-8,
            lattice_vertical: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn get(&self, class: &str) -> Option<f64> {
        Some(match class {
            "identity" => self.identity,
            "killing" => self.killing,
            "energy_drift" => self.energy_drift,
            "constraint" => self.constraint,
            "vertical" => self.vertical,
            "horizontal" => self.horizontal,
            "frozen_shape" => self.frozen_shape,
            "momentum_drift" => self.momentum_drift,
            "coulomb" => self.coulomb,
            "cross_check" => self.cross_check,
            "lattice_vertical" => self.lattice_vertical,
            _ => return None,
        })
    }
}

impl RunConfig {
    /// Read a TOML config, or a JSON run manifest whose embedded config is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: crate::output::RunManifest = serde_json::from_str(&text).map_err(|e| CliError::ConfigInvalid {
                path: path.to_owned(),
                key: e.to_string(),
            })?;
            return Ok(manifest.config);
        }
        toml::from_str(&text).map_err(|e| CliError::ConfigInvalid {
            path: path.to_owned(),
            key: e.to_string(),
        })
    }

    pub fn system_or_err(&self, path: &Path) -> Result<&SystemConfig, CliError> {
        self.system.as_ref().ok_or_else(|| CliError::ConfigInvalid {
            path: path.to_owned(),
            key: "missing key `system`".into(),
        })
    }

    pub fn lattice_or_err(&self, path: &Path) -> Result<&LatticeConfig, CliError> {
        self.lattice.as_ref().ok_or_else(|| CliError::ConfigInvalid {
            path: path.to_owned(),
            key: "missing key `lattice`".into(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
