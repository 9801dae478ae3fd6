use std::path::Path;

use coag_core::error::CoagError;
use coag_core::kernels::KerExponents;
use coag_core::solver::{GridConfig, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Points of the density grid written by `exact`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityGridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nodes: usize,
}

impl Default for DensityGridConfig {
    fn default() -> Self {
        DensityGridConfig { x_min: 1e-6, x_max: 1e6, nodes: 241 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckConfig {
    /// Both coordinates of the fixed Laplace-identity table.
    pub points: Vec<f64>,
    /// Extra log-uniform `(x, y)` samples drawn from the run seed.
    pub random_points: usize,
    pub plemelj_points: usize,
    pub bounds_exponents: KerExponents,
    pub bounds_h: f64,
    /// Largest accepted Laplace-identity residual.
    pub max_residual: f64,
    pub max_plemelj_deviation: f64,
    /// Largest relative change of the weighted integral when `h` is halved.
    pub max_bounds_change: f64,
}

impl Default for KernelCheckConfig {
    fn default() -> Self {
        KernelCheckConfig {
            points: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            random_points: 8,
            plemelj_points: 50,
            bounds_exponents: KerExponents { a1: 0.2, b1: 0.5, a2: 0.2, b2: 0.5 },
            bounds_h: 0.1,
            max_residual: 1e-3,
            max_plemelj_deviation: 1e-12,
            max_bounds_change: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InverseCheckConfig {
    pub grid: GridConfig,
    pub mu: f64,
    pub chi: f64,
    /// Random admissible profiles added to the three fixed ones.
    pub random_profiles: usize,
    pub max_error: f64,
    pub max_boundary_error: f64,
}

impl Default for InverseCheckConfig {
    fn default() -> Self {
        InverseCheckConfig {
            grid: GridConfig { q_min: 1e-10, q_max: 1e16, nodes: 800 },
            mu: 0.15,
            chi: 0.3,
            random_profiles: 2,
            max_error: 1e-6,
            max_boundary_error: 1e-10,
        }
    }
}

/// Everything a run needs; one JSON file, see `config.schema.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub density_grid: DensityGridConfig,
    /// Moment orders as multiples of `rho`, each inside `(-1, 1)`.
    pub moment_fractions: Vec<f64>,
    pub kernel_check: KernelCheckConfig,
    pub inverse_check: InverseCheckConfig,
    /// `epsilon` values for `sweep`, largest first.
    pub ladder: Vec<f64>,
    /// Sample points for the kernel averages in `diagnose`.
    pub diagnose_x: Vec<f64>,
    pub seed: u64,
    /// Halve every verification threshold.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverConfig::default(),
            density_grid: DensityGridConfig::default(),
            moment_fractions: vec![-0.6, -0.3, 0.0, 0.3, 0.6],
            kernel_check: KernelCheckConfig::default(),
            inverse_check: InverseCheckConfig::default(),
            ladder: vec![0.05, 0.02, 0.01],
            diagnose_x: vec![1e-4, 1e-2, 1.0, 1e2],
            seed: 0,
            strict: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CoagError::Config(format!("{}: {e}", path.display())).into())
    }

    /// Threshold scale: 1, or 1/2 under `strict`.
    pub fn threshold_scale(&self) -> f64 {
        if self.strict {
            0.5
        } else {
            1.0
        }
    }

    pub fn moment_orders(&self) -> Result<Vec<f64>, CliError> {
        let rho = self.solver.rho;
        self.moment_fractions
            .iter()
            .map(|&t| {
                if t.abs() < 1.0 {
                    Ok(t * rho)
                } else {
                    Err(CoagError::Config(format!("moment fraction {t} outside (-1,1)")).into())
                }
            })
            .collect()
    }

    pub fn validate_common(&self) -> Result<(), CliError> {
        let d = &self.density_grid;
        if !(d.x_min > 0.0 && d.x_max > d.x_min && d.nodes >= 2) {
            return Err(CoagError::Config("density grid needs 0 < x_min < x_max and 2+ nodes".into()).into());
        }
        if self.ladder.iter().any(|e| !(*e >= 0.0)) {
            return Err(CoagError::Config("ladder entries must be nonnegative".into()).into());
        }
        if self.diagnose_x.iter().any(|x| !(*x > 0.0)) {
            return Err(CoagError::Config("diagnose_x entries must be positive".into()).into());
        }
        self.moment_orders()?;
        Ok(())
    }
}
