//! Run configuration read from JSON.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{validate_params, violations_error, ProblemParams, Violation};
use crate::grid::RadialGrid;
use crate::solver::{InitPreset, Method, Mode, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { r_min: 1e-4, r_max: 100.0, n: 1024 }
    }
}

impl GridSpec {
    pub fn build(&self, dim: usize) -> Result<Arc<RadialGrid>> {
        RadialGrid::new(dim, self.r_min, self.r_max, self.n).map(Arc::new)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub profile: PathBuf,
    pub report: PathBuf,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { profile: "profile.csv".into(), report: "report.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemParams,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Inferred from the presence of `p` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub init: InitPreset,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(if self.problem.p.is_some() { Mode::Subcritical } else { Mode::Critical })
    }

    /// Checks parameters, mode, grid and solver settings.
    pub fn validate(&self) -> Result<()> {
        match (self.mode(), self.problem.p) {
            (Mode::Critical, Some(p)) => {
                return Err(Error::InvalidParameters(format!(
                    "critical mode fixes p = 2*_{{α,μ}}; remove p = {p} from the problem"
                )))
            }
            (Mode::Subcritical, None) => {
                return Err(Error::InvalidParameters("subcritical mode needs an exponent p".into()))
            }
            _ => {}
        }
        if let Err(v) = validate_params(&self.problem) {
            let outside_range =
                v.iter().all(|x| matches!(x, Violation::AtOrAboveUpperCritical | Violation::AtOrBelowLowerCritical));
            if outside_range {
                return Err(Error::Nonexistence(format!(
                    "p = {} violates {}: no nontrivial solution by the Pohozaev obstruction",
                    self.problem.p.unwrap_or(f64::NAN),
                    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" and ")
                )));
            }
            return Err(violations_error(v));
        }
        self.grid.build(self.problem.dim)?;
        self.solver.validate()
    }
}

/// Parses and validates a run configuration.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}
