//! Versioned documents: run configuration and solution files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TebeError};
use crate::solver::{Profile, SolverConfig};
use crate::verify::DiagnosticsReport;

/// `major.minor`; readers accept any minor of their own major.
pub const SCHEMA_VERSION: &str = "1.0";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn check_schema(version: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().map(str::to_owned);
    if major(version) != major(SCHEMA_VERSION) || version.split('.').count() != 2 {
        return Err(TebeError::InvalidArgument(format!(
            "schema version {version} not readable (this build reads {SCHEMA_VERSION})"
        )));
    }
    Ok(())
}

/// Parameters shared by all commands. Unset fields fall back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub k: u32,
    pub zeta: f64,
    pub zeta_max: f64,
    /// Spacing of the sweep targets.
    pub zeta_step: f64,
    pub tau_seed: f64,
    pub tau_max: f64,
    pub tol: f64,
    /// Stored profile points.
    pub grid: usize,
    /// Interior nodes of the operator grid.
    pub psi_nodes: usize,
    /// Points per side of the field sample grid.
    pub field_points: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            k: 1,
            zeta: 0.0,
            zeta_max: 0.45,
            zeta_step: 0.05,
            tau_seed: s.tau_seed,
            tau_max: s.tau_max,
            tol: s.tol,
            grid: s.grid,
            psi_nodes: 400,
            field_points: 20,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| TebeError::InvalidArgument(format!("config: {e}")))
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tau_seed: self.tau_seed,
            tau_max: self.tau_max,
            tol: self.tol,
            grid: self.grid,
            ..SolverConfig::default()
        }
    }

    /// Every problem at once, or `Ok`.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.k == 0 {
            problems.push("k must be at least 1".to_owned());
        }
        for (name, z) in [("zeta", self.zeta), ("zeta_max", self.zeta_max)] {
            if !(0.0..0.5).contains(&z) {
                problems.push(format!("{name} = {z} outside [0, 1/2)"));
            }
        }
        if !(self.zeta_step > 0.0 && self.zeta_step <= 0.5) {
            problems.push(format!("zeta_step = {} outside (0, 0.5]", self.zeta_step));
        }
        if self.psi_nodes < 10 {
            problems.push(format!("psi_nodes = {} below 10", self.psi_nodes));
        }
        if self.field_points < 2 {
            problems.push(format!("field_points = {} below 2", self.field_points));
        }
        if let Err(TebeError::InvalidArgument(m)) = self.solver().validate() {
            problems.push(m);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(TebeError::InvalidArgument(problems.join("; ")))
        }
    }

    /// Sweep targets: multiples of the step below `zeta_max`, then `zeta_max`.
    pub fn sweep_targets(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        let mut i = 1;
        loop {
            let z = i as f64 * self.zeta_step;
            if z >= self.zeta_max - 1e-12 {
                break;
            }
            t.push(z);
            i += 1;
        }
        if self.zeta_max > 0.0 {
            t.push(self.zeta_max);
        }
        t
    }
}

/// Short summary of the diagnostics stored with a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDigest {
    pub converged: bool,
    pub matching_residual: f64,
    pub first_integral_drift: f64,
    pub bounds_passed: bool,
    pub failed_checks: Vec<u32>,
}

impl DiagnosticsDigest {
    pub fn new(profile: &Profile, report: &DiagnosticsReport) -> Self {
        Self {
            converged: profile.converged,
            matching_residual: profile.matching_residual(),
            first_integral_drift: profile.first_integral_drift,
            bounds_passed: report.passed,
            failed_checks: report.failed().iter().map(|c| c.id).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub schema_version: String,
    pub tool_version: String,
    pub config: RunConfig,
    pub diagnostics: DiagnosticsDigest,
    pub profile: Profile,
}

impl SolutionFile {
    pub fn new(config: RunConfig, profile: Profile, report: &DiagnosticsReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            tool_version: TOOL_VERSION.into(),
            config,
            diagnostics: DiagnosticsDigest::new(&profile, report),
            profile,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Head {
            schema_version: String,
        }
        let head: Head = serde_json::from_str(s).map_err(|e| TebeError::InvalidArgument(format!("solution file: {e}")))?;
        check_schema(&head.schema_version)?;
        serde_json::from_str(s).map_err(|e| TebeError::InvalidArgument(format!("solution file: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| TebeError::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the same value.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

/// CSV float: 17 significant digits.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}
