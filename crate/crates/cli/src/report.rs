use std::path::Path;

use anyhow::{Context, Result};
use gadop_core::lshape::{IterationRecord, MasterState};
use gadop_core::milp::MilpStatus;
use gadop_core::{CostBreakdown, FirstStagePlan, ProblemFile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub command: String,
    pub flags: serde_json::Value,
    pub instance_path: String,
    pub instance_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub objective: f64,
    pub bound: f64,
    pub nodes_explored: u64,
    pub simplex_iterations: u64,
    pub num_vars: usize,
    pub num_constraints: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LShapeTrace {
    pub master_solves: usize,
    pub iterations: Vec<IterationRecord>,
    pub final_state: MasterState,
}

/// What `render` needs to draw a plan without the instance file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// Depot first, in km.
    pub coordinates: Vec<[f64; 2]>,
    pub drone_trip_km: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub provenance: Provenance,
    pub method: String,
    pub status: MilpStatus,
    pub plan: FirstStagePlan,
    pub cost: CostBreakdown,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solver: Option<SolverStats>,
    /// Optimum of a baseline's own objective, which differs from `cost.total`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lshape: Option<LShapeTrace>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub layout: Option<Layout>,
    pub wall_time_s: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct LoadedProblem {
    pub file: ProblemFile,
    pub path: String,
    pub sha256: String,
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = std::str::from_utf8(&bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
    let file = ProblemFile::from_json(text).with_context(|| format!("parsing {}", path.display()))?;
    let violations = file.validate();
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        anyhow::bail!("invalid instance {}: {}", path.display(), list.join("; "));
    }
    Ok(LoadedProblem { file, path: path.display().to_string(), sha256: sha256_hex(&bytes) })
}

pub fn provenance(command: &str, flags: &impl Serialize, problem: &LoadedProblem) -> Provenance {
    Provenance {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        flags: serde_json::to_value(flags).expect("flags serialize"),
        instance_path: problem.path.clone(),
        instance_sha256: problem.sha256.clone(),
    }
}

pub fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
