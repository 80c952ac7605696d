use std::fmt::Write as _;
use std::path::Path;

use mns_core::fidelity::FidelityPoint;
use mns_core::{EncodingDims, SearchResult, UnitaryParams};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A replayable encoding: block shape plus the full parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingFile {
    pub dims: EncodingDims,
    pub params: UnitaryParams,
    /// Objective value recorded when the encoding was found.
    #[serde(default)]
    pub j: Option<f64>,
}

impl EncodingFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: EncodingFile =
            serde_json::from_str(&text).map_err(|e| CliError::CorruptFile {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        if file.params.dim != file.dims.total() {
            return Err(CliError::CorruptFile {
                path: path.to_path_buf(),
                message: format!(
                    "parameters of dimension {} do not match dims {}",
                    file.params.dim, file.dims
                ),
            });
        }
        file.params.validate().map_err(|e| CliError::CorruptFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(file)
    }
}

/// One sweep point; fidelities that could not be evaluated are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub param: f64,
    pub fi_mns: Option<f64>,
    pub fi_dfs: Option<f64>,
    pub j_opt: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

impl From<&FidelityPoint> for PointRecord {
    fn from(p: &FidelityPoint) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            param: p.param,
            fi_mns: finite(p.fi_mns),
            fi_dfs: finite(p.fi_dfs),
            j_opt: finite(p.j_opt),
            converged: p.converged,
            error: p.error.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub tool_version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    /// Kraus time step used for the objective.
    pub dt: f64,
    pub searches: Vec<SearchResult>,
    pub fidelity_points: Vec<PointRecord>,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

impl ResultRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::CorruptFile {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("records always serialize")
    }

    /// Human-readable summary with the restart table of every search.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment   {}", self.config.name);
        let _ = writeln!(s, "config hash  {}", self.config_sha256);
        let _ = writeln!(s, "master seed  {}", self.master_seed);
        let _ = writeln!(s, "tool version {}", self.tool_version);
        let _ = writeln!(s, "dt           {:e}", self.dt);
        let _ = writeln!(s, "wall clock   {:.3} s", self.wall_clock_seconds);
        for r in &self.searches {
            let _ = writeln!(s);
            let _ = writeln!(
                s,
                "dims {}  J_opt {:.15}  is_dfs {}  agreement {:.2}  best restart {}",
                r.dims, r.best_j, r.is_dfs, r.agreement, r.best_restart
            );
            let _ = writeln!(
                s,
                "  restart  initial_J          final_J            iters  termination"
            );
            for rec in &r.per_restart {
                let _ = writeln!(
                    s,
                    "  {:>7}  {:.15}  {:.15}  {:>5}  {:?}",
                    rec.index, rec.initial_j, rec.final_j, rec.iterations, rec.termination
                );
            }
        }
        if !self.fidelity_points.is_empty() {
            let _ = writeln!(s);
            s.push_str(&sweep_csv_records(&self.fidelity_points));
        }
        s
    }
}

const CSV_HEADER: &str = "param,fi_mns,fi_dfs,J_opt,converged";

fn csv_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.15}"),
        None => "NaN".to_string(),
    }
}

fn sweep_csv_records(points: &[PointRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            csv_value(Some(p.param)),
            csv_value(p.fi_mns),
            csv_value(p.fi_dfs),
            csv_value(p.j_opt),
            p.converged
        );
    }
    s
}

/// Sweep table with fixed 15-decimal formatting and LF line endings.
pub fn sweep_csv(points: &[FidelityPoint]) -> String {
    sweep_csv_records(&points.iter().map(PointRecord::from).collect::<Vec<_>>())
}
