//! Experiment configuration files.
//!
//! A configuration is a single JSON document. Unknown fields are rejected so
//! that typos surface as parse errors with a line and column.

use std::path::{Path, PathBuf};

use mns_core::noise::{
    collective_xz, collective_z_with_local_dephasing, perturbed_collective,
    seeded_perturbation_unitary, PerturbationMode,
};
use mns_core::{EncodingDims, LindbladModel, SearchConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, CliError, Result};

/// Largest register accepted from a configuration file.
pub const MAX_QUBITS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// No noise terms at all.
    Noiseless { n_qubits: usize },
    CollectiveXz {
        n_qubits: usize,
        gamma_x: f64,
        gamma_z: f64,
    },
    /// `gamma_z D[S_z] + delta sum_k gamma_k D[Z_k]`.
    CollectiveZLocalDephasing {
        n_qubits: usize,
        gamma_z: f64,
        delta: f64,
        local_rates: Vec<f64>,
    },
    /// `gamma D[V S_x V^+] + gamma D[S_z]` with one random unitary `V` on the register.
    PerturbedCollectiveGlobal {
        n_qubits: usize,
        gamma: f64,
        delta: f64,
        perturbation_seed: u64,
    },
    /// As above with `V` a tensor product of random single-qubit unitaries.
    PerturbedCollectiveLocal {
        n_qubits: usize,
        gamma: f64,
        delta: f64,
        perturbation_seed: u64,
    },
}

impl ModelSpec {
    pub fn n_qubits(&self) -> usize {
        match *self {
            ModelSpec::Noiseless { n_qubits }
            | ModelSpec::CollectiveXz { n_qubits, .. }
            | ModelSpec::CollectiveZLocalDephasing { n_qubits, .. }
            | ModelSpec::PerturbedCollectiveGlobal { n_qubits, .. }
            | ModelSpec::PerturbedCollectiveLocal { n_qubits, .. } => n_qubits,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits()
    }

    /// Perturbation amplitude, for the model families that have one.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            ModelSpec::CollectiveZLocalDephasing { delta, .. }
            | ModelSpec::PerturbedCollectiveGlobal { delta, .. }
            | ModelSpec::PerturbedCollectiveLocal { delta, .. } => Some(delta),
            ModelSpec::Noiseless { .. } | ModelSpec::CollectiveXz { .. } => None,
        }
    }

    /// The same model with the perturbation amplitude replaced.
    pub fn with_delta(&self, new_delta: f64) -> Result<ModelSpec> {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::CollectiveZLocalDephasing { delta, .. }
            | ModelSpec::PerturbedCollectiveGlobal { delta, .. }
            | ModelSpec::PerturbedCollectiveLocal { delta, .. } => *delta = new_delta,
            ModelSpec::Noiseless { .. } | ModelSpec::CollectiveXz { .. } => {
                return Err(CliError::Validation(
                    "this model kind has no perturbation amplitude".into(),
                ))
            }
        }
        Ok(out)
    }

    pub fn build(&self) -> mns_core::Result<LindbladModel> {
        match self {
            ModelSpec::Noiseless { n_qubits } => LindbladModel::noiseless(*n_qubits),
            ModelSpec::CollectiveXz {
                n_qubits,
                gamma_x,
                gamma_z,
            } => collective_xz(*n_qubits, *gamma_x, *gamma_z),
            ModelSpec::CollectiveZLocalDephasing {
                n_qubits,
                gamma_z,
                delta,
                local_rates,
            } => collective_z_with_local_dephasing(*n_qubits, *gamma_z, *delta, local_rates),
            ModelSpec::PerturbedCollectiveGlobal {
                n_qubits,
                gamma,
                delta,
                perturbation_seed,
            } => {
                let v = seeded_perturbation_unitary(
                    *n_qubits,
                    *delta,
                    PerturbationMode::Global,
                    *perturbation_seed,
                )?;
                perturbed_collective(*n_qubits, *gamma, *gamma, &v)
            }
            ModelSpec::PerturbedCollectiveLocal {
                n_qubits,
                gamma,
                delta,
                perturbation_seed,
            } => {
                let v = seeded_perturbation_unitary(
                    *n_qubits,
                    *delta,
                    PerturbationMode::LocalTensor,
                    *perturbation_seed,
                )?;
                perturbed_collective(*n_qubits, *gamma, *gamma, &v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepGrid {
    /// Perturbation amplitudes at a fixed final time.
    Delta { values: Vec<f64>, t_final: f64 },
    /// Final times at the model's own perturbation amplitude.
    TFinal { values: Vec<f64> },
}

impl SweepGrid {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepGrid::Delta { values, .. } | SweepGrid::TFinal { values } => values,
        }
    }
}

/// Encoding the MNS is compared against in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceEncoding {
    /// The analytic three-qubit collective-noise subsystem.
    #[default]
    CollectiveDfsN3,
    /// The best encoding found for the model with the perturbation switched off.
    UnperturbedSearch,
}

fn default_sweep_dims() -> (usize, usize) {
    (2, 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSpec {
    pub sweep: SweepGrid,
    #[serde(default = "default_sweep_dims")]
    pub dims: (usize, usize),
    #[serde(default)]
    pub reference: ReferenceEncoding,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Stem of every output file.
    pub name: String,
    pub model: ModelSpec,
    /// Kraus time step for the objective; defaults to `1e-3 / max rate`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub evaluation: Option<EvaluationSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Parses a configuration; `source` names the text in diagnostics.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Parse {
            path: source.to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration always serializes")
    }

    /// SHA-256 of the canonical serialization, as lowercase hex.
    pub fn hash(&self) -> String {
        let digest =
            Sha256::digest(serde_json::to_vec(self).expect("configuration always serializes"));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Time step used for the objective.
    pub fn resolved_dt(&self, model: &LindbladModel) -> f64 {
        self.dt.unwrap_or_else(|| model.default_dt())
    }

    pub fn sweep_dims(&self) -> Result<EncodingDims> {
        let eval = self
            .evaluation
            .as_ref()
            .ok_or_else(|| CliError::Validation("no evaluation section".into()))?;
        EncodingDims::new(eval.dims.0, eval.dims.1, self.model.dim()).map_err(invalid)
    }

    /// Checks everything that can be checked without running a search.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(CliError::Validation(format!(
                "name {:?} is not a valid file stem",
                self.name
            )));
        }
        let n = self.model.n_qubits();
        if n == 0 || n > MAX_QUBITS {
            return Err(CliError::Validation(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {n}"
            )));
        }
        let model = self.model.build().map_err(invalid)?;
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Validation(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        self.search.validate(model.dim()).map_err(invalid)?;
        if let Some(eval) = &self.evaluation {
            let dims = self.sweep_dims()?;
            if eval.sweep.values().is_empty() {
                return Err(CliError::Validation("sweep grid is empty".into()));
            }
            if eval
                .sweep
                .values()
                .iter()
                .any(|v| !(*v >= 0.0 && v.is_finite()))
            {
                return Err(CliError::Validation(
                    "sweep values must be finite and nonnegative".into(),
                ));
            }
            match &eval.sweep {
                SweepGrid::Delta { values, t_final } => {
                    if !(*t_final >= 0.0 && t_final.is_finite()) {
                        return Err(CliError::Validation(format!(
                            "t_final must be >= 0, got {t_final}"
                        )));
                    }
                    for &d in values {
                        self.model.with_delta(d)?.build().map_err(invalid)?;
                    }
                }
                SweepGrid::TFinal { .. } => {}
            }
            match eval.reference {
                ReferenceEncoding::CollectiveDfsN3 => {
                    if n != 3 || (dims.n1, dims.n2) != (2, 2) {
                        return Err(CliError::Validation(
                            "collective_dfs_n3 reference needs 3 qubits and dims (2, 2)".into(),
                        ));
                    }
                }
                ReferenceEncoding::UnperturbedSearch => {
                    if self.model.delta().is_none() {
                        return Err(CliError::Validation(
                            "unperturbed_search needs a perturbed model kind".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
