//! Implementations of the subcommands. Every function returns data and leaves
//! printing to the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use mns_core::fidelity::{fidelity_sweep, FidelityPoint, SweepAxis, SweepSpec};
use mns_core::noise::{collective_dfs_encoding_n3, dfs_check, lindblad_to_kraus, DfsReport};
use mns_core::objective::Objective;
use mns_core::search::{find_mns, search_dims};
use mns_core::{ComplexMatrix, MnsError};

use crate::config::{ExperimentConfig, ReferenceEncoding, SweepGrid};
use crate::error::{runtime, CliError, Result};
use crate::record::{sweep_csv, EncodingFile, PointRecord, ResultRecord, TOOL_VERSION};

/// Command-line overrides applied on top of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

/// Loads, overrides and validates a configuration.
pub fn prepare_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = overrides.seed {
        cfg.search.seed = seed;
    }
    if let Some(dir) = &overrides.out_dir {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn new_record(cfg: &ExperimentConfig, dt: f64) -> ResultRecord {
    ResultRecord {
        tool_version: TOOL_VERSION.to_string(),
        config_sha256: cfg.hash(),
        master_seed: cfg.search.seed,
        config: cfg.clone(),
        dt,
        searches: Vec::new(),
        fidelity_points: Vec::new(),
        started_unix_seconds: unix_now(),
        wall_clock_seconds: 0.0,
    }
}

pub fn run_find_mns(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let start = Instant::now();
    let model = cfg.model.build().map_err(runtime)?;
    let dt = cfg.resolved_dt(&model);
    let mut record = new_record(cfg, dt);
    let channel = lindblad_to_kraus(&model, dt).map_err(runtime)?;
    record.searches = find_mns(&channel, &cfg.search).map_err(runtime)?;
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

pub fn result_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join(format!("{}.result.json", cfg.name))
}

pub fn encoding_path(cfg: &ExperimentConfig, n1: usize, n2: usize) -> PathBuf {
    cfg.output
        .dir
        .join(format!("{}.encoding.{n1}x{n2}.json", cfg.name))
}

pub fn csv_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.dir.join(format!("{}.csv", cfg.name))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Writes the result record and one encoding file per block shape.
pub fn write_find_mns(cfg: &ExperimentConfig, record: &ResultRecord) -> Result<Vec<PathBuf>> {
    let mut written = vec![result_path(cfg)];
    write_file(&written[0], &record.to_json())?;
    for r in &record.searches {
        let file = EncodingFile {
            dims: r.dims,
            params: r.best_params.clone(),
            j: Some(r.best_j),
        };
        let path = encoding_path(cfg, r.dims.n1, r.dims.n2);
        write_file(
            &path,
            &serde_json::to_string_pretty(&file).expect("encodings always serialize"),
        )?;
        written.push(path);
    }
    Ok(written)
}

/// Commutation test of an encoding against the configured model.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub dims: mns_core::EncodingDims,
    pub j: f64,
    pub report: DfsReport,
}

impl VerifyOutcome {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "encoding dims {}  J = {:.15}", self.dims, self.j);
        for (k, d) in self.report.per_operator.iter().enumerate() {
            let _ = writeln!(s, "operator {k}: commutation defect {d:.3e}");
        }
        let verdict = if self.report.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "max defect {:.3e} (threshold {:.0e}): {verdict}",
            self.report.defect,
            mns_core::noise::DFS_DEFECT_THRESHOLD
        );
        s
    }
}

pub fn run_verify_dfs(cfg: &ExperimentConfig, encoding: &EncodingFile) -> Result<VerifyOutcome> {
    let model = cfg.model.build().map_err(runtime)?;
    if encoding.dims.total() != model.dim() {
        return Err(CliError::Validation(format!(
            "encoding dimension {} does not match the model dimension {}",
            encoding.dims.total(),
            model.dim()
        )));
    }
    let channel = lindblad_to_kraus(&model, cfg.resolved_dt(&model)).map_err(runtime)?;
    let u = encoding.params.realize().map_err(runtime)?;
    let report = dfs_check(&channel, &u, encoding.dims.n1, encoding.dims.n2).map_err(runtime)?;
    let j = Objective::new(&channel, encoding.dims)
        .map_err(runtime)?
        .value_at_unitary(&u);
    Ok(VerifyOutcome {
        dims: encoding.dims,
        j,
        report,
    })
}

fn reference_encoding(
    cfg: &ExperimentConfig,
    reference: ReferenceEncoding,
) -> Result<ComplexMatrix> {
    match reference {
        ReferenceEncoding::CollectiveDfsN3 => Ok(collective_dfs_encoding_n3()),
        ReferenceEncoding::UnperturbedSearch => {
            let model = cfg.model.with_delta(0.0)?.build().map_err(runtime)?;
            let channel = lindblad_to_kraus(&model, cfg.resolved_dt(&model)).map_err(runtime)?;
            let r = search_dims(&channel, cfg.sweep_dims()?, &cfg.search).map_err(runtime)?;
            r.unitary().map_err(runtime)
        }
    }
}

pub fn run_fidelity_sweep(cfg: &ExperimentConfig) -> Result<(Vec<FidelityPoint>, ResultRecord)> {
    let start = Instant::now();
    let eval = cfg
        .evaluation
        .as_ref()
        .ok_or_else(|| CliError::Validation("fidelity-sweep needs an evaluation section".into()))?;
    let model = cfg.model.build().map_err(runtime)?;
    let mut record = new_record(cfg, cfg.resolved_dt(&model));
    let reference = reference_encoding(cfg, eval.reference)?;
    let axis = match &eval.sweep {
        SweepGrid::Delta { values, t_final } => SweepAxis::Delta {
            values: values.clone(),
            t_final: *t_final,
        },
        SweepGrid::TFinal { values } => SweepAxis::Time {
            values: values.clone(),
            delta: cfg.model.delta().unwrap_or(0.0),
        },
    };
    let spec = SweepSpec {
        axis,
        dims: cfg.sweep_dims()?,
        search: cfg.search.clone(),
        dt: cfg.dt,
    };
    let model_at = |delta: f64| -> mns_core::Result<mns_core::LindbladModel> {
        match cfg.model.delta() {
            Some(_) => cfg
                .model
                .with_delta(delta)
                .map_err(|e| MnsError::InvalidParameter(e.to_string()))?
                .build(),
            None => cfg.model.build(),
        }
    };
    let points = fidelity_sweep(model_at, &reference, &spec).map_err(runtime)?;
    record.fidelity_points = points.iter().map(PointRecord::from).collect();
    record.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok((points, record))
}

/// Writes the CSV and the sweep record; returns their paths.
pub fn write_fidelity_sweep(
    cfg: &ExperimentConfig,
    points: &[FidelityPoint],
    record: &ResultRecord,
) -> Result<(PathBuf, PathBuf)> {
    let csv = csv_path(cfg);
    write_file(&csv, &sweep_csv(points))?;
    let rec = cfg.output.dir.join(format!("{}.sweep.json", cfg.name));
    write_file(&rec, &record.to_json())?;
    Ok((csv, rec))
}

pub fn show_result(path: &Path) -> Result<String> {
    Ok(ResultRecord::load(path)?.summary())
}
