//! Multi-start search for minimal-noise subsystems.
//!
//! For every block shape `(n1, n2)` the objective is maximized from
//! `num_restarts` random starting points. Restart `i` draws its start from
//! stream `i` of a ChaCha generator keyed by the master seed, so results do not
//! depend on the order in which parallel restarts finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bfgs::{minimize, BfgsOptions, Termination};
use crate::error::{MnsError, Result};
use crate::noise::KrausChannel;
use crate::objective::{encoded_projector, EncodingDims, GradientMethod, Objective};
use crate::tensor_algebra::ComplexMatrix;
use crate::unitary::{random_start, UnitaryParams};

/// Restarts whose final objective is within this of the best count as agreeing.
pub const AGREEMENT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
    pub num_restarts: usize,
    pub seed: u64,
    /// Block shapes `(n1, n2)`; empty means all `(2, n2)` with `2 n2 <= N`.
    pub candidate_dims: Vec<(usize, usize)>,
    pub dfs_threshold: f64,
    pub gradient: GradientMethod,
    /// Gradient norm targeted by the derivative-only polishing phase run after
    /// convergence; `None` disables polishing.
    pub polish_gradient_tolerance: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            objective_tolerance: 1e-12,
            num_restarts: 20,
            seed: 0,
            candidate_dims: Vec::new(),
            dfs_threshold: 1e-6,
            gradient: GradientMethod::Analytic,
            polish_gradient_tolerance: Some(1e-12),
        }
    }
}

impl SearchConfig {
    /// Block shapes to search for a register of dimension `total`.
    pub fn resolved_dims(&self, total: usize) -> Result<Vec<EncodingDims>> {
        if self.candidate_dims.is_empty() {
            return (1..=total / 2)
                .map(|n2| EncodingDims::new(2, n2, total))
                .collect();
        }
        self.candidate_dims
            .iter()
            .map(|&(n1, n2)| EncodingDims::new(n1, n2, total))
            .collect()
    }

    pub fn validate(&self, total: usize) -> Result<()> {
        if self.num_restarts == 0 {
            return Err(MnsError::InvalidParameter(
                "num_restarts must be >= 1".into(),
            ));
        }
        if !(self.gradient_tolerance >= 0.0
            && self.objective_tolerance >= 0.0
            && self.dfs_threshold >= 0.0)
        {
            return Err(MnsError::InvalidParameter(
                "tolerances must be nonnegative".into(),
            ));
        }
        if let Some(tol) = self.polish_gradient_tolerance {
            if !(tol >= 0.0) {
                return Err(MnsError::InvalidParameter(
                    "polish tolerance must be nonnegative".into(),
                ));
            }
        }
        if let GradientMethod::CentralDifference { step } = self.gradient {
            if !(step > 0.0) {
                return Err(MnsError::InvalidParameter(
                    "finite-difference step must be positive".into(),
                ));
            }
        }
        self.resolved_dims(total).map(|_| ())
    }

    fn bfgs_options(&self) -> BfgsOptions {
        BfgsOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            objective_tolerance: self.objective_tolerance,
            polish_gradient_tolerance: self.polish_gradient_tolerance,
            ..BfgsOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    /// Stream of the master-seeded generator used for the starting point.
    pub stream: u64,
    pub initial_j: f64,
    pub final_j: f64,
    pub iterations: usize,
    pub polish_iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    pub termination: Termination,
    /// Objective after every accepted step; empty when loaded from a file.
    #[serde(skip)]
    pub trace: Vec<f64>,
    #[serde(skip)]
    pub params: Option<UnitaryParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub dims: EncodingDims,
    pub best_j: f64,
    pub best_restart: usize,
    pub best_params: UnitaryParams,
    pub is_dfs: bool,
    /// Fraction of restarts within [`AGREEMENT_TOLERANCE`] of `best_j`.
    pub agreement: f64,
    pub per_restart: Vec<RestartRecord>,
}

impl SearchResult {
    pub fn unitary(&self) -> Result<ComplexMatrix> {
        self.best_params.realize()
    }

    /// `U^+ P U` for the best encoding.
    pub fn projector(&self) -> Result<ComplexMatrix> {
        Ok(encoded_projector(&self.unitary()?, self.dims))
    }
}

/// `U^+ P U` of a search result.
pub fn subspace_projector(result: &SearchResult) -> Result<ComplexMatrix> {
    result.projector()
}

/// Outcome of a single maximization run.
#[derive(Debug, Clone)]
pub struct Maximization {
    pub j: f64,
    pub params: UnitaryParams,
    pub initial_j: f64,
    pub iterations: usize,
    pub polish_iterations: usize,
    pub gradient_norm: f64,
    pub termination: Termination,
    /// `J` after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Maximizes `J` over the chart from `initial`.
pub fn bfgs_maximize(
    channel: &KrausChannel,
    dims: EncodingDims,
    initial: &UnitaryParams,
    config: &SearchConfig,
) -> Result<Maximization> {
    let obj = Objective::new(channel, dims)?;
    if initial.dim != dims.total() {
        return Err(MnsError::InvalidDimension(
            "initial parameters do not match the channel".into(),
        ));
    }
    initial.validate()?;
    let method = config.gradient;
    let f = |x: &[f64]| -> (f64, Vec<f64>) {
        let (v, g) = match method {
            GradientMethod::Analytic => obj.value_and_gradient(x).expect("flat length is fixed"),
            GradientMethod::CentralDifference { step } => (
                obj.value(x).expect("flat length is fixed"),
                obj.finite_difference_gradient(x, step)
                    .expect("flat length is fixed"),
            ),
        };
        (-v, g.into_iter().map(|gi| -gi).collect())
    };
    let out = minimize(f, &initial.to_flat(), &config.bfgs_options());
    Ok(Maximization {
        j: -out.value,
        params: UnitaryParams::from_flat(dims.total(), &out.x)?,
        initial_j: -out.trace[0],
        iterations: out.iterations,
        polish_iterations: out.polish_iterations,
        gradient_norm: out.gradient_norm,
        termination: out.termination,
        trace: out.trace.iter().map(|v| -v).collect(),
    })
}

/// Runs all restarts for one block shape.
pub fn search_dims(
    channel: &KrausChannel,
    dims: EncodingDims,
    config: &SearchConfig,
) -> Result<SearchResult> {
    config.validate(channel.dim)?;
    let runs: Vec<Result<RestartRecord>> = (0..config.num_restarts)
        .into_par_iter()
        .map(|index| {
            let stream = index as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(stream);
            let start = random_start(dims.total(), &mut rng);
            let m = bfgs_maximize(channel, dims, &start, config)?;
            Ok(RestartRecord {
                index,
                stream,
                initial_j: m.initial_j,
                final_j: m.j,
                iterations: m.iterations,
                polish_iterations: m.polish_iterations,
                gradient_norm: m.gradient_norm,
                converged: m.termination.converged(),
                termination: m.termination,
                trace: m.trace,
                params: Some(m.params),
            })
        })
        .collect();
    let per_restart = runs.into_iter().collect::<Result<Vec<_>>>()?;
    aggregate(dims, per_restart, config)
}

fn aggregate(
    dims: EncodingDims,
    per_restart: Vec<RestartRecord>,
    config: &SearchConfig,
) -> Result<SearchResult> {
    // Lowest index wins ties.
    let best = per_restart
        .iter()
        .fold(None::<&RestartRecord>, |acc, r| match acc {
            Some(b) if b.final_j >= r.final_j => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| MnsError::InvalidParameter("no restarts".into()))?;
    let best_j = best.final_j;
    let best_params = best
        .params
        .clone()
        .expect("fresh restarts carry parameters");
    let agreeing = per_restart
        .iter()
        .filter(|r| best_j - r.final_j <= AGREEMENT_TOLERANCE)
        .count();
    Ok(SearchResult {
        dims,
        best_j,
        best_restart: best.index,
        best_params,
        is_dfs: best_j >= 1.0 - config.dfs_threshold,
        agreement: agreeing as f64 / per_restart.len() as f64,
        per_restart,
    })
}

/// Searches every configured block shape, in configuration order.
pub fn find_mns(channel: &KrausChannel, config: &SearchConfig) -> Result<Vec<SearchResult>> {
    config.validate(channel.dim)?;
    config
        .resolved_dims(channel.dim)?
        .into_iter()
        .map(|dims| search_dims(channel, dims, config))
        .collect()
}
