//! Exact time evolution and worst-case fidelity of an encoding.
//!
//! Density matrices are vectorized by stacking columns, so
//! `vec(A rho B) = (B^T (x) A) vec(rho)`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MnsError, Result};
use crate::noise::{lindblad_to_kraus, LindbladModel};
use crate::objective::EncodingDims;
use crate::search::{search_dims, SearchConfig};
use crate::simplex::{nelder_mead, SimplexOptions};
use crate::tensor_algebra::{
    direct_sum_embed, identity, leading_block, partial_trace_2, tensor, ComplexMatrix, ONE,
};

/// Vectorized Liouvillian `sum_i (conj(V) (x) V - I (x) V^+V / 2 - (V^+V)^T (x) I / 2)`.
pub fn liouvillian(model: &LindbladModel) -> ComplexMatrix {
    let n = model.dim();
    let id = identity(n);
    let mut l = ComplexMatrix::zeros(n * n, n * n);
    for v in model.scaled_operators() {
        let vdv = v.adjoint() * &v;
        l += tensor(&v.map(|z| z.conj()), &v);
        l -= tensor(&id, &vdv).scale(0.5);
        l -= tensor(&vdv.transpose(), &id).scale(0.5);
    }
    l
}

/// Channel `exp(L t_f)` acting on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct EvolvedChannel {
    pub dim: usize,
    pub t_final: f64,
    pub superoperator: ComplexMatrix,
}

impl EvolvedChannel {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            t_final: 0.0,
            superoperator: identity(dim * dim),
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let v = nalgebra::DVector::from_column_slice(rho.as_slice());
        let out = &self.superoperator * v;
        ComplexMatrix::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    /// Choi matrix `sum_ij |i><j| (x) E(|i><j|)`.
    pub fn choi(&self) -> ComplexMatrix {
        let n = self.dim;
        let mut c = ComplexMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let mut unit = ComplexMatrix::zeros(n, n);
                unit[(i, j)] = ONE;
                c.view_mut((i * n, j * n), (n, n))
                    .copy_from(&self.apply(&unit));
            }
        }
        c
    }

    /// Smallest eigenvalue of the Hermitian part of the Choi matrix.
    pub fn min_choi_eigenvalue(&self) -> f64 {
        let c = self.choi();
        let h = (&c + c.adjoint()).scale(0.5);
        SymmetricEigen::new(h)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Evolves a Lindblad model for time `t_final` with the exact propagator.
pub fn evolve(model: &LindbladModel, t_final: f64) -> Result<EvolvedChannel> {
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(MnsError::InvalidParameter(format!(
            "final time must be >= 0, got {t_final}"
        )));
    }
    let dim = model.dim();
    let superoperator = if t_final == 0.0 {
        identity(dim * dim)
    } else {
        (liouvillian(model) * Complex64::new(t_final, 0.0)).exp()
    };
    Ok(EvolvedChannel {
        dim,
        t_final,
        superoperator,
    })
}

const STATE_TOLERANCE: f64 = 1e-9;

/// Checks that `rho` is a density matrix to `1e-9`.
pub fn validate_density_matrix(rho: &ComplexMatrix) -> Result<()> {
    if !rho.is_square() {
        return Err(MnsError::InvalidState(
            "density matrix must be square".into(),
        ));
    }
    if !crate::tensor_algebra::is_finite(rho) {
        return Err(MnsError::InvalidState("non-finite entries".into()));
    }
    if crate::tensor_algebra::hermiticity_defect(rho) > STATE_TOLERANCE {
        return Err(MnsError::InvalidState("not Hermitian".into()));
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > STATE_TOLERANCE || tr.im.abs() > STATE_TOLERANCE {
        return Err(MnsError::InvalidState(format!("trace {tr} is not 1")));
    }
    let min = SymmetricEigen::new(rho.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -STATE_TOLERANCE {
        return Err(MnsError::InvalidState(format!(
            "negative eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

fn encode_linear(
    op: &ComplexMatrix,
    u: &ComplexMatrix,
    dims: EncodingDims,
) -> Result<ComplexMatrix> {
    let block = tensor(op, &identity(dims.n2).unscale(dims.n2 as f64));
    Ok(u.adjoint() * direct_sum_embed(&block, dims.total())? * u)
}

fn decode_linear(
    rho: &ComplexMatrix,
    u: &ComplexMatrix,
    dims: EncodingDims,
) -> Result<ComplexMatrix> {
    let back = u * rho * u.adjoint();
    partial_trace_2(&leading_block(&back, dims.block()), dims.n1, dims.n2)
}

/// `U^+ (rho1 (x) I/n2 (+) 0) U`.
pub fn encode(
    rho1: &ComplexMatrix,
    u: &ComplexMatrix,
    dims: EncodingDims,
) -> Result<ComplexMatrix> {
    if rho1.nrows() != dims.n1 || u.nrows() != dims.total() {
        return Err(MnsError::InvalidDimension(
            "state or encoding does not match the block shape".into(),
        ));
    }
    validate_density_matrix(rho1)?;
    encode_linear(rho1, u, dims)
}

/// Decoded logical state.
#[derive(Debug, Clone)]
pub struct Decoded {
    /// `Tr_2(P U rho U^+ P)` without renormalization.
    pub state: ComplexMatrix,
    /// `1 - Tr(P U rho U^+ P)`.
    pub leakage: f64,
}

impl Decoded {
    /// The decoded state rescaled to unit trace.
    pub fn renormalized(&self) -> ComplexMatrix {
        let tr = self.state.trace().re;
        if tr > 0.0 && tr < 1.0 {
            self.state.unscale(tr)
        } else {
            self.state.clone()
        }
    }
}

pub fn decode(rho: &ComplexMatrix, u: &ComplexMatrix, dims: EncodingDims) -> Result<Decoded> {
    if rho.nrows() != dims.total() || u.nrows() != dims.total() {
        return Err(MnsError::InvalidDimension(
            "state or encoding does not match the block shape".into(),
        ));
    }
    validate_density_matrix(rho)?;
    let state = decode_linear(rho, u, dims)?;
    let leakage = 1.0 - state.trace().re;
    Ok(Decoded { state, leakage })
}

/// Logical map `decode . E . encode` as an `n1^2 x n1^2` superoperator.
pub fn logical_map(
    u: &ComplexMatrix,
    dims: EncodingDims,
    evolved: &EvolvedChannel,
) -> Result<ComplexMatrix> {
    let n1 = dims.n1;
    let mut m = ComplexMatrix::zeros(n1 * n1, n1 * n1);
    for j in 0..n1 {
        for i in 0..n1 {
            let mut unit = ComplexMatrix::zeros(n1, n1);
            unit[(i, j)] = ONE;
            let out = decode_linear(&evolved.apply(&encode_linear(&unit, u, dims)?), u, dims)?;
            m.set_column(
                i + j * n1,
                &nalgebra::DVector::from_column_slice(out.as_slice()),
            );
        }
    }
    Ok(m)
}

/// Pure state from `n1 - 1` hyperspherical angles followed by `n1 - 1` phases.
pub fn chart_state(n1: usize, chart: &[f64]) -> nalgebra::DVector<Complex64> {
    let k = n1 - 1;
    let mut psi = nalgebra::DVector::from_element(n1, ONE);
    let mut radius = 1.0;
    for m in 0..n1 {
        let amp = if m < k {
            radius * chart[m].cos()
        } else {
            radius
        };
        if m < k {
            radius *= chart[m].sin();
        }
        let phase = if m == 0 { 0.0 } else { chart[k + m - 1] };
        psi[m] = Complex64::from_polar(amp, phase);
    }
    psi
}

fn fidelity_of_state(map: &ComplexMatrix, psi: &nalgebra::DVector<Complex64>) -> f64 {
    let n1 = psi.len();
    let rho = psi * psi.adjoint();
    let out = map * nalgebra::DVector::from_column_slice(rho.as_slice());
    let out = ComplexMatrix::from_column_slice(n1, n1, out.as_slice());
    (psi.adjoint() * out * psi)[(0, 0)].re
}

/// Minimum of `Tr(rho (decode . E . encode)(rho))` over pure inputs.
#[derive(Debug, Clone)]
pub struct WorstCase {
    pub fidelity: f64,
    pub state: nalgebra::DVector<Complex64>,
}

fn coarse_grid(n1: usize) -> Vec<Vec<f64>> {
    let k = n1 - 1;
    if n1 == 2 {
        let mut pts = Vec::with_capacity(64 * 128);
        for a in 0..64 {
            for p in 0..128 {
                pts.push(vec![
                    FRAC_PI_2 * a as f64 / 63.0,
                    2.0 * PI * p as f64 / 128.0,
                ]);
            }
        }
        return pts;
    }
    // 8 points per chart coordinate; angles include both ends of [0, pi/2].
    let per_axis = 8usize;
    let total = per_axis.pow((2 * k) as u32);
    (0..total)
        .map(|mut idx| {
            (0..2 * k)
                .map(|c| {
                    let step = idx % per_axis;
                    idx /= per_axis;
                    if c < k {
                        FRAC_PI_2 * step as f64 / (per_axis - 1) as f64
                    } else {
                        2.0 * PI * step as f64 / per_axis as f64
                    }
                })
                .collect()
        })
        .collect()
}

/// Largest logical dimension handled by the exhaustive grid.
pub const MAX_GRID_LOGICAL_DIM: usize = 4;

pub fn worst_case_fidelity(
    u: &ComplexMatrix,
    dims: EncodingDims,
    evolved: &EvolvedChannel,
) -> Result<WorstCase> {
    if u.nrows() != dims.total() || evolved.dim != dims.total() {
        return Err(MnsError::InvalidDimension(
            "encoding and channel do not match the block shape".into(),
        ));
    }
    let map = logical_map(u, dims, evolved)?;
    let n1 = dims.n1;
    if n1 == 1 {
        let psi = nalgebra::DVector::from_element(1, ONE);
        return Ok(WorstCase {
            fidelity: fidelity_of_state(&map, &psi),
            state: psi,
        });
    }
    if n1 > MAX_GRID_LOGICAL_DIM {
        return Err(MnsError::InvalidDimension(format!(
            "worst-case search supports logical dimension <= {MAX_GRID_LOGICAL_DIM}"
        )));
    }
    let f = |c: &[f64]| fidelity_of_state(&map, &chart_state(n1, c));
    let mut scored: Vec<(f64, Vec<f64>)> =
        coarse_grid(n1).into_iter().map(|c| (f(&c), c)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let opts = SimplexOptions::default();
    let mut best = (scored[0].0, scored[0].1.clone());
    for (_, start) in scored.iter().take(4) {
        let (x, v) = nelder_mead(f, start, &opts);
        if v < best.0 {
            best = (v, x);
        }
    }
    Ok(WorstCase {
        fidelity: best.0,
        state: chart_state(n1, &best.1),
    })
}

/// Fidelities of `samples` Haar-random pure inputs.
pub fn sampled_fidelities<R: Rng + ?Sized>(
    u: &ComplexMatrix,
    dims: EncodingDims,
    evolved: &EvolvedChannel,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let map = logical_map(u, dims, evolved)?;
    Ok((0..samples)
        .map(|_| {
            let v = nalgebra::DVector::from_fn(dims.n1, |_, _| {
                Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            });
            let n = v.norm();
            fidelity_of_state(&map, &v.unscale(n))
        })
        .collect())
}

/// Worst-case fidelities of the MNS and a reference encoding at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityPoint {
    pub param: f64,
    pub fi_mns: f64,
    pub fi_dfs: f64,
    pub j_opt: f64,
    pub converged: bool,
    /// Set when the point could not be evaluated.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "axis")]
pub enum SweepAxis {
    /// Vary the perturbation amplitude at a fixed final time.
    Delta { values: Vec<f64>, t_final: f64 },
    /// Vary the final time at a fixed perturbation amplitude.
    Time { values: Vec<f64>, delta: f64 },
}

impl SweepAxis {
    pub fn values(&self) -> &[f64] {
        match self {
            SweepAxis::Delta { values, .. } | SweepAxis::Time { values, .. } => values,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub dims: EncodingDims,
    pub search: SearchConfig,
    /// Kraus time step for the objective; `None` uses the model default.
    pub dt: Option<f64>,
}

struct MnsAtDelta {
    u: ComplexMatrix,
    j: f64,
    converged: bool,
}

fn mns_for_model(model: &LindbladModel, spec: &SweepSpec) -> Result<MnsAtDelta> {
    let dt = spec.dt.unwrap_or_else(|| model.default_dt());
    let channel = lindblad_to_kraus(model, dt)?;
    let r = search_dims(&channel, spec.dims, &spec.search)?;
    let converged = r.per_restart[r.best_restart].converged;
    Ok(MnsAtDelta {
        u: r.unitary()?,
        j: r.best_j,
        converged,
    })
}

/// Sweeps a model family, re-running the search wherever the model changes,
/// and compares the resulting encoding with `reference` by worst-case fidelity.
///
/// Per-point failures are reported in the point rather than aborting.
pub fn fidelity_sweep<F>(
    model_at: F,
    reference: &ComplexMatrix,
    spec: &SweepSpec,
) -> Result<Vec<FidelityPoint>>
where
    F: Fn(f64) -> Result<LindbladModel> + Sync,
{
    if spec.axis.values().is_empty() {
        return Err(MnsError::InvalidParameter("sweep grid is empty".into()));
    }
    let failed = |param: f64, e: MnsError| FidelityPoint {
        param,
        fi_mns: f64::NAN,
        fi_dfs: f64::NAN,
        j_opt: f64::NAN,
        converged: false,
        error: Some(e.to_string()),
    };
    let eval = |model: &LindbladModel, mns: &MnsAtDelta, t_final: f64| -> Result<(f64, f64)> {
        let evolved = evolve(model, t_final)?;
        let fi_mns = worst_case_fidelity(&mns.u, spec.dims, &evolved)?.fidelity;
        let fi_dfs = worst_case_fidelity(reference, spec.dims, &evolved)?.fidelity;
        Ok((fi_mns, fi_dfs))
    };
    let points = match &spec.axis {
        SweepAxis::Delta { values, t_final } => values
            .par_iter()
            .map(|&delta| {
                let run = || -> Result<FidelityPoint> {
                    let model = model_at(delta)?;
                    let mns = mns_for_model(&model, spec)?;
                    let (fi_mns, fi_dfs) = eval(&model, &mns, *t_final)?;
                    Ok(FidelityPoint {
                        param: delta,
                        fi_mns,
                        fi_dfs,
                        j_opt: mns.j,
                        converged: mns.converged,
                        error: None,
                    })
                };
                run().unwrap_or_else(|e| failed(delta, e))
            })
            .collect(),
        SweepAxis::Time { values, delta } => {
            let prepared = model_at(*delta).and_then(|m| mns_for_model(&m, spec).map(|s| (m, s)));
            match prepared {
                Err(e) => {
                    let msg = e.to_string();
                    values
                        .iter()
                        .map(|&t| failed(t, MnsError::InvalidParameter(msg.clone())))
                        .collect()
                }
                Ok((model, mns)) => values
                    .par_iter()
                    .map(|&t| match eval(&model, &mns, t) {
                        Ok((fi_mns, fi_dfs)) => FidelityPoint {
                            param: t,
                            fi_mns,
                            fi_dfs,
                            j_opt: mns.j,
                            converged: mns.converged,
                            error: None,
                        },
                        Err(e) => failed(t, e),
                    })
                    .collect(),
            }
        }
    };
    let mut points: Vec<FidelityPoint> = points;
    points.sort_by(|a, b| a.param.total_cmp(&b.param));
    Ok(points)
}
