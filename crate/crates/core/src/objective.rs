//! Encoded channel, reduced channel on the logical factor and the objective.
//!
//! For an encoding `U` and a block shape `(n1, n2, n3)` the logical state
//! `rho1` is stored as `U^+ (rho1 (x) I/n2 (+) 0_n3) U`. Writing `B_k` for the
//! leading `n1*n2` block of `U E_k U^+`, the objective is
//!
//! ```text
//! J[U] = 1/(n1 n2) sum_k sum_n |Tr(B_k sigma_0 (x) sigma_n)|^2
//!      = 1/(n1^2 n2) sum_k ||Tr_1 B_k||_F^2
//! ```
//!
//! where `n` runs over all `n2^2` basis elements of the second factor.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MnsError, Result};
use crate::noise::KrausChannel;
use crate::tensor_algebra::{
    direct_sum_embed, identity, leading_block, partial_trace_1, partial_trace_2, tensor,
    ComplexMatrix, PauliBasis, ZERO,
};
use crate::unitary::{derivative_traces, UnitaryParams};

/// Floor on Choi eigenvalues of a reduced channel before it is declared inconsistent.
pub const CHOI_EIGENVALUE_FLOOR: f64 = -1e-9;

/// Block shape `N = n1*n2 + n3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EncodingDims {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl EncodingDims {
    pub fn new(n1: usize, n2: usize, total: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(MnsError::InvalidDimension(format!(
                "block factors must be >= 1, got ({n1}, {n2})"
            )));
        }
        if n1 * n2 > total {
            return Err(MnsError::InvalidDimension(format!(
                "block {n1}x{n2} does not fit in dimension {total}"
            )));
        }
        Ok(Self {
            n1,
            n2,
            n3: total - n1 * n2,
        })
    }

    pub fn total(&self) -> usize {
        self.n1 * self.n2 + self.n3
    }

    pub fn block(&self) -> usize {
        self.n1 * self.n2
    }
}

impl std::fmt::Display for EncodingDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.n1, self.n2, self.n3)
    }
}

/// A point in the search space together with its realized unitary.
#[derive(Debug, Clone)]
pub struct EncodingCandidate {
    pub dims: EncodingDims,
    pub params: UnitaryParams,
    unitary: ComplexMatrix,
}

impl EncodingCandidate {
    pub fn new(dims: EncodingDims, params: UnitaryParams) -> Result<Self> {
        if params.dim != dims.total() {
            return Err(MnsError::InvalidDimension(format!(
                "parameters of dimension {} for block shape {dims}",
                params.dim
            )));
        }
        let unitary = params.realize()?;
        Ok(Self {
            dims,
            params,
            unitary,
        })
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    /// Projector `U^+ P U` onto the encoded block in the original basis.
    pub fn projector(&self) -> ComplexMatrix {
        encoded_projector(&self.unitary, self.dims)
    }
}

/// `U^+ P U` with `P` the projector on the leading `n1*n2` coordinates.
pub fn encoded_projector(u: &ComplexMatrix, dims: EncodingDims) -> ComplexMatrix {
    let b = dims.block();
    let rows = u.rows(0, b);
    rows.adjoint() * rows
}

/// `{U E_k U^+}`.
pub fn transformed_kraus(channel: &KrausChannel, u: &ComplexMatrix) -> Vec<ComplexMatrix> {
    let ud = u.adjoint();
    channel.operators.iter().map(|e| u * e * &ud).collect()
}

fn check_dims(channel: &KrausChannel, dims: EncodingDims) -> Result<()> {
    if channel.dim != dims.total() {
        return Err(MnsError::InvalidDimension(format!(
            "channel dimension {} does not match block shape {dims}",
            channel.dim
        )));
    }
    Ok(())
}

/// Expansion coefficients `a[k][m][n] = Tr(B_k sigma_m (x) sigma_n)`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub dims: EncodingDims,
    /// One `n1^2 x n2^2` matrix per Kraus operator, indexed `[(m, n)]`.
    pub per_operator: Vec<ComplexMatrix>,
}

impl Coefficients {
    pub fn get(&self, k: usize, m: usize, n: usize) -> Complex64 {
        self.per_operator[k][(m, n)]
    }

    /// `sum_mn a[k][m][n] sigma_m (x) sigma_n`.
    pub fn reconstruct(&self, k: usize) -> Result<ComplexMatrix> {
        let b1 = PauliBasis::new(self.dims.n1)?;
        let b2 = PauliBasis::new(self.dims.n2)?;
        let d = self.dims.block();
        let mut out = ComplexMatrix::zeros(d, d);
        for (m, s1) in b1.elements().iter().enumerate() {
            for (n, s2) in b2.elements().iter().enumerate() {
                let a = self.get(k, m, n);
                if a != ZERO {
                    out += tensor(s1, s2) * a;
                }
            }
        }
        Ok(out)
    }

    /// `1/(n1 n2) sum_k sum_n |a[k][0][n]|^2`.
    pub fn identity_weight(&self) -> f64 {
        let norm = (self.dims.n1 * self.dims.n2) as f64;
        self.per_operator
            .iter()
            .map(|a| a.row(0).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / norm
    }
}

pub fn coefficients(channel: &KrausChannel, candidate: &EncodingCandidate) -> Result<Coefficients> {
    check_dims(channel, candidate.dims)?;
    let dims = candidate.dims;
    let b1 = PauliBasis::new(dims.n1)?;
    let b2 = PauliBasis::new(dims.n2)?;
    let products: Vec<Vec<ComplexMatrix>> = b1
        .elements()
        .iter()
        .map(|s1| b2.elements().iter().map(|s2| tensor(s1, s2)).collect())
        .collect();
    let per_operator = transformed_kraus(channel, candidate.unitary())
        .iter()
        .map(|op| {
            let block = leading_block(op, dims.block());
            ComplexMatrix::from_fn(b1.len(), b2.len(), |m, n| {
                // Tr(block * s) for Hermitian s is the Frobenius pairing <s, block>.
                block
                    .iter()
                    .zip(products[m][n].iter())
                    .map(|(x, s)| x * s.conj())
                    .sum()
            })
        })
        .collect();
    Ok(Coefficients { dims, per_operator })
}

/// Objective evaluator for one channel and block shape, working on flat parameter vectors.
#[derive(Debug, Clone)]
pub struct Objective {
    dims: EncodingDims,
    operators: Vec<ComplexMatrix>,
    adjoints: Vec<ComplexMatrix>,
}

impl Objective {
    pub fn new(channel: &KrausChannel, dims: EncodingDims) -> Result<Self> {
        check_dims(channel, dims)?;
        Ok(Self {
            dims,
            adjoints: channel.operators.iter().map(|e| e.adjoint()).collect(),
            operators: channel.operators.clone(),
        })
    }

    pub fn dims(&self) -> EncodingDims {
        self.dims
    }

    pub fn num_params(&self) -> usize {
        self.dims.total() * self.dims.total()
    }

    fn scale(&self) -> f64 {
        let n1 = self.dims.n1 as f64;
        1.0 / (n1 * n1 * self.dims.n2 as f64)
    }

    /// `Tr_1` of the leading block of `U E U^+`, computed from the leading rows of `U`.
    fn reduced_blocks(&self, u: &ComplexMatrix) -> Vec<ComplexMatrix> {
        let b = self.dims.block();
        let rows = u.rows(0, b).into_owned();
        let rows_d = rows.adjoint();
        self.operators
            .iter()
            .map(|e| {
                let block = &rows * e * &rows_d;
                partial_trace_1(&block, self.dims.n1, self.dims.n2).expect("block shape")
            })
            .collect()
    }

    pub fn value_at_unitary(&self, u: &ComplexMatrix) -> f64 {
        self.scale()
            * self
                .reduced_blocks(u)
                .iter()
                .map(|c| c.norm_squared())
                .sum::<f64>()
    }

    pub fn value(&self, flat: &[f64]) -> Result<f64> {
        let p = UnitaryParams::from_flat(self.dims.total(), flat)?;
        Ok(self.value_at_unitary(&p.realize()?))
    }

    /// Value and analytic gradient with respect to the flat parameters.
    pub fn value_and_gradient(&self, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.dims.total();
        let p = UnitaryParams::from_flat(n, flat)?;
        let u = p.realize()?;
        let reduced = self.reduced_blocks(&u);
        let value = self.scale() * reduced.iter().map(|c| c.norm_squared()).sum::<f64>();
        // dJ = 2 s Re Tr(dU W), W = sum_k E_k U^+ C_k^+ + E_k^+ U^+ C_k,
        // with C_k = embed(I_n1 (x) Tr_1 B_k).
        let ud = u.adjoint();
        let mut w = ComplexMatrix::zeros(n, n);
        for ((c, e), ed) in reduced.iter().zip(&self.operators).zip(&self.adjoints) {
            let lifted = direct_sum_embed(&tensor(&identity(self.dims.n1), c), n)?;
            let ud_c = &ud * &lifted;
            w += e * (&ud * lifted.adjoint()) + ed * ud_c;
        }
        let traces = derivative_traces(&p, &w)?;
        let s2 = 2.0 * self.scale();
        Ok((value, traces.iter().map(|t| s2 * t.re).collect()))
    }

    /// Central finite-difference gradient with step `h`.
    pub fn finite_difference_gradient(&self, flat: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut x = flat.to_vec();
        let mut g = Vec::with_capacity(flat.len());
        for k in 0..flat.len() {
            let orig = x[k];
            x[k] = orig + h;
            let up = self.value(&x)?;
            x[k] = orig - h;
            let down = self.value(&x)?;
            x[k] = orig;
            g.push((up - down) / (2.0 * h));
        }
        Ok(g)
    }
}

/// Objective `J[U] = p1` for a candidate.
pub fn objective(channel: &KrausChannel, candidate: &EncodingCandidate) -> Result<f64> {
    Ok(Objective::new(channel, candidate.dims)?.value_at_unitary(candidate.unitary()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GradientMethod {
    /// Per-factor derivatives of the unitary chart.
    Analytic,
    /// Central differences with the given step.
    CentralDifference { step: f64 },
}

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

impl Default for GradientMethod {
    fn default() -> Self {
        GradientMethod::CentralDifference {
            step: DEFAULT_FD_STEP,
        }
    }
}

/// Gradient of `J` with respect to the flat parameters of `candidate`.
pub fn gradient(
    channel: &KrausChannel,
    candidate: &EncodingCandidate,
    method: GradientMethod,
) -> Result<Vec<f64>> {
    let obj = Objective::new(channel, candidate.dims)?;
    let flat = candidate.params.to_flat();
    match method {
        GradientMethod::Analytic => Ok(obj.value_and_gradient(&flat)?.1),
        GradientMethod::CentralDifference { step } => obj.finite_difference_gradient(&flat, step),
    }
}

/// Reduced channel on the logical factor, in a Kraus form whose leading
/// operator carries the whole trace.
///
/// `leading_op` satisfies `Tr(leading_op) = n1 sqrt(p1)` and every residual
/// operator is traceless. When the leading operator is proportional to the
/// identity this is exactly `E1(rho) = p1 rho + sum_k A_k rho A_k^+`.
#[derive(Debug, Clone)]
pub struct ReducedChannel {
    pub n1: usize,
    pub p1: f64,
    pub leading_op: ComplexMatrix,
    pub residual_ops: Vec<ComplexMatrix>,
    /// Choi matrix `sum_ij |i><j| (x) E1(|i><j|)`.
    pub choi: ComplexMatrix,
}

impl ReducedChannel {
    pub fn apply(&self, rho1: &ComplexMatrix) -> ComplexMatrix {
        let mut out = &self.leading_op * rho1 * self.leading_op.adjoint();
        for a in &self.residual_ops {
            out += a * rho1 * a.adjoint();
        }
        out
    }

    /// `||leading_op - sqrt(p1) I||_F` after removing the global phase of the
    /// leading operator; zero when the reduced channel has the pure form
    /// `p1 rho + sum A rho A^+`.
    pub fn identity_defect(&self) -> f64 {
        let tr = self.leading_op.trace();
        let phase = if tr.norm() > 0.0 {
            tr.conj() / tr.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        (&self.leading_op * phase - identity(self.n1).scale(self.p1.max(0.0).sqrt())).norm()
    }
}

/// Applies the reduced map directly: encode, undo the encoding, apply the
/// channel, re-encode, project onto the block and trace out the second factor.
pub fn reduced_action(
    channel: &KrausChannel,
    u: &ComplexMatrix,
    dims: EncodingDims,
    rho1: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    check_dims(channel, dims)?;
    let encoded = direct_sum_embed(
        &tensor(rho1, &identity(dims.n2).unscale(dims.n2 as f64)),
        dims.total(),
    )?;
    let original = u.adjoint() * encoded * u;
    let evolved = channel.apply(&original);
    let back = u * evolved * u.adjoint();
    partial_trace_2(&leading_block(&back, dims.block()), dims.n1, dims.n2)
}

pub fn reduced_channel(
    channel: &KrausChannel,
    candidate: &EncodingCandidate,
) -> Result<ReducedChannel> {
    let dims = candidate.dims;
    let n1 = dims.n1;
    let mut choi = ComplexMatrix::zeros(n1 * n1, n1 * n1);
    for i in 0..n1 {
        for j in 0..n1 {
            let mut unit = ComplexMatrix::zeros(n1, n1);
            unit[(i, j)] = Complex64::new(1.0, 0.0);
            let out = reduced_action(channel, candidate.unitary(), dims, &unit)?;
            choi.view_mut((i * n1, j * n1), (n1, n1)).copy_from(&out);
        }
    }
    // Hermitize against roundoff before the eigensolver.
    let choi = (&choi + choi.adjoint()).scale(0.5);

    // p1 = <Omega|C|Omega> / n1^2 with Omega = sum_i |i>|i>.
    let omega = DVector::from_fn(n1 * n1, |r, _| {
        if r / n1 == r % n1 {
            Complex64::new(1.0, 0.0)
        } else {
            ZERO
        }
    });
    let p1 = (omega.adjoint() * &choi * &omega)[(0, 0)].re / (n1 * n1) as f64;

    let eig = SymmetricEigen::new(choi.clone());
    let scale = choi.norm().max(1.0);
    let mut kraus = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < CHOI_EIGENVALUE_FLOOR * scale {
            return Err(MnsError::NumericalConsistency(format!(
                "reduced channel Choi eigenvalue {lambda:.3e} below floor"
            )));
        }
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        // K[a, i] = sqrt(lambda) v[i*n1 + a]
        kraus.push(ComplexMatrix::from_fn(n1, n1, |a, i| {
            v[i * n1 + a] * lambda.sqrt()
        }));
    }

    // Rotate the Kraus set so that one operator carries the whole trace.
    let traces: Vec<Complex64> = kraus.iter().map(|k| k.trace()).collect();
    let tnorm = traces.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
    let (leading_op, residual_ops) = if tnorm == 0.0 || kraus.is_empty() {
        (ComplexMatrix::zeros(n1, n1), kraus)
    } else {
        let r = kraus.len();
        let u0: Vec<Complex64> = traces.iter().map(|t| t.conj() / tnorm).collect();
        let rows = complete_orthonormal_rows(&u0);
        let combine = |row: &[Complex64]| {
            row.iter()
                .zip(&kraus)
                .fold(ComplexMatrix::zeros(n1, n1), |acc, (c, k)| acc + k * *c)
        };
        let leading = combine(&u0);
        let residual: Vec<ComplexMatrix> = rows
            .iter()
            .map(|row| combine(row))
            .filter(|k| k.norm() > 1e-15 * scale)
            .collect();
        debug_assert!(rows.len() == r - 1);
        (leading, residual)
    };
    Ok(ReducedChannel {
        n1,
        p1,
        leading_op,
        residual_ops,
        choi,
    })
}

/// Orthonormal rows completing the unit row `first` to a unitary (the rows
/// after the first), taken from a Householder reflection.
fn complete_orthonormal_rows(first: &[Complex64]) -> Vec<Vec<Complex64>> {
    let r = first.len();
    // H = I - 2 w w^+ / |w|^2 maps alpha e0 to x = conj(first), so rows 1.. of
    // the Hermitian H are orthogonal to first.
    let x: Vec<Complex64> = first.iter().map(|z| z.conj()).collect();
    let alpha = if x[0].norm() > 0.0 {
        x[0] / x[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut w = x.clone();
    w[0] -= alpha;
    let wn = w.iter().map(|z| z.norm_sqr()).sum::<f64>();
    (1..r)
        .map(|m| {
            (0..r)
                .map(|k| {
                    let delta = if m == k {
                        Complex64::new(1.0, 0.0)
                    } else {
                        ZERO
                    };
                    if wn > 0.0 {
                        delta - w[m] * w[k].conj() * (2.0 / wn)
                    } else {
                        delta
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{
        collective_dfs_encoding_n3, collective_xz, lindblad_to_kraus, random_density_matrix,
        random_kraus_channel,
    };
    use crate::unitary::{decompose, random_start};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn candidate(n1: usize, n2: usize, n: usize, rng: &mut ChaCha8Rng) -> EncodingCandidate {
        EncodingCandidate::new(EncodingDims::new(n1, n2, n).unwrap(), random_start(n, rng)).unwrap()
    }

    #[test]
    fn dims_validation() {
        assert!(EncodingDims::new(3, 3, 8).is_err());
        assert!(EncodingDims::new(0, 1, 8).is_err());
        assert_eq!(EncodingDims::new(2, 2, 8).unwrap().n3, 4);
    }

    #[test]
    fn identity_channel_has_unit_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n1, n2) in [(2, 1), (2, 2), (3, 1), (2, 4)] {
            let c = candidate(n1, n2, 8, &mut rng);
            let ch = KrausChannel::identity(8);
            assert!((objective(&ch, &c).unwrap() - 1.0).abs() < 1e-12);
            let a = coefficients(&ch, &c).unwrap();
            let expected = ((n1 * n2) as f64).sqrt();
            assert!((a.get(0, 0, 0).re - expected).abs() < 1e-12);
            let rest: f64 = a.per_operator[0].iter().skip(1).map(|z| z.norm()).sum();
            assert!(rest < 1e-12);
            let r = reduced_channel(&ch, &c).unwrap();
            let rho = random_density_matrix(n1, &mut rng);
            assert!((r.apply(&rho) - &rho).norm() < 1e-12);
            assert!(r.identity_defect() < 1e-10);
        }
    }

    #[test]
    fn transformed_kraus_preserves_completeness_and_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = random_kraus_channel(8, 3, &mut rng).unwrap();
        let u = random_start(8, &mut rng).realize().unwrap();
        let t = transformed_kraus(&ch, &u);
        let s = t
            .iter()
            .fold(ComplexMatrix::zeros(8, 8), |acc, e| acc + e.adjoint() * e);
        assert!((s - &u * ch.completeness() * u.adjoint()).norm() < 1e-12);
        for (a, b) in ch.operators.iter().zip(&t) {
            let sa = a.clone().singular_values();
            let sb = b.clone().singular_values();
            assert!((sa - sb).norm() < 1e-12);
        }
        assert_eq!(transformed_kraus(&ch, &identity(8))[1], ch.operators[1]);
    }

    #[test]
    fn coefficients_reconstruct_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_kraus_channel(8, 3, &mut rng).unwrap();
        let c = candidate(2, 2, 8, &mut rng);
        let a = coefficients(&ch, &c).unwrap();
        for (k, op) in transformed_kraus(&ch, c.unitary()).iter().enumerate() {
            let rec = a.reconstruct(k).unwrap();
            assert!((rec - leading_block(op, 4)).norm() < 1e-12);
        }
        assert!((a.identity_weight() - objective(&ch, &c).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn hermitian_operators_have_real_coefficients() {
        let model = collective_xz(3, 1.0, 0.5).unwrap();
        let ch = lindblad_to_kraus(&model, 1e-3).unwrap();
        let c =
            EncodingCandidate::new(EncodingDims::new(2, 2, 8).unwrap(), UnitaryParams::zeros(8))
                .unwrap();
        let a = coefficients(&ch, &c).unwrap();
        for m in &a.per_operator {
            assert!(m.iter().all(|z| z.im.abs() < 1e-12));
        }
    }

    #[test]
    fn objective_matches_reduced_channel_p1() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (n1, n2) in [(2, 2), (2, 1), (3, 1), (2, 3)] {
            let ch = random_kraus_channel(8, 3, &mut rng).unwrap();
            let c = candidate(n1, n2, 8, &mut rng);
            let j = objective(&ch, &c).unwrap();
            let r = reduced_channel(&ch, &c).unwrap();
            assert!((j - r.p1).abs() < 1e-10, "({n1},{n2}) {j} vs {}", r.p1);
            let rho = random_density_matrix(n1, &mut rng);
            let direct = reduced_action(&ch, c.unitary(), c.dims, &rho).unwrap();
            assert!((r.apply(&rho) - &direct).norm() < 1e-10);
            assert!(direct.trace().re <= 1.0 + 1e-10);
            assert!((r.leading_op.trace().norm() - n1 as f64 * r.p1.sqrt()).abs() < 1e-10);
            for a in &r.residual_ops {
                assert!(
                    a.trace().norm() < 1e-10,
                    "({n1},{n2}) residual trace {}",
                    a.trace()
                );
            }
        }
    }

    #[test]
    fn dfs_encoding_gives_unit_objective() {
        let model = collective_xz(3, 1.0, 1.0).unwrap();
        let dt = model.default_dt();
        let ch = lindblad_to_kraus(&model, dt).unwrap();
        let u = collective_dfs_encoding_n3();
        let dims = EncodingDims::new(2, 2, 8).unwrap();
        let c = EncodingCandidate::new(dims, decompose(&u).unwrap()).unwrap();
        let j = objective(&ch, &c).unwrap();
        // (1 - dt*Gamma/2)^2 + dt*Gamma with Gamma = gamma_x + gamma_z.
        let gamma = 2.0;
        let expected = (1.0 - 0.5 * dt * gamma).powi(2) + dt * gamma;
        assert!((j - expected).abs() < 1e-12, "{j}");
        let r = reduced_channel(&ch, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density_matrix(2, &mut rng);
        assert!((r.apply(&rho) - rho.scale(expected)).norm() < 1e-12);
        let g = gradient(&ch, &c, GradientMethod::Analytic).unwrap();
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6);
        let g = gradient(&ch, &c, GradientMethod::default()).unwrap();
        assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-6);
        // Pauli-basis instance: 1/8 sum_k sum_n |Tr(B_k (I_2 (x) sigma_n))|^2.
        let b2 = PauliBasis::new(2).unwrap();
        let mut alt = 0.0;
        for op in transformed_kraus(&ch, c.unitary()) {
            let block = leading_block(&op, 4);
            for s in b2.elements() {
                alt += (&block * tensor(&identity(2), s)).trace().norm_sqr();
            }
        }
        assert!((alt / 8.0 - j).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = random_kraus_channel(8, 3, &mut rng).unwrap();
        let c = candidate(2, 2, 8, &mut rng);
        let a = gradient(&ch, &c, GradientMethod::Analytic).unwrap();
        let f = gradient(&ch, &c, GradientMethod::CentralDifference { step: 1e-6 }).unwrap();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff = a
            .iter()
            .zip(&f)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-6 * na, "{diff} vs {na}");
    }

    #[test]
    fn global_phase_direction_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = random_kraus_channel(8, 2, &mut rng).unwrap();
        let c = candidate(2, 2, 8, &mut rng);
        let g = gradient(&ch, &c, GradientMethod::Analytic).unwrap();
        // Shifting all diagonal phases together multiplies U by a global phase.
        let along: f64 = g[..8].iter().sum();
        assert!(along.abs() < 1e-12);
    }
}
