//! Noise models in Lindblad form and their short-time Kraus representation.
//!
//! Qubit 0 is the leftmost tensor factor and `|0>` is the `+1` eigenvector of `Z`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MnsError, Result};
use crate::tensor_algebra::{
    commutator, direct_sum_embed, identity, pauli_x, pauli_z, single_qubit_operator, tensor,
    unitarity_defect, ComplexMatrix, ONE, ZERO,
};
use crate::unitary::random_params;

/// Threshold on the commutation defect below which an encoding is reported as decoherence-free.
pub const DFS_DEFECT_THRESHOLD: f64 = 1e-8;

/// Product `max(rate) * dt` used to pick the default Kraus time step.
pub const DEFAULT_RATE_DT: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct LindbladTerm {
    pub rate: f64,
    pub operator: ComplexMatrix,
}

/// Generator `rho' = sum_i rate_i D[V_i] rho` with `D[V] rho = V rho V^+ - {V^+ V, rho}/2`.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub n_qubits: usize,
    pub terms: Vec<LindbladTerm>,
}

impl LindbladModel {
    pub fn new(n_qubits: usize, terms: Vec<LindbladTerm>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(MnsError::InvalidParameter("need at least one qubit".into()));
        }
        let dim = 1usize << n_qubits;
        for (idx, t) in terms.iter().enumerate() {
            if !(t.rate >= 0.0) || !t.rate.is_finite() {
                return Err(MnsError::InvalidParameter(format!(
                    "term {idx} has invalid rate {}",
                    t.rate
                )));
            }
            if t.operator.nrows() != dim || t.operator.ncols() != dim {
                return Err(MnsError::InvalidDimension(format!(
                    "term {idx} operator is {}x{}, expected {dim}x{dim}",
                    t.operator.nrows(),
                    t.operator.ncols()
                )));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    /// A model with no noise terms.
    pub fn noiseless(n_qubits: usize) -> Result<Self> {
        Self::new(n_qubits, Vec::new())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn max_rate(&self) -> f64 {
        self.terms.iter().map(|t| t.rate).fold(0.0, f64::max)
    }

    /// Operators `sqrt(rate) * V` with the rate folded in.
    pub fn scaled_operators(&self) -> Vec<ComplexMatrix> {
        self.terms
            .iter()
            .filter(|t| t.rate > 0.0)
            .map(|t| t.operator.scale(t.rate.sqrt()))
            .collect()
    }

    /// `sum_i rate_i D[V_i] rho`.
    pub fn generator(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(rho.nrows(), rho.ncols());
        for v in self.scaled_operators() {
            let vd = v.adjoint();
            let vdv = &vd * &v;
            out += &v * rho * &vd - (&vdv * rho + rho * &vdv).scale(0.5);
        }
        out
    }

    /// Time step with `max(rate) * dt = 1e-3`; `1e-3` for a noiseless model.
    pub fn default_dt(&self) -> f64 {
        let r = self.max_rate();
        if r > 0.0 {
            DEFAULT_RATE_DT / r
        } else {
            DEFAULT_RATE_DT
        }
    }
}

/// `S_x = sum_k X_k`.
pub fn collective_x(n_qubits: usize) -> ComplexMatrix {
    collective(&pauli_x(), n_qubits)
}

/// `S_z = sum_k Z_k`.
pub fn collective_z(n_qubits: usize) -> ComplexMatrix {
    collective(&pauli_z(), n_qubits)
}

fn collective(op: &ComplexMatrix, n_qubits: usize) -> ComplexMatrix {
    let dim = 1 << n_qubits;
    (0..n_qubits).fold(ComplexMatrix::zeros(dim, dim), |acc, k| {
        acc + single_qubit_operator(op, k, n_qubits)
    })
}

fn check_rate(name: &str, rate: f64) -> Result<()> {
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(MnsError::InvalidParameter(format!(
            "{name} must be a finite nonnegative rate, got {rate}"
        )));
    }
    Ok(())
}

/// Collective model `gamma_x D[S_x] + gamma_z D[S_z]`.
pub fn collective_xz(n_qubits: usize, gamma_x: f64, gamma_z: f64) -> Result<LindbladModel> {
    check_rate("gamma_x", gamma_x)?;
    check_rate("gamma_z", gamma_z)?;
    LindbladModel::new(
        n_qubits,
        vec![
            LindbladTerm {
                rate: gamma_x,
                operator: collective_x(n_qubits),
            },
            LindbladTerm {
                rate: gamma_z,
                operator: collective_z(n_qubits),
            },
        ],
    )
}

/// `gamma_z D[S_z] + delta * sum_k gamma_k D[Z_k]`.
pub fn collective_z_with_local_dephasing(
    n_qubits: usize,
    gamma_z: f64,
    delta: f64,
    local_rates: &[f64],
) -> Result<LindbladModel> {
    check_rate("gamma_z", gamma_z)?;
    check_rate("delta", delta)?;
    if local_rates.len() != n_qubits {
        return Err(MnsError::InvalidParameter(format!(
            "expected {n_qubits} local rates, got {}",
            local_rates.len()
        )));
    }
    let mut terms = vec![LindbladTerm {
        rate: gamma_z,
        operator: collective_z(n_qubits),
    }];
    for (k, &g) in local_rates.iter().enumerate() {
        check_rate("local rate", g)?;
        terms.push(LindbladTerm {
            rate: delta * g,
            operator: single_qubit_operator(&pauli_z(), k, n_qubits),
        });
    }
    LindbladModel::new(n_qubits, terms)
}

/// `gamma1 D[V S_x V^+] + gamma2 D[S_z]` for a unitary perturbation `V`.
pub fn perturbed_collective(
    n_qubits: usize,
    gamma1: f64,
    gamma2: f64,
    v_eps: &ComplexMatrix,
) -> Result<LindbladModel> {
    check_rate("gamma1", gamma1)?;
    check_rate("gamma2", gamma2)?;
    let dim = 1 << n_qubits;
    if v_eps.nrows() != dim || v_eps.ncols() != dim {
        return Err(MnsError::InvalidParameter(format!(
            "perturbation must be {dim}x{dim}"
        )));
    }
    let defect = unitarity_defect(v_eps);
    if defect > 1e-10 {
        return Err(MnsError::InvalidParameter(format!(
            "perturbation is not unitary (defect {defect:.3e})"
        )));
    }
    let sx = v_eps * collective_x(n_qubits) * v_eps.adjoint();
    LindbladModel::new(
        n_qubits,
        vec![
            LindbladTerm {
                rate: gamma1,
                operator: sx,
            },
            LindbladTerm {
                rate: gamma2,
                operator: collective_z(n_qubits),
            },
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// One unitary on the full register.
    Global,
    /// Tensor product of independent single-qubit unitaries.
    LocalTensor,
}

/// Random unitary with zero phases and an angle vector of norm `delta` in a
/// uniformly random direction. In `LocalTensor` mode every qubit gets its own
/// 2x2 unitary whose angle vector has norm `delta`.
pub fn random_perturbation_unitary<R: Rng + ?Sized>(
    n_qubits: usize,
    delta: f64,
    mode: PerturbationMode,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    check_rate("delta", delta)?;
    match mode {
        PerturbationMode::Global => random_params(1 << n_qubits, delta, 0.0, rng)?.realize(),
        PerturbationMode::LocalTensor => {
            let mut out = identity(1);
            for _ in 0..n_qubits {
                let local = random_params(2, delta, 0.0, rng)?.realize()?;
                out = tensor(&out, &local);
            }
            Ok(out)
        }
    }
}

/// Seeded convenience wrapper around [`random_perturbation_unitary`].
pub fn seeded_perturbation_unitary(
    n_qubits: usize,
    delta: f64,
    mode: PerturbationMode,
    seed: u64,
) -> Result<ComplexMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_perturbation_unitary(n_qubits, delta, mode, &mut rng)
}

/// Channel in operator-sum form.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    pub dim: usize,
    pub operators: Vec<ComplexMatrix>,
    /// Time step of a short-time conversion; `None` for exact channels.
    pub dt: Option<f64>,
}

impl KrausChannel {
    pub fn new(operators: Vec<ComplexMatrix>, dt: Option<f64>) -> Result<Self> {
        let dim = operators.first().map(|e| e.nrows()).ok_or_else(|| {
            MnsError::InvalidParameter("channel needs at least one operator".into())
        })?;
        for e in &operators {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(MnsError::InvalidDimension(
                    "Kraus operators must share one square shape".into(),
                ));
            }
        }
        Ok(Self { dim, operators, dt })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            operators: vec![identity(dim)],
            dt: None,
        }
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// `sum_k E_k^+ E_k`.
    pub fn completeness(&self) -> ComplexMatrix {
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, e| {
                acc + e.adjoint() * e
            })
    }

    /// Frobenius norm of `sum_k E_k^+ E_k - I`.
    pub fn completeness_defect(&self) -> f64 {
        (self.completeness() - identity(self.dim)).norm()
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, e| {
                acc + e * rho * e.adjoint()
            })
    }
}

/// Short-time Kraus form: `E_0 = I - (dt/2) sum V^+V`, `E_k = sqrt(dt) V_k`,
/// with rates folded in as `V <- sqrt(rate) V`. Not renormalized: the
/// completeness defect is `O(dt^2)`.
pub fn lindblad_to_kraus(model: &LindbladModel, dt: f64) -> Result<KrausChannel> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(MnsError::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let dim = model.dim();
    let ops = model.scaled_operators();
    let mut e0 = identity(dim);
    for v in &ops {
        e0 -= (v.adjoint() * v).scale(0.5 * dt);
    }
    let mut operators = vec![e0];
    operators.extend(ops.into_iter().map(|v| v.scale(dt.sqrt())));
    KrausChannel::new(operators, Some(dt))
}

/// Outcome of a commutation test of a channel against an encoded block.
#[derive(Debug, Clone)]
pub struct DfsReport {
    /// `max_rho ||[E_k, rho]||_F` for each operator.
    pub per_operator: Vec<f64>,
    /// Maximum over operators.
    pub defect: f64,
    pub passed: bool,
}

/// Random density matrix on `dim` from a Ginibre sample.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    use rand_distr::{Distribution, StandardNormal};
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    rho.unscale(tr)
}

/// Random channel with `count` Kraus operators: Ginibre samples `G_k`
/// normalized as `G_k S^{-1/2}` with `S = sum G_k^+ G_k`.
pub fn random_kraus_channel<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Result<KrausChannel> {
    use rand_distr::{Distribution, StandardNormal};
    if dim == 0 || count == 0 {
        return Err(MnsError::InvalidDimension(
            "channel needs a positive dimension and operator count".into(),
        ));
    }
    let raw: Vec<ComplexMatrix> = (0..count)
        .map(|_| {
            ComplexMatrix::from_fn(dim, dim, |_, _| {
                Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
            })
        })
        .collect();
    let s = raw.iter().fold(ComplexMatrix::zeros(dim, dim), |acc, g| {
        acc + g.adjoint() * g
    });
    let eig = nalgebra::SymmetricEigen::new(s);
    let inv_sqrt = &eig.eigenvectors
        * ComplexMatrix::from_diagonal(
            &eig.eigenvalues.map(|l| Complex64::new(1.0 / l.sqrt(), 0.0)),
        )
        * eig.eigenvectors.adjoint();
    KrausChannel::new(raw.into_iter().map(|g| g * &inv_sqrt).collect(), None)
}

/// Encoded state `U^+ (rho1 (x) I/n2 (+) 0) U`.
pub fn encode_state(rho1: &ComplexMatrix, u: &ComplexMatrix, n2: usize) -> Result<ComplexMatrix> {
    let block = tensor(rho1, &identity(n2).unscale(n2 as f64));
    let embedded = direct_sum_embed(&block, u.nrows())?;
    Ok(u.adjoint() * embedded * u)
}

/// Checks `[E_k, rho] = 0` on random states encoded with `u` in an
/// `n1 x n2` block.
pub fn dfs_check(
    channel: &KrausChannel,
    u: &ComplexMatrix,
    n1: usize,
    n2: usize,
) -> Result<DfsReport> {
    dfs_check_with(channel, u, n1, n2, 16, 0x05ee_ddf5)
}

pub fn dfs_check_with(
    channel: &KrausChannel,
    u: &ComplexMatrix,
    n1: usize,
    n2: usize,
    samples: usize,
    seed: u64,
) -> Result<DfsReport> {
    if u.nrows() != channel.dim || n1 * n2 > channel.dim || n1 == 0 || n2 == 0 {
        return Err(MnsError::InvalidDimension(format!(
            "block {n1}x{n2} incompatible with channel dimension {}",
            channel.dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_operator = vec![0.0f64; channel.len()];
    for _ in 0..samples.max(1) {
        let rho1 = random_density_matrix(n1, &mut rng);
        let rho = encode_state(&rho1, u, n2)?;
        for (k, e) in channel.operators.iter().enumerate() {
            per_operator[k] = per_operator[k].max(commutator(e, &rho).norm());
        }
    }
    let defect = per_operator.iter().cloned().fold(0.0, f64::max);
    Ok(DfsReport {
        per_operator,
        defect,
        passed: defect <= DFS_DEFECT_THRESHOLD,
    })
}

/// Encoding unitary for the one-qubit decoherence-free subsystem of three
/// qubits under collective noise.
///
/// Rows 0..4 span the two spin-1/2 irreducible components, ordered as
/// `(multiplicity, m) = (0,+), (0,-), (1,+), (1,-)` so that collective
/// operators act as `I_2 (x) M` on the leading block. Rows 4..8 span the
/// spin-3/2 component.
pub fn collective_dfs_encoding_n3() -> ComplexMatrix {
    let basis = |bits: usize| {
        let mut v = nalgebra::DVector::from_element(8, ZERO);
        v[bits] = ONE;
        v
    };
    let s2 = 2f64.sqrt();
    let s6 = 6f64.sqrt();
    // m = +1/2 states (one excitation); |0> carries Z = +1.
    let a_plus = (basis(0b010) - basis(0b100)).unscale(s2);
    let b_plus = (basis(0b001).scale(2.0) - basis(0b010) - basis(0b100)).unscale(s6);
    // Collective lowering flips one |0> to |1>.
    let lower = {
        let sm = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]);
        (0..3).fold(ComplexMatrix::zeros(8, 8), |acc, k| {
            acc + single_qubit_operator(&sm, k, 3)
        })
    };
    let a_minus = {
        let v = &lower * &a_plus;
        let n = v.norm();
        v.unscale(n)
    };
    let b_minus = {
        let v = &lower * &b_plus;
        let n = v.norm();
        v.unscale(n)
    };
    let w = (basis(0b001) + basis(0b010) + basis(0b100)).unscale(3f64.sqrt());
    let wbar = (basis(0b110) + basis(0b101) + basis(0b011)).unscale(3f64.sqrt());
    let rows = [
        a_plus,
        a_minus,
        b_plus,
        b_minus,
        basis(0b000),
        w,
        wbar,
        basis(0b111),
    ];
    // U^+ has these vectors as columns, so U has their conjugates as rows.
    ComplexMatrix::from_fn(8, 8, |r, c| rows[r][c].conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_algebra::hermiticity_defect;

    #[test]
    fn single_qubit_collective_operators() {
        let m = collective_xz(1, 1.0, 2.0).unwrap();
        assert_eq!(m.terms[0].operator, pauli_x());
        assert_eq!(m.terms[1].operator, pauli_z());
    }

    #[test]
    fn three_qubit_sz_diagonal() {
        let sz = collective_z(3);
        let expected = [3.0, 1.0, 1.0, -1.0, 1.0, -1.0, -1.0, -3.0];
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { expected[i] } else { 0.0 };
                assert_eq!(sz[(i, j)], Complex64::new(want, 0.0));
            }
        }
        let sx = collective_x(3);
        assert_eq!(hermiticity_defect(&sx), 0.0);
        assert_eq!(sx.trace(), ZERO);
        assert_eq!(sz.trace(), ZERO);
    }

    #[test]
    fn negative_rates_rejected() {
        assert!(collective_xz(3, -1.0, 1.0).is_err());
        assert!(collective_z_with_local_dephasing(3, 1.0, 0.1, &[0.1, 0.2]).is_err());
        assert!(collective_z_with_local_dephasing(3, 1.0, -0.1, &[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn zero_delta_local_model_matches_collective_channel() {
        let a = collective_z_with_local_dephasing(3, 1.0, 0.0, &[0.33, 0.47, 0.85]).unwrap();
        let b = LindbladModel::new(
            3,
            vec![LindbladTerm {
                rate: 1.0,
                operator: collective_z(3),
            }],
        )
        .unwrap();
        let ka = lindblad_to_kraus(&a, 1e-3).unwrap();
        let kb = lindblad_to_kraus(&b, 1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density_matrix(8, &mut rng);
        assert!((ka.apply(&rho) - kb.apply(&rho)).norm() < 1e-15);
    }

    #[test]
    fn perturbed_collective_identity_recovers_collective() {
        let a = perturbed_collective(3, 0.7, 1.1, &identity(8)).unwrap();
        let b = collective_xz(3, 0.7, 1.1).unwrap();
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert_eq!(x.rate, y.rate);
            assert_eq!(x.operator, y.operator);
        }
        let not_unitary = identity(8).scale(1.1);
        assert!(perturbed_collective(3, 1.0, 1.0, &not_unitary).is_err());
    }

    #[test]
    fn kraus_for_single_qubit_dephasing() {
        let m = LindbladModel::new(
            1,
            vec![LindbladTerm {
                rate: 0.5,
                operator: pauli_z(),
            }],
        )
        .unwrap();
        let dt = 1e-3;
        let k = lindblad_to_kraus(&m, dt).unwrap();
        assert_eq!(k.len(), 2);
        assert!((&k.operators[0] - identity(2).scale(1.0 - 0.5 * dt / 2.0)).norm() < 1e-15);
        assert!((&k.operators[1] - pauli_z().scale((0.5 * dt).sqrt())).norm() < 1e-15);
        assert!(lindblad_to_kraus(&m, 0.0).is_err());
        assert!(lindblad_to_kraus(&m, -1.0).is_err());
    }

    #[test]
    fn empty_model_gives_identity_channel() {
        let k = lindblad_to_kraus(&LindbladModel::noiseless(2).unwrap(), 1e-3).unwrap();
        assert_eq!(k.len(), 1);
        assert_eq!(k.operators[0], identity(4));
    }

    #[test]
    fn local_tensor_perturbation_is_product() {
        let v = seeded_perturbation_unitary(3, 0.2, PerturbationMode::LocalTensor, 4).unwrap();
        assert!(unitarity_defect(&v) < 1e-12);
        let z = seeded_perturbation_unitary(3, 0.0, PerturbationMode::LocalTensor, 4).unwrap();
        assert_eq!(z, identity(8));
        let g = seeded_perturbation_unitary(3, 0.0, PerturbationMode::Global, 4).unwrap();
        assert_eq!(g, identity(8));
    }

    #[test]
    fn known_dfs_encoding_is_unitary_and_passes() {
        let u = collective_dfs_encoding_n3();
        assert!(unitarity_defect(&u) < 1e-14);
        let model = collective_xz(3, 1.0, 1.0).unwrap();
        let ch = lindblad_to_kraus(&model, model.default_dt()).unwrap();
        let report = dfs_check(&ch, &u, 2, 2).unwrap();
        assert!(report.passed);
        assert!(report.defect <= 1e-10, "defect {}", report.defect);
    }

    #[test]
    fn identity_channel_has_zero_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = crate::unitary::random_start(8, &mut rng).realize().unwrap();
        let r = dfs_check(&KrausChannel::identity(8), &u, 2, 2).unwrap();
        assert_eq!(r.defect, 0.0);
        assert!(r.passed);
    }
}
