//! Dense complex matrices and the generalized Pauli basis.
//!
//! Composite indices follow the row-major Kronecker convention: for a product
//! space `H1 (x) H2` the basis vector `|a> (x) |b>` has index `a * n2 + b`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{MnsError, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance used for Hermiticity and orthonormality checks.
pub const BASIS_TOLERANCE: f64 = 1e-12;

pub fn identity(dim: usize) -> ComplexMatrix {
    ComplexMatrix::identity(dim, dim)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Kronecker product `a (x) b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Embeds a single-qubit operator on qubit `k` (0-based, leftmost factor is
/// qubit 0) of an `n_qubits` register.
pub fn single_qubit_operator(op: &ComplexMatrix, k: usize, n_qubits: usize) -> ComplexMatrix {
    assert!(
        k < n_qubits,
        "qubit index {k} out of range for {n_qubits} qubits"
    );
    let mut out = identity(1);
    for q in 0..n_qubits {
        out = if q == k {
            tensor(&out, op)
        } else {
            tensor(&out, &identity(2))
        };
    }
    out
}

/// Traces out the second factor of an `(n1*n2) x (n1*n2)` operator.
pub fn partial_trace_2(m: &ComplexMatrix, n1: usize, n2: usize) -> Result<ComplexMatrix> {
    check_square(m, n1 * n2)?;
    Ok(ComplexMatrix::from_fn(n1, n1, |a, b| {
        (0..n2).map(|j| m[(a * n2 + j, b * n2 + j)]).sum()
    }))
}

/// Traces out the first factor of an `(n1*n2) x (n1*n2)` operator.
pub fn partial_trace_1(m: &ComplexMatrix, n1: usize, n2: usize) -> Result<ComplexMatrix> {
    check_square(m, n1 * n2)?;
    Ok(ComplexMatrix::from_fn(n2, n2, |a, b| {
        (0..n1).map(|i| m[(i * n2 + a, i * n2 + b)]).sum()
    }))
}

/// Places `block` in the leading corner of a `total_dim x total_dim` zero matrix.
pub fn direct_sum_embed(block: &ComplexMatrix, total_dim: usize) -> Result<ComplexMatrix> {
    if !block.is_square() {
        return Err(MnsError::InvalidDimension(format!(
            "block must be square, got {}x{}",
            block.nrows(),
            block.ncols()
        )));
    }
    let d = block.nrows();
    if d > total_dim {
        return Err(MnsError::InvalidDimension(format!(
            "block of size {d} does not fit in dimension {total_dim}"
        )));
    }
    let mut out = zeros(total_dim, total_dim);
    out.view_mut((0, 0), (d, d)).copy_from(block);
    Ok(out)
}

/// Leading `d x d` block of a square matrix, i.e. `P m P` restricted to the range of `P`.
pub fn leading_block(m: &ComplexMatrix, d: usize) -> ComplexMatrix {
    m.view((0, 0), (d, d)).into_owned()
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.trace()
}

/// Frobenius norm of `m - m^dagger`.
pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

/// Frobenius norm of `u^dagger u - I`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    (u.adjoint() * u - identity(u.nrows())).norm()
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn check_square(m: &ComplexMatrix, expected: usize) -> Result<()> {
    if m.nrows() != expected || m.ncols() != expected {
        return Err(MnsError::InvalidDimension(format!(
            "expected a {expected}x{expected} matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Orthonormal Hermitian operator basis on a `dim`-dimensional space.
///
/// Element 0 is `I / sqrt(dim)`. It is followed by the normalized generalized
/// Gell-Mann matrices: symmetric `(|j><k| + |k><j|)/sqrt2` for `j < k` in
/// lexicographic order, antisymmetric `-i(|j><k| - |k><j|)/sqrt2` in the same
/// order, then the diagonal family for `l = 1..dim`.
#[derive(Debug, Clone)]
pub struct PauliBasis {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl PauliBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(MnsError::InvalidDimension(
                "Pauli basis needs dimension >= 1".into(),
            ));
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut elements = Vec::with_capacity(dim * dim);
        elements.push(identity(dim).scale(1.0 / (dim as f64).sqrt()));
        for j in 0..dim {
            for k in (j + 1)..dim {
                let mut m = zeros(dim, dim);
                m[(j, k)] = Complex64::new(inv_sqrt2, 0.0);
                m[(k, j)] = Complex64::new(inv_sqrt2, 0.0);
                elements.push(m);
            }
        }
        for j in 0..dim {
            for k in (j + 1)..dim {
                let mut m = zeros(dim, dim);
                m[(j, k)] = Complex64::new(0.0, -inv_sqrt2);
                m[(k, j)] = Complex64::new(0.0, inv_sqrt2);
                elements.push(m);
            }
        }
        for l in 1..dim {
            let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut m = zeros(dim, dim);
            for i in 0..l {
                m[(i, i)] = Complex64::new(norm, 0.0);
            }
            m[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
            elements.push(m);
        }
        debug_assert_eq!(elements.len(), dim * dim);
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn get(&self, index: usize) -> &ComplexMatrix {
        &self.elements[index]
    }

    /// `Tr(sigma_m sigma_n)` for all pairs.
    pub fn gram_matrix(&self) -> ComplexMatrix {
        let n = self.len();
        ComplexMatrix::from_fn(n, n, |m, k| (&self.elements[m] * &self.elements[k]).trace())
    }

    /// Expansion coefficients `Tr(m sigma_n)` of an operator.
    pub fn coefficients(&self, m: &ComplexMatrix) -> Vec<Complex64> {
        self.elements.iter().map(|s| (m * s).trace()).collect()
    }
}

/// Convenience wrapper for [`PauliBasis::new`].
pub fn pauli_basis(dim: usize) -> Result<PauliBasis> {
    PauliBasis::new(dim)
}
