//! Phase/angle chart of the unitary group `U(N)`.
//!
//! A unitary is built as
//!
//! ```text
//! U = D(phi_1..phi_N) * G_(0,1) * G_(0,2) * ... * G_(N-2,N-1)
//! ```
//!
//! with planes `(i, j)`, `i < j`, in lexicographic order. The rightmost factor
//! acts first on a state vector. Each two-level factor acts on the `(i, j)`
//! plane as
//!
//! ```text
//! [ cos t          -e^{i p} sin t ]
//! [ e^{-i p} sin t  cos t         ]
//! ```
//!
//! This uses `N(N-1)/2` mixing angles `t` and `N(N+1)/2` phases (`N` diagonal
//! phases followed by one relative phase `p` per plane).
//!
//! The flat parameter vector used by the optimizer is `phases ++ angles`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MnsError, Result};
use crate::tensor_algebra::{identity, ComplexMatrix, ZERO};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryParams {
    pub dim: usize,
    pub phases: Vec<f64>,
    pub angles: Vec<f64>,
}

pub fn phase_count(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

pub fn angle_count(dim: usize) -> usize {
    dim * dim.saturating_sub(1) / 2
}

/// Planes `(i, j)` with `i < j` in lexicographic order.
pub fn planes(dim: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..dim).flat_map(move |i| ((i + 1)..dim).map(move |j| (i, j)))
}

impl UnitaryParams {
    pub fn new(dim: usize, phases: Vec<f64>, angles: Vec<f64>) -> Result<Self> {
        let p = Self {
            dim,
            phases,
            angles,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            phases: vec![0.0; phase_count(dim)],
            angles: vec![0.0; angle_count(dim)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(MnsError::InvalidParameter(
                "unitary dimension must be >= 1".into(),
            ));
        }
        if self.phases.len() != phase_count(self.dim) || self.angles.len() != angle_count(self.dim)
        {
            return Err(MnsError::InvalidParameter(format!(
                "dimension {} needs {} phases and {} angles, got {} and {}",
                self.dim,
                phase_count(self.dim),
                angle_count(self.dim),
                self.phases.len(),
                self.angles.len()
            )));
        }
        if self
            .phases
            .iter()
            .chain(&self.angles)
            .any(|x| !x.is_finite())
        {
            return Err(MnsError::InvalidParameter("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Total number of real parameters, `N^2`.
    pub fn len(&self) -> usize {
        self.phases.len() + self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.phases.clone();
        v.extend_from_slice(&self.angles);
        v
    }

    pub fn from_flat(dim: usize, flat: &[f64]) -> Result<Self> {
        let np = phase_count(dim);
        if flat.len() != np + angle_count(dim) {
            return Err(MnsError::InvalidParameter(format!(
                "dimension {dim} needs {} parameters, got {}",
                np + angle_count(dim),
                flat.len()
            )));
        }
        Self::new(dim, flat[..np].to_vec(), flat[np..].to_vec())
    }

    pub fn realize(&self) -> Result<ComplexMatrix> {
        self.validate()?;
        Ok(realize_unchecked(self))
    }

    /// Diagonal phase factors.
    fn diagonal(&self) -> &[f64] {
        &self.phases[..self.dim]
    }

    /// Relative phases, one per plane.
    fn plane_phases(&self) -> &[f64] {
        &self.phases[self.dim..]
    }
}

fn realize_unchecked(params: &UnitaryParams) -> ComplexMatrix {
    let n = params.dim;
    let mut u = identity(n);
    // Right-to-left: apply the last plane first, each as a left row operation.
    let planes: Vec<(usize, usize)> = planes(n).collect();
    for (m, &(i, j)) in planes.iter().enumerate().rev() {
        apply_givens_left(&mut u, i, j, params.angles[m], params.plane_phases()[m]);
    }
    for (d, &phi) in params.diagonal().iter().enumerate() {
        if phi != 0.0 {
            let ph = Complex64::from_polar(1.0, phi);
            for col in 0..n {
                u[(d, col)] *= ph;
            }
        }
    }
    u
}

/// The 2x2 block of a plane factor as `(g_ii, g_ij, g_ji, g_jj)`.
fn givens_entries(theta: f64, phi: f64) -> (Complex64, Complex64, Complex64, Complex64) {
    let (s, c) = theta.sin_cos();
    if s == 0.0 && c == 1.0 {
        let one = Complex64::new(1.0, 0.0);
        return (one, ZERO, ZERO, one);
    }
    let e = Complex64::from_polar(1.0, phi);
    let cc = Complex64::new(c, 0.0);
    (cc, -e * s, e.conj() * s, cc)
}

/// `m <- G m` for the plane factor `G` in the `(i, j)` plane.
fn apply_givens_left(m: &mut ComplexMatrix, i: usize, j: usize, theta: f64, phi: f64) {
    if theta == 0.0 {
        return;
    }
    let (a, b, c, d) = givens_entries(theta, phi);
    for col in 0..m.ncols() {
        let xi = m[(i, col)];
        let xj = m[(j, col)];
        m[(i, col)] = a * xi + b * xj;
        m[(j, col)] = c * xi + d * xj;
    }
}

/// `m <- m G` for the plane factor `G` in the `(i, j)` plane.
fn apply_givens_right(m: &mut ComplexMatrix, i: usize, j: usize, theta: f64, phi: f64) {
    if theta == 0.0 {
        return;
    }
    let (a, b, c, d) = givens_entries(theta, phi);
    for row in 0..m.nrows() {
        let xi = m[(row, i)];
        let xj = m[(row, j)];
        m[(row, i)] = xi * a + xj * c;
        m[(row, j)] = xi * b + xj * d;
    }
}

/// Realizes `params`.
pub fn realize(params: &UnitaryParams) -> Result<ComplexMatrix> {
    params.realize()
}

/// `Tr(dU/d alpha_k * g)` for every flat parameter `alpha_k`.
///
/// Uses prefix/suffix products of the factorization, so the cost is
/// `O(N^2)` matrix products of size `N` rather than `N^2` realizations.
pub fn derivative_traces(params: &UnitaryParams, g: &ComplexMatrix) -> Result<Vec<Complex64>> {
    params.validate()?;
    let n = params.dim;
    if g.nrows() != n || g.ncols() != n {
        return Err(MnsError::InvalidDimension(format!(
            "weight matrix must be {n}x{n}, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    let planes: Vec<(usize, usize)> = planes(n).collect();
    let np = planes.len();

    // suffix[m] = G_{m+1} ... G_{M-1}, built right to left.
    let mut suffix = vec![identity(n); np + 1];
    for m in (0..np).rev() {
        let mut s = suffix[m + 1].clone();
        let (i, j) = planes[m];
        apply_givens_left(&mut s, i, j, params.angles[m], params.plane_phases()[m]);
        suffix[m] = s;
    }
    let u = {
        let mut u = suffix[0].clone();
        for (d, &phi) in params.diagonal().iter().enumerate() {
            let ph = Complex64::from_polar(1.0, phi);
            for col in 0..n {
                u[(d, col)] *= ph;
            }
        }
        u
    };

    let mut out = Vec::with_capacity(params.len());

    // Diagonal phases: dU/dphi_d = i e_d e_d^T U, so Tr(dU g) = i (U g)_dd.
    let ug = &u * g;
    for d in 0..n {
        out.push(Complex64::new(0.0, 1.0) * ug[(d, d)]);
    }

    // prefix = D G_0 ... G_{m-1}; weight w_m = suffix_after_m * g * prefix_m,
    // so Tr(prefix dG suffix g) = Tr(dG w_m).
    let mut prefix = identity(n);
    for (d, &phi) in params.diagonal().iter().enumerate() {
        prefix[(d, d)] = Complex64::from_polar(1.0, phi);
    }
    let mut phase_terms = Vec::with_capacity(np);
    let mut angle_terms = Vec::with_capacity(np);
    for (m, &(i, j)) in planes.iter().enumerate() {
        let theta = params.angles[m];
        let phi = params.plane_phases()[m];
        let w = &suffix[m + 1] * g * &prefix;
        let (s, c) = theta.sin_cos();
        let e = Complex64::from_polar(1.0, phi);
        let iu = Complex64::new(0.0, 1.0);
        // dG/dtheta on the plane.
        let dt = [
            Complex64::new(-s, 0.0),
            -e * c,
            e.conj() * c,
            Complex64::new(-s, 0.0),
        ];
        // dG/dphi on the plane.
        let dp = [ZERO, -iu * e * s, -iu * e.conj() * s, ZERO];
        let contract = |dg: &[Complex64; 4]| {
            dg[0] * w[(i, i)] + dg[1] * w[(j, i)] + dg[2] * w[(i, j)] + dg[3] * w[(j, j)]
        };
        angle_terms.push(contract(&dt));
        phase_terms.push(contract(&dp));
        apply_givens_right(&mut prefix, i, j, theta, phi);
    }
    out.extend(phase_terms);
    out.extend(angle_terms);
    Ok(out)
}

/// Recovers chart parameters of a unitary.
///
/// Column operations with the inverse plane factors, in reverse order, reduce
/// `u` to upper-triangular (hence diagonal) form; the diagonal gives the
/// leading phases. Returns an error if `u` is not unitary to `1e-8`.
pub fn decompose(u: &ComplexMatrix) -> Result<UnitaryParams> {
    if !u.is_square() || u.nrows() == 0 {
        return Err(MnsError::InvalidDimension(
            "unitary must be square and non-empty".into(),
        ));
    }
    let defect = crate::tensor_algebra::unitarity_defect(u);
    if defect > 1e-8 {
        return Err(MnsError::InvalidParameter(format!(
            "matrix is not unitary (defect {defect:.3e})"
        )));
    }
    let n = u.nrows();
    let planes: Vec<(usize, usize)> = planes(n).collect();
    let mut angles = vec![0.0; planes.len()];
    let mut plane_phases = vec![0.0; planes.len()];
    let mut w = u.clone();
    for m in (0..planes.len()).rev() {
        let (i, j) = planes[m];
        let x = w[(j, i)];
        let y = w[(j, j)];
        let theta = x.norm().atan2(y.norm());
        let phi = if x.norm() == 0.0 {
            0.0
        } else if y.norm() == 0.0 {
            -x.arg()
        } else {
            y.arg() - x.arg()
        };
        angles[m] = theta;
        plane_phases[m] = phi;
        // w <- w G^dagger, where G^dagger is the plane factor at (-theta, phi).
        apply_givens_right(&mut w, i, j, -theta, phi);
    }
    let mut phases: Vec<f64> = (0..n).map(|d| w[(d, d)].arg()).collect();
    phases.extend(plane_phases);
    UnitaryParams::new(n, phases, angles)
}

fn random_on_sphere<R: Rng + ?Sized>(len: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    loop {
        let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x * radius / norm).collect();
        }
    }
}

/// Parameters with uniformly random directions: the angle vector lies on the
/// sphere of radius `angle_norm` and the phase vector on the sphere of radius
/// `phase_norm`. A zero radius gives the zero vector.
pub fn random_params<R: Rng + ?Sized>(
    dim: usize,
    angle_norm: f64,
    phase_norm: f64,
    rng: &mut R,
) -> Result<UnitaryParams> {
    if !(angle_norm >= 0.0 && phase_norm >= 0.0) {
        return Err(MnsError::InvalidParameter(
            "norms must be nonnegative".into(),
        ));
    }
    let angles = random_on_sphere(angle_count(dim), angle_norm, rng);
    let phases = random_on_sphere(phase_count(dim), phase_norm, rng);
    UnitaryParams::new(dim, phases, angles)
}

/// Starting point for a search: phases uniform in `[0, 2 pi)`, angles uniform in `[0, pi)`.
pub fn random_start<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> UnitaryParams {
    let phases = (0..phase_count(dim))
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let angles = (0..angle_count(dim))
        .map(|_| rng.random_range(0.0..PI))
        .collect();
    UnitaryParams {
        dim,
        phases,
        angles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_algebra::unitarity_defect;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts() {
        assert_eq!(phase_count(8), 36);
        assert_eq!(angle_count(8), 28);
        assert_eq!(UnitaryParams::zeros(8).len(), 64);
        assert_eq!(angle_count(1), 0);
    }

    #[test]
    fn zero_params_realize_identity_exactly() {
        for n in 1..=8 {
            assert_eq!(UnitaryParams::zeros(n).realize().unwrap(), identity(n));
        }
    }

    #[test]
    fn wrong_lengths_rejected() {
        assert!(UnitaryParams::new(3, vec![0.0; 5], vec![0.0; 3]).is_err());
        assert!(UnitaryParams::from_flat(2, &[0.0; 3]).is_err());
    }

    #[test]
    fn single_plane_matches_closed_form() {
        let (theta, phi) = (0.7, -1.3);
        let p = UnitaryParams::new(2, vec![0.2, -0.4, phi], vec![theta]).unwrap();
        let u = p.realize().unwrap();
        let e = Complex64::from_polar(1.0, phi);
        let d0 = Complex64::from_polar(1.0, 0.2);
        let d1 = Complex64::from_polar(1.0, -0.4);
        let expected = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                d0 * theta.cos(),
                -d0 * e * theta.sin(),
                d1 * e.conj() * theta.sin(),
                d1 * theta.cos(),
            ],
        );
        assert!((u - expected).norm() < 1e-15);
    }

    #[test]
    fn decompose_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 3, 5, 8] {
            for _ in 0..5 {
                let p = random_start(n, &mut rng);
                let u = p.realize().unwrap();
                let q = decompose(&u).unwrap();
                let v = q.realize().unwrap();
                assert!((u - v).norm() < 1e-12, "dim {n}");
            }
        }
    }

    #[test]
    fn derivative_traces_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let p = random_start(n, &mut rng);
        let g = ComplexMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let analytic = derivative_traces(&p, &g).unwrap();
        let flat = p.to_flat();
        let h = 1e-6;
        for k in 0..flat.len() {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[k] += h;
            minus[k] -= h;
            let up = UnitaryParams::from_flat(n, &plus)
                .unwrap()
                .realize()
                .unwrap();
            let um = UnitaryParams::from_flat(n, &minus)
                .unwrap()
                .realize()
                .unwrap();
            let fd = ((up - um) * &g).trace() / (2.0 * h);
            assert!((fd - analytic[k]).norm() < 1e-8, "param {k}");
        }
    }

    #[test]
    fn random_params_norms_and_determinism() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(8, 0.1, 0.0, &mut a).unwrap();
        let q = random_params(8, 0.1, 0.0, &mut b).unwrap();
        assert_eq!(p, q);
        let norm = p.angles.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 0.1).abs() < 1e-15);
        assert!(p.phases.iter().all(|&x| x == 0.0));
        let mut c = ChaCha8Rng::seed_from_u64(4);
        assert_ne!(random_params(8, 0.1, 0.0, &mut c).unwrap(), p);
        let z = random_params(4, 0.0, 0.0, &mut c).unwrap();
        assert_eq!(z.realize().unwrap(), identity(4));
    }

    #[test]
    fn realize_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_start(5, &mut rng);
        let u = p.realize().unwrap();
        let mut flat = p.to_flat();
        for x in flat.iter_mut() {
            *x += 1e-9;
        }
        let v = UnitaryParams::from_flat(5, &flat)
            .unwrap()
            .realize()
            .unwrap();
        assert!((&u - &v).norm() < 1e-7);
        assert!(unitarity_defect(&v) < 1e-12);
    }
}
