//! Dense complex linear algebra used throughout the crate.
//!
//! Matrices are `nalgebra` dynamic matrices of `Complex64`. Dense spectral
//! decompositions are delegated to `nalgebra` (Schur, symmetric eigen, SVD);
//! the matrix-free leading-eigenvalue routine lives in [`arnoldi`].

pub mod arnoldi;

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use arnoldi::{leading_eigs, FnOperator, LinearOperator};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Gate for Hermiticity and unitarity checks (absolute, max-entry norm).
pub const STRUCTURE_TOL: f64 = 1e-10;

const SCHUR_EPS: f64 = 1e-15;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// `max |M - M^dagger|`.
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `max |U^dagger U - 1|`.
pub fn unitarity_deviation(u: &ComplexMatrix) -> f64 {
    identity_deviation(&(u.adjoint() * u))
}

/// `max |M - 1|`.
pub fn identity_deviation(m: &ComplexMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for ((i, j), z) in m.iter().enumerate().map(|(k, z)| ((k % m.nrows(), k / m.nrows()), z)) {
        let target = if i == j { ONE } else { ZERO };
        dev = dev.max((z - target).norm());
    }
    dev
}

pub fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn require_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Unitary discrete Fourier transform, `[F_N]_{kl} = exp(-2 pi i k l / N) / sqrt(N)`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            dim: n,
            reason: "DFT size must be positive",
        });
    }
    let scale = 1.0 / (n as f64).sqrt();
    // Reduce k*l mod N before forming the angle so the phase stays exact for large N.
    Ok(DMatrix::from_fn(n, n, |k, l| {
        let r = (k * l) % n;
        C64::from_polar(scale, -2.0 * PI * r as f64 / n as f64)
    }))
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

/// Eigendecomposition of a Hermitian matrix.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    let n = require_square(m)?;
    check_hermitian(m)?;
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or(
        Error::NotConverged {
            what: "Hermitian eigendecomposition",
            iterations: 0,
            residual: f64::NAN,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// Eigenvalues only, ascending. Cheaper than [`hermitian_eig`].
pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    require_square(m)?;
    check_hermitian(m)?;
    let mut values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !all_finite(m) {
        return Err(Error::NonFinite);
    }
    let deviation = hermiticity_deviation(m);
    if deviation > STRUCTURE_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// All eigenvalues of a general complex matrix, sorted with [`sort_spectrum`].
pub fn general_eig(m: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = require_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    if !all_finite(m) {
        return Err(Error::NonFinite);
    }
    let schur = nalgebra::Schur::try_new(m.clone(), SCHUR_EPS, schur_iteration_cap(n)).ok_or(
        Error::NotConverged {
            what: "complex Schur decomposition",
            iterations: schur_iteration_cap(n),
            residual: f64::NAN,
        },
    )?;
    let (_, t) = schur.unpack();
    let mut values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    sort_spectrum(&mut values);
    Ok(values)
}

/// All eigenvalues of a real matrix. Complex values come in exact conjugate
/// pairs because they are read off the 2x2 blocks of the real Schur form.
pub fn general_eig_real(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::NotSquare {
            rows: n,
            cols: m.ncols(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let schur = nalgebra::Schur::try_new(m.clone(), SCHUR_EPS, schur_iteration_cap(n)).ok_or(
        Error::NotConverged {
            what: "real Schur decomposition",
            iterations: schur_iteration_cap(n),
            residual: f64::NAN,
        },
    )?;
    let mut values: Vec<C64> = schur.complex_eigenvalues().iter().copied().collect();
    sort_spectrum(&mut values);
    Ok(values)
}

fn schur_iteration_cap(n: usize) -> usize {
    1000 * n.max(10)
}

/// Quantization applied before comparing moduli and real parts so that
/// values equal up to round-off sort by the tie-breakers instead.
const ORDER_QUANTUM: f64 = 1e10;

/// Ordering of spectra: descending modulus, then descending real part, then
/// descending imaginary part.
pub fn spectral_order(a: &C64, b: &C64) -> Ordering {
    let q = |x: f64| (x * ORDER_QUANTUM).round();
    q(b.norm())
        .total_cmp(&q(a.norm()))
        .then_with(|| q(b.re).total_cmp(&q(a.re)))
        .then_with(|| b.im.total_cmp(&a.im))
}

pub fn sort_spectrum(values: &mut [C64]) {
    values.sort_by(spectral_order);
}

/// Singular values of a complex matrix, descending.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let svd = nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, 0).ok_or(
        Error::NotConverged {
            what: "singular value decomposition",
            iterations: 0,
            residual: f64::NAN,
        },
    )?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn singular_values_real(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let svd = nalgebra::SVD::try_new(m.clone(), false, false, f64::EPSILON, 0).ok_or(
        Error::NotConverged {
            what: "singular value decomposition",
            iterations: 0,
            residual: f64::NAN,
        },
    )?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Number of singular values above `threshold`.
pub fn rank_above(singular_values: &[f64], threshold: f64) -> usize {
    singular_values.iter().filter(|&&s| s > threshold).count()
}

/// Kronecker product `a (x) b`, index `(i*nb + j, k*nb + l) -> a[i,k] * b[j,l]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Element-wise complex conjugate.
pub fn conj(m: &ComplexMatrix) -> ComplexMatrix {
    m.map(|z| z.conj())
}
