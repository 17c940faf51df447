//! Quantum operators and channels for the sloppy baker map.
//!
//! Conventions: position states `|n>`, `n = 0..N-1`, are the computational
//! basis. Momentum states are `<n|k> = exp(2 pi i k n / N) / sqrt(N)`, so the
//! DFT matrix `F_N` maps position amplitudes to momentum amplitudes. Momentum
//! index `k` sits at `p = k / N`; the bottom half of the square is
//! `k < N/2`. The momentum translation `V|k> = |k+1>` is then the diagonal
//! phase `diag(exp(2 pi i n / N))` in position.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{
    all_finite, dft_matrix, hermiticity_deviation, hermitian_eigenvalues, identity_deviation, require_square,
    ComplexMatrix, ComplexVector, C64, ONE, STRUCTURE_TOL, ZERO,
};

/// Completeness gate for Kraus families.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as round-off.
pub const POSITIVITY_FLOOR: f64 = -1e-10;

fn require_even(n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidDimension {
            dim: n,
            reason: "Hilbert-space dimension must be even and at least 2",
        });
    }
    Ok(())
}

/// `B = F_N^dagger diag(F_{N/2}, F_{N/2})`.
pub fn balazs_voros(n: usize) -> Result<ComplexMatrix> {
    require_even(n)?;
    let half = n / 2;
    let fh = dft_matrix(half)?;
    let mut blocks = ComplexMatrix::zeros(n, n);
    blocks.view_mut((0, 0), (half, half)).copy_from(&fh);
    blocks.view_mut((half, half), (half, half)).copy_from(&fh);
    Ok(dft_matrix(n)?.adjoint() * blocks)
}

/// Projectors onto the bottom (`k < N/2`) and top (`k >= N/2`) momentum halves.
pub fn momentum_projectors(n: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    require_even(n)?;
    let f = dft_matrix(n)?;
    let half = n / 2;
    let mut bottom = ComplexMatrix::zeros(n, n);
    let mut top = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        if k < half {
            bottom[(k, k)] = ONE;
        } else {
            top[(k, k)] = ONE;
        }
    }
    let fh = f.adjoint();
    Ok((&fh * bottom * &f, &fh * top * &f))
}

/// `V^s` for real `s`: `diag(exp(2 pi i n s / N))` in position.
pub fn momentum_translation_power(n: usize, s: f64) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            dim: n,
            reason: "dimension must be positive",
        });
    }
    Ok(ComplexMatrix::from_diagonal(&DVector::from_fn(n, |j, _| {
        // Reduce the integer part of j*s mod N for accuracy.
        let x = (j as f64 * s).rem_euclid(n as f64);
        C64::from_polar(1.0, 2.0 * PI * x / n as f64)
    })))
}

/// `V|k> = |k+1>`.
pub fn momentum_translation(n: usize) -> Result<ComplexMatrix> {
    momentum_translation_power(n, 1.0)
}

/// `U|n> = |n+1 mod N>`.
pub fn position_translation(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            dim: n,
            reason: "dimension must be positive",
        });
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        u[((j + 1) % n, j)] = ONE;
    }
    Ok(u)
}

/// How `N * delta / 2` is turned into a momentum shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShiftMode {
    /// The shift must be an integer.
    #[default]
    Strict,
    /// Real shifts through the diagonal continuation of `V^s`. Experimental.
    Fractional,
}

/// Momentum shift `s = N delta / 2` after validation.
pub fn momentum_shift(n: usize, delta: f64, mode: ShiftMode) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            reason: "delta must lie in [0, 1]",
        });
    }
    let s = n as f64 * delta / 2.0;
    match mode {
        ShiftMode::Fractional => Ok(s),
        ShiftMode::Strict => {
            let r = s.round();
            if (s - r).abs() > 1e-9 {
                Err(Error::FractionalShift { n, delta, shift: s })
            } else {
                Ok(r)
            }
        }
    }
}

/// `D'_t = V^{-N delta/2} D_t`.
pub fn shifted_top_projector(n: usize, delta: f64, mode: ShiftMode) -> Result<ComplexMatrix> {
    let s = momentum_shift(n, delta, mode)?;
    let (_, top) = momentum_projectors(n)?;
    Ok(momentum_translation_power(n, -s)? * top)
}

/// Kraus family `{A_i}` with `sum A_i^dagger A_i = 1`.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    dim: usize,
    operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        let first = operators.first().ok_or(Error::InvalidDimension {
            dim: 0,
            reason: "a channel needs at least one Kraus operator",
        })?;
        let dim = require_square(first)?;
        if dim == 0 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "dimension must be positive",
            });
        }
        for a in &operators {
            if require_square(a)? != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.nrows(),
                });
            }
            if !all_finite(a) {
                return Err(Error::NonFinite);
            }
        }
        let ch = Self { dim, operators };
        let residual = ch.completeness_residual();
        if residual > COMPLETENESS_TOL {
            return Err(Error::IncompleteKraus { residual });
        }
        Ok(ch)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![ComplexMatrix::identity(n, n)])
    }

    /// Conjugation by a unitary.
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// `max |sum A^dagger A - 1|`.
    pub fn completeness_residual(&self) -> f64 {
        let sum = self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, a| acc + a.adjoint() * a);
        identity_deviation(&sum)
    }

    /// `sum A_i X A_i^dagger` for an arbitrary square matrix.
    pub fn apply_matrix(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.nrows(),
            });
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for a in &self.operators {
            out += a * x * a.adjoint();
        }
        Ok(out)
    }

    /// Apply to a pure state given as an ensemble of unnormalized vectors,
    /// `rho = sum |v><v|`. Each Kraus operator multiplies the ensemble size.
    pub fn apply_ensemble(&self, vectors: &[ComplexVector]) -> Vec<ComplexVector> {
        self.operators
            .iter()
            .flat_map(|a| vectors.iter().map(move |v| a * v))
            .collect()
    }
}

/// `{D_b, D_t}`: the up/down momentum measurement.
pub fn measurement_channel(n: usize) -> Result<KrausChannel> {
    let (bottom, top) = momentum_projectors(n)?;
    KrausChannel::new(vec![bottom, top])
}

/// `{D_b, D'_t}`: measurement followed by the downward shift of the top half.
pub fn shift_channel(n: usize, delta: f64, mode: ShiftMode) -> Result<KrausChannel> {
    let (bottom, _) = momentum_projectors(n)?;
    let shifted = shifted_top_projector(n, delta, mode)?;
    KrausChannel::new(vec![bottom, shifted])
}

/// `{D_b B, D'_t B}`: one step of the quantum sloppy baker map.
pub fn sloppy_channel(n: usize, delta: f64, mode: ShiftMode) -> Result<KrausChannel> {
    let b = balazs_voros(n)?;
    let (bottom, _) = momentum_projectors(n)?;
    let shifted = shifted_top_projector(n, delta, mode)?;
    KrausChannel::new(vec![bottom * &b, shifted * b])
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    rho: ComplexMatrix,
}

impl QuantumState {
    /// Validates all three invariants (costs one Hermitian eigensolve).
    pub fn new(rho: ComplexMatrix) -> Result<Self> {
        let n = require_square(&rho)?;
        if n == 0 {
            return Err(Error::InvalidDimension {
                dim: n,
                reason: "dimension must be positive",
            });
        }
        let state = Self { rho };
        state.validate()?;
        Ok(state)
    }

    pub(crate) fn from_matrix_unchecked(rho: ComplexMatrix) -> Self {
        Self { rho }
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension {
                dim: n,
                reason: "dimension must be positive",
            });
        }
        Ok(Self {
            rho: ComplexMatrix::identity(n, n) / C64::new(n as f64, 0.0),
        })
    }

    /// `|psi><psi|` after normalizing `psi`.
    pub fn pure(psi: &ComplexVector) -> Result<Self> {
        let norm = psi.norm();
        if norm.is_nan() || norm <= 0.0 || !norm.is_finite() {
            return Err(Error::OutOfRange {
                name: "state norm",
                value: norm,
                reason: "a pure state needs a finite nonzero vector",
            });
        }
        let v = psi.unscale(norm);
        Ok(Self { rho: &v * v.adjoint() })
    }

    pub fn validate(&self) -> Result<()> {
        if !all_finite(&self.rho) {
            return Err(Error::NonFinite);
        }
        let deviation = hermiticity_deviation(&self.rho);
        if deviation > STRUCTURE_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = self.trace().re;
        if (trace - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::TraceNotOne { trace });
        }
        let min = self.eigenvalues()?[0];
        if min < POSITIVITY_FLOOR {
            return Err(Error::PositivityViolation { min_eigenvalue: min });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.rho
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.rho)
    }

    /// `<psi|rho|psi>` for a unit vector.
    pub fn expectation(&self, psi: &ComplexVector) -> f64 {
        psi.dotc(&(&self.rho * psi)).re
    }

    /// `|<psi|phi>|^2` against a pure state; for mixed `self`, `<phi|rho|phi>`.
    pub fn fidelity_with_pure(&self, phi: &ComplexVector) -> f64 {
        self.expectation(&phi.unscale(phi.norm()))
    }
}

/// `sum A_i rho A_i^dagger`. Cost `O(K N^3)`; no superoperator is formed.
pub fn apply_channel(ch: &KrausChannel, rho: &QuantumState) -> Result<QuantumState> {
    Ok(QuantumState::from_matrix_unchecked(ch.apply_matrix(rho.matrix())?))
}

/// `rho -> Lambda^steps(rho)`, returning every iterate including the start.
pub fn evolve(ch: &KrausChannel, rho: &QuantumState, steps: usize) -> Result<Vec<QuantumState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(rho.clone());
    for _ in 0..steps {
        let next = apply_channel(ch, out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}

/// `-Tr rho ln rho` in nats, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &QuantumState) -> Result<f64> {
    entropy_of_spectrum(&rho.eigenvalues()?)
}

pub(crate) fn entropy_of_spectrum(eigenvalues: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &lam in eigenvalues {
        if lam < POSITIVITY_FLOOR {
            return Err(Error::PositivityViolation { min_eigenvalue: lam });
        }
        let x = lam.clamp(0.0, 1.0);
        if x > 0.0 {
            s -= x * x.ln();
        }
    }
    Ok(s)
}

/// Normalized vector of i.i.d. standard complex Gaussians (unitarily
/// invariant), deterministic per seed.
pub fn random_pure_vector(n: usize, seed: u64) -> Result<ComplexVector> {
    if n == 0 {
        return Err(Error::InvalidDimension {
            dim: n,
            reason: "dimension must be positive",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = ComplexVector::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let norm = v.norm();
    Ok(v.unscale(norm))
}

pub fn random_pure_state(n: usize, seed: u64) -> Result<QuantumState> {
    QuantumState::pure(&random_pure_vector(n, seed)?)
}

/// Change of basis to momentum representation, `F rho F^dagger`.
pub fn to_momentum_basis(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let f = dft_matrix(m.nrows())?;
    Ok(&f * m * f.adjoint())
}

/// Largest modulus within the off-diagonal momentum blocks.
pub fn off_diagonal_block_norm(m: &ComplexMatrix) -> Result<f64> {
    let n = m.nrows();
    require_even(n)?;
    let pm = to_momentum_basis(m)?;
    let half = n / 2;
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            if (r < half) != (c < half) {
                worst = worst.max(pm[(r, c)].norm());
            }
        }
    }
    Ok(worst)
}

/// Momentum-basis matrix unit `|k><l|` expressed in position.
pub fn momentum_matrix_unit(n: usize, k: usize, l: usize) -> Result<ComplexMatrix> {
    let f = dft_matrix(n)?;
    let mut e = DMatrix::from_element(n, n, ZERO);
    e[(k, l)] = ONE;
    Ok(f.adjoint() * e * f)
}
