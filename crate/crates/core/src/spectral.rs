//! Superoperator representations and spectral analysis of channels.
//!
//! Vectorization convention: a density matrix is stacked row by row,
//! `vec(rho)[i*N + j] = rho[i, j]`. With that convention the superoperator of
//! `rho -> sum A rho A^dagger` is `sum A (x) conj(A)`.
//!
//! Dense spectra are computed from the real matrix of the channel in an
//! orthonormal basis of Hermitian matrices. Channels map Hermitian matrices
//! to Hermitian matrices, so this matrix is real, has the same spectrum as
//! the complex superoperator, and its real Schur form yields exact
//! conjugate pairs.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    general_eig, general_eig_real, kron, leading_eigs, rank_above, singular_values, singular_values_real,
    sort_spectrum, ComplexMatrix, ComplexVector, FnOperator, C64,
};
use crate::quantum::{
    apply_channel, random_pure_vector, sloppy_channel, von_neumann_entropy, KrausChannel, QuantumState, ShiftMode,
};

/// Largest N for which the explicit `N^2 x N^2` matrix is built by default.
pub const DENSE_BOUND: usize = 48;
/// `|lambda| < ZERO_TOL` counts toward the zero multiplicity.
pub const ZERO_TOL: f64 = 1e-8;
/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;
/// Eigenvalues closer than this are grouped when refining clusters.
pub const CLUSTER_RADIUS: f64 = 1e-6;

/// Explicit superoperator `sum A (x) conj(A)` acting on row-stacked matrices.
#[derive(Debug, Clone)]
pub struct SuperoperatorMatrix {
    n: usize,
    matrix: ComplexMatrix,
}

impl SuperoperatorMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Apply to an `N x N` matrix through the explicit matrix.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.nrows() != self.n || rho.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: rho.nrows(),
            });
        }
        let out = &self.matrix * vectorize(rho);
        Ok(unvectorize(&out, self.n))
    }
}

/// Row-stacking.
pub fn vectorize(m: &ComplexMatrix) -> ComplexVector {
    let n = m.nrows();
    ComplexVector::from_fn(n * m.ncols(), |k, _| m[(k / m.ncols(), k % m.ncols())])
}

pub fn unvectorize(v: &ComplexVector, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |i, j| v[i * n + j])
}

/// Superoperator matrix with the default memory bound.
pub fn superoperator_matrix(ch: &KrausChannel) -> Result<SuperoperatorMatrix> {
    superoperator_matrix_bounded(ch, DENSE_BOUND)
}

pub fn superoperator_matrix_bounded(ch: &KrausChannel, bound: usize) -> Result<SuperoperatorMatrix> {
    let n = ch.dim();
    if n > bound {
        return Err(Error::TooLarge { n, bound });
    }
    let mut matrix = ComplexMatrix::zeros(n * n, n * n);
    for a in ch.operators() {
        matrix += kron(a, &a.map(|z| z.conj()));
    }
    Ok(SuperoperatorMatrix { n, matrix })
}

/// Orthonormal Hermitian basis of `N x N` matrices, indexed as
/// `E_kk` for `k < N`, then for each `k < l` the pair
/// `(E_kl + E_lk)/sqrt 2` and `i (E_kl - E_lk)/sqrt 2`.
#[derive(Debug, Clone, Copy)]
enum BasisElement {
    Diagonal(usize),
    Symmetric(usize, usize),
    Antisymmetric(usize, usize),
}

fn hermitian_basis(n: usize) -> Vec<BasisElement> {
    let mut basis: Vec<BasisElement> = (0..n).map(BasisElement::Diagonal).collect();
    for k in 0..n {
        for l in (k + 1)..n {
            basis.push(BasisElement::Symmetric(k, l));
            basis.push(BasisElement::Antisymmetric(k, l));
        }
    }
    basis
}

/// Coordinates `Tr(H_c X)` of a Hermitian matrix in the Hermitian basis.
pub fn hermitian_coordinates(x: &ComplexMatrix) -> DVector<f64> {
    let n = x.nrows();
    let s2 = std::f64::consts::SQRT_2;
    DVector::from_iterator(
        n * n,
        hermitian_basis(n).into_iter().map(|e| match e {
            BasisElement::Diagonal(k) => x[(k, k)].re,
            BasisElement::Symmetric(k, l) => s2 * x[(k, l)].re,
            BasisElement::Antisymmetric(k, l) => s2 * x[(k, l)].im,
        }),
    )
}

/// Inverse of [`hermitian_coordinates`].
pub fn from_hermitian_coordinates(v: &DVector<f64>, n: usize) -> ComplexMatrix {
    let mut x = ComplexMatrix::zeros(n, n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for (e, &c) in hermitian_basis(n).into_iter().zip(v.iter()) {
        match e {
            BasisElement::Diagonal(k) => x[(k, k)] += c,
            BasisElement::Symmetric(k, l) => {
                x[(k, l)] += C64::new(h * c, 0.0);
                x[(l, k)] += C64::new(h * c, 0.0);
            }
            BasisElement::Antisymmetric(k, l) => {
                x[(k, l)] += C64::new(0.0, h * c);
                x[(l, k)] += C64::new(0.0, -h * c);
            }
        }
    }
    x
}

/// Real `N^2 x N^2` matrix of the channel in the Hermitian basis.
///
/// Column `c` holds the coordinates of `Lambda(H_c)`; each image is a sum of
/// rank-one terms `A e_k e_l^T A^dagger`, so a column costs `O(K N^2)`.
pub fn hermitian_representation(ch: &KrausChannel) -> DMatrix<f64> {
    let n = ch.dim();
    let basis = hermitian_basis(n);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let columns: Vec<DVector<f64>> = basis
        .par_iter()
        .map(|&e| {
            let mut img = ComplexMatrix::zeros(n, n);
            for a in ch.operators() {
                // Lambda(E_kl) = sum A[:,k] A[:,l]^dagger.
                let outer = |k: usize, l: usize, w: C64, img: &mut ComplexMatrix| {
                    for i in 0..n {
                        let left = w * a[(i, k)];
                        for j in 0..n {
                            img[(i, j)] += left * a[(j, l)].conj();
                        }
                    }
                };
                match e {
                    BasisElement::Diagonal(k) => outer(k, k, C64::new(1.0, 0.0), &mut img),
                    BasisElement::Symmetric(k, l) => {
                        outer(k, l, C64::new(h, 0.0), &mut img);
                        outer(l, k, C64::new(h, 0.0), &mut img);
                    }
                    BasisElement::Antisymmetric(k, l) => {
                        outer(k, l, C64::new(0.0, h), &mut img);
                        outer(l, k, C64::new(0.0, -h), &mut img);
                    }
                }
            }
            hermitian_coordinates(&img)
        })
        .collect();
    DMatrix::from_columns(&columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumMethod {
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defectiveness {
    pub eigenvalue: (f64, f64),
    pub algebraic: usize,
    pub geometric: usize,
    pub defective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub method: SpectrumMethod,
    /// Sorted by descending modulus, then real part, then imaginary part.
    #[serde(with = "complex_list")]
    pub eigenvalues: Vec<C64>,
    #[serde(with = "complex_pair")]
    pub lambda1: C64,
    pub lambda2_modulus: f64,
    pub gap: f64,
    /// Algebraic multiplicity of 0 (`|lambda| < 1e-8`); dense path only.
    pub zero_multiplicity: Option<usize>,
    /// Rank evidence for the zero eigenvalue, when probed.
    pub zero_defect: Option<Defectiveness>,
    /// Whether defective clusters were merged by rank-verified refinement.
    pub refined: bool,
}

impl SpectralReport {
    fn from_values(n: usize, method: SpectrumMethod, eigenvalues: Vec<C64>, refined: bool) -> Self {
        let lambda1 = eigenvalues.first().copied().unwrap_or(C64::new(0.0, 0.0));
        let lambda2_modulus = eigenvalues.get(1).map(|z| z.norm()).unwrap_or(0.0);
        let zero_multiplicity = (method == SpectrumMethod::Dense).then(|| eigenvalues.iter().filter(|z| z.norm() < ZERO_TOL).count());
        Self {
            n,
            method,
            eigenvalues,
            lambda1,
            lambda2_modulus,
            gap: 1.0 - lambda2_modulus,
            zero_multiplicity,
            zero_defect: None,
            refined,
        }
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest distance from a non-real eigenvalue to the nearest conjugate
    /// of another listed eigenvalue.
    pub fn conjugate_asymmetry(&self) -> f64 {
        self.eigenvalues
            .iter()
            .filter(|z| z.im.abs() > ZERO_TOL)
            .map(|z| {
                self.eigenvalues
                    .iter()
                    .map(|w| (w.conj() - z).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues within `tol` of `target`.
    pub fn count_near(&self, target: C64, tol: f64) -> usize {
        self.eigenvalues.iter().filter(|z| (*z - target).norm() < tol).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Largest N handled by dense decomposition.
    pub dense_bound: usize,
    /// Number of eigenvalues requested on the iterative path.
    pub leading_count: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Merge defective clusters after a rank check. `None` enables it for N <= 16.
    pub refine: Option<bool>,
    /// Attach rank evidence for the zero eigenvalue. `None` enables it for N <= 16.
    pub probe_zero: Option<bool>,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            dense_bound: DENSE_BOUND,
            leading_count: 10,
            max_iter: 20_000,
            tol: 1e-10,
            refine: None,
            probe_zero: None,
        }
    }
}

const AUTO_ANALYSIS_MAX_N: usize = 16;

/// Spectrum of a channel: dense for `N <= dense_bound`, otherwise the
/// leading eigenvalues from the matrix-free Krylov-Schur iteration.
pub fn channel_spectrum(ch: &KrausChannel) -> Result<SpectralReport> {
    channel_spectrum_with(ch, &SpectralOptions::default())
}

pub fn channel_spectrum_with(ch: &KrausChannel, opts: &SpectralOptions) -> Result<SpectralReport> {
    let n = ch.dim();
    if n > opts.dense_bound {
        let k = opts.leading_count.min(n * n);
        let values = leading_channel_eigs(ch, k, opts.max_iter, opts.tol)?;
        return Ok(SpectralReport::from_values(n, SpectrumMethod::Iterative, values, false));
    }
    let r = hermitian_representation(ch);
    let mut values = general_eig_real(&r)?;
    let refine = opts.refine.unwrap_or(n <= AUTO_ANALYSIS_MAX_N);
    if refine {
        values = refine_clusters(&values, CLUSTER_RADIUS, |mu, max_power| generalized_nullity_real(&r, mu, max_power))?;
    }
    let mut report = SpectralReport::from_values(n, SpectrumMethod::Dense, values, refine);
    let probe = opts.probe_zero.unwrap_or(n <= AUTO_ANALYSIS_MAX_N);
    if probe && report.zero_multiplicity.unwrap_or(0) > 0 {
        let geometric = n * n - rank_above(&scaled_singular_values_real(&r)?, RANK_TOL);
        let algebraic = report.zero_multiplicity.unwrap_or(0);
        report.zero_defect = Some(Defectiveness {
            eigenvalue: (0.0, 0.0),
            algebraic,
            geometric,
            defective: geometric < algebraic,
        });
    }
    Ok(report)
}

/// Dominant eigenvalues of the channel without forming its matrix.
pub fn leading_channel_eigs(ch: &KrausChannel, k: usize, max_iter: usize, tol: f64) -> Result<Vec<C64>> {
    let n = ch.dim();
    let op = FnOperator::new(n * n, |v: &ComplexVector| {
        let x = unvectorize(v, n);
        let y = ch.apply_matrix(&x).expect("dimension fixed by construction");
        vectorize(&y)
    });
    leading_eigs(&op, k, max_iter, tol)
}

/// Singular values divided by the largest one.
fn scaled_singular_values_real(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let s = singular_values_real(m)?;
    let top = s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    Ok(s.into_iter().map(|x| x / top).collect())
}

fn scaled_singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let s = singular_values(m)?;
    let top = s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    Ok(s.into_iter().map(|x| x / top).collect())
}

/// Dimension of the generalized eigenspace of real `mu`: nullity of
/// `(R - mu)^k` once the rank stops dropping, with `k <= max_power`.
fn generalized_nullity_real(r: &DMatrix<f64>, mu: C64, max_power: usize) -> Result<Option<usize>> {
    if mu.im != 0.0 {
        return Ok(None);
    }
    let dim = r.nrows();
    let shifted = r - DMatrix::<f64>::identity(dim, dim) * mu.re;
    let mut power = shifted.clone();
    let mut rank = rank_above(&scaled_singular_values_real(&power)?, RANK_TOL);
    for _ in 1..max_power.max(1) {
        power = &power * &shifted;
        let next = rank_above(&scaled_singular_values_real(&power)?, RANK_TOL);
        if next == rank {
            break;
        }
        rank = next;
    }
    Ok(Some(dim - rank))
}

fn generalized_nullity_complex(m: &ComplexMatrix, mu: C64, max_power: usize) -> Result<Option<usize>> {
    let dim = m.nrows();
    let shifted = m - ComplexMatrix::identity(dim, dim) * mu;
    let mut power = shifted.clone();
    let mut rank = rank_above(&scaled_singular_values(&power)?, RANK_TOL);
    for _ in 1..max_power.max(1) {
        power = &power * &shifted;
        let next = rank_above(&scaled_singular_values(&power)?, RANK_TOL);
        if next == rank {
            break;
        }
        rank = next;
    }
    Ok(Some(dim - rank))
}

/// Merge eigenvalue clusters split apart by round-off on defective
/// eigenvalues.
///
/// Values are grouped by single linkage within `radius`. A group of size
/// `m` is replaced by `m` copies of its centroid only when the centroid's
/// generalized eigenspace has dimension exactly `m`; `nullity` returns
/// `None` when it cannot decide. The centroid of a perturbed Jordan block
/// is accurate to round-off even though the individual values are not.
pub fn refine_clusters<F>(values: &[C64], radius: f64, mut nullity: F) -> Result<Vec<C64>>
where
    F: FnMut(C64, usize) -> Result<Option<usize>>,
{
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re));
    // Union-find over the sweep in real part.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if values[j].re - values[i].re > radius {
                break;
            }
            if (values[j] - values[i]).norm() <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    let mut out = values.to_vec();
    for members in groups.values().filter(|g| g.len() > 1) {
        let m = members.len();
        let mut centroid = members.iter().map(|&i| values[i]).sum::<C64>() / m as f64;
        if centroid.im.abs() <= radius && members.iter().any(|&i| values[i].im == 0.0) {
            // Real clusters of a real matrix are symmetric about the axis.
            centroid.im = 0.0;
        }
        if nullity(centroid, m)? == Some(m) {
            for &i in members {
                out[i] = centroid;
            }
        }
    }
    sort_spectrum(&mut out);
    Ok(out)
}

/// Algebraic and geometric multiplicity of `eigenvalue` for a channel.
pub fn defectiveness_probe(ch: &KrausChannel, eigenvalue: C64) -> Result<Defectiveness> {
    let n = ch.dim();
    let report = channel_spectrum_with(
        ch,
        &SpectralOptions {
            refine: Some(true),
            probe_zero: Some(false),
            ..SpectralOptions::default()
        },
    )?;
    let algebraic = report.count_near(eigenvalue, ZERO_TOL);
    let geometric = if eigenvalue.im == 0.0 {
        let r = hermitian_representation(ch);
        let shifted = &r - DMatrix::<f64>::identity(n * n, n * n) * eigenvalue.re;
        n * n - rank_above(&scaled_singular_values_real(&shifted)?, RANK_TOL)
    } else {
        let s = superoperator_matrix(ch)?;
        let dim = n * n;
        let shifted = s.matrix() - ComplexMatrix::identity(dim, dim) * eigenvalue;
        dim - rank_above(&scaled_singular_values(&shifted)?, RANK_TOL)
    };
    Ok(Defectiveness {
        eigenvalue: (eigenvalue.re, eigenvalue.im),
        algebraic,
        geometric,
        defective: geometric < algebraic,
    })
}

/// Multiplicities of `eigenvalue` for an arbitrary square matrix.
pub fn matrix_defectiveness(m: &ComplexMatrix, eigenvalue: C64) -> Result<Defectiveness> {
    let values = general_eig(m)?;
    let values = refine_clusters(&values, CLUSTER_RADIUS, |mu, k| generalized_nullity_complex(m, mu, k))?;
    let algebraic = values.iter().filter(|z| (*z - eigenvalue).norm() < ZERO_TOL).count();
    let dim = m.nrows();
    let shifted = m - ComplexMatrix::identity(dim, dim) * eigenvalue;
    let geometric = dim - rank_above(&scaled_singular_values(&shifted)?, RANK_TOL);
    Ok(Defectiveness {
        eigenvalue: (eigenvalue.re, eigenvalue.im),
        algebraic,
        geometric,
        defective: geometric < algebraic,
    })
}

#[derive(Debug, Clone)]
pub struct InvariantState {
    pub state: QuantumState,
    pub iterations: usize,
    /// Final `max |rho_{k+1} - rho_k|`.
    pub residual: f64,
}

pub const INVARIANT_TOL: f64 = 1e-12;
pub const INVARIANT_MAX_ITER: usize = 100_000;

/// Fixed point of the channel by iteration from the maximally mixed state.
pub fn invariant_state(ch: &KrausChannel, tol: f64, max_iter: usize) -> Result<InvariantState> {
    let n = ch.dim();
    let mut rho = ComplexMatrix::identity(n, n) / C64::new(n as f64, 0.0);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let next = ch.apply_matrix(&rho)?;
        residual = crate::numerics::max_abs(&(&next - &rho));
        rho = next;
        if residual <= tol {
            let check = crate::numerics::max_abs(&(ch.apply_matrix(&rho)? - &rho));
            if check > 10.0 * tol {
                return Err(Error::NotConverged {
                    what: "invariant-state fixed-point check",
                    iterations: it,
                    residual: check,
                });
            }
            let state = QuantumState::new(rho)?;
            return Ok(InvariantState {
                state,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NotConverged {
        what: "invariant-state power iteration",
        iterations: max_iter,
        residual,
    })
}

/// Fixed point from the null vector of `R - 1` (dense cross-check).
pub fn invariant_state_dense(ch: &KrausChannel) -> Result<QuantumState> {
    let n = ch.dim();
    if n > DENSE_BOUND {
        return Err(Error::TooLarge { n, bound: DENSE_BOUND });
    }
    let r = hermitian_representation(ch);
    let dim = n * n;
    let shifted = r - DMatrix::<f64>::identity(dim, dim);
    let svd = nalgebra::SVD::try_new(shifted, false, true, f64::EPSILON, 0).ok_or(Error::NotConverged {
        what: "singular value decomposition",
        iterations: 0,
        residual: f64::NAN,
    })?;
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let coords = v_t.row(idx).transpose();
    let mut rho = from_hermitian_coordinates(&coords, n);
    let tr = rho.trace();
    rho /= tr;
    QuantumState::new(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    #[serde(rename = "T")]
    pub t: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Fit window is `T in [1, t_lin]`.
    pub t_lin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    #[serde(rename = "N")]
    pub n: usize,
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub points: Vec<EntropyPoint>,
    pub slope: Option<SlopeFit>,
}

impl EntropyCurve {
    /// Mean entropy over the last `window` time steps.
    pub fn tail_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.points.len());
        self.points[self.points.len() - w..].iter().map(|p| p.mean).sum::<f64>() / w as f64
    }
}

/// Mean and population standard deviation of the entropy of `samples`
/// random pure states evolved by the sloppy channel, for `T = 0..=t_max`.
/// Sample `i` uses seed `seed + i`.
pub fn entropy_curve(n: usize, delta: f64, t_max: usize, samples: usize, seed: u64) -> Result<EntropyCurve> {
    entropy_curve_with(n, delta, ShiftMode::Strict, t_max, samples, seed)
}

pub fn entropy_curve_with(n: usize, delta: f64, mode: ShiftMode, t_max: usize, samples: usize, seed: u64) -> Result<EntropyCurve> {
    if samples == 0 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: 0.0,
            reason: "at least one sample is required",
        });
    }
    let ch = sloppy_channel(n, delta, mode)?;
    let traces: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let psi = random_pure_vector(n, seed.wrapping_add(i as u64))?;
            let mut rho = QuantumState::pure(&psi)?;
            let mut s = Vec::with_capacity(t_max + 1);
            s.push(von_neumann_entropy(&rho)?);
            for _ in 0..t_max {
                rho = apply_channel(&ch, &rho)?;
                s.push(von_neumann_entropy(&rho)?);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let points: Vec<EntropyPoint> = (0..=t_max)
        .map(|t| {
            let vals: Vec<f64> = traces.iter().map(|tr| tr[t]).collect();
            let mean = vals.iter().sum::<f64>() / samples as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / samples as f64;
            EntropyPoint { t, mean, std: var.sqrt() }
        })
        .collect();
    let slope = initial_slope(&points);
    Ok(EntropyCurve {
        n,
        delta,
        samples,
        seed,
        points,
        slope,
    })
}

/// Least-squares line over `T in [1, t_lin]`, with `t_lin` the largest
/// window whose worst residual stays below 5% of the curve's range.
pub fn initial_slope(points: &[EntropyPoint]) -> Option<SlopeFit> {
    let lo = points.iter().map(|p| p.mean).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.mean).fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let window: Vec<&EntropyPoint> = points.iter().filter(|p| p.t >= 1).collect();
    if window.len() < 2 {
        return None;
    }
    let fit = |pts: &[&EntropyPoint]| -> (f64, f64, f64) {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.t as f64).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.mean).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.t as f64 - mx) * (p.mean - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.t as f64 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let worst = pts
            .iter()
            .map(|p| (p.mean - (intercept + slope * p.t as f64)).abs())
            .fold(0.0, f64::max);
        (slope, intercept, worst)
    };
    let mut best = None;
    for len in 2..=window.len() {
        let (slope, intercept, worst) = fit(&window[..len]);
        if worst <= 0.05 * range {
            best = Some(SlopeFit {
                slope,
                intercept,
                t_lin: window[len - 1].t,
            });
        }
    }
    best
}

mod complex_pair {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

mod complex_list {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(|[re, im]| C64::new(re, im))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs;
    use crate::quantum::{balazs_voros, measurement_channel, random_pure_state, shift_channel};

    fn near(values: &[C64], target: C64, tol: f64) -> usize {
        values.iter().filter(|z| (*z - target).norm() < tol).count()
    }

    #[test]
    fn identity_superoperator() {
        let s = superoperator_matrix(&KrausChannel::identity(4).unwrap()).unwrap();
        assert!(max_abs(&(s.matrix() - ComplexMatrix::identity(16, 16))) < 1e-15);
    }

    #[test]
    fn unitary_spectrum_is_pairwise_products() {
        let b = balazs_voros(8).unwrap();
        let beta = general_eig(&b).unwrap();
        let report = channel_spectrum(&KrausChannel::unitary(b).unwrap()).unwrap();
        assert_eq!(report.eigenvalues.len(), 64);
        for z in &report.eigenvalues {
            assert!((z.norm() - 1.0).abs() < 1e-10);
        }
        for bj in &beta {
            for bk in &beta {
                let w = bj * bk.conj();
                let d = report.eigenvalues.iter().map(|z| (z - w).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-8, "{w} missing");
            }
        }
    }

    #[test]
    fn vectorization_round_trip() {
        let m = ComplexMatrix::from_fn(3, 3, |i, j| C64::new(i as f64, j as f64));
        let v = vectorize(&m);
        assert_eq!(v[1], m[(0, 1)]);
        assert_eq!(unvectorize(&v, 3), m);
    }

    #[test]
    fn hermitian_coordinates_round_trip() {
        let rho = random_pure_state(5, 3).unwrap();
        let c = hermitian_coordinates(rho.matrix());
        assert!((c.norm() - 1.0).abs() < 1e-12, "basis is orthonormal so norm equals Frobenius norm");
        let back = from_hermitian_coordinates(&c, 5);
        assert!(max_abs(&(back - rho.matrix())) < 1e-14);
    }

    #[test]
    fn explicit_matches_matrix_free() {
        for n in [8, 16, 32] {
            let ch = sloppy_channel(n, 0.25, ShiftMode::Strict).unwrap();
            let s = superoperator_matrix(&ch).unwrap();
            for seed in 0..3 {
                let rho = random_pure_state(n, seed).unwrap();
                let a = s.apply(rho.matrix()).unwrap();
                let b = ch.apply_matrix(rho.matrix()).unwrap();
                assert!(max_abs(&(a - b)) < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_representation_matches_complex_spectrum() {
        let ch = sloppy_channel(8, 0.25, ShiftMode::Strict).unwrap();
        let s = superoperator_matrix(&ch).unwrap();
        let complex = general_eig(s.matrix()).unwrap();
        let real = general_eig_real(&hermitian_representation(&ch)).unwrap();
        // Defective zeros scatter differently in the two solvers.
        for z in complex.iter().filter(|z| z.norm() > 1e-2) {
            let d = real.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-8, "{z} off by {d:e}");
        }
        let sum = |v: &[C64]| v.iter().sum::<C64>();
        assert!((sum(&complex) - sum(&real)).norm() < 1e-10);
    }

    #[test]
    fn measurement_channel_has_block_eigenspace() {
        let n = 8;
        let report = channel_spectrum(&measurement_channel(n).unwrap()).unwrap();
        assert_eq!(near(&report.eigenvalues, C64::new(1.0, 0.0), 1e-8), n * n / 2);
        assert_eq!(report.zero_multiplicity, Some(n * n / 2));
    }

    #[test]
    fn shift_channel_spectrum_and_defect() {
        for n in [4, 8] {
            let report = channel_spectrum(&shift_channel(n, 0.5, ShiftMode::Strict).unwrap()).unwrap();
            for z in &report.eigenvalues {
                assert!(z.norm() < 1e-8 || (z - C64::new(1.0, 0.0)).norm() < 1e-8, "{z}");
            }
            assert_eq!(report.zero_multiplicity, Some(3 * n * n / 4));
            let defect = report.zero_defect.expect("probed at small N");
            assert!(defect.defective && defect.geometric < defect.algebraic);
        }
    }

    #[test]
    fn jordan_block_is_defective() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        let d = matrix_defectiveness(&m, C64::new(0.0, 0.0)).unwrap();
        assert_eq!((d.algebraic, d.geometric, d.defective), (2, 1, true));
        let id = ComplexMatrix::identity(3, 3);
        let d = matrix_defectiveness(&id, C64::new(1.0, 0.0)).unwrap();
        assert_eq!((d.algebraic, d.geometric, d.defective), (3, 3, false));
    }

    #[test]
    fn refinement_leaves_distinct_values_alone() {
        let values = vec![C64::new(1.0, 0.0), C64::new(1.0 + 1e-7, 0.0)];
        let out = refine_clusters(&values, 1e-6, |_, _| Ok(Some(1))).unwrap();
        assert!(out[0] != out[1]);
        let out = refine_clusters(&values, 1e-6, |_, _| Ok(Some(2))).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn sloppy_spectrum_structure() {
        let report = channel_spectrum(&sloppy_channel(8, 0.25, ShiftMode::Strict).unwrap()).unwrap();
        assert!((report.lambda1 - C64::new(1.0, 0.0)).norm() < 1e-8);
        assert!(report.spectral_radius() <= 1.0 + 1e-8);
        assert!(report.conjugate_asymmetry() < 1e-8);
        assert!(report.gap > 0.0);
    }

    #[test]
    fn leading_eigs_match_dense() {
        let ch = sloppy_channel(8, 0.25, ShiftMode::Strict).unwrap();
        let dense = channel_spectrum(&ch).unwrap();
        let lead = leading_channel_eigs(&ch, 5, 20_000, 1e-12).unwrap();
        for z in &lead {
            let d = dense.eigenvalues.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-7, "{z} off by {d:e}");
        }
        for (a, b) in lead.iter().zip(&dense.eigenvalues) {
            assert!((a.norm() - b.norm()).abs() < 1e-7);
        }
    }

    #[test]
    fn dense_bound_is_enforced() {
        let ch = KrausChannel::identity(6).unwrap();
        assert!(matches!(superoperator_matrix_bounded(&ch, 4), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn invariant_state_of_identity_is_mixed() {
        let inv = invariant_state(&KrausChannel::identity(4).unwrap(), INVARIANT_TOL, 10).unwrap();
        assert_eq!(inv.iterations, 1);
        assert!(max_abs(&(inv.state.matrix() - ComplexMatrix::identity(4, 4) / C64::new(4.0, 0.0))) < 1e-15);
    }

    #[test]
    fn invariant_state_agrees_with_dense_null_vector() {
        let ch = sloppy_channel(16, 0.25, ShiftMode::Strict).unwrap();
        let iter = invariant_state(&ch, INVARIANT_TOL, INVARIANT_MAX_ITER).unwrap();
        let dense = invariant_state_dense(&ch).unwrap();
        assert!(max_abs(&(iter.state.matrix() - dense.matrix())) < 1e-9);
        assert!(max_abs(&(ch.apply_matrix(iter.state.matrix()).unwrap() - iter.state.matrix())) < 1e-11);
    }

    #[test]
    fn entropy_curve_starts_at_zero_and_rises() {
        let curve = entropy_curve(16, 0.25, 10, 4, 7).unwrap();
        assert_eq!(curve.points.len(), 11);
        assert!(curve.points[0].mean.abs() < 1e-10);
        assert!(curve.points[1].mean > curve.points[0].mean);
        assert!(curve.tail_mean(3) <= (16.0f64).ln() + 1e-9);
        let again = entropy_curve(16, 0.25, 10, 4, 7).unwrap();
        assert_eq!(curve, again);
    }

    #[test]
    fn slope_fit_recovers_line() {
        let points: Vec<EntropyPoint> = (0..=10)
            .map(|t| EntropyPoint {
                t,
                mean: if t <= 5 { 0.5 * t as f64 } else { 2.5 },
                std: 0.0,
            })
            .collect();
        let fit = initial_slope(&points).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert_eq!(fit.t_lin, 5);
    }

    #[test]
    fn report_serializes() {
        let report = channel_spectrum(&measurement_channel(4).unwrap()).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: SpectralReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }
}
