//! Krylov-Schur (restarted Arnoldi) iteration for the dominant eigenvalues
//! of a matrix-free linear operator.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sort_spectrum, ComplexMatrix, ComplexVector, C64, SCHUR_EPS, ZERO};
use crate::error::{Error, Result};

/// A linear map on `C^dim` known only through its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &ComplexVector) -> ComplexVector;
}

impl LinearOperator for ComplexMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &ComplexVector) -> ComplexVector {
        self * x
    }
}

/// Closure-backed operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&ComplexVector) -> ComplexVector + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&ComplexVector) -> ComplexVector + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &ComplexVector) -> ComplexVector {
        (self.f)(x)
    }
}

const START_SEED: u64 = 0x5eed_ba7e;

/// Up to `k` eigenvalues of largest modulus, sorted like
/// [`super::sort_spectrum`].
///
/// `max_iter` bounds the number of operator applications. Convergence is
/// declared when the Krylov-Schur residual of the leading `k` Schur vectors
/// drops below `tol * max(1, |lambda_1|)`. Fewer than `k` values come back
/// only when the start vector lies in an invariant subspace of smaller
/// dimension.
pub fn leading_eigs(op: &dyn LinearOperator, k: usize, max_iter: usize, tol: f64) -> Result<Vec<C64>> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidDimension {
            dim: k,
            reason: "number of requested eigenvalues must lie in 1..=dimension",
        });
    }
    // Basis size and number of Schur vectors kept across a restart.
    let m = n.min((3 * k).max(k + 30));
    let keep = (k + (m - k) / 2).min(m - 1).max(k.min(m - 1));

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut v0 = ComplexVector::from_fn(n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let nrm = v0.norm();
    v0.unscale_mut(nrm);

    let mut basis: Vec<ComplexVector> = vec![v0];
    // Projected matrix; row `j + 1` of column `j` holds the Arnoldi coupling.
    let mut h = ComplexMatrix::zeros(m + 1, m);
    let mut start = 0;
    let mut applications = 0;
    let mut best_residual = f64::INFINITY;

    loop {
        for j in start..m {
            let mut w = op.apply(&basis[j]);
            applications += 1;
            // Classical Gram-Schmidt, applied twice.
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let coeff = v.dotc(&w);
                    h[(i, j)] += coeff;
                    w.axpy(-coeff, v, C64::new(1.0, 0.0));
                }
            }
            let beta = w.norm();
            let scale = h.column(j).iter().fold(beta, |acc, z| acc.max(z.norm()));
            if beta <= 1e-13 * scale.max(f64::MIN_POSITIVE) || j + 1 == n {
                // Invariant subspace reached: the Ritz values are exact.
                let size = j + 1;
                let hs = h.view((0, 0), (size, size)).into_owned();
                let mut values = schur_diagonal(&hs)?;
                sort_spectrum(&mut values);
                values.truncate(k);
                return Ok(values);
            }
            h[(j + 1, j)] = C64::new(beta, 0.0);
            w.unscale_mut(beta);
            basis.push(w);
        }

        let hm = h.view((0, 0), (m, m)).into_owned();
        let beta = h[(m, m - 1)];
        let (mut q, mut t) = schur_unpacked(&hm)?;
        reorder_by_modulus(&mut q, &mut t);

        let lead = t[(0, 0)].norm().max(1.0);
        let residual = (0..k).map(|i| (beta * q[(m - 1, i)]).norm()).fold(0.0, f64::max);
        best_residual = best_residual.min(residual);
        if residual <= tol * lead {
            let mut values: Vec<C64> = (0..k).map(|i| t[(i, i)]).collect();
            sort_spectrum(&mut values);
            return Ok(values);
        }
        if applications >= max_iter {
            return Err(Error::NotConverged {
                what: "Krylov-Schur iteration",
                iterations: applications,
                residual: best_residual,
            });
        }

        // Truncate to the leading `keep` Schur vectors:
        // A V_m Q_keep = V_m Q_keep T_keep + v_{m} (beta * Q[m-1, :keep]).
        let next = basis.pop().expect("basis holds m + 1 vectors");
        let mut new_basis = Vec::with_capacity(m + 1);
        for c in 0..keep {
            let mut acc = ComplexVector::zeros(n);
            for (i, v) in basis.iter().enumerate() {
                acc.axpy(q[(i, c)], v, C64::new(1.0, 0.0));
            }
            new_basis.push(acc);
        }
        new_basis.push(next);
        basis = new_basis;

        h.fill(ZERO);
        for r in 0..keep {
            for c in r..keep {
                h[(r, c)] = t[(r, c)];
            }
        }
        for c in 0..keep {
            h[(keep, c)] = beta * q[(m - 1, c)];
        }
        start = keep;
    }
}

fn schur_unpacked(h: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = h.nrows();
    let schur = nalgebra::Schur::try_new(h.clone(), SCHUR_EPS, 1000 * n.max(10)).ok_or(Error::NotConverged {
        what: "projected Schur decomposition",
        iterations: 1000 * n.max(10),
        residual: f64::NAN,
    })?;
    let (q, mut t) = schur.unpack();
    for c in 0..n {
        for r in (c + 1)..n {
            t[(r, c)] = ZERO;
        }
    }
    Ok((q, t))
}

fn schur_diagonal(h: &ComplexMatrix) -> Result<Vec<C64>> {
    let (_, t) = schur_unpacked(h)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Reorder a complex Schur form `A = Q T Q^dagger` so the diagonal of `T`
/// is sorted by descending modulus, by adjacent unitary swaps.
pub(crate) fn reorder_by_modulus(q: &mut ComplexMatrix, t: &mut ComplexMatrix) {
    let n = t.nrows();
    for i in 1..n {
        let mut j = i;
        while j > 0 && t[(j, j)].norm() > t[(j - 1, j - 1)].norm() {
            swap_adjacent(q, t, j - 1);
            j -= 1;
        }
    }
}

/// Exchange diagonal entries `j` and `j + 1` of upper-triangular `t`.
fn swap_adjacent(q: &mut ComplexMatrix, t: &mut ComplexMatrix, j: usize) {
    let n = t.nrows();
    let t11 = t[(j, j)];
    let t22 = t[(j + 1, j + 1)];
    let a = t[(j, j + 1)];
    let b = t22 - t11;
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    // First column of Z is the eigenvector of the 2x2 block for t22.
    let z = DMatrix::from_row_slice(2, 2, &[a / r, -b.conj() / r, b / r, a.conj() / r]);
    let zh = z.adjoint();

    // Rows j, j+1 of T <- Z^dagger * rows.
    for c in 0..n {
        let x = t[(j, c)];
        let y = t[(j + 1, c)];
        t[(j, c)] = zh[(0, 0)] * x + zh[(0, 1)] * y;
        t[(j + 1, c)] = zh[(1, 0)] * x + zh[(1, 1)] * y;
    }
    // Columns j, j+1 of T and Q <- columns * Z.
    for mat in [&mut *t, &mut *q] {
        for r in 0..mat.nrows() {
            let x = mat[(r, j)];
            let y = mat[(r, j + 1)];
            mat[(r, j)] = x * z[(0, 0)] + y * z[(1, 0)];
            mat[(r, j + 1)] = x * z[(0, 1)] + y * z[(1, 1)];
        }
    }
    t[(j + 1, j)] = ZERO;
    t[(j, j)] = t22;
    t[(j + 1, j + 1)] = t11;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{general_eig, max_abs};
    use nalgebra::DVector;

    fn diag(values: &[f64]) -> ComplexMatrix {
        ComplexMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
    }

    #[test]
    fn identity_single_value() {
        let op = ComplexMatrix::identity(16, 16);
        let ev = leading_eigs(&op, 1, 100, 1e-12).unwrap();
        assert_eq!(ev.len(), 1);
        assert!((ev[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn diagonal_dominance() {
        let op = diag(&[0.9, 0.5, 0.1]);
        let ev = leading_eigs(&op, 2, 100, 1e-12).unwrap();
        assert!((ev[0].re - 0.9).abs() < 1e-12 && (ev[1].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closure_operator_matches_dense() {
        let n = 200;
        let mut values: Vec<f64> = (0..n).map(|i| 0.99f64.powi(i as i32) * if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        values.reverse();
        let d = diag(&values);
        let f = crate::numerics::dft_matrix(n).unwrap();
        let a = f.adjoint() * d * &f;
        let op = FnOperator::new(n, |x: &ComplexVector| &a * x);
        let ev = leading_eigs(&op, 4, 20_000, 1e-11).unwrap();
        let dense = general_eig(&a).unwrap();
        for z in &ev {
            let nearest = dense.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-8, "{z} off by {nearest:e}");
        }
    }

    #[test]
    fn schur_reordering_preserves_similarity() {
        let n = 7;
        let a = ComplexMatrix::from_fn(n, n, |i, j| C64::new(((i * 3 + j * 5) % 7) as f64 - 3.0, (i as f64 - j as f64) * 0.1));
        let (mut q, mut t) = schur_unpacked(&a).unwrap();
        reorder_by_modulus(&mut q, &mut t);
        let rec = &q * &t * q.adjoint();
        assert!(max_abs(&(rec - &a)) < 1e-10);
        for i in 1..n {
            assert!(t[(i - 1, i - 1)].norm() >= t[(i, i)].norm() - 1e-12);
            for c in 0..i {
                assert!(t[(i, c)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        // Tight budget on an operator with clustered leading moduli.
        let n = 300;
        let values: Vec<f64> = (0..n).map(|i| 1.0 - 1e-4 * i as f64).collect();
        let op = diag(&values);
        match leading_eigs(&op, 5, 40, 1e-14) {
            Err(Error::NotConverged { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_k() {
        let op = ComplexMatrix::identity(4, 4);
        assert!(leading_eigs(&op, 0, 10, 1e-10).is_err());
        assert!(leading_eigs(&op, 5, 10, 1e-10).is_err());
    }
}
