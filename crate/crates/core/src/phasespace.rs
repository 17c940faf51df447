//! Coherent-state lattice on the discrete torus, Husimi maps and return
//! probabilities.
//!
//! Lattice point `(a, b)` stands for `(q, p) = (a/N, b/N)`. Grids are indexed
//! `values[(a, b)]`, i.e. q-major.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{ComplexVector, C64};
use crate::quantum::{KrausChannel, QuantumState};

/// Translated Gaussian wave packets `|q,p> = V^{Np-N/2} U^{Nq-N/2} |1/2,1/2>`.
#[derive(Debug, Clone)]
pub struct CoherentFrame {
    n: usize,
    reference: ComplexVector,
    /// `exp(2 pi i j / N)`.
    roots: Vec<C64>,
}

/// `<n|1/2,1/2> ~ exp(-pi (n - N/2)^2 / N - i pi n)`, normalized numerically.
pub fn reference_state(n: usize) -> Result<ComplexVector> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidDimension {
            dim: n,
            reason: "coherent lattice needs an even dimension",
        });
    }
    let nf = n as f64;
    let v = ComplexVector::from_fn(n, |j, _| {
        let x = j as f64 - nf / 2.0;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        C64::new(sign * (-PI * x * x / nf).exp(), 0.0)
    });
    let norm = v.norm();
    Ok(v.unscale(norm))
}

impl CoherentFrame {
    pub fn new(n: usize) -> Result<Self> {
        let reference = reference_state(n)?;
        let roots = (0..n)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect();
        Ok(Self { n, reference, roots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn reference(&self) -> &ComplexVector {
        &self.reference
    }

    /// `U^{a - N/2} |1/2,1/2>`: the packet moved to position index `a`.
    fn position_shifted(&self, a: usize) -> ComplexVector {
        let n = self.n;
        let shift = (a + n - n / 2) % n;
        ComplexVector::from_fn(n, |j, _| self.reference[(j + n - shift) % n])
    }

    /// Lattice state at `(a/N, b/N)`.
    pub fn state(&self, a: usize, b: usize) -> Result<ComplexVector> {
        let n = self.n;
        if a >= n || b >= n {
            return Err(Error::OffLattice {
                n,
                q: a as f64 / n as f64,
                p: b as f64 / n as f64,
            });
        }
        let phi = self.position_shifted(a);
        let c = (b + n - n / 2) % n;
        Ok(ComplexVector::from_fn(n, |j, _| self.roots[(c * j) % n] * phi[j]))
    }

    /// Lattice state at real `(q, p)`; both `Nq` and `Np` must be integers.
    pub fn state_at(&self, q: f64, p: f64) -> Result<ComplexVector> {
        let (a, b) = self.lattice_index(q, p)?;
        self.state(a, b)
    }

    pub fn lattice_index(&self, q: f64, p: f64) -> Result<(usize, usize)> {
        let n = self.n as f64;
        let (x, y) = (q * n, p * n);
        let (a, b) = (x.round(), y.round());
        if (x - a).abs() > 1e-9 || (y - b).abs() > 1e-9 || a < 0.0 || b < 0.0 || a >= n || b >= n {
            return Err(Error::OffLattice { n: self.n, q, p });
        }
        Ok((a as usize, b as usize))
    }

    /// Nearest lattice point to `(q, p)` on the torus.
    pub fn nearest_lattice(&self, q: f64, p: f64) -> (usize, usize) {
        let n = self.n as f64;
        let wrap = |x: f64| ((x * n).round().rem_euclid(n)) as usize;
        (wrap(q), wrap(p))
    }
}

/// Values of a phase-space function on the `N x N` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct HusimiGrid {
    values: DMatrix<f64>,
}

impl HusimiGrid {
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != values.ncols() || values.nrows() == 0 {
            return Err(Error::InvalidDimension {
                dim: values.nrows(),
                reason: "lattice grids are square",
            });
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[(a, b)]
    }

    /// Sum in fixed (column-major) order.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmax(&self) -> (usize, usize) {
        let n = self.dim();
        let mut best = (0, 0);
        for b in 0..n {
            for a in 0..n {
                if self.values[(a, b)] > self.values[best] {
                    best = (a, b);
                }
            }
        }
        best
    }

    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.values.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }

    /// Share of the grid total carried by lattice rows with `b/N > p`.
    pub fn fraction_above(&self, p: f64) -> f64 {
        let n = self.dim();
        let mut band = 0.0;
        for b in 0..n {
            if b as f64 / n as f64 > p {
                band += self.values.column(b).iter().sum::<f64>();
            }
        }
        band / self.sum()
    }

    /// Points not exceeded by any of their eight toroidal neighbours,
    /// sorted by descending value.
    pub fn local_maxima(&self) -> Vec<(usize, usize, f64)> {
        let n = self.dim();
        let mut peaks = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let v = self.values[(a, b)];
                let mut is_peak = true;
                'scan: for da in [n - 1, 0, 1] {
                    for db in [n - 1, 0, 1] {
                        if da == 0 && db == 0 {
                            continue;
                        }
                        if self.values[((a + da) % n, (b + db) % n)] > v {
                            is_peak = false;
                            break 'scan;
                        }
                    }
                }
                if is_peak {
                    peaks.push((a, b, v));
                }
            }
        }
        peaks.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
        peaks
    }
}

/// Euclidean distance between lattice points on the `n x n` torus.
pub fn lattice_distance(n: usize, x: (usize, usize), y: (usize, usize)) -> f64 {
    let gap = |u: usize, v: usize| {
        let d = u.abs_diff(v);
        d.min(n - d) as f64
    };
    let (dq, dp) = (gap(x.0, y.0), gap(x.1, y.1));
    (dq * dq + dp * dp).sqrt()
}

/// `H(q,p) = <q,p| rho |q,p>` at a single lattice point.
pub fn husimi_point(rho: &QuantumState, frame: &CoherentFrame, a: usize, b: usize) -> Result<f64> {
    check_dims(rho, frame)?;
    Ok(rho.expectation(&frame.state(a, b)?))
}

/// Husimi map on the full lattice.
///
/// For each position index the momentum sweep is a discrete Fourier sum over
/// the diagonals of `conj(phi_j) rho_{jl} phi_l`, so the grid costs `O(N^3)`.
pub fn husimi(rho: &QuantumState, frame: &CoherentFrame) -> Result<HusimiGrid> {
    check_dims(rho, frame)?;
    let n = frame.n;
    let m = rho.matrix();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let phi = frame.position_shifted(a);
            // w[d] = sum_j conj(phi_j) rho_{j, j+d} phi_{j+d}
            let mut w = vec![C64::new(0.0, 0.0); n];
            for j in 0..n {
                let left = phi[j].conj();
                for (d, wd) in w.iter_mut().enumerate() {
                    let l = (j + d) % n;
                    *wd += left * m[(j, l)] * phi[l];
                }
            }
            (0..n)
                .map(|b| {
                    let c = (b + n - n / 2) % n;
                    let mut acc = C64::new(0.0, 0.0);
                    for (d, wd) in w.iter().enumerate() {
                        acc += wd * frame.roots[(c * d) % n];
                    }
                    acc.re
                })
                .collect()
        })
        .collect();
    HusimiGrid::from_values(DMatrix::from_fn(n, n, |a, b| columns[a][b]))
}

fn check_dims(rho: &QuantumState, frame: &CoherentFrame) -> Result<()> {
    if rho.dim() != frame.n {
        return Err(Error::DimensionMismatch {
            expected: frame.n,
            found: rho.dim(),
        });
    }
    Ok(())
}

/// `R^T(q,p) = <q,p| Lambda^T(|q,p><q,p|) |q,p>` at one lattice point.
///
/// Short horizons evolve the pure start as an ensemble of `K^T` vectors;
/// longer ones fall back to density-matrix evolution.
pub fn return_probability_point(channel: &KrausChannel, frame: &CoherentFrame, t: usize, a: usize, b: usize) -> Result<f64> {
    if channel.dim() != frame.n {
        return Err(Error::DimensionMismatch {
            expected: frame.n,
            found: channel.dim(),
        });
    }
    let psi = frame.state(a, b)?;
    let k = channel.operators().len();
    let n = frame.n;
    let ensemble_size = (k as f64).powi(t as i32);
    if ensemble_size <= (t.max(1) * n) as f64 {
        let mut ens = vec![psi.clone()];
        for _ in 0..t {
            ens = channel.apply_ensemble(&ens);
        }
        Ok(ens.iter().map(|v| psi.dotc(v).norm_sqr()).sum())
    } else {
        let mut rho = psi.clone() * psi.adjoint();
        for _ in 0..t {
            rho = channel.apply_matrix(&rho)?;
        }
        Ok(psi.dotc(&(rho * &psi)).re)
    }
}

/// Return probabilities at the listed lattice points.
pub fn return_probability_points(
    channel: &KrausChannel,
    frame: &CoherentFrame,
    t: usize,
    points: &[(usize, usize)],
) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::OutOfRange {
            name: "T",
            value: 0.0,
            reason: "return probability needs T >= 1",
        });
    }
    points
        .par_iter()
        .map(|&(a, b)| return_probability_point(channel, frame, t, a, b))
        .collect()
}

/// Return-probability map over the whole lattice.
pub fn return_probability(channel: &KrausChannel, frame: &CoherentFrame, t: usize) -> Result<HusimiGrid> {
    let n = frame.n;
    let points: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).collect();
    let values = return_probability_points(channel, frame, t, &points)?;
    HusimiGrid::from_values(DMatrix::from_fn(n, n, |a, b| values[a * n + b]))
}

/// Lattice points visited by a strided window `[q0, q1) x [p0, p1)` (indices).
pub fn lattice_window(n: usize, stride: usize, q_range: (usize, usize), p_range: (usize, usize)) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    let qs = (q_range.0..q_range.1.min(n)).step_by(stride);
    qs.flat_map(|a| (p_range.0..p_range.1.min(n)).step_by(stride).map(move |b| (a, b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{
        momentum_translation_power, position_translation, random_pure_state, sloppy_channel, ShiftMode,
    };

    #[test]
    fn reference_normalized_and_symmetric() {
        let g = reference_state(16).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-14);
        for m in 1..8 {
            assert!((g[8 - m].norm() - g[8 + m].norm()).abs() < 1e-15);
        }
        assert!(reference_state(7).is_err());
    }

    #[test]
    fn centre_state_is_reference() {
        let f = CoherentFrame::new(16).unwrap();
        let s = f.state_at(0.5, 0.5).unwrap();
        assert!((s - f.reference()).norm() < 1e-15);
        assert!(f.state_at(0.51, 0.5).is_err());
        assert!(f.state(16, 0).is_err());
    }

    #[test]
    fn lattice_state_matches_operator_definition() {
        let n = 8;
        let f = CoherentFrame::new(n).unwrap();
        let u = position_translation(n).unwrap();
        for (a, b) in [(0usize, 0usize), (3, 6), (7, 1), (4, 4)] {
            let ua = (0..(a + n - n / 2) % n).fold(f.reference().clone(), |v, _| &u * v);
            let v = momentum_translation_power(n, b as f64 - (n / 2) as f64).unwrap();
            let expected = v * ua;
            assert!((f.state(a, b).unwrap() - expected).norm() < 1e-13);
            assert!((f.state(a, b).unwrap().norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn overlaps_decay_with_distance() {
        let n = 64;
        let f = CoherentFrame::new(n).unwrap();
        let base = f.state(20, 30).unwrap();
        let sep = (2.0 * (n as f64).sqrt()).ceil() as usize;
        for (da, db) in [(sep, 0), (0, sep), (sep, sep), (n / 2, n / 2)] {
            let other = f.state((20 + da) % n, (30 + db) % n).unwrap();
            assert!(base.dotc(&other).norm() < 0.5);
        }
    }

    #[test]
    fn reference_husimi_peaks_at_centre() {
        let f = CoherentFrame::new(32).unwrap();
        let rho = QuantumState::pure(f.reference()).unwrap();
        let h = husimi(&rho, &f).unwrap();
        assert_eq!(h.argmax(), (16, 16));
        assert!((h.get(16, 16) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn husimi_examples() {
        let n = 16;
        let f = CoherentFrame::new(n).unwrap();
        let mixed = QuantumState::maximally_mixed(n).unwrap();
        let h = husimi(&mixed, &f).unwrap();
        assert!(h.values().iter().all(|v| (v - 1.0 / n as f64).abs() < 1e-14));

        let rho = QuantumState::pure(&f.state(3, 11).unwrap()).unwrap();
        let h = husimi(&rho, &f).unwrap();
        assert!((h.get(3, 11) - 1.0).abs() < 1e-12);

        let rho = random_pure_state(n, 4).unwrap();
        let h = husimi(&rho, &f).unwrap();
        assert!((h.sum() - n as f64).abs() < 1e-8);
        for a in 0..n {
            for b in 0..n {
                assert!((h.get(a, b) - husimi_point(&rho, &f, a, b).unwrap()).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn husimi_translation_covariance() {
        let n = 8;
        let f = CoherentFrame::new(n).unwrap();
        let rho = random_pure_state(n, 12).unwrap();
        let h = husimi(&rho, &f).unwrap();
        let (sa, sb) = (3usize, 5usize);
        let u = position_translation(n).unwrap();
        let ua = (0..sa).fold(crate::numerics::ComplexMatrix::identity(n, n), |acc, _| acc * &u);
        let w = ua * momentum_translation_power(n, sb as f64).unwrap();
        let moved = QuantumState::new(&w * rho.matrix() * w.adjoint()).unwrap();
        let hm = husimi(&moved, &f).unwrap();
        for a in 0..n {
            for b in 0..n {
                assert!((hm.get((a + sa) % n, (b + sb) % n) - h.get(a, b)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn return_probability_paths_agree() {
        let n = 16;
        let ch = sloppy_channel(n, 0.25, ShiftMode::Strict).unwrap();
        let f = CoherentFrame::new(n).unwrap();
        for t in [1usize, 2, 3, 6] {
            for (a, b) in [(0usize, 0usize), (5, 9), (12, 3)] {
                let fast = return_probability_point(&ch, &f, t, a, b).unwrap();
                let psi = f.state(a, b).unwrap();
                let mut rho = QuantumState::pure(&psi).unwrap();
                for _ in 0..t {
                    rho = crate::quantum::apply_channel(&ch, &rho).unwrap();
                }
                let slow = rho.expectation(&psi);
                assert!((fast - slow).abs() < 1e-12, "t={t}");
                assert!((0.0..=1.0 + 1e-12).contains(&fast));
            }
        }
        assert!(return_probability_points(&ch, &f, 0, &[(0, 0)]).is_err());
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(lattice_distance(32, (0, 0), (31, 31)), 2f64.sqrt());
        assert_eq!(lattice_distance(32, (1, 2), (4, 6)), 5.0);
        let g = HusimiGrid::from_values(DMatrix::from_fn(4, 4, |a, b| if (a, b) == (1, 2) { 3.0 } else { 1.0 })).unwrap();
        assert_eq!(g.local_maxima()[0], (1, 2, 3.0));
        assert_eq!(g.median(), 1.0);
        assert!((g.fraction_above(0.5) - 4.0 / 18.0).abs() < 1e-15);
        assert_eq!(lattice_window(8, 2, (0, 8), (2, 5)), vec![(0, 2), (0, 4), (2, 2), (2, 4), (4, 2), (4, 4), (6, 2), (6, 4)]);
        let f = CoherentFrame::new(32).unwrap();
        assert_eq!(f.nearest_lattice(1.0 / 3.0, 0.5), (11, 16));
        assert_eq!(f.nearest_lattice(0.999, 0.0), (0, 0));
    }
}
