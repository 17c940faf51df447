//! The classical sloppy baker map on the unit torus, its Frobenius-Perron
//! evolution on a cell grid and its periodic orbits.
//!
//! Points live on the half-open square `[0,1)^2`; `q = 1` and `p = 1` are
//! identified with 0. Grid cell `(i, j)` covers
//! `[i/M, (i+1)/M) x [j/M, (j+1)/M)` in `(q, p)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Result<Self> {
        for (name, v) in [("q", q), ("p", p)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    reason: "coordinates must lie in [0, 1)",
                });
            }
        }
        Ok(Self { q, p })
    }

    /// Reduce both coordinates modulo 1.
    pub fn wrapped(q: f64, p: f64) -> Self {
        Self {
            q: wrap_unit(q),
            p: wrap_unit(p),
        }
    }

    /// Distance on the torus.
    pub fn torus_distance(&self, other: &PhasePoint) -> f64 {
        let dq = circle_gap(self.q, other.q);
        let dp = circle_gap(self.p, other.p);
        (dq * dq + dp * dp).sqrt()
    }
}

fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

fn circle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloppyParams {
    delta: f64,
}

impl SloppyParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                reason: "delta must lie in [0, 1]",
            });
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `(q, p) -> (2q - [2q], (p + [2q](1 - delta)) / 2)`.
pub fn sloppy_map(x: PhasePoint, params: SloppyParams) -> PhasePoint {
    let fold = (2.0 * x.q).floor();
    let q = 2.0 * x.q - fold;
    let p = 0.5 * (x.p + fold * (1.0 - params.delta));
    // q can only reach 1.0 through rounding when x.q is within an ulp of 1.
    PhasePoint {
        q: if q >= 1.0 { 0.0 } else { q },
        p,
    }
}

/// The reversible baker map (`delta = 0`).
pub fn baker_step(x: PhasePoint) -> PhasePoint {
    sloppy_map(x, SloppyParams { delta: 0.0 })
}

/// How the image of the top half is placed on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    /// Require `M * delta / 2` to be an integer; the pushforward is exact.
    #[default]
    Strict,
    /// Any delta; mass landing between rows is split by overlap length.
    Fractional,
}

/// Nonnegative piecewise-constant density on an `M x M` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalDensity {
    values: DMatrix<f64>,
}

impl ClassicalDensity {
    /// Wrap cell values; checks shape, sign and normalization (`1e-12`).
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let m = values.nrows();
        if m == 0 || !m.is_multiple_of(2) || values.ncols() != m {
            return Err(Error::InvalidDimension {
                dim: m,
                reason: "density grid must be square with positive even side",
            });
        }
        if let Some(&v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::OutOfRange {
                name: "density value",
                value: v,
                reason: "densities must be finite and nonnegative",
            });
        }
        let d = Self { values };
        let mass = d.total_mass();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange {
                name: "total mass",
                value: mass,
                reason: "density must integrate to 1",
            });
        }
        Ok(d)
    }

    /// Rescale nonnegative weights to unit mass.
    pub fn normalized(mut values: DMatrix<f64>) -> Result<Self> {
        let m = values.nrows() as f64;
        let mass: f64 = values.iter().sum::<f64>() / (m * m);
        if mass.is_nan() || mass <= 0.0 {
            return Err(Error::OutOfRange {
                name: "total mass",
                value: mass,
                reason: "cannot normalize a density with no mass",
            });
        }
        values /= mass;
        Self::new(values)
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(m, m, 1.0))
    }

    /// All mass in cell `(i, j)`.
    pub fn point_mass(m: usize, i: usize, j: usize) -> Result<Self> {
        if i >= m || j >= m {
            return Err(Error::InvalidDimension {
                dim: i.max(j),
                reason: "cell index outside the grid",
            });
        }
        let mut values = DMatrix::zeros(m, m);
        values[(i, j)] = (m * m) as f64;
        Self::new(values)
    }

    /// Periodized isotropic Gaussian centred at `center` with variance
    /// `1 / (4 pi n)` per axis, sampled at cell centres and normalized.
    /// This matches the position footprint of a coherent state at size `n`.
    pub fn gaussian(m: usize, center: PhasePoint, n: usize) -> Result<Self> {
        let var = 1.0 / (4.0 * PI * n as f64);
        let profile = |x: f64, c: f64| -> f64 {
            (-3..=3)
                .map(|k| {
                    let d = x - c + k as f64;
                    (-d * d / (2.0 * var)).exp()
                })
                .sum()
        };
        let h = 1.0 / m as f64;
        let qs: Vec<f64> = (0..m).map(|i| profile((i as f64 + 0.5) * h, center.q)).collect();
        let ps: Vec<f64> = (0..m).map(|j| profile((j as f64 + 0.5) * h, center.p)).collect();
        Self::normalized(DMatrix::from_fn(m, m, |i, j| qs[i] * ps[j]))
    }

    pub fn resolution(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// `(1/M^2) * sum of values`, summed in fixed column-major order.
    pub fn total_mass(&self) -> f64 {
        let m = self.resolution() as f64;
        self.values.iter().sum::<f64>() / (m * m)
    }

    /// Mass in rows whose lower edge is at or above `p`.
    pub fn mass_above(&self, p: f64) -> f64 {
        let m = self.resolution();
        let first = ((p * m as f64) - ALIGN_TOL).ceil().max(0.0) as usize;
        let mut acc = 0.0;
        for j in first.min(m)..m {
            for i in 0..m {
                acc += self.values[(i, j)];
            }
        }
        acc / (m * m) as f64
    }

    /// `integral |f - g|`.
    pub fn l1_distance(&self, other: &ClassicalDensity) -> Result<f64> {
        if self.resolution() != other.resolution() {
            return Err(Error::DimensionMismatch {
                expected: self.resolution(),
                found: other.resolution(),
            });
        }
        let m = self.resolution() as f64;
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / (m * m))
    }

    /// Cell with the largest value (first in column-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let m = self.resolution();
        let mut best = (0, 0);
        for j in 0..m {
            for i in 0..m {
                if self.values[(i, j)] > self.values[best] {
                    best = (i, j);
                }
            }
        }
        best
    }
}

fn require_integer(x: f64) -> Option<i64> {
    let r = x.round();
    ((x - r).abs() <= ALIGN_TOL).then_some(r as i64)
}

/// One Frobenius-Perron step on an aligned grid.
pub fn frobenius_perron_step(f: &ClassicalDensity, params: SloppyParams) -> Result<ClassicalDensity> {
    frobenius_perron_step_with(f, params, Alignment::Strict)
}

/// One Frobenius-Perron step.
///
/// Each source cell is affine-mapped onto a rectangle two cells wide and
/// half a cell high; its mass is split evenly between the two target columns
/// and deposited on a half-row grid, which is then summed pairwise.
pub fn frobenius_perron_step_with(
    f: &ClassicalDensity,
    params: SloppyParams,
    alignment: Alignment,
) -> Result<ClassicalDensity> {
    let m = f.resolution();
    let delta = params.delta;
    // Offset of the top-half image in half-row units: M (1 - delta).
    let offset = m as f64 * (1.0 - delta);
    if alignment == Alignment::Strict && require_integer(m as f64 * delta / 2.0).is_none() {
        let suggested = (m as f64 * delta / 2.0).round() * 2.0 / m as f64;
        return Err(Error::MisalignedGrid {
            m,
            delta,
            requirement: "M * delta / 2 must be an integer",
            suggested,
        });
    }
    let half = m / 2;
    let rows = 2 * m;
    // Density contributions accumulated per (column, half-row).
    let mut fine = DMatrix::<f64>::zeros(m, rows);
    for i in 0..m {
        let left = i < half;
        let (c0, c1) = if left { (2 * i, 2 * i + 1) } else { (2 * i - m, 2 * i - m + 1) };
        for j in 0..m {
            let v = f.values[(i, j)];
            if v == 0.0 {
                continue;
            }
            if left {
                fine[(c0, j)] += v;
                fine[(c1, j)] += v;
            } else {
                let x = j as f64 + offset;
                let base = x.floor();
                let frac = x - base;
                let r = base as usize;
                if frac <= ALIGN_TOL {
                    fine[(c0, r)] += v;
                    fine[(c1, r)] += v;
                } else {
                    fine[(c0, r)] += v * (1.0 - frac);
                    fine[(c1, r)] += v * (1.0 - frac);
                    if r + 1 < rows {
                        fine[(c0, r + 1)] += v * frac;
                        fine[(c1, r + 1)] += v * frac;
                    }
                }
            }
        }
    }
    // Each half-row carries half the density of a full cell: halving for the
    // doubled width, and the two half-rows of a cell add.
    let out = DMatrix::from_fn(m, m, |i, r| 0.5 * (fine[(i, 2 * r)] + fine[(i, 2 * r + 1)]));
    Ok(ClassicalDensity { values: out })
}

/// Evolve `steps` times, returning every intermediate density (including the start).
pub fn evolve_density(f: &ClassicalDensity, params: SloppyParams, steps: usize, alignment: Alignment) -> Result<Vec<ClassicalDensity>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(f.clone());
    for _ in 0..steps {
        let next = frobenius_perron_step_with(out.last().expect("non-empty"), params, alignment)?;
        out.push(next);
    }
    Ok(out)
}

/// `f* = 1/(1 - delta)` on `[0,1) x [0, 1 - delta)` and 0 above.
pub fn invariant_density(params: SloppyParams, m: usize) -> Result<ClassicalDensity> {
    let delta = params.delta;
    if delta >= 1.0 {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            reason: "the invariant density collapses onto p = 0 at delta = 1",
        });
    }
    let Some(rows) = require_integer(m as f64 * (1.0 - delta)) else {
        let suggested = 1.0 - (m as f64 * (1.0 - delta)).round() / m as f64;
        return Err(Error::MisalignedGrid {
            m,
            delta,
            requirement: "M * (1 - delta) must be an integer",
            suggested,
        });
    };
    let level = 1.0 / (1.0 - delta);
    ClassicalDensity::new(DMatrix::from_fn(m, m, |_, j| if (j as i64) < rows { level } else { 0.0 }))
}

/// Reverse the order of the low `t` bits of `n`.
pub fn bit_reverse(n: u64, t: u32) -> Result<u64> {
    if t > 63 || n >= (1u64 << t) {
        return Err(Error::OutOfRange {
            name: "n",
            value: n as f64,
            reason: "n must satisfy 0 <= n < 2^T",
        });
    }
    if t == 0 {
        return Ok(0);
    }
    Ok(n.reverse_bits() >> (64 - t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Primitive period; divides the requested period.
    #[serde(rename = "T")]
    pub period: u32,
    /// Smallest seed label `n` among the cycle's rotations.
    pub n: u64,
    pub points: Vec<PhasePoint>,
}

pub const MAX_ORBIT_PERIOD: u32 = 20;

/// Seed point for label `n` at period `t`:
/// `(n / (2^t - 1), r(n) (1 - delta) / (2^t - 1))`.
pub fn orbit_seed(n: u64, t: u32, params: SloppyParams) -> Result<PhasePoint> {
    let denom = ((1u64 << t) - 1) as f64;
    let r = bit_reverse(n, t)?;
    Ok(PhasePoint::wrapped(n as f64 / denom, r as f64 * (1.0 - params.delta) / denom))
}

/// All cycles whose period divides `t`, one record per cycle.
///
/// Labels run over `0..2^t - 1`; the label `2^t - 1` would give `q = 1`,
/// which is the point `q = 0` on the torus. Each returned point is checked to
/// return to itself after `t` applications of [`sloppy_map`].
pub fn periodic_orbits(t: u32, params: SloppyParams) -> Result<Vec<PeriodicOrbit>> {
    if t == 0 || t > MAX_ORBIT_PERIOD {
        return Err(Error::OutOfRange {
            name: "T",
            value: t as f64,
            reason: "period must lie in 1..=20",
        });
    }
    let modulus = (1u64 << t) - 1;
    let rotate = |n: u64| (2 * n) % modulus;
    // Doubling errors grow like 2^t per lap.
    let tol = 1e-12f64.max(4.0 * f64::EPSILON * (1u64 << t) as f64);

    let mut orbits = Vec::new();
    for n in 0..modulus {
        let mut labels = vec![n];
        let mut next = rotate(n);
        while next != n {
            labels.push(next);
            next = rotate(next);
        }
        if labels.iter().any(|&l| l < n) {
            continue;
        }
        let points = labels.iter().map(|&l| orbit_seed(l, t, params)).collect::<Result<Vec<_>>>()?;
        for (&label, &pt) in labels.iter().zip(&points) {
            let back = (0..t).fold(pt, |x, _| sloppy_map(x, params));
            let drift = back.torus_distance(&pt);
            if drift > tol {
                return Err(Error::OrbitCheck { label, period: t, drift });
            }
        }
        orbits.push(PeriodicOrbit {
            period: labels.len() as u32,
            n,
            points,
        });
    }
    Ok(orbits)
}
