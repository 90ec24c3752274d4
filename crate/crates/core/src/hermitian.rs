//! Hermitian matrices and their functional calculus.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative asymmetry tolerated before construction fails.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue relative to the spectral radius.
pub const EIGEN_FLOOR: f64 = 1e-13;

/// Square complex matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Symmetrizes `m`, failing when `|m - m*|` exceeds `1e-12` of its size.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix is not square",
                m.nrows(),
                m.ncols()
            )));
        }
        let adj = m.adjoint();
        let asym = (&m - &adj).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        if asym > HERMITIAN_TOL * scale || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NotHermitian(asym / scale));
        }
        Ok(Self((m + adj).scale(0.5)))
    }

    /// Wraps a matrix known to be Hermitian up to rounding, symmetrizing it.
    pub(crate) fn trusted(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        Self(CMatrix::from_diagonal(&CVector::from_iterator(
            d.len(),
            d.iter().map(|&x| C64::new(x, 0.0)),
        )))
    }

    /// Row-major entries.
    pub fn from_rows(n: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        Self::new(CMatrix::from_row_slice(n, n, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(self.0.scale(c))
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// Real determinant (product of eigenvalues).
    pub fn det(&self) -> f64 {
        match self.dim() {
            1 => self.0[(0, 0)].re,
            2 => {
                let m = &self.0;
                m[(0, 0)].re * m[(1, 1)].re - m[(0, 1)].norm_sqr()
            }
            _ => self.0.determinant().re,
        }
    }

    /// `<x, M x>`, real for Hermitian `M`.
    pub fn quadratic_form(&self, x: &CVector) -> f64 {
        x.dotc(&(&self.0 * x)).re
    }

    /// Ascending eigenvalues with phase-normalized eigenvectors.
    pub fn eigen(&self) -> Eigen {
        match self.dim() {
            1 => Eigen {
                values: vec![self.0[(0, 0)].re],
                vectors: CMatrix::identity(1, 1),
            },
            2 => eigen2(&self.0),
            _ => {
                let se = SymmetricEigen::new(self.0.clone());
                let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
                order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
                let n = self.dim();
                let mut vectors = CMatrix::zeros(n, n);
                let mut values = Vec::with_capacity(n);
                for (k, &i) in order.iter().enumerate() {
                    values.push(se.eigenvalues[i]);
                    vectors.set_column(k, &fix_phase(se.eigenvectors.column(i).into_owned()));
                }
                Eigen { values, vectors }
            }
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 2 {
            let (lo, hi) = eigenvalues2(&self.0);
            return vec![lo, hi];
        }
        self.eigen().values
    }

    /// `M^s` through the eigendecomposition.
    pub fn power(&self, s: f64) -> Result<Self> {
        self.eigen().checked()?.power(s)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.power(-1.0)
    }

    /// Checks positive definiteness against the eigenvalue floor.
    pub fn check_positive_definite(&self) -> Result<()> {
        let ev = self.eigenvalues();
        check_floor(ev[0], ev[ev.len() - 1])
    }
}

fn check_floor(min: f64, max: f64) -> Result<()> {
    if !(min > 0.0) || min <= EIGEN_FLOOR * max || !max.is_finite() {
        return Err(Error::NearSingular { min, max });
    }
    Ok(())
}

impl Serialize for HermitianMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..n)
            .map(|i| (0..n).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix rows must have equal length"));
        }
        let entries: Vec<C64> = rows.iter().flatten().map(|z| C64::new(z[0], z[1])).collect();
        HermitianMatrix::from_rows(n, &entries).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition `M = U diag(values) U*`, values ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// Fails with `NearSingular` below the eigenvalue floor.
    pub fn checked(self) -> Result<Self> {
        check_floor(self.values[0], self.values[self.values.len() - 1])?;
        Ok(self)
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn vector(&self, i: usize) -> CVector {
        self.vectors.column(i).into_owned()
    }

    /// `U f(diag) U*`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let u = &self.vectors;
        let n = u.nrows();
        let mut scaled = u.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let v = f(lam);
            for i in 0..n {
                scaled[(i, k)] *= v;
            }
        }
        HermitianMatrix::trusted(scaled * u.adjoint())
    }

    pub fn power(&self, s: f64) -> Result<HermitianMatrix> {
        check_floor(self.min(), self.max())?;
        Ok(self.apply(|l| l.powf(s)))
    }
}

/// Makes the largest-modulus entry real and positive; ties go to the first.
fn fix_phase(mut v: CVector) -> CVector {
    let norm = v.norm();
    if norm == 0.0 {
        return v;
    }
    v /= C64::new(norm, 0.0);
    let big = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let k = v
        .iter()
        .position(|z| z.norm() >= big * (1.0 - 1e-12))
        .unwrap_or(0);
    let phase = v[k] / v[k].norm();
    v.apply(|z| *z /= phase);
    v[k] = C64::new(v[k].norm(), 0.0);
    v
}

fn eigenvalues2(m: &CMatrix) -> (f64, f64) {
    let (a, d, b) = (m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]);
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b.norm());
    let hi = mean + rad;
    let det = a * d - b.norm_sqr();
    let lo = if hi > 0.0 && mean > rad { det / hi } else { mean - rad };
    (lo, hi)
}

fn eigen2(m: &CMatrix) -> Eigen {
    let (a, d, b) = (m[(0, 0)].re, m[(1, 1)].re, m[(0, 1)]);
    let (lo, hi) = eigenvalues2(m);
    let scale = a.abs().max(d.abs()).max(b.norm());
    if hi - lo <= 1e-15 * scale {
        return Eigen {
            values: vec![lo, hi],
            vectors: CMatrix::identity(2, 2),
        };
    }
    let vec_for = |lam: f64| {
        // (M - lam) v = 0 has the two candidate solutions below
        let v1 = CVector::from_vec(vec![b, C64::new(lam - a, 0.0)]);
        let v2 = CVector::from_vec(vec![C64::new(lam - d, 0.0), b.conj()]);
        fix_phase(if v1.norm() >= v2.norm() { v1 } else { v2 })
    };
    let mut vectors = CMatrix::zeros(2, 2);
    vectors.set_column(0, &vec_for(lo));
    vectors.set_column(1, &vec_for(hi));
    Eigen {
        values: vec![lo, hi],
        vectors,
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    match (m.nrows(), m.ncols()) {
        (1, 1) => m[(0, 0)].norm(),
        (2, 2) => {
            let g = m.adjoint() * m;
            eigenvalues2(&g).1.max(0.0).sqrt()
        }
        _ => {
            let g = HermitianMatrix::trusted(m.adjoint() * m);
            g.eigen().max().max(0.0).sqrt()
        }
    }
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Random Hermitian positive definite matrix `G G* + n I / 4` with complex
/// Gaussian `G`.
pub fn random_positive_definite<R: Rng + ?Sized>(rng: &mut R, n: usize) -> HermitianMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &g * g.adjoint() + CMatrix::identity(n, n).scale(0.25 * n as f64);
    HermitianMatrix::trusted(m)
}

/// Random complex unit vector.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let norm = v.norm();
        if norm > 1e-8 {
            return v / C64::new(norm, 0.0);
        }
    }
}
