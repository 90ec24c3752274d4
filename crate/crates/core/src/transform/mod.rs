//! Fourier multipliers on periodic grids, weighted operator norms and
//! truncated product kernels.
//!
//! Grids discretize the unit torus `[0, 1)^d` at cell centres
//! `(k + 1/2) / n`, so a singularity at a lattice point `j / n` is never
//! sampled. Every multiplier annihilates the zero frequency. Odd symbols also
//! vanish at the Nyquist frequency of an even axis, which keeps real input
//! real.

pub mod kernel;
pub mod norm;

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::domain::Factor;
use crate::error::{Error, Result};
use crate::hermitian::{CVector, C64};

pub use kernel::{
    kernel_condition_estimates, truncated_convolution, truncated_convolution_direct, Kernel, KernelConditionEstimate, KernelRule, KERNEL_CATALOG,
    SweepSpec, TruncatedKernel,
};
pub use norm::{
    lifted_weighted_norm, norm_refinement, uniform_boundedness_sweep, weighted_operator_norm, NormEstimate, NormOptions, NormTrace,
    SweepEntry, SweepTable,
};

/// Periodic cell-centred grid; `split` marks the first axis of the second
/// factor on a product torus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    pub counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<usize>,
}

impl PeriodicGrid {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid(format!("periodic counts {counts:?} must be >= 2 on every axis")));
        }
        Ok(Self { counts, split: None })
    }

    /// `[n_x; m]` then `[n_y; n]` axes.
    pub fn product(x: &[usize], y: &[usize]) -> Result<Self> {
        let mut counts = x.to_vec();
        counts.extend_from_slice(y);
        let mut g = Self::new(counts)?;
        if x.is_empty() || y.is_empty() {
            return Err(Error::InvalidGrid("both factors need at least one axis".into()));
        }
        g.split = Some(x.len());
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    /// Multi-index of a flat index, last axis fastest.
    pub fn index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.counts[a];
            flat /= self.counts[a];
        }
        idx
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.counts).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .iter()
            .zip(&self.counts)
            .map(|(&i, &n)| (i as f64 + 0.5) / n as f64)
            .collect()
    }

    /// Signed integer frequency of each axis at a flat index.
    pub fn frequency(&self, flat: usize) -> Vec<i64> {
        self.index(flat)
            .iter()
            .zip(&self.counts)
            .map(|(&i, &n)| signed(i, n))
            .collect()
    }

    /// Signed lattice offset `i` in `[-n/2, n/2)` of an index.
    pub fn offset(i: usize, n: usize) -> i64 {
        signed(i, n)
    }

    pub fn factor_axes(&self, factor: Factor) -> Result<std::ops::Range<usize>> {
        let s = self
            .split
            .ok_or_else(|| Error::InvalidGrid("grid is not a product grid".into()))?;
        Ok(match factor {
            Factor::X => 0..s,
            Factor::Y => s..self.dim(),
        })
    }
}

fn signed(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

fn is_nyquist(i: usize, n: usize) -> bool {
    n % 2 == 0 && i == n / 2
}

/// In-place multi-dimensional DFT (unnormalized forward, `1/len` inverse).
pub fn fft_nd(data: &mut [C64], counts: &[usize], inverse: bool) {
    let total: usize = counts.iter().product();
    assert_eq!(data.len(), total);
    let mut planner = FftPlanner::new();
    let mut stride = total;
    for &n in counts {
        stride /= n;
        let fft: Arc<dyn Fft<f64>> = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let mut line = vec![C64::new(0.0, 0.0); n];
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, v) in line.iter().enumerate() {
                    data[base + k * stride] = *v;
                }
            }
        }
    }
    if inverse {
        let s = 1.0 / total as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// `C^N`-valued function on a periodic grid, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGridFunction {
    pub grid: PeriodicGrid,
    pub components: Vec<Vec<C64>>,
}

impl DiscreteGridFunction {
    pub fn zeros(grid: PeriodicGrid, n: usize) -> Self {
        let len = grid.len();
        Self {
            grid,
            components: vec![vec![C64::new(0.0, 0.0); len]; n],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, n: usize, f: impl Fn(&[f64]) -> CVector) -> Result<Self> {
        let mut out = Self::zeros(grid, n);
        for i in 0..out.grid.len() {
            let v = f(&out.grid.point(i));
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("value of length {} for N = {n}", v.len())));
            }
            for j in 0..n {
                out.components[j][i] = v[j];
            }
        }
        Ok(out)
    }

    pub fn scalar(grid: PeriodicGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} values on a grid of {}", values.len(), grid.len())));
        }
        Ok(Self {
            grid,
            components: vec![values],
        })
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn value(&self, i: usize) -> CVector {
        CVector::from_fn(self.n(), |j, _| self.components[j][i])
    }

    /// The coordinate projection `P_j f` as a scalar function.
    pub fn component(&self, j: usize) -> Result<Self> {
        let c = self
            .components
            .get(j)
            .ok_or(Error::IndexOutOfRange { index: j, dim: self.n() })?;
        Self::scalar(self.grid.clone(), c.clone())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Scalar linear operator on a periodic grid, with its adjoint.
pub trait GridOperator: Sync {
    fn grid(&self) -> &PeriodicGrid;
    fn apply_scalar(&self, data: &[C64]) -> Vec<C64>;
    fn adjoint_scalar(&self, data: &[C64]) -> Vec<C64>;
}

/// Per-frequency symbol in the grid's DFT layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMultiplierOp {
    pub grid: PeriodicGrid,
    pub symbol: Vec<C64>,
    pub label: String,
}

impl FourierMultiplierOp {
    pub fn from_symbol(grid: PeriodicGrid, label: impl Into<String>, f: impl Fn(usize) -> C64) -> Self {
        let mut symbol: Vec<C64> = (0..grid.len()).map(f).collect();
        symbol[0] = C64::new(0.0, 0.0);
        Self {
            grid,
            symbol,
            label: label.into(),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        self.symbol.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn run(&self, data: &[C64], adjoint: bool) -> Vec<C64> {
        let mut buf = data.to_vec();
        fft_nd(&mut buf, &self.grid.counts, false);
        for (v, m) in buf.iter_mut().zip(&self.symbol) {
            *v *= if adjoint { m.conj() } else { *m };
        }
        fft_nd(&mut buf, &self.grid.counts, true);
        buf
    }
}

impl GridOperator for FourierMultiplierOp {
    fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    fn apply_scalar(&self, data: &[C64]) -> Vec<C64> {
        self.run(data, false)
    }

    fn adjoint_scalar(&self, data: &[C64]) -> Vec<C64> {
        self.run(data, true)
    }
}

/// Applies a multiplier to every component of `f`.
pub fn apply_multiplier(op: &FourierMultiplierOp, f: &DiscreteGridFunction) -> Result<DiscreteGridFunction> {
    lifted_apply(op, f)
}

/// Applies a scalar operator to each component independently.
pub fn lifted_apply(op: &dyn GridOperator, f: &DiscreteGridFunction) -> Result<DiscreteGridFunction> {
    if op.grid() != &f.grid {
        return Err(Error::DimensionMismatch(format!(
            "operator on {:?} applied to a function on {:?}",
            op.grid().counts,
            f.grid.counts
        )));
    }
    Ok(DiscreteGridFunction {
        grid: f.grid.clone(),
        components: f.components.iter().map(|c| op.apply_scalar(c)).collect(),
    })
}

/// Hilbert transform along one axis: symbol `-i sgn(k_axis)`, so
/// `cos(2 pi x) -> sin(2 pi x)`.
pub fn hilbert_op(grid: &PeriodicGrid, axis: usize) -> Result<FourierMultiplierOp> {
    if axis >= grid.dim() {
        return Err(Error::IndexOutOfRange { index: axis, dim: grid.dim() });
    }
    let n = grid.counts[axis];
    Ok(FourierMultiplierOp::from_symbol(grid.clone(), format!("H_{axis}"), |flat| {
        let i = grid.index(flat)[axis];
        if is_nyquist(i, n) {
            return C64::new(0.0, 0.0);
        }
        C64::new(0.0, -(signed(i, n).signum() as f64))
    }))
}

fn riesz_on_axes(grid: &PeriodicGrid, axes: std::ops::Range<usize>, j: usize, label: String) -> FourierMultiplierOp {
    let n_j = grid.counts[j];
    FourierMultiplierOp::from_symbol(grid.clone(), label, |flat| {
        let idx = grid.index(flat);
        if is_nyquist(idx[j], n_j) {
            return C64::new(0.0, 0.0);
        }
        let freq = grid.frequency(flat);
        let mag = axes.clone().map(|a| (freq[a] as f64).powi(2)).sum::<f64>().sqrt();
        if mag == 0.0 {
            return C64::new(0.0, 0.0);
        }
        C64::new(0.0, freq[j] as f64 / mag)
    })
}

/// Riesz transform `R_j` with symbol `i xi_j / |xi|`. In one dimension this
/// is `-H`.
pub fn riesz_op(grid: &PeriodicGrid, j: usize) -> Result<FourierMultiplierOp> {
    if j >= grid.dim() {
        return Err(Error::IndexOutOfRange { index: j, dim: grid.dim() });
    }
    Ok(riesz_on_axes(grid, 0..grid.dim(), j, format!("R_{j}")))
}

/// `R_i` of one factor tensored with the identity on the other: symbol
/// `i xi_i / |xi_factor|`.
pub fn partial_riesz_op(grid: &PeriodicGrid, factor: Factor, i: usize) -> Result<FourierMultiplierOp> {
    let axes = grid.factor_axes(factor)?;
    if i >= axes.len() {
        return Err(Error::IndexOutOfRange { index: i, dim: axes.len() });
    }
    let j = axes.start + i;
    Ok(riesz_on_axes(grid, axes, j, format!("R_{i}^{factor:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_fn(grid: &PeriodicGrid, n: usize, seed: u64) -> DiscreteGridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DiscreteGridFunction {
            grid: grid.clone(),
            components: (0..n)
                .map(|_| (0..grid.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect(),
        }
    }

    fn real_fn(grid: &PeriodicGrid, f: impl Fn(&[f64]) -> f64) -> DiscreteGridFunction {
        DiscreteGridFunction::scalar(grid.clone(), (0..grid.len()).map(|i| C64::new(f(&grid.point(i)), 0.0)).collect()).unwrap()
    }

    #[test]
    fn fft_round_trip() {
        let grid = PeriodicGrid::new(vec![6, 8]).unwrap();
        let f = random_fn(&grid, 1, 1);
        let mut buf = f.components[0].clone();
        fft_nd(&mut buf, &grid.counts, false);
        let naive: C64 = f.components[0].iter().sum();
        assert!((buf[0] - naive).norm() < 1e-12);
        fft_nd(&mut buf, &grid.counts, true);
        assert!(buf.iter().zip(&f.components[0]).all(|(a, b)| (a - b).norm() < 1e-13));
    }

    #[test]
    fn hilbert_of_cosine() {
        let grid = PeriodicGrid::new(vec![64]).unwrap();
        let h = hilbert_op(&grid, 0).unwrap();
        let out = apply_multiplier(&h, &real_fn(&grid, |t| (2.0 * PI * t[0]).cos())).unwrap();
        let expect = real_fn(&grid, |t| (2.0 * PI * t[0]).sin());
        assert!(out.max_abs_diff(&expect) < 1e-9);
        let zero = DiscreteGridFunction::zeros(grid.clone(), 1);
        assert_eq!(apply_multiplier(&h, &zero).unwrap().max_abs_diff(&zero), 0.0);
        let constant = real_fn(&grid, |_| 3.0);
        assert!(apply_multiplier(&h, &constant).unwrap().max_abs_diff(&zero) < 1e-13);
    }

    #[test]
    fn real_input_real_output() {
        let grid = PeriodicGrid::new(vec![32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = DiscreteGridFunction::scalar(grid.clone(), (0..32).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect()).unwrap();
        for f in [real_fn(&grid, |t| (t[0] * 9.0).exp()), noise] {
            let out = apply_multiplier(&hilbert_op(&grid, 0).unwrap(), &f).unwrap();
            assert!(out.components[0].iter().all(|z| z.im.abs() < 1e-10));
        }
    }

    #[test]
    fn riesz_in_one_dimension_is_minus_hilbert() {
        let grid = PeriodicGrid::new(vec![16]).unwrap();
        let r = riesz_op(&grid, 0).unwrap();
        let h = hilbert_op(&grid, 0).unwrap();
        assert!(r.symbol.iter().zip(&h.symbol).all(|(a, b)| (a + b).norm() == 0.0));
    }

    #[test]
    fn riesz_symbols_are_normalized() {
        let grid = PeriodicGrid::new(vec![7, 9]).unwrap();
        let ops: Vec<_> = (0..2).map(|j| riesz_op(&grid, j).unwrap()).collect();
        for flat in 1..grid.len() {
            let s: f64 = ops.iter().map(|o| o.symbol[flat].norm_sqr()).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert!(ops.iter().all(|o| o.max_modulus() <= 1.0 + 1e-12));
        assert!(matches!(riesz_op(&grid, 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn partial_riesz_on_separable_data() {
        let grid = PeriodicGrid::product(&[16], &[8]).unwrap();
        let op = partial_riesz_op(&grid, Factor::X, 0).unwrap();
        let g = |x: f64| (2.0 * PI * 3.0 * x).cos() + 0.5 * (2.0 * PI * x).sin();
        let rg = |x: f64| -((2.0 * PI * 3.0 * x).sin() - 0.5 * (2.0 * PI * x).cos());
        let h = |y: f64| 1.0 + (2.0 * PI * 2.0 * y).cos();
        let out = apply_multiplier(&op, &real_fn(&grid, |t| g(t[0]) * h(t[1]))).unwrap();
        let expect = real_fn(&grid, |t| rg(t[0]) * h(t[1]));
        assert!(out.max_abs_diff(&expect) < 1e-9);
    }

    #[test]
    fn skew_adjoint_and_linear() {
        let grid = PeriodicGrid::new(vec![32]).unwrap();
        let h = hilbert_op(&grid, 0).unwrap();
        let f = random_fn(&grid, 1, 2);
        let g = random_fn(&grid, 1, 3);
        let hf = apply_multiplier(&h, &f).unwrap();
        let hg = apply_multiplier(&h, &g).unwrap();
        let ip = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>();
        assert!((ip(&hf.components[0], &g.components[0]) + ip(&f.components[0], &hg.components[0])).norm() < 1e-10);
        let sum = DiscreteGridFunction {
            grid: grid.clone(),
            components: vec![f.components[0].iter().zip(&g.components[0]).map(|(a, b)| a * 2.0 - b).collect()],
        };
        let lin = apply_multiplier(&h, &sum).unwrap();
        let expect: Vec<C64> = hf.components[0].iter().zip(&hg.components[0]).map(|(a, b)| a * 2.0 - b).collect();
        assert!(lin.components[0].iter().zip(&expect).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn lifting_acts_per_component() {
        let grid = PeriodicGrid::new(vec![16]).unwrap();
        let h = hilbert_op(&grid, 0).unwrap();
        let f = random_fn(&grid, 3, 7);
        let out = lifted_apply(&h, &f).unwrap();
        for j in 0..3 {
            let single = apply_multiplier(&h, &f.component(j).unwrap()).unwrap();
            assert_eq!(out.component(j).unwrap(), single);
        }
        let mut only = DiscreteGridFunction::zeros(grid.clone(), 2);
        only.components[1] = f.components[0].clone();
        let out = lifted_apply(&h, &only).unwrap();
        assert!(out.components[0].iter().all(|z| z.norm() == 0.0));
        let wrong = PeriodicGrid::new(vec![8]).unwrap();
        assert!(lifted_apply(&h, &DiscreteGridFunction::zeros(wrong, 1)).is_err());
    }
}
