//! Lower bounds for operator norms on `L^p(W)` over a periodic grid.
//!
//! With `A = M^(1/p) T M^(-1/p)` (`M` pointwise multiplication by `W`),
//! `|T|_{L^p(W)} = |A|_{L^p}`. For `p = 2` this is the power method on
//! `A* A`; otherwise Boyd's iteration `x <- J_q(A* J_p(A x))`. Every ratio
//! reported was attained by an explicit function, so estimates are lower
//! bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{truncated_operator, Kernel, TruncatedKernel};
use super::{DiscreteGridFunction, FourierMultiplierOp, GridOperator, PeriodicGrid};
use crate::domain::LebesgueExponent;
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, C64};
use crate::verdict::{classify_growth, loglog_slope, TracePoint, Verdict};
use crate::weight::MatrixWeight;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormOptions {
    pub trials: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Relative change below which an iteration counts as converged.
    pub tol: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            trials: 16,
            iterations: 200,
            seed: 0,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub estimate: f64,
    pub converged: bool,
    pub trials: usize,
    pub iterations: usize,
    pub counts: Vec<usize>,
    pub p: f64,
}

type Field = Vec<Vec<C64>>;

/// `W^(1/p)` and `W^(-1/p)` at the grid points, with the unit torus mapped
/// affinely onto the weight's window.
fn weight_factors(w: &MatrixWeight, grid: &PeriodicGrid, p: f64) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    if w.domain.dim() != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}-dimensional weight on a {}-dimensional grid",
            w.domain.dim(),
            grid.dim()
        )));
    }
    let pairs = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let t: Vec<f64> = grid
                .point(i)
                .iter()
                .zip(&w.domain.window)
                .map(|(u, iv)| iv.lo + u * iv.len())
                .collect();
            let e = w.spectral(&t)?;
            Ok((e.apply(|l| l.powf(1.0 / p)).into_matrix(), e.apply(|l| l.powf(-1.0 / p)).into_matrix()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().unzip())
}

fn pointwise(mats: &[CMatrix], f: &Field) -> Field {
    let n = f.len();
    let len = mats.len();
    let mut out = vec![vec![C64::new(0.0, 0.0); len]; n];
    for (t, m) in mats.iter().enumerate() {
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += m[(i, j)] * f[j][t];
            }
            out[i][t] = acc;
        }
    }
    out
}

fn lifted(op: &dyn GridOperator, f: &Field, adjoint: bool) -> Field {
    f.par_iter()
        .map(|c| if adjoint { op.adjoint_scalar(c) } else { op.apply_scalar(c) })
        .collect()
}

fn point_norms(f: &Field) -> Vec<f64> {
    let len = f[0].len();
    (0..len).map(|t| f.iter().map(|c| c[t].norm_sqr()).sum::<f64>().sqrt()).collect()
}

fn lp_norm(f: &Field, p: f64) -> f64 {
    let h = 1.0 / f[0].len() as f64;
    (point_norms(f).iter().map(|v| v.powf(p)).sum::<f64>() * h).powf(1.0 / p)
}

/// `x -> |x|^(r-2) x` pointwise, zero where `x = 0`.
fn duality_map(f: &Field, r: f64) -> Field {
    let norms = point_norms(f);
    f.iter()
        .map(|c| {
            c.iter()
                .zip(&norms)
                .map(|(z, &m)| if m > 0.0 { z * m.powf(r - 2.0) } else { C64::new(0.0, 0.0) })
                .collect()
        })
        .collect()
}

fn scale(f: &mut Field, s: f64) {
    f.iter_mut().flatten().for_each(|z| *z *= s);
}

fn random_field(n: usize, len: usize, seed: u64, trial: usize) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    (0..n)
        .map(|_| {
            (0..len)
                .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
                .collect()
        })
        .collect()
}

/// One start of the ascent; returns the best ratio seen and whether the
/// iteration settled.
fn ascend(op: &dyn GridOperator, a: &[CMatrix], b: &[CMatrix], p: f64, mut x: Field, opts: &NormOptions) -> (f64, bool, usize) {
    let q = p / (p - 1.0);
    let apply = |x: &Field| pointwise(a, &lifted(op, &pointwise(b, x), false));
    let apply_adj = |y: &Field| pointwise(b, &lifted(op, &pointwise(a, y), true));
    let mut best = 0.0f64;
    let mut prev = f64::NAN;
    for it in 0..opts.iterations {
        let nx = lp_norm(&x, p);
        if !(nx > 0.0) {
            return (best, false, it);
        }
        scale(&mut x, 1.0 / nx);
        let y = apply(&x);
        let ratio = lp_norm(&y, p);
        best = best.max(ratio);
        if ratio == 0.0 {
            return (0.0, true, it + 1);
        }
        if (ratio - prev).abs() <= opts.tol * ratio {
            return (best, true, it + 1);
        }
        prev = ratio;
        x = if (p - 2.0).abs() < 1e-14 {
            apply_adj(&y)
        } else {
            duality_map(&apply_adj(&duality_map(&y, p)), q)
        };
    }
    (best, false, opts.iterations)
}

/// Lower bound for `|T|` on `L^p(W)`, maximized over seeded restarts. The
/// estimate is nondecreasing in both `trials` and `iterations`.
pub fn weighted_operator_norm(op: &dyn GridOperator, w: &MatrixWeight, p: &LebesgueExponent, opts: &NormOptions) -> Result<NormEstimate> {
    let grid = op.grid();
    let (a, b) = weight_factors(w, grid, p.p())?;
    let trials = opts.trials.max(1);
    let runs: Vec<(f64, bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| ascend(op, &a, &b, p.p(), random_field(w.n, grid.len(), opts.seed, trial), opts))
        .collect();
    let best = runs.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(NormEstimate {
        estimate: best,
        converged: runs.iter().all(|r| r.1),
        trials,
        iterations: runs.iter().map(|r| r.2).max().unwrap_or(0),
        counts: grid.counts.clone(),
        p: p.p(),
    })
}

/// `|f|_{L^p(W)}` on the grid.
pub fn lifted_weighted_norm(f: &DiscreteGridFunction, w: &MatrixWeight, p: &LebesgueExponent) -> Result<f64> {
    if f.n() != w.n {
        return Err(Error::DimensionMismatch(format!("N = {} function with an N = {} weight", f.n(), w.n)));
    }
    let (a, _) = weight_factors(w, &f.grid, p.p())?;
    Ok(lp_norm(&pointwise(&a, &f.components), p.p()))
}

/// Norm estimates across grid sizes with a growth verdict in the size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTrace {
    pub estimates: Vec<NormEstimate>,
    pub trace: Vec<TracePoint>,
    pub verdict: Verdict,
}

/// Runs `make_op` on the grid `[n; d]` for each size.
pub fn norm_refinement(
    make_op: impl Fn(&PeriodicGrid) -> Result<FourierMultiplierOp>,
    w: &MatrixWeight,
    p: &LebesgueExponent,
    sizes: &[usize],
    opts: &NormOptions,
) -> Result<NormTrace> {
    let d = w.domain.dim();
    let split = w.domain.kind.is_product().then(|| w.domain.kind.split());
    let estimates = sizes
        .iter()
        .map(|&n| {
            let mut grid = PeriodicGrid::new(vec![n; d])?;
            grid.split = split;
            weighted_operator_norm(&make_op(&grid)?, w, p, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let trace: Vec<TracePoint> = sizes
        .iter()
        .zip(&estimates)
        .map(|(&n, e)| TracePoint {
            x: n as f64,
            value: e.estimate,
            resolution: 1.0 / n as f64,
        })
        .collect();
    Ok(NormTrace {
        verdict: classify_growth(&trace),
        estimates,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub eps: [f64; 2],
    pub big_n: [f64; 2],
    pub estimate: NormEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub entries: Vec<SweepEntry>,
    pub max: f64,
    /// Log-log slope of the estimate against `prod N_i / eps_i`.
    pub slope: Option<f64>,
    pub verdict: Verdict,
}

/// Weighted norms of the lifted truncated operators over every `(eps, N)`
/// pair of the ladders.
pub fn uniform_boundedness_sweep(
    kernel: &Kernel,
    w: &MatrixWeight,
    p: &LebesgueExponent,
    grid: &PeriodicGrid,
    eps: &[[f64; 2]],
    big_n: &[[f64; 2]],
    opts: &NormOptions,
) -> Result<SweepTable> {
    let mut entries = Vec::new();
    for e in eps {
        for nn in big_n {
            let tk = TruncatedKernel::new(kernel.clone(), *e, *nn)?;
            let op = truncated_operator(grid, &tk)?;
            let estimate = if tk.is_degenerate() {
                NormEstimate {
                    estimate: 0.0,
                    converged: true,
                    trials: 0,
                    iterations: 0,
                    counts: grid.counts.clone(),
                    p: p.p(),
                }
            } else {
                weighted_operator_norm(&op, w, p, opts)?
            };
            entries.push(SweepEntry {
                eps: *e,
                big_n: *nn,
                estimate,
            });
        }
    }
    let max = entries.iter().map(|e| e.estimate.estimate).fold(0.0, f64::max);
    let trace: Vec<TracePoint> = entries
        .iter()
        .filter(|e| e.estimate.estimate > 0.0)
        .map(|e| TracePoint {
            x: (e.big_n[0] / e.eps[0]) * (e.big_n[1] / e.eps[1]),
            value: e.estimate.estimate,
            resolution: grid.cell_volume(),
        })
        .collect();
    Ok(SweepTable {
        slope: loglog_slope(&trace),
        verdict: classify_growth(&trace),
        entries,
        max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainDescriptor;
    use crate::hermitian::HermitianMatrix;
    use crate::transform::{hilbert_op, lifted_apply, riesz_op};
    use rand::Rng;

    fn torus1() -> DomainDescriptor {
        DomainDescriptor::torus(1).unwrap()
    }

    fn p2() -> LebesgueExponent {
        LebesgueExponent::new(2.0).unwrap()
    }

    #[test]
    fn unweighted_hilbert_is_an_isometry() {
        for n in [64, 256] {
            let grid = PeriodicGrid::new(vec![n]).unwrap();
            let est = weighted_operator_norm(&hilbert_op(&grid, 0).unwrap(), &MatrixWeight::identity(1, torus1()), &p2(), &NormOptions::default()).unwrap();
            assert!((est.estimate - 1.0).abs() < 1e-6, "{}", est.estimate);
        }
    }

    #[test]
    fn constant_matrix_weight_commutes() {
        let grid = PeriodicGrid::new(vec![8, 8]).unwrap();
        let d2 = DomainDescriptor::torus(2).unwrap();
        let w = MatrixWeight::constant(HermitianMatrix::from_real_diagonal(&[1.0, 5.0]), d2);
        let est = weighted_operator_norm(&riesz_op(&grid, 0).unwrap(), &w, &p2(), &NormOptions::default()).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-6);
    }

    #[test]
    fn more_effort_never_lowers_the_bound() {
        let grid = PeriodicGrid::new(vec![32]).unwrap();
        let w = MatrixWeight::scalar_power(0.5, Some(vec![0.5]), torus1()).unwrap();
        let op = hilbert_op(&grid, 0).unwrap();
        let p = LebesgueExponent::new(3.0).unwrap();
        let mut last = 0.0;
        for (trials, iterations) in [(1, 5), (2, 5), (2, 20), (4, 40)] {
            let est = weighted_operator_norm(&op, &w, &p, &NormOptions { trials, iterations, ..NormOptions::default() }).unwrap();
            assert!(est.estimate >= last);
            last = est.estimate;
        }
    }

    #[test]
    fn lp_ratio_is_attained() {
        let grid = PeriodicGrid::new(vec![32]).unwrap();
        let w = MatrixWeight::scalar_power(0.3, Some(vec![0.5]), torus1()).unwrap();
        let op = hilbert_op(&grid, 0).unwrap();
        let p = LebesgueExponent::new(1.5).unwrap();
        let est = weighted_operator_norm(&op, &w, &p, &NormOptions { trials: 4, iterations: 50, ..NormOptions::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = DiscreteGridFunction::scalar(grid.clone(), (0..32).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect()).unwrap();
            let r = lifted_weighted_norm(&lifted_apply(&op, &f).unwrap(), &w, &p).unwrap() / lifted_weighted_norm(&f, &w, &p).unwrap();
            assert!(r <= est.estimate * (1.0 + 1e-9) || !est.converged);
        }
        assert!(est.estimate >= 1.0 - 1e-9);
    }
}
