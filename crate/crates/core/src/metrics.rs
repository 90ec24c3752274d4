//! Averaged metrics, the A_p and Roudenko constants, and product slices.
//!
//! For a weight `W` and exponent `p` the pointwise metrics are
//! `rho_t(x) = |W(t)^(1/p) x|` and `rho*_t(x) = |W(t)^(-1/p) x|`. Averaging
//! over a set `E` in `L^p` and `L^q` gives `rho_{p,E}` and `rho*_{q,E}`; the
//! A_p constant is the supremum over sets and directions of
//! `rho*_{q,E}(x) / (rho_{p,E})*(x)` where `(.)*` is the dual norm.
//!
//! Reported constants are computed at a stated resolution: a finite set
//! family, a finite sphere of directions and a finite quadrature.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{AveragingSet, DomainDescriptor, Factor, LebesgueExponent, SetFamily, Singularity};
use crate::error::{Error, Result};
use crate::hermitian::{frobenius_norm, random_unit_vector, spectral_norm, CMatrix, CVector, Eigen, HermitianMatrix, C64};
use crate::quadrature::{build_grid, set_grid, Grading, GridSpec, Resolution, SampleGrid};
use crate::verdict::{classify_growth, TracePoint, Verdict, VerdictClass};
use crate::weight::{MatrixWeight, WeightRule};

/// `rho_t(x) = |W(t)^(1/p) x|`.
pub fn rho(w: &MatrixWeight, p: &LebesgueExponent, t: &[f64], x: &CVector) -> Result<f64> {
    check_vector(w, x)?;
    Ok((w.fractional_power(1.0 / p.p(), t)?.matrix() * x).norm())
}

/// `rho*_t(x) = |W(t)^(-1/p) x|`.
pub fn rho_dual(w: &MatrixWeight, p: &LebesgueExponent, t: &[f64], x: &CVector) -> Result<f64> {
    check_vector(w, x)?;
    Ok((w.fractional_power(-1.0 / p.p(), t)?.matrix() * x).norm())
}

fn check_vector(w: &MatrixWeight, x: &CVector) -> Result<()> {
    if x.len() != w.n {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} for an N = {} weight",
            x.len(),
            w.n
        )));
    }
    Ok(())
}

/// Eigendecompositions of `W` at the quadrature nodes of a set, with
/// quadrature weights normalized to sum to one.
#[derive(Debug, Clone)]
pub struct SetSamples {
    pub grid: SampleGrid,
    pub mass: Vec<f64>,
    pub eigen: Vec<Eigen>,
}

impl SetSamples {
    pub fn new(w: &MatrixWeight, set: &AveragingSet, res: &Resolution) -> Result<Self> {
        set.validate(&w.domain)?;
        let grid = set_grid(set, &w.domain, &w.singular, res)?;
        Self::on_grid(w, grid, set.volume)
    }

    /// Samples on an arbitrary grid normalized by `volume`.
    pub fn on_grid(w: &MatrixWeight, grid: SampleGrid, volume: f64) -> Result<Self> {
        let eigen = (0..grid.len())
            .into_par_iter()
            .map(|i| w.spectral(grid.point(i)))
            .collect::<Result<Vec<_>>>()?;
        let mass = grid.weights.iter().map(|v| v / volume).collect();
        Ok(Self { grid, mass, eigen })
    }

    pub fn powers(&self, s: f64) -> Vec<CMatrix> {
        self.eigen
            .iter()
            .map(|e| e.apply(|l| l.powf(s)).into_matrix())
            .collect()
    }

    /// `(sum_t m_t <M_t x, x>^(r/2))^(1/r)` for `M_t = W(t)^s`.
    fn average_norm(mats: &[CMatrix], mass: &[f64], x: &CVector, r: f64) -> f64 {
        let sum: f64 = mats
            .iter()
            .zip(mass)
            .map(|(m, &c)| c * x.dotc(&(m * x)).re.max(0.0).powf(0.5 * r))
            .sum();
        sum.powf(1.0 / r)
    }
}

/// `rho_{p,E}(x)`.
pub fn rho_avg(w: &MatrixWeight, p: &LebesgueExponent, set: &AveragingSet, x: &CVector, res: &Resolution) -> Result<f64> {
    check_vector(w, x)?;
    let s = SetSamples::new(w, set, res)?;
    Ok(SetSamples::average_norm(&s.powers(2.0 / p.p()), &s.mass, x, p.p()))
}

/// `rho*_{q,E}(x)`.
pub fn rho_dual_avg(w: &MatrixWeight, p: &LebesgueExponent, set: &AveragingSet, x: &CVector, res: &Resolution) -> Result<f64> {
    check_vector(w, x)?;
    let s = SetSamples::new(w, set, res)?;
    Ok(SetSamples::average_norm(&s.powers(-2.0 / p.p()), &s.mass, x, p.q()))
}

/// Directions used to discretize the unit sphere of `C^N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereOptions {
    pub count: usize,
    pub seed: u64,
    /// Polish each candidate dual norm by convex minimization.
    pub refine: bool,
    /// Directions refined per set.
    pub max_refine: usize,
}

impl Default for SphereOptions {
    fn default() -> Self {
        Self {
            count: 512,
            seed: 0,
            refine: true,
            max_refine: 32,
        }
    }
}

/// Quasi-uniform unit vectors of `C^n`, up to a global phase.
///
/// For `n = 2` a lattice `(cos a, e^{i phi} sin a)` equidistributed in
/// `cos 2a` and `phi`; otherwise seeded complex Gaussian directions. The
/// coordinate vectors are always included.
pub fn sphere_points(n: usize, count: usize, seed: u64) -> Vec<CVector> {
    let mut out: Vec<CVector> = (0..n)
        .map(|k| CVector::from_fn(n, |i, _| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    if n == 1 {
        return out;
    }
    let extra = count.saturating_sub(n);
    if n == 2 {
        let n_theta = ((extra as f64 / 2.0).sqrt().round() as usize).max(1);
        let n_phi = (extra / n_theta).max(1);
        for a in 0..n_theta {
            let c2 = 1.0 - 2.0 * (a as f64 + 0.5) / n_theta as f64;
            let theta = 0.5 * c2.acos();
            for b in 0..n_phi {
                let phi = 2.0 * std::f64::consts::PI * (b as f64 + 0.5 * (a % 2) as f64) / n_phi as f64;
                out.push(CVector::from_vec(vec![
                    C64::new(theta.cos(), 0.0),
                    C64::from_polar(theta.sin(), phi),
                ]));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..extra {
            out.push(random_unit_vector(&mut rng, n));
        }
    }
    out
}

fn realify(m: &CMatrix) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn realify_vec(x: &CVector) -> DVector<f64> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Minimizes `F(u) = sum_t m_t (u' G_t u)^(p/2)` over `xhat . u = 1` by
/// Newton's method on the KKT system with a backtracking line search.
fn min_on_hyperplane(gs: &[DMatrix<f64>], mass: &[f64], p: f64, xhat: &DVector<f64>, mut u: DVector<f64>) -> f64 {
    let dim = u.len();
    let eval = |u: &DVector<f64>| -> f64 {
        gs.iter()
            .zip(mass)
            .map(|(g, &c)| c * u.dot(&(g * u)).max(0.0).powf(0.5 * p))
            .sum()
    };
    let mut f = eval(&u);
    for _ in 0..60 {
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for (g, &c) in gs.iter().zip(mass) {
            let gu = g * &u;
            let a = u.dot(&gu);
            if a <= 0.0 {
                continue;
            }
            let s1 = c * p * a.powf(0.5 * p - 1.0);
            grad.axpy(s1, &gu, 1.0);
            hess += g * s1;
            let s2 = c * p * (p - 2.0) * a.powf(0.5 * p - 2.0);
            hess.ger(s2, &gu, &gu, 1.0);
        }
        let mut kkt = DMatrix::zeros(dim + 1, dim + 1);
        kkt.view_mut((0, 0), (dim, dim)).copy_from(&hess);
        for i in 0..dim {
            kkt[(i, dim)] = xhat[i];
            kkt[(dim, i)] = xhat[i];
        }
        let mut rhs = DVector::zeros(dim + 1);
        for i in 0..dim {
            rhs[i] = -grad[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { break };
        let d = sol.rows(0, dim).into_owned();
        let slope = grad.dot(&d);
        if !(slope < -1e-15 * f) {
            break;
        }
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let trial = &u + &d * step;
            let ft = eval(&trial);
            if ft <= f + 1e-4 * step * slope {
                u = trial;
                f = ft;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved || -slope < 1e-14 * f {
            break;
        }
    }
    f
}

/// Per-set data for the ratio `rho*_{q,E}(x) / (rho_{p,E})*(x)`.
struct RatioEngine {
    p: f64,
    q: f64,
    mass: Vec<f64>,
    g: Vec<CMatrix>,
    h: Vec<CMatrix>,
    g_real: Vec<DMatrix<f64>>,
    sphere: Vec<CVector>,
    sphere_norms: Vec<f64>,
}

impl RatioEngine {
    fn new(samples: &SetSamples, p: &LebesgueExponent, sphere: Vec<CVector>) -> Self {
        let g = samples.powers(2.0 / p.p());
        let h = samples.powers(-2.0 / p.p());
        let sphere_norms = sphere
            .iter()
            .map(|y| SetSamples::average_norm(&g, &samples.mass, y, p.p()))
            .collect();
        Self {
            p: p.p(),
            q: p.q(),
            mass: samples.mass.clone(),
            g_real: Vec::new(),
            g,
            h,
            sphere,
            sphere_norms,
        }
    }

    fn numerator(&self, x: &CVector) -> f64 {
        SetSamples::average_norm(&self.h, &self.mass, x, self.q)
    }

    fn norm(&self, y: &CVector) -> f64 {
        SetSamples::average_norm(&self.g, &self.mass, y, self.p)
    }

    /// Sphere maximum of `|<x, y>| / rho_{p,E}(y)` and its maximizer.
    fn discrete_dual(&self, x: &CVector) -> (f64, usize) {
        let mut best = (0.0, 0);
        for (k, (y, &ny)) in self.sphere.iter().zip(&self.sphere_norms).enumerate() {
            let v = y.dotc(x).norm() / ny;
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    fn refined_dual(&mut self, x: &CVector, start: usize) -> f64 {
        if self.g_real.is_empty() {
            self.g_real = self.g.iter().map(realify).collect();
        }
        let y = &self.sphere[start];
        let z = y.dotc(x);
        if z.norm() == 0.0 {
            return 0.0;
        }
        let aligned = y * (z / z.norm()) / C64::new(z.norm(), 0.0);
        let u0 = realify_vec(&aligned);
        let xhat = realify_vec(x);
        let fmin = min_on_hyperplane(&self.g_real, &self.mass, self.p, &xhat, u0);
        let refined = fmin.powf(-1.0 / self.p);
        // never report less than a point actually attained on the sphere
        refined.max(self.discrete_dual(x).0)
    }
}

/// `(rho_{p,E})*(x)`: dual of the averaged norm. With `refine` the sphere
/// maximum seeds a convex minimization of `rho_{p,E}` on the hyperplane
/// `Re <x, y> = 1`; either way the value is attained by some `y`, so it
/// never exceeds the true dual norm.
pub fn dual_of_avg(
    w: &MatrixWeight,
    p: &LebesgueExponent,
    set: &AveragingSet,
    x: &CVector,
    sphere: &SphereOptions,
    res: &Resolution,
) -> Result<f64> {
    check_vector(w, x)?;
    if sphere.count < 2 * w.n * w.n {
        return Err(Error::param("sphere_count", format!("must be at least 2 N^2 = {}", 2 * w.n * w.n)));
    }
    let samples = SetSamples::new(w, set, res)?;
    let mut engine = RatioEngine::new(&samples, p, sphere_points(w.n, sphere.count, sphere.seed));
    if w.n == 1 {
        return Ok(x[0].norm() / engine.norm(&CVector::from_element(1, C64::new(1.0, 0.0))));
    }
    let (d, k) = engine.discrete_dual(x);
    Ok(if sphere.refine { engine.refined_dual(x, k) } else { d })
}

/// Result of the local integrability check on the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    pub floors: Vec<f64>,
    pub norm_integrals: Vec<f64>,
    pub dual_integrals: Vec<f64>,
    pub passed: bool,
}

/// Ratio a refinement step may multiply an integral by before it counts as
/// divergent.
pub const INTEGRABILITY_RATIO: f64 = 10.0;

/// Checks that `|W|` and `|W^(-q/p)|` have finite integrals over the window
/// by graded quadrature at three floors (1e-4, 1e-6, 1e-8).
pub fn local_integrability(w: &MatrixWeight, p: &LebesgueExponent) -> Result<IntegrabilityReport> {
    let floors = vec![1e-4, 1e-6, 1e-8];
    let s = -p.q() / p.p();
    let mut norm_integrals = Vec::new();
    let mut dual_integrals = Vec::new();
    for &floor in &floors {
        let spec = GridSpec::graded(
            vec![16; w.domain.dim()],
            Grading::new(w.singular.clone(), 0.5, floor),
        )
        .with_order(4);
        let grid = build_grid(&w.domain, &spec)?;
        let vals = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let e = w.spectral(grid.point(i))?;
                Ok((e.max(), e.values.iter().map(|l| l.powf(s)).fold(0.0, f64::max)))
            })
            .collect::<Result<Vec<_>>>()?;
        norm_integrals.push(vals.iter().zip(&grid.weights).map(|(v, c)| v.0 * c).sum());
        dual_integrals.push(vals.iter().zip(&grid.weights).map(|(v, c)| v.1 * c).sum());
    }
    let grows = |v: &[f64]| v.windows(2).any(|p| !(p[1] < INTEGRABILITY_RATIO * p[0]) || !p[1].is_finite());
    let passed = !grows(&norm_integrals) && !grows(&dual_integrals);
    Ok(IntegrabilityReport {
        floors,
        norm_integrals,
        dual_integrals,
        passed,
    })
}

fn require_integrable(w: &MatrixWeight, p: &LebesgueExponent) -> Result<()> {
    let r = local_integrability(w, p)?;
    if !r.passed {
        return Err(Error::NotLocallyIntegrable(format!(
            "integrals of |W| {:?} and |W^(-q/p)| {:?} at floors {:?}",
            r.norm_integrals, r.dual_integrals, r.floors
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApEstimate {
    pub per_set: Vec<f64>,
    pub c_hat: f64,
    pub argmax_set: AveragingSet,
    /// Maximizing direction as `[re, im]` pairs.
    pub argmax_direction: Vec<[f64; 2]>,
    pub sphere_count: usize,
    pub resolution: Resolution,
}

fn worst_ratio(w: &MatrixWeight, p: &LebesgueExponent, set: &AveragingSet, sphere: &SphereOptions, res: &Resolution) -> Result<(f64, CVector)> {
    let samples = SetSamples::new(w, set, res)?;
    let points = sphere_points(w.n, sphere.count, sphere.seed);
    let mut engine = RatioEngine::new(&samples, p, points.clone());
    if w.n == 1 {
        let one = CVector::from_element(1, C64::new(1.0, 0.0));
        return Ok((engine.numerator(&one) * engine.norm(&one), one));
    }
    let mut ranked: Vec<(f64, usize, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (d, k) = engine.discrete_dual(x);
            (engine.numerator(x) / d, i, k)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    if !sphere.refine {
        let (r, i, _) = ranked[0];
        return Ok((r, points[i].clone()));
    }
    // the sphere ratio bounds the refined one from above
    let mut best = (f64::NEG_INFINITY, points[ranked[0].1].clone());
    for &(upper, i, k) in ranked.iter().take(sphere.max_refine.max(1)) {
        if upper <= best.0 {
            break;
        }
        let x = &points[i];
        let r = engine.numerator(x) / engine.refined_dual(x, k);
        if r > best.0 {
            best = (r, x.clone());
        }
    }
    Ok(best)
}

/// Estimates the A_p constant over an enumerated family.
pub fn ap_condition_check(
    w: &MatrixWeight,
    p: &LebesgueExponent,
    family: &SetFamily,
    sphere: &SphereOptions,
    res: &Resolution,
) -> Result<ApEstimate> {
    if sphere.count < 2 * w.n * w.n {
        return Err(Error::param("sphere_count", format!("must be at least 2 N^2 = {}", 2 * w.n * w.n)));
    }
    require_integrable(w, p)?;
    let sets = family.enumerate(&w.domain)?;
    if sets.is_empty() {
        return Err(Error::FamilyMismatch("family has no sets".into()));
    }
    let results = sets
        .par_iter()
        .map(|set| worst_ratio(w, p, set, sphere, res))
        .collect::<Result<Vec<_>>>()?;
    let (best, _) = results
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r.0 > acc.1 { (i, r.0) } else { acc });
    Ok(ApEstimate {
        per_set: results.iter().map(|r| r.0).collect(),
        c_hat: results[best].0,
        argmax_set: sets[best].clone(),
        argmax_direction: results[best].1.iter().map(|z| [z.re, z.im]).collect(),
        sphere_count: sphere.count,
        resolution: *res,
    })
}

/// Matrix norm used inside the Roudenko integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixNorm {
    #[default]
    Spectral,
    Frobenius,
}

impl MatrixNorm {
    pub fn apply(&self, m: &CMatrix) -> f64 {
        match self {
            MatrixNorm::Spectral => spectral_norm(m),
            MatrixNorm::Frobenius => frobenius_norm(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoudenkoEstimate {
    pub per_set: Vec<f64>,
    pub c_hat: f64,
    pub argmax_set: AveragingSet,
    pub resolution: Resolution,
    pub norm: MatrixNorm,
}

/// `int_E ( int_E |W^(1/p)(x) W^(-1/p)(t)|^q dt/|E| )^(p/q) dx/|E|` for one set.
pub fn roudenko_set_value(w: &MatrixWeight, p: &LebesgueExponent, set: &AveragingSet, res: &Resolution, norm: MatrixNorm) -> Result<f64> {
    let s = SetSamples::new(w, set, res)?;
    Ok(roudenko_from_samples(&s, p, norm))
}

fn roudenko_from_samples(s: &SetSamples, p: &LebesgueExponent, norm: MatrixNorm) -> f64 {
    let (pp, q) = (p.p(), p.q());
    let a = s.powers(1.0 / pp);
    let b = s.powers(-1.0 / pp);
    let mass = &s.mass;
    if a[0].nrows() == 1 {
        let av: Vec<f64> = a.iter().map(|m| m[(0, 0)].re).collect();
        let inner: f64 = b.iter().zip(mass).map(|(m, c)| c * m[(0, 0)].re.powf(q)).sum();
        return av.iter().zip(mass).map(|(x, c)| c * (x.powf(q) * inner).powf(pp / q)).sum();
    }
    a.par_iter()
        .zip(mass.par_iter())
        .map(|(ai, ci)| {
            let inner: f64 = b
                .iter()
                .zip(mass)
                .map(|(bj, cj)| cj * norm.apply(&(ai * bj)).powf(q))
                .sum();
            ci * inner.powf(pp / q)
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Supremum of the Roudenko integral over an enumerated family.
pub fn roudenko_constant(w: &MatrixWeight, p: &LebesgueExponent, family: &SetFamily, res: &Resolution, norm: MatrixNorm) -> Result<RoudenkoEstimate> {
    require_integrable(w, p)?;
    let sets = family.enumerate(&w.domain)?;
    if sets.is_empty() {
        return Err(Error::FamilyMismatch("family has no sets".into()));
    }
    let per_set = sets
        .par_iter()
        .map(|set| roudenko_set_value(w, p, set, res, norm))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&per_set);
    Ok(RoudenkoEstimate {
        c_hat: per_set[best],
        argmax_set: sets[best].clone(),
        per_set,
        resolution: *res,
        norm,
    })
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
        .0
}

/// `int_E W(t)^s dt` by quadrature.
pub fn integrate_power(w: &MatrixWeight, s: f64, set: &AveragingSet, res: &Resolution) -> Result<CMatrix> {
    let samples = SetSamples::new(w, set, res)?;
    let mut total = CMatrix::zeros(w.n, w.n);
    for (m, &c) in samples.powers(s).iter().zip(&samples.grid.weights) {
        total += m * C64::new(c, 0.0);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct A2Estimate {
    pub per_set: Vec<f64>,
    pub c_hat: f64,
    pub argmax_set: AveragingSet,
    pub resolution: Resolution,
}

/// `|(avg_E W)^(1/2) (avg_E W^(-1))^(1/2)|_F` for one set.
pub fn a2_set_value(w: &MatrixWeight, set: &AveragingSet, res: &Resolution) -> Result<f64> {
    let samples = SetSamples::new(w, set, res)?;
    let mut avg = CMatrix::zeros(w.n, w.n);
    let mut avg_inv = CMatrix::zeros(w.n, w.n);
    for (e, &c) in samples.eigen.iter().zip(&samples.mass) {
        avg += e.apply(|l| l).into_matrix() * C64::new(c, 0.0);
        avg_inv += e.apply(|l| 1.0 / l).into_matrix() * C64::new(c, 0.0);
    }
    let a = HermitianMatrix::new(avg)?.power(0.5)?;
    let b = HermitianMatrix::new(avg_inv)?.power(0.5)?;
    Ok(frobenius_norm(&(a.matrix() * b.matrix())))
}

/// Supremum of [`a2_set_value`] over a family (the `p = 2` averaged matrix
/// constant).
pub fn a2_averaged_matrix_constant(w: &MatrixWeight, family: &SetFamily, res: &Resolution) -> Result<A2Estimate> {
    let sets = family.enumerate(&w.domain)?;
    if sets.is_empty() {
        return Err(Error::FamilyMismatch("family has no sets".into()));
    }
    let per_set = sets
        .par_iter()
        .map(|set| a2_set_value(w, set, res))
        .collect::<Result<Vec<_>>>()?;
    let best = argmax(&per_set);
    Ok(A2Estimate {
        c_hat: per_set[best],
        argmax_set: sets[best].clone(),
        per_set,
        resolution: *res,
    })
}

/// `(W^(-q/p), q)`: a weight is in A_p exactly when this pair is in A_q.
pub fn duality_transform(w: &MatrixWeight, p: &LebesgueExponent) -> (MatrixWeight, LebesgueExponent) {
    let s = -p.q() / p.p();
    let dual = match &w.rule {
        WeightRule::Identity => w.clone(),
        WeightRule::DiagPower { alpha, center } => {
            let mut d = w.clone();
            d.rule = WeightRule::DiagPower {
                alpha: alpha.iter().map(|a| a * s).collect(),
                center: center.clone(),
            };
            d.label = format!("({})^({s})", w.label);
            d
        }
        WeightRule::ProductDiagPower {
            alpha,
            beta,
            center_x,
            center_y,
        } => {
            let mut d = w.clone();
            d.rule = WeightRule::ProductDiagPower {
                alpha: alpha.iter().map(|a| a * s).collect(),
                beta: beta.iter().map(|b| b * s).collect(),
                center_x: center_x.clone(),
                center_y: center_y.clone(),
            };
            d.label = format!("({})^({s})", w.label);
            d
        }
        _ => w.power(s),
    };
    (dual, p.conjugate())
}

/// One rung of a refinement ladder: a family, a quadrature resolution, and
/// the scale reported on the trace's x-axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Level {
    pub family: SetFamily,
    pub resolution: Resolution,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementLadder {
    pub levels: Vec<Level>,
}

impl RefinementLadder {
    /// Ladder on the weight's window: level `k` uses dyadic radii down to
    /// `2^-(k+2)` of the half-window, lattice centres plus sets touching each
    /// singular point, and innermost quadrature cells `floors[k]`. The scale
    /// is `1 / floor`.
    pub fn standard(domain: &DomainDescriptor, singular: &[Singularity], floors: &[f64]) -> Result<Self> {
        let dim = domain.dim();
        let half = domain
            .window
            .iter()
            .map(|iv| 0.5 * iv.len())
            .fold(f64::INFINITY, f64::min)
            .min(if domain.is_torus() { 0.5 } else { f64::INFINITY });
        let mut anchor = vec![None; dim];
        for s in singular {
            anchor[s.axis] = Some(s.at);
        }
        let anchor_point: Option<Vec<f64>> = if anchor.iter().any(Option::is_some) {
            Some(
                anchor
                    .iter()
                    .zip(&domain.window)
                    .map(|(a, iv)| a.unwrap_or(0.5 * (iv.lo + iv.hi)))
                    .collect(),
            )
        } else {
            None
        };
        let mut levels = Vec::new();
        for (k, &floor) in floors.iter().enumerate() {
            let radii = crate::domain::RadiusLadder::dyadic(half * 0.999, k + 3);
            let mut sets = SetFamily::lattice(vec![3; dim], radii).enumerate(domain)?;
            if let Some(pt) = &anchor_point {
                let reach = if domain.is_torus() {
                    half
                } else {
                    pt.iter()
                        .zip(&domain.window)
                        .map(|(&a, iv)| 0.5 * (iv.hi - a).max(a - iv.lo))
                        .fold(half, f64::min)
                };
                let anchored = crate::domain::RadiusLadder::dyadic(reach * 0.999, k + 3);
                sets.extend(SetFamily::anchored(pt.clone(), anchored).enumerate(domain)?);
            }
            levels.push(Level {
                family: SetFamily::Explicit { sets },
                resolution: Resolution {
                    floor,
                    ..Resolution::default()
                },
                scale: 1.0 / floor,
            });
        }
        Ok(Self { levels })
    }

    pub fn for_weight(w: &MatrixWeight, floors: &[f64]) -> Result<Self> {
        Self::standard(&w.domain, &w.singular, floors)
    }

    /// Same family at each level, with the given floors.
    pub fn fixed_family(family: SetFamily, floors: &[f64]) -> Self {
        Self {
            levels: floors
                .iter()
                .map(|&floor| Level {
                    family: family.clone(),
                    resolution: Resolution {
                        floor,
                        ..Resolution::default()
                    },
                    scale: 1.0 / floor,
                })
                .collect(),
        }
    }
}

/// Default floors of a constant ladder.
pub const DEFAULT_FLOORS: [f64; 3] = [1e-2, 1e-4, 1e-6];

/// A constant traced across refinement levels with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantTrace {
    #[serde(with = "crate::verdict::extended::vec")]
    pub values: Vec<f64>,
    #[serde(with = "crate::verdict::extended")]
    pub c_hat: f64,
    pub trace: Vec<TracePoint>,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConstantTrace {
    pub fn from_values(levels: &[Level], values: Vec<f64>) -> Self {
        let mut running = f64::NEG_INFINITY;
        let trace: Vec<TracePoint> = levels
            .iter()
            .zip(&values)
            .map(|(l, &v)| {
                running = running.max(v);
                TracePoint {
                    x: l.scale,
                    value: running,
                    resolution: l.resolution.floor,
                }
            })
            .collect();
        let verdict = classify_growth(&trace);
        Self {
            c_hat: running,
            values,
            trace,
            verdict,
            note: None,
        }
    }

    /// A trace for a weight that failed the integrability check.
    pub fn not_integrable(reason: String) -> Self {
        Self {
            values: Vec::new(),
            c_hat: f64::INFINITY,
            trace: Vec::new(),
            verdict: Verdict::DivergenceSuspected {
                rate: f64::INFINITY,
                slope: f64::INFINITY,
            },
            note: Some(reason),
        }
    }

    pub fn class(&self) -> VerdictClass {
        self.verdict.class()
    }
}

fn traced(levels: &[Level], f: impl Fn(&Level) -> Result<f64>) -> Result<ConstantTrace> {
    let values = levels.iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(ConstantTrace::from_values(levels, values))
}

/// A_p constant across a ladder. A failed integrability check yields a
/// divergent trace rather than an error.
pub fn ap_refinement(w: &MatrixWeight, p: &LebesgueExponent, ladder: &RefinementLadder, sphere: &SphereOptions) -> Result<ConstantTrace> {
    match traced(&ladder.levels, |l| Ok(ap_condition_check(w, p, &l.family, sphere, &l.resolution)?.c_hat)) {
        Err(Error::NotLocallyIntegrable(m)) => Ok(ConstantTrace::not_integrable(m)),
        other => other,
    }
}

/// Roudenko constant across a ladder, with the same integrability handling.
pub fn roudenko_refinement(w: &MatrixWeight, p: &LebesgueExponent, ladder: &RefinementLadder, norm: MatrixNorm) -> Result<ConstantTrace> {
    match traced(&ladder.levels, |l| Ok(roudenko_constant(w, p, &l.family, &l.resolution, norm)?.c_hat)) {
        Err(Error::NotLocallyIntegrable(m)) => Ok(ConstantTrace::not_integrable(m)),
        other => other,
    }
}

/// The weight `x -> W(x, y0)` (or `y -> W(x0, y)`) on one factor.
pub fn slice_weight(w: &MatrixWeight, frozen_factor: Factor, frozen: &[f64]) -> Result<MatrixWeight> {
    w.slice(frozen_factor, frozen)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceEntry {
    pub frozen: Vec<f64>,
    pub constant: ConstantTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub frozen_factor: Factor,
    pub slices: Vec<SliceEntry>,
    #[serde(with = "crate::verdict::extended")]
    pub sup: f64,
    #[serde(with = "crate::verdict::extended")]
    pub inf: f64,
    /// `sup / inf - 1` of the per-slice constants.
    #[serde(with = "crate::verdict::extended")]
    pub spread: f64,
    pub verdict: VerdictClass,
}

/// Roudenko constants of the slices `W(., y0)` for the sampled `y0`, each
/// traced across `ladder` on the free factor.
pub fn uniform_slice_check(
    w: &MatrixWeight,
    p: &LebesgueExponent,
    frozen_factor: Factor,
    slice_samples: &[Vec<f64>],
    ladder: &RefinementLadder,
    norm: MatrixNorm,
) -> Result<SliceReport> {
    if !w.domain.kind.is_product() {
        return Err(Error::InvalidDomain("slices need a product domain".into()));
    }
    let slices = slice_samples
        .iter()
        .map(|y0| {
            let s = slice_weight(w, frozen_factor, y0)?;
            Ok(SliceEntry {
                frozen: y0.clone(),
                constant: roudenko_refinement(&s, p, ladder, norm)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = slices.iter().map(|s| s.constant.c_hat).fold(f64::NEG_INFINITY, f64::max);
    let inf = slices.iter().map(|s| s.constant.c_hat).fold(f64::INFINITY, f64::min);
    let verdict = if slices.iter().any(|s| s.constant.class() == VerdictClass::Divergent) {
        VerdictClass::Divergent
    } else if slices.iter().all(|s| s.constant.class() == VerdictClass::Bounded) {
        VerdictClass::Bounded
    } else {
        VerdictClass::Inconclusive
    };
    Ok(SliceReport {
        frozen_factor,
        slices,
        sup,
        inf,
        spread: sup / inf - 1.0,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RadiusLadder;
    use crate::hermitian::random_positive_definite;
    use rand::Rng;

    fn e(n: usize, k: usize) -> CVector {
        CVector::from_fn(n, |i, _| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0))
    }

    fn unit() -> DomainDescriptor {
        DomainDescriptor::unit_interval()
    }

    #[test]
    fn pointwise_metrics() {
        let p = LebesgueExponent::new(2.0).unwrap();
        let w = MatrixWeight::constant(HermitianMatrix::from_real_diagonal(&[4.0, 9.0]), unit());
        assert!((rho(&w, &p, &[0.3], &e(2, 0)).unwrap() - 2.0).abs() < 1e-14);
        let ex = MatrixWeight::paper_example_unit();
        for x0 in [0.01f64, 0.3, 0.9] {
            let oracle = (1.0 / x0.sqrt()).sqrt();
            assert!((rho(&ex, &p, &[x0], &e(2, 1)).unwrap() - oracle).abs() < 1e-12 * oracle);
            assert!((rho_dual(&ex, &p, &[x0], &e(2, 0)).unwrap() - oracle).abs() < 1e-12 * oracle);
        }
    }

    #[test]
    fn rho_dual_is_the_sup_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LebesgueExponent::new(3.0).unwrap();
        let w0 = random_positive_definite(&mut rng, 3);
        let w = MatrixWeight::constant(w0, unit());
        let x = random_unit_vector(&mut rng, 3);
        let closed = rho_dual(&w, &p, &[0.5], &x).unwrap();
        let mut best: f64 = 0.0;
        for _ in 0..10_000 {
            let y = random_unit_vector(&mut rng, 3);
            best = best.max(y.dotc(&x).norm() / rho(&w, &p, &[0.5], &y).unwrap());
        }
        assert!(best <= closed * (1.0 + 1e-12));
        let y = w.fractional_power(-2.0 / p.p(), &[0.5]).unwrap().matrix() * &x;
        let attained = y.dotc(&x).norm() / rho(&w, &p, &[0.5], &y).unwrap();
        assert!((attained - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn scalar_averages() {
        let p = LebesgueExponent::new(2.0).unwrap();
        let w = MatrixWeight::scalar_power(0.5, None, unit()).unwrap();
        let res = Resolution::default();
        let one = e(1, 0);
        for b in [0.25, 1.0] {
            let set = AveragingSet::interval(0.0, b).unwrap();
            let avg = rho_avg(&w, &p, &set, &one, &res).unwrap();
            assert!((avg - (2.0 / 3.0 * b.sqrt()).sqrt()).abs() < 1e-9);
            let avg = rho_dual_avg(&w, &p, &set, &one, &res).unwrap();
            assert!((avg - (2.0 / b.sqrt()).sqrt()).abs() < 1e-5);
        }
    }

    #[test]
    fn identity_averages() {
        let p = LebesgueExponent::new(1.5).unwrap();
        let w = MatrixWeight::identity(2, unit());
        let set = AveragingSet::interval(0.2, 0.7).unwrap();
        let x = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let res = Resolution::default();
        assert!((rho_avg(&w, &p, &set, &x, &res).unwrap() - 1.0).abs() < 1e-12);
        assert!((rho_dual_avg(&w, &p, &set, &x, &res).unwrap() - 1.0).abs() < 1e-12);
        let d = dual_of_avg(&w, &p, &set, &x, &SphereOptions::default(), &res).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
        let coarse = SphereOptions {
            refine: false,
            ..SphereOptions::default()
        };
        let d = dual_of_avg(&w, &p, &set, &x, &coarse, &res).unwrap();
        assert!(d <= 1.0 + 1e-12 && d > 0.99);
    }

    #[test]
    fn dual_of_constant_weight_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LebesgueExponent::new(2.0).unwrap();
        let set = AveragingSet::interval(0.0, 1.0).unwrap();
        for _ in 0..5 {
            let w0 = random_positive_definite(&mut rng, 2);
            let closed_op = w0.power(-0.5).unwrap();
            let w = MatrixWeight::constant(w0, unit());
            let x = random_unit_vector(&mut rng, 2);
            let closed = (closed_op.matrix() * &x).norm();
            for refine in [false, true] {
                let opts = SphereOptions { refine, ..SphereOptions::default() };
                let d = dual_of_avg(&w, &p, &set, &x, &opts, &Resolution::new(4, 0.5, 1e-6, 2)).unwrap();
                assert!((d - closed).abs() <= 0.02 * closed);
                assert!(d <= closed * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn n1_dual_exact() {
        let p = LebesgueExponent::new(3.0).unwrap();
        let w = MatrixWeight::scalar_power(0.4, None, unit()).unwrap();
        let set = AveragingSet::interval(0.1, 0.6).unwrap();
        let res = Resolution::default();
        let x = CVector::from_element(1, C64::new(-2.0, 0.0));
        let d = dual_of_avg(&w, &p, &set, &x, &SphereOptions::default(), &res).unwrap();
        let r1 = rho_avg(&w, &p, &set, &e(1, 0), &res).unwrap();
        assert!((d - 2.0 / r1).abs() < 1e-14);
    }

    #[test]
    fn identity_constants() {
        for p in [1.5, 2.0, 3.0] {
            let p = LebesgueExponent::new(p).unwrap();
            let w = MatrixWeight::identity(2, unit());
            let fam = SetFamily::lattice(vec![2], RadiusLadder::new(0.1, 0.4, 2));
            let est = ap_condition_check(&w, &p, &fam, &SphereOptions::default(), &Resolution::default()).unwrap();
            assert!((est.c_hat - 1.0).abs() < 0.02, "{}", est.c_hat);
            let r = roudenko_constant(&w, &p, &fam, &Resolution::default(), MatrixNorm::Spectral).unwrap();
            assert!((r.c_hat - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ap_ratio_at_least_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fam = SetFamily::lattice(vec![2], RadiusLadder::new(0.1, 0.3, 2));
        for _ in 0..3 {
            let pv: f64 = rng.gen_range(1.3..4.0);
            let p = LebesgueExponent::new(pv).unwrap();
            let w = MatrixWeight::rotated_power([rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)], rng.gen_range(0.0..3.0), None, unit()).unwrap();
            let est = ap_condition_check(&w, &p, &fam, &SphereOptions::default(), &Resolution::default()).unwrap();
            assert!(est.per_set.iter().all(|&r| r >= 1.0 - 1e-9), "{:?}", est.per_set);
        }
    }

    #[test]
    fn scalar_roudenko_value() {
        let p = LebesgueExponent::new(2.0).unwrap();
        let w = MatrixWeight::scalar_power(0.5, None, unit()).unwrap();
        for b in [0.1, 0.5, 1.0] {
            let set = AveragingSet::interval(0.0, b).unwrap();
            let v = roudenko_set_value(&w, &p, &set, &Resolution::default(), MatrixNorm::Spectral).unwrap();
            assert!((v - 4.0 / 3.0).abs() < 1e-5, "{v}");
        }
    }

    #[test]
    fn a2_identity_is_sqrt_n() {
        let fam = SetFamily::lattice(vec![2], RadiusLadder::new(0.1, 0.3, 2));
        let est = a2_averaged_matrix_constant(&MatrixWeight::identity(3, unit()), &fam, &Resolution::default()).unwrap();
        assert!((est.c_hat - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn a2_example_limit() {
        let set = AveragingSet::interval(0.0, 1.0).unwrap();
        let res = Resolution { floor: 1e-10, ..Resolution::default() };
        let v = a2_set_value(&MatrixWeight::paper_example_unit(), &set, &res).unwrap();
        assert!((v - (8.0f64 / 3.0).sqrt()).abs() < 1e-5, "{v}");
    }

    #[test]
    fn duality_of_power_weights() {
        let p = LebesgueExponent::new(3.0).unwrap();
        let w = MatrixWeight::scalar_power(0.6, None, unit()).unwrap();
        let (d, q) = duality_transform(&w, &p);
        assert_eq!(q.p(), p.q());
        let t: f64 = 0.37;
        let expect = t.powf(-0.6 * p.q() / p.p());
        assert!((d.evaluate(&[t]).unwrap().entry(0, 0).re - expect).abs() < 1e-14);
        let (id, _) = duality_transform(&MatrixWeight::identity(2, unit()), &p);
        assert_eq!(id.evaluate(&[0.5]).unwrap(), HermitianMatrix::identity(2));
    }

    #[test]
    fn integrability_check() {
        let p = LebesgueExponent::new(2.0).unwrap();
        let ok = MatrixWeight::scalar_power(0.5, None, unit()).unwrap();
        assert!(local_integrability(&ok, &p).unwrap().passed);
        let bad = MatrixWeight::scalar_power(3.0, None, unit()).unwrap();
        assert!(!local_integrability(&bad, &p).unwrap().passed);
        let fam = SetFamily::lattice(vec![1], RadiusLadder::new(0.5, 0.5, 1));
        assert!(matches!(
            ap_condition_check(&bad, &p, &fam, &SphereOptions::default(), &Resolution::default()),
            Err(Error::NotLocallyIntegrable(_))
        ));
    }
}
