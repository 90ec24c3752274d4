//! Boundedness of the scalar projection `P_r f = <f, r>` from `L^p(W)` to
//! `L^p(w)`.
//!
//! `P_r` is bounded exactly when `g(t) = w(t)^(1/p) |W(t)^(-1/p) r(t)|` is
//! essentially bounded; the ess sup is then the operator norm. Sampling sees
//! `g` only at grid points, so every estimate is stated at a resolution.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainDescriptor, Singularity};
use crate::error::{Error, Result};
use crate::hermitian::{CVector, C64};
use crate::quadrature::{build_grid, GridLadder, GridSpec, Rule1D, SampleGrid};
use crate::verdict::EssSupEstimate;
use crate::weight::{MatrixWeight, ScalarWeight};

/// Tolerance on `|r(t)| = 1`.
pub const UNIT_TOL: f64 = 1e-10;
/// Relative spectral gap below which an eigenvector is not well defined.
pub const GAP_TOL: f64 = 1e-10;

pub type VectorFn = dyn Fn(&[f64]) -> CVector + Send + Sync;

#[derive(Clone)]
pub enum DirectionRule {
    Constant(CVector),
    /// Eigenvector `v_i` of `W(t)`, eigenvalues ascending.
    Eigen { weight: MatrixWeight, index: usize },
    Func(Arc<VectorFn>),
}

impl fmt::Debug for DirectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectionRule::Constant(v) => write!(f, "Constant({v:?})"),
            DirectionRule::Eigen { weight, index } => write!(f, "Eigen({}, {index})", weight.label),
            DirectionRule::Func(_) => write!(f, "Func"),
        }
    }
}

/// Unit vector field `r : D -> C^N`.
#[derive(Debug, Clone)]
pub struct DirectionField {
    pub n: usize,
    pub rule: DirectionRule,
    pub label: String,
}

impl DirectionField {
    /// The constant field `e_k` (zero-based `k`).
    pub fn coordinate(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(Error::IndexOutOfRange { index: k, dim: n });
        }
        let v = CVector::from_fn(n, |i, _| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0));
        Ok(Self {
            n,
            rule: DirectionRule::Constant(v),
            label: format!("e_{k}"),
        })
    }

    /// A constant field, normalized on input.
    pub fn constant(v: CVector) -> Result<Self> {
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm("direction vector is zero".into()));
        }
        Ok(Self {
            n: v.len(),
            label: "constant".into(),
            rule: DirectionRule::Constant(v.unscale(norm)),
        })
    }

    pub fn eigenvector(w: &MatrixWeight, index: usize) -> Result<Self> {
        if index >= w.n {
            return Err(Error::IndexOutOfRange { index, dim: w.n });
        }
        Ok(Self {
            n: w.n,
            rule: DirectionRule::Eigen {
                weight: w.clone(),
                index,
            },
            label: format!("v_{index}"),
        })
    }

    /// A closed-form field; values are normalized on evaluation.
    pub fn func(n: usize, f: impl Fn(&[f64]) -> CVector + Send + Sync + 'static, label: impl Into<String>) -> Self {
        Self {
            n,
            rule: DirectionRule::Func(Arc::new(f)),
            label: label.into(),
        }
    }

    pub fn evaluate(&self, t: &[f64]) -> Result<CVector> {
        let v = match &self.rule {
            DirectionRule::Constant(v) => v.clone(),
            DirectionRule::Eigen { weight, index } => weight.spectral(t)?.vector(*index),
            DirectionRule::Func(f) => f(t),
        };
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!("direction of length {} for N = {}", v.len(), self.n)));
        }
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm(format!("direction field vanishes at {t:?}")));
        }
        let v = v.unscale(norm);
        debug_assert!((v.norm() - 1.0).abs() <= UNIT_TOL);
        Ok(v)
    }
}

/// `g(t) = w(t)^(1/p) |W(t)^(-1/p) r(t)|`.
pub fn projection_criterion(w_mat: &MatrixWeight, w: &ScalarWeight, p: f64, r: &DirectionField, t: &[f64]) -> Result<f64> {
    let r_t = r.evaluate(t)?;
    let v = w_mat.fractional_power(-1.0 / p, t)?.matrix() * r_t;
    Ok(w.evaluate(t)?.powf(1.0 / p) * v.norm())
}

/// Scalar target of a coordinate projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateTarget {
    /// `w = w_kk`.
    EntryOfW,
    /// `w = (w_kk^(2/p))^(p/2)`, where `w_kk^(s)` is the `kk` entry of `W^s`.
    EntryOfPowerTarget,
}

/// Scalar weight selected by a coordinate target.
pub fn coordinate_target(w: &MatrixWeight, p: f64, k: usize, target: CoordinateTarget) -> Result<ScalarWeight> {
    match target {
        CoordinateTarget::EntryOfW => ScalarWeight::diagonal_entry(w, k),
        CoordinateTarget::EntryOfPowerTarget => ScalarWeight::power_target(w, k, p),
    }
}

/// `g(t)` for `r = e_k`, via `|W^(-1/p) e_k|^2 = (W^(-2/p))_kk`.
pub fn coordinate_criterion(w_mat: &MatrixWeight, p: f64, k: usize, target: CoordinateTarget, t: &[f64]) -> Result<f64> {
    if k >= w_mat.n {
        return Err(Error::IndexOutOfRange { index: k, dim: w_mat.n });
    }
    let dual = w_mat.entry_of_power(-2.0 / p, k, k, t)?.re;
    let scalar = match target {
        CoordinateTarget::EntryOfW => w_mat.entry_of_power(1.0, k, k, t)?.re,
        CoordinateTarget::EntryOfPowerTarget => w_mat.entry_of_power(2.0 / p, k, k, t)?.re.powf(p / 2.0),
    };
    Ok(scalar.powf(1.0 / p) * dual.max(0.0).sqrt())
}

/// Graded ladder toward the singular hyperplanes of both weights.
pub fn default_ladder(domain: &DomainDescriptor, singular: &[&[Singularity]]) -> GridLadder {
    let mut all: Vec<Singularity> = Vec::new();
    for s in singular.iter().flat_map(|s| s.iter()) {
        if !all.contains(s) {
            all.push(*s);
        }
    }
    GridLadder::default_for(domain.dim(), all)
}

fn level_scale(spec: &GridSpec) -> f64 {
    match &spec.grading {
        Some(g) => 1.0 / g.floor,
        _ => spec.counts.iter().copied().max().unwrap_or(1) as f64,
    }
}

/// Maximum of a criterion over each level of a ladder.
pub fn ess_sup_over_ladder(
    domain: &DomainDescriptor,
    ladder: &GridLadder,
    g: impl Fn(&[f64]) -> Result<f64> + Sync,
) -> Result<EssSupEstimate> {
    if ladder.levels.is_empty() {
        return Err(Error::InvalidGrid("empty grid ladder".into()));
    }
    let mut levels = Vec::with_capacity(ladder.levels.len());
    for spec in &ladder.levels {
        let grid = build_grid(domain, spec)?;
        let values = (0..grid.len())
            .into_par_iter()
            .map(|i| g(grid.point(i)))
            .collect::<Result<Vec<_>>>()?;
        let (i, &max) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::InvalidGrid("grid has no points".into()))?;
        let resolution = spec.grading.as_ref().map(|g| g.floor).unwrap_or(1.0 / level_scale(spec));
        levels.push((level_scale(spec), max, grid.point(i).to_vec(), resolution));
    }
    Ok(EssSupEstimate::from_levels(levels))
}

/// Ess-sup estimate of `g` for `P_r : L^p(W) -> L^p(w)`. A bounded verdict
/// makes `b_hat` the claimed operator norm.
pub fn projection_bound(w_mat: &MatrixWeight, w: &ScalarWeight, p: f64, r: &DirectionField, ladder: &GridLadder) -> Result<EssSupEstimate> {
    check_direction(w_mat, r)?;
    ess_sup_over_ladder(&w_mat.domain, ladder, |t| projection_criterion(w_mat, w, p, r, t))
}

fn check_direction(w_mat: &MatrixWeight, r: &DirectionField) -> Result<()> {
    if r.n != w_mat.n {
        return Err(Error::DimensionMismatch(format!("direction in C^{} for an N = {} weight", r.n, w_mat.n)));
    }
    Ok(())
}

/// [`projection_bound`] with `r = e_k` (zero-based) and the selected target.
pub fn coordinate_projection_bound(w_mat: &MatrixWeight, p: f64, k: usize, target: CoordinateTarget, ladder: &GridLadder) -> Result<EssSupEstimate> {
    if k >= w_mat.n {
        return Err(Error::IndexOutOfRange { index: k, dim: w_mat.n });
    }
    ess_sup_over_ladder(&w_mat.domain, ladder, |t| coordinate_criterion(w_mat, p, k, target, t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenProjectionReport {
    pub index: usize,
    pub max_deviation: f64,
    pub checked: usize,
    /// Points skipped for a relative spectral gap below [`GAP_TOL`].
    pub flagged: usize,
}

/// `|lambda_i^(1/p) |W^(-1/p) v_i| - 1|`, or `None` without a spectral gap.
pub fn eigen_deviation(w_mat: &MatrixWeight, p: f64, i: usize, t: &[f64]) -> Result<Option<f64>> {
    let e = w_mat.spectral(t)?;
    let lam = e.values[i];
    let gap = e
        .values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, l)| (l - lam).abs())
        .fold(f64::INFINITY, f64::min);
    if gap < GAP_TOL * e.max() {
        return Ok(None);
    }
    let v = e.vector(i);
    let m = w_mat.fractional_power(-1.0 / p, t)?;
    Ok(Some((lam.powf(1.0 / p) * (m.matrix() * v).norm() - 1.0).abs()))
}

/// Checks `lambda_i^(1/p) |W^(-1/p) v_i| = 1` over a grid.
pub fn eigen_projection_check(w_mat: &MatrixWeight, p: f64, i: usize, grid: &SampleGrid) -> Result<EigenProjectionReport> {
    if i >= w_mat.n {
        return Err(Error::IndexOutOfRange { index: i, dim: w_mat.n });
    }
    let devs = (0..grid.len())
        .into_par_iter()
        .map(|j| eigen_deviation(w_mat, p, i, grid.point(j)))
        .collect::<Result<Vec<_>>>()?;
    let checked: Vec<f64> = devs.iter().flatten().copied().collect();
    Ok(EigenProjectionReport {
        index: i,
        max_deviation: checked.iter().copied().fold(0.0, f64::max),
        checked: checked.len(),
        flagged: devs.len() - checked.len(),
    })
}

/// Vector function sampled on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVectorFunction {
    pub grid: SampleGrid,
    pub values: Vec<CVector>,
}

/// Triangular bump of unit mass and half-width `eps` per axis, as a product.
pub fn triangular_bump(displacement: &[f64], eps: f64) -> f64 {
    displacement
        .iter()
        .map(|u| (1.0 - u.abs() / eps).max(0.0) / eps)
        .product()
}

/// Quadrature on the cube `t0 + [-eps, eps]^d`, broken at `t0` so the bump
/// is linear on each cell.
pub fn bump_grid(domain: &DomainDescriptor, t0: &[f64], eps: f64, cells: usize) -> Result<SampleGrid> {
    if t0.len() != domain.dim() {
        return Err(Error::DimensionMismatch(format!("base point of length {} in a {}-dimensional domain", t0.len(), domain.dim())));
    }
    if !(eps > 0.0) {
        return Err(Error::param("eps", "must be positive"));
    }
    let half = cells.max(1);
    let rules: Vec<Rule1D> = t0
        .iter()
        .zip(&domain.window)
        .map(|(&c, iv)| {
            if domain.is_torus() {
                if eps > 0.5 {
                    return Err(Error::SupportOverflow(format!("width {eps} exceeds half the period")));
                }
            } else if c - eps < iv.lo || c + eps > iv.hi {
                return Err(Error::SupportOverflow(format!(
                    "[{}, {}] leaves the window [{}, {}]",
                    c - eps,
                    c + eps,
                    iv.lo,
                    iv.hi
                )));
            }
            let breaks: Vec<f64> = (0..=2 * half)
                .map(|j| c - eps + eps * j as f64 / half as f64)
                .collect();
            Ok(Rule1D::from_breaks(breaks, 4))
        })
        .collect::<Result<_>>()?;
    let mut grid = SampleGrid::tensor(&rules);
    if domain.is_torus() {
        for x in &mut grid.points {
            *x = x.rem_euclid(1.0);
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessMember {
    pub eps: f64,
    pub f: DiscreteVectorFunction,
}

/// Near-extremal functions `f_eps = phi_eps^(1/p) W^(-2/p) r / |W^(-1/p) r|`
/// concentrated at `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFamily {
    pub t0: Vec<f64>,
    pub eps: Vec<f64>,
    pub members: Vec<WitnessMember>,
}

/// Builds the witness family for each width in `eps` (`cells` quadrature
/// cells per half-width and axis).
pub fn generate_witness(
    w_mat: &MatrixWeight,
    p: f64,
    r: &DirectionField,
    t0: &[f64],
    eps: &[f64],
    cells: usize,
) -> Result<WitnessFamily> {
    check_direction(w_mat, r)?;
    let members = eps
        .iter()
        .map(|&e| {
            let grid = bump_grid(&w_mat.domain, t0, e, cells)?;
            let values = (0..grid.len())
                .into_par_iter()
                .map(|j| {
                    let t = grid.point(j);
                    let d = w_mat.domain.displacement(t, t0);
                    let phi = triangular_bump(&d, e);
                    let r_t = r.evaluate(t)?;
                    let a = w_mat.fractional_power(-1.0 / p, t)?.matrix() * &r_t;
                    let b = w_mat.fractional_power(-2.0 / p, t)?.matrix() * &r_t;
                    Ok(b * C64::new(phi.powf(1.0 / p) / a.norm(), 0.0))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(WitnessMember {
                eps: e,
                f: DiscreteVectorFunction { grid, values },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WitnessFamily {
        t0: t0.to_vec(),
        eps: eps.to_vec(),
        members,
    })
}

/// `|f|_{L^p(W)} = (int |W^(1/p) f|^p)^(1/p)` by grid quadrature.
pub fn weighted_norm(f: &DiscreteVectorFunction, w_mat: &MatrixWeight, p: f64) -> Result<f64> {
    let terms = (0..f.grid.len())
        .into_par_iter()
        .map(|j| {
            let v = &f.values[j];
            if v.norm() == 0.0 {
                return Ok(0.0);
            }
            let m = w_mat.fractional_power(1.0 / p, f.grid.point(j))?;
            Ok(f.grid.weights[j] * (m.matrix() * v).norm().powf(p))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>().powf(1.0 / p))
}

/// `|<f, r>|_{L^p(w)} / |f|_{L^p(W)}`.
pub fn measure_ratio(f: &DiscreteVectorFunction, w_mat: &MatrixWeight, w: &ScalarWeight, p: f64, r: &DirectionField) -> Result<f64> {
    let denom = weighted_norm(f, w_mat, p)?;
    if !(denom > 0.0) {
        return Err(Error::ZeroNorm("|f|_{L^p(W)} = 0".into()));
    }
    let terms = (0..f.grid.len())
        .into_par_iter()
        .map(|j| {
            let v = &f.values[j];
            if v.norm() == 0.0 {
                return Ok(0.0);
            }
            let t = f.grid.point(j);
            let proj = r.evaluate(t)?.dotc(v).norm();
            Ok(f.grid.weights[j] * w.evaluate(t)? * proj.powf(p))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(terms.iter().sum::<f64>().powf(1.0 / p) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{random_positive_definite, CMatrix, HermitianMatrix};
    use crate::quadrature::GridSpec;
    use crate::verdict::Verdict;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> DomainDescriptor {
        DomainDescriptor::unit_interval()
    }

    fn diag_1_x2() -> MatrixWeight {
        MatrixWeight::diag_power(vec![0.0, 2.0], None, unit()).unwrap()
    }

    #[test]
    fn identity_is_bounded_by_one() {
        let w = MatrixWeight::identity(2, unit());
        let one = ScalarWeight::constant(1.0, unit());
        let r = DirectionField::constant(CVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.0, -2.0)])).unwrap();
        let est = projection_bound(&w, &one, 2.0, &r, &default_ladder(&w.domain, &[])).unwrap();
        assert!((est.b_hat - 1.0).abs() < 1e-14);
        assert_eq!(est.verdict, Verdict::BoundedAtResolution { bound: est.b_hat });
    }

    #[test]
    fn one_over_x_diverges_at_rate_minus_one() {
        let w = diag_1_x2();
        let one = ScalarWeight::constant(1.0, unit());
        let r = DirectionField::coordinate(2, 1).unwrap();
        let est = projection_bound(&w, &one, 2.0, &r, &default_ladder(&w.domain, &[&w.singular])).unwrap();
        match est.verdict {
            Verdict::DivergenceSuspected { rate, .. } => assert!((rate + 1.0).abs() < 0.1, "{rate}"),
            v => panic!("{v:?}"),
        }
        let t = est.argmax[0];
        assert!((est.b_hat - 1.0 / t).abs() < 1e-9 * est.b_hat);
    }

    #[test]
    fn example_entry_criterion() {
        let w = MatrixWeight::paper_example_unit();
        for x in [1e-4, 0.1, 0.5, 1.0] {
            let g = coordinate_criterion(&w, 2.0, 0, CoordinateTarget::EntryOfW, &[x]).unwrap();
            assert!((g * g - (1.0 + 1.0 / x)).abs() < 1e-9 * (1.0 + 1.0 / x));
        }
        let ladder = default_ladder(&w.domain, &[&w.singular]);
        let est = coordinate_projection_bound(&w, 2.0, 0, CoordinateTarget::EntryOfW, &ladder).unwrap();
        match est.verdict {
            Verdict::DivergenceSuspected { rate, .. } => assert!((rate + 0.5).abs() < 0.1, "{rate}"),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn coordinate_matches_general_form() {
        let w = MatrixWeight::rotated_power([0.4, -0.3], 0.7, None, unit()).unwrap();
        for target in [CoordinateTarget::EntryOfW, CoordinateTarget::EntryOfPowerTarget] {
            for k in 0..2 {
                let r = DirectionField::coordinate(2, k).unwrap();
                let s = coordinate_target(&w, 3.0, k, target).unwrap();
                for t in [0.05, 0.3, 0.8] {
                    let a = coordinate_criterion(&w, 3.0, k, target, &[t]).unwrap();
                    let b = projection_criterion(&w, &s, 3.0, &r, &[t]).unwrap();
                    assert!((a - b).abs() < 1e-12 * b);
                }
            }
        }
        assert!(matches!(
            coordinate_criterion(&w, 2.0, 2, CoordinateTarget::EntryOfW, &[0.5]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn diagonal_criterion_is_one() {
        let w = MatrixWeight::diag_power(vec![0.5, -0.7], None, unit()).unwrap();
        for target in [CoordinateTarget::EntryOfW, CoordinateTarget::EntryOfPowerTarget] {
            let ladder = default_ladder(&w.domain, &[&w.singular]);
            let est = coordinate_projection_bound(&w, 1.7, 1, target, &ladder).unwrap();
            assert!((est.b_hat - 1.0).abs() < 1e-12);
            assert!(est.verdict.is_bounded());
        }
    }

    #[test]
    fn eigen_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = build_grid(&unit(), &GridSpec::uniform(vec![8])).unwrap();
        for _ in 0..5 {
            let w = MatrixWeight::constant(random_positive_definite(&mut rng, 3), unit());
            for i in 0..3 {
                let rep = eigen_projection_check(&w, 2.5, i, &grid).unwrap();
                assert!(rep.max_deviation <= 1e-10);
                assert_eq!(rep.flagged, 0);
            }
        }
        let ex = MatrixWeight::paper_example_unit();
        let graded = build_grid(&unit(), &GridLadder::default_for(1, ex.singular.clone()).levels[2]).unwrap();
        for i in 0..2 {
            assert!(eigen_projection_check(&ex, 2.0, i, &graded).unwrap().max_deviation <= 1e-9);
        }
        let rep = eigen_projection_check(&MatrixWeight::identity(2, unit()), 2.0, 0, &grid).unwrap();
        assert_eq!((rep.checked, rep.flagged, rep.max_deviation), (0, 8, 0.0));
    }

    #[test]
    fn identity_witness() {
        let w = MatrixWeight::identity(2, unit());
        let r = DirectionField::coordinate(2, 0).unwrap();
        let fam = generate_witness(&w, 2.0, &r, &[0.5], &[0.1], 4).unwrap();
        let m = &fam.members[0];
        for (j, v) in m.f.values.iter().enumerate() {
            let phi = triangular_bump(&[m.f.grid.point(j)[0] - 0.5], 0.1);
            assert!((v[0].re - phi.sqrt()).abs() < 1e-14 && v[1].norm() == 0.0);
        }
        let one = ScalarWeight::constant(1.0, unit());
        assert!((measure_ratio(&m.f, &w, &one, 2.0, &r).unwrap() - 1.0).abs() < 1e-2);
        assert!(matches!(generate_witness(&w, 2.0, &r, &[0.95], &[0.1], 4), Err(Error::SupportOverflow(_))));
    }

    #[test]
    fn witness_saturates_criterion() {
        let w = diag_1_x2();
        let one = ScalarWeight::constant(1.0, unit());
        let r = DirectionField::coordinate(2, 1).unwrap();
        let fam = generate_witness(&w, 2.0, &r, &[0.1], &[0.05, 0.01, 0.001], 8).unwrap();
        let ratios: Vec<f64> = fam
            .members
            .iter()
            .map(|m| {
                let norm = weighted_norm(&m.f, &w, 2.0).unwrap();
                assert!((norm - 1.0).abs() < 0.02);
                measure_ratio(&m.f, &w, &one, 2.0, &r).unwrap()
            })
            .collect();
        assert!((ratios[2] - 10.0).abs() < 0.5, "{ratios:?}");
        assert!((ratios[0] - 10.0).abs() > (ratios[2] - 10.0).abs());
    }

    #[test]
    fn zero_function_rejected() {
        let w = MatrixWeight::identity(1, unit());
        let grid = build_grid(&unit(), &GridSpec::uniform(vec![4])).unwrap();
        let f = DiscreteVectorFunction {
            values: vec![CVector::zeros(1); grid.len()],
            grid,
        };
        let r = DirectionField::coordinate(1, 0).unwrap();
        let one = ScalarWeight::constant(1.0, unit());
        assert!(matches!(measure_ratio(&f, &w, &one, 2.0, &r), Err(Error::ZeroNorm(_))));
        assert!(matches!(DirectionField::constant(CVector::zeros(2)), Err(Error::ZeroNorm(_))));
    }

    #[test]
    fn eigen_field_is_unit() {
        let w = MatrixWeight::custom(
            2,
            unit(),
            |t| HermitianMatrix::from_real_diagonal(&[1.0 + t[0], 3.0]).into_matrix() + CMatrix::identity(2, 2),
            "shifted",
        );
        let r = DirectionField::eigenvector(&w, 1).unwrap();
        assert!((r.evaluate(&[0.3]).unwrap().norm() - 1.0).abs() < UNIT_TOL);
    }
}
