//! Domains, averaging sets and Lebesgue exponents.
//!
//! Euclidean domains are represented by a finite computational window; the
//! supremum over all balls of `R^d` is approximated by the supremum over the
//! enumerated sets inside that window. Torus axes have period 1 and every
//! coordinate on them is reduced mod 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `1/p + 1/q = 1`.
pub const CONJUGATE_TOL: f64 = 1e-14;

/// Returns the Hölder conjugate `q = p / (p - 1)`.
pub fn holder_conjugate(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(p / (p - 1.0))
}

/// An exponent `p` in `(1, inf)` paired with its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LebesgueExponent {
    p: f64,
    q: f64,
}

impl LebesgueExponent {
    pub fn new(p: f64) -> Result<Self> {
        let q = holder_conjugate(p)?;
        Ok(Self { p, q })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// The exponent with the roles of `p` and `q` swapped.
    pub fn conjugate(&self) -> Self {
        Self {
            p: self.q,
            q: self.p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainKind {
    Euclidean { d: usize },
    Torus { d: usize },
    ProductEuclidean { m: usize, n: usize },
    ProductTorus { m: usize, n: usize },
}

impl DomainKind {
    pub fn dim(&self) -> usize {
        match *self {
            DomainKind::Euclidean { d } | DomainKind::Torus { d } => d,
            DomainKind::ProductEuclidean { m, n } | DomainKind::ProductTorus { m, n } => m + n,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(
            self,
            DomainKind::ProductEuclidean { .. } | DomainKind::ProductTorus { .. }
        )
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, DomainKind::Torus { .. } | DomainKind::ProductTorus { .. })
    }

    /// Dimension of the first factor (`m`) for product kinds, `d` otherwise.
    pub fn split(&self) -> usize {
        match *self {
            DomainKind::Euclidean { d } | DomainKind::Torus { d } => d,
            DomainKind::ProductEuclidean { m, .. } | DomainKind::ProductTorus { m, .. } => m,
        }
    }
}

/// Half-open coordinate interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Factor of a product domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    X,
    Y,
}

/// The domain `D` together with its computational window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDescriptor {
    pub kind: DomainKind,
    pub window: Vec<Interval>,
}

impl DomainDescriptor {
    pub fn new(kind: DomainKind, window: Vec<Interval>) -> Result<Self> {
        let dim = kind.dim();
        if dim == 0 {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if let DomainKind::ProductEuclidean { m, n } | DomainKind::ProductTorus { m, n } = kind {
            if m == 0 || n == 0 {
                return Err(Error::InvalidDomain("product factors need m, n >= 1".into()));
            }
        }
        let window = if kind.is_torus() {
            vec![Interval::new(0.0, 1.0); dim]
        } else {
            window
        };
        if window.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "window has {} axes, domain has {}",
                window.len(),
                dim
            )));
        }
        for (axis, iv) in window.iter().enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.hi > iv.lo) {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: window [{}, {}) has no positive length",
                    iv.lo, iv.hi
                )));
            }
        }
        Ok(Self { kind, window })
    }

    /// `R^d` restricted to the box given by `window`.
    pub fn euclidean(window: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            DomainKind::Euclidean { d: window.len() },
            window.iter().map(|&(a, b)| Interval::new(a, b)).collect(),
        )
    }

    /// The unit interval `[0, 1]`.
    pub fn unit_interval() -> Self {
        Self::euclidean(&[(0.0, 1.0)]).expect("valid window")
    }

    pub fn torus(d: usize) -> Result<Self> {
        Self::new(DomainKind::Torus { d }, Vec::new())
    }

    pub fn product_euclidean(m: usize, n: usize, window: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            DomainKind::ProductEuclidean { m, n },
            window.iter().map(|&(a, b)| Interval::new(a, b)).collect(),
        )
    }

    pub fn product_torus(m: usize, n: usize) -> Result<Self> {
        Self::new(DomainKind::ProductTorus { m, n }, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn is_torus(&self) -> bool {
        self.kind.is_torus()
    }

    pub fn volume(&self) -> f64 {
        self.window.iter().map(Interval::len).product()
    }

    /// Reduces torus coordinates mod 1; Euclidean coordinates pass through.
    pub fn reduce(&self, point: &[f64]) -> Vec<f64> {
        if self.is_torus() {
            point.iter().map(|x| x.rem_euclid(1.0)).collect()
        } else {
            point.to_vec()
        }
    }

    /// Closed containment in the window (always true on a torus).
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && (self.is_torus()
                || point
                    .iter()
                    .zip(&self.window)
                    .all(|(x, iv)| *x >= iv.lo && *x <= iv.hi))
    }

    /// Axis range `[start, end)` belonging to a factor.
    pub fn factor_axes(&self, factor: Factor) -> Result<std::ops::Range<usize>> {
        if !self.kind.is_product() {
            return Err(Error::InvalidDomain("not a product domain".into()));
        }
        let m = self.kind.split();
        Ok(match factor {
            Factor::X => 0..m,
            Factor::Y => m..self.dim(),
        })
    }

    /// The domain of a single factor of a product domain.
    pub fn factor_domain(&self, factor: Factor) -> Result<Self> {
        let axes = self.factor_axes(factor)?;
        let d = axes.len();
        let window = self.window[axes].to_vec();
        let kind = if self.is_torus() {
            DomainKind::Torus { d }
        } else {
            DomainKind::Euclidean { d }
        };
        Self::new(kind, window)
    }

    /// Signed displacement `a - b` per axis, using the shortest periodic
    /// representative on torus axes.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| {
                let d = x - y;
                if self.is_torus() {
                    d - d.round()
                } else {
                    d
                }
            })
            .collect()
    }
}

/// Singular hyperplane `{t : t[axis] = at}` of a weight.
///
/// On a one-dimensional domain this is a singular point. Radial weights in
/// higher dimension declare one hyperplane per axis through their centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    pub axis: usize,
    pub at: f64,
}

impl Singularity {
    pub fn new(axis: usize, at: f64) -> Self {
        Self { axis, at }
    }

    /// Hyperplanes through `center` on every axis.
    pub fn at_point(center: &[f64]) -> Vec<Self> {
        center
            .iter()
            .enumerate()
            .map(|(axis, &at)| Self { axis, at })
            .collect()
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} 2 pi / d
    let mut v = [1.0, 2.0];
    if d < 2 {
        return v[d];
    }
    let mut out = 0.0;
    for k in 2..=d {
        out = v[k % 2] * 2.0 * std::f64::consts::PI / k as f64;
        v[k % 2] = out;
    }
    out
}

pub fn ball_volume(d: usize, radius: f64) -> f64 {
    unit_ball_volume(d) * radius.powi(d as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetShape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    ProductBall {
        center_x: Vec<f64>,
        radius_x: f64,
        center_y: Vec<f64>,
        radius_y: f64,
    },
}

/// An element `E` of the set family, with its cached Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingSet {
    pub shape: SetShape,
    pub volume: f64,
}

impl AveragingSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::FamilyMismatch(format!("radius {radius} must be positive")));
        }
        let volume = ball_volume(center.len(), radius);
        Ok(Self {
            shape: SetShape::Ball { center, radius },
            volume,
        })
    }

    pub fn product_ball(
        center_x: Vec<f64>,
        radius_x: f64,
        center_y: Vec<f64>,
        radius_y: f64,
    ) -> Result<Self> {
        if !(radius_x > 0.0 && radius_y > 0.0 && radius_x.is_finite() && radius_y.is_finite()) {
            return Err(Error::FamilyMismatch("product radii must be positive".into()));
        }
        let volume = ball_volume(center_x.len(), radius_x) * ball_volume(center_y.len(), radius_y);
        Ok(Self {
            shape: SetShape::ProductBall {
                center_x,
                radius_x,
                center_y,
                radius_y,
            },
            volume,
        })
    }

    /// The interval `[a, b]` as a one-dimensional ball.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::ball(vec![0.5 * (a + b)], 0.5 * (b - a))
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            SetShape::Ball { center, .. } => center.len(),
            SetShape::ProductBall {
                center_x, center_y, ..
            } => center_x.len() + center_y.len(),
        }
    }

    /// Per-axis bounding box `[c - r, c + r]` (unreduced on torus axes).
    pub fn bounding_box(&self) -> Vec<Interval> {
        let boxed = |c: &[f64], r: f64| -> Vec<Interval> {
            c.iter().map(|&x| Interval::new(x - r, x + r)).collect()
        };
        match &self.shape {
            SetShape::Ball { center, radius } => boxed(center, *radius),
            SetShape::ProductBall {
                center_x,
                radius_x,
                center_y,
                radius_y,
            } => {
                let mut b = boxed(center_x, *radius_x);
                b.extend(boxed(center_y, *radius_y));
                b
            }
        }
    }

    /// Checks the set against a domain: shape kind, dimension, window fit.
    pub fn validate(&self, domain: &DomainDescriptor) -> Result<()> {
        if self.dim() != domain.dim() {
            return Err(Error::FamilyMismatch(format!(
                "set of dimension {} on a {}-dimensional domain",
                self.dim(),
                domain.dim()
            )));
        }
        let product_set = matches!(self.shape, SetShape::ProductBall { .. });
        if product_set != domain.kind.is_product() {
            return Err(Error::FamilyMismatch(
                "product balls belong to product domains and balls to the others".into(),
            ));
        }
        if let SetShape::ProductBall { center_x, .. } = &self.shape {
            if center_x.len() != domain.kind.split() {
                return Err(Error::FamilyMismatch("product factor dimensions differ".into()));
            }
        }
        if domain.is_torus() {
            let too_wide = self.bounding_box().iter().any(|iv| iv.len() > 1.0 + 1e-12);
            if too_wide {
                return Err(Error::FamilyMismatch("torus radii are capped at 1/2".into()));
            }
            return Ok(());
        }
        let tol = 1e-12;
        for (iv, w) in self.bounding_box().iter().zip(&domain.window) {
            let slack = tol * w.len().max(1.0);
            if iv.lo < w.lo - slack || iv.hi > w.hi + slack {
                return Err(Error::FamilyMismatch(format!(
                    "set [{}, {}] leaves the window [{}, {}]",
                    iv.lo, iv.hi, w.lo, w.hi
                )));
            }
        }
        Ok(())
    }
}

/// Geometric (log-spaced) radius ladder from `r_max` down to `r_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusLadder {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl RadiusLadder {
    pub fn new(r_min: f64, r_max: f64, count: usize) -> Self {
        Self { r_min, r_max, count }
    }

    /// Dyadic ladder `r_max, r_max/2, ..., r_max/2^(count-1)`. Ladders built
    /// this way nest as `count` grows.
    pub fn dyadic(r_max: f64, count: usize) -> Self {
        let r_min = r_max * 0.5f64.powi(count.saturating_sub(1) as i32);
        Self { r_min, r_max, count }
    }

    pub fn radii(&self) -> Result<Vec<f64>> {
        if self.count == 0 || !(self.r_min > 0.0) || self.r_max < self.r_min {
            return Err(Error::FamilyMismatch(format!(
                "radius ladder needs count >= 1 and 0 < r_min <= r_max (got {self:?})"
            )));
        }
        if self.count == 1 {
            return Ok(vec![self.r_max]);
        }
        let ratio = (self.r_min / self.r_max).powf(1.0 / (self.count - 1) as f64);
        Ok((0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.r_min
                } else {
                    self.r_max * ratio.powi(i as i32)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterSpec {
    /// Per-axis lattice of centres. For a ball of radius `r` the centres on
    /// an axis are spread evenly over `[lo + r, hi - r]`, endpoints included,
    /// so that every set stays inside the window; a count of one places the
    /// centre at the midpoint. On torus axes centres sit at `(j + 1/2)/count`.
    Lattice { counts: Vec<usize> },
    /// Sets touching a point: per axis the centre is `a + r`, or `a - r`
    /// when `a + 2r` would leave the window.
    Anchored { point: Vec<f64> },
    Explicit { centers: Vec<Vec<f64>> },
}

/// The family `S_D`, discretised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetFamily {
    Grid {
        centers: CenterSpec,
        radii: RadiusLadder,
        /// Radii of the second factor on product domains (defaults to `radii`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radii_y: Option<RadiusLadder>,
    },
    Explicit { sets: Vec<AveragingSet> },
}

impl SetFamily {
    pub fn lattice(counts: Vec<usize>, radii: RadiusLadder) -> Self {
        SetFamily::Grid {
            centers: CenterSpec::Lattice { counts },
            radii,
            radii_y: None,
        }
    }

    pub fn anchored(point: Vec<f64>, radii: RadiusLadder) -> Self {
        SetFamily::Grid {
            centers: CenterSpec::Anchored { point },
            radii,
            radii_y: None,
        }
    }

    /// Intervals `[a_i, b_i]` on a line.
    pub fn intervals(pairs: &[(f64, f64)]) -> Result<Self> {
        let sets = pairs
            .iter()
            .map(|&(a, b)| AveragingSet::interval(a, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(SetFamily::Explicit { sets })
    }

    /// Number of sets the family enumerates on `domain`.
    pub fn total_count(&self, domain: &DomainDescriptor) -> Result<usize> {
        Ok(self.enumerate(domain)?.len())
    }

    pub fn enumerate(&self, domain: &DomainDescriptor) -> Result<Vec<AveragingSet>> {
        enumerate_sets(self, domain)
    }
}

fn axis_centers(
    spec: &CenterSpec,
    domain: &DomainDescriptor,
    axis: usize,
    radius: f64,
) -> Result<Vec<f64>> {
    let iv = domain.window[axis];
    match spec {
        CenterSpec::Lattice { counts } => {
            let count = counts[axis];
            if count == 0 {
                return Err(Error::FamilyMismatch("lattice counts must be >= 1".into()));
            }
            if domain.is_torus() {
                return Ok((0..count).map(|j| (j as f64 + 0.5) / count as f64).collect());
            }
            let (a, b) = (iv.lo + radius, iv.hi - radius);
            if b < a - 1e-12 * iv.len() {
                return Err(Error::FamilyMismatch(format!(
                    "radius {radius} does not fit in the window on axis {axis}"
                )));
            }
            if count == 1 {
                return Ok(vec![0.5 * (iv.lo + iv.hi)]);
            }
            Ok((0..count)
                .map(|j| a + (b - a) * j as f64 / (count - 1) as f64)
                .collect())
        }
        CenterSpec::Anchored { point } => {
            let a = point[axis];
            if domain.is_torus() {
                return Ok(vec![(a + radius).rem_euclid(1.0)]);
            }
            let slack = 1e-12 * iv.len();
            if a + 2.0 * radius <= iv.hi + slack {
                Ok(vec![a + radius])
            } else if a - 2.0 * radius >= iv.lo - slack {
                Ok(vec![a - radius])
            } else {
                Err(Error::FamilyMismatch(format!(
                    "no set of radius {radius} anchored at {a} fits the window on axis {axis}"
                )))
            }
        }
        CenterSpec::Explicit { .. } => unreachable!("explicit centres are not per-axis"),
    }
}

fn cartesian(per_axis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for values in per_axis {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

fn centers_for(
    spec: &CenterSpec,
    domain: &DomainDescriptor,
    axes: std::ops::Range<usize>,
    radius: f64,
) -> Result<Vec<Vec<f64>>> {
    match spec {
        CenterSpec::Explicit { centers } => Ok(centers
            .iter()
            .map(|c| c[axes.clone()].to_vec())
            .collect()),
        _ => {
            let per_axis = axes
                .map(|axis| axis_centers(spec, domain, axis, radius))
                .collect::<Result<Vec<_>>>()?;
            Ok(cartesian(&per_axis))
        }
    }
}

/// Enumerates the family deterministically: radius-major, then centres in
/// lexicographic lattice order.
pub fn enumerate_sets(family: &SetFamily, domain: &DomainDescriptor) -> Result<Vec<AveragingSet>> {
    let (centers, radii, radii_y) = match family {
        SetFamily::Explicit { sets } => {
            for set in sets {
                set.validate(domain)?;
            }
            return Ok(sets.clone());
        }
        SetFamily::Grid {
            centers,
            radii,
            radii_y,
        } => (centers, radii, radii_y),
    };
    let dim = domain.dim();
    match centers {
        CenterSpec::Lattice { counts } if counts.len() != dim => {
            return Err(Error::FamilyMismatch(format!(
                "lattice has {} axes, domain has {dim}",
                counts.len()
            )))
        }
        CenterSpec::Anchored { point } if point.len() != dim => {
            return Err(Error::FamilyMismatch("anchor dimension differs from domain".into()))
        }
        CenterSpec::Explicit { centers } if centers.iter().any(|c| c.len() != dim) => {
            return Err(Error::FamilyMismatch("explicit centre dimension differs".into()))
        }
        _ => {}
    }
    let cap = |r: f64| if domain.is_torus() { r.min(0.5) } else { r };
    let rx = radii.radii()?;
    let mut out = Vec::new();
    if domain.kind.is_product() {
        let ry = radii_y.unwrap_or(*radii).radii()?;
        let m = domain.kind.split();
        for &r1 in &rx {
            for &r2 in &ry {
                let (r1, r2) = (cap(r1), cap(r2));
                let cx = centers_for(centers, domain, 0..m, r1)?;
                let cy = centers_for(centers, domain, m..dim, r2)?;
                // explicit centres pair up coordinate-wise rather than cross
                if matches!(centers, CenterSpec::Explicit { .. }) {
                    for (x, y) in cx.iter().zip(&cy) {
                        out.push(AveragingSet::product_ball(x.clone(), r1, y.clone(), r2)?);
                    }
                } else {
                    for x in &cx {
                        for y in &cy {
                            out.push(AveragingSet::product_ball(x.clone(), r1, y.clone(), r2)?);
                        }
                    }
                }
            }
        }
    } else {
        for &r in &rx {
            let r = cap(r);
            for c in centers_for(centers, domain, 0..dim, r)? {
                out.push(AveragingSet::ball(c, r)?);
            }
        }
    }
    for set in &out {
        set.validate(domain)?;
    }
    Ok(out)
}
