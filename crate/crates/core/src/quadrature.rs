//! Sample grids and composite quadrature.
//!
//! Every rule here is composite Gauss-Legendre on a cell partition; order 1
//! is the midpoint rule. Near a declared singularity the partition is graded
//! geometrically so the cell widths shrink by `factor` per step toward it,
//! down to an innermost cell of width `floor` times the interval length. No
//! node ever lands on a cell boundary, so singular points are never sampled.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::domain::{AveragingSet, DomainDescriptor, Interval, SetShape, Singularity};
use crate::error::{Error, Result};

const MAX_ORDER: usize = 32;

pub fn legendre(order: usize) -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<Vec<(f64, f64)>>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        (1..=MAX_ORDER)
            .map(|n| {
                let rule = GaussLegendre::new(NonZeroUsize::new(n).unwrap());
                let mut pairs = rule.as_node_weight_pairs().to_vec();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                pairs
            })
            .collect()
    });
    &table[order.clamp(1, MAX_ORDER) - 1]
}

/// Geometric grading toward singular points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grading {
    #[serde(default)]
    pub singular: Vec<Singularity>,
    /// Ratio of consecutive cell widths walking toward the singularity, in (0, 1).
    pub factor: f64,
    /// Innermost cell width relative to the graded interval's length.
    pub floor: f64,
}

impl Grading {
    pub fn new(singular: Vec<Singularity>, factor: f64, floor: f64) -> Self {
        Self {
            singular,
            factor,
            floor,
        }
    }
}

/// Per-axis cell counts, optional grading, and the Gauss-Legendre order used
/// in each cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<Grading>,
    #[serde(default = "default_order")]
    pub order: usize,
}

fn default_order() -> usize {
    1
}

impl GridSpec {
    pub fn uniform(counts: Vec<usize>) -> Self {
        Self {
            counts,
            grading: None,
            order: 1,
        }
    }

    pub fn graded(counts: Vec<usize>, grading: Grading) -> Self {
        Self {
            counts,
            grading: Some(grading),
            order: 1,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    fn resolution(&self, axis: usize) -> Resolution {
        let (factor, floor) = self
            .grading
            .as_ref()
            .map(|g| (g.factor, g.floor))
            .unwrap_or((0.5, 1e-6));
        Resolution {
            cells: self.counts[axis],
            factor,
            floor,
            order: self.order,
        }
    }
}

/// Resolution of a one-dimensional composite rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolution {
    /// Cells across the interval away from singularities.
    pub cells: usize,
    pub factor: f64,
    pub floor: f64,
    pub order: usize,
}

impl Resolution {
    pub fn new(cells: usize, factor: f64, floor: f64, order: usize) -> Self {
        Self {
            cells,
            factor,
            floor,
            order,
        }
    }

    /// Doubles the cell count and squares the floor.
    pub fn refined(&self) -> Self {
        Self {
            cells: self.cells * 2,
            floor: self.floor * self.floor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 1 {
            return Err(Error::InvalidGrid("cells must be >= 1".into()));
        }
        if !(self.factor > 0.0 && self.factor < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "grading factor {} must lie in (0, 1)",
                self.factor
            )));
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "grading floor {} must lie in (0, 1)",
                self.floor
            )));
        }
        if self.order == 0 || self.order > MAX_ORDER {
            return Err(Error::InvalidGrid(format!(
                "order {} must lie in 1..={MAX_ORDER}",
                self.order
            )));
        }
        Ok(())
    }
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            cells: 32,
            factor: 0.5,
            floor: 1e-11,
            order: 8,
        }
    }
}

/// One-dimensional composite rule with its cell partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub breaks: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn from_breaks(breaks: Vec<f64>, order: usize) -> Self {
        let table = legendre(order);
        let mut nodes = Vec::with_capacity((breaks.len() - 1) * table.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for cell in breaks.windows(2) {
            let (mid, half) = (0.5 * (cell[0] + cell[1]), 0.5 * (cell[1] - cell[0]));
            for &(x, w) in table {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Self {
            breaks,
            nodes,
            weights,
        }
    }

    pub fn uniform(lo: f64, hi: f64, cells: usize, order: usize) -> Self {
        let breaks = (0..=cells)
            .map(|k| lo + (hi - lo) * k as f64 / cells as f64)
            .collect();
        Self::from_breaks(breaks, order)
    }

    /// Composite rule on `[lo, hi]`, split at interior singular points and
    /// graded toward every singular point that is closer to a piece than the
    /// piece is long.
    pub fn interval(lo: f64, hi: f64, singular: &[f64], res: &Resolution) -> Self {
        let length = hi - lo;
        let hmax = length / res.cells.max(1) as f64;
        let mut cuts = vec![lo];
        let mut interior: Vec<f64> = singular
            .iter()
            .copied()
            .filter(|&s| s > lo && s < hi)
            .collect();
        interior.sort_by(f64::total_cmp);
        interior.dedup();
        cuts.extend(interior);
        cuts.push(hi);

        let mut breaks = vec![lo];
        for piece in cuts.windows(2) {
            let (a, b) = (piece[0], piece[1]);
            let len = b - a;
            let dist_left = singular
                .iter()
                .filter(|&&s| s <= a)
                .map(|&s| a - s)
                .fold(f64::INFINITY, f64::min);
            let dist_right = singular
                .iter()
                .filter(|&&s| s >= b)
                .map(|&s| s - b)
                .fold(f64::INFINITY, f64::min);
            let left = dist_left < len;
            let right = dist_right < len;
            let graded = |d: f64, span: f64| {
                graded_offsets(span, d, hmax, res.factor, res.floor * length)
            };
            match (left, right) {
                (false, false) => {
                    let cells = (len / hmax).ceil().max(1.0) as usize;
                    for k in 1..=cells {
                        breaks.push(a + len * k as f64 / cells as f64);
                    }
                }
                (true, false) => {
                    for x in graded(dist_left, len).into_iter().skip(1) {
                        breaks.push(a + x);
                    }
                }
                (false, true) => {
                    let offs = graded(dist_right, len);
                    for x in offs.iter().rev().skip(1) {
                        breaks.push(b - x);
                    }
                }
                (true, true) => {
                    for x in graded(dist_left, 0.5 * len).into_iter().skip(1) {
                        breaks.push(a + x);
                    }
                    let offs = graded(dist_right, 0.5 * len);
                    for x in offs.iter().rev().skip(1) {
                        breaks.push(b - x);
                    }
                }
            }
        }
        Self::from_breaks(breaks, res.order)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Offsets `0 = x_0 < x_1 < ... < x_K = span` of a partition graded toward
/// offset 0, where the singularity sits a distance `dist` before offset 0.
///
/// Cell widths follow `w_k = min(hmax, kappa (D + x_k))` with
/// `kappa = 1/factor - 1`, which makes consecutive widths grow by `1/factor`.
/// For `dist = 0` the innermost width is `min_width`.
fn graded_offsets(span: f64, dist: f64, hmax: f64, factor: f64, min_width: f64) -> Vec<f64> {
    let kappa = 1.0 / factor - 1.0;
    let anchor = dist.max(min_width / kappa);
    let mut out = vec![0.0];
    let mut x = 0.0;
    loop {
        let w = (kappa * (anchor + x)).min(hmax).min(span);
        if x + 1.5 * w >= span {
            // split the remainder evenly into at most two cells
            if span - x > w * (1.0 + 1e-12) {
                out.push(x + 0.5 * (span - x));
            }
            out.push(span);
            return out;
        }
        x += w;
        out.push(x);
    }
}

/// Points and quadrature weights in `dim` dimensions, point-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SampleGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim.max(1))
            .zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.iter().map(|(t, w)| w * f(t)).sum()
    }

    /// Tensor product of one-dimensional rules; the last axis varies fastest.
    pub fn tensor(rules: &[Rule1D]) -> Self {
        let dim = rules.len();
        let mut points = vec![];
        let mut weights = vec![1.0];
        let mut current: Vec<Vec<f64>> = vec![vec![]];
        for rule in rules {
            let mut next_pts = Vec::with_capacity(current.len() * rule.len());
            let mut next_w = Vec::with_capacity(current.len() * rule.len());
            for (p, w) in current.iter().zip(&weights) {
                for (&x, &v) in rule.nodes.iter().zip(&rule.weights) {
                    let mut q = p.clone();
                    q.push(x);
                    next_pts.push(q);
                    next_w.push(w * v);
                }
            }
            current = next_pts;
            weights = next_w;
        }
        for p in current {
            points.extend(p);
        }
        Self {
            dim,
            points,
            weights,
        }
    }

    /// Keeps the points satisfying `keep`.
    pub fn filter(&self, keep: impl Fn(&[f64]) -> bool) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (t, w) in self.iter() {
            if keep(t) {
                points.extend_from_slice(t);
                weights.push(w);
            }
        }
        Self {
            dim: self.dim,
            points,
            weights,
        }
    }

    pub fn scale_weights(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
    }
}

fn axis_singular(singular: &[Singularity], axis: usize, periodic: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for s in singular.iter().filter(|s| s.axis == axis) {
        if periodic {
            let base = s.at.rem_euclid(1.0);
            out.extend([base - 2.0, base - 1.0, base, base + 1.0, base + 2.0]);
        } else {
            out.push(s.at);
        }
    }
    out
}

/// Grid on the domain's window.
///
/// Without grading this is the composite rule with `counts[axis]` cells per
/// axis; on a torus the uniform grid uses the points `k / n` with weights
/// `1 / n`.
pub fn build_grid(domain: &DomainDescriptor, spec: &GridSpec) -> Result<SampleGrid> {
    let dim = domain.dim();
    if spec.counts.len() != dim {
        return Err(Error::InvalidGrid(format!(
            "{} counts for a {dim}-dimensional domain",
            spec.counts.len()
        )));
    }
    if let Some(&c) = spec.counts.iter().find(|&&c| c < 2) {
        return Err(Error::InvalidGrid(format!("axis count {c} must be >= 2")));
    }
    let singular = spec
        .grading
        .as_ref()
        .map(|g| g.singular.clone())
        .unwrap_or_default();
    for s in &singular {
        if s.axis >= dim {
            return Err(Error::InvalidGrid(format!("singular axis {} out of range", s.axis)));
        }
        let iv = domain.window[s.axis];
        if !domain.is_torus() && (s.at < iv.lo || s.at > iv.hi) {
            return Err(Error::InvalidGrid(format!(
                "singular point {} lies outside the window [{}, {}] on axis {}",
                s.at, iv.lo, iv.hi, s.axis
            )));
        }
    }
    let mut rules = Vec::with_capacity(dim);
    for axis in 0..dim {
        let iv = domain.window[axis];
        let res = spec.resolution(axis);
        res.validate()?;
        let sing = axis_singular(&singular, axis, domain.is_torus());
        let rule = if domain.is_torus() && sing.is_empty() && spec.order == 1 {
            let n = res.cells;
            Rule1D {
                breaks: (0..=n).map(|k| k as f64 / n as f64).collect(),
                nodes: (0..n).map(|k| k as f64 / n as f64).collect(),
                weights: vec![1.0 / n as f64; n],
            }
        } else {
            Rule1D::interval(iv.lo, iv.hi, &sing, &res)
        };
        rules.push(rule);
    }
    Ok(SampleGrid::tensor(&rules))
}

/// Quadrature over an averaging set, graded toward the weight's singular
/// hyperplanes. Weights sum to `|E|`.
pub fn set_grid(
    set: &AveragingSet,
    domain: &DomainDescriptor,
    singular: &[Singularity],
    res: &Resolution,
) -> Result<SampleGrid> {
    res.validate()?;
    let periodic = domain.is_torus();
    let bbox: Vec<Interval> = set.bounding_box();
    let rules: Vec<Rule1D> = bbox
        .iter()
        .enumerate()
        .map(|(axis, iv)| {
            Rule1D::interval(iv.lo, iv.hi, &axis_singular(singular, axis, periodic), res)
        })
        .collect();
    let mut grid = SampleGrid::tensor(&rules);
    let needs_mask = match &set.shape {
        SetShape::Ball { center, .. } => center.len() > 1,
        SetShape::ProductBall {
            center_x, center_y, ..
        } => center_x.len() > 1 || center_y.len() > 1,
    };
    if needs_mask {
        grid = match &set.shape {
            SetShape::Ball { center, radius } => {
                let r2 = radius * radius;
                grid.filter(|t| {
                    t.iter().zip(center).map(|(a, c)| (a - c).powi(2)).sum::<f64>() <= r2
                })
            }
            SetShape::ProductBall {
                center_x,
                radius_x,
                center_y,
                radius_y,
            } => {
                let m = center_x.len();
                let (rx2, ry2) = (radius_x * radius_x, radius_y * radius_y);
                grid.filter(|t| {
                    let dx: f64 = t[..m].iter().zip(center_x).map(|(a, c)| (a - c).powi(2)).sum();
                    let dy: f64 = t[m..].iter().zip(center_y).map(|(a, c)| (a - c).powi(2)).sum();
                    dx <= rx2 && dy <= ry2
                })
            }
        };
        let total = grid.total_weight();
        if total <= 0.0 {
            return Err(Error::InvalidGrid("ball contains no quadrature nodes".into()));
        }
        grid.scale_weights(set.volume / total);
    }
    if periodic {
        for x in &mut grid.points {
            *x = x.rem_euclid(1.0);
        }
    }
    Ok(grid)
}

/// Sequence of grid specs, coarse to fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLadder {
    pub levels: Vec<GridSpec>,
}

impl GridLadder {
    pub fn new(levels: Vec<GridSpec>) -> Self {
        Self { levels }
    }

    /// Graded grids on a window with innermost cells `floors[i]` and a fixed
    /// coarse count.
    pub fn graded_floors(dim: usize, cells: usize, singular: Vec<Singularity>, floors: &[f64]) -> Self {
        Self {
            levels: floors
                .iter()
                .map(|&floor| {
                    GridSpec::graded(vec![cells; dim], Grading::new(singular.clone(), 0.5, floor))
                })
                .collect(),
        }
    }

    /// The default ladder: innermost cells 1e-2, 1e-4, 1e-6 of the window.
    pub fn default_for(dim: usize, singular: Vec<Singularity>) -> Self {
        Self::graded_floors(dim, 16, singular, &[1e-2, 1e-4, 1e-6])
    }

    /// Uniform grids with the given per-axis counts.
    pub fn uniform(dim: usize, counts: &[usize]) -> Self {
        Self {
            levels: counts.iter().map(|&n| GridSpec::uniform(vec![n; dim])).collect(),
        }
    }
}
