//! The 2x2 example weight `[[sqrt x + 1/sqrt x, i/sqrt x], [-i/sqrt x, 1/sqrt x]]`
//! on `(0, 1]`: closed forms and the checks built on them.

use serde::{Deserialize, Serialize};

use crate::domain::{AveragingSet, RadiusLadder, SetFamily};
use crate::error::Result;
use crate::hermitian::{frobenius_norm, CMatrix, C64};
use crate::metrics::{a2_averaged_matrix_constant, integrate_power, ConstantTrace, Level, DEFAULT_FLOORS};
use crate::metrics::RefinementLadder;
use crate::projection::{coordinate_projection_bound, CoordinateTarget};
use crate::quadrature::{GridLadder, Resolution};
use crate::sufficient::{sufficient_ap_check, NonNecessityReport, SufficiencyReport, EXAMPLE_A2_BOUND};
use crate::verdict::{EssSupEstimate, TracePoint};
use crate::weight::MatrixWeight;

/// Quadrature for the example's interval integrals.
pub const EXAMPLE_RESOLUTION: Resolution = Resolution {
    cells: 32,
    factor: 0.5,
    floor: 1e-9,
    order: 8,
};

/// `W_{a,b} W^(-1)_{a,b} = c I` with `c` returned here.
pub fn product_closed_form(a: f64, b: f64) -> f64 {
    let (sa, sb) = (a.sqrt(), b.sqrt());
    4.0 / 3.0 * ((b - a).powi(2) - (a * b).sqrt() * (sb - sa).powi(2))
}

/// `(1/(b-a)) sqrt(tr(W_{a,b} W^(-1)_{a,b}))` in closed form.
pub fn frobenius_closed_form(a: f64, b: f64) -> f64 {
    (2.0 * product_closed_form(a, b)).sqrt() / (b - a)
}

/// `sqrt(8/3)`, the Frobenius value on `(0, 1)`.
pub fn frobenius_limit() -> f64 {
    (8.0f64 / 3.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminantCheck {
    pub samples: usize,
    pub smallest: f64,
    pub max_deviation: f64,
    pub pass: bool,
}

/// `|det W(x) - 1|` at `count` points spaced geometrically over `[smallest, 1)`.
pub fn determinant_check(count: usize, smallest: f64) -> Result<DeterminantCheck> {
    let w = MatrixWeight::paper_example_unit();
    let mut max_deviation: f64 = 0.0;
    for i in 0..count {
        let x = smallest.powf(1.0 - i as f64 / count as f64);
        max_deviation = max_deviation.max((w.evaluate(&[x])?.det() - 1.0).abs());
    }
    Ok(DeterminantCheck {
        samples: count,
        smallest,
        max_deviation,
        pass: max_deviation <= 1e-10,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCheck {
    /// `x`, `w_11(x) (W^(-1))_11(x)` and the point itself as resolution.
    pub samples: Vec<TracePoint>,
    /// Largest relative gap to `1 + 1/x`.
    pub max_closed_form_error: f64,
    /// Ess-sup estimate of the same product over a graded ladder.
    pub estimate: EssSupEstimate,
}

pub fn divergence_check(grid_ladder: &GridLadder) -> Result<DivergenceCheck> {
    let w = MatrixWeight::paper_example_unit();
    let mut samples = Vec::new();
    let mut err: f64 = 0.0;
    for k in 0..=12 {
        let x = 2f64.powi(-k);
        let m = w.evaluate(&[x])?;
        let v = m.entry(0, 0).re * m.inverse()?.entry(0, 0).re;
        err = err.max((v - (1.0 + 1.0 / x)).abs() / (1.0 + 1.0 / x));
        samples.push(TracePoint {
            x,
            value: v,
            resolution: x,
        });
    }
    Ok(DivergenceCheck {
        samples,
        max_closed_form_error: err,
        estimate: coordinate_projection_bound(&w, 2.0, 0, CoordinateTarget::EntryOfW, grid_ladder)?.squared(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEntry {
    pub a: f64,
    pub b: f64,
    /// Row-major entries of `W_{a,b} W^(-1)_{a,b}` as `[re, im]`.
    pub numeric: Vec<[f64; 2]>,
    pub closed_form: f64,
    /// `|numeric - closed_form I|_F / closed_form`.
    pub rel_error: f64,
    pub resolution: Resolution,
}

/// Relative tolerance of a computed product: intervals touching the
/// singular point carry the error of the innermost graded cell.
pub fn product_tolerance(a: f64) -> f64 {
    if a > 0.0 {
        1e-6
    } else {
        1e-5
    }
}

/// `W_{a,b} W^(-1)_{a,b}` by graded quadrature.
pub fn averaged_product(a: f64, b: f64, res: &Resolution) -> Result<ProductEntry> {
    let w = MatrixWeight::paper_example_unit();
    let set = AveragingSet::interval(a, b)?;
    let m = integrate_power(&w, 1.0, &set, res)? * integrate_power(&w, -1.0, &set, res)?;
    let c = product_closed_form(a, b);
    let target = CMatrix::identity(2, 2) * C64::new(c, 0.0);
    Ok(ProductEntry {
        a,
        b,
        numeric: m.transpose().iter().map(|z| [z.re, z.im]).collect(),
        closed_form: c,
        rel_error: frobenius_norm(&(&m - target)) / c,
        resolution: *res,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusEntry {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrobeniusCheck {
    pub entries: Vec<FrobeniusEntry>,
    pub max: f64,
    pub bound: f64,
    /// Value on `(0, 1)` and its target `sqrt(8/3)`.
    pub limit_value: f64,
    pub limit_target: f64,
    pub resolution: Resolution,
    pub pass: bool,
}

/// Frobenius value from a computed product entry.
pub fn frobenius_value(entry: &ProductEntry) -> f64 {
    let tr = entry.numeric[0][0] + entry.numeric[3][0];
    tr.max(0.0).sqrt() / (entry.b - entry.a)
}

pub fn frobenius_check(pairs: &[(f64, f64)], res: &Resolution) -> Result<FrobeniusCheck> {
    let mut entries = Vec::with_capacity(pairs.len());
    for &(a, b) in pairs {
        entries.push(FrobeniusEntry {
            a,
            b,
            value: frobenius_value(&averaged_product(a, b, res)?),
        });
    }
    let max = entries.iter().map(|e| e.value).fold(0.0, f64::max);
    let limit_value = frobenius_value(&averaged_product(0.0, 1.0, res)?);
    let bound = EXAMPLE_A2_BOUND;
    Ok(FrobeniusCheck {
        pass: max <= bound + 1e-6 && (limit_value - frobenius_limit()).abs() <= 1e-5,
        entries,
        max,
        bound,
        limit_value,
        limit_target: frobenius_limit(),
        resolution: *res,
    })
}

/// Pairs reported by the example block.
pub fn sample_pairs() -> Vec<(f64, f64)> {
    let cuts = [0.0, 1e-3, 0.01, 0.1, 0.25, 0.5, 0.75, 1.0];
    let mut out = Vec::new();
    for (i, &a) in cuts.iter().enumerate() {
        for &b in &cuts[i + 1..] {
            if a == 0.0 && b < 0.05 {
                continue;
            }
            out.push((a, b));
        }
    }
    out
}

/// Zero-anchored intervals, finer at each level.
pub fn a2_ladder() -> Vec<Level> {
    [(0.04, 1e-6), (0.02, 1e-7), (0.01, 1e-8)]
        .iter()
        .map(|&(r_min, floor)| Level {
            family: SetFamily::anchored(vec![0.0], RadiusLadder::new(r_min, 0.5, 4)),
            resolution: Resolution {
                floor,
                ..Resolution::default()
            },
            scale: 1.0 / r_min,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub determinant: DeterminantCheck,
    pub divergence: DivergenceCheck,
    pub products: Vec<ProductEntry>,
    pub frobenius: FrobeniusCheck,
    pub sufficiency: SufficiencyReport,
    /// Averaged A_2 constant across the refinement ladder.
    pub a2_trace: ConstantTrace,
    pub non_necessity: NonNecessityReport,
    pub pass: bool,
}

/// Runs every example check with built-in settings.
pub fn example_report() -> Result<ExampleReport> {
    let w = MatrixWeight::paper_example_unit();
    let grid_ladder = GridLadder::default_for(1, w.singular.clone());
    let determinant = determinant_check(1000, 1e-5)?;
    let divergence = divergence_check(&grid_ladder)?;
    let res = EXAMPLE_RESOLUTION;
    let products = [(0.25, 1.0), (0.0, 1.0), (0.0, 0.5), (0.1, 0.2), (0.5, 1.0), (1e-3, 0.01)]
        .iter()
        .map(|&(a, b)| averaged_product(a, b, &res))
        .collect::<Result<Vec<_>>>()?;
    let frobenius = frobenius_check(&sample_pairs(), &res)?;
    let family = SetFamily::anchored(vec![0.0], RadiusLadder::new(0.05, 0.5, 4));
    let ladder = RefinementLadder::fixed_family(family, &DEFAULT_FLOORS);
    let p = crate::domain::LebesgueExponent::new(2.0)?;
    let sufficiency = sufficient_ap_check(&w, &p, &grid_ladder, &ladder)?;
    let levels = a2_ladder();
    let estimates = levels
        .iter()
        .map(|l| a2_averaged_matrix_constant(&w, &l.family, &l.resolution))
        .collect::<Result<Vec<_>>>()?;
    let a2_trace = ConstantTrace::from_values(&levels, estimates.iter().map(|e| e.c_hat).collect());
    let non_necessity = NonNecessityReport {
        sufficiency: sufficiency.clone(),
        a2: estimates.last().expect("ladder has levels").clone(),
        a2_bound: EXAMPLE_A2_BOUND,
    };
    let pass = determinant.pass
        && divergence.max_closed_form_error <= 1e-9
        && divergence.estimate.verdict.is_divergent()
        && products.iter().all(|e| e.rel_error <= product_tolerance(e.a))
        && frobenius.pass
        && !sufficiency.holds()
        && a2_trace.c_hat <= EXAMPLE_A2_BOUND + 1e-3
        && non_necessity.demonstrates(1e-3);
    Ok(ExampleReport {
        determinant,
        divergence,
        products,
        frobenius,
        sufficiency,
        a2_trace,
        non_necessity,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((product_closed_form(0.25, 1.0) - 4.0 / 3.0 * 0.4375).abs() < 1e-15);
        assert!((frobenius_closed_form(0.0, 1.0) - frobenius_limit()).abs() < 1e-15);
        // scale invariance of the Frobenius value
        assert!((frobenius_closed_form(0.02, 0.08) - frobenius_closed_form(0.25, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn quarter_to_one() {
        let e = averaged_product(0.25, 1.0, &EXAMPLE_RESOLUTION).unwrap();
        assert!(e.rel_error < 1e-9, "{}", e.rel_error);
        assert!((e.numeric[0][0] - 4.0 / 3.0 * 0.4375).abs() < 1e-9);
    }

    #[test]
    fn from_zero() {
        for b in [0.05, 0.3, 1.0] {
            let e = averaged_product(0.0, b, &EXAMPLE_RESOLUTION).unwrap();
            assert!(e.rel_error < product_tolerance(0.0), "b = {b}: {}", e.rel_error);
        }
        let f = frobenius_value(&averaged_product(0.0, 1.0, &EXAMPLE_RESOLUTION).unwrap());
        assert!((f - frobenius_limit()).abs() < 1e-5, "{f}");
    }

    #[test]
    fn determinant() {
        let d = determinant_check(1000, 1e-5).unwrap();
        assert!(d.pass, "{}", d.max_deviation);
    }

    #[test]
    fn divergence_matches_closed_form() {
        let w = MatrixWeight::paper_example_unit();
        let d = divergence_check(&GridLadder::default_for(1, w.singular.clone())).unwrap();
        assert!(d.max_closed_form_error < 1e-9, "{}", d.max_closed_form_error);
        assert!(d.estimate.verdict.is_divergent());
    }
}
