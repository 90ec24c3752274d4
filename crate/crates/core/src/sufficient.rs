//! A checkable sufficient condition for matrix A_p, built from scalar data.
//!
//! For each `k`: (i) `w_kk^(2/p) w_kk^(-2/p)` is essentially bounded and
//! (ii) `(w_kk^(2/p))^(p/2)` is a scalar A_p weight. Together these imply
//! `W` is in A_p. They are not necessary, so a failure is reported as
//! indeterminate, never as exclusion.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{AveragingSet, LebesgueExponent, SetFamily};
use crate::error::{Error, Result};
use crate::metrics::{a2_averaged_matrix_constant, local_integrability, A2Estimate, ConstantTrace, RefinementLadder};
use crate::projection::{coordinate_projection_bound, CoordinateTarget};
use crate::quadrature::{set_grid, GridLadder, Resolution};
use crate::verdict::{EssSupEstimate, VerdictClass};
use crate::weight::{MatrixWeight, ScalarWeight};

/// `avg_E w * (avg_E w^(-q/p))^(p/q)` for one set.
pub fn scalar_set_value(w: &ScalarWeight, p: &LebesgueExponent, set: &AveragingSet, res: &Resolution) -> Result<f64> {
    set.validate(&w.domain)?;
    let grid = set_grid(set, &w.domain, &w.singular, res)?;
    let s = -p.q() / p.p();
    let vals = (0..grid.len())
        .into_par_iter()
        .map(|i| w.evaluate(grid.point(i)))
        .collect::<Result<Vec<_>>>()?;
    let (mut a, mut b) = (0.0, 0.0);
    for (v, c) in vals.iter().zip(&grid.weights) {
        a += c * v;
        b += c * v.powf(s);
    }
    Ok((a / set.volume) * (b / set.volume).powf(p.p() / p.q()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarApEstimate {
    pub per_set: Vec<f64>,
    pub c_hat: f64,
    pub argmax_set: AveragingSet,
    pub resolution: Resolution,
}

/// Supremum of [`scalar_set_value`] over a family. A weight failing the
/// integrability check is an error.
pub fn scalar_muckenhoupt_constant(w: &ScalarWeight, p: &LebesgueExponent, family: &SetFamily, res: &Resolution) -> Result<ScalarApEstimate> {
    let report = local_integrability(&w.as_matrix_weight(), p)?;
    if !report.passed {
        return Err(Error::NotLocallyIntegrable(format!(
            "integrals of w {:?} and w^(-q/p) {:?} at floors {:?}",
            report.norm_integrals, report.dual_integrals, report.floors
        )));
    }
    let sets = family.enumerate(&w.domain)?;
    if sets.is_empty() {
        return Err(Error::FamilyMismatch("family has no sets".into()));
    }
    let per_set = sets
        .par_iter()
        .map(|set| scalar_set_value(w, p, set, res))
        .collect::<Result<Vec<_>>>()?;
    let best = per_set
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0;
    Ok(ScalarApEstimate {
        c_hat: per_set[best],
        argmax_set: sets[best].clone(),
        per_set,
        resolution: *res,
    })
}

/// Scalar A_p constant across a ladder; non-integrable weights give a
/// divergent trace.
pub fn scalar_refinement(w: &ScalarWeight, p: &LebesgueExponent, ladder: &RefinementLadder) -> Result<ConstantTrace> {
    let values = ladder
        .levels
        .iter()
        .map(|l| Ok(scalar_muckenhoupt_constant(w, p, &l.family, &l.resolution)?.c_hat))
        .collect::<Result<Vec<_>>>();
    match values {
        Ok(v) => Ok(ConstantTrace::from_values(&ladder.levels, v)),
        Err(Error::NotLocallyIntegrable(m)) => Ok(ConstantTrace::not_integrable(m)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SufficiencyVerdict {
    SufficientConditionsHold,
    Indeterminate { failed: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficiencyReport {
    pub p: f64,
    /// Per `k`, the ess sup of `w_kk^(2/p) w_kk^(-2/p)`.
    pub condition_i: Vec<EssSupEstimate>,
    /// Per `k`, the scalar A_p constant of `(w_kk^(2/p))^(p/2)`.
    pub condition_ii: Vec<ConstantTrace>,
    pub verdict: SufficiencyVerdict,
}

impl SufficiencyReport {
    pub fn holds(&self) -> bool {
        self.verdict == SufficiencyVerdict::SufficientConditionsHold
    }
}

/// Runs both conditions for every diagonal index (reported one-based in the
/// failure list).
pub fn sufficient_ap_check(w: &MatrixWeight, p: &LebesgueExponent, grid_ladder: &GridLadder, ladder: &RefinementLadder) -> Result<SufficiencyReport> {
    let per_k = (0..w.n)
        .into_par_iter()
        .map(|k| {
            let cond_i = coordinate_projection_bound(w, p.p(), k, CoordinateTarget::EntryOfPowerTarget, grid_ladder)?.squared();
            let target = ScalarWeight::power_target(w, k, p.p())?;
            let cond_ii = scalar_refinement(&target, p, ladder)?;
            Ok((cond_i, cond_ii))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut failed = Vec::new();
    for (k, (ci, cii)) in per_k.iter().enumerate() {
        if !ci.verdict.is_bounded() {
            failed.push(format!("condition (i), k = {}", k + 1));
        }
        if cii.class() != VerdictClass::Bounded {
            failed.push(format!("condition (ii), k = {}", k + 1));
        }
    }
    let verdict = if failed.is_empty() {
        SufficiencyVerdict::SufficientConditionsHold
    } else {
        SufficiencyVerdict::Indeterminate { failed }
    };
    let (condition_i, condition_ii) = per_k.into_iter().unzip();
    Ok(SufficiencyReport {
        p: p.p(),
        condition_i,
        condition_ii,
        verdict,
    })
}

/// `2 sqrt(2) / sqrt(3)`: the averaged A_2 bound of the example weight.
pub const EXAMPLE_A2_BOUND: f64 = 1.632_993_161_855_452;

/// The example weight fails condition (i) yet has a bounded averaged A_2
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonNecessityReport {
    pub sufficiency: SufficiencyReport,
    pub a2: A2Estimate,
    pub a2_bound: f64,
}

impl NonNecessityReport {
    /// Conditions fail while the direct constant respects the bound.
    pub fn demonstrates(&self, tol: f64) -> bool {
        !self.sufficiency.holds() && self.a2.c_hat <= self.a2_bound + tol
    }
}

pub fn non_necessity_demo(family: &SetFamily, res: &Resolution, grid_ladder: &GridLadder, ladder: &RefinementLadder) -> Result<NonNecessityReport> {
    let w = MatrixWeight::paper_example_unit();
    let p = LebesgueExponent::new(2.0)?;
    Ok(NonNecessityReport {
        sufficiency: sufficient_ap_check(&w, &p, grid_ladder, ladder)?,
        a2: a2_averaged_matrix_constant(&w, family, res)?,
        a2_bound: EXAMPLE_A2_BOUND,
    })
}
