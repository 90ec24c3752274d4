//! Batch runs: a [`RunConfig`] in, a versioned [`Report`] out.

mod config;
pub mod example;

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    Analysis, ConfigError, DirectionSpec, KernelSpec, LadderSpec, OperatorSpec, Prepared, ProjectionSpec, RunConfig, ScalarSpec,
    SlicesSpec, TransformSpec, TruncationSpec, WeightSpec,
};
pub use example::ExampleReport;

use crate::domain::{DomainDescriptor, DomainKind, Interval};
use crate::error::{Error, Result};
use crate::metrics::{
    ap_condition_check, roudenko_constant, uniform_slice_check, ApEstimate, ConstantTrace, RefinementLadder, RoudenkoEstimate,
    SliceReport,
};
use crate::projection::projection_bound;
use crate::sufficient::{sufficient_ap_check, SufficiencyReport};
use crate::transform::{
    hilbert_op, kernel_condition_estimates, norm_refinement, partial_riesz_op, riesz_op, uniform_boundedness_sweep, Kernel,
    KernelConditionEstimate, NormOptions, NormTrace, PeriodicGrid, SweepTable,
};
use crate::verdict::{TracePoint, VerdictClass};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "muckenhoupt";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApBlock {
    pub trace: ConstantTrace,
    /// Estimate at the finest level, with its maximizing set and direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finest: Option<ApEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoudenkoBlock {
    pub trace: ConstantTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finest: Option<RoudenkoEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBlock {
    pub direction: String,
    pub scalar: String,
    pub estimate: crate::verdict::EssSupEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformBlock {
    pub operator: String,
    pub trace: NormTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBlock {
    pub kernel: String,
    pub conditions: KernelConditionEstimate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockResult {
    Ap(ApBlock),
    Roudenko(RoudenkoBlock),
    Projection(ProjectionBlock),
    Sufficient(SufficiencyReport),
    Slices(SliceReport),
    Transform(TransformBlock),
    Kernel(KernelBlock),
    Example(Box<ExampleReport>),
}

impl BlockResult {
    /// Verdicts that count toward the expect-bounded contract.
    pub fn verdict_classes(&self) -> Vec<VerdictClass> {
        match self {
            BlockResult::Ap(b) => vec![b.trace.class()],
            BlockResult::Roudenko(b) => vec![b.trace.class()],
            BlockResult::Projection(b) => vec![b.estimate.verdict.class()],
            BlockResult::Slices(s) => vec![s.verdict],
            BlockResult::Transform(b) => vec![b.trace.verdict.class()],
            BlockResult::Kernel(b) => b.sweep.iter().map(|s| s.verdict.class()).collect(),
            BlockResult::Sufficient(_) | BlockResult::Example(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: Analysis,
    pub status: BlockStatus,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<BlockResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<BlockError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub config: RunConfig,
    pub blocks: Vec<Block>,
}

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const DIVERGENCE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NUMERIC: u8 = 3;
}

impl Report {
    pub fn block(&self, id: Analysis) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn result(&self, id: Analysis) -> Option<&BlockResult> {
        self.block(id).and_then(|b| b.result.as_ref())
    }

    pub fn has_errors(&self) -> bool {
        self.blocks.iter().any(|b| b.status == BlockStatus::Error)
    }

    pub fn divergence_detected(&self) -> bool {
        self.blocks
            .iter()
            .filter_map(|b| b.result.as_ref())
            .any(|r| r.verdict_classes().contains(&VerdictClass::Divergent))
    }

    /// 3 if a block errored, 1 if an expected-bounded run diverged, else 0.
    pub fn exit_code(&self) -> u8 {
        if self.has_errors() {
            exit::NUMERIC
        } else if self.config.expect_bounded && self.divergence_detected() {
            exit::DIVERGENCE
        } else {
            exit::OK
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    /// The same report with every wall time set to zero.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for b in &mut r.blocks {
            b.wall_time_s = 0.0;
        }
        r
    }

    /// Trace addressed by `id`: a block name, optionally followed by
    /// `/`-separated parts (`slices/3`, `sufficient/i/1`,
    /// `example/divergence`, `example/a2`). Indices are one-based.
    pub fn trace(&self, id: &str) -> Result<Vec<TracePoint>> {
        let mut parts = id.split('/');
        let head = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let missing = || Error::param("block", format!("no trace `{id}` in this report"));
        let analysis = Analysis::parse(head).ok_or_else(missing)?;
        let result = self.result(analysis).ok_or_else(missing)?;
        let index = |s: &str, len: usize| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(k) if k >= 1 && k <= len => Ok(k - 1),
                _ => Err(missing()),
            }
        };
        let points = match (result, rest.as_slice()) {
            (BlockResult::Ap(b), []) => b.trace.trace.clone(),
            (BlockResult::Roudenko(b), []) => b.trace.trace.clone(),
            (BlockResult::Projection(b), []) => b.estimate.trace.clone(),
            (BlockResult::Transform(b), []) => b.trace.trace.clone(),
            (BlockResult::Slices(s), [k]) => s.slices[index(k, s.slices.len())?].constant.trace.clone(),
            (BlockResult::Sufficient(s), ["i", k]) => s.condition_i[index(k, s.condition_i.len())?].trace.clone(),
            (BlockResult::Sufficient(s), ["ii", k]) => s.condition_ii[index(k, s.condition_ii.len())?].trace.clone(),
            (BlockResult::Example(e), ["divergence"]) => e.divergence.samples.clone(),
            (BlockResult::Example(e), ["divergence", "estimate"]) => e.divergence.estimate.trace.clone(),
            (BlockResult::Example(e), ["a2"]) => e.a2_trace.trace.clone(),
            _ => return Err(missing()),
        };
        Ok(points)
    }
}

/// Writes a trace as CSV with columns `x,value,resolution`.
pub fn write_plot_data(points: &[TracePoint], out: &mut impl Write) -> Result<()> {
    writeln!(out, "x,value,resolution")?;
    for p in points {
        writeln!(out, "{},{},{}", p.x, p.value, p.resolution)?;
    }
    Ok(())
}

pub fn emit_plot_data(report: &Report, block: &str, path: &Path) -> Result<()> {
    let points = report.trace(block)?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_plot_data(&points, &mut file)?;
    file.flush()?;
    Ok(())
}

/// Validates `config`, then runs the requested analyses in declared order.
/// Analysis failures land in their block; only configuration problems are
/// returned as errors.
pub fn run(config: &RunConfig) -> std::result::Result<Report, ConfigError> {
    let prepared = config.prepare()?;
    let blocks = config
        .analyses
        .par_iter()
        .map(|&a| {
            let start = Instant::now();
            let outcome = run_analysis(a, config, &prepared);
            let wall_time_s = start.elapsed().as_secs_f64();
            match outcome {
                Ok(result) => Block {
                    id: a,
                    status: BlockStatus::Ok,
                    wall_time_s,
                    result: Some(result),
                    error: None,
                },
                Err(e) => Block {
                    id: a,
                    status: BlockStatus::Error,
                    wall_time_s,
                    result: None,
                    error: Some(BlockError {
                        code: e.code().to_string(),
                        message: e.to_string(),
                    }),
                },
            }
        })
        .collect();
    Ok(Report {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        blocks,
    })
}

/// Built-in configuration of [`reproduce_example`].
pub fn example_config() -> RunConfig {
    RunConfig {
        weight: WeightSpec::Catalog {
            name: "paper_example".into(),
            params: serde_json::Value::Null,
        },
        domain: Some(DomainDescriptor {
            kind: DomainKind::Euclidean { d: 1 },
            window: vec![Interval::new(0.0, 1.0)],
        }),
        p: 2.0,
        family: None,
        ladder: LadderSpec::default(),
        sphere_count: crate::metrics::SphereOptions::default().count,
        seed: 0,
        analyses: vec![Analysis::Example],
        expect_bounded: false,
        norm: Default::default(),
        projection: Default::default(),
        slices: Default::default(),
        transform: Default::default(),
        kernel: Default::default(),
    }
}

pub fn reproduce_example() -> Report {
    run(&example_config()).expect("built-in configuration is valid")
}

fn traced<E: Clone>(ladder: &RefinementLadder, f: impl Fn(&crate::metrics::Level) -> Result<E>, value: impl Fn(&E) -> f64) -> Result<(ConstantTrace, Option<E>)> {
    match ladder.levels.iter().map(f).collect::<Result<Vec<_>>>() {
        Ok(estimates) => {
            let values = estimates.iter().map(&value).collect();
            Ok((ConstantTrace::from_values(&ladder.levels, values), estimates.last().cloned()))
        }
        Err(Error::NotLocallyIntegrable(m)) => Ok((ConstantTrace::not_integrable(m), None)),
        Err(e) => Err(e),
    }
}

fn run_analysis(a: Analysis, config: &RunConfig, prep: &Prepared) -> Result<BlockResult> {
    let w = &prep.weight;
    let p = &prep.p;
    let bad = |e: ConfigError| Error::param(&e.field, e.message);
    Ok(match a {
        Analysis::Ap => {
            let (trace, finest) = traced(
                &prep.ladder,
                |l| ap_condition_check(w, p, &l.family, &prep.sphere, &l.resolution),
                |e| e.c_hat,
            )?;
            BlockResult::Ap(ApBlock { trace, finest })
        }
        Analysis::Roudenko => {
            let (trace, finest) = traced(
                &prep.ladder,
                |l| roudenko_constant(w, p, &l.family, &l.resolution, config.norm),
                |e| e.c_hat,
            )?;
            BlockResult::Roudenko(RoudenkoBlock { trace, finest })
        }
        Analysis::Projection => {
            let r = config.direction(w).map_err(bad)?;
            let scalar = config.scalar_weight(w).map_err(bad)?;
            BlockResult::Projection(ProjectionBlock {
                direction: r.label.clone(),
                scalar: scalar.label.clone(),
                estimate: projection_bound(w, &scalar, p.p(), &r, &prep.grid_ladder)?,
            })
        }
        Analysis::Sufficient => BlockResult::Sufficient(sufficient_ap_check(w, p, &prep.grid_ladder, &prep.ladder)?),
        Analysis::Slices => {
            let samples = config.slice_samples(w).map_err(bad)?;
            let factor = config.slices.frozen_factor;
            let first = crate::metrics::slice_weight(w, factor, &samples[0])?;
            let ladder = RefinementLadder::for_weight(&first, &config.ladder.floors)?;
            BlockResult::Slices(uniform_slice_check(w, p, factor, &samples, &ladder, config.norm)?)
        }
        Analysis::Transform => {
            let t = &config.transform;
            let opts = NormOptions {
                trials: t.trials,
                iterations: t.iterations,
                seed: config.seed,
                ..NormOptions::default()
            };
            let op = t.operator.clone();
            let trace = norm_refinement(
                |grid: &PeriodicGrid| match &op {
                    OperatorSpec::Hilbert { axis } => hilbert_op(grid, axis - 1),
                    OperatorSpec::Riesz { j } => riesz_op(grid, j - 1),
                    OperatorSpec::PartialRiesz { factor, i } => partial_riesz_op(grid, *factor, i - 1),
                },
                w,
                p,
                &t.sizes,
                &opts,
            )?;
            BlockResult::Transform(TransformBlock {
                operator: match &t.operator {
                    OperatorSpec::Hilbert { axis } => format!("hilbert(axis {axis})"),
                    OperatorSpec::Riesz { j } => format!("riesz(j {j})"),
                    OperatorSpec::PartialRiesz { factor, i } => format!("partial_riesz({factor:?}, i {i})"),
                },
                trace,
            })
        }
        Analysis::Kernel => {
            let ks = &config.kernel;
            let kernel = Kernel::catalog(&ks.name)?;
            let conditions = kernel_condition_estimates(&kernel, &ks.sweep, ks.eta, ks.budget)?;
            let sweep = match &ks.truncation {
                Some(t) => {
                    let split = w.domain.kind.is_product().then(|| w.domain.kind.split());
                    let mut grid = PeriodicGrid::new(t.counts.to_vec())?;
                    grid.split = split;
                    let opts = NormOptions {
                        trials: t.trials,
                        iterations: t.iterations,
                        seed: config.seed,
                        ..NormOptions::default()
                    };
                    Some(uniform_boundedness_sweep(&kernel, w, p, &grid, &t.eps, &t.big_n, &opts)?)
                }
                None => None,
            };
            BlockResult::Kernel(KernelBlock {
                kernel: ks.name.clone(),
                conditions,
                sweep,
            })
        }
        Analysis::Example => BlockResult::Example(Box::new(example::example_report()?)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_config(analyses: Vec<Analysis>) -> RunConfig {
        RunConfig {
            weight: WeightSpec::Catalog {
                name: "identity".into(),
                params: serde_json::json!({"n": 2}),
            },
            analyses,
            ..example_config()
        }
    }

    #[test]
    fn identity_roudenko_trace() {
        let report = run(&identity_config(vec![Analysis::Roudenko])).unwrap();
        let trace = report.trace("roudenko").unwrap();
        assert_eq!(trace.len(), 3);
        assert!(trace.iter().all(|p| (p.value - 1.0).abs() < 1e-9));
        assert_eq!(report.exit_code(), exit::OK);
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut out = Vec::new();
        write_plot_data(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,value,resolution\n");
    }

    #[test]
    fn unknown_block() {
        let report = run(&identity_config(vec![Analysis::Roudenko])).unwrap();
        assert!(report.trace("ap").is_err());
        assert!(report.trace("roudenko/2").is_err());
    }

    #[test]
    fn divergence_under_expect_bounded() {
        let mut cfg = identity_config(vec![Analysis::Roudenko]);
        cfg.weight = WeightSpec::Catalog {
            name: "scalar_power".into(),
            params: serde_json::json!({"alpha": 1.5}),
        };
        cfg.expect_bounded = true;
        let report = run(&cfg).unwrap();
        assert!(!report.has_errors(), "{:?}", report.blocks[0].error);
        assert!(report.divergence_detected());
        assert_eq!(report.exit_code(), exit::DIVERGENCE);
    }

    #[test]
    fn config_errors_name_the_field() {
        let mut cfg = identity_config(vec![Analysis::Ap]);
        cfg.weight = WeightSpec::Catalog {
            name: "no_such_weight".into(),
            params: serde_json::Value::Null,
        };
        assert_eq!(run(&cfg).unwrap_err().field, "weight.name");
        let err = RunConfig::from_json(r#"{"weight": {"source": "catalog", "name": "identity"}, "p": 2, "analyses": ["ap"], "colour": 1}"#).unwrap_err();
        assert!(err.message.contains("colour"), "{err}");
    }
}
