//! Run configuration: the single structured-text input of a batch run.

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{DomainDescriptor, Factor, LebesgueExponent, SetFamily, Singularity};
use crate::error::Error;
use crate::metrics::{MatrixNorm, RefinementLadder, SphereOptions, DEFAULT_FLOORS};
use crate::projection::DirectionField;
use crate::quadrature::GridLadder;
use crate::tabulated::TabulatedWeight;
use crate::transform::{Kernel, SweepSpec};
use crate::weight::{catalog_weight, MatrixWeight, ScalarWeight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Ap,
    Roudenko,
    Projection,
    Sufficient,
    Slices,
    Transform,
    Kernel,
    Example,
}

impl Analysis {
    pub const ALL: [Analysis; 8] = [
        Analysis::Ap,
        Analysis::Roudenko,
        Analysis::Projection,
        Analysis::Sufficient,
        Analysis::Slices,
        Analysis::Transform,
        Analysis::Kernel,
        Analysis::Example,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Analysis::Ap => "ap",
            Analysis::Roudenko => "roudenko",
            Analysis::Projection => "projection",
            Analysis::Sufficient => "sufficient",
            Analysis::Slices => "slices",
            Analysis::Transform => "transform",
            Analysis::Kernel => "kernel",
            Analysis::Example => "example",
        }
    }

    pub fn parse(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.id() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Catalog {
        name: String,
        #[serde(default, skip_serializing_if = "Value::is_null")]
        params: Value,
    },
    /// A file in the tabulated text format; it carries its own domain.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    /// Innermost quadrature cells relative to the set (or window) length,
    /// one per refinement level.
    #[serde(default = "default_floors")]
    pub floors: Vec<f64>,
    /// Coarse cells per axis of the ess-sup grids.
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_floors() -> Vec<f64> {
    DEFAULT_FLOORS.to_vec()
}

fn default_cells() -> usize {
    16
}

impl Default for LadderSpec {
    fn default() -> Self {
        Self {
            floors: default_floors(),
            cells: default_cells(),
        }
    }
}

/// Direction of a projection, indices one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectionSpec {
    Coordinate { k: usize },
    /// Constant vector given as `[re, im]` pairs; normalised on use.
    Constant { v: Vec<[f64; 2]> },
    /// Eigenvector of `W(t)` for the `index`-th smallest eigenvalue.
    Eigenvector { index: usize },
}

impl Default for DirectionSpec {
    fn default() -> Self {
        DirectionSpec::Coordinate { k: 1 }
    }
}

/// Scalar target weight of a projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarSpec {
    Constant {
        value: f64,
    },
    Power {
        alpha: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// `w = W_kk`, one-based.
    DiagonalEntry { k: usize },
}

impl Default for ScalarSpec {
    fn default() -> Self {
        ScalarSpec::Constant { value: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionSpec {
    #[serde(default)]
    pub direction: DirectionSpec,
    #[serde(default)]
    pub scalar: ScalarSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlicesSpec {
    #[serde(default = "default_frozen")]
    pub frozen_factor: Factor,
    /// Evenly spaced cell centres of the frozen factor's window.
    #[serde(default = "default_slice_count")]
    pub count: usize,
    /// Explicit frozen points; overrides `count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

fn default_frozen() -> Factor {
    Factor::Y
}

fn default_slice_count() -> usize {
    10
}

impl Default for SlicesSpec {
    fn default() -> Self {
        Self {
            frozen_factor: default_frozen(),
            count: default_slice_count(),
            samples: None,
        }
    }
}

/// Multiplier probed on weighted spaces, indices one-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Hilbert { axis: usize },
    Riesz { j: usize },
    PartialRiesz { factor: Factor, i: usize },
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec::Hilbert { axis: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    #[serde(default)]
    pub operator: OperatorSpec,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

fn default_sizes() -> Vec<usize> {
    vec![64, 128, 256]
}

fn default_trials() -> usize {
    4
}

fn default_iterations() -> usize {
    1000
}

impl Default for TransformSpec {
    fn default() -> Self {
        Self {
            operator: OperatorSpec::default(),
            sizes: default_sizes(),
            trials: default_trials(),
            iterations: default_iterations(),
        }
    }
}

/// `(eps, N)` ladders for the truncated-operator sweep on a product torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    pub counts: [usize; 2],
    pub eps: Vec<[f64; 2]>,
    pub big_n: Vec<[f64; 2]>,
    #[serde(default = "default_sweep_trials")]
    pub trials: usize,
    #[serde(default = "default_sweep_iterations")]
    pub iterations: usize,
}

fn default_sweep_trials() -> usize {
    2
}

fn default_sweep_iterations() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default = "default_kernel")]
    pub name: String,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSpec>,
}

fn default_kernel() -> String {
    "product_hilbert".into()
}

fn default_eta() -> f64 {
    1.0
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            name: default_kernel(),
            eta: default_eta(),
            sweep: SweepSpec::default(),
            budget: None,
            truncation: None,
        }
    }
}

fn default_sphere_count() -> usize {
    SphereOptions::default().count
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub weight: WeightSpec,
    /// Required for catalog weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainDescriptor>,
    pub p: f64,
    /// Fixed family at every level; the standard ladder of the window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SetFamily>,
    #[serde(default)]
    pub ladder: LadderSpec,
    #[serde(default = "default_sphere_count")]
    pub sphere_count: usize,
    #[serde(default)]
    pub seed: u64,
    pub analyses: Vec<Analysis>,
    /// A divergent verdict in this run is a failure (exit code 1).
    #[serde(default)]
    pub expect_bounded: bool,
    #[serde(default)]
    pub norm: MatrixNorm,
    #[serde(default)]
    pub projection: ProjectionSpec,
    #[serde(default)]
    pub slices: SlicesSpec,
    #[serde(default)]
    pub transform: TransformSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
}

/// A configuration problem, with the dotted path of the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn at(field: &str) -> impl Fn(Error) -> ConfigError + '_ {
    move |e| ConfigError::new(field, e.to_string())
}

/// Everything a run needs, built and checked from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub weight: MatrixWeight,
    pub p: LebesgueExponent,
    pub ladder: RefinementLadder,
    pub grid_ladder: GridLadder,
    pub sphere: SphereOptions,
}

impl RunConfig {
    /// Parses JSON, rejecting unknown keys and naming the path of the first
    /// problem.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_weight(&self) -> Result<MatrixWeight, ConfigError> {
        match &self.weight {
            WeightSpec::Catalog { name, params } => {
                let domain = self
                    .domain
                    .clone()
                    .ok_or_else(|| ConfigError::new("domain", "required for catalog weights"))?;
                let domain = DomainDescriptor::new(domain.kind, domain.window).map_err(at("domain"))?;
                catalog_weight(name, params, domain).map_err(|e| match e {
                    Error::UnknownCatalog(_) => ConfigError::new("weight.name", e.to_string()),
                    Error::InvalidParameter { ref name, .. } => ConfigError::new(format!("weight.params.{name}"), e.to_string()),
                    Error::InvalidDomain(_) => ConfigError::new("domain", e.to_string()),
                    other => ConfigError::new("weight", other.to_string()),
                })
            }
            WeightSpec::Tabulated { path } => {
                if self.domain.is_some() {
                    return Err(ConfigError::new("domain", "tabulated weights carry their own domain"));
                }
                let table = TabulatedWeight::read(path).map_err(at("weight.path"))?;
                Ok(MatrixWeight::tabulated(table))
            }
        }
    }

    /// Validates every field that can be checked without running an analysis.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        let p = LebesgueExponent::new(self.p).map_err(at("p"))?;
        let weight = self.build_weight()?;
        if self.analyses.is_empty() {
            return Err(ConfigError::new("analyses", "at least one analysis is required"));
        }
        let mut seen = HashSet::new();
        for a in &self.analyses {
            if !seen.insert(*a) {
                return Err(ConfigError::new("analyses", format!("`{}` is listed twice", a.id())));
            }
        }
        let floors = &self.ladder.floors;
        if floors.is_empty() || floors.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(ConfigError::new("ladder.floors", "need at least one floor in (0, 1)"));
        }
        if self.ladder.cells == 0 {
            return Err(ConfigError::new("ladder.cells", "must be >= 1"));
        }
        if self.sphere_count == 0 {
            return Err(ConfigError::new("sphere_count", "must be >= 1"));
        }
        let ladder = match &self.family {
            Some(f) => {
                let sets = f.enumerate(&weight.domain).map_err(at("family"))?;
                if sets.is_empty() {
                    return Err(ConfigError::new("family", "family has no sets"));
                }
                RefinementLadder::fixed_family(f.clone(), floors)
            }
            None => RefinementLadder::for_weight(&weight, floors).map_err(at("ladder"))?,
        };
        let mut singular: Vec<Singularity> = weight.singular.clone();
        if self.analyses.contains(&Analysis::Projection) {
            let scalar = self.scalar_weight(&weight)?;
            self.direction(&weight)?;
            for s in scalar.singular {
                if !singular.contains(&s) {
                    singular.push(s);
                }
            }
        }
        let grid_ladder = GridLadder::graded_floors(weight.domain.dim(), self.ladder.cells, singular, floors);
        if self.analyses.contains(&Analysis::Slices) {
            self.slice_samples(&weight)?;
        }
        if self.analyses.contains(&Analysis::Transform) {
            self.check_transform(&weight)?;
        }
        if self.analyses.contains(&Analysis::Kernel) {
            Kernel::catalog(&self.kernel.name).map_err(at("kernel.name"))?;
            if !(self.kernel.eta > 0.0) {
                return Err(ConfigError::new("kernel.eta", "must be positive"));
            }
            if let Some(t) = &self.kernel.truncation {
                if t.counts.iter().any(|&c| c < 2) {
                    return Err(ConfigError::new("kernel.truncation.counts", "need at least 2 points per axis"));
                }
                if weight.domain.dim() != 2 {
                    return Err(ConfigError::new("kernel.truncation", "the sweep needs a weight on a two-dimensional domain"));
                }
            }
        }
        Ok(Prepared {
            weight,
            p,
            ladder,
            grid_ladder,
            sphere: SphereOptions {
                count: self.sphere_count,
                seed: self.seed,
                ..SphereOptions::default()
            },
        })
    }

    pub fn scalar_weight(&self, w: &MatrixWeight) -> Result<ScalarWeight, ConfigError> {
        let field = "projection.scalar";
        match &self.projection.scalar {
            ScalarSpec::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(ConfigError::new(field, "constant must be positive"));
                }
                Ok(ScalarWeight::constant(*value, w.domain.clone()))
            }
            ScalarSpec::Power { alpha, center } => ScalarWeight::power(*alpha, center.clone(), w.domain.clone()).map_err(at(field)),
            ScalarSpec::DiagonalEntry { k } => ScalarWeight::diagonal_entry(w, one_based(*k, w.n, field)?).map_err(at(field)),
        }
    }

    pub fn direction(&self, w: &MatrixWeight) -> Result<DirectionField, ConfigError> {
        let field = "projection.direction";
        match &self.projection.direction {
            DirectionSpec::Coordinate { k } => DirectionField::coordinate(w.n, one_based(*k, w.n, field)?).map_err(at(field)),
            DirectionSpec::Constant { v } => {
                if v.len() != w.n {
                    return Err(ConfigError::new(field, format!("vector has {} entries for an N = {} weight", v.len(), w.n)));
                }
                let v = crate::hermitian::CVector::from_iterator(v.len(), v.iter().map(|c| crate::hermitian::C64::new(c[0], c[1])));
                DirectionField::constant(v).map_err(at(field))
            }
            DirectionSpec::Eigenvector { index } => DirectionField::eigenvector(w, one_based(*index, w.n, field)?).map_err(at(field)),
        }
    }

    /// Frozen points of the slice check.
    pub fn slice_samples(&self, w: &MatrixWeight) -> Result<Vec<Vec<f64>>, ConfigError> {
        let field = "slices";
        if !w.domain.kind.is_product() {
            return Err(ConfigError::new(field, "slices need a weight on a product domain"));
        }
        let axes = w.domain.factor_axes(self.slices.frozen_factor).map_err(at(field))?;
        if let Some(samples) = &self.slices.samples {
            if samples.is_empty() || samples.iter().any(|s| s.len() != axes.len()) {
                return Err(ConfigError::new("slices.samples", format!("need points with {} coordinates", axes.len())));
            }
            return Ok(samples.clone());
        }
        if self.slices.count == 0 {
            return Err(ConfigError::new("slices.count", "must be >= 1"));
        }
        let n = self.slices.count;
        Ok((0..n)
            .map(|k| {
                axes.clone()
                    .map(|a| {
                        let iv = w.domain.window[a];
                        iv.lo + iv.len() * (k as f64 + 0.5) / n as f64
                    })
                    .collect()
            })
            .collect())
    }

    fn check_transform(&self, w: &MatrixWeight) -> Result<(), ConfigError> {
        let t = &self.transform;
        if t.sizes.is_empty() || t.sizes.iter().any(|&n| n < 2) {
            return Err(ConfigError::new("transform.sizes", "need grid sizes >= 2"));
        }
        if t.trials == 0 || t.iterations == 0 {
            return Err(ConfigError::new("transform", "trials and iterations must be >= 1"));
        }
        let d = w.domain.dim();
        let field = "transform.operator";
        match &t.operator {
            OperatorSpec::Hilbert { axis } => {
                one_based(*axis, d, field)?;
            }
            OperatorSpec::Riesz { j } => {
                one_based(*j, d, field)?;
            }
            OperatorSpec::PartialRiesz { factor, i } => {
                let axes = w.domain.factor_axes(*factor).map_err(at(field))?;
                one_based(*i, axes.len(), field)?;
            }
        }
        Ok(())
    }
}

fn one_based(k: usize, n: usize, field: &str) -> Result<usize, ConfigError> {
    if k == 0 || k > n {
        return Err(ConfigError::new(field, format!("index {k} outside 1..={n}")));
    }
    Ok(k - 1)
}
