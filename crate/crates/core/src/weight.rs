//! Matrix and scalar weights, and the built-in catalog.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{DomainDescriptor, DomainKind, Factor, Singularity};
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, Eigen, HermitianMatrix, C64, EIGEN_FLOOR};
use crate::tabulated::TabulatedWeight;

pub type MatrixFn = dyn Fn(&[f64]) -> CMatrix + Send + Sync;
pub type ScalarFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;

/// How a weight produces its value at a point.
#[derive(Clone)]
pub enum WeightRule {
    Identity,
    /// `diag(|t - c|^alpha_k)`.
    DiagPower { alpha: Vec<f64>, center: Vec<f64> },
    /// The 2x2 weight `[[sqrt x + 1/sqrt x, i/sqrt x], [-i/sqrt x, 1/sqrt x]]`.
    ExampleTwoByTwo,
    /// `U diag(|t - c|^alpha_k) U*` with `U` the real rotation by `angle`.
    RotatedPower {
        alpha: [f64; 2],
        angle: f64,
        center: Vec<f64>,
    },
    /// `diag(|x - cx|^alpha_k |y - cy|^beta_k)` on a product domain.
    ProductDiagPower {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        center_x: Vec<f64>,
        center_y: Vec<f64>,
    },
    Tabulated(Arc<TabulatedWeight>),
    /// Pointwise fractional power `W(t)^s`.
    Power { base: Arc<MatrixWeight>, s: f64 },
    /// `W` with one factor of a product domain frozen.
    Slice {
        base: Arc<MatrixWeight>,
        factor: Factor,
        frozen: Vec<f64>,
    },
    Scaled { base: Arc<MatrixWeight>, c: f64 },
    Custom(Arc<MatrixFn>),
}

impl fmt::Debug for WeightRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightRule::Identity => write!(f, "Identity"),
            WeightRule::DiagPower { alpha, center } => {
                write!(f, "DiagPower {{ alpha: {alpha:?}, center: {center:?} }}")
            }
            WeightRule::ExampleTwoByTwo => write!(f, "ExampleTwoByTwo"),
            WeightRule::RotatedPower {
                alpha,
                angle,
                center,
            } => write!(
                f,
                "RotatedPower {{ alpha: {alpha:?}, angle: {angle}, center: {center:?} }}"
            ),
            WeightRule::ProductDiagPower { alpha, beta, .. } => {
                write!(f, "ProductDiagPower {{ alpha: {alpha:?}, beta: {beta:?} }}")
            }
            WeightRule::Tabulated(t) => write!(f, "Tabulated({} samples)", t.len()),
            WeightRule::Power { base, s } => write!(f, "Power({:?}, {s})", base.rule),
            WeightRule::Slice { base, factor, frozen } => {
                write!(f, "Slice({:?}, {factor:?} = {frozen:?})", base.rule)
            }
            WeightRule::Scaled { base, c } => write!(f, "Scaled({:?}, {c})", base.rule),
            WeightRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Hermitian-matrix-valued weight on a domain.
///
/// Declared singularities are hyperplanes; evaluation on any of them is
/// rejected and quadrature grades toward them.
#[derive(Debug, Clone)]
pub struct MatrixWeight {
    pub n: usize,
    pub domain: DomainDescriptor,
    pub singular: Vec<Singularity>,
    pub rule: WeightRule,
    pub label: String,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn radial(domain: &DomainDescriptor, t: &[f64], center: &[f64]) -> f64 {
    domain
        .displacement(t, center)
        .iter()
        .map(|d| d * d)
        .sum::<f64>()
        .sqrt()
}

fn diag(values: impl Iterator<Item = f64>) -> CMatrix {
    let v: Vec<C64> = values.map(|x| c(x, 0.0)).collect();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
}

impl MatrixWeight {
    pub fn new(n: usize, domain: DomainDescriptor, rule: WeightRule, label: impl Into<String>) -> Self {
        Self {
            n,
            domain,
            singular: Vec::new(),
            rule,
            label: label.into(),
        }
    }

    pub fn with_singular(mut self, singular: Vec<Singularity>) -> Self {
        self.singular = singular;
        self
    }

    pub fn identity(n: usize, domain: DomainDescriptor) -> Self {
        Self::new(n, domain, WeightRule::Identity, format!("identity(N={n})"))
    }

    /// `diag(|t - center|^alpha_k)`; `center` defaults to the origin.
    pub fn diag_power(alpha: Vec<f64>, center: Option<Vec<f64>>, domain: DomainDescriptor) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::param("alpha", "needs at least one exponent"));
        }
        check_exponents("alpha", &alpha)?;
        let center = center.unwrap_or_else(|| vec![0.0; domain.dim()]);
        check_center(&center, &domain)?;
        let singular = if alpha.iter().any(|&a| a != 0.0) {
            Singularity::at_point(&domain.reduce(&center))
        } else {
            Vec::new()
        };
        let label = format!("diag_power(alpha={alpha:?})");
        Ok(Self::new(alpha.len(), domain, WeightRule::DiagPower { alpha, center }, label)
            .with_singular(singular))
    }

    pub fn scalar_power(alpha: f64, center: Option<Vec<f64>>, domain: DomainDescriptor) -> Result<Self> {
        let mut w = Self::diag_power(vec![alpha], center, domain)?;
        w.label = format!("scalar_power(alpha={alpha})");
        Ok(w)
    }

    pub fn paper_example(domain: DomainDescriptor) -> Result<Self> {
        if domain.kind != (DomainKind::Euclidean { d: 1 }) || domain.window[0].lo < 0.0 {
            return Err(Error::InvalidDomain(
                "paper_example lives on a one-dimensional window inside [0, inf)".into(),
            ));
        }
        Ok(Self::new(2, domain, WeightRule::ExampleTwoByTwo, "paper_example")
            .with_singular(vec![Singularity::new(0, 0.0)]))
    }

    /// The example on its native window `(0, 1]`.
    pub fn paper_example_unit() -> Self {
        Self::paper_example(DomainDescriptor::unit_interval()).expect("unit interval")
    }

    pub fn rotated_power(
        alpha: [f64; 2],
        angle: f64,
        center: Option<Vec<f64>>,
        domain: DomainDescriptor,
    ) -> Result<Self> {
        check_exponents("alpha", &alpha)?;
        if !angle.is_finite() {
            return Err(Error::param("angle", "must be finite"));
        }
        let center = center.unwrap_or_else(|| vec![0.0; domain.dim()]);
        check_center(&center, &domain)?;
        let singular = Singularity::at_point(&domain.reduce(&center));
        let label = format!("rotated_power(alpha={alpha:?}, angle={angle})");
        Ok(Self::new(
            2,
            domain,
            WeightRule::RotatedPower {
                alpha,
                angle,
                center,
            },
            label,
        )
        .with_singular(singular))
    }

    pub fn product_diag_power(
        alpha: Vec<f64>,
        beta: Vec<f64>,
        centers: Option<(Vec<f64>, Vec<f64>)>,
        domain: DomainDescriptor,
    ) -> Result<Self> {
        if !domain.kind.is_product() {
            return Err(Error::InvalidDomain("product_diag_power needs a product domain".into()));
        }
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::param("beta", "alpha and beta need the same nonzero length"));
        }
        check_exponents("alpha", &alpha)?;
        check_exponents("beta", &beta)?;
        let m = domain.kind.split();
        let (center_x, center_y) =
            centers.unwrap_or_else(|| (vec![0.0; m], vec![0.0; domain.dim() - m]));
        let mut joined = center_x.clone();
        joined.extend(&center_y);
        check_center(&joined, &domain)?;
        let singular = Singularity::at_point(&domain.reduce(&joined));
        let label = format!("product_diag_power(alpha={alpha:?}, beta={beta:?})");
        Ok(Self::new(
            alpha.len(),
            domain,
            WeightRule::ProductDiagPower {
                alpha,
                beta,
                center_x,
                center_y,
            },
            label,
        )
        .with_singular(singular))
    }

    pub fn tabulated(table: TabulatedWeight) -> Self {
        let n = table.n;
        let domain = table.domain.clone();
        let singular = table.singular.clone();
        Self::new(n, domain, WeightRule::Tabulated(Arc::new(table)), "tabulated").with_singular(singular)
    }

    /// Weight defined by a closure returning (approximately) Hermitian matrices.
    pub fn custom(
        n: usize,
        domain: DomainDescriptor,
        f: impl Fn(&[f64]) -> CMatrix + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self::new(n, domain, WeightRule::Custom(Arc::new(f)), label)
    }

    /// Constant weight `W(t) = m`.
    pub fn constant(m: HermitianMatrix, domain: DomainDescriptor) -> Self {
        let n = m.dim();
        let mat = m.into_matrix();
        Self::custom(n, domain, move |_| mat.clone(), "constant")
    }

    /// The weight `t -> W(t)^s`.
    pub fn power(&self, s: f64) -> Self {
        Self {
            n: self.n,
            domain: self.domain.clone(),
            singular: self.singular.clone(),
            rule: WeightRule::Power {
                base: Arc::new(self.clone()),
                s,
            },
            label: format!("({})^({s})", self.label),
        }
    }

    /// The weight `t -> c W(t)`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", "scaling must be positive"));
        }
        Ok(Self {
            n: self.n,
            domain: self.domain.clone(),
            singular: self.singular.clone(),
            rule: WeightRule::Scaled {
                base: Arc::new(self.clone()),
                c,
            },
            label: format!("{c} * {}", self.label),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Unchecked value at `t` (already reduced on torus domains).
    pub fn raw(&self, t: &[f64]) -> Result<CMatrix> {
        Ok(match &self.rule {
            WeightRule::Identity => CMatrix::identity(self.n, self.n),
            WeightRule::DiagPower { alpha, center } => {
                let r = radial(&self.domain, t, center);
                diag(alpha.iter().map(|&a| r.powf(a)))
            }
            WeightRule::ExampleTwoByTwo => {
                let x = t[0];
                let s = x.sqrt();
                CMatrix::from_row_slice(
                    2,
                    2,
                    &[c(s + 1.0 / s, 0.0), c(0.0, 1.0 / s), c(0.0, -1.0 / s), c(1.0 / s, 0.0)],
                )
            }
            WeightRule::RotatedPower {
                alpha,
                angle,
                center,
            } => {
                let r = radial(&self.domain, t, center);
                let (l1, l2) = (r.powf(alpha[0]), r.powf(alpha[1]));
                let (cs, sn) = (angle.cos(), angle.sin());
                let a = cs * cs * l1 + sn * sn * l2;
                let d = sn * sn * l1 + cs * cs * l2;
                let b = cs * sn * (l1 - l2);
                CMatrix::from_row_slice(2, 2, &[c(a, 0.0), c(b, 0.0), c(b, 0.0), c(d, 0.0)])
            }
            WeightRule::ProductDiagPower {
                alpha,
                beta,
                center_x,
                center_y,
            } => {
                let m = center_x.len();
                let fx = self.domain.factor_domain(Factor::X)?;
                let fy = self.domain.factor_domain(Factor::Y)?;
                let rx = radial(&fx, &t[..m], center_x);
                let ry = radial(&fy, &t[m..], center_y);
                diag(alpha.iter().zip(beta).map(|(&a, &b)| rx.powf(a) * ry.powf(b)))
            }
            WeightRule::Tabulated(table) => table.lookup(t)?.matrix().clone(),
            WeightRule::Power { base, s } => base.evaluate(t)?.power(*s)?.into_matrix(),
            WeightRule::Slice {
                base,
                factor,
                frozen,
            } => base.raw(&join(*factor, t, frozen))?,
            WeightRule::Scaled { base, c } => base.raw(t)?.scale(*c),
            WeightRule::Custom(f) => f(t),
        })
    }

    fn locate(&self, t: &[f64]) -> Result<Vec<f64>> {
        if t.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point of dimension {} for a {}-dimensional domain",
                t.len(),
                self.domain.dim()
            )));
        }
        let t = self.domain.reduce(t);
        if !self.domain.contains(&t) {
            return Err(Error::OutsideWindow { point: t });
        }
        let on_singular = self.singular.iter().any(|s| {
            let d = t[s.axis] - s.at;
            let d = if self.domain.is_torus() { d - d.round() } else { d };
            d == 0.0
        });
        if on_singular {
            return Err(Error::SingularPoint { point: t });
        }
        Ok(t)
    }

    /// Checked value: Hermitian and positive definite above the eigenvalue floor.
    ///
    /// Powers of a weight inherit the check of their base: their eigenvalues
    /// are exact powers of the base's, however wide the spread.
    pub fn evaluate(&self, t: &[f64]) -> Result<HermitianMatrix> {
        if let WeightRule::Power { base, s } = &self.rule {
            self.locate(t)?;
            return Ok(base.spectral(t)?.apply(|l| l.powf(*s)));
        }
        let t = self.locate(t)?;
        let m = self.raw(&t)?;
        let h = HermitianMatrix::new(m)?;
        let ev = h.eigenvalues();
        let (min, max) = (ev[0], ev[ev.len() - 1]);
        if !(min > EIGEN_FLOOR * max) || !max.is_finite() {
            return Err(Error::DegenerateSample {
                point: t,
                ratio: min / max,
            });
        }
        Ok(h)
    }

    /// Checked eigendecomposition at `t`.
    pub fn spectral(&self, t: &[f64]) -> Result<Eigen> {
        if let WeightRule::Power { base, s } = &self.rule {
            self.locate(t)?;
            let e = base.spectral(t)?;
            let mut order: Vec<usize> = (0..e.values.len()).collect();
            if *s < 0.0 {
                order.reverse();
            }
            let values = order.iter().map(|&k| e.values[k].powf(*s)).collect();
            let vectors = CMatrix::from_columns(&order.iter().map(|&k| e.vector(k)).collect::<Vec<_>>());
            return Ok(Eigen { values, vectors });
        }
        let h = self.evaluate(t)?;
        Ok(h.eigen())
    }

    /// `W(t)^s` through the eigendecomposition; [`spectral`](Self::spectral)
    /// has already enforced the eigenvalue floor.
    pub fn fractional_power(&self, s: f64, t: &[f64]) -> Result<HermitianMatrix> {
        Ok(self.spectral(t)?.apply(|l| l.powf(s)))
    }

    /// The `(i, j)` entry of `W(t)^s`.
    pub fn entry_of_power(&self, s: f64, i: usize, j: usize, t: &[f64]) -> Result<C64> {
        for idx in [i, j] {
            if idx >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: idx,
                    dim: self.n,
                });
            }
        }
        Ok(self.fractional_power(s, t)?.entry(i, j))
    }

    /// Freezes one factor of a product-domain weight.
    pub fn slice(&self, factor: Factor, frozen: &[f64]) -> Result<Self> {
        let free = match factor {
            Factor::X => Factor::Y,
            Factor::Y => Factor::X,
        };
        let frozen_axes = self.domain.factor_axes(factor)?;
        if frozen.len() != frozen_axes.len() {
            return Err(Error::DimensionMismatch("frozen point has the wrong dimension".into()));
        }
        let frozen: Vec<f64> = if self.domain.is_torus() {
            frozen.iter().map(|x| x.rem_euclid(1.0)).collect()
        } else {
            frozen.to_vec()
        };
        for (k, &v) in frozen.iter().enumerate() {
            let iv = self.domain.window[frozen_axes.start + k];
            if !self.domain.is_torus() && (v < iv.lo || v > iv.hi) {
                return Err(Error::OutsideWindow { point: frozen.clone() });
            }
        }
        let domain = self.domain.factor_domain(free)?;
        let free_axes = self.domain.factor_axes(free)?;
        let singular = self
            .singular
            .iter()
            .filter(|s| free_axes.contains(&s.axis))
            .map(|s| Singularity::new(s.axis - free_axes.start, s.at))
            .collect();
        Ok(Self {
            n: self.n,
            domain,
            singular,
            rule: WeightRule::Slice {
                base: Arc::new(self.clone()),
                factor,
                frozen: frozen.clone(),
            },
            label: format!("{} | {factor:?} = {frozen:?}", self.label),
        })
    }
}

/// Inserts the frozen coordinates of `factor` around the free point `t`.
fn join(factor: Factor, t: &[f64], frozen: &[f64]) -> Vec<f64> {
    match factor {
        Factor::X => frozen.iter().chain(t).copied().collect(),
        Factor::Y => t.iter().chain(frozen).copied().collect(),
    }
}

fn check_exponents(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|a| !a.is_finite() || a.abs() > 50.0) {
        return Err(Error::param(name, "exponents must be finite with |value| <= 50"));
    }
    Ok(())
}

fn check_center(center: &[f64], domain: &DomainDescriptor) -> Result<()> {
    if center.len() != domain.dim() {
        return Err(Error::param("center", "dimension differs from the domain"));
    }
    if !domain.contains(&domain.reduce(center)) {
        return Err(Error::param("center", "must lie in the window"));
    }
    Ok(())
}

/// Catalog entry description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: &'static str,
    pub description: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "identity",
        params: "n: integer >= 1 (default 1)",
        description: "W(t) = I_N",
    },
    CatalogEntry {
        name: "diag_power",
        params: "alpha: [float], center: [float] (default origin)",
        description: "W(t) = diag(|t - center|^alpha_k)",
    },
    CatalogEntry {
        name: "paper_example",
        params: "none",
        description: "2x2 weight [[sqrt x + 1/sqrt x, i/sqrt x], [-i/sqrt x, 1/sqrt x]] on (0, 1], det = 1",
    },
    CatalogEntry {
        name: "rotated_power",
        params: "alpha: [float, float], angle: float, center: [float] (default origin)",
        description: "U diag(|t - center|^alpha_k) U* with U the rotation by angle",
    },
    CatalogEntry {
        name: "product_diag_power",
        params: "alpha: [float], beta: [float], center_x, center_y (default origin)",
        description: "diag(|x|^alpha_k |y|^beta_k) on a product domain",
    },
    CatalogEntry {
        name: "scalar_power",
        params: "alpha: float, center: [float] (default origin)",
        description: "1x1 weight |t - center|^alpha",
    },
];

fn known_keys(params: &Value, allowed: &[&str]) -> Result<()> {
    match params {
        Value::Null => Ok(()),
        Value::Object(map) => {
            for key in map.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(Error::param(key, "unknown parameter"));
                }
            }
            Ok(())
        }
        _ => Err(Error::param("params", "must be an object")),
    }
}

fn get<T: for<'de> Deserialize<'de>>(params: &Value, key: &str) -> Result<Option<T>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::param(key, e.to_string())),
    }
}

fn require<T: for<'de> Deserialize<'de>>(params: &Value, key: &str) -> Result<T> {
    get(params, key)?.ok_or_else(|| Error::param(key, "required"))
}

/// Builds a catalog weight by name.
pub fn catalog_weight(name: &str, params: &Value, domain: DomainDescriptor) -> Result<MatrixWeight> {
    match name {
        "identity" => {
            known_keys(params, &["n"])?;
            let n: usize = get(params, "n")?.unwrap_or(1);
            if n == 0 {
                return Err(Error::param("n", "must be >= 1"));
            }
            Ok(MatrixWeight::identity(n, domain))
        }
        "diag_power" => {
            known_keys(params, &["alpha", "center"])?;
            MatrixWeight::diag_power(require(params, "alpha")?, get(params, "center")?, domain)
        }
        "paper_example" => {
            known_keys(params, &[])?;
            MatrixWeight::paper_example(domain)
        }
        "rotated_power" => {
            known_keys(params, &["alpha", "angle", "center"])?;
            MatrixWeight::rotated_power(
                require(params, "alpha")?,
                require(params, "angle")?,
                get(params, "center")?,
                domain,
            )
        }
        "product_diag_power" => {
            known_keys(params, &["alpha", "beta", "center_x", "center_y"])?;
            let cx: Option<Vec<f64>> = get(params, "center_x")?;
            let cy: Option<Vec<f64>> = get(params, "center_y")?;
            let centers = match (cx, cy) {
                (None, None) => None,
                (Some(x), Some(y)) => Some((x, y)),
                _ => return Err(Error::param("center_x", "give both centres or neither")),
            };
            MatrixWeight::product_diag_power(
                require(params, "alpha")?,
                require(params, "beta")?,
                centers,
                domain,
            )
        }
        "scalar_power" => {
            known_keys(params, &["alpha", "center"])?;
            MatrixWeight::scalar_power(require(params, "alpha")?, get(params, "center")?, domain)
        }
        other => Err(Error::UnknownCatalog(other.to_string())),
    }
}

#[derive(Clone)]
pub enum ScalarRule {
    Constant(f64),
    /// `|t - c|^alpha`.
    Power { alpha: f64, center: Vec<f64> },
    Func(Arc<ScalarFn>),
}

impl fmt::Debug for ScalarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarRule::Constant(v) => write!(f, "Constant({v})"),
            ScalarRule::Power { alpha, center } => {
                write!(f, "Power {{ alpha: {alpha}, center: {center:?} }}")
            }
            ScalarRule::Func(_) => write!(f, "Func"),
        }
    }
}

/// Positive scalar weight.
#[derive(Debug, Clone)]
pub struct ScalarWeight {
    pub domain: DomainDescriptor,
    pub singular: Vec<Singularity>,
    pub rule: ScalarRule,
    pub label: String,
}

impl ScalarWeight {
    pub fn constant(value: f64, domain: DomainDescriptor) -> Self {
        Self {
            domain,
            singular: Vec::new(),
            rule: ScalarRule::Constant(value),
            label: format!("{value}"),
        }
    }

    pub fn power(alpha: f64, center: Option<Vec<f64>>, domain: DomainDescriptor) -> Result<Self> {
        check_exponents("alpha", &[alpha])?;
        let center = center.unwrap_or_else(|| vec![0.0; domain.dim()]);
        check_center(&center, &domain)?;
        let singular = if alpha != 0.0 {
            Singularity::at_point(&domain.reduce(&center))
        } else {
            Vec::new()
        };
        Ok(Self {
            domain,
            singular,
            rule: ScalarRule::Power { alpha, center },
            label: format!("|t|^{alpha}"),
        })
    }

    pub fn func(
        domain: DomainDescriptor,
        singular: Vec<Singularity>,
        f: impl Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
        label: impl Into<String>,
    ) -> Self {
        Self {
            domain,
            singular,
            rule: ScalarRule::Func(Arc::new(f)),
            label: label.into(),
        }
    }

    /// `t -> W(t)_kk`.
    pub fn diagonal_entry(w: &MatrixWeight, k: usize) -> Result<Self> {
        Self::entry_of_power(w, 1.0, k)
    }

    /// `t -> (W(t)^s)_kk`.
    pub fn entry_of_power(w: &MatrixWeight, s: f64, k: usize) -> Result<Self> {
        if k >= w.n {
            return Err(Error::IndexOutOfRange { index: k, dim: w.n });
        }
        let base = w.clone();
        Ok(Self::func(
            w.domain.clone(),
            w.singular.clone(),
            move |t| Ok(base.entry_of_power(s, k, k, t)?.re),
            format!("({})^({s})[{k},{k}]", w.label),
        ))
    }

    /// `t -> ((W(t)^(2/p))_kk)^(p/2)`, a pointwise scalar power of the entry.
    pub fn power_target(w: &MatrixWeight, k: usize, p: f64) -> Result<Self> {
        Ok(Self::entry_of_power(w, 2.0 / p, k)?.pow(p / 2.0))
    }

    /// `t -> lambda_i(W(t))`, eigenvalues ascending.
    pub fn eigenvalue(w: &MatrixWeight, i: usize) -> Result<Self> {
        if i >= w.n {
            return Err(Error::IndexOutOfRange { index: i, dim: w.n });
        }
        let base = w.clone();
        Ok(Self::func(
            w.domain.clone(),
            w.singular.clone(),
            move |t| Ok(base.spectral(t)?.values[i]),
            format!("lambda_{i}({})", w.label),
        ))
    }

    /// `t -> w(t)^s`.
    pub fn pow(&self, s: f64) -> Self {
        let base = self.clone();
        Self::func(
            self.domain.clone(),
            self.singular.clone(),
            move |t| Ok(base.evaluate(t)?.powf(s)),
            format!("({})^({s})", self.label),
        )
    }

    pub fn raw(&self, t: &[f64]) -> Result<f64> {
        match &self.rule {
            ScalarRule::Constant(v) => Ok(*v),
            ScalarRule::Power { alpha, center } => Ok(radial(&self.domain, t, center).powf(*alpha)),
            ScalarRule::Func(f) => f(t),
        }
    }

    /// Checked value: finite and positive.
    pub fn evaluate(&self, t: &[f64]) -> Result<f64> {
        let v = self.raw(&self.domain.reduce(t))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::DegenerateSample {
                point: t.to_vec(),
                ratio: v,
            });
        }
        Ok(v)
    }

    /// The weight as a 1x1 matrix weight.
    pub fn as_matrix_weight(&self) -> MatrixWeight {
        let w = self.clone();
        MatrixWeight::custom(
            1,
            self.domain.clone(),
            move |t| CMatrix::from_element(1, 1, c(w.raw(t).unwrap_or(f64::NAN), 0.0)),
            self.label.clone(),
        )
        .with_singular(self.singular.clone())
    }
}

/// Result of checking positive definiteness over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_eigenvalue: f64,
    pub min_ratio: f64,
    pub samples: usize,
    pub failures: Vec<Vec<f64>>,
}

/// Lists every grid point where the weight is not positive definite above
/// the eigenvalue floor.
pub fn verify_positive_definite(w: &MatrixWeight, grid: &crate::quadrature::SampleGrid) -> PositivityReport {
    let mut report = PositivityReport {
        min_eigenvalue: f64::INFINITY,
        min_ratio: f64::INFINITY,
        samples: grid.len(),
        failures: Vec::new(),
    };
    for (t, _) in grid.iter() {
        let ev = w
            .raw(&w.domain.reduce(t))
            .ok()
            .filter(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .map(|m| HermitianMatrix::trusted(m).eigenvalues());
        match ev {
            Some(ev) => {
                let (min, max) = (ev[0], ev[ev.len() - 1]);
                report.min_eigenvalue = report.min_eigenvalue.min(min);
                report.min_ratio = report.min_ratio.min(min / max);
                if !(min > EIGEN_FLOOR * max) {
                    report.failures.push(t.to_vec());
                }
            }
            None => report.failures.push(t.to_vec()),
        }
    }
    report
}
