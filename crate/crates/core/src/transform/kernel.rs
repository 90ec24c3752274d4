//! Product kernels `K(x, y)` on `R x R`, their truncations `K_eps^N`, and
//! lattice estimates of the size and regularity constants (C.1)-(C.5).
//!
//! Differences are `D1_h K = K(x + h, y) - K(x, y)`,
//! `D2_k K = K(x, y + k) - K(x, y)` and `D12_{h,k} = D1_h D2_k`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{fft_nd, DiscreteGridFunction, FourierMultiplierOp, PeriodicGrid};
use crate::error::{Error, Result};
use crate::hermitian::C64;
use crate::quadrature::legendre;

pub type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum KernelRule {
    /// `1 / (x y)`.
    ProductHilbert,
    /// `1 / x` on a one-axis grid; `y` is ignored.
    SingleHilbert,
    Custom(Arc<KernelFn>),
}

impl fmt::Debug for KernelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelRule::ProductHilbert => write!(f, "ProductHilbert"),
            KernelRule::SingleHilbert => write!(f, "SingleHilbert"),
            KernelRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Real kernel with `n = m = 1`, singular on the cross `{x = 0} u {y = 0}`.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub rule: KernelRule,
    pub label: String,
}

/// Names accepted by [`Kernel::catalog`].
pub const KERNEL_CATALOG: &[(&str, &str)] = &[
    ("product_hilbert", "1/(x y) on the product torus"),
    ("single_hilbert", "1/x on the circle"),
];

impl Kernel {
    pub fn product_hilbert() -> Self {
        Self {
            rule: KernelRule::ProductHilbert,
            label: "product_hilbert".into(),
        }
    }

    pub fn single_hilbert() -> Self {
        Self {
            rule: KernelRule::SingleHilbert,
            label: "single_hilbert".into(),
        }
    }

    /// A closed-form product kernel registered under `label`.
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, label: impl Into<String>) -> Self {
        Self {
            rule: KernelRule::Custom(Arc::new(f)),
            label: label.into(),
        }
    }

    pub fn catalog(name: &str) -> Result<Self> {
        match name {
            "product_hilbert" => Ok(Self::product_hilbert()),
            "single_hilbert" => Ok(Self::single_hilbert()),
            other => Err(Error::UnknownCatalog(format!("kernel `{other}`"))),
        }
    }

    pub fn is_product(&self) -> bool {
        !matches!(self.rule, KernelRule::SingleHilbert)
    }

    /// `K(x, y)`, or `None` on the cross.
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        if x == 0.0 || (self.is_product() && y == 0.0) {
            return None;
        }
        let v = match &self.rule {
            KernelRule::ProductHilbert => 1.0 / (x * y),
            KernelRule::SingleHilbert => 1.0 / x,
            KernelRule::Custom(f) => f(x, y),
        };
        v.is_finite().then_some(v)
    }
}

/// `K_eps^N = K chi_{eps_1 < |x| < N_1} chi_{eps_2 < |y| < N_2}`.
#[derive(Debug, Clone)]
pub struct TruncatedKernel {
    pub kernel: Kernel,
    pub eps: [f64; 2],
    pub big_n: [f64; 2],
}

impl TruncatedKernel {
    /// `eps_i = N_i` is allowed and gives the zero kernel.
    pub fn new(kernel: Kernel, eps: [f64; 2], big_n: [f64; 2]) -> Result<Self> {
        let axes = if kernel.is_product() { 2 } else { 1 };
        for i in 0..axes {
            if !(eps[i] > 0.0 && eps[i] <= big_n[i]) {
                return Err(Error::param("truncation", format!("need 0 < eps <= N, got eps = {}, N = {}", eps[i], big_n[i])));
            }
        }
        Ok(Self { kernel, eps, big_n })
    }

    pub fn is_degenerate(&self) -> bool {
        let axes = if self.kernel.is_product() { 2 } else { 1 };
        (0..axes).any(|i| self.eps[i] >= self.big_n[i])
    }

    fn inside(&self, i: usize, v: f64) -> bool {
        self.eps[i] < v.abs() && v.abs() < self.big_n[i]
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if !self.inside(0, x) || (self.kernel.is_product() && !self.inside(1, y)) {
            return 0.0;
        }
        self.kernel.eval(x, y).unwrap_or(0.0)
    }
}

fn check_grid(grid: &PeriodicGrid, tk: &TruncatedKernel) -> Result<()> {
    let axes = if tk.kernel.is_product() { 2 } else { 1 };
    if grid.dim() != axes {
        return Err(Error::DimensionMismatch(format!("{axes}-axis kernel on a {}-axis grid", grid.dim())));
    }
    for i in 0..axes {
        if tk.big_n[i] > 0.5 {
            return Err(Error::SupportOverflow(format!("N = {} exceeds half the period", tk.big_n[i])));
        }
    }
    Ok(())
}

/// Kernel samples at signed lattice offsets, times the cell volume.
fn kernel_samples(grid: &PeriodicGrid, tk: &TruncatedKernel) -> Vec<C64> {
    let h = grid.cell_volume();
    (0..grid.len())
        .map(|flat| {
            let idx = grid.index(flat);
            let d: Vec<f64> = idx
                .iter()
                .zip(&grid.counts)
                .map(|(&i, &n)| PeriodicGrid::offset(i, n) as f64 / n as f64)
                .collect();
            C64::new(tk.eval(d[0], d.get(1).copied().unwrap_or(0.0)) * h, 0.0)
        })
        .collect()
}

/// Circular convolution with `K_eps^N` as a multiplier (symbol = DFT of the
/// sampled kernel).
pub fn truncated_operator(grid: &PeriodicGrid, tk: &TruncatedKernel) -> Result<FourierMultiplierOp> {
    check_grid(grid, tk)?;
    let mut symbol = kernel_samples(grid, tk);
    fft_nd(&mut symbol, &grid.counts, false);
    Ok(FourierMultiplierOp {
        grid: grid.clone(),
        symbol,
        label: format!("T[{}]", tk.kernel.label),
    })
}

/// `T_eps^N f = f * K_eps^N` on the grid, via FFT.
pub fn truncated_convolution(f: &DiscreteGridFunction, tk: &TruncatedKernel) -> Result<DiscreteGridFunction> {
    super::lifted_apply(&truncated_operator(&f.grid, tk)?, f)
}

/// The same convolution summed directly.
pub fn truncated_convolution_direct(f: &DiscreteGridFunction, tk: &TruncatedKernel) -> Result<DiscreteGridFunction> {
    check_grid(&f.grid, tk)?;
    let grid = &f.grid;
    let k = kernel_samples(grid, tk);
    let mut out = DiscreteGridFunction::zeros(grid.clone(), f.n());
    for i in 0..grid.len() {
        let ii = grid.index(i);
        for (j, kj) in k.iter().enumerate() {
            if kj.re == 0.0 {
                continue;
            }
            let jj = grid.index(j);
            let src: Vec<usize> = ii
                .iter()
                .zip(&jj)
                .zip(&grid.counts)
                .map(|((&a, &b), &n)| (a + n - b) % n)
                .collect();
            let s = grid.flat(&src);
            for c in 0..f.n() {
                out.components[c][i] += f.components[c][s] * kj;
            }
        }
    }
    Ok(out)
}

/// Parameter lattice for the kernel conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Positive radii: annulus boundaries, `|x|` and `|h|` values.
    pub scales: Vec<f64>,
    /// Gauss-Legendre points per dyadic piece.
    pub order: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            scales: (-4..=4).map(|k| 2f64.powi(k)).collect(),
            order: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConditionEstimate {
    pub eta: f64,
    pub n: usize,
    pub m: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// `(x, y, h, k)` where the (C.5) ratio peaked.
    pub c5_argmax: [f64; 4],
    pub sweep: SweepSpec,
    /// Lattice points dropped for landing on the cross.
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

impl KernelConditionEstimate {
    pub fn constants(&self) -> [f64; 5] {
        [self.c1, self.c2, self.c3, self.c4, self.c5]
    }
}

/// `int_{a<|y|<b} g(y) dy` by composite Gauss-Legendre on `[a, b]` and its mirror.
fn symmetric_integral(a: f64, b: f64, order: usize, g: impl Fn(f64) -> Option<f64>) -> f64 {
    let table = legendre(order);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    table
        .iter()
        .map(|&(x, w)| {
            let t = mid + half * x;
            w * half * (g(t).unwrap_or(0.0) + g(-t).unwrap_or(0.0))
        })
        .sum()
}

fn lattice(scales: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = scales.iter().flat_map(|&s| [s, 1.5 * s]).flat_map(|v| [v, -v]).collect();
    pts.sort_by(f64::total_cmp);
    pts
}

/// Lattice estimates of the smallest constants `A` in (C.1)-(C.5) for a
/// kernel on `R x R`.
pub fn kernel_condition_estimates(kernel: &Kernel, sweep: &SweepSpec, eta: f64, budget: Option<f64>) -> Result<KernelConditionEstimate> {
    if !kernel.is_product() {
        return Err(Error::param("kernel", "conditions need a product kernel"));
    }
    if !(eta > 0.0) {
        return Err(Error::param("eta", "must be positive"));
    }
    let mut bounds = sweep.scales.clone();
    if bounds.len() < 2 || bounds.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::param("scales", "need at least two positive scales"));
    }
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    let order = sweep.order.max(1);
    let k = |x: f64, y: f64| kernel.eval(x, y);
    let mut excluded = 0usize;

    // (C.1): block integrals between consecutive bounds, then prefix sums.
    let nb = bounds.len() - 1;
    let mut block = vec![vec![0.0; nb]; nb];
    for a in 0..nb {
        for b in 0..nb {
            block[a][b] = symmetric_integral(bounds[a], bounds[a + 1], order, |x| {
                Some(symmetric_integral(bounds[b], bounds[b + 1], order, |y| k(x, y)))
            });
        }
    }
    let mut c1: f64 = 0.0;
    for a1 in 0..nb {
        for a2 in a1..nb {
            for b1 in 0..nb {
                let mut acc = 0.0;
                for b2 in b1..nb {
                    acc += (a1..=a2).map(|a| block[a][b2]).sum::<f64>();
                    c1 = c1.max(acc.abs());
                }
            }
        }
    }

    let pts = lattice(&bounds);
    let steps: Vec<f64> = bounds.iter().flat_map(|&s| [s, -s]).collect();
    let env = |x: f64, h: f64| h.abs().powf(eta) * x.abs().powf(-1.0 - eta);

    // (C.2): partial integrals over every pair of bounds.
    let partial = |x: f64, lo: f64, hi: f64, first: bool| {
        symmetric_integral(lo, hi, order, |t| if first { k(x, t) } else { k(t, x) })
    };
    let mut c2: f64 = 0.0;
    for first in [true, false] {
        for i in 0..bounds.len() {
            for j in i + 1..bounds.len() {
                let (lo, hi) = (bounds[i], bounds[j]);
                for &x in &pts {
                    let kx = partial(x, lo, hi, first);
                    c2 = c2.max(kx.abs() * x.abs());
                    for &h in &steps {
                        if x.abs() >= 2.0 * h.abs() {
                            let d = partial(x + h, lo, hi, first) - kx;
                            c2 = c2.max(d.abs() / env(x, h));
                        }
                    }
                }
            }
        }
    }

    // (C.3)-(C.5) on the lattice.
    let (mut c3, mut c4, mut c5): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut c5_argmax = [0.0; 4];
    for &x in &pts {
        for &y in &pts {
            let Some(kxy) = k(x, y) else {
                excluded += 1;
                continue;
            };
            c3 = c3.max(kxy.abs() * x.abs() * y.abs());
            for &h in &steps {
                if x.abs() < 2.0 * h.abs() {
                    continue;
                }
                let Some(a) = k(x + h, y) else {
                    excluded += 1;
                    continue;
                };
                c4 = c4.max((a - kxy).abs() / (env(x, h) / y.abs()));
                if y.abs() >= 2.0 * h.abs() {
                    if let Some(b) = k(x, y + h) {
                        c4 = c4.max((b - kxy).abs() / (env(y, h) / x.abs()));
                    }
                }
                for &kk in &steps {
                    if y.abs() < 2.0 * kk.abs() {
                        continue;
                    }
                    let (Some(k11), Some(k01)) = (k(x + h, y + kk), k(x, y + kk)) else {
                        excluded += 1;
                        continue;
                    };
                    let d = k11 - k01 - a + kxy;
                    let r = d.abs() / (env(x, h) * env(y, kk));
                    if r > c5 {
                        c5 = r;
                        c5_argmax = [x, y, h, kk];
                    }
                }
            }
        }
    }
    let pass = budget.map(|b| [c1, c2, c3, c4, c5].iter().all(|&c| c <= b));
    Ok(KernelConditionEstimate {
        eta,
        n: 1,
        m: 1,
        c1,
        c2,
        c3,
        c4,
        c5,
        c5_argmax,
        sweep: sweep.clone(),
        excluded,
        budget,
        pass,
    })
}
