//! Weights sampled on a grid, read from and written to a text file.
//!
//! ```text
//! # comment lines start with '#'
//! N 2
//! domain euclidean 1
//! window 0 1
//! counts 4
//! singular 0 0
//! data
//! <2 N^2 numbers per line>
//! ```
//!
//! `domain` is one of `euclidean d`, `torus d`, `product_euclidean m n`,
//! `product_torus m n`. `window` lists `lo hi` per axis and is omitted on a
//! torus. `singular axis at` may repeat. After `data` there is one line per
//! sample point, the last axis varying fastest; each line holds the matrix
//! row-major as interleaved real and imaginary parts. Euclidean samples sit
//! at cell centres `lo + (k + 1/2) h`, torus samples at `k / n`.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::{DomainDescriptor, DomainKind, Interval, Singularity};
use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedWeight {
    pub n: usize,
    pub domain: DomainDescriptor,
    pub counts: Vec<usize>,
    pub singular: Vec<Singularity>,
    pub samples: Vec<HermitianMatrix>,
}

impl TabulatedWeight {
    pub fn new(
        domain: DomainDescriptor,
        counts: Vec<usize>,
        singular: Vec<Singularity>,
        samples: Vec<HermitianMatrix>,
    ) -> Result<Self> {
        if counts.len() != domain.dim() || counts.iter().any(|&c| c == 0) {
            return Err(Error::Format("counts must be positive, one per axis".into()));
        }
        let total: usize = counts.iter().product();
        if samples.len() != total {
            return Err(Error::Format(format!(
                "{} samples for a grid of {total} points",
                samples.len()
            )));
        }
        let n = samples.first().map(HermitianMatrix::dim).unwrap_or(0);
        if n == 0 || samples.iter().any(|m| m.dim() != n) {
            return Err(Error::Format("samples must share one nonzero dimension".into()));
        }
        Ok(Self {
            n,
            domain,
            counts,
            singular,
            samples,
        })
    }

    /// Samples `f` at the grid points of `domain`.
    pub fn sample(
        domain: DomainDescriptor,
        counts: Vec<usize>,
        singular: Vec<Singularity>,
        f: impl Fn(&[f64]) -> Result<HermitianMatrix>,
    ) -> Result<Self> {
        let total: usize = counts.iter().product();
        let mut samples = Vec::with_capacity(total);
        let mut t = vec![0.0; counts.len()];
        for flat in 0..total {
            Self::point_into(&domain, &counts, flat, &mut t);
            samples.push(f(&t)?);
        }
        Self::new(domain, counts, singular, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn point_into(domain: &DomainDescriptor, counts: &[usize], mut flat: usize, t: &mut [f64]) {
        for axis in (0..counts.len()).rev() {
            let k = flat % counts[axis];
            flat /= counts[axis];
            let n = counts[axis] as f64;
            t[axis] = if domain.is_torus() {
                k as f64 / n
            } else {
                let iv = domain.window[axis];
                iv.lo + (k as f64 + 0.5) * iv.len() / n
            };
        }
    }

    /// Coordinates of sample `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.counts.len()];
        Self::point_into(&self.domain, &self.counts, flat, &mut t);
        t
    }

    /// Nearest sample to `t`; points outside the window are rejected.
    pub fn lookup(&self, t: &[f64]) -> Result<&HermitianMatrix> {
        if t.len() != self.counts.len() {
            return Err(Error::DimensionMismatch("point dimension".into()));
        }
        let mut flat = 0;
        for (axis, &x) in t.iter().enumerate() {
            let n = self.counts[axis];
            let k = if self.domain.is_torus() {
                ((x.rem_euclid(1.0) * n as f64).round() as usize) % n
            } else {
                let iv = self.domain.window[axis];
                if !(x >= iv.lo && x <= iv.hi) {
                    return Err(Error::OutsideWindow { point: t.to_vec() });
                }
                (((x - iv.lo) / iv.len() * n as f64).floor() as usize).min(n - 1)
            };
            flat = flat * n + k;
        }
        Ok(&self.samples[flat])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "N {}", self.n);
        let kind = match self.domain.kind {
            DomainKind::Euclidean { d } => format!("euclidean {d}"),
            DomainKind::Torus { d } => format!("torus {d}"),
            DomainKind::ProductEuclidean { m, n } => format!("product_euclidean {m} {n}"),
            DomainKind::ProductTorus { m, n } => format!("product_torus {m} {n}"),
        };
        let _ = writeln!(out, "domain {kind}");
        if !self.domain.is_torus() {
            let w: Vec<String> = self
                .domain
                .window
                .iter()
                .map(|iv| format!("{:?} {:?}", iv.lo, iv.hi))
                .collect();
            let _ = writeln!(out, "window {}", w.join(" "));
        }
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "counts {}", counts.join(" "));
        for s in &self.singular {
            let _ = writeln!(out, "singular {} {:?}", s.axis, s.at);
        }
        out.push_str("data\n");
        for m in &self.samples {
            let row: Vec<String> = m
                .matrix()
                .transpose()
                .iter()
                .flat_map(|z| [format!("{:?}", z.re), format!("{:?}", z.im)])
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut kind = None;
        let mut window = Vec::new();
        let mut counts = None;
        let mut singular = Vec::new();
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let nums = |fields: &[&str]| -> Result<Vec<f64>> {
            fields
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| Error::Format(format!("bad number '{f}'"))))
                .collect()
        };
        let ints = |fields: &[&str]| -> Result<Vec<usize>> {
            fields
                .iter()
                .map(|f| f.parse::<usize>().map_err(|_| Error::Format(format!("bad integer '{f}'"))))
                .collect()
        };
        for line in lines.by_ref() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "N" => n = ints(&fields[1..])?.first().copied(),
                "domain" => {
                    let dims = ints(&fields[2.min(fields.len())..])?;
                    let need = |k: usize| -> Result<()> {
                        if dims.len() == k {
                            Ok(())
                        } else {
                            Err(Error::Format(format!("domain line needs {k} dimensions")))
                        }
                    };
                    kind = Some(match fields.get(1).copied() {
                        Some("euclidean") => {
                            need(1)?;
                            DomainKind::Euclidean { d: dims[0] }
                        }
                        Some("torus") => {
                            need(1)?;
                            DomainKind::Torus { d: dims[0] }
                        }
                        Some("product_euclidean") => {
                            need(2)?;
                            DomainKind::ProductEuclidean { m: dims[0], n: dims[1] }
                        }
                        Some("product_torus") => {
                            need(2)?;
                            DomainKind::ProductTorus { m: dims[0], n: dims[1] }
                        }
                        other => return Err(Error::Format(format!("unknown domain kind {other:?}"))),
                    });
                }
                "window" => {
                    let v = nums(&fields[1..])?;
                    if v.len() % 2 != 0 {
                        return Err(Error::Format("window needs lo hi pairs".into()));
                    }
                    window = v.chunks(2).map(|p| Interval::new(p[0], p[1])).collect();
                }
                "counts" => counts = Some(ints(&fields[1..])?),
                "singular" => {
                    let v = nums(&fields[1..])?;
                    if v.len() != 2 || v[0] < 0.0 || v[0].fract() != 0.0 {
                        return Err(Error::Format("singular needs 'axis at'".into()));
                    }
                    singular.push(Singularity::new(v[0] as usize, v[1]));
                }
                "data" => break,
                other => return Err(Error::Format(format!("unknown header field '{other}'"))),
            }
        }
        let n = n.ok_or_else(|| Error::Format("missing N".into()))?;
        let kind = kind.ok_or_else(|| Error::Format("missing domain".into()))?;
        let counts = counts.ok_or_else(|| Error::Format("missing counts".into()))?;
        let domain = DomainDescriptor::new(kind, window).map_err(|e| Error::Format(e.to_string()))?;
        let mut samples = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let v = nums(&fields)?;
            if v.len() != 2 * n * n {
                return Err(Error::Format(format!(
                    "data line {} has {} numbers, expected {}",
                    samples.len() + 1,
                    v.len(),
                    2 * n * n
                )));
            }
            let entries: Vec<C64> = v.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
            samples.push(
                HermitianMatrix::from_rows(n, &entries)
                    .map_err(|e| Error::Format(format!("data line {}: {e}", samples.len() + 1)))?,
            );
        }
        Self::new(domain, counts, singular, samples)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::MatrixWeight;

    #[test]
    fn round_trip() {
        let w = MatrixWeight::paper_example_unit();
        let t = TabulatedWeight::sample(
            DomainDescriptor::unit_interval(),
            vec![8],
            vec![Singularity::new(0, 0.0)],
            |x| w.evaluate(x),
        )
        .unwrap();
        let back = TabulatedWeight::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn nearest_sample_lookup() {
        let d = DomainDescriptor::unit_interval();
        let t = TabulatedWeight::sample(d, vec![4], vec![], |x| {
            Ok(HermitianMatrix::from_real_diagonal(&[1.0 + x[0]]))
        })
        .unwrap();
        assert_eq!(t.lookup(&[0.1]).unwrap().entry(0, 0).re, 1.125);
        assert_eq!(t.lookup(&[0.6]).unwrap().entry(0, 0).re, 1.625);
        assert_eq!(t.lookup(&[1.0]).unwrap().entry(0, 0).re, 1.875);
        assert!(matches!(t.lookup(&[1.2]), Err(Error::OutsideWindow { .. })));
        let w = MatrixWeight::tabulated(t);
        assert!(matches!(w.evaluate(&[-0.1]), Err(Error::OutsideWindow { .. })));
    }

    #[test]
    fn torus_lookup_wraps() {
        let d = DomainDescriptor::torus(1).unwrap();
        let t = TabulatedWeight::sample(d, vec![4], vec![], |x| {
            Ok(HermitianMatrix::from_real_diagonal(&[1.0 + x[0]]))
        })
        .unwrap();
        assert_eq!(t.lookup(&[0.99]).unwrap().entry(0, 0).re, 1.0);
        assert_eq!(t.lookup(&[1.26]).unwrap().entry(0, 0).re, 1.25);
    }

    #[test]
    fn malformed_files() {
        assert!(TabulatedWeight::parse("N 1\ndomain euclidean 1\nwindow 0 1\ncounts 2\ndata\n1 0\n").is_err());
        assert!(TabulatedWeight::parse("N 1\ndomain cube 1\ncounts 1\ndata\n1 0\n").is_err());
        assert!(TabulatedWeight::parse("N 2\ndomain torus 1\ncounts 1\ndata\n1 0 0 1 0 0 1 0\n").is_err());
        assert!(TabulatedWeight::parse("N 1\ndomain torus 1\ncounts 1\ndata\n2 0\n").is_ok());
    }
}
