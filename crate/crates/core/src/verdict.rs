//! Refinement traces, log-log rate fits and tri-state verdicts.

use serde::{Deserialize, Serialize};

/// Serde helpers writing non-finite floats as the strings `"inf"`, `"-inf"`
/// and `"nan"`, which plain JSON numbers cannot hold.
pub mod extended {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("expected a number, \"inf\", \"-inf\" or \"nan\", got {other:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            v.iter().map(|x| to_repr(*x)).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}

/// Slope above which growth across refinement levels counts as divergence.
pub const DIVERGENCE_SLOPE: f64 = 0.1;
/// Levels needed before a rate is fitted.
pub const MIN_LEVELS: usize = 3;

/// One refinement level: the scale it probes, the value seen there, and a
/// number describing the resolution (innermost cell, grid size, ...).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub x: f64,
    #[serde(with = "extended")]
    pub value: f64,
    pub resolution: f64,
}

/// Least-squares slope of `log value` against `log x`.
pub fn loglog_slope(points: &[TracePoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.x > 0.0 && p.value > 0.0 && p.value.is_finite())
        .map(|p| (p.x.ln(), p.value.ln()))
        .collect();
    if pts.len() < MIN_LEVELS {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Verdict {
    /// No growth across the levels; `bound` is the largest value seen.
    BoundedAtResolution {
        #[serde(with = "extended")]
        bound: f64,
    },
    /// Growth like `x^slope`; `rate` is the fitted exponent in the
    /// variable the trace is indexed by (see the producer).
    DivergenceSuspected {
        #[serde(with = "extended")]
        rate: f64,
        #[serde(with = "extended")]
        slope: f64,
    },
    Inconclusive { reason: String },
}

/// Coarse verdict class used for cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictClass {
    Bounded,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn class(&self) -> VerdictClass {
        match self {
            Verdict::BoundedAtResolution { .. } => VerdictClass::Bounded,
            Verdict::DivergenceSuspected { .. } => VerdictClass::Divergent,
            Verdict::Inconclusive { .. } => VerdictClass::Inconclusive,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.class() == VerdictClass::Bounded
    }

    pub fn is_divergent(&self) -> bool {
        self.class() == VerdictClass::Divergent
    }
}

/// Classifies a trace whose values are expected to stay bounded. The rate is
/// the fitted slope itself.
pub fn classify_growth(trace: &[TracePoint]) -> Verdict {
    let bound = trace.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    if trace.iter().any(|p| !p.value.is_finite()) {
        return Verdict::DivergenceSuspected {
            rate: f64::INFINITY,
            slope: f64::INFINITY,
        };
    }
    match loglog_slope(trace) {
        None => Verdict::Inconclusive {
            reason: format!("need at least {MIN_LEVELS} refinement levels"),
        },
        Some(slope) if slope > DIVERGENCE_SLOPE => Verdict::DivergenceSuspected { rate: slope, slope },
        Some(_) => Verdict::BoundedAtResolution { bound },
    }
}

/// Estimate of `ess sup g` from sampled maxima.
///
/// The trace holds, per level, `x = 1 / delta` and the running maximum of
/// `g`, where `delta` is how close that level's samples come to the nearest
/// singularity. Growth `g ~ delta^rate` gives a log-log slope of `-rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssSupEstimate {
    #[serde(with = "extended")]
    pub b_hat: f64,
    pub argmax: Vec<f64>,
    pub verdict: Verdict,
    pub trace: Vec<TracePoint>,
}

impl EssSupEstimate {
    /// Builds the estimate from per-level maxima `(x, max, argmax, resolution)`.
    pub fn from_levels(levels: Vec<(f64, f64, Vec<f64>, f64)>) -> Self {
        let mut b_hat = f64::NEG_INFINITY;
        let mut argmax = Vec::new();
        let mut trace = Vec::with_capacity(levels.len());
        for (x, value, at, resolution) in levels {
            if value > b_hat {
                b_hat = value;
                argmax = at;
            }
            trace.push(TracePoint {
                x,
                value: b_hat,
                resolution,
            });
        }
        let verdict = match classify_growth(&trace) {
            Verdict::DivergenceSuspected { slope, .. } => Verdict::DivergenceSuspected {
                rate: -slope,
                slope,
            },
            other => other,
        };
        Self {
            b_hat,
            argmax,
            verdict,
            trace,
        }
    }

    /// The same estimate for `g^2`: values squared, rate doubled.
    pub fn squared(&self) -> Self {
        let trace: Vec<TracePoint> = self
            .trace
            .iter()
            .map(|p| TracePoint {
                value: p.value * p.value,
                ..*p
            })
            .collect();
        let verdict = match &self.verdict {
            Verdict::DivergenceSuspected { rate, slope } => Verdict::DivergenceSuspected {
                rate: 2.0 * rate,
                slope: 2.0 * slope,
            },
            Verdict::BoundedAtResolution { bound } => {
                Verdict::BoundedAtResolution { bound: bound * bound }
            }
            other => other.clone(),
        };
        Self {
            b_hat: self.b_hat * self.b_hat,
            argmax: self.argmax.clone(),
            verdict,
            trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(f: impl Fn(f64) -> f64) -> Vec<TracePoint> {
        [1e2, 1e4, 1e6]
            .iter()
            .map(|&x| TracePoint {
                x,
                value: f(x),
                resolution: 1.0 / x,
            })
            .collect()
    }

    #[test]
    fn slope_of_power_law() {
        let s = loglog_slope(&trace(|x| 3.0 * x.powf(0.5))).unwrap();
        assert!((s - 0.5).abs() < 1e-12);
        assert!(loglog_slope(&trace(|x| x)[..2]).is_none());
    }

    #[test]
    fn classification() {
        assert!(classify_growth(&trace(|_| 2.0)).is_bounded());
        assert!(classify_growth(&trace(|x| 2.0 - 1.0 / x)).is_bounded());
        assert!(classify_growth(&trace(|x| x.powf(0.2))).is_divergent());
        assert_eq!(
            classify_growth(&trace(|_| 1.0)[..2]).class(),
            VerdictClass::Inconclusive
        );
    }

    #[test]
    fn ess_sup_rate_and_monotone_trace() {
        let levels = vec![
            (1e2, 1e2, vec![0.01], 0.0),
            (1e4, 50.0, vec![0.5], 0.0),
            (1e6, 1e6, vec![1e-6], 0.0),
        ];
        let e = EssSupEstimate::from_levels(levels);
        assert_eq!(e.trace[1].value, 1e2);
        assert!(e.trace.windows(2).all(|w| w[1].value >= w[0].value));
        match e.verdict {
            Verdict::DivergenceSuspected { rate, .. } => assert!(rate < -0.1),
            ref v => panic!("{v:?}"),
        }
        let sq = e.squared();
        assert_eq!(sq.b_hat, 1e12);
    }
}
