//! Generating measures, quadrature and Nikishin moment tables.

mod carleman;
mod closed_form;
mod quadrature;
mod system;

pub use carleman::{carleman_diagnostic, CarlemanReport, CarlemanTrend};
pub use closed_form::closed_form_moments;
pub use quadrature::{Node, Rule};
pub use system::{moments, nikishin_moments, MomentTable, NikishinSystem, QuadratureReport, DEFAULT_EPS_DIST};

use rug::ops::Pow;
use rug::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Closed interval `[a, b]`; one endpoint may be infinite (half-line).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let iv = Interval { a, b };
        iv.validate()?;
        Ok(iv)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidInterval {
            a: self.a,
            b: self.b,
            reason: reason.to_string(),
        };
        if self.a.is_nan() || self.b.is_nan() {
            return Err(bad("endpoint is NaN"));
        }
        if !(self.a < self.b) {
            return Err(bad("left endpoint must be smaller than right endpoint"));
        }
        if self.a.is_infinite() && self.b.is_infinite() {
            return Err(bad("at most one endpoint may be infinite"));
        }
        if self.a == f64::INFINITY || self.b == f64::NEG_INFINITY {
            return Err(bad("infinite endpoint on the wrong side"));
        }
        Ok(())
    }

    pub fn is_bounded(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    /// Euclidean distance from a complex point to the interval.
    pub fn distance(&self, re: f64, im: f64) -> f64 {
        let dx = if re < self.a {
            self.a - re
        } else if re > self.b {
            re - self.b
        } else {
            0.0
        };
        dx.hypot(im)
    }

    /// Number of common points with another interval: 0, 1 (touching) or more.
    fn overlaps(&self, other: &Interval) -> usize {
        let lo = self.a.max(other.a);
        let hi = self.b.min(other.b);
        if lo < hi {
            2
        } else if lo == hi {
            1
        } else {
            0
        }
    }

    pub fn contains_interior(&self, x: f64) -> bool {
        self.a < x && x < self.b
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let a = self.a.is_finite().then_some(self.a);
        let b = self.b.is_finite().then_some(self.b);
        (a, b).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (a, b) = <(Option<f64>, Option<f64>)>::deserialize(d)?;
        Ok(Interval {
            a: a.unwrap_or(f64::NEG_INFINITY),
            b: b.unwrap_or(f64::INFINITY),
        })
    }
}

/// Density of a generating measure.
///
/// `Jacobi` is `(b-x)^alpha (x-a)^beta` on a bounded interval. `Laguerre` is
/// `d^beta exp(-d/scale)` with `d` the distance to the finite endpoint of a
/// half-line. `Tabulated` interpolates positive knot values by the polynomial
/// through the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Weight {
    Jacobi { alpha: f64, beta: f64 },
    Laguerre { beta: f64, scale: f64 },
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl Weight {
    pub fn chebyshev() -> Self {
        Weight::Jacobi {
            alpha: -0.5,
            beta: -0.5,
        }
    }

    pub fn legendre() -> Self {
        Weight::Jacobi {
            alpha: 0.0,
            beta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub interval: Interval,
    pub weight: Weight,
    #[serde(default = "default_sign")]
    pub sign: i8,
}

fn default_sign() -> i8 {
    1
}

impl MeasureSpec {
    pub fn new(interval: Interval, weight: Weight, sign: i8) -> Result<Self> {
        let m = MeasureSpec {
            interval,
            weight,
            sign,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn chebyshev(a: f64, b: f64) -> Result<Self> {
        Self::new(Interval::new(a, b)?, Weight::chebyshev(), 1)
    }

    pub fn legendre(a: f64, b: f64) -> Result<Self> {
        Self::new(Interval::new(a, b)?, Weight::legendre(), 1)
    }

    pub fn validate(&self) -> Result<()> {
        self.interval.validate()?;
        if self.sign != 1 && self.sign != -1 {
            return Err(Error::InvalidWeight(format!("sign must be +1 or -1, got {}", self.sign)));
        }
        let iv = self.interval;
        match &self.weight {
            Weight::Jacobi { alpha, beta } => {
                if !iv.is_bounded() {
                    return Err(Error::InvalidWeight(
                        "Jacobi weights require a bounded interval".into(),
                    ));
                }
                if !(alpha.is_finite() && beta.is_finite() && *alpha > -1.0 && *beta > -1.0) {
                    return Err(Error::InvalidWeight(format!(
                        "Jacobi exponents must exceed -1 (alpha={alpha}, beta={beta})"
                    )));
                }
            }
            Weight::Laguerre { beta, scale } => {
                if iv.is_bounded() {
                    return Err(Error::InvalidWeight(
                        "Laguerre weights require a half-line".into(),
                    ));
                }
                if !(beta.is_finite() && *beta > -1.0) {
                    return Err(Error::InvalidWeight(format!("Laguerre exponent must exceed -1, got {beta}")));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidWeight(format!("Laguerre scale must be positive, got {scale}")));
                }
            }
            Weight::Tabulated { knots, values } => {
                if !iv.is_bounded() {
                    return Err(Error::InvalidWeight(
                        "tabulated weights require a bounded interval".into(),
                    ));
                }
                if knots.len() < 2 || knots.len() != values.len() {
                    return Err(Error::InvalidWeight(
                        "tabulated weight needs at least two knots and one value per knot".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidWeight("knots must be strictly increasing".into()));
                }
                if knots[0] < iv.a || knots[knots.len() - 1] > iv.b {
                    return Err(Error::InvalidWeight("knots must lie in the interval".into()));
                }
                if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidWeight("tabulated values must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Returns an evaluator of the signed density at a point given by its
    /// coordinate and its distances to both endpoints.
    pub(crate) fn density(&self, bits: u32) -> Density {
        let sign = self.sign;
        let kind = match &self.weight {
            Weight::Jacobi { alpha, beta } => DensityKind::Jacobi {
                alpha: Float::with_val(bits, *alpha),
                beta: Float::with_val(bits, *beta),
            },
            Weight::Laguerre { beta, scale } => DensityKind::Laguerre {
                beta: Float::with_val(bits, *beta),
                scale: Float::with_val(bits, *scale),
            },
            Weight::Tabulated { knots, values } => {
                let xs: Vec<Float> = knots.iter().map(|k| Float::with_val(bits, *k)).collect();
                let mut bw = Vec::with_capacity(xs.len());
                for i in 0..xs.len() {
                    let mut p = Float::with_val(bits, 1);
                    for j in 0..xs.len() {
                        if i != j {
                            p *= Float::with_val(bits, &xs[i] - &xs[j]);
                        }
                    }
                    bw.push(p.recip());
                }
                DensityKind::Tabulated {
                    knots: xs,
                    values: values.iter().map(|v| Float::with_val(bits, *v)).collect(),
                    bary: bw,
                }
            }
        };
        Density { bits, sign, kind }
    }
}

pub(crate) struct Density {
    bits: u32,
    sign: i8,
    kind: DensityKind,
}

enum DensityKind {
    Jacobi { alpha: Float, beta: Float },
    Laguerre { beta: Float, scale: Float },
    Tabulated { knots: Vec<Float>, values: Vec<Float>, bary: Vec<Float> },
}

fn pow_or_one(d: &Float, e: &Float, bits: u32) -> Float {
    if e.is_zero() {
        Float::with_val(bits, 1)
    } else if *e == -0.5 {
        Float::with_val(bits, d.recip_sqrt_ref())
    } else if *e == 0.5 {
        Float::with_val(bits, d.sqrt_ref())
    } else {
        Float::with_val(bits, d.pow(e))
    }
}

impl Density {
    /// `to_a` and `to_b` are distances to the finite endpoints (ignored when infinite).
    pub(crate) fn eval(&self, x: &Float, to_a: &Float, to_b: &Float) -> Float {
        let bits = self.bits;
        let mut v = match &self.kind {
            DensityKind::Jacobi { alpha, beta } => {
                let mut v = pow_or_one(to_b, alpha, bits);
                v *= pow_or_one(to_a, beta, bits);
                v
            }
            DensityKind::Laguerre { beta, scale } => {
                let d = if to_a.is_finite() { to_a } else { to_b };
                let mut v = pow_or_one(d, beta, bits);
                let e = Float::with_val(bits, -(d / scale.clone()));
                v *= e.exp();
                v
            }
            DensityKind::Tabulated { knots, values, bary } => {
                let mut num = Float::with_val(bits, 0);
                let mut den = Float::with_val(bits, 0);
                for i in 0..knots.len() {
                    let diff = Float::with_val(bits, x - &knots[i]);
                    if diff.is_zero() {
                        return if self.sign < 0 { -values[i].clone() } else { values[i].clone() };
                    }
                    let t = Float::with_val(bits, &bary[i] / &diff);
                    num += Float::with_val(bits, &t * &values[i]);
                    den += t;
                }
                num / den
            }
        };
        if self.sign < 0 {
            v = -v;
        }
        v
    }
}

/// Ordered generating measures `sigma_1, ..., sigma_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NikishinGenerator {
    pub measures: Vec<MeasureSpec>,
}

impl NikishinGenerator {
    pub fn new(measures: Vec<MeasureSpec>) -> Result<Self> {
        let g = NikishinGenerator { measures };
        g.validate()?;
        Ok(g)
    }

    pub fn m(&self) -> usize {
        self.measures.len()
    }

    /// Interval of `sigma_j`, 1-based.
    pub fn interval(&self, j: usize) -> Interval {
        self.measures[j - 1].interval
    }

    pub fn validate(&self) -> Result<()> {
        if self.measures.is_empty() {
            return Err(Error::Config("a generator needs at least one measure".into()));
        }
        for m in &self.measures {
            m.validate()?;
        }
        for j in 1..self.measures.len() {
            if self.measures[j - 1]
                .interval
                .overlaps(&self.measures[j].interval)
                > 1
            {
                return Err(Error::Adjacency {
                    first: j,
                    second: j + 1,
                });
            }
        }
        Ok(())
    }

    /// All intervals bounded and pairwise disjoint.
    pub fn require_disjoint_bounded(&self) -> Result<()> {
        for (i, m) in self.measures.iter().enumerate() {
            if !m.interval.is_bounded() {
                return Err(Error::NotDisjoint {
                    first: i + 1,
                    second: i + 1,
                });
            }
            for (k, o) in self.measures.iter().enumerate().skip(i + 1) {
                if m.interval.overlaps(&o.interval) > 0 {
                    return Err(Error::NotDisjoint {
                        first: i + 1,
                        second: k + 1,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn require_bounded(&self) -> Result<()> {
        for m in &self.measures {
            if !m.interval.is_bounded() {
                return Err(Error::InvalidInterval {
                    a: m.interval.a,
                    b: m.interval.b,
                    reason: "approximation experiments require bounded intervals".into(),
                });
            }
        }
        Ok(())
    }

    /// Largest endpoint modulus over all intervals.
    pub fn max_abs_endpoint(&self) -> f64 {
        self.measures
            .iter()
            .map(|m| m.interval.a.abs().max(m.interval.b.abs()))
            .fold(0.0, f64::max)
    }
}
