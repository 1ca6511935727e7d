use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Working precision and escalation ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionPolicy {
    pub bits: u32,
    pub escalation_factor: u32,
    pub max_escalations: u32,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy {
            bits: 256,
            escalation_factor: 2,
            max_escalations: 4,
        }
    }
}

impl PrecisionPolicy {
    pub fn new(bits: u32) -> Result<Self> {
        let p = PrecisionPolicy {
            bits,
            ..Default::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits < 64 {
            return Err(Error::InvalidPolicy(format!(
                "precision must be at least 64 bits, got {}",
                self.bits
            )));
        }
        if self.escalation_factor < 2 {
            return Err(Error::InvalidPolicy(
                "escalation factor must be at least 2".into(),
            ));
        }
        if self.bits.checked_mul(self.escalation_factor.pow(self.max_escalations)).is_none() {
            return Err(Error::InvalidPolicy("escalation ladder overflows".into()));
        }
        Ok(())
    }

    /// Precisions tried in order: the base precision followed by each escalation.
    pub fn ladder(&self) -> Vec<u32> {
        let mut out = vec![self.bits];
        let mut b = self.bits;
        for _ in 0..self.max_escalations {
            b *= self.escalation_factor;
            out.push(b);
        }
        out
    }

    /// Applies the `HP_PRECISION_BITS` environment override, if set.
    pub fn with_env_override(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var("HP_PRECISION_BITS") {
            let bits: u32 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidPolicy(format!("HP_PRECISION_BITS={v} is not an integer")))?;
            self.bits = bits;
            self.validate()?;
        }
        Ok(self)
    }
}

/// Threshold below which a quantity relative to its scale is treated as zero.
pub fn zero_threshold(bits: u32) -> Float {
    let e = -((bits - bits / 8) as i32);
    Float::with_val(64, Float::i_exp(1, e))
}

/// log2 of |x| without underflow; `-inf` for zero.
pub fn log2_abs(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    e as f64 + m.abs().log2()
}

pub fn to_decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

/// Short decimal form for reports.
pub fn to_decimal_digits(x: &Float, digits: usize) -> String {
    x.to_string_radix(10, Some(digits))
}

pub fn parse_decimal(s: &str, bits: u32) -> Result<Float> {
    let p = Float::parse(s.trim()).map_err(|e| Error::Config(format!("bad decimal '{s}': {e}")))?;
    Ok(Float::with_val(bits, p))
}

/// Precision sufficient to hold a decimal string with the given number of digits.
pub fn bits_for_decimal(s: &str) -> u32 {
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count() as f64;
    ((digits * std::f64::consts::LOG2_10).ceil() as u32 + 16).max(64)
}

/// Serde adapters storing floats as decimal strings.
pub mod decimal {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Float, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&to_decimal(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Float, D::Error> {
        let s = String::deserialize(d)?;
        parse_decimal(&s, bits_for_decimal(&s)).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(x: &[Float], s: S) -> std::result::Result<S::Ok, S::Error> {
            let v: Vec<String> = x.iter().map(to_decimal).collect();
            v.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Float>, D::Error> {
            let v = Vec::<String>::deserialize(d)?;
            v.iter()
                .map(|s| parse_decimal(s, bits_for_decimal(s)).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}
