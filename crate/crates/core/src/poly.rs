use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::precision::decimal;

/// Polynomial with high-precision real coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    #[serde(with = "decimal::vec")]
    pub coefficients: Vec<Float>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<Float>) -> Self {
        Polynomial { coefficients }
    }

    pub fn zero(bits: u32) -> Self {
        Polynomial {
            coefficients: vec![Float::with_val(bits, 0)],
        }
    }

    pub fn one(bits: u32) -> Self {
        Polynomial {
            coefficients: vec![Float::with_val(bits, 1)],
        }
    }

    pub fn bits(&self) -> u32 {
        self.coefficients.first().map(|c| c.prec()).unwrap_or(64)
    }

    /// Index of the highest nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coefficients.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    pub fn leading(&self) -> Float {
        match self.degree() {
            Some(d) => self.coefficients[d].clone(),
            None => Float::with_val(self.bits(), 0),
        }
    }

    pub fn eval(&self, x: &Float) -> Float {
        let bits = self.bits().max(x.prec());
        let mut acc = Float::with_val(bits, 0);
        for c in self.coefficients.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    /// `sum |c_i| |x|^i`, the natural scale of rounding errors in `eval`.
    pub fn eval_abs(&self, x: &Float) -> Float {
        let bits = self.bits().max(x.prec());
        let ax = Float::with_val(bits, x.abs_ref());
        let mut acc = Float::with_val(bits, 0);
        for c in self.coefficients.iter().rev() {
            acc *= &ax;
            acc += Float::with_val(bits, c.abs_ref());
        }
        acc
    }

    pub fn eval_complex(&self, z: &Complex) -> Complex {
        let bits = self.bits().max(z.prec().0);
        let mut acc = Complex::with_val(bits, 0);
        for c in self.coefficients.iter().rev() {
            acc *= z;
            acc += c;
        }
        acc
    }

    /// Sum of coefficient moduli.
    pub fn norm1(&self) -> Float {
        let mut s = Float::with_val(self.bits(), 0);
        for c in &self.coefficients {
            s += Float::with_val(self.bits(), c.abs_ref());
        }
        s
    }

    pub fn from_roots(roots: &[Float], bits: u32) -> Self {
        let mut c = vec![Float::with_val(bits, 1)];
        for r in roots {
            let mut next = vec![Float::with_val(bits, 0); c.len() + 1];
            for (i, ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= Float::with_val(bits, ci * r);
            }
            c = next;
        }
        Polynomial { coefficients: c }
    }

    pub fn derivative(&self) -> Self {
        let bits = self.bits();
        if self.coefficients.len() <= 1 {
            return Polynomial::zero(bits);
        }
        Polynomial {
            coefficients: self
                .coefficients
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| Float::with_val(bits, c * i as u32))
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.to_f64()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_roots_and_eval() {
        let r = [Float::with_val(64, 1), Float::with_val(64, -2)];
        let p = Polynomial::from_roots(&r, 64);
        assert_eq!(p.to_f64(), vec![-2.0, 1.0, 1.0]);
        assert_eq!(p.eval(&Float::with_val(64, 3)).to_f64(), 10.0);
        assert_eq!(p.degree(), Some(2));
        assert_eq!(p.derivative().to_f64(), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_polynomial_has_no_degree() {
        assert_eq!(Polynomial::zero(64).degree(), None);
    }
}
