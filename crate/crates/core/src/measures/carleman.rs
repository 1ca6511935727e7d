use rug::Float;
use serde::{Deserialize, Serialize};

use super::quadrature::log2_abs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarlemanTrend {
    /// Terms decay no faster than `1/n`.
    Divergent,
    /// Terms decay like `n^-p` with `p` clearly above one.
    Convergent,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarlemanReport {
    /// Terms `|c_n|^(-1/(2n))` for `n = 1, 2, ...`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Fitted decay exponent `p` in `term ~ n^-p` over the upper half.
    pub decay_exponent: f64,
    pub trend: CarlemanTrend,
}

/// Partial sums of `sum_{n>=1} |c_n|^(-1/(2n))`. Divergence cannot be
/// certified from finitely many terms, so the result is a trend only.
pub fn carleman_diagnostic(moments: &[Float]) -> CarlemanReport {
    let mut terms = Vec::new();
    let mut partial_sums = Vec::new();
    let mut acc = 0.0;
    for (n, c) in moments.iter().enumerate().skip(1) {
        let l = log2_abs(c);
        let t = if l.is_finite() {
            (-l / (2.0 * n as f64)).exp2()
        } else {
            f64::INFINITY
        };
        acc += t;
        terms.push(t);
        partial_sums.push(acc);
    }
    let k = terms.len();
    let (decay_exponent, trend) = if k < 4 || terms.iter().any(|t| !t.is_finite()) {
        (f64::NAN, CarlemanTrend::Inconclusive)
    } else {
        let pts: Vec<(f64, f64)> = (k / 2..k)
            .map(|i| (((i + 1) as f64).ln(), terms[i].ln()))
            .collect();
        let slope = fit_slope(&pts);
        let p = -slope;
        let trend = if p <= 1.05 {
            CarlemanTrend::Divergent
        } else {
            CarlemanTrend::Convergent
        };
        (p, trend)
    };
    CarlemanReport {
        terms,
        partial_sums,
        decay_exponent,
        trend,
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::{Complete, Integer};

    #[test]
    fn unit_moments() {
        let m: Vec<Float> = (0..6).map(|_| Float::with_val(64, 1)).collect();
        let r = carleman_diagnostic(&m);
        assert_eq!(r.partial_sums, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(r.trend, CarlemanTrend::Divergent);
    }

    #[test]
    fn factorial_scale_is_harmonic() {
        // Stirling: ((2n)!)^(-1/(2n)) ~ e/(2n)
        let m: Vec<Float> = (0..60u32)
            .map(|n| Float::with_val(256, Integer::factorial(2 * n).complete()))
            .collect();
        let r = carleman_diagnostic(&m);
        let n = 50.0;
        let stirling = std::f64::consts::E / (2.0 * n) * (4.0 * std::f64::consts::PI * n).powf(-1.0 / (4.0 * n));
        assert!((r.terms[49] / stirling - 1.0).abs() < 1e-3);
        assert!((r.decay_exponent - 1.0).abs() < 0.05);
        assert_eq!(r.trend, CarlemanTrend::Divergent);
    }

    #[test]
    fn fast_growth_converges() {
        let m: Vec<Float> = (0..40u32)
            .map(|n| Float::with_val(64, Float::i_exp(1, (4 * n * n) as i32)))
            .collect();
        assert_eq!(carleman_diagnostic(&m).trend, CarlemanTrend::Convergent);
    }
}
