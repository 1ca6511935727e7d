use rug::ops::Pow;
use rug::{Float, Integer};

use super::{MeasureSpec, Weight};

/// Moments `c_0..=c_degree` in closed form for Jacobi and Laguerre weights.
/// Returns `None` for tabulated weights.
pub fn closed_form_moments(spec: &MeasureSpec, degree: usize, bits: u32) -> Option<Vec<Float>> {
    let iv = spec.interval;
    let out = match &spec.weight {
        Weight::Jacobi { alpha, beta } => jacobi(iv.a, iv.b, *alpha, *beta, degree, bits),
        Weight::Laguerre { beta, scale } => laguerre(iv.a, iv.b, *beta, *scale, degree, bits),
        Weight::Tabulated { .. } => return None,
    };
    Some(
        out.into_iter()
            .map(|v| if spec.sign < 0 { -v } else { v })
            .collect(),
    )
}

fn binomials(k: usize) -> Vec<Integer> {
    let mut row = vec![Integer::from(1)];
    for i in 1..=k {
        let prev = row[i - 1].clone();
        row.push(prev * (k - i + 1) as u32 / i as u32);
    }
    row
}

fn jacobi(a: f64, b: f64, alpha: f64, beta: f64, degree: usize, bits: u32) -> Vec<Float> {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let growth = ((c.abs() + r) / r).log2().max(0.0) + 2.0;
    let wp = bits + 64 + (degree as f64 * growth).ceil() as u32;
    let al = Float::with_val(wp, alpha);
    let be = Float::with_val(wp, beta);
    let one = Float::with_val(wp, 1);
    // moments of (1-t)^alpha (1+t)^beta on [-1,1]
    let mut mu = Vec::with_capacity(degree + 1);
    let s = Float::with_val(wp, &al + &be);
    let g = Float::with_val(wp, &al + &one).gamma()
        * Float::with_val(wp, &be + &one).gamma()
        / Float::with_val(wp, &s + 2u32).gamma();
    let two = Float::with_val(wp, 2);
    let mu0 = Float::with_val(wp, two.pow(Float::with_val(wp, &s + 1u32))) * g;
    mu.push(mu0);
    for k in 0..degree {
        let mut next = Float::with_val(wp, &be - &al) * &mu[k];
        if k > 0 {
            next += Float::with_val(wp, &mu[k - 1] * k as u32);
        }
        next /= Float::with_val(wp, &s + (k + 2) as u32);
        mu.push(next);
    }
    let cf = Float::with_val(wp, c);
    let rf = Float::with_val(wp, r);
    let scale = Float::with_val(wp, rf.clone().pow(Float::with_val(wp, &s + 1u32)));
    let mut cpow = vec![Float::with_val(wp, 1)];
    let mut rpow = vec![Float::with_val(wp, 1)];
    for i in 1..=degree {
        cpow.push(Float::with_val(wp, &cpow[i - 1] * &cf));
        rpow.push(Float::with_val(wp, &rpow[i - 1] * &rf));
    }
    (0..=degree)
        .map(|k| {
            let bin = binomials(k);
            let mut acc = Float::with_val(wp, 0);
            for i in 0..=k {
                let mut t = Float::with_val(wp, &cpow[k - i] * &rpow[i]);
                t *= &mu[i];
                t *= &bin[i];
                acc += t;
            }
            Float::with_val(bits, acc * &scale)
        })
        .collect()
}

fn laguerre(a: f64, b: f64, beta: f64, scale: f64, degree: usize, bits: u32) -> Vec<Float> {
    let right = b.is_infinite();
    let e = if right { a } else { b };
    let growth = (e.abs() / scale + 1.0).log2().max(0.0) + 2.0;
    let wp = bits + 64 + (degree as f64 * growth).ceil() as u32;
    let ef = Float::with_val(wp, e);
    let sf = Float::with_val(wp, scale);
    let be = Float::with_val(wp, beta);
    // u-moments: s^(i+beta+1) Gamma(i+beta+1)
    let mut um = Vec::with_capacity(degree + 1);
    let mut g = Float::with_val(wp, &be + 1u32).gamma()
        * Float::with_val(wp, sf.clone().pow(Float::with_val(wp, &be + 1u32)));
    for i in 0..=degree {
        um.push(g.clone());
        g *= Float::with_val(wp, &be + (i + 1) as u32);
        g *= &sf;
    }
    (0..=degree)
        .map(|k| {
            let bin = binomials(k);
            let mut acc = Float::with_val(wp, 0);
            for i in 0..=k {
                let mut t = Float::with_val(wp, ef.clone().pow((k - i) as u32));
                t *= &um[i];
                t *= &bin[i];
                if !right && i % 2 == 1 {
                    t = -t;
                }
                acc += t;
            }
            Float::with_val(bits, acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::float::Constant;

    #[test]
    fn chebyshev_wallis() {
        let spec = MeasureSpec::chebyshev(-1.0, 1.0).unwrap();
        let m = closed_form_moments(&spec, 4, 128).unwrap();
        let pi = Float::with_val(128, Constant::Pi);
        let expect = [
            pi.clone(),
            Float::with_val(128, 0),
            Float::with_val(128, &pi / 2u32),
            Float::with_val(128, 0),
            Float::with_val(128, &pi * 3u32) / 8u32,
        ];
        for (a, b) in m.iter().zip(expect.iter()) {
            assert!(Float::with_val(128, a - b).abs() < 1e-35);
        }
    }

    #[test]
    fn legendre_unit_interval() {
        let spec = MeasureSpec::legendre(0.0, 1.0).unwrap();
        let m = closed_form_moments(&spec, 2, 128).unwrap();
        assert!((m[0].to_f64() - 1.0).abs() < 1e-30);
        assert!((m[1].to_f64() - 0.5).abs() < 1e-30);
        assert!((m[2].to_f64() - 1.0 / 3.0).abs() < 1e-30);
    }

    #[test]
    fn shifted_legendre_matches_monomials() {
        let spec = MeasureSpec::legendre(2.0, 3.0).unwrap();
        let m = closed_form_moments(&spec, 20, 256).unwrap();
        for (k, v) in m.iter().enumerate() {
            let exact = (Float::with_val(256, 3).pow((k + 1) as u32)
                - Float::with_val(256, 2).pow((k + 1) as u32))
                / (k + 1) as u32;
            let rel = Float::with_val(256, v - &exact).abs() / &exact;
            assert!(rel < 1e-70, "k={k}");
        }
    }

    #[test]
    fn laguerre_left_half_line() {
        use crate::measures::Interval;
        let spec = MeasureSpec::new(
            Interval::new(f64::NEG_INFINITY, 0.0).unwrap(),
            Weight::Laguerre { beta: 0.0, scale: 1.0 },
            1,
        )
        .unwrap();
        let m = closed_form_moments(&spec, 3, 128).unwrap();
        // int_0^inf (-u)^k e^-u du = (-1)^k k!
        let expect = [1.0, -1.0, 2.0, -6.0];
        for (a, b) in m.iter().zip(expect) {
            assert!((a.to_f64() - b).abs() < 1e-30);
        }
    }
}
