//! Real zeros of forms and polynomials, interlacing and orthogonality checks.

use std::collections::HashMap;

use rug::ops::Pow;
use rug::{Complex, Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::to_rational;
use crate::hermite_pade::HPSolution;
use crate::measures::Interval;
use crate::poly::Polynomial;
use crate::precision::{decimal, log2_abs};

const MAX_DOUBLINGS: u32 = 6;

/// Sorted simple real roots with isolating enclosures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootList {
    #[serde(with = "decimal::vec")]
    pub roots: Vec<Float>,
    pub enclosures: Vec<Enclosure>,
    pub interval: Interval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Enclosure {
    #[serde(with = "decimal")]
    pub lo: Float,
    #[serde(with = "decimal")]
    pub hi: Float,
}

impl RootList {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Root list without enclosure information (width-zero enclosures).
    pub fn from_points(roots: Vec<Float>, interval: Interval) -> Self {
        let mut roots = roots;
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let enclosures = roots
            .iter()
            .map(|r| Enclosure {
                lo: r.clone(),
                hi: r.clone(),
            })
            .collect();
        RootList {
            roots,
            enclosures,
            interval,
        }
    }
}

/// Monic polynomial given by its roots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonicFromRoots {
    pub roots: RootList,
    pub coefficients: Polynomial,
}

impl MonicFromRoots {
    pub fn new(roots: RootList, bits: u32) -> Self {
        let coefficients = Polynomial::from_roots(&roots.roots, bits);
        MonicFromRoots { roots, coefficients }
    }

    /// The constant polynomial one.
    pub fn one(bits: u32, interval: Interval) -> Self {
        MonicFromRoots {
            roots: RootList {
                roots: vec![],
                enclosures: vec![],
                interval,
            },
            coefficients: Polynomial::one(bits),
        }
    }

    pub fn degree(&self) -> usize {
        self.roots.len()
    }

    /// Product form evaluation.
    pub fn eval(&self, x: &Float) -> Float {
        let bits = self.coefficients.bits().max(x.prec());
        let mut p = Float::with_val(bits, 1);
        for r in &self.roots.roots {
            p *= Float::with_val(bits, x - r);
        }
        p
    }

    pub fn eval_complex(&self, z: &Complex) -> Complex {
        let bits = self.coefficients.bits().max(z.prec().0);
        let mut p = Complex::with_val(bits, 1);
        for r in &self.roots.roots {
            p *= Complex::with_val(bits, z - r);
        }
        p
    }
}

/// Sign of a sample, `0` when the value is within its noise bound.
fn certified_sign(v: &Float, noise: &Float) -> i32 {
    if v.is_zero() || Float::with_val(v.prec(), v.abs_ref()) <= *noise {
        0
    } else if v.is_sign_negative() {
        -1
    } else {
        1
    }
}

/// Evaluator returning a value and a bound on its error.
pub trait SignedEval {
    fn eval(&self, x: &Float) -> Result<(Float, Float)>;
}

impl<F: Fn(&Float) -> Result<(Float, Float)>> SignedEval for F {
    fn eval(&self, x: &Float) -> Result<(Float, Float)> {
        self(x)
    }
}

struct Sampler<'a, E: SignedEval> {
    f: &'a E,
    iv: Interval,
    bits: u32,
    cache: HashMap<(u64, u64), (Float, i32)>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl<'a, E: SignedEval> Sampler<'a, E> {
    /// Point `c - r cos(pi i / n)`.
    fn point(&self, i: u64, n: u64) -> Float {
        let bits = self.bits;
        let c = Float::with_val(bits, self.iv.a) + self.iv.b;
        let c = c / 2u32;
        let r = Float::with_val(bits, self.iv.b) - self.iv.a;
        let r = r / 2u32;
        let mut t = Float::with_val(bits, rug::float::Constant::Pi);
        t *= i;
        t /= n;
        let cs = t.cos();
        c - r * cs
    }

    fn sample(&mut self, i: u64, n: u64) -> Result<(Float, i32)> {
        let g = gcd(i, n);
        let key = (i / g, n / g);
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let x = self.point(i, n);
        let (v, noise) = self.f.eval(&x)?;
        let s = certified_sign(&v, &noise);
        self.cache.insert(key, (x.clone(), s));
        Ok((x, s))
    }

    /// Brackets between consecutive certified samples of opposite sign.
    fn brackets(&mut self, n: u64) -> Result<Vec<(Float, Float, i32)>> {
        let mut out = Vec::new();
        let mut prev: Option<(Float, i32)> = None;
        for i in 1..n {
            let (x, s) = self.sample(i, n)?;
            if s == 0 {
                continue;
            }
            if let Some((px, ps)) = &prev {
                if *ps != s {
                    out.push((px.clone(), x.clone(), *ps));
                }
            }
            prev = Some((x, s));
        }
        Ok(out)
    }
}

/// Illinois iteration on a certified bracket, guarded by bisection.
fn refine<E: SignedEval>(f: &E, mut lo: Float, mut hi: Float, sign_lo: i32, bits: u32) -> Result<(Float, Enclosure)> {
    let tol_exp = -((bits / 3) as i32);
    let (mut flo, _) = f.eval(&lo)?;
    let (mut fhi, _) = f.eval(&hi)?;
    let mut side = 0i32;
    let mut last_width = Float::with_val(bits, &hi - &lo);
    for it in 0..4 * bits {
        let width = Float::with_val(bits, &hi - &lo);
        let mag = Float::with_val(bits, lo.abs_ref()).max(&Float::with_val(bits, hi.abs_ref())).max(&Float::with_val(bits, 1));
        if log2_abs(&width) <= tol_exp as f64 + log2_abs(&mag) {
            break;
        }
        let bisect = it % 3 == 2 && width > Float::with_val(bits, &last_width / 2u32);
        if it % 3 == 2 {
            last_width = width.clone();
        }
        let mut x = if bisect || flo.is_zero() || fhi.is_zero() {
            Float::with_val(bits, &lo + &hi) / 2u32
        } else {
            // secant point lo - flo (hi - lo)/(fhi - flo)
            let den = Float::with_val(bits, &fhi - &flo);
            let step = Float::with_val(bits, &flo * &width) / den;
            Float::with_val(bits, &lo - &step)
        };
        if !(x > lo && x < hi) {
            x = Float::with_val(bits, &lo + &hi) / 2u32;
        }
        let (fx, noise) = f.eval(&x)?;
        let s = certified_sign(&fx, &noise);
        if s == 0 {
            // the sign can no longer be resolved: grow a certified bracket around x
            let mut d = Float::with_val(bits, Float::i_exp(1, tol_exp)) * &mag;
            loop {
                let a = Float::with_val(bits, &x - &d);
                let b = Float::with_val(bits, &x + &d);
                let (a, sa) = if a <= lo {
                    (lo.clone(), sign_lo)
                } else {
                    let (fa, na) = f.eval(&a)?;
                    (a, certified_sign(&fa, &na))
                };
                let (b, sb) = if b >= hi {
                    (hi.clone(), -sign_lo)
                } else {
                    let (fb, nb) = f.eval(&b)?;
                    (b, certified_sign(&fb, &nb))
                };
                if (sa == sign_lo && sb == -sign_lo) || (a == lo && b == hi) {
                    return Ok((x, Enclosure { lo: a, hi: b }));
                }
                d <<= 1;
            }
        }
        if s == sign_lo {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi /= 2u32;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo /= 2u32;
            }
            side = 1;
        }
    }
    let den = Float::with_val(bits, &fhi - &flo);
    let mut x = if den.is_zero() {
        Float::with_val(bits, &lo + &hi) / 2u32
    } else {
        let w = Float::with_val(bits, &hi - &lo);
        Float::with_val(bits, &lo - Float::with_val(bits, &flo * &w) / den)
    };
    if !(x >= lo && x <= hi) {
        x = Float::with_val(bits, &lo + &hi) / 2u32;
    }
    Ok((x, Enclosure { lo, hi }))
}

/// Locates exactly `expected` sign changes of `f` inside the bounded
/// interval by sampling on a Chebyshev-distributed grid that is doubled on
/// a shortfall, then refines every bracket.
pub fn isolate_roots<E: SignedEval>(f: &E, iv: Interval, expected: usize, bits: u32) -> Result<RootList> {
    if !iv.is_bounded() {
        return Err(Error::InvalidInterval {
            a: iv.a,
            b: iv.b,
            reason: "root isolation requires a bounded interval".into(),
        });
    }
    let mut sampler = Sampler {
        f,
        iv,
        bits,
        cache: HashMap::new(),
    };
    let mut n = (8 * expected as u64).max(16);
    let mut found = 0;
    for _ in 0..=MAX_DOUBLINGS {
        let br = sampler.brackets(n)?;
        found = br.len();
        if found == expected {
            let mut roots = Vec::with_capacity(expected);
            let mut enclosures = Vec::with_capacity(expected);
            for (lo, hi, s) in br {
                let (x, e) = refine(f, lo, hi, s, bits)?;
                roots.push(x);
                enclosures.push(e);
            }
            return Ok(RootList {
                roots,
                enclosures,
                interval: iv,
            });
        }
        if found > expected {
            break;
        }
        n *= 2;
    }
    Err(Error::RootCount {
        found,
        expected,
        a: iv.a,
        b: iv.b,
    })
}

/// Zeros of `A_{n,j}` in the interior of `Delta_j`, `1 <= j <= m`, as the
/// monic polynomial `Q_{n,j}`.
pub fn form_zeros(sol: &HPSolution, j: usize) -> Result<MonicFromRoots> {
    let m = sol.m();
    if j == 0 || j > m {
        return Err(Error::Argument(format!("level {j} must lie in 1..={m}")));
    }
    let sys = sol.system()?;
    let iv = sys.interval(j);
    let bits = sol.precision_bits;
    let expected = sol.index.eta(j);
    let f = |x: &Float| sol.evaluate_form_real(j, x);
    let roots = isolate_roots(&f, iv, expected, bits)?;
    Ok(MonicFromRoots::new(roots, bits))
}

/// Zeros of a polynomial inside a bounded interval.
pub fn polynomial_zeros(p: &Polynomial, iv: Interval, expected: usize) -> Result<RootList> {
    let bits = p.bits();
    let f = |x: &Float| -> Result<(Float, Float)> {
        let v = p.eval(x);
        let mut noise = p.eval_abs(x);
        noise <<= 8 - bits as i32;
        Ok((v, noise))
    };
    isolate_roots(&f, iv, expected, bits)
}

/// Lower bound on the number of sign changes of `f` in the interval, from
/// sampling grids of up to `budget` points.
pub fn sign_change_count<E: SignedEval>(f: &E, iv: Interval, budget: usize, bits: u32) -> Result<usize> {
    let mut sampler = Sampler {
        f,
        iv,
        bits,
        cache: HashMap::new(),
    };
    let mut n = 16u64;
    let mut best = 0;
    while n as usize <= budget.max(16) {
        best = best.max(sampler.brackets(n)?.len());
        n *= 2;
    }
    Ok(best)
}

pub fn polynomial_sign_changes(p: &Polynomial, iv: Interval, budget: usize) -> Result<usize> {
    let bits = p.bits();
    let f = |x: &Float| -> Result<(Float, Float)> {
        let v = p.eval(x);
        let mut noise = p.eval_abs(x);
        noise <<= 8 - bits as i32;
        Ok((v, noise))
    };
    sign_change_count(&f, iv, budget, bits)
}

/// Outcome of an interlacing test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Interlacing {
    pub interlaced: bool,
    /// First offending gap `(x, y)` of the first list, or pair of
    /// neighbouring points of the second list outside its hull.
    pub witness: Option<(String, String)>,
}

/// Strict alternation of two sorted simple root sets.
pub fn interlace_check(r1: &RootList, r2: &RootList) -> Result<Interlacing> {
    for e1 in &r1.enclosures {
        for e2 in &r2.enclosures {
            if e1.lo <= e2.hi && e2.lo <= e1.hi {
                return Err(Error::Undecidable(format!(
                    "enclosures [{}, {}] and [{}, {}] overlap",
                    e1.lo.to_f64(),
                    e1.hi.to_f64(),
                    e2.lo.to_f64(),
                    e2.hi.to_f64()
                )));
            }
        }
    }
    let a = &r1.roots;
    let b = &r2.roots;
    let mut merged: Vec<(&Float, u8)> = a.iter().map(|x| (x, 0u8)).chain(b.iter().map(|x| (x, 1u8))).collect();
    merged.sort_by(|x, y| x.0.partial_cmp(y.0).unwrap());
    let alternates = merged.windows(2).all(|w| w[0].1 != w[1].1 && w[0].0 != w[1].0);
    if alternates {
        return Ok(Interlacing {
            interlaced: true,
            witness: None,
        });
    }
    let fmt = |x: &Float| x.to_string_radix(10, Some(20));
    let count_in = |lo: &Float, hi: &Float| b.iter().filter(|x| *x > lo && *x < hi).count();
    for w in a.windows(2) {
        if count_in(&w[0], &w[1]) >= 2 {
            return Ok(Interlacing {
                interlaced: false,
                witness: Some((fmt(&w[0]), fmt(&w[1]))),
            });
        }
    }
    for w in a.windows(2) {
        if count_in(&w[0], &w[1]) == 0 {
            return Ok(Interlacing {
                interlaced: false,
                witness: Some((fmt(&w[0]), fmt(&w[1]))),
            });
        }
    }
    let pair = merged
        .windows(2)
        .find(|w| w[0].1 == w[1].1 || w[0].0 == w[1].0)
        .map(|w| (fmt(w[0].0), fmt(w[1].0)));
    Ok(Interlacing {
        interlaced: false,
        witness: pair,
    })
}

/// One orthogonality integral with its error budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrthogonalityResidual {
    pub level: usize,
    pub nu: usize,
    #[serde(with = "decimal")]
    pub value: Float,
    #[serde(with = "decimal")]
    pub quadrature_error: Float,
    /// Integral of the modulus of the integrand.
    #[serde(with = "decimal")]
    pub absolute_scale: Float,
    /// Integral of the integrand with every coefficient replaced by its
    /// modulus, the scale of rounding errors in the solved coefficients.
    #[serde(with = "decimal")]
    pub coefficient_scale: Float,
}

/// `int x^nu Q_{n,j+1} H_{n,j+1} / (Q_{n,j} Q_{n,j+2}) dsigma_{j+1}` for
/// `0 <= j < m`. The integrand is evaluated as `x^nu A_{n,j+1} / Q_{n,j}`,
/// which is the same function without the removable singularities.
pub fn orthogonality_residual(sol: &HPSolution, q_j: &MonicFromRoots, j: usize, nu: usize) -> Result<OrthogonalityResidual> {
    let m = sol.m();
    if j >= m {
        return Err(Error::Argument(format!("level {j} must be below m = {m}")));
    }
    let sys = sol.system()?;
    let bits = sol.precision_bits;
    let p = j + 1;
    let rule = sys.rule(p);
    let mut vals = Vec::with_capacity(rule.len());
    let mut coef = Vec::with_capacity(rule.len());
    for (i, node) in rule.nodes.iter().enumerate() {
        let x = &node.x;
        let q = q_j.eval(x);
        let xn = Float::with_val(bits, x.pow(nu as u32));
        let mut v = sol.form_at_node(p, i)?;
        v /= &q;
        v *= &xn;
        vals.push(v);
        let mut c = sol.poly(p).eval_abs(x);
        for k in p + 1..=m {
            let t = Float::with_val(bits, sys.inner_values(p, k)[i].abs_ref());
            c += sol.poly(k).eval_abs(x) * t;
        }
        c *= xn.abs();
        c /= q.abs();
        coef.push(c);
    }
    let unsigned = |i: usize, v: Float| {
        if rule.nodes[i].weight.is_sign_negative() {
            -v
        } else {
            v
        }
    };
    let (value, quadrature_error) = sys.integrate(p, p, |i| vals[i].clone());
    let (absolute_scale, _) = sys.integrate(p, p, |i| unsigned(i, Float::with_val(bits, vals[i].abs_ref())));
    let (coefficient_scale, _) = sys.integrate(p, p, |i| unsigned(i, coef[i].clone()));
    Ok(OrthogonalityResidual {
        level: j,
        nu,
        value,
        quadrature_error,
        absolute_scale,
        coefficient_scale,
    })
}

impl OrthogonalityResidual {
    /// `10 (quadrature error + 2^-guard_bits coefficient scale)`.
    pub fn tolerance(&self, guard_bits: u32) -> Float {
        let mut t = self.coefficient_scale.clone();
        t >>= guard_bits;
        t += &self.quadrature_error;
        t * 10u32
    }

    pub fn passes(&self, guard_bits: u32) -> bool {
        Float::with_val(self.value.prec(), self.value.abs_ref()) <= self.tolerance(guard_bits)
    }
}

/// Orthogonality integral of an explicit polynomial against `sigma_p` with a
/// node-wise weight.
pub fn weighted_integral<W: Fn(usize) -> Float>(
    sol: &HPSolution,
    p: usize,
    poly: &Polynomial,
    weight: W,
    nu: usize,
) -> Result<(Float, Float)> {
    let sys = sol.system()?;
    let rule = sys.rule(p);
    let bits = sol.precision_bits;
    Ok(sys.integrate(p, p, |i| {
        let x = &rule.nodes[i].x;
        let mut v = poly.eval(x);
        v *= weight(i);
        v *= Float::with_val(bits, x.pow(nu as u32));
        v
    }))
}

fn rat_poly(p: &Polynomial) -> Vec<Rational> {
    let mut c: Vec<Rational> = p.coefficients.iter().map(to_rational).collect();
    while c.len() > 1 && *c.last().unwrap() == 0 {
        c.pop();
    }
    c
}

fn rat_eval(p: &[Rational], x: &Rational) -> Rational {
    let mut acc = Rational::new();
    for c in p.iter().rev() {
        acc *= x;
        acc += c;
    }
    acc
}

fn rat_rem(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lead = b[db].clone();
    while r.len() > db && !r.is_empty() {
        let k = r.len() - 1;
        let f = Rational::from(&r[k] / &lead);
        for i in 0..=db {
            let t = Rational::from(&f * &b[i]);
            r[k - db + i] -= t;
        }
        r.pop();
        while r.len() > 1 && *r.last().unwrap() == 0 {
            r.pop();
        }
        if r.len() == 1 && r[0] == 0 {
            break;
        }
    }
    if r.is_empty() {
        r.push(Rational::new());
    }
    r
}

/// Number of distinct real roots in `(a, b]` by an exact Sturm sequence on
/// the rational values of the coefficients.
pub fn sturm_count(p: &Polynomial, a: f64, b: f64) -> usize {
    let p0 = rat_poly(p);
    if p0.len() <= 1 {
        return 0;
    }
    let p1: Vec<Rational> = p0
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| Rational::from(c * i as u32))
        .collect();
    let mut seq = vec![p0, p1];
    loop {
        let n = seq.len();
        let r = rat_rem(&seq[n - 2], &seq[n - 1]);
        if r.len() == 1 && r[0] == 0 {
            break;
        }
        seq.push(r.into_iter().map(|c| -c).collect());
        if seq.last().unwrap().len() == 1 {
            break;
        }
    }
    let var = |x: f64| {
        let xr = Rational::from_f64(x).unwrap();
        let signs: Vec<i32> = seq
            .iter()
            .map(|q| rat_eval(q, &xr).cmp0() as i32)
            .filter(|s| *s != 0)
            .collect();
        signs.windows(2).filter(|w| w[0] != w[1]).count()
    };
    var(a).saturating_sub(var(b))
}

/// `num(z) / den(z)` with factors paired to avoid overflow.
pub fn ratio_of_monic(num: &MonicFromRoots, den: &MonicFromRoots, z: &Complex) -> Complex {
    let bits = num.coefficients.bits();
    let mut r = Complex::with_val(bits, 1);
    let (a, b) = (&num.roots.roots, &den.roots.roots);
    let k = a.len().min(b.len());
    for i in 0..k {
        r *= Complex::with_val(bits, z - &a[i]);
        r /= Complex::with_val(bits, z - &b[i]);
    }
    for x in &a[k..] {
        r *= Complex::with_val(bits, z - x);
    }
    for x in &b[k..] {
        r /= Complex::with_val(bits, z - x);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rl(v: &[f64]) -> RootList {
        RootList::from_points(v.iter().map(|x| Float::with_val(64, *x)).collect(), Interval { a: 0.0, b: 10.0 })
    }

    #[test]
    fn interlacing_examples() {
        assert!(interlace_check(&rl(&[1.0, 3.0, 5.0]), &rl(&[2.0, 4.0])).unwrap().interlaced);
        let r = interlace_check(&rl(&[1.0, 2.0, 5.0]), &rl(&[3.0, 4.0])).unwrap();
        assert!(!r.interlaced);
        let (x, y) = r.witness.unwrap();
        assert_eq!((x.parse::<f64>().unwrap(), y.parse::<f64>().unwrap()), (2.0, 5.0));
    }

    #[test]
    fn overlapping_enclosures_are_undecidable() {
        let a = rl(&[1.0]);
        let b = rl(&[1.0]);
        assert!(matches!(interlace_check(&a, &b), Err(Error::Undecidable(_))));
    }

    #[test]
    fn sturm_counts_chebyshev_roots() {
        // 8 x^3 - 6 x: roots 0, +-sqrt(3)/2
        let p = Polynomial::new(vec![0.0, -6.0, 0.0, 8.0].into_iter().map(|v| Float::with_val(64, v)).collect());
        assert_eq!(sturm_count(&p, -1.0, 1.0), 3);
        assert_eq!(sturm_count(&p, 0.1, 1.0), 1);
    }

    #[test]
    fn polynomial_roots_refined() {
        let p = Polynomial::from_roots(&[Float::with_val(256, 0.25), Float::with_val(256, -0.5)], 256);
        let r = polynomial_zeros(&p, Interval { a: -1.0, b: 1.0 }, 2).unwrap();
        assert!((r.roots[0].to_f64() + 0.5).abs() < 1e-24);
        assert!((r.roots[1].to_f64() - 0.25).abs() < 1e-24);
    }

    #[test]
    fn roots_on_sampling_nodes_are_refined() {
        // Chebyshev nodes coincide with points of the sampling grid
        let bits = 256;
        let pi = Float::with_val(bits, rug::float::Constant::Pi);
        for n in [15u32, 16] {
            let roots: Vec<Float> = (1..=n)
                .map(|k| (Float::with_val(bits, &pi * (2 * k - 1)) / (2 * n)).cos())
                .collect();
            let p = Polynomial::from_roots(&roots, bits);
            let r = polynomial_zeros(&p, Interval { a: -1.0, b: 1.0 }, n as usize).unwrap();
            for e in &r.enclosures {
                assert!(Float::with_val(bits, &e.hi - &e.lo) < 1e-20);
            }
        }
    }

    #[test]
    fn constant_has_no_sign_changes() {
        let p = Polynomial::new(vec![Float::with_val(64, 3)]);
        assert_eq!(polynomial_sign_changes(&p, Interval { a: -1.0, b: 1.0 }, 256).unwrap(), 0);
    }
}
