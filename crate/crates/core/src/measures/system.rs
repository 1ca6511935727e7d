use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use super::closed_form::closed_form_moments;
use super::quadrature::{log2_abs, Node, Rule};
use super::{Interval, MeasureSpec, NikishinGenerator};
use crate::error::{Error, Result};
use crate::precision::{parse_decimal, to_decimal, PrecisionPolicy};

/// Default minimum distance between an evaluation point and a support interval.
pub const DEFAULT_EPS_DIST: f64 = 1e-24;

const START_LEVEL: u32 = 3;
const MAX_LEVEL: u32 = 12;
const MAX_REFINE: u32 = 4;

/// Moments of every measure `s_{p,q}` of a Nikishin system, forward (`p <= q`)
/// and reversed (`p > q`).
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub m: usize,
    pub degree: usize,
    pub precision_bits: u32,
    /// `entries[p][q]` holds the moments of `s_{p+1,q+1}`.
    entries: Vec<Vec<Vec<Float>>>,
    /// log2 of the largest relative quadrature estimate per pair.
    pub error_log2: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MomentTableJson {
    m: usize,
    degree: usize,
    precision_bits: u32,
    entries: Vec<Vec<Vec<String>>>,
    error_log2: Vec<Vec<f64>>,
}

impl Serialize for MomentTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MomentTableJson {
            m: self.m,
            degree: self.degree,
            precision_bits: self.precision_bits,
            entries: self
                .entries
                .iter()
                .map(|row| row.iter().map(|v| v.iter().map(to_decimal).collect()).collect())
                .collect(),
            error_log2: self
                .error_log2
                .iter()
                .map(|r| r.iter().map(|e| e.max(-1e9)).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = MomentTableJson::deserialize(d)?;
        let mut entries = Vec::new();
        for row in &j.entries {
            let mut r = Vec::new();
            for v in row {
                let mut vals = Vec::new();
                for s in v {
                    let bits = j.precision_bits;
                    vals.push(parse_decimal(s, bits).map_err(serde::de::Error::custom)?);
                }
                r.push(vals);
            }
            entries.push(r);
        }
        if entries.len() != j.m || entries.iter().any(|r| r.len() != j.m) {
            return Err(serde::de::Error::custom("moment table shape does not match m"));
        }
        Ok(MomentTable {
            m: j.m,
            degree: j.degree,
            precision_bits: j.precision_bits,
            entries,
            error_log2: j.error_log2,
        })
    }
}

impl MomentTable {
    /// Moments of `s_{p,q}` (1-based; forward when `p <= q`).
    pub fn get(&self, p: usize, q: usize) -> &[Float] {
        &self.entries[p - 1][q - 1]
    }

    pub fn forward(&self, j: usize, k: usize) -> &[Float] {
        assert!(j <= k);
        self.get(j, k)
    }

    pub fn reversed(&self, k: usize, j: usize) -> &[Float] {
        assert!(k >= j);
        self.get(k, j)
    }

    /// Table of the system generated by `lambda * sigma_j` for every `j`.
    pub fn scaled(&self, lambda: &Float) -> MomentTable {
        let mut t = self.clone();
        for p in 0..self.m {
            for q in 0..self.m {
                let pw = (p as i64 - q as i64).unsigned_abs() as u32 + 1;
                let f = Float::with_val(self.precision_bits, lambda.clone().pow(pw));
                for v in t.entries[p][q].iter_mut() {
                    *v *= &f;
                }
            }
        }
        t
    }

    pub fn from_entries(m: usize, precision_bits: u32, entries: Vec<Vec<Vec<Float>>>) -> Result<Self> {
        if entries.len() != m || entries.iter().any(|r| r.len() != m) {
            return Err(Error::Config("moment table shape does not match m".into()));
        }
        let degree = entries
            .iter()
            .flat_map(|r| r.iter().map(|v| v.len()))
            .min()
            .unwrap_or(0)
            .saturating_sub(1);
        Ok(MomentTable {
            m,
            degree,
            precision_bits,
            entries,
            error_log2: vec![vec![f64::NEG_INFINITY; m]; m],
        })
    }
}

use rug::ops::Pow;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureReport {
    pub levels: Vec<u32>,
    pub nodes: Vec<usize>,
    pub max_relative_estimate_log2: f64,
}

type RefinedKey = (usize, usize, u32);

/// Discretized Nikishin system: quadrature rules for every generating
/// measure, nested weights for every `s_{p,q}` and the resulting moment table.
pub struct NikishinSystem {
    pub generator: NikishinGenerator,
    pub bits: u32,
    pub eps_dist: f64,
    rules: Vec<Rule>,
    nested: Vec<Vec<Vec<Float>>>,
    inner: Vec<Vec<Vec<Float>>>,
    table: MomentTable,
    report: QuadratureReport,
    refined: Mutex<HashMap<RefinedKey, Arc<(Rule, Vec<Float>)>>>,
    complex_cache: Mutex<HashMap<(usize, usize, String, String), (Complex, Float)>>,
}

impl std::fmt::Debug for NikishinSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NikishinSystem")
            .field("m", &self.m())
            .field("bits", &self.bits)
            .field("degree", &self.table.degree)
            .field("report", &self.report)
            .finish()
    }
}

/// Signed difference `x - y` between nodes of two intervals, computed from
/// the endpoint distances.
fn node_gap(np: &Node, ip: &Interval, nq: &Node, iq: &Interval, bits: u32) -> Float {
    if ip.b <= iq.a {
        let base = Float::with_val(bits, ip.b) - iq.a;
        let mut d = Float::with_val(bits, &np.to_b + &nq.to_a);
        d = base - d;
        d
    } else if iq.b <= ip.a {
        let base = Float::with_val(bits, ip.a) - iq.b;
        base + Float::with_val(bits, &np.to_a + &nq.to_b)
    } else {
        Float::with_val(bits, &np.x - &nq.x)
    }
}

/// `x - node` for a real point outside the interval of the node.
fn point_gap(x: &Float, n: &Node, iv: &Interval, bits: u32) -> Float {
    if iv.b.is_finite() && *x >= iv.b {
        let mut d = Float::with_val(bits, x - iv.b);
        d += &n.to_b;
        d
    } else if iv.a.is_finite() && *x <= iv.a {
        let mut d = Float::with_val(bits, x - iv.a);
        d -= &n.to_a;
        d
    } else {
        Float::with_val(bits, x - &n.x)
    }
}

impl NikishinSystem {
    pub fn build(generator: &NikishinGenerator, degree: usize, policy: &PrecisionPolicy) -> Result<Self> {
        policy.validate()?;
        generator.validate()?;
        Self::build_at(generator, degree, policy.bits)
    }

    pub fn build_at(generator: &NikishinGenerator, degree: usize, bits: u32) -> Result<Self> {
        let m = generator.m();
        let specs = &generator.measures;
        let mut levels = vec![START_LEVEL; m];
        let mut rules: Vec<Option<Rule>> = vec![None; m];
        let target = -(bits as f64) / 2.0;
        let exact: Vec<Option<Vec<Float>>> = specs
            .iter()
            .map(|s| closed_form_moments(s, degree, bits))
            .collect();
        loop {
            for p in 0..m {
                if rules[p].as_ref().map(|r| r.level) != Some(levels[p]) {
                    rules[p] = Some(Rule::build(&specs[p], levels[p], bits, degree)?);
                }
            }
            let rl: Vec<&Rule> = rules.iter().map(|r| r.as_ref().unwrap()).collect();
            let (nested, coarse) = nested_weights(&rl, generator, bits);
            let mut entries = vec![vec![Vec::new(); m]; m];
            let mut err = vec![vec![f64::NEG_INFINITY; m]; m];
            let mut failing = Vec::new();
            for p in 0..m {
                for q in 0..m {
                    let (vals, e) = moments_of(rl[p], &nested[p][q], &coarse[p][q], degree, bits);
                    let mut e = e;
                    if p == q {
                        if let Some(ex) = &exact[p] {
                            for (r, v) in vals.iter().enumerate() {
                                let scale = abs_moment(rl[p], &nested[p][q], r, bits);
                                let d = log2_abs(&Float::with_val(bits, v - &ex[r])) - log2_abs(&scale);
                                e = e.max(d);
                            }
                        }
                    }
                    err[p][q] = e;
                    if e > target {
                        failing.push((p, q));
                    }
                    entries[p][q] = vals;
                }
            }
            if failing.is_empty() {
                for p in 0..m {
                    if let Some(ex) = &exact[p] {
                        entries[p][p] = ex.clone();
                    }
                }
                let inner = inner_values(&rl, &nested, bits);
                let report = QuadratureReport {
                    levels: levels.clone(),
                    nodes: rl.iter().map(|r| r.len()).collect(),
                    max_relative_estimate_log2: err
                        .iter()
                        .flatten()
                        .cloned()
                        .fold(f64::NEG_INFINITY, f64::max),
                };
                let table = MomentTable {
                    m,
                    degree,
                    precision_bits: bits,
                    entries,
                    error_log2: err,
                };
                return Ok(NikishinSystem {
                    generator: generator.clone(),
                    bits,
                    eps_dist: DEFAULT_EPS_DIST,
                    rules: rules.into_iter().map(|r| r.unwrap()).collect(),
                    nested,
                    inner,
                    table,
                    report,
                    refined: Mutex::new(HashMap::new()),
                    complex_cache: Mutex::new(HashMap::new()),
                });
            }
            let mut bump = vec![false; m];
            for (p, q) in failing {
                for t in p.min(q)..=p.max(q) {
                    bump[t] = true;
                }
            }
            for p in 0..m {
                if bump[p] {
                    if levels[p] >= MAX_LEVEL {
                        return Err(Error::Quadrature(format!(
                            "moments of measure {} did not reach 2^{target} relative accuracy at level {MAX_LEVEL}",
                            p + 1
                        )));
                    }
                    levels[p] += 1;
                }
            }
        }
    }

    pub fn m(&self) -> usize {
        self.generator.m()
    }

    pub fn table(&self) -> &MomentTable {
        &self.table
    }

    pub fn report(&self) -> &QuadratureReport {
        &self.report
    }

    pub fn degree(&self) -> usize {
        self.table.degree
    }

    /// Quadrature rule of `sigma_p` (1-based).
    pub fn rule(&self, p: usize) -> &Rule {
        &self.rules[p - 1]
    }

    /// Weights of `s_{p,q}` on the nodes of `sigma_p`.
    pub fn nested_weights(&self, p: usize, q: usize) -> &[Float] {
        &self.nested[p - 1][q - 1]
    }

    /// Values at the nodes of `sigma_p` of the transform that turns `sigma_p`
    /// into `s_{p,q}` (identically one when `p == q`).
    pub fn inner_values(&self, p: usize, q: usize) -> &[Float] {
        &self.inner[p - 1][q - 1]
    }

    pub fn interval(&self, p: usize) -> Interval {
        self.generator.interval(p)
    }

    pub fn with_eps_dist(mut self, eps: f64) -> Self {
        self.eps_dist = eps;
        self
    }

    fn check_domain(&self, p: usize, re: f64, im: f64, label: impl Fn() -> String) -> Result<()> {
        let iv = self.interval(p);
        let d = iv.distance(re, im);
        if d < self.eps_dist {
            return Err(Error::Domain {
                point: label(),
                a: iv.a,
                b: iv.b,
                distance: d,
            });
        }
        Ok(())
    }

    fn refined_rule(&self, p: usize, q: usize, level: u32) -> Result<Arc<(Rule, Vec<Float>)>> {
        let key = (p, q, level);
        if let Some(r) = self.refined.lock().unwrap().get(&key) {
            return Ok(r.clone());
        }
        let bits = self.bits;
        let spec: &MeasureSpec = &self.generator.measures[p - 1];
        let rule = Rule::build(spec, level, bits, 0)?;
        let weights = if p == q {
            rule.nodes.iter().map(|n| n.weight.clone()).collect()
        } else {
            let pp = if q > p { p + 1 } else { p - 1 };
            let ip = self.interval(p);
            let iq = self.interval(pp);
            let inner_rule = self.rule(pp);
            let inner_w = self.nested_weights(pp, q);
            rule.nodes
                .iter()
                .map(|n| {
                    let mut s = Float::with_val(bits, 0);
                    for (r, nr) in inner_rule.nodes.iter().enumerate() {
                        let g = node_gap(n, &ip, nr, &iq, bits);
                        s += Float::with_val(bits, &inner_w[r] / &g);
                    }
                    s * &n.weight
                })
                .collect()
        };
        let arc = Arc::new((rule, weights));
        self.refined.lock().unwrap().insert(key, arc.clone());
        Ok(arc)
    }

    /// `\hat s_{p,q}(x)` for real `x` off the support of `sigma_p`, with an
    /// error estimate. The rule is refined until the estimate is below
    /// `2^{-bits/2}` of the absolute sum, or the refinement budget runs out.
    pub fn transform_real(&self, p: usize, q: usize, x: &Float) -> Result<(Float, Float)> {
        self.check_domain(p, x.to_f64(), 0.0, || to_decimal(x))?;
        let bits = self.bits;
        let iv = self.interval(p);
        let eval = |rule: &Rule, w: &[Float]| -> (Float, Float, Float) {
            let mut fine = Float::with_val(bits, 0);
            let mut coarse = Float::with_val(bits, 0);
            let mut abs = Float::with_val(bits, 0);
            for (i, n) in rule.nodes.iter().enumerate() {
                let g = point_gap(x, n, &iv, bits);
                let t = Float::with_val(bits, &w[i] / &g);
                abs += Float::with_val(bits, t.abs_ref());
                if n.index % 2 == 0 {
                    coarse += Float::with_val(bits, &t * 2u32);
                }
                fine += t;
            }
            let est = Float::with_val(bits, &fine - &coarse).abs();
            (fine, est, abs)
        };
        let tol = -(bits as f64) / 2.0;
        let base = &self.rules[p - 1];
        let (mut v, mut e, a) = eval(base, &self.nested[p - 1][q - 1]);
        let mut level = base.level;
        while log2_abs(&e) - log2_abs(&a) > tol && level < base.level + MAX_REFINE {
            level += 1;
            let r = self.refined_rule(p, q, level)?;
            let (v2, e2, _) = eval(&r.0, &r.1);
            v = v2;
            e = e2;
        }
        Ok((v, e))
    }

    /// `\hat s_{p,q}(z)` for complex `z` off the support of `sigma_p`.
    pub fn cauchy_transform(&self, p: usize, q: usize, z: &Complex) -> Result<(Complex, Float)> {
        if p == 0 || q == 0 || p > self.m() || q > self.m() {
            return Err(Error::Argument(format!("measure pair ({p}, {q}) out of range")));
        }
        let bits = self.bits;
        let (zr, zi) = (Float::with_val(bits, z.real()), Float::with_val(bits, z.imag()));
        if zi.is_zero() {
            let (v, e) = self.transform_real(p, q, &zr)?;
            return Ok((Complex::with_val(bits, (v, 0)), e));
        }
        self.check_domain(p, zr.to_f64(), zi.to_f64(), || format!("{z}"))?;
        let key = (p, q, zr.to_string_radix(16, None), zi.to_string_radix(16, None));
        if let Some(v) = self.complex_cache.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let iv = self.interval(p);
        let zi2 = Float::with_val(bits, zi.square_ref());
        let eval = |rule: &Rule, w: &[Float]| {
            let mut fr = Float::with_val(bits, 0);
            let mut fi = Float::with_val(bits, 0);
            let mut cr = Float::with_val(bits, 0);
            let mut ci = Float::with_val(bits, 0);
            let mut abs = Float::with_val(bits, 0);
            for (i, n) in rule.nodes.iter().enumerate() {
                let d = point_gap(&zr, n, &iv, bits);
                let den = Float::with_val(bits, d.square_ref()) + &zi2;
                let s = Float::with_val(bits, &w[i] / &den);
                let tr = Float::with_val(bits, &s * &d);
                let ti = -Float::with_val(bits, &s * &zi);
                abs += Float::with_val(bits, w[i].abs_ref()) / den.sqrt();
                if n.index % 2 == 0 {
                    cr += Float::with_val(bits, &tr * 2u32);
                    ci += Float::with_val(bits, &ti * 2u32);
                }
                fr += tr;
                fi += ti;
            }
            let er = Float::with_val(bits, &fr - &cr);
            let ei = Float::with_val(bits, &fi - &ci);
            let est = Float::with_val(bits, er.hypot(&ei));
            (fr, fi, est, abs)
        };
        let tol = -(bits as f64) / 2.0;
        let base = &self.rules[p - 1];
        let (mut vr, mut vi, mut e, a) = eval(base, &self.nested[p - 1][q - 1]);
        let mut level = base.level;
        while log2_abs(&e) - log2_abs(&a) > tol && level < base.level + MAX_REFINE {
            level += 1;
            let r = self.refined_rule(p, q, level)?;
            let (r2, i2, e2, _) = eval(&r.0, &r.1);
            vr = r2;
            vi = i2;
            e = e2;
        }
        let out = (Complex::with_val(bits, (vr, vi)), e);
        self.complex_cache.lock().unwrap().insert(key, out.clone());
        Ok(out)
    }

    /// Integral of `f(i)` against `s_{p,q}` on the nodes of `sigma_p`, with the
    /// coarse-rule error estimate.
    pub fn integrate<F: FnMut(usize) -> Float>(&self, p: usize, q: usize, mut f: F) -> (Float, Float) {
        let bits = self.bits;
        let rule = self.rule(p);
        let w = self.nested_weights(p, q);
        let mut fine = Float::with_val(bits, 0);
        let mut coarse = Float::with_val(bits, 0);
        for (i, n) in rule.nodes.iter().enumerate() {
            let t = Float::with_val(bits, f(i) * &w[i]);
            if n.index % 2 == 0 {
                coarse += Float::with_val(bits, &t * 2u32);
            }
            fine += t;
        }
        let est = Float::with_val(bits, &fine - &coarse).abs();
        (fine, est)
    }
}

fn nested_weights(
    rules: &[&Rule],
    generator: &NikishinGenerator,
    bits: u32,
) -> (Vec<Vec<Vec<Float>>>, Vec<Vec<Vec<Float>>>) {
    let m = rules.len();
    let mut fine = vec![vec![Vec::new(); m]; m];
    let mut coarse = vec![vec![Vec::new(); m]; m];
    for p in 0..m {
        fine[p][p] = rules[p].nodes.iter().map(|n| n.weight.clone()).collect();
        coarse[p][p] = rules[p]
            .nodes
            .iter()
            .map(|n| {
                if n.index % 2 == 0 {
                    Float::with_val(bits, &n.weight * 2u32)
                } else {
                    Float::with_val(bits, 0)
                }
            })
            .collect();
    }
    for span in 1..m {
        for p in 0..m {
            for q in [p + span, p.wrapping_sub(span)] {
                if q >= m {
                    continue;
                }
                let pp = if q > p { p + 1 } else { p - 1 };
                let ip = generator.measures[p].interval;
                let iq = generator.measures[pp].interval;
                let mut wf = Vec::with_capacity(rules[p].len());
                let mut wc = Vec::with_capacity(rules[p].len());
                for n in &rules[p].nodes {
                    let mut sf = Float::with_val(bits, 0);
                    let mut sc = Float::with_val(bits, 0);
                    let even = n.index % 2 == 0;
                    for (r, nr) in rules[pp].nodes.iter().enumerate() {
                        let g = node_gap(n, &ip, nr, &iq, bits);
                        let inv = Float::with_val(bits, g.recip_ref());
                        sf += Float::with_val(bits, &fine[pp][q][r] * &inv);
                        if even && nr.index % 2 == 0 {
                            sc += Float::with_val(bits, &coarse[pp][q][r] * &inv);
                        }
                    }
                    wf.push(sf * &n.weight);
                    if even {
                        wc.push(sc * Float::with_val(bits, &n.weight * 2u32));
                    } else {
                        wc.push(Float::with_val(bits, 0));
                    }
                }
                fine[p][q] = wf;
                coarse[p][q] = wc;
            }
        }
    }
    (fine, coarse)
}

fn inner_values(rules: &[&Rule], nested: &[Vec<Vec<Float>>], bits: u32) -> Vec<Vec<Vec<Float>>> {
    let m = rules.len();
    let mut out = vec![vec![Vec::new(); m]; m];
    for p in 0..m {
        for q in 0..m {
            out[p][q] = rules[p]
                .nodes
                .iter()
                .zip(nested[p][q].iter())
                .map(|(n, w)| {
                    if p == q || n.weight.is_zero() {
                        Float::with_val(bits, if p == q { 1 } else { 0 })
                    } else {
                        Float::with_val(bits, w / &n.weight)
                    }
                })
                .collect();
        }
    }
    out
}

fn moments_of(rule: &Rule, fine: &[Float], coarse: &[Float], degree: usize, bits: u32) -> (Vec<Float>, f64) {
    let mut vals = vec![Float::with_val(bits, 0); degree + 1];
    let mut cvals = vec![Float::with_val(bits, 0); degree + 1];
    let mut abs = vec![Float::with_val(bits, 0); degree + 1];
    for (i, n) in rule.nodes.iter().enumerate() {
        let mut t = fine[i].clone();
        let mut c = coarse[i].clone();
        for r in 0..=degree {
            if r > 0 {
                t *= &n.x;
                c *= &n.x;
            }
            abs[r] += Float::with_val(bits, t.abs_ref());
            vals[r] += &t;
            cvals[r] += &c;
        }
    }
    let mut worst = f64::NEG_INFINITY;
    for r in 0..=degree {
        let d = Float::with_val(bits, &vals[r] - &cvals[r]);
        let e = log2_abs(&d) - log2_abs(&abs[r]);
        if e.is_finite() || e == f64::INFINITY {
            worst = worst.max(e);
        }
    }
    (vals, worst)
}

fn abs_moment(rule: &Rule, w: &[Float], r: usize, bits: u32) -> Float {
    let mut s = Float::with_val(bits, 0);
    for (i, n) in rule.nodes.iter().enumerate() {
        let mut t = Float::with_val(bits, w[i].abs_ref());
        let ax = Float::with_val(bits, n.x.abs_ref());
        t *= ax.pow(r as u32);
        s += t;
    }
    s
}

/// Moments `c_0..=c_degree` of a single measure.
pub fn moments(spec: &MeasureSpec, degree: usize, policy: &PrecisionPolicy) -> Result<Vec<Float>> {
    policy.validate()?;
    spec.validate()?;
    if let Some(v) = closed_form_moments(spec, degree, policy.bits) {
        return Ok(v);
    }
    let g = NikishinGenerator::new(vec![spec.clone()])?;
    let sys = NikishinSystem::build_at(&g, degree, policy.bits)?;
    Ok(sys.table.get(1, 1).to_vec())
}

/// Moment table of the Nikishin system generated by `gen`.
pub fn nikishin_moments(gen: &NikishinGenerator, degree: usize, policy: &PrecisionPolicy) -> Result<MomentTable> {
    Ok(NikishinSystem::build(gen, degree, policy)?.table)
}
