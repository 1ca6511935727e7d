//! Conformal map of the genus-zero surface glued from `m + 1` copies of the
//! sphere along the intervals, its branches and the products `F_k`.
//!
//! The map is stored through its inverse, the real rational covering
//!
//! ```text
//! R(w) = gamma w + delta + rho_0 / w + sum_k rho_k / (w - w_k)
//! ```
//!
//! whose poles are the images of the points at infinity of the sheets.
//! The simple zero of `psi` sits at infinity on sheet `l - 1` (pole of `R` at
//! `w = 0`) and its simple pole at infinity on sheet `m` (pole of `R` at
//! `w = inf`). With this placement `F_k = psi_k ... psi_m` is finite at
//! infinity for `k < l` and has a simple pole there for `k >= l`.
//!
//! The orientation of the covering fixes the sign of the leading Laurent
//! coefficient of each product of branches, and it need not be positive
//! (for `[-1, 1], [2, 3]` and `l = 1`, `psi_2'(inf) < 0`). The modulus
//! conditions are blind to a sign per `k`, so `F_k` below is the product
//! multiplied by the sign that makes its leading coefficient positive.

mod pattern;
mod solve;

use std::sync::OnceLock;

use num_complex::Complex64;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Interval, NikishinGenerator};
use crate::precision::{decimal, log2_abs, PrecisionPolicy};

pub const MAX_SHEETS: usize = 4;

/// Intervals of the surface and the pole sheet `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSpec {
    pub intervals: Vec<Interval>,
    pub pole_sheet: usize,
}

impl SurfaceSpec {
    pub fn new(intervals: Vec<Interval>, pole_sheet: usize) -> Result<Self> {
        let s = SurfaceSpec { intervals, pole_sheet };
        s.validate()?;
        Ok(s)
    }

    pub fn from_generator(gen: &NikishinGenerator, pole_sheet: usize) -> Result<Self> {
        Self::new(gen.measures.iter().map(|s| s.interval).collect(), pole_sheet)
    }

    pub fn m(&self) -> usize {
        self.intervals.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 || m > MAX_SHEETS {
            return Err(Error::Argument(format!(
                "surface maps are supported for 1 <= m <= {MAX_SHEETS}, got m = {m}"
            )));
        }
        if self.pole_sheet < 1 || self.pole_sheet > m {
            return Err(Error::Argument(format!(
                "pole sheet l = {} must lie in 1..={m}",
                self.pole_sheet
            )));
        }
        for iv in &self.intervals {
            iv.validate()?;
            if !iv.is_bounded() {
                return Err(Error::InvalidInterval {
                    a: iv.a,
                    b: iv.b,
                    reason: "surface maps require bounded intervals".into(),
                });
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                let (p, q) = (self.intervals[i], self.intervals[j]);
                if !(p.b < q.a || q.b < p.a) {
                    return Err(Error::NotDisjoint { first: i + 1, second: j + 1 });
                }
            }
        }
        Ok(())
    }
}

/// Pole of `R` at the image of infinity on `sheet`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SheetPole {
    pub sheet: usize,
    #[serde(with = "decimal")]
    pub location: Float,
    #[serde(with = "decimal")]
    pub residue: Float,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    #[serde(with = "decimal")]
    pub w: Float,
    /// Slit whose endpoint is the critical value.
    pub slit: usize,
    pub endpoint: f64,
    #[serde(with = "decimal")]
    pub value: Float,
}

/// Normalized conformal map `psi^(l)`, stored through its inverse covering.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "SurfaceMapData")]
pub struct SurfaceMap {
    pub intervals: Vec<Interval>,
    pub pole_sheet: usize,
    /// Sheet carrying the zero of `psi` at infinity, `l - 1`.
    pub zero_sheet: usize,
    /// Sheet carrying the pole of `psi` at infinity, `m`.
    pub infinity_sheet: usize,
    pub precision_bits: u32,
    #[serde(with = "decimal")]
    pub gamma: Float,
    #[serde(with = "decimal")]
    pub delta: Float,
    /// Residue at `w = 0`, equal to `C_{1,l}`.
    #[serde(with = "decimal")]
    pub rho0: Float,
    pub poles: Vec<SheetPole>,
    pub critical_points: Vec<CriticalPoint>,
    /// `psi_{l-1}(z) z -> c1` at infinity.
    #[serde(with = "decimal")]
    pub c1: Float,
    /// `psi_m(z) / z -> c2` at infinity.
    #[serde(with = "decimal")]
    pub c2: Float,
    /// Constant value of the product of all branches.
    pub e: i8,
    /// log2 of the largest critical value error.
    pub critical_value_error_log2: f64,
    pub trace: Vec<String>,
    #[serde(skip)]
    cache: OnceLock<Evaluator>,
}

#[derive(Deserialize)]
struct SurfaceMapData {
    intervals: Vec<Interval>,
    pole_sheet: usize,
    zero_sheet: usize,
    infinity_sheet: usize,
    precision_bits: u32,
    #[serde(with = "decimal")]
    gamma: Float,
    #[serde(with = "decimal")]
    delta: Float,
    #[serde(with = "decimal")]
    rho0: Float,
    poles: Vec<SheetPole>,
    critical_points: Vec<CriticalPoint>,
    #[serde(with = "decimal")]
    c1: Float,
    #[serde(with = "decimal")]
    c2: Float,
    e: i8,
    critical_value_error_log2: f64,
    trace: Vec<String>,
}

impl From<SurfaceMapData> for SurfaceMap {
    fn from(d: SurfaceMapData) -> Self {
        let bits = d.precision_bits;
        let r = |x: Float| Float::with_val(bits, x);
        SurfaceMap {
            intervals: d.intervals,
            pole_sheet: d.pole_sheet,
            zero_sheet: d.zero_sheet,
            infinity_sheet: d.infinity_sheet,
            precision_bits: bits,
            gamma: r(d.gamma),
            delta: r(d.delta),
            rho0: r(d.rho0),
            poles: d
                .poles
                .into_iter()
                .map(|p| SheetPole {
                    sheet: p.sheet,
                    location: r(p.location),
                    residue: r(p.residue),
                })
                .collect(),
            critical_points: d
                .critical_points
                .into_iter()
                .map(|c| CriticalPoint {
                    w: r(c.w),
                    slit: c.slit,
                    endpoint: c.endpoint,
                    value: r(c.value),
                })
                .collect(),
            c1: r(d.c1),
            c2: r(d.c2),
            e: d.e,
            critical_value_error_log2: d.critical_value_error_log2,
            trace: d.trace,
            cache: OnceLock::new(),
        }
    }
}

/// Double precision copy of the map for branch tracking.
#[derive(Debug, Clone)]
struct Evaluator {
    gamma: f64,
    delta: f64,
    rho0: f64,
    poles: Vec<(f64, f64)>,
    scale: f64,
}

impl Evaluator {
    /// `R(w) - z` and `R'(w)`.
    fn eval(&self, w: Complex64, z: Complex64) -> (Complex64, Complex64) {
        let t = self.rho0 / w;
        let mut r = self.gamma * w + self.delta + t - z;
        let mut r1 = self.gamma - t / w;
        for &(wk, rk) in &self.poles {
            let q = 1.0 / (w - wk);
            r += rk * q;
            r1 -= rk * q * q;
        }
        (r, r1)
    }
}

/// Values of all branches at one point.
#[derive(Debug, Clone)]
pub struct BranchValues {
    pub z: Complex,
    /// `psi_0(z), ..., psi_m(z)`.
    pub values: Vec<Complex>,
    /// Continuation steps from the far point to `z`.
    pub steps: usize,
    pub path_length: f64,
    /// `|prod psi_k - e|`.
    pub product_deviation: f64,
}

impl BranchValues {
    pub fn psi(&self, k: usize) -> &Complex {
        &self.values[k]
    }

    pub fn product(&self) -> Complex {
        let bits = self.values[0].prec().0;
        let mut p = Complex::with_val(bits, 1);
        for v in &self.values {
            p *= v;
        }
        p
    }

    /// `F_k = psi_k ... psi_m`, with `F_{m+1} = 1`.
    pub fn f(&self, k: usize) -> Complex {
        let bits = self.values[0].prec().0;
        let mut p = Complex::with_val(bits, 1);
        for v in &self.values[k.min(self.values.len())..] {
            p *= v;
        }
        p
    }
}



pub fn build_surface_map(spec: &SurfaceSpec, policy: &PrecisionPolicy) -> Result<SurfaceMap> {
    spec.validate()?;
    policy.validate()?;
    let bits = policy.bits;
    let m = spec.m();
    let zero_sheet = spec.pole_sheet - 1;
    let events = pattern::walk(&spec.intervals, zero_sheet, m)?;
    let layout = solve::Layout::from_walk(m, m, &events);
    let mut trace = Vec::new();
    let ivs: Vec<(f64, f64)> = spec.intervals.iter().map(|iv| (iv.a, iv.b)).collect();
    let cov = solve::build_chain(&ivs, zero_sheet, &mut trace)?;
    let u = solve::arrange(&layout, &cov)?;
    let x = solve::polish(&layout, &u, bits, &mut trace)?;
    let (mut gamma, delta, mut w, mut rho, mut c) = solve::unpack(&layout, x);
    let mut rho0 = Float::with_val(bits, 1);

    // scale w so that the product of the branches has modulus one
    let mut e0 = Float::with_val(bits, &rho0 / &gamma);
    for wk in &w {
        e0 *= wk;
    }
    let e: i8 = if e0.is_sign_negative() { -1 } else { 1 };
    let mut lambda = Float::with_val(bits, e0.abs_ref()).ln();
    lambda /= -((m + 1) as i32);
    lambda.exp_mut();
    gamma /= &lambda;
    rho0 *= &lambda;
    for v in w.iter_mut().chain(rho.iter_mut()).chain(c.iter_mut()) {
        *v *= &lambda;
    }

    let poles = layout
        .finite
        .iter()
        .zip(w.into_iter().zip(rho))
        .map(|(&sheet, (location, residue))| SheetPole { sheet, location, residue })
        .collect();
    let c2 = Float::with_val(bits, gamma.recip_ref());
    let mut map = SurfaceMap {
        intervals: spec.intervals.clone(),
        pole_sheet: spec.pole_sheet,
        zero_sheet,
        infinity_sheet: m,
        precision_bits: bits,
        gamma,
        delta,
        c1: rho0.clone(),
        rho0,
        poles,
        critical_points: vec![],
        c2,
        e,
        critical_value_error_log2: f64::NEG_INFINITY,
        trace,
        cache: OnceLock::new(),
    };
    let mut worst = f64::NEG_INFINITY;
    for (i, ci) in c.into_iter().enumerate() {
        let value = map.rational(&ci);
        let err = Float::with_val(bits, &value - layout.targets[i]);
        worst = worst.max(log2_abs(&err));
        map.critical_points.push(CriticalPoint {
            w: ci,
            slit: layout.slits[i],
            endpoint: layout.targets[i],
            value,
        });
    }
    map.critical_value_error_log2 = worst;
    if worst > -(bits as f64) / 2.0 {
        return Err(Error::Newton {
            reason: format!("critical values are off by 2^{worst:.1}"),
            trace: map.trace.clone(),
        });
    }
    Ok(map)
}

impl SurfaceMap {
    pub fn m(&self) -> usize {
        self.intervals.len()
    }

    fn bits(&self) -> u32 {
        self.precision_bits
    }

    /// `R(w)` at a real point.
    pub fn rational(&self, w: &Float) -> Float {
        let bits = self.bits();
        let mut r = Float::with_val(bits, &self.gamma * w) + &self.delta;
        r += Float::with_val(bits, &self.rho0 / w);
        for p in &self.poles {
            r += Float::with_val(bits, &p.residue / Float::with_val(bits, w - &p.location));
        }
        r
    }

    /// `R'(w)` at a real point.
    pub fn rational_derivative(&self, w: &Float) -> Float {
        let bits = self.bits();
        let mut r = self.gamma.clone();
        r -= Float::with_val(bits, &self.rho0 / Float::with_val(bits, w.square_ref()));
        for p in &self.poles {
            let d = Float::with_val(bits, w - &p.location);
            r -= Float::with_val(bits, &p.residue / d.square());
        }
        r
    }

    /// Number of distinct simple critical points of `R`, checked against the
    /// degree `2m` of the numerator of `R'`.
    pub fn simple_critical_points(&self) -> usize {
        let bits = self.bits();
        let scale = self.gamma.to_f64().abs().max(1.0);
        let mut count = 0;
        for (i, c) in self.critical_points.iter().enumerate() {
            let d = self.rational_derivative(&c.w);
            let distinct = self.critical_points[..i].iter().all(|o| {
                Float::with_val(bits, &o.w - &c.w).abs() > Float::with_val(64, Float::i_exp(1, -(bits as i32) / 4))
            });
            if log2_abs(&d) < -(bits as f64) / 2.0 + scale.log2() && distinct {
                count += 1;
            }
        }
        if self.gamma.is_zero() {
            0
        } else {
            count
        }
    }

    fn evaluator(&self) -> &Evaluator {
        self.cache.get_or_init(|| {
            let scale = 1.0
                + self
                    .intervals
                    .iter()
                    .map(|iv| iv.a.abs().max(iv.b.abs()))
                    .fold(0.0, f64::max);
            Evaluator {
                gamma: self.gamma.to_f64(),
                delta: self.delta.to_f64(),
                rho0: self.rho0.to_f64(),
                poles: self.poles.iter().map(|p| (p.location.to_f64(), p.residue.to_f64())).collect(),
                scale,
            }
        })
    }

    /// Tracks all branches in double precision from far away down to `z`.
    fn track(&self, z: Complex64) -> Result<(Vec<Complex64>, usize, f64)> {
        let ev = self.evaluator();
        let m = self.m();
        let guesses = |start: Complex64| {
            let mut guess = vec![Complex64::new(0.0, 0.0); m + 1];
            guess[self.zero_sheet] = self.rho0.to_f64() / start;
            guess[self.infinity_sheet] = (start - self.delta.to_f64()) / self.gamma.to_f64();
            for p in &self.poles {
                guess[p.sheet] = p.location.to_f64() + p.residue.to_f64() / start;
            }
            guess
        };
        solve::track_roots(&|w, zz| ev.eval(w, zz), &guesses, z, ev.scale)
    }

    /// Branch values in double precision.
    pub fn branch_values_f64(&self, z: Complex64) -> Result<Vec<Complex64>> {
        Ok(self.track(z)?.0)
    }

    /// All branches `psi_0(z), ..., psi_m(z)` at the working precision. Real
    /// points on a slit give the boundary values from the upper half plane.
    pub fn branch_values(&self, z: &Complex) -> Result<BranchValues> {
        let bits = self.bits();
        let z64 = Complex64::new(z.real().to_f64(), z.imag().to_f64());
        let (approx, steps, path_length) = self.track(z64)?;
        let mut values = Vec::with_capacity(approx.len());
        for a in approx {
            let mut w = Complex::with_val(bits, (a.re, a.im));
            for _ in 0..40 {
                let (f, d) = self.rational_complex(&w, z);
                let step = Complex::with_val(bits, f / d);
                w -= &step;
                let sz = Float::with_val(bits, step.abs_ref());
                let wz = Float::with_val(bits, w.abs_ref());
                if sz.is_zero() || log2_abs(&sz) < log2_abs(&wz).max(0.0) - bits as f64 + 8.0 {
                    break;
                }
            }
            values.push(w);
        }
        let mut bv = BranchValues {
            z: Complex::with_val(bits, z),
            values,
            steps,
            path_length,
            product_deviation: 0.0,
        };
        let dev = Complex::with_val(bits, bv.product() - self.e as i32);
        bv.product_deviation = Float::with_val(bits, dev.abs_ref()).to_f64();
        Ok(bv)
    }

    /// `R(w) - z` and `R'(w)` at a complex point.
    fn rational_complex(&self, w: &Complex, z: &Complex) -> (Complex, Complex) {
        let bits = self.bits();
        let t = Complex::with_val(bits, &self.rho0 / w);
        let mut r = Complex::with_val(bits, w * &self.gamma) + &self.delta + &t - z;
        let mut r1 = Complex::with_val(bits, &self.gamma - Complex::with_val(bits, &t / w));
        for p in &self.poles {
            let q = Complex::with_val(bits, w - &p.location).recip();
            r += Complex::with_val(bits, &q * &p.residue);
            r1 -= Complex::with_val(bits, q.square_ref()) * &p.residue;
        }
        (r, r1)
    }

    /// Leading Laurent coefficient at infinity of the plain product
    /// `psi_k ... psi_m` and its power of `z`.
    pub fn product_leading(&self, k: usize) -> (Float, u32) {
        let bits = self.bits();
        let m = self.m();
        if k == 0 {
            return (Float::with_val(bits, self.e), 0);
        }
        if k > m {
            return (Float::with_val(bits, 1), 0);
        }
        let mut c = self.c2.clone();
        if k <= self.zero_sheet {
            c *= &self.rho0;
        }
        for p in self.poles.iter().filter(|p| p.sheet >= k) {
            c *= &p.location;
        }
        (c, u32::from(k >= self.pole_sheet))
    }

    /// Sign relating `F_k` to the plain product of branches.
    pub fn f_sign(&self, k: usize) -> i32 {
        if self.product_leading(k).0.is_sign_negative() {
            -1
        } else {
            1
        }
    }

    /// `c_0, ..., c_{m+1}` with `c_0 = c_{m+1} = 1` and `c_k` the leading
    /// coefficient of `F_k` at infinity.
    pub fn c_constants(&self) -> Vec<Float> {
        let bits = self.bits();
        let m = self.m();
        let mut out = vec![Float::with_val(bits, 1)];
        for k in 1..=m {
            out.push(self.product_leading(k).0.abs());
        }
        out.push(Float::with_val(bits, 1));
        out
    }

    /// Limits `kappa_k = c_k / sqrt(c_{k-1} c_{k+1})` for `k = 1..m`.
    pub fn kappa(&self) -> Vec<Float> {
        let bits = self.bits();
        let c = self.c_constants();
        (1..=self.m())
            .map(|k| {
                let d = Float::with_val(bits, &c[k - 1] * &c[k + 1]).sqrt();
                Float::with_val(bits, &c[k] / d)
            })
            .collect()
    }

    /// `F_k(z)` for `1 <= k <= m + 1`.
    pub fn f_value(&self, k: usize, z: &Complex) -> Result<Complex> {
        self.check_k(k)?;
        Ok(self.branch_values(z)?.f(k) * self.f_sign(k))
    }

    /// `F_k(z)` divided by its leading Laurent coefficient.
    pub fn f_tilde(&self, k: usize, z: &Complex) -> Result<Complex> {
        self.check_k(k)?;
        Ok(self.branch_values(z)?.f(k) / self.product_leading(k).0)
    }

    /// `psi_m(z) / psi_m'(inf)`.
    pub fn psi_m_normalized(&self, z: &Complex) -> Result<Complex> {
        let bv = self.branch_values(z)?;
        Ok(Complex::with_val(self.bits(), bv.psi(self.m()) * &self.gamma))
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.m() + 1 {
            return Err(Error::Argument(format!("F index {k} must lie in 1..={}", self.m() + 1)));
        }
        Ok(())
    }
}

pub fn branch_values(map: &SurfaceMap, z: &Complex) -> Result<BranchValues> {
    map.branch_values(z)
}

#[allow(non_snake_case)]
pub fn F_values(map: &SurfaceMap, k: usize, z: &Complex) -> Result<(Complex, Complex)> {
    Ok((map.f_value(k, z)?, map.f_tilde(k, z)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindingCheck {
    pub k: usize,
    pub expected: i64,
    pub measured: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignCheck {
    pub k: usize,
    /// `"value"` for `F_k(inf)`, `"derivative"` for `F_k'(inf)`.
    pub kind: String,
    /// Leading coefficient of the plain product of branches.
    pub product_coefficient: f64,
    /// `c_k`, the leading coefficient of `F_k`.
    pub coefficient: f64,
    /// `F_k(x) / x^p` at a far real point, from the branch values.
    pub measured: f64,
    pub positive: bool,
}

/// Deviations in each boundary value condition characterizing `F_1..F_m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BvpReport {
    pub winding: Vec<WindingCheck>,
    pub signs: Vec<SignCheck>,
    pub samples_per_interval: usize,
    /// `max | |F_k|^2 / |F_{k-1} F_{k+1}| - 1 |` on each interval.
    pub modulus_deviation: Vec<f64>,
    pub product_deviation: f64,
}

impl BvpReport {
    pub fn max_modulus_deviation(&self) -> f64 {
        self.modulus_deviation.iter().copied().fold(0.0, f64::max)
    }

    pub fn winding_ok(&self) -> bool {
        self.winding
            .iter()
            .all(|w| (w.measured - w.expected as f64).abs() < 0.25)
    }

    pub fn signs_ok(&self) -> bool {
        self.signs.iter().all(|s| s.positive)
    }
}

pub fn bvp_residual(map: &SurfaceMap) -> Result<BvpReport> {
    bvp_residual_with(map, 50)
}

pub fn bvp_residual_with(map: &SurfaceMap, samples: usize) -> Result<BvpReport> {
    let m = map.m();
    let bits = map.bits();
    let mut product_deviation = 0.0f64;
    let mut winding = Vec::new();
    for k in 1..=m {
        let iv = map.intervals[k - 1];
        let gap = map
            .intervals
            .iter()
            .enumerate()
            .filter(|(j, _)| *j + 1 != k)
            .map(|(_, o)| if o.a > iv.b { o.a - iv.b } else { iv.a - o.b })
            .fold(f64::INFINITY, f64::min);
        let r = (0.4 * gap).min(iv.half_width());
        let contour = |n: usize| -> Result<f64> {
            let mut total = 0.0;
            let mut prev: Option<Complex64> = None;
            let mut first = None;
            for i in 0..n {
                let th = std::f64::consts::TAU * i as f64 / n as f64;
                let z = Complex64::new(iv.center() + (iv.half_width() + r) * th.cos(), r * th.sin());
                let v = map.branch_values_f64(z)?;
                let f: Complex64 = v[k..].iter().product();
                if let Some(p) = prev {
                    let d = (f / p).arg();
                    if d.abs() > 1.0 {
                        return Ok(f64::NAN);
                    }
                    total += d;
                } else {
                    first = Some(f);
                }
                prev = Some(f);
            }
            total += (first.unwrap() / prev.unwrap()).arg();
            Ok(total / std::f64::consts::TAU)
        };
        let mut n = 64;
        let measured = loop {
            let w = contour(n)?;
            if w.is_finite() || n >= 4096 {
                break w;
            }
            n *= 2;
        };
        winding.push(WindingCheck {
            k,
            expected: i64::from(k >= map.pole_sheet),
            measured,
        });
    }

    let far = 1e6
        * (1.0 + map
            .intervals
            .iter()
            .map(|iv| iv.a.abs().max(iv.b.abs()))
            .fold(0.0, f64::max));
    let at_far = map.branch_values(&Complex::with_val(bits, (far, 0)))?;
    let c = map.c_constants();
    let mut signs = Vec::with_capacity(m);
    for k in 1..=m {
        let (raw, p) = map.product_leading(k);
        let mut f = Complex::with_val(bits, at_far.f(k) * map.f_sign(k));
        if p == 1 {
            f /= far;
        }
        let measured = f.real().to_f64();
        let ck = c[k].to_f64();
        signs.push(SignCheck {
            k,
            kind: if p == 0 { "value" } else { "derivative" }.into(),
            product_coefficient: raw.to_f64(),
            coefficient: ck,
            measured,
            positive: ck > 0.0 && measured > 0.0 && (measured - ck).abs() <= 1e-3 * ck,
        });
    }

    let mut modulus_deviation = Vec::with_capacity(m);
    for k in 1..=m {
        let iv = map.intervals[k - 1];
        let mut worst = 0.0f64;
        for i in 0..samples {
            let t = std::f64::consts::PI * (i as f64 + 0.5) / samples as f64;
            let x = iv.center() - iv.half_width() * t.cos();
            let bv = map.branch_values(&Complex::with_val(bits, (x, 0)))?;
            product_deviation = product_deviation.max(bv.product_deviation);
            let fk = Float::with_val(bits, bv.f(k).abs_ref());
            // the modulus condition does not see the sign of F_k
            let lo = if k == 1 {
                Float::with_val(bits, 1)
            } else {
                Float::with_val(bits, bv.f(k - 1).abs_ref())
            };
            let hi = Float::with_val(bits, bv.f(k + 1).abs_ref());
            let ratio = fk.square() / lo / hi - 1u32;
            worst = worst.max(ratio.to_f64().abs());
        }
        modulus_deviation.push(worst);
    }
    Ok(BvpReport {
        winding,
        signs,
        samples_per_interval: samples,
        modulus_deviation,
        product_deviation,
    })
}
