//! Normalized remainder forms `H`, norming constants `K`, `kappa`, and the
//! convergence, ratio and zero-structure experiments run along ladders of
//! multi-indices.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite_pade::{solve_hp, HPSolution, MultiIndex};
use crate::measures::{NikishinGenerator, NikishinSystem};
use crate::precision::{log2_abs, to_decimal_digits, PrecisionPolicy};
use crate::riemann::{build_surface_map, SurfaceMap, SurfaceSpec};
use crate::zeros::{form_zeros, interlace_check, polynomial_sign_changes, polynomial_zeros, ratio_of_monic, sturm_count, MonicFromRoots};

/// Smallest distance between a probe and an interval it must avoid.
pub const MIN_PROBE_DISTANCE: f64 = 0.5;

/// `H_{n,k}` at the nodes of `sigma_k` and the constants built from it.
#[derive(Debug, Clone)]
pub struct Norming {
    /// `h_nodes[k]` holds `H_{n,k}` at the nodes of `sigma_k`, `k = 1..m`.
    pub h_nodes: Vec<Vec<Float>>,
    /// Relative coarse-rule estimate of the integral representation, per level.
    pub h_error_log2: Vec<f64>,
    /// `K_{n,0}, ..., K_{n,m}`.
    pub k: Vec<Float>,
    /// `kappa_{n,1}, ..., kappa_{n,m}`, stored at positions `1..=m`.
    pub kappa: Vec<Float>,
}

/// Solution for one index together with its `Q_{n,j}` and lazily computed
/// norming data.
#[derive(Debug)]
pub struct FormFamily {
    pub solution: HPSolution,
    /// `Q_{n,0}, ..., Q_{n,m+1}`; the outer two are identically one.
    pub q: Vec<MonicFromRoots>,
    norming: OnceLock<Norming>,
}

fn sign_of_level(k: usize) -> i32 {
    if k.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl FormFamily {
    pub fn new(solution: HPSolution) -> Result<FormFamily> {
        let m = solution.m();
        let sys = solution.system()?.clone();
        let bits = solution.precision_bits;
        let mut q = vec![MonicFromRoots::one(bits, sys.interval(1))];
        for j in 1..=m {
            q.push(form_zeros(&solution, j)?);
        }
        q.push(MonicFromRoots::one(bits, sys.interval(m)));
        Ok(FormFamily {
            solution,
            q,
            norming: OnceLock::new(),
        })
    }

    pub fn solve(system: &Arc<NikishinSystem>, n: &MultiIndex, policy: &PrecisionPolicy) -> Result<FormFamily> {
        FormFamily::new(solve_hp(system, n, policy)?)
    }

    pub fn m(&self) -> usize {
        self.solution.m()
    }

    pub fn index(&self) -> &MultiIndex {
        &self.solution.index
    }

    fn bits(&self) -> u32 {
        self.solution.precision_bits
    }

    fn system(&self) -> &Arc<NikishinSystem> {
        self.solution.system().expect("families are built from solved systems")
    }

    /// `Q_{n,k}` at the nodes of `sigma_p`.
    fn q_at_nodes(&self, k: usize, p: usize) -> Vec<Float> {
        self.system().rule(p).nodes.iter().map(|n| self.q[k].eval(&n.x)).collect()
    }

    /// `Q_{n,j+1}^2 H_{n,j+1} / (Q_{n,j} Q_{n,j+2})` times the weights of
    /// `sigma_{j+1}`, the measure in the integral representation of `H_{n,j}`.
    fn representing_weights(&self, j: usize, h_next: &[Float]) -> Vec<Float> {
        let bits = self.bits();
        let p = j + 1;
        let w = self.system().nested_weights(p, p);
        let q1 = self.q_at_nodes(p, p);
        let q0 = self.q_at_nodes(j, p);
        let q2 = self.q_at_nodes(j + 2, p);
        (0..w.len())
            .map(|i| {
                let mut v = Float::with_val(bits, q1[i].square_ref());
                v *= &h_next[i];
                v *= &w[i];
                v /= &q0[i];
                v /= &q2[i];
                v
            })
            .collect()
    }

    /// Builds `H_{n,k}` on the nodes of every `sigma_k` from the integral
    /// representation, starting at `H_{n,m} = (-1)^m`, and then `K` and `kappa`.
    pub fn norming(&self) -> Result<&Norming> {
        if let Some(n) = self.norming.get() {
            return Ok(n);
        }
        let sys = self.system();
        sys.generator.require_disjoint_bounded()?;
        let m = self.m();
        let bits = self.bits();
        let mut h_nodes = vec![Vec::new(); m + 1];
        let mut h_error_log2 = vec![f64::NEG_INFINITY; m + 1];
        h_nodes[m] = vec![Float::with_val(bits, sign_of_level(m)); sys.rule(m).len()];
        for k in (1..m).rev() {
            let weights = self.representing_weights(k, &h_nodes[k + 1]);
            let inner = sys.rule(k + 1);
            let outer = sys.rule(k);
            let rows: Vec<(Float, f64)> = outer
                .nodes
                .par_iter()
                .map(|xn| {
                    let mut fine = Float::with_val(bits, 0);
                    let mut coarse = Float::with_val(bits, 0);
                    for (t, w) in inner.nodes.iter().zip(&weights) {
                        let d = Float::with_val(bits, &xn.x - &t.x);
                        let v = Float::with_val(bits, w / &d);
                        if t.index % 2 == 0 {
                            coarse += Float::with_val(bits, &v * 2u32);
                        }
                        fine += v;
                    }
                    let est = Float::with_val(bits, &fine - &coarse);
                    let rel = log2_abs(&est) - log2_abs(&fine);
                    (fine, rel)
                })
                .collect();
            h_error_log2[k] = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
            h_nodes[k] = rows.into_iter().map(|r| r.0).collect();
        }
        let mut k_const = vec![Float::with_val(bits, 1); m + 1];
        for k in 1..=m {
            let integral = self.norm_integral(k, &h_nodes[k], &Float::with_val(bits, 1));
            k_const[k - 1] = integral.sqrt().recip();
        }
        let mut kappa = vec![Float::with_val(bits, 0); m + 1];
        for k in 1..=m {
            kappa[k] = Float::with_val(bits, &k_const[k - 1] / &k_const[k]);
        }
        let _ = self.norming.set(Norming {
            h_nodes,
            h_error_log2,
            k: k_const,
            kappa,
        });
        Ok(self.norming.get().unwrap())
    }

    /// `int (c Q_{n,k})^2 |H_{n,k}| |dsigma_k| / |Q_{n,k-1} Q_{n,k+1}|`.
    fn norm_integral(&self, k: usize, h: &[Float], c: &Float) -> Float {
        let bits = self.bits();
        let w = self.system().nested_weights(k, k);
        let qk = self.q_at_nodes(k, k);
        let q0 = self.q_at_nodes(k - 1, k);
        let q2 = self.q_at_nodes(k + 1, k);
        let mut s = Float::with_val(bits, 0);
        for i in 0..w.len() {
            let mut v = Float::with_val(bits, &qk[i] * c);
            v.square_mut();
            v *= Float::with_val(bits, h[i].abs_ref());
            v *= Float::with_val(bits, w[i].abs_ref());
            v /= Float::with_val(bits, &q0[i] * &q2[i]).abs();
            s += v;
        }
        s
    }

    /// `K_{n,0..m}` and `kappa_{n,1..m}` (the latter at positions `1..=m`).
    pub fn k_constants(&self) -> Result<(Vec<Float>, Vec<Float>)> {
        let n = self.norming()?;
        Ok((n.k.clone(), n.kappa.clone()))
    }

    /// `int q_{n,k}^2 |h_{n,k}| |dsigma_k| / |Q_{n,k-1} Q_{n,k+1}| - 1` with
    /// `q = kappa Q` and `h = K^2 H`.
    pub fn orthonormal_residual(&self, k: usize) -> Result<Float> {
        let n = self.norming()?;
        let bits = self.bits();
        let kk = Float::with_val(bits, n.k[k].square_ref());
        let h: Vec<Float> = n.h_nodes[k].iter().map(|v| Float::with_val(bits, v * &kk)).collect();
        Ok(self.norm_integral(k, &h, &n.kappa[k]) - 1u32)
    }

    /// `H_{n,j}(z)` from the quotient `Q_{n,j+1} A_{n,j} / Q_{n,j}`, with a
    /// bound on its rounding and quadrature noise.
    pub fn h_eval(&self, j: usize, z: &Complex) -> Result<(Complex, Float)> {
        let m = self.m();
        let bits = self.bits();
        if j > m {
            return Err(Error::Argument(format!("level {j} exceeds m = {m}")));
        }
        if j == m {
            return Ok((Complex::with_val(bits, sign_of_level(m)), Float::with_val(bits, 0)));
        }
        let den = self.q[j].eval_complex(z);
        let dz = Float::with_val(bits, den.abs_ref());
        let near = self.q[j].roots.roots.iter().any(|r| {
            let d = Complex::with_val(bits, z - r);
            Float::with_val(bits, d.abs_ref()) < 1e-12
        });
        if dz.is_zero() || near {
            return Err(Error::Argument(format!("{z} is too close to a zero of Q_{{n,{j}}}")));
        }
        let sys = self.system();
        let abs = |c: &Complex| Float::with_val(bits, c.abs_ref());
        let mut v = self.solution.poly(j).eval_complex(z);
        if sign_of_level(j) < 0 {
            v = -v;
        }
        let mut scale = abs(&v);
        let mut qerr = Float::with_val(bits, 0);
        for k in j + 1..=m {
            let (t, e) = sys.cauchy_transform(j + 1, k, z)?;
            let ak = self.solution.poly(k).eval_complex(z);
            let term = Complex::with_val(bits, &ak * &t);
            scale += abs(&term);
            qerr += abs(&ak) * e;
            if sign_of_level(k) < 0 {
                v -= term;
            } else {
                v += term;
            }
        }
        let factor = abs(&self.q[j + 1].eval_complex(z)) / &dz;
        // coefficient errors grow with the pivot ratio of the solve
        let lost = 16 + self.solution.condition_log2.max(0.0).ceil() as i32;
        let mut noise = scale;
        noise <<= lost - bits as i32;
        noise += qerr;
        noise *= &factor;
        v *= self.q[j + 1].eval_complex(z);
        v /= den;
        Ok((v, noise))
    }

    /// `H_{n,j}(z)` from its integral representation against `sigma_{j+1}`,
    /// with the coarse-rule error estimate.
    pub fn h_eval_integral(&self, j: usize, z: &Complex) -> Result<(Complex, Float)> {
        let m = self.m();
        if j >= m {
            return Err(Error::Argument(format!("level {j} must be below m = {m}")));
        }
        let n = self.norming()?;
        let bits = self.bits();
        let weights = self.representing_weights(j, &n.h_nodes[j + 1]);
        let rule = self.system().rule(j + 1);
        let mut fine = Complex::with_val(bits, 0);
        let mut coarse = Complex::with_val(bits, 0);
        for (t, w) in rule.nodes.iter().zip(&weights) {
            let d = Complex::with_val(bits, z - &t.x);
            let v = Complex::with_val(bits, w / &d);
            if t.index % 2 == 0 {
                coarse += Complex::with_val(bits, &v * 2u32);
            }
            fine += v;
        }
        let est = Complex::with_val(bits, &fine - &coarse);
        let est = Float::with_val(bits, est.abs_ref());
        Ok((fine, est))
    }
}

/// Least-squares line through `(|n|, log deviation)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    /// Natural log of the deviation per unit of `|n|`.
    pub slope: f64,
    pub intercept: f64,
    /// `exp(slope)`: geometric ratio per unit of `|n|`.
    pub ratio: f64,
    pub points: usize,
}

/// Fit over the upper half of the ladder; `None` with fewer than two points
/// or a vanishing deviation.
pub fn fit_rate(totals: &[usize], log2_dev: &[f64]) -> Option<RateFit> {
    let len = totals.len();
    let start = len / 2;
    let xs: Vec<f64> = totals[start..].iter().map(|&t| t as f64).collect();
    let ys: Vec<f64> = log2_dev[start..].iter().map(|&v| v * std::f64::consts::LN_2).collect();
    if xs.len() < 2 || ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some(RateFit {
        slope,
        intercept: my - slope * mx,
        ratio: slope.exp(),
        points: xs.len(),
    })
}

/// One measured quantity at one index and probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: String,
    pub total: usize,
    pub probe: Option<usize>,
    pub quantity: String,
    pub measured_re: String,
    pub measured_im: String,
    pub reference_re: String,
    pub reference_im: String,
    pub deviation: f64,
    pub deviation_log2: f64,
}

/// Sup over probes of one quantity along the ladder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Series {
    pub quantity: String,
    pub totals: Vec<usize>,
    pub sup_deviation: Vec<f64>,
    pub sup_deviation_log2: Vec<f64>,
    pub fit: Option<RateFit>,
    /// No step increases the deviation by more than the factor two noise band.
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub index: String,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub expected: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub precision_bits: u32,
    pub ladder: Vec<MultiIndex>,
    /// Probe points as `(re, im)`.
    pub probes: Vec<(f64, f64)>,
    pub rows: Vec<ReportRow>,
    pub series: Vec<Series>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    fn new(experiment: &str, bits: u32, ladder: Vec<MultiIndex>, probes: &[Complex64]) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            precision_bits: bits,
            ladder,
            probes: probes.iter().map(|z| (z.re, z.im)).collect(),
            rows: vec![],
            series: vec![],
            checks: vec![],
        }
    }

    pub fn series(&self, quantity: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.quantity == quantity)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Rows of one quantity at one index.
    pub fn rows_for<'a>(&'a self, quantity: &'a str, index: &'a MultiIndex) -> impl Iterator<Item = &'a ReportRow> + 'a {
        let key = index.to_string();
        self.rows.iter().filter(move |r| r.quantity == quantity && r.index == key)
    }

    /// Sup-over-probes series per quantity, in ladder order.
    fn summarize(&mut self) {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.quantity) {
                names.push(r.quantity.clone());
            }
        }
        self.series = names
            .into_iter()
            .map(|q| {
                let mut totals = Vec::new();
                let mut sup = Vec::new();
                let mut sup_log2 = Vec::new();
                for n in &self.ladder {
                    let key = n.to_string();
                    let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.quantity == q && r.index == key).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    totals.push(n.total());
                    sup.push(rows.iter().map(|r| r.deviation).fold(0.0, f64::max));
                    sup_log2.push(rows.iter().map(|r| r.deviation_log2).fold(f64::NEG_INFINITY, f64::max));
                }
                let fit = fit_rate(&totals, &sup_log2);
                let nonincreasing = sup_log2.windows(2).all(|w| w[1] <= w[0] + 1.0);
                Series {
                    quantity: q,
                    totals,
                    sup_deviation: sup,
                    sup_deviation_log2: sup_log2,
                    fit,
                    nonincreasing,
                }
            })
            .collect();
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "index",
            "total",
            "probe",
            "z_re",
            "z_im",
            "quantity",
            "measured_re",
            "measured_im",
            "reference_re",
            "reference_im",
            "deviation",
        ])
        ?;
        for r in &self.rows {
            let (zr, zi) = match r.probe {
                Some(p) => (format!("{:e}", self.probes[p].0), format!("{:e}", self.probes[p].1)),
                None => (String::new(), String::new()),
            };
            let probe = r.probe.map(|p| p.to_string()).unwrap_or_default();
            wr.write_record([
                r.index.as_str(),
                &r.total.to_string(),
                &probe,
                &zr,
                &zi,
                &r.quantity,
                &r.measured_re,
                &r.measured_im,
                &r.reference_re,
                &r.reference_im,
                &format!("{:e}", r.deviation),
            ])
            ?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Gnuplot script drawing the sup deviations against `|n|` on a log
    /// scale, with the data inlined.
    pub fn plot_script(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("set title \"{}\"\n", self.experiment));
        s.push_str("set logscale y\nset xlabel \"|n|\"\nset ylabel \"sup deviation\"\nset key outside\n");
        for (i, series) in self.series.iter().enumerate() {
            s.push_str(&format!("$s{i} << EOD\n"));
            for (t, d) in series.totals.iter().zip(&series.sup_deviation) {
                s.push_str(&format!("{t} {d:e}\n"));
            }
            s.push_str("EOD\n");
        }
        let plots: Vec<String> = self
            .series
            .iter()
            .enumerate()
            .map(|(i, series)| format!("$s{i} using 1:2 with linespoints title \"{}\"", series.quantity))
            .collect();
        if !plots.is_empty() {
            s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
        }
        s
    }
}

fn digits(x: &Float) -> String {
    to_decimal_digits(x, 30)
}

fn row(index: &MultiIndex, probe: Option<usize>, quantity: String, measured: &Complex, reference: &Complex) -> ReportRow {
    let bits = measured.prec().0.max(reference.prec().0);
    let d = Complex::with_val(bits, measured - reference);
    let d = Float::with_val(bits, d.abs_ref());
    ReportRow {
        index: index.to_string(),
        total: index.total(),
        probe,
        quantity,
        measured_re: digits(measured.real()),
        measured_im: digits(measured.imag()),
        reference_re: digits(reference.real()),
        reference_im: digits(reference.imag()),
        deviation: d.to_f64(),
        deviation_log2: log2_abs(&d),
    }
}

fn real_row(index: &MultiIndex, quantity: String, measured: &Float, reference: &Float) -> ReportRow {
    let bits = measured.prec();
    row(
        index,
        None,
        quantity,
        &Complex::with_val(bits, (measured, 0)),
        &Complex::with_val(bits, (reference, 0)),
    )
}

/// Sorts by `|n|` then lexicographically and requires strictly increasing `|n|`.
pub fn sorted_ladder(ladder: &[MultiIndex]) -> Result<Vec<MultiIndex>> {
    let mut v = ladder.to_vec();
    if v.is_empty() {
        return Err(Error::Argument("empty ladder".into()));
    }
    v.sort_by_key(|n| n.report_key());
    if v.windows(2).any(|w| w[0].total() == w[1].total()) {
        return Err(Error::Argument("ladder must be strictly increasing in |n|".into()));
    }
    let m = v[0].m();
    if v.iter().any(|n| n.m() != m) {
        return Err(Error::InvalidIndex("ladder mixes index lengths".into()));
    }
    Ok(v)
}

/// `(k, ..., k)` for each `k` in `ks`.
pub fn diagonal_ladder(m: usize, ks: impl IntoIterator<Item = usize>) -> Vec<MultiIndex> {
    ks.into_iter().filter_map(|k| MultiIndex::new(vec![k; m]).ok()).collect()
}

/// `(k+m-1, k+m-2, ..., k)` for each `k` in `ks`.
pub fn decreasing_ladder(m: usize, ks: impl IntoIterator<Item = usize>) -> Vec<MultiIndex> {
    ks.into_iter()
        .filter_map(|k| MultiIndex::new((0..m).map(|i| k + m - 1 - i).collect()).ok())
        .collect()
}

/// Circles of radius 2 and 4 times the diameter of the convex hull of the
/// intervals, plus real points beyond the hull, all at least
/// [`MIN_PROBE_DISTANCE`] from every interval.
pub fn default_probes(gen: &NikishinGenerator) -> Vec<Complex64> {
    let lo = gen.measures.iter().map(|s| s.interval.a).fold(f64::INFINITY, f64::min);
    let hi = gen.measures.iter().map(|s| s.interval.b).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
    let c = 0.5 * (lo + hi);
    let d = (hi - lo).max(1.0);
    let mut out = Vec::new();
    for r in [2.0 * d, 4.0 * d] {
        for i in 0..8 {
            let t = std::f64::consts::PI * (2 * i + 1) as f64 / 8.0;
            out.push(Complex64::new(c + r * t.cos(), r * t.sin()));
        }
    }
    out.push(Complex64::new(hi + 0.5 * d, 0.0));
    out.push(Complex64::new(lo - 0.5 * d, 0.0));
    out.retain(|z| {
        (1..=gen.m()).all(|j| gen.interval(j).distance(z.re, z.im) >= MIN_PROBE_DISTANCE)
    });
    out
}

/// `n` points on the circle `|z - center| = radius`, starting on the real axis.
pub fn circle_probes(center: f64, radius: f64, count: usize) -> Vec<Complex64> {
    (0..count)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            Complex64::new(center + radius * t.cos(), radius * t.sin())
        })
        .collect()
}

fn check_probes(sys: &NikishinSystem, probes: &[Complex64], levels: &[usize]) -> Result<()> {
    for z in probes {
        for &j in levels {
            let iv = sys.interval(j);
            let d = iv.distance(z.re, z.im);
            if d < MIN_PROBE_DISTANCE {
                return Err(Error::Domain {
                    point: format!("{z}"),
                    a: iv.a,
                    b: iv.b,
                    distance: d,
                });
            }
        }
    }
    Ok(())
}

fn to_complex(z: &Complex64, bits: u32) -> Complex {
    Complex::with_val(bits, (z.re, z.im))
}

fn ladder_map<T: Send, F: Fn(&MultiIndex) -> Result<T> + Sync + Send>(ladder: &[MultiIndex], f: F) -> Result<Vec<T>> {
    ladder.par_iter().map(f).collect::<Vec<Result<T>>>().into_iter().collect()
}

/// Builds a discretized system large enough for every index of the ladder
/// and its unit increments.
pub fn system_for_ladder(gen: &NikishinGenerator, ladder: &[MultiIndex], policy: &PrecisionPolicy) -> Result<Arc<NikishinSystem>> {
    let degree = ladder
        .iter()
        .map(|n| n.required_degree() + n.m() + 1)
        .max()
        .ok_or_else(|| Error::Argument("empty ladder".into()))?;
    Ok(Arc::new(NikishinSystem::build(gen, degree, policy)?))
}

/// Sup over probes of `|a_{n,j} / a_{n,m} - \hat s_{m,j+1}|` for each
/// `j < m` along the ladder.
pub fn run_markov_convergence(
    system: &Arc<NikishinSystem>,
    ladder: &[MultiIndex],
    probes: &[Complex64],
    policy: &PrecisionPolicy,
) -> Result<ExperimentReport> {
    let ladder = sorted_ladder(ladder)?;
    let m = system.m();
    check_probes(system, probes, &[m])?;
    let bits = system.bits;
    let zs: Vec<Complex> = probes.iter().map(|z| to_complex(z, bits)).collect();
    let mut refs = vec![Vec::new(); m];
    for (j, r) in refs.iter_mut().enumerate() {
        for z in &zs {
            r.push(system.cauchy_transform(m, j + 1, z)?.0);
        }
    }
    let rows = ladder_map(&ladder, |n| {
        let sol = solve_hp(system, n, policy)?;
        let mut rows = Vec::new();
        for (p, z) in zs.iter().enumerate() {
            let am = sol.poly(m).eval_complex(z);
            for (j, r) in refs.iter().enumerate() {
                let v = Complex::with_val(bits, sol.poly(j).eval_complex(z) / &am);
                rows.push(row(n, Some(p), format!("a{j}/a{m}"), &v, &r[p]));
            }
        }
        Ok(rows)
    })?;
    let mut rep = ExperimentReport::new("markov_convergence", bits, ladder, probes);
    rep.rows = rows.into_iter().flatten().collect();
    rep.summarize();
    Ok(rep)
}

/// Surface map for the intervals of `system` with pole sheet `l`.
pub fn surface_for(system: &NikishinSystem, l: usize, policy: &PrecisionPolicy) -> Result<SurfaceMap> {
    system.generator.require_disjoint_bounded()?;
    let spec = SurfaceSpec::from_generator(&system.generator, l)?;
    build_surface_map(&spec, policy)
}

fn check_pole_sheet(system: &NikishinSystem, l: usize) -> Result<()> {
    let m = system.m();
    if l == 0 || l > m {
        return Err(Error::Argument(format!("pole sheet {l} must lie in 1..={m}")));
    }
    Ok(())
}

/// `Q_{n^l,k} / Q_{n,k}` against `F~_k` for `k = 1..m`, and
/// `a_{n^l,k} / a_{n,k}` against `psi_m / psi_m'(inf)` for `k = 0..m`.
pub fn run_ratio_asymptotics(
    system: &Arc<NikishinSystem>,
    ladder: &[MultiIndex],
    l: usize,
    probes: &[Complex64],
    policy: &PrecisionPolicy,
) -> Result<ExperimentReport> {
    check_pole_sheet(system, l)?;
    let ladder = sorted_ladder(ladder)?;
    let m = system.m();
    check_probes(system, probes, &(1..=m).collect::<Vec<_>>())?;
    let bits = system.bits;
    let map = surface_for(system, l, &PrecisionPolicy { bits, ..*policy })?;
    let zs: Vec<Complex> = probes.iter().map(|z| to_complex(z, bits)).collect();
    let mut f_ref = vec![Vec::new(); m + 1];
    let mut psi_ref = Vec::new();
    for z in &zs {
        for (k, r) in f_ref.iter_mut().enumerate().skip(1) {
            r.push(map.f_tilde(k, z)?);
        }
        psi_ref.push(map.psi_m_normalized(z)?);
    }
    let rows = ladder_map(&ladder, |n| {
        let base = FormFamily::solve(system, n, policy)?;
        let next = FormFamily::solve(system, &n.incremented(l), policy)?;
        let mut rows = Vec::new();
        for (p, z) in zs.iter().enumerate() {
            for k in 1..=m {
                let v = ratio_of_monic(&next.q[k], &base.q[k], z);
                rows.push(row(n, Some(p), format!("Q{k}"), &v, &f_ref[k][p]));
            }
            for k in 0..=m {
                let v = Complex::with_val(
                    bits,
                    next.solution.poly(k).eval_complex(z) / base.solution.poly(k).eval_complex(z),
                );
                rows.push(row(n, Some(p), format!("a{k}"), &v, &psi_ref[p]));
            }
        }
        Ok(rows)
    })?;
    let mut rep = ExperimentReport::new(&format!("ratio_asymptotics_l{l}"), bits, ladder, probes);
    rep.rows = rows.into_iter().flatten().collect();
    rep.summarize();
    Ok(rep)
}

/// `kappa_{n^l,k} / kappa_{n,k}` against `kappa_k`, the telescoping identity
/// for `K_{n^l,k-1} / K_{n,k-1}`, its limit `kappa_k ... kappa_m`, and
/// `|A_{n^l,k} / A_{n,k}|` against `|F~_k / F~_{k+1}| / (kappa_{k+1} ... kappa_m)^2`.
pub fn run_kappa(
    system: &Arc<NikishinSystem>,
    ladder: &[MultiIndex],
    l: usize,
    probes: &[Complex64],
    policy: &PrecisionPolicy,
) -> Result<ExperimentReport> {
    check_pole_sheet(system, l)?;
    let ladder = sorted_ladder(ladder)?;
    let m = system.m();
    check_probes(system, probes, &(1..=m).collect::<Vec<_>>())?;
    let bits = system.bits;
    let map = surface_for(system, l, &PrecisionPolicy { bits, ..*policy })?;
    let kappa = map.kappa();
    let mut kappa_lim = vec![Float::with_val(bits, 0)];
    kappa_lim.extend(kappa.iter().map(|k| Float::with_val(bits, k)));
    // kappa_k ... kappa_m, and the tail squares kappa_{k+1}^2 ... kappa_m^2
    let mut tail = vec![Float::with_val(bits, 1); m + 2];
    for k in (1..=m).rev() {
        tail[k] = Float::with_val(bits, &tail[k + 1] * &kappa_lim[k]);
    }
    let zs: Vec<Complex> = probes.iter().map(|z| to_complex(z, bits)).collect();
    let mut a_ref = vec![Vec::new(); m];
    for z in &zs {
        let mut ft = vec![Complex::with_val(bits, 1); m + 2];
        for (k, f) in ft.iter_mut().enumerate().take(m + 1).skip(1) {
            *f = map.f_tilde(k, z)?;
        }
        for (k, r) in a_ref.iter_mut().enumerate() {
            let q = Complex::with_val(bits, &ft[k] / &ft[k + 1]);
            let mut v = Float::with_val(bits, q.abs_ref());
            v /= Float::with_val(bits, tail[k + 1].square_ref());
            r.push(Complex::with_val(bits, (v, 0)));
        }
    }
    let guard = -(bits as f64) + 24.0;
    let out = ladder_map(&ladder, |n| {
        let base = FormFamily::solve(system, n, policy)?;
        let next = FormFamily::solve(system, &n.incremented(l), policy)?;
        let (kb, cb) = base.k_constants()?;
        let (kn, cn) = next.k_constants()?;
        let mut rows = Vec::new();
        let mut checks = Vec::new();
        let mut ratios = vec![Float::with_val(bits, 1); m + 1];
        for k in 1..=m {
            ratios[k] = Float::with_val(bits, &cn[k] / &cb[k]);
            rows.push(real_row(n, format!("kappa{k}"), &ratios[k], &kappa_lim[k]));
        }
        for k in 1..=m {
            let kr = Float::with_val(bits, &kn[k - 1] / &kb[k - 1]);
            rows.push(real_row(n, format!("K{}", k - 1), &kr, &tail[k]));
            let mut prod = Float::with_val(bits, 1);
            for r in &ratios[k..] {
                prod *= r;
            }
            let rel = Float::with_val(bits, &kr - &prod) / &kr;
            let rel = log2_abs(&rel);
            checks.push(Check {
                index: n.to_string(),
                name: format!("telescoping K{}", k - 1),
                passed: rel < guard,
                measured: format!("2^{rel:.1}"),
                expected: format!("< 2^{guard:.0}"),
            });
        }
        for (p, z) in zs.iter().enumerate() {
            for k in 0..m {
                let iv_ok = |j: usize| j == 0 || system.interval(j).distance(z.real().to_f64(), z.imag().to_f64()) >= MIN_PROBE_DISTANCE;
                if !(iv_ok(k) && iv_ok(k + 1)) {
                    continue;
                }
                let a = next.solution.evaluate_form(k, z)?;
                let b = base.solution.evaluate_form(k, z)?;
                let q = Complex::with_val(bits, &a / &b);
                let v = Complex::with_val(bits, (Float::with_val(bits, q.abs_ref()), 0));
                rows.push(row(n, Some(p), format!("A{k}"), &v, &a_ref[k][p]));
            }
        }
        Ok((rows, checks))
    })?;
    let mut rep = ExperimentReport::new(&format!("kappa_l{l}"), bits, ladder, probes);
    for (r, c) in out {
        rep.rows.extend(r);
        rep.checks.extend(c);
    }
    rep.summarize();
    Ok(rep)
}

/// Largest positive jump `n_{j+1} - n_j` over the ladder.
fn ladder_n(ladder: &[MultiIndex]) -> usize {
    ladder
        .iter()
        .flat_map(|n| n.components().windows(2).map(|w| w[1].saturating_sub(w[0])).collect::<Vec<_>>())
        .max()
        .unwrap_or(0)
}

/// Zero counts, interlacing and sign-change bounds along a ladder.
pub fn zero_structure_report(system: &Arc<NikishinSystem>, ladder: &[MultiIndex], policy: &PrecisionPolicy) -> Result<ExperimentReport> {
    let ladder = sorted_ladder(ladder)?;
    let m = system.m();
    let big_n = ladder_n(&ladder);
    let bits = system.bits;
    let out = ladder_map(&ladder, |n| {
        let sol = solve_hp(system, n, policy)?;
        let key = n.to_string();
        let total = n.total();
        let mut checks = Vec::new();
        let mut push = |name: String, passed: bool, measured: String, expected: String| {
            checks.push(Check {
                index: key.clone(),
                name,
                passed,
                measured,
                expected,
            })
        };
        for (j, r) in sol.residual_orders.iter().enumerate() {
            push(
                format!("exact order level {j}"),
                r.exact,
                format!("{:?}", r.achieved_order),
                r.required_order.to_string(),
            );
        }
        for j in 1..=m {
            let found = form_zeros(&sol, j).map(|q| q.degree());
            let eta = n.eta(j);
            push(
                format!("zeros of A{j} in interval {j}"),
                matches!(found, Ok(d) if d == eta),
                match &found {
                    Ok(d) => d.to_string(),
                    Err(e) => e.to_string(),
                },
                eta.to_string(),
            );
        }
        let dm = system.interval(m);
        let am = sol.poly(m);
        push(
            format!("degree a{m}"),
            am.degree() == Some(total),
            format!("{:?}", am.degree()),
            total.to_string(),
        );
        let rm = polynomial_zeros(am, dm, total);
        push(
            format!("simple zeros of a{m} in interval {m}"),
            rm.is_ok() && sturm_count(am, dm.a, dm.b) == total,
            match &rm {
                Ok(r) => r.len().to_string(),
                Err(e) => e.to_string(),
            },
            total.to_string(),
        );
        let a1 = sol.poly(m - 1);
        let r1 = polynomial_zeros(a1, dm, total - 1);
        push(
            format!("zeros of a{} in interval {m}", m - 1),
            r1.is_ok(),
            match &r1 {
                Ok(r) => r.len().to_string(),
                Err(e) => e.to_string(),
            },
            (total - 1).to_string(),
        );
        if let (Ok(x), Ok(y)) = (&rm, &r1) {
            let il = interlace_check(x, y);
            push(
                format!("a{} interlaces a{m}", m - 1),
                matches!(&il, Ok(i) if i.interlaced),
                format!("{:?}", il.map(|i| i.witness)),
                "interlaced".into(),
            );
        }
        let bound = total as i64 - 2 * m as i64 - (big_n * m * (m + 1) / 2) as i64;
        for j in 0..m.saturating_sub(1) {
            let count = polynomial_sign_changes(sol.poly(j), dm, 4096)?;
            push(
                format!("sign changes of a{j} in interval {m}"),
                count as i64 >= bound,
                count.to_string(),
                format!(">= {bound}"),
            );
        }
        Ok(checks)
    })?;
    let mut rep = ExperimentReport::new("zero_structure", bits, ladder, &[]);
    rep.checks = out.into_iter().flatten().collect();
    Ok(rep)
}
