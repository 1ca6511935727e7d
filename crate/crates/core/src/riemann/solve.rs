use num_complex::Complex64;
use rug::Float;

use super::pattern::Event;
use crate::error::{Error, Result};
use crate::linalg::{solve_f64, solve_float};
use crate::precision::log2_abs;

/// Point on the real `w` axis: a critical point by index or a pole by sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Label {
    Crit(usize),
    Pole(usize),
}

/// Unknowns `(gamma, delta, w_k, rho_k, c_i)` of a covering with `rho_0 = 1`,
/// and the order in which poles and critical points must sit on the axis.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    /// Number of slits; there are `2 m` critical points.
    pub m: usize,
    pub finite: Vec<usize>,
    pub inf_sheet: usize,
    /// Labels along the axis from `0+` through `inf` to `0-`, without the
    /// pole at zero.
    pub sequence: Vec<Label>,
    pub targets: Vec<f64>,
    pub slits: Vec<usize>,
}

fn key(w: f64) -> (u8, f64) {
    (u8::from(w < 0.0), w)
}

impl Layout {
    /// Layout read off a walk of the real sheets.
    pub fn from_walk(m: usize, inf_sheet: usize, events: &[Event]) -> Layout {
        let mut finite = Vec::new();
        let mut sequence = Vec::new();
        let mut targets = Vec::new();
        let mut slits = Vec::new();
        for e in &events[..events.len() - 1] {
            match *e {
                Event::Critical { slit, value } => {
                    sequence.push(Label::Crit(targets.len()));
                    targets.push(value);
                    slits.push(slit);
                }
                Event::Pole { sheet, .. } => {
                    sequence.push(Label::Pole(sheet));
                    if sheet != inf_sheet {
                        finite.push(sheet);
                    }
                }
            }
        }
        Layout {
            m,
            finite,
            inf_sheet,
            sequence,
            targets,
            slits,
        }
    }

    /// Layout of an existing covering, taking its current order as reference.
    pub fn from_state(finite: Vec<usize>, inf_sheet: usize, u: &[f64], targets: Vec<f64>, slits: Vec<usize>) -> Layout {
        let mut l = Layout {
            m: targets.len() / 2,
            finite,
            inf_sheet,
            sequence: vec![],
            targets,
            slits,
        };
        l.sequence = l.sequence_of(u);
        l
    }

    pub fn unknowns(&self) -> usize {
        4 * self.m
    }

    pub fn nf(&self) -> usize {
        self.finite.len()
    }

    pub fn w_at(&self, k: usize) -> usize {
        2 + k
    }

    pub fn rho_at(&self, k: usize) -> usize {
        2 + self.nf() + k
    }

    pub fn c_at(&self, i: usize) -> usize {
        2 + 2 * self.nf() + i
    }

    fn sequence_of(&self, u: &[f64]) -> Vec<Label> {
        let mut pts: Vec<((u8, f64), Label)> = Vec::new();
        for (k, &s) in self.finite.iter().enumerate() {
            pts.push((key(u[self.w_at(k)]), Label::Pole(s)));
        }
        for i in 0..2 * self.m {
            pts.push((key(u[self.c_at(i)]), Label::Crit(i)));
        }
        pts.push(((0, f64::INFINITY), Label::Pole(self.inf_sheet)));
        pts.sort_by(|a, b| a.0 .0.cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
        pts.into_iter().map(|p| p.1).collect()
    }

    /// Whether every pole and critical point of `u` is where the layout
    /// requires it along the real axis.
    pub fn order_matches(&self, u: &[f64]) -> bool {
        if u.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let nonzero = (0..self.nf()).all(|k| u[self.w_at(k)] != 0.0) && (0..2 * self.m).all(|i| u[self.c_at(i)] != 0.0);
        nonzero && self.sequence_of(u) == self.sequence
    }

    /// `R, R', R''` at a real point.
    pub fn eval(&self, u: &[f64], c: f64) -> (f64, f64, f64) {
        let t = 1.0 / c;
        let mut r = u[0] * c + u[1] + t;
        let mut r1 = u[0] - t * t;
        let mut r2 = 2.0 * t * t * t;
        for k in 0..self.nf() {
            let q = 1.0 / (c - u[self.w_at(k)]);
            let rho = u[self.rho_at(k)];
            r += rho * q;
            r1 -= rho * q * q;
            r2 += 2.0 * rho * q * q * q;
        }
        (r, r1, r2)
    }

    /// Residual of `R'(c_i) = 0` and `R(c_i) = v_i`.
    pub fn residual(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.unknowns());
        for (i, vi) in v.iter().enumerate() {
            let (r, r1, _) = self.eval(u, u[self.c_at(i)]);
            out.push(r1);
            out.push(r - vi);
        }
        out
    }

    pub fn jacobian(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let n = self.unknowns();
        let mut jac = vec![vec![0.0; n]; n];
        for i in 0..2 * self.m {
            let c = u[self.c_at(i)];
            let (_, r1, r2) = self.eval(u, c);
            let (a, b) = (2 * i, 2 * i + 1);
            jac[a][0] = 1.0;
            jac[b][0] = c;
            jac[b][1] = 1.0;
            for k in 0..self.nf() {
                let q = 1.0 / (c - u[self.w_at(k)]);
                let rho = u[self.rho_at(k)];
                jac[a][self.w_at(k)] = -2.0 * rho * q * q * q;
                jac[a][self.rho_at(k)] = -q * q;
                jac[b][self.w_at(k)] = rho * q * q;
                jac[b][self.rho_at(k)] = q;
            }
            jac[a][self.c_at(i)] = r2;
            jac[b][self.c_at(i)] = r1;
        }
        jac
    }
}

fn newton_f64(layout: &Layout, u: &mut [f64], v: &[f64]) -> Option<usize> {
    for it in 1..=10 {
        let f = layout.residual(u, v);
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let du = solve_f64(layout.jacobian(u), rhs)?;
        let size = 1.0 + u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let step = du.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for (x, d) in u.iter_mut().zip(&du) {
            *x += d;
        }
        if !step.is_finite() {
            return None;
        }
        if step < 1e-13 * size {
            return Some(it);
        }
    }
    None
}

/// Moves the critical values of an exact solution `u` (values `v0`) along a
/// straight line to the layout targets, keeping every point in place on the
/// real axis.
pub(crate) fn continue_values(layout: &Layout, mut u: Vec<f64>, v0: &[f64], trace: &mut Vec<String>) -> Result<Vec<f64>> {
    let v1 = &layout.targets;
    let vt = |t: f64| -> Vec<f64> { v0.iter().zip(v1).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut t, mut dt) = (0.0f64, 0.05f64);
    let mut steps = 0usize;
    while t < 1.0 {
        let t1 = (t + dt).min(1.0);
        let mut cand = u.clone();
        // tangent predictor
        let mut rhs = vec![0.0; layout.unknowns()];
        for i in 0..v0.len() {
            rhs[2 * i + 1] = (v1[i] - v0[i]) * (t1 - t);
        }
        if let Some(du) = solve_f64(layout.jacobian(&u), rhs) {
            for (x, d) in cand.iter_mut().zip(&du) {
                *x += d;
            }
        }
        let ok = newton_f64(layout, &mut cand, &vt(t1)).filter(|_| layout.order_matches(&cand));
        match ok {
            Some(its) => {
                u = cand;
                t = t1;
                steps += 1;
                if its <= 4 {
                    dt = (dt * 1.5).min(0.25);
                }
            }
            None => {
                dt /= 2.0;
                if dt < 1e-10 {
                    trace.push(format!("stalled at t = {t:.6}"));
                    return Err(Error::Newton {
                        reason: format!("continuation step underflow at t = {t:.6}"),
                        trace: trace.clone(),
                    });
                }
            }
        }
    }
    trace.push(format!("{} slits: continuation in {steps} steps", layout.m));
    Ok(u)
}

/// A real covering in double precision with `rho_0 = 1` at `w = 0`.
#[derive(Debug, Clone)]
pub(crate) struct Covering {
    pub gamma: f64,
    pub delta: f64,
    pub rho0: f64,
    pub zero_sheet: usize,
    pub inf_sheet: usize,
    /// `(sheet, location, residue)`.
    pub poles: Vec<(usize, f64, f64)>,
    /// `(w, slit, endpoint)`.
    pub crit: Vec<(f64, usize, f64)>,
}

impl Covering {
    fn layout(&self) -> (Layout, Vec<f64>) {
        let finite: Vec<usize> = self.poles.iter().map(|p| p.0).collect();
        let mut u = vec![self.gamma, self.delta];
        u.extend(self.poles.iter().map(|p| p.1));
        u.extend(self.poles.iter().map(|p| p.2));
        u.extend(self.crit.iter().map(|c| c.0));
        let targets = self.crit.iter().map(|c| c.2).collect();
        let slits = self.crit.iter().map(|c| c.1).collect();
        (Layout::from_state(finite, self.inf_sheet, &u, targets, slits), u)
    }

    fn set(&mut self, layout: &Layout, u: &[f64]) {
        self.gamma = u[0];
        self.delta = u[1];
        for (k, p) in self.poles.iter_mut().enumerate() {
            p.1 = u[layout.w_at(k)];
            p.2 = u[layout.rho_at(k)];
        }
        for (i, c) in self.crit.iter_mut().enumerate() {
            c.0 = u[layout.c_at(i)];
        }
    }

    pub fn eval(&self, w: f64) -> (f64, f64) {
        let t = self.rho0 / w;
        let mut r = self.gamma * w + self.delta + t;
        let mut r1 = self.gamma - t / w;
        for &(_, wk, rk) in &self.poles {
            let q = 1.0 / (w - wk);
            r += rk * q;
            r1 -= rk * q * q;
        }
        (r, r1)
    }

    fn eval_complex(&self, w: Complex64, z: Complex64) -> (Complex64, Complex64) {
        let t = self.rho0 / w;
        let mut r = self.gamma * w + self.delta + t - z;
        let mut r1 = self.gamma - t / w;
        for &(_, wk, rk) in &self.poles {
            let q = 1.0 / (w - wk);
            r += rk * q;
            r1 -= rk * q * q;
        }
        (r, r1)
    }

    /// Sheets in the order used by [`Covering::guesses`].
    pub fn sheets(&self) -> Vec<usize> {
        let mut s = vec![self.zero_sheet, self.inf_sheet];
        s.extend(self.poles.iter().map(|p| p.0));
        s
    }

    /// Roots of `R(w) = z` for large `z`, one per sheet.
    pub fn guesses(&self, z: Complex64) -> Vec<Complex64> {
        let mut g = vec![self.rho0 / z, (z - self.delta) / self.gamma];
        g.extend(self.poles.iter().map(|&(_, wk, rk)| wk + rk / z));
        g
    }

    /// Adds sheet `new_sheet` behind `host` through a short slit around the
    /// midpoint of `slit`, then widens that slit to the full interval.
    fn attach(&mut self, new_sheet: usize, host: usize, slit: usize, lo: f64, hi: f64, trace: &mut Vec<String>) -> Result<()> {
        let x = 0.5 * (lo + hi);
        let scale = 1.0 + lo.abs().max(hi.abs());
        let guess = |z: Complex64| self.guesses(z);
        let (vals, _, _) = track_roots(&|w, z| self.eval_complex(w, z), &guess, Complex64::new(x, 0.0), scale)?;
        let idx = self.sheets().iter().position(|&s| s == host).unwrap();
        let ws = vals[idx].re;
        let (_, d) = self.eval(ws);
        // bubble whose slit has half-length `h0`: values x -+ 2 |R'| eta
        let h0 = 0.02 * (hi - lo);
        let eta = h0 / (2.0 * d.abs());
        let eps = d * eta * eta;
        self.poles.push((new_sheet, ws, eps));
        let mut extra = Vec::new();
        for s in [-1.0, 1.0] {
            let mut c = ws + s * eta;
            for _ in 0..60 {
                let t = self.rho0 / c;
                let mut r1 = self.gamma - t / c;
                let mut r2 = 2.0 * t / (c * c);
                for &(_, wk, rk) in &self.poles {
                    let q = 1.0 / (c - wk);
                    r1 -= rk * q * q;
                    r2 += 2.0 * rk * q * q * q;
                }
                let step = r1 / r2;
                c -= step;
                if step.abs() < 1e-15 * (1.0 + c.abs()) {
                    break;
                }
            }
            extra.push((c, self.eval(c).0));
        }
        extra.sort_by(|p, q| p.1.total_cmp(&q.1));
        if !(extra[0].1 < x && x < extra[1].1 && extra[0].1 > lo && extra[1].1 < hi) {
            return Err(Error::Newton {
                reason: format!("bubble for slit {slit} did not open around {x}"),
                trace: trace.clone(),
            });
        }
        self.crit.push((extra[0].0, slit, lo));
        self.crit.push((extra[1].0, slit, hi));
        // re-solve the existing critical points in the perturbed map
        let (layout, mut u) = self.layout();
        for i in 0..2 * layout.m {
            for _ in 0..20 {
                let (_, r1, r2) = layout.eval(&u, u[layout.c_at(i)]);
                u[layout.c_at(i)] -= r1 / r2;
            }
        }
        let layout = Layout::from_state(layout.finite.clone(), layout.inf_sheet, &u, layout.targets.clone(), layout.slits.clone());
        let v0: Vec<f64> = (0..2 * layout.m).map(|i| layout.eval(&u, u[layout.c_at(i)]).0).collect();
        let u = continue_values(&layout, u, &v0, trace)?;
        self.set(&layout, &u);
        Ok(())
    }

    /// Moves the pole of `sheet` to `w = 0` and rescales so that its residue
    /// becomes one.
    fn recenter(&mut self, sheet: usize) {
        if sheet != self.zero_sheet {
            let k = self.poles.iter().position(|p| p.0 == sheet).unwrap();
            let (_, a, rho) = self.poles[k];
            for p in self.poles.iter_mut() {
                p.1 -= a;
            }
            for c in self.crit.iter_mut() {
                c.0 -= a;
            }
            self.poles[k] = (self.zero_sheet, -a, self.rho0);
            self.zero_sheet = sheet;
            self.rho0 = rho;
            self.delta += self.gamma * a;
        }
        // w -> lambda w with lambda = 1 / rho0
        let lambda = 1.0 / self.rho0;
        self.gamma /= lambda;
        self.rho0 = 1.0;
        for p in self.poles.iter_mut() {
            p.1 *= lambda;
            p.2 *= lambda;
        }
        for c in self.crit.iter_mut() {
            c.0 *= lambda;
        }
    }
}

/// Tracks the roots of `R(w) = z` from a far point above (or below) `z`
/// down to `z`. `guesses` gives the roots near infinity, one per sheet.
pub(crate) fn track_roots(
    f: &dyn Fn(Complex64, Complex64) -> (Complex64, Complex64),
    guesses: &dyn Fn(Complex64) -> Vec<Complex64>,
    z: Complex64,
    scale: f64,
) -> Result<(Vec<Complex64>, usize, f64)> {
    let sgn = if z.im < 0.0 { -1.0 } else { 1.0 };
    let scale = scale + z.norm();
    let far = 1e3 * scale;
    let at = |s: f64| z + Complex64::new(0.0, sgn * s);
    let newton = |zz: Complex64, w0: Complex64| -> Option<Complex64> {
        let mut w = w0;
        let mut last = f64::INFINITY;
        for _ in 0..24 {
            let (v, d) = f(w, zz);
            let step = v / d;
            w -= step;
            if !w.is_finite() {
                return None;
            }
            let size = step.norm() / (1.0 + w.norm());
            if size <= 1e-13 || (size < 1e-10 && size >= last) {
                return Some(w);
            }
            last = size;
        }
        None
    };
    // distance from each root to its nearest neighbour
    let sep = |v: &[Complex64], i: usize| {
        (0..v.len())
            .filter(|&j| j != i)
            .map(|j| (v[i] - v[j]).norm())
            .fold(f64::INFINITY, f64::min)
    };
    let start = at(far);
    let guess = guesses(start);
    let mut cur = Vec::with_capacity(guess.len());
    for g in &guess {
        cur.push(newton(start, *g).ok_or_else(|| Error::Newton {
            reason: "branch continuation failed to start".into(),
            trace: vec![],
        })?);
    }
    for (i, (r, g)) in cur.iter().zip(&guess).enumerate() {
        if (r - g).norm() * 3.0 > sep(&cur, i) {
            return Err(Error::Newton {
                reason: "branches at infinity are not separated".into(),
                trace: vec![],
            });
        }
    }
    let (mut s, mut h) = (far, far / 2.0);
    let (mut steps, mut length) = (0usize, 0.0);
    loop {
        let s_new = if s - h < 1e-12 * scale { 0.0 } else { s - h };
        let zz = at(s_new);
        let next: Option<Vec<Complex64>> = cur.iter().map(|w| newton(zz, *w)).collect();
        let ok = next.filter(|nx| (0..nx.len()).all(|i| (nx[i] - cur[i]).norm() * 3.0 < sep(nx, i).min(sep(&cur, i))));
        match ok {
            Some(nx) => {
                cur = nx;
                length += s - s_new;
                steps += 1;
                s = s_new;
                if s == 0.0 {
                    break;
                }
                h = s / 2.0;
            }
            None => {
                h /= 4.0;
                if h < 1e-15 * scale {
                    return Err(Error::Newton {
                        reason: format!("branch continuation stalled near {z}"),
                        trace: vec![],
                    });
                }
            }
        }
    }
    Ok((cur, steps, length))
}

/// Covering for the chain of sheets `0..=m` glued along `intervals`, with
/// sheet `zero_sheet` at `w = 0` and sheet `m` at `w = inf`. Built from the
/// two-sheeted map of the last interval by attaching one sheet at a time.
pub(crate) fn build_chain(intervals: &[(f64, f64)], zero_sheet: usize, trace: &mut Vec<String>) -> Result<Covering> {
    let m = intervals.len();
    let (lo, hi) = intervals[m - 1];
    let h = 0.5 * (hi - lo);
    let g = 0.25 * h * h;
    let c = 1.0 / g.sqrt();
    let mut cov = Covering {
        gamma: g,
        delta: 0.5 * (lo + hi),
        rho0: 1.0,
        zero_sheet: m - 1,
        inf_sheet: m,
        poles: vec![],
        crit: vec![(c, m, hi), (-c, m, lo)],
    };
    for s in (1..m).rev() {
        let (lo, hi) = intervals[s - 1];
        cov.attach(s - 1, s, s, lo, hi, trace)?;
    }
    cov.recenter(zero_sheet);
    Ok(cov)
}

/// Refines a double precision solution to `bits` by Newton's method.
pub(crate) fn polish(layout: &Layout, u: &[f64], bits: u32, trace: &mut Vec<String>) -> Result<Vec<Float>> {
    let n = layout.unknowns();
    let nf = layout.nf();
    let mut x: Vec<Float> = u.iter().map(|&v| Float::with_val(bits, v)).collect();
    let targets: Vec<Float> = layout.targets.iter().map(|&v| Float::with_val(bits, v)).collect();
    let tol = -(bits as f64) + 12.0;
    for it in 1..=24 {
        let mut jac = vec![vec![Float::new(bits); n]; n];
        let mut rhs = vec![Float::new(bits); n];
        for i in 0..2 * layout.m {
            let c = x[layout.c_at(i)].clone();
            let t = Float::with_val(bits, c.recip_ref());
            let t2 = Float::with_val(bits, t.square_ref());
            let mut r = Float::with_val(bits, &x[0] * &c) + &x[1] + &t;
            let mut r1 = Float::with_val(bits, &x[0] - &t2);
            let mut r2 = Float::with_val(bits, &t2 * &t) * 2u32;
            let (a, b) = (2 * i, 2 * i + 1);
            for k in 0..nf {
                let q = Float::with_val(bits, &c - &x[layout.w_at(k)]).recip();
                let q2 = Float::with_val(bits, q.square_ref());
                let q3 = Float::with_val(bits, &q2 * &q);
                let rho = &x[layout.rho_at(k)];
                r += Float::with_val(bits, rho * &q);
                r1 -= Float::with_val(bits, rho * &q2);
                r2 += Float::with_val(bits, rho * &q3) * 2u32;
                jac[a][layout.w_at(k)] = Float::with_val(bits, rho * &q3) * -2i32;
                jac[a][layout.rho_at(k)] = -q2.clone();
                jac[b][layout.w_at(k)] = Float::with_val(bits, rho * &q2);
                jac[b][layout.rho_at(k)] = q;
            }
            jac[a][0] = Float::with_val(bits, 1);
            jac[b][0] = c;
            jac[b][1] = Float::with_val(bits, 1);
            jac[a][layout.c_at(i)] = r2;
            rhs[a] = -r1.clone();
            jac[b][layout.c_at(i)] = r1;
            rhs[b] = -(r - &targets[i]);
        }
        let dx = solve_float(jac, rhs, bits).ok_or_else(|| Error::Newton {
            reason: "singular Jacobian during refinement".into(),
            trace: trace.clone(),
        })?;
        let size = x.iter().map(log2_abs).fold(0.0f64, f64::max);
        let step = dx.iter().map(log2_abs).fold(f64::NEG_INFINITY, f64::max);
        for (v, d) in x.iter_mut().zip(&dx) {
            *v += d;
        }
        if step < size + tol {
            trace.push(format!("refined to {bits} bits in {it} iterations"));
            return Ok(x);
        }
    }
    Err(Error::Newton {
        reason: format!("refinement to {bits} bits did not converge"),
        trace: trace.clone(),
    })
}

/// Splits a solution vector into `(gamma, delta, w, rho, c)`.
pub(crate) fn unpack(layout: &Layout, x: Vec<Float>) -> (Float, Float, Vec<Float>, Vec<Float>, Vec<Float>) {
    let nf = layout.nf();
    let mut it = x.into_iter();
    let gamma = it.next().unwrap();
    let delta = it.next().unwrap();
    let w: Vec<Float> = it.by_ref().take(nf).collect();
    let rho: Vec<Float> = it.by_ref().take(nf).collect();
    let c: Vec<Float> = it.collect();
    (gamma, delta, w, rho, c)
}

/// Orders a chain covering like `layout` and returns its unknown vector.
pub(crate) fn arrange(layout: &Layout, cov: &Covering) -> Result<Vec<f64>> {
    let mismatch = |what: &str| Error::Newton {
        reason: format!("constructed covering does not match the sheet structure: {what}"),
        trace: vec![],
    };
    if cov.inf_sheet != layout.inf_sheet || cov.poles.len() != layout.nf() {
        return Err(mismatch("poles"));
    }
    let mut u = vec![cov.gamma, cov.delta];
    let mut w = Vec::new();
    let mut rho = Vec::new();
    for s in &layout.finite {
        let p = cov.poles.iter().find(|p| p.0 == *s).ok_or_else(|| mismatch("sheet"))?;
        w.push(p.1);
        rho.push(p.2);
    }
    u.extend(w);
    u.extend(rho);
    let mut crit = cov.crit.clone();
    crit.sort_by(|a, b| key(a.0).0.cmp(&key(b.0).0).then(a.0.total_cmp(&b.0)));
    for (i, c) in crit.iter().enumerate() {
        if c.2 != layout.targets[i] || c.1 != layout.slits[i] {
            return Err(mismatch("critical values"));
        }
        u.push(c.0);
    }
    if !layout.order_matches(&u) {
        return Err(mismatch("order along the axis"));
    }
    Ok(u)
}
