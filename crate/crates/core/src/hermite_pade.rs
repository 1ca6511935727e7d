//! Assembly and solution of the multi-level Hermite-Padé interpolation system.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::null_vector;
use crate::measures::{MomentTable, NikishinSystem};
use crate::poly::Polynomial;
use crate::precision::{decimal, log2_abs, zero_threshold, PrecisionPolicy};

/// Extra Laurent coefficients required beyond the interpolation conditions.
pub const GUARD_MARGIN: usize = 4;

/// Multi-index `n = (n_1, ..., n_m)`, not all zero.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct MultiIndex(Vec<usize>);

impl TryFrom<Vec<usize>> for MultiIndex {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        MultiIndex::new(v)
    }
}

impl From<MultiIndex> for Vec<usize> {
    fn from(n: MultiIndex) -> Self {
        n.0
    }
}

impl MultiIndex {
    pub fn new(n: Vec<usize>) -> Result<Self> {
        if n.is_empty() {
            return Err(Error::InvalidIndex("multi-index must have at least one component".into()));
        }
        if n.iter().all(|&v| v == 0) {
            return Err(Error::InvalidIndex("multi-index must not be identically zero".into()));
        }
        Ok(MultiIndex(n))
    }

    pub fn m(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    /// Component `n_j`, 1-based.
    pub fn get(&self, j: usize) -> usize {
        self.0[j - 1]
    }

    /// `|n|`.
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    /// `n_1 + ... + n_j` (zero for `j = 0`).
    pub fn eta(&self, j: usize) -> usize {
        self.0[..j].iter().sum()
    }

    /// `min{n_j + 1, n_{j+1} + 2, ..., n_k + 2}` for `1 <= j <= k <= m`.
    pub fn chi(&self, j: usize, k: usize) -> usize {
        assert!(1 <= j && j <= k && k <= self.m());
        let mut v = self.get(j) + 1;
        for i in j + 1..=k {
            v = v.min(self.get(i) + 2);
        }
        v
    }

    /// Index with one added to component `l` (1-based).
    pub fn incremented(&self, l: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[l - 1] += 1;
        MultiIndex(v)
    }

    pub fn max_component(&self) -> usize {
        *self.0.iter().max().unwrap()
    }

    /// Moments needed to assemble and check the system for this index.
    pub fn required_degree(&self) -> usize {
        self.total() + self.max_component() + GUARD_MARGIN
    }

    /// Ordering used in reports: by `|n|`, then lexicographically.
    pub fn report_key(&self) -> (usize, Vec<usize>) {
        (self.total(), self.0.clone())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", s.join(","))
    }
}

impl FromStr for MultiIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let v: std::result::Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        let v = v.map_err(|_| Error::InvalidIndex(format!("cannot parse '{s}' as a comma-separated multi-index")))?;
        MultiIndex::new(v)
    }
}

/// Vanishing order of one level form at infinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelResidual {
    pub level: usize,
    /// `n_{j+1} + 1`.
    pub required_order: usize,
    /// Exponent `t` of the first coefficient `z^{-t}` that does not vanish
    /// (non-positive when a polynomial part survives). `None` when every
    /// available coefficient vanishes.
    pub achieved_order: Option<i64>,
    pub exact: bool,
    /// Coefficient of `z^{-required_order}`.
    #[serde(with = "decimal")]
    pub leading_coefficient: Float,
    /// log2 of the largest constrained coefficient relative to its scale.
    pub constrained_log2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HPSolution {
    pub index: MultiIndex,
    /// `a_{n,0}, ..., a_{n,m}`, with `a_{n,m}` monic.
    pub polys: Vec<Polynomial>,
    pub residual_orders: Vec<LevelResidual>,
    pub normal: Vec<bool>,
    /// log2 of the pivot ratio of the equilibrated system.
    pub condition_log2: f64,
    pub precision_bits: u32,
    pub precision_trace: Vec<u32>,
    #[serde(skip)]
    system: Option<Arc<NikishinSystem>>,
}

fn sign(k: usize) -> i32 {
    if k.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn unknown_offset(n: &MultiIndex, k: usize) -> usize {
    k * n.total()
}

fn check_budget(table: &MomentTable, n: &MultiIndex) -> Result<()> {
    if n.m() != table.m {
        return Err(Error::InvalidIndex(format!(
            "index {n} has {} components but the system has {} measures",
            n.m(),
            table.m
        )));
    }
    let needed = n.required_degree();
    if table.degree < needed {
        return Err(Error::DegreeBudget {
            budget: table.degree,
            needed,
        });
    }
    Ok(())
}

/// Homogeneous system of `|n|(m+1)` equations in `|n|(m+1)+1` unknowns,
/// ordered `(a_0 coefficients, ..., a_m coefficients)`.
pub fn assemble_system(table: &MomentTable, n: &MultiIndex) -> Result<Vec<Vec<Float>>> {
    check_budget(table, n)?;
    let m = n.m();
    let big_n = n.total();
    let cols = big_n * (m + 1) + 1;
    let bits = table.precision_bits;
    let mut rows = Vec::with_capacity(big_n * (m + 1) - big_n);
    for j in 0..m {
        let lo = -(n.get(j + 1) as i64);
        let mut s = big_n as i64 - 1;
        while s >= lo {
            let mut row = vec![Float::with_val(bits, 0); cols];
            if s >= 0 {
                row[unknown_offset(n, j) + s as usize] = Float::with_val(bits, sign(j));
            }
            for k in j + 1..=m {
                let c = table.get(j + 1, k);
                let deg = if k == m { big_n } else { big_n - 1 };
                for i in 0..=deg {
                    let r = i as i64 - s - 1;
                    if r >= 0 {
                        let v = &c[r as usize];
                        row[unknown_offset(n, k) + i] = if sign(k) > 0 {
                            Float::with_val(bits, v)
                        } else {
                            Float::with_val(bits, -v)
                        };
                    }
                }
            }
            rows.push(row);
            s -= 1;
        }
    }
    Ok(rows)
}

/// Coefficient of `z^s` in the level-`j` form together with its absolute scale.
fn level_coefficient(table: &MomentTable, polys: &[Polynomial], j: usize, s: i64) -> Option<(Float, Float)> {
    let m = polys.len() - 1;
    let bits = table.precision_bits;
    let mut v = Float::with_val(bits, 0);
    let mut a = Float::with_val(bits, 0);
    if s >= 0 {
        if let Some(c) = polys[j].coefficients.get(s as usize) {
            if sign(j) > 0 {
                v += c;
            } else {
                v -= c;
            }
            a += Float::with_val(bits, c.abs_ref());
        }
    }
    for k in j + 1..=m {
        let mom = table.get(j + 1, k);
        let mut part = Float::with_val(bits, 0);
        for (i, c) in polys[k].coefficients.iter().enumerate() {
            let r = i as i64 - s - 1;
            if r < 0 {
                continue;
            }
            let mu = mom.get(r as usize)?;
            let t = Float::with_val(bits, c * mu);
            a += Float::with_val(bits, t.abs_ref());
            part += t;
        }
        if sign(k) > 0 {
            v += part;
        } else {
            v -= part;
        }
    }
    Some((v, a))
}

/// Achieved vanishing orders and leading residual coefficients.
pub fn residual_orders(table: &MomentTable, n: &MultiIndex, polys: &[Polynomial]) -> Vec<LevelResidual> {
    let m = n.m();
    let big_n = n.total() as i64;
    let bits = table.precision_bits;
    let tau = zero_threshold(bits);
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let required = n.get(j + 1) + 1;
        let mut achieved = None;
        let mut worst = f64::NEG_INFINITY;
        let mut leading = Float::with_val(bits, 0);
        let mut s = big_n - 1;
        while let Some((v, a)) = level_coefficient(table, polys, j, s) {
            let t = -s;
            let rel = log2_abs(&v) - log2_abs(&a);
            let vanishes = v.is_zero() || Float::with_val(bits, v.abs_ref()) <= Float::with_val(bits, &a * &tau);
            if t == required as i64 {
                leading = v.clone();
            }
            if t < required as i64 && rel.is_finite() {
                worst = worst.max(rel);
            }
            if !vanishes && achieved.is_none() {
                achieved = Some(t);
            }
            if achieved.is_some() && t >= required as i64 {
                break;
            }
            s -= 1;
        }
        out.push(LevelResidual {
            level: j,
            required_order: required,
            achieved_order: achieved,
            exact: achieved == Some(required as i64),
            leading_coefficient: leading,
            constrained_log2: worst,
        });
    }
    out
}

struct Solved {
    polys: Vec<Polynomial>,
    normal: Vec<bool>,
    condition_log2: f64,
}

fn solve_once(table: &MomentTable, n: &MultiIndex) -> Result<Solved> {
    let bits = table.precision_bits;
    let rows = assemble_system(table, n)?;
    let tau = zero_threshold(bits);
    let nv = null_vector(&rows, bits, &tau)?;
    let m = n.m();
    let big_n = n.total();
    let x = nv.vector;
    let lead = x[unknown_offset(n, m) + big_n].clone();
    let mut scale_m = Float::with_val(bits, 0);
    for v in &x[unknown_offset(n, m)..] {
        scale_m = scale_m.max(&Float::with_val(bits, v.abs_ref()));
    }
    if lead.is_zero() || Float::with_val(bits, lead.abs_ref()) <= Float::with_val(bits, &scale_m * &tau) {
        return Err(Error::NullSpace {
            bits,
            detail: format!("leading coefficient of the last polynomial vanishes for index {n}"),
        });
    }
    let mut polys = Vec::with_capacity(m + 1);
    let mut normal = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let deg = if k == m { big_n } else { big_n - 1 };
        let off = unknown_offset(n, k);
        let coeffs: Vec<Float> = (0..=deg).map(|i| Float::with_val(bits, &x[off + i] / &lead)).collect();
        let p = Polynomial::new(coeffs);
        let top = Float::with_val(bits, p.coefficients[deg].abs_ref());
        normal.push(!top.is_zero() && top > Float::with_val(bits, p.norm1() * &tau));
        polys.push(p);
    }
    polys[m].coefficients[big_n] = Float::with_val(bits, 1);
    Ok(Solved {
        polys,
        normal,
        condition_log2: nv.condition_log2,
    })
}

impl HPSolution {
    /// Solves from a bare moment table, without escalation. Forms cannot be
    /// evaluated off infinity for such solutions.
    pub fn from_table(table: &MomentTable, n: &MultiIndex) -> Result<HPSolution> {
        let s = solve_once(table, n)?;
        let residual_orders = residual_orders(table, n, &s.polys);
        Ok(HPSolution {
            index: n.clone(),
            polys: s.polys,
            residual_orders,
            normal: s.normal,
            condition_log2: s.condition_log2,
            precision_bits: table.precision_bits,
            precision_trace: vec![table.precision_bits],
            system: None,
        })
    }

    pub fn is_valid(&self) -> bool {
        self.normal.iter().all(|&b| b) && self.residual_orders.iter().all(|r| r.exact)
    }

    pub fn m(&self) -> usize {
        self.index.m()
    }

    pub fn system(&self) -> Result<&Arc<NikishinSystem>> {
        self.system
            .as_ref()
            .ok_or_else(|| Error::Argument("solution was computed without a discretized system".into()))
    }

    pub fn poly(&self, k: usize) -> &Polynomial {
        &self.polys[k]
    }

    /// `A_{n,j}(z)`.
    pub fn evaluate_form(&self, j: usize, z: &Complex) -> Result<Complex> {
        let m = self.m();
        if j > m {
            return Err(Error::Argument(format!("level {j} exceeds m = {m}")));
        }
        let bits = self.precision_bits;
        let mut v = self.polys[j].eval_complex(z);
        if sign(j) < 0 {
            v = -v;
        }
        if j < m {
            let sys = self.system()?;
            for k in j + 1..=m {
                let (t, _) = sys.cauchy_transform(j + 1, k, z)?;
                let mut term = Complex::with_val(bits, self.polys[k].eval_complex(z) * &t);
                if sign(k) < 0 {
                    term = -term;
                }
                v += term;
            }
        }
        Ok(v)
    }

    /// `A_{n,j}(x)` for real `x` together with a bound on its rounding and
    /// quadrature noise.
    pub fn evaluate_form_real(&self, j: usize, x: &Float) -> Result<(Float, Float)> {
        let m = self.m();
        let bits = self.precision_bits;
        let mut v = self.polys[j].eval(x);
        if sign(j) < 0 {
            v = -v;
        }
        let mut scale = self.polys[j].eval_abs(x);
        let mut qerr = Float::with_val(bits, 0);
        if j < m {
            let sys = self.system()?;
            for k in j + 1..=m {
                let (t, e) = sys.transform_real(j + 1, k, x)?;
                let ak = self.polys[k].eval(x);
                let term = Float::with_val(bits, &ak * &t);
                scale += Float::with_val(bits, self.polys[k].eval_abs(x) * Float::with_val(bits, t.abs_ref()));
                qerr += Float::with_val(bits, ak.abs_ref()) * e;
                if sign(k) < 0 {
                    v -= term;
                } else {
                    v += term;
                }
            }
        }
        let mut noise = scale;
        noise <<= 16 - bits as i32;
        noise += qerr;
        Ok((v, noise))
    }

    /// `A_{n,j}` at node `i` of the quadrature rule of `sigma_j` (1-based `j`),
    /// using the transforms stored at the nodes.
    pub fn form_at_node(&self, j: usize, i: usize) -> Result<Float> {
        let m = self.m();
        let sys = self.system()?;
        let bits = self.precision_bits;
        let x = &sys.rule(j).nodes[i].x;
        let mut v = self.polys[j].eval(x);
        if sign(j) < 0 {
            v = -v;
        }
        for k in j + 1..=m {
            let t = &sys.inner_values(j, k)[i];
            let term = Float::with_val(bits, self.polys[k].eval(x) * t);
            if sign(k) < 0 {
                v -= term;
            } else {
                v += term;
            }
        }
        Ok(v)
    }
}

/// Solves the interpolation problem for `n`, escalating precision by
/// rebuilding the discretized system whenever the null space is not
/// numerically one-dimensional or the residual orders are not exact.
pub fn solve_hp(system: &Arc<NikishinSystem>, n: &MultiIndex, policy: &PrecisionPolicy) -> Result<HPSolution> {
    policy.validate()?;
    check_budget(system.table(), n)?;
    let mut sys = system.clone();
    let mut trace = Vec::new();
    let mut last_err = String::new();
    for attempt in 0..=policy.max_escalations {
        trace.push(sys.bits);
        match HPSolution::from_table(sys.table(), n) {
            Ok(mut sol) if sol.is_valid() => {
                sol.precision_trace = trace;
                sol.system = Some(sys);
                return Ok(sol);
            }
            Ok(sol) => {
                last_err = format!(
                    "normal flags {:?}, exact orders {:?}",
                    sol.normal,
                    sol.residual_orders.iter().map(|r| r.exact).collect::<Vec<_>>()
                );
            }
            Err(e) => last_err = e.to_string(),
        }
        if attempt == policy.max_escalations {
            break;
        }
        let bits = sys.bits * policy.escalation_factor;
        sys = Arc::new(NikishinSystem::build_at(&sys.generator, sys.degree(), bits)?.with_eps_dist(sys.eps_dist));
    }
    Err(Error::NullSpace {
        bits: sys.bits,
        detail: format!("index {n} after precision trace {trace:?}: {last_err}"),
    })
}
