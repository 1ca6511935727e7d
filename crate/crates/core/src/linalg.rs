//! Dense linear algebra in big-float and double precision.

use rug::Float;

use crate::error::{Error, Result};
use crate::precision::log2_abs;

/// One-dimensional null space of an `r x (r+1)` matrix.
#[derive(Debug, Clone)]
pub struct NullVector {
    pub vector: Vec<Float>,
    /// log2 of the ratio of extreme pivots after equilibration.
    pub condition_log2: f64,
}

fn pow2_scale(x: &Float) -> i32 {
    if x.is_zero() {
        0
    } else {
        -(x.get_exp().unwrap_or(0))
    }
}

/// Null vector of a wide matrix by complete-pivoting elimination on an
/// equilibrated copy. Fails when some pivot is below `tau` relative to the
/// largest entry, i.e. when the rank is numerically deficient.
pub fn null_vector(rows: &[Vec<Float>], bits: u32, tau: &Float) -> Result<NullVector> {
    let r = rows.len();
    let c = r + 1;
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Argument("null_vector expects an r x (r+1) matrix".into()));
    }
    let mut a: Vec<Vec<Float>> = rows
        .iter()
        .map(|row| row.iter().map(|v| Float::with_val(bits, v)).collect())
        .collect();
    // row then column equilibration by powers of two
    for row in a.iter_mut() {
        let mx = row.iter().map(|v| v.clone().abs()).fold(Float::with_val(bits, 0), |m, v| if v > m { v } else { m });
        let e = pow2_scale(&mx);
        for v in row.iter_mut() {
            *v <<= e;
        }
    }
    let mut col_exp = vec![0i32; c];
    for j in 0..c {
        let mut mx = Float::with_val(bits, 0);
        for row in a.iter() {
            let v = Float::with_val(bits, row[j].abs_ref());
            if v > mx {
                mx = v;
            }
        }
        let e = pow2_scale(&mx);
        col_exp[j] = e;
        for row in a.iter_mut() {
            row[j] <<= e;
        }
    }
    let mut perm: Vec<usize> = (0..c).collect();
    let mut pmax = f64::NEG_INFINITY;
    let mut pmin = f64::INFINITY;
    let mut tmp = Float::with_val(bits, 0);
    for k in 0..r {
        let (mut bi, mut bj) = (k, k);
        let mut best = Float::with_val(bits, -1);
        for i in k..r {
            for j in k..c {
                let v = a[i][perm[j]].as_abs();
                if *v > best {
                    best = Float::with_val(bits, &*v);
                    bi = i;
                    bj = j;
                }
            }
        }
        if best.is_zero() || best < *tau {
            return Err(Error::NullSpace {
                bits,
                detail: format!("pivot {k} of {r} is numerically zero"),
            });
        }
        let lb = log2_abs(&best);
        pmax = pmax.max(lb);
        pmin = pmin.min(lb);
        a.swap(k, bi);
        perm.swap(k, bj);
        let pc = perm[k];
        let piv = a[k][pc].clone();
        for i in k + 1..r {
            if a[i][pc].is_zero() {
                continue;
            }
            let f = Float::with_val(bits, &a[i][pc] / &piv);
            let (top, bot) = a.split_at_mut(i);
            let prow = &top[k];
            let row = &mut bot[0];
            for j in k + 1..c {
                let col = perm[j];
                tmp.assign_mul(&f, &prow[col]);
                row[col] -= &tmp;
            }
            row[pc] = Float::with_val(bits, 0);
        }
    }
    let mut y = vec![Float::with_val(bits, 0); c];
    y[perm[r]] = Float::with_val(bits, 1);
    for k in (0..r).rev() {
        let pc = perm[k];
        let mut s = Float::with_val(bits, 0);
        for j in k + 1..c {
            let col = perm[j];
            tmp.assign_mul(&a[k][col], &y[col]);
            s += &tmp;
        }
        y[pc] = -s / &a[k][pc];
    }
    for j in 0..c {
        y[j] <<= col_exp[j];
    }
    Ok(NullVector {
        vector: y,
        condition_log2: pmax - pmin,
    })
}

trait AssignMul {
    fn assign_mul(&mut self, a: &Float, b: &Float);
}

impl AssignMul for Float {
    fn assign_mul(&mut self, a: &Float, b: &Float) {
        use rug::Assign;
        self.assign(a * b);
    }
}

/// Solves `a x = b` by partial pivoting in double precision.
pub fn solve_f64(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k] == 0.0 || !a[p][k].is_finite() {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Solves `a x = b` by partial pivoting in big-float arithmetic.
pub fn solve_float(mut a: Vec<Vec<Float>>, mut b: Vec<Float>, bits: u32) -> Option<Vec<Float>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].as_abs().partial_cmp(&*a[j][k].as_abs()).unwrap_or(std::cmp::Ordering::Equal))?;
        if a[p][k].is_zero() || !a[p][k].is_finite() {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = Float::with_val(bits, &a[i][k] / &a[k][k]);
            for j in k..n {
                let t = Float::with_val(bits, &f * &a[k][j]);
                a[i][j] -= t;
            }
            let t = Float::with_val(bits, &f * &b[k]);
            b[i] -= t;
        }
    }
    let mut x = vec![Float::with_val(bits, 0); n];
    for k in (0..n).rev() {
        let mut s = b[k].clone();
        for j in k + 1..n {
            s -= Float::with_val(bits, &a[k][j] * &x[j]);
        }
        x[k] = s / &a[k][k];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
