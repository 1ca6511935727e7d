//! Exact rational null space, used as an oracle for small systems.

use rug::{Float, Rational};

/// Converts a finite float to the rational it represents exactly.
pub fn to_rational(x: &Float) -> Rational {
    x.to_rational().expect("finite float")
}

/// Null vector of an `r x (r+1)` rational matrix normalized so that the last
/// nonzero component is one. Returns `None` unless the null space is
/// one-dimensional.
pub fn null_vector_rational(rows: &[Vec<Rational>]) -> Option<Vec<Rational>> {
    let r = rows.len();
    let c = r + 1;
    let mut a: Vec<Vec<Rational>> = rows.to_vec();
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..c {
        if row == r {
            break;
        }
        let Some(p) = (row..r).find(|&i| a[i][col] != 0) else {
            continue;
        };
        a.swap(row, p);
        let inv = Rational::from(1) / a[row][col].clone();
        for j in col..c {
            a[row][j] *= &inv;
        }
        for i in 0..r {
            if i != row && a[i][col] != 0 {
                let f = a[i][col].clone();
                for j in col..c {
                    let t = Rational::from(&f * &a[row][j]);
                    a[i][j] -= t;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
    }
    if pivot_cols.len() != r {
        return None;
    }
    let free = (0..c).find(|j| !pivot_cols.contains(j))?;
    let mut x = vec![Rational::new(); c];
    x[free] = Rational::from(1);
    for (i, &pc) in pivot_cols.iter().enumerate() {
        x[pc] = -a[i][free].clone();
    }
    let last = x.iter().rposition(|v| *v != 0)?;
    let s = x[last].clone();
    for v in x.iter_mut() {
        *v /= &s;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let q = |n: i32| Rational::from(n);
        let rows = vec![vec![q(1), q(-1), q(0)], vec![q(0), q(1), q(-2)]];
        let x = null_vector_rational(&rows).unwrap();
        assert_eq!(x, vec![q(2), q(2), q(1)]);
    }
}
