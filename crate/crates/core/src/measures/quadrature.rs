use rug::float::Constant;
use rug::Float;

use super::MeasureSpec;
use crate::error::{Error, Result};
pub(crate) use crate::precision::log2_abs;

/// A quadrature node carrying its distances to both endpoints so that
/// singular densities and nearby intervals are evaluated without cancellation.
#[derive(Debug, Clone)]
pub struct Node {
    /// Position on the step grid; even indices form the coarse rule.
    pub index: i64,
    pub x: Float,
    pub to_a: Float,
    pub to_b: Float,
    /// Signed weight including the density.
    pub weight: Float,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub level: u32,
    pub bits: u32,
    pub nodes: Vec<Node>,
}


const MAX_U: f64 = 14.0;

impl Rule {
    /// Double-exponential rule with step `2^-level`. Nodes are truncated once
    /// their contribution to moments up to `degree` drops below the working
    /// precision.
    pub fn build(spec: &MeasureSpec, level: u32, bits: u32, degree: usize) -> Result<Rule> {
        let density = spec.density(bits);
        let iv = spec.interval;
        let h = Float::with_val(bits, Float::i_exp(1, -(level as i32)));
        let half_pi = Float::with_val(bits, Constant::Pi) / 2u32;
        let cut = -(bits as f64) - 24.0;
        let mut nodes: Vec<Node> = Vec::new();

        enum Map {
            Bounded { c: Float, r: Float },
            Right { a: Float, s: Float },
            Left { b: Float, s: Float },
        }
        let map = if iv.is_bounded() {
            let a = Float::with_val(bits, iv.a);
            let b = Float::with_val(bits, iv.b);
            let c = Float::with_val(bits, &a + &b) / 2u32;
            let r = Float::with_val(bits, &b - &a) / 2u32;
            Map::Bounded { c, r }
        } else {
            let s = match &spec.weight {
                super::Weight::Laguerre { scale, .. } => *scale,
                _ => 1.0,
            };
            if iv.b.is_infinite() {
                Map::Right {
                    a: Float::with_val(bits, iv.a),
                    s: Float::with_val(bits, s),
                }
            } else {
                Map::Left {
                    b: Float::with_val(bits, iv.b),
                    s: Float::with_val(bits, s),
                }
            }
        };
        let inf = Float::with_val(bits, rug::float::Special::Infinity);

        let max_i = (MAX_U * (1u64 << level) as f64) as i64;
        for dir in [1i64, -1] {
            let mut peak = f64::NEG_INFINITY;
            let mut small_run = 0;
            let start: i64 = if dir == 1 { 0 } else { -1 };
            let mut i = start;
            while i.abs() <= max_i {
                let u = Float::with_val(bits, &h * i);
                let eu = Float::with_val(bits, u.exp_ref());
                let emu = Float::with_val(bits, eu.recip_ref());
                let sinh = Float::with_val(bits, &eu - &emu) / 2u32;
                let cosh = Float::with_val(bits, &eu + &emu) / 2u32;
                let v = Float::with_val(bits, &half_pi * &sinh);
                let node = match &map {
                    Map::Bounded { c, r } => {
                        let e2v = Float::with_val(bits, Float::with_val(bits, &v * 2u32).exp_ref());
                        let onep = Float::with_val(bits, &e2v + 1u32);
                        // 1 - t and 1 + t
                        let omt = Float::with_val(bits, 2u32 / &onep);
                        let opt = Float::with_val(bits, &e2v * &omt);
                        let to_a = Float::with_val(bits, r * &opt);
                        let to_b = Float::with_val(bits, r * &omt);
                        let x = if i >= 0 {
                            Float::with_val(bits, c + r) - &to_b
                        } else {
                            Float::with_val(bits, c - r) + &to_a
                        };
                        let mut w = Float::with_val(bits, &h * r);
                        w *= &half_pi;
                        w *= &cosh;
                        w *= &omt;
                        w *= &opt;
                        let d = density.eval(&x, &to_a, &to_b);
                        w *= d;
                        Node {
                            index: i,
                            x,
                            to_a,
                            to_b,
                            weight: w,
                        }
                    }
                    Map::Right { a, s } | Map::Left { b: a, s } => {
                        let ev = Float::with_val(bits, v.exp_ref());
                        let d = Float::with_val(bits, s * &ev);
                        let right = matches!(map, Map::Right { .. });
                        let x = if right {
                            Float::with_val(bits, a + &d)
                        } else {
                            Float::with_val(bits, a - &d)
                        };
                        let (to_a, to_b) = if right {
                            (d.clone(), inf.clone())
                        } else {
                            (inf.clone(), d.clone())
                        };
                        let mut w = Float::with_val(bits, &h * &d);
                        w *= &half_pi;
                        w *= &cosh;
                        w *= density.eval(&x, &to_a, &to_b);
                        Node {
                            index: i,
                            x,
                            to_a,
                            to_b,
                            weight: w,
                        }
                    }
                };
                let lx = log2_abs(&node.x).max(0.0);
                let mag = log2_abs(&node.weight) + degree as f64 * lx;
                if !mag.is_finite() && mag < 0.0 {
                    small_run += 1;
                } else {
                    if mag.is_nan() || mag == f64::INFINITY {
                        return Err(Error::Quadrature(format!(
                            "non-finite quadrature weight at node {i}"
                        )));
                    }
                    peak = peak.max(mag);
                    if mag < peak + cut {
                        small_run += 1;
                    } else {
                        small_run = 0;
                    }
                    nodes.push(node);
                }
                if small_run >= 4 {
                    break;
                }
                i += dir;
            }
        }
        nodes.sort_by_key(|n| n.index);
        Ok(Rule { level, bits, nodes })
    }

    /// Sum of `f(i) * w_i` with the coarse-rule difference as error estimate.
    pub fn integrate<F: FnMut(usize) -> Float>(&self, mut f: F) -> (Float, Float) {
        let bits = self.bits;
        let mut fine = Float::with_val(bits, 0);
        let mut coarse = Float::with_val(bits, 0);
        for (i, n) in self.nodes.iter().enumerate() {
            let t = Float::with_val(bits, f(i) * &n.weight);
            if n.index % 2 == 0 {
                coarse += Float::with_val(bits, &t * 2u32);
            }
            fine += t;
        }
        let est = Float::with_val(bits, &fine - &coarse).abs();
        (fine, est)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}
