use crate::error::{Error, Result};
use crate::measures::Interval;

/// One crossing of the real line of the surface, in the order met by a
/// point moving along the real `w` axis from `0+` through `+inf` to `0-`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Event {
    /// Branch point at an endpoint of slit `slit` (1-based).
    Critical { slit: usize, value: f64 },
    /// The point `inf` of `sheet`, reached while moving in direction `dir`.
    Pole { sheet: usize, dir: i8 },
}

fn slits_of(sheet: usize, m: usize) -> impl Iterator<Item = usize> {
    [sheet, sheet + 1].into_iter().filter(move |&s| s >= 1 && s <= m)
}

/// Walks the real sheets of the glued surface starting at `+inf` on the
/// zero sheet. At each slit endpoint the walk moves to the neighbouring sheet
/// and turns back; at `inf` it wraps around on the same sheet.
pub(crate) fn walk(intervals: &[Interval], zero_sheet: usize, pole_sheet: usize) -> Result<Vec<Event>> {
    let m = intervals.len();
    let mut out = Vec::with_capacity(3 * m + 1);
    let mut sheet = zero_sheet;
    let mut pos = f64::INFINITY;
    let mut dir: i8 = -1;
    for _ in 0..4 * (m + 1) {
        let mut best: Option<(usize, f64)> = None;
        for s in slits_of(sheet, m) {
            let iv = intervals[s - 1];
            let cand = if dir < 0 { iv.b } else { iv.a };
            let ahead = if dir < 0 { cand < pos } else { cand > pos };
            let nearer = match best {
                None => true,
                Some((_, e)) => (dir < 0 && cand > e) || (dir > 0 && cand < e),
            };
            if ahead && nearer {
                best = Some((s, cand));
            }
        }
        match best {
            Some((s, e)) => {
                out.push(Event::Critical { slit: s, value: e });
                sheet = if sheet == s { s - 1 } else { s };
                dir = -dir;
                pos = e;
            }
            None => {
                out.push(Event::Pole { sheet, dir });
                if sheet == zero_sheet {
                    break;
                }
                pos = if dir < 0 { f64::INFINITY } else { f64::NEG_INFINITY };
            }
        }
    }
    let crit = out.iter().filter(|e| matches!(e, Event::Critical { .. })).count();
    let mut poles: Vec<usize> = out
        .iter()
        .filter_map(|e| match e {
            Event::Pole { sheet, .. } => Some(*sheet),
            _ => None,
        })
        .collect();
    poles.sort_unstable();
    let closes = matches!(out.last(), Some(Event::Pole { sheet, dir: -1 }) if *sheet == zero_sheet);
    if crit != 2 * m || poles != (0..=m).collect::<Vec<_>>() || !closes {
        return Err(Error::Newton {
            reason: format!("inconsistent sheet structure {out:?}"),
            trace: vec![],
        });
    }
    if !out.iter().any(|e| matches!(e, Event::Pole { sheet, .. } if *sheet == pole_sheet)) {
        return Err(Error::Newton {
            reason: "pole sheet missing from the walk".into(),
            trace: vec![],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn joukowski_pattern() {
        let ev = walk(&[iv(-1.0, 1.0)], 0, 1).unwrap();
        assert_eq!(
            ev,
            vec![
                Event::Critical { slit: 1, value: 1.0 },
                Event::Pole { sheet: 1, dir: 1 },
                Event::Critical { slit: 1, value: -1.0 },
                Event::Pole { sheet: 0, dir: -1 },
            ]
        );
    }

    #[test]
    fn two_intervals() {
        let ev = walk(&[iv(-1.0, 1.0), iv(2.0, 3.0)], 0, 2).unwrap();
        let kinds: Vec<String> = ev
            .iter()
            .map(|e| match e {
                Event::Critical { value, .. } => format!("c{value}"),
                Event::Pole { sheet, .. } => format!("p{sheet}"),
            })
            .collect();
        assert_eq!(kinds, ["c1", "c2", "p2", "c3", "p1", "c-1", "p0"]);
    }

    #[test]
    fn every_configuration_closes() {
        let ivs = [iv(0.0, 1.0), iv(-3.0, -2.0), iv(4.0, 5.0), iv(-7.0, -6.0)];
        for m in 1..=4 {
            for z in 0..m {
                walk(&ivs[..m], z, m).unwrap();
            }
        }
    }
}
