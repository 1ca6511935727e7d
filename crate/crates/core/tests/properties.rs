use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rug::{Complex, Float};

use nikishin::asymptotics::{fit_rate, sorted_ladder, system_for_ladder};
use nikishin::hermite_pade::{solve_hp, MultiIndex};
use nikishin::measures::{Interval, MeasureSpec, NikishinGenerator, NikishinSystem};
use nikishin::precision::{parse_decimal, to_decimal};
use nikishin::riemann::{build_surface_map, SurfaceMap, SurfaceSpec};
use nikishin::zeros::{form_zeros, interlace_check};
use nikishin::PrecisionPolicy;

const BITS: u32 = 192;

fn policy() -> PrecisionPolicy {
    PrecisionPolicy {
        bits: BITS,
        escalation_factor: 2,
        max_escalations: 0,
    }
}

fn two_level() -> &'static Arc<NikishinSystem> {
    static SYS: OnceLock<Arc<NikishinSystem>> = OnceLock::new();
    SYS.get_or_init(|| {
        let g = NikishinGenerator::new(vec![MeasureSpec::chebyshev(-1.0, 1.0).unwrap(), MeasureSpec::legendre(2.0, 3.0).unwrap()])
            .unwrap();
        system_for_ladder(&g, &[MultiIndex::new(vec![7, 7]).unwrap()], &policy()).unwrap()
    })
}

fn chebyshev_only() -> &'static Arc<NikishinSystem> {
    static SYS: OnceLock<Arc<NikishinSystem>> = OnceLock::new();
    SYS.get_or_init(|| {
        let g = NikishinGenerator::new(vec![MeasureSpec::chebyshev(-1.0, 1.0).unwrap()]).unwrap();
        Arc::new(NikishinSystem::build(&g, 40, &policy()).unwrap())
    })
}

fn maps() -> &'static [SurfaceMap] {
    static MAPS: OnceLock<Vec<SurfaceMap>> = OnceLock::new();
    MAPS.get_or_init(|| {
        (1..=3)
            .map(|l| {
                let ivs = vec![Interval::new(-1.0, 1.0).unwrap(), Interval::new(2.0, 3.0).unwrap(), Interval::new(-4.0, -2.5).unwrap()];
                build_surface_map(&SurfaceSpec::new(ivs, l).unwrap(), &policy()).unwrap()
            })
            .collect()
    })
}

fn index_strategy(m: usize, max_total: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..=max_total / m, m).prop_filter("non-zero index", |v| v.iter().any(|&x| x > 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multi_index_text_round_trip(v in index_strategy(4, 40)) {
        let n = MultiIndex::new(v.clone()).unwrap();
        let back: MultiIndex = n.to_string().parse().unwrap();
        prop_assert_eq!(back.components(), &v[..]);
        prop_assert_eq!(n.eta(n.m()), n.total());
        for l in 1..=n.m() {
            prop_assert_eq!(n.incremented(l).total(), n.total() + 1);
        }
    }

    #[test]
    fn decimal_strings_round_trip(x in -1e300f64..1e300, bits in 64u32..1024) {
        let f = Float::with_val(bits, x) / 7u32;
        let back = parse_decimal(&to_decimal(&f), bits).unwrap();
        prop_assert_eq!(f, back);
    }

    #[test]
    fn interval_distance_vanishes_only_on_the_interval(a in -10.0f64..10.0, w in 0.01f64..5.0, re in -20.0f64..20.0, im in -5.0f64..5.0) {
        let iv = Interval::new(a, a + w).unwrap();
        let d = iv.distance(re, im);
        prop_assert!(d >= 0.0);
        prop_assert!(d <= ((re - iv.center()).powi(2) + im * im).sqrt() + 1e-12);
        prop_assert_eq!(iv.distance(a + 0.5 * w, 0.0), 0.0);
    }

    #[test]
    fn rate_fit_recovers_geometric_decay(rate in 0.05f64..0.95, c in -5.0f64..5.0, len in 4usize..12) {
        let totals: Vec<usize> = (1..=len).map(|k| 2 * k).collect();
        let logs: Vec<f64> = totals.iter().map(|&t| (c + t as f64 * rate.ln()) / std::f64::consts::LN_2).collect();
        let fit = fit_rate(&totals, &logs).unwrap();
        prop_assert!((fit.ratio - rate).abs() < 1e-9);
    }

    #[test]
    fn ladders_sort_by_total_then_lexicographically(ks in prop::collection::btree_set(1usize..30, 1..8)) {
        let mut ladder: Vec<MultiIndex> = ks.iter().rev().map(|&k| MultiIndex::new(vec![k, k + 1]).unwrap()).collect();
        ladder.reverse();
        let sorted = sorted_ladder(&ladder).unwrap();
        prop_assert!(sorted.windows(2).all(|w| w[0].total() < w[1].total()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laurent_tail_bound_holds_far_from_the_support(r in 3.0f64..10.0, t in 0.0f64..std::f64::consts::TAU) {
        let sys = chebyshev_only();
        let d = 40usize;
        let z = Complex::with_val(BITS, (r * t.cos(), r * t.sin()));
        let (exact, _) = sys.cauchy_transform(1, 1, &z).unwrap();
        let c = sys.table().forward(1, 1);
        let mut series = Complex::with_val(BITS, 0);
        let mut zp = Complex::with_val(BITS, &z).recip();
        for cr in &c[..=d] {
            series += Complex::with_val(BITS, &zp * cr);
            zp /= &z;
        }
        let diff = Complex::with_val(BITS, &exact - &series);
        let diff = Float::with_val(BITS, diff.abs_ref()).to_f64();
        let bound = 2.0 * c[d].to_f64().abs() * r.powi(-(d as i32) - 2) / (1.0 - 1.0 / r);
        prop_assert!(diff <= bound, "{} > {}", diff, bound);
    }

    #[test]
    fn branches_are_real_symmetric_and_multiply_to_the_unit(l in 1usize..=3, re in -6.0f64..6.0, im in 0.2f64..4.0) {
        let map = &maps()[l - 1];
        let z = Complex::with_val(BITS, (re, im));
        let zc = Complex::with_val(BITS, (re, -im));
        let a = map.branch_values(&z).unwrap();
        let b = map.branch_values(&zc).unwrap();
        prop_assert!(a.product_deviation < 1e-40);
        for k in 0..=3 {
            let d = Complex::with_val(BITS, a.psi(k) - Complex::with_val(BITS, b.psi(k).conj_ref()));
            prop_assert!(Float::with_val(BITS, d.abs_ref()).to_f64() < 1e-40, "sheet {}", k);
        }
    }

    #[test]
    fn solved_indices_are_normal_with_the_predicted_zeros(v in index_strategy(2, 14)) {
        let sys = two_level();
        let n = MultiIndex::new(v).unwrap();
        let sol = solve_hp(sys, &n, &policy()).unwrap();
        let total = n.total();
        prop_assert_eq!(sol.poly(2).degree(), Some(total));
        for j in 0..2 {
            prop_assert_eq!(sol.poly(j).degree(), Some(total - 1));
        }
        prop_assert!(sol.residual_orders.iter().all(|r| r.exact));
        for j in 1..=2 {
            let q = form_zeros(&sol, j).unwrap();
            prop_assert_eq!(q.degree(), n.eta(j));
            let iv = sys.interval(j);
            prop_assert!(q.roots.roots.iter().all(|x| iv.contains_interior(x.to_f64())));
        }
    }

    #[test]
    fn zeros_interlace_under_increment(v in index_strategy(2, 12), l in 1usize..=2, j in 1usize..=2) {
        let sys = two_level();
        let n = MultiIndex::new(v).unwrap();
        let a = form_zeros(&solve_hp(sys, &n, &policy()).unwrap(), j).unwrap();
        let b = form_zeros(&solve_hp(sys, &n.incremented(l), &policy()).unwrap(), j).unwrap();
        prop_assert!(interlace_check(&a.roots, &b.roots).unwrap().interlaced);
    }
}

#[test]
fn diagonal_moments_of_positive_generators_are_positive() {
    let sys = two_level();
    for j in 1..=2 {
        assert!(sys.table().forward(j, j)[0] > 0);
    }
    // s_{1,2} integrates the Legendre transform on [-1, 1], which is negative there
    assert!(sys.table().forward(1, 2)[0] < 0);
    // and s_{2,1} integrates the Chebyshev transform on [2, 3], which is positive
    assert!(sys.table().reversed(2, 1)[0] > 0);
}
