//! Comparisons against values computed independently of the library:
//! closed forms, classical recurrences and elementary integrals.

use std::sync::Arc;

use num_complex::Complex64;
use rug::float::Constant;
use rug::{Complex, Float};

use nikishin::asymptotics::{run_markov_convergence, system_for_ladder, FormFamily};
use nikishin::hermite_pade::{solve_hp, HPSolution, MultiIndex};
use nikishin::measures::{Interval, MeasureSpec, NikishinGenerator, NikishinSystem};
use nikishin::riemann::{build_surface_map, SurfaceSpec};
use nikishin::PrecisionPolicy;

const BITS: u32 = 256;

fn policy() -> PrecisionPolicy {
    PrecisionPolicy {
        bits: BITS,
        escalation_factor: 2,
        max_escalations: 0,
    }
}

fn gen(specs: Vec<MeasureSpec>) -> NikishinGenerator {
    NikishinGenerator::new(specs).unwrap()
}

fn system(g: &NikishinGenerator, top: &[usize]) -> Arc<NikishinSystem> {
    system_for_ladder(g, &[MultiIndex::new(top.to_vec()).unwrap()], &policy()).unwrap()
}

fn f(x: f64) -> Float {
    Float::with_val(BITS, x)
}

fn diff(a: &Float, b: &Float) -> f64 {
    Float::with_val(BITS, a - b).to_f64().abs()
}

fn cdiff(a: &Complex, b: &Complex) -> f64 {
    let d = Complex::with_val(BITS, a - b);
    Float::with_val(BITS, d.abs_ref()).to_f64()
}

/// Monic orthogonal polynomials and second-kind companions from
/// `p_{k+1} = x p_k - b_k p_{k-1}` with `q_1 = c0`.
fn recurrence(n: usize, c0: Float, b: impl Fn(usize) -> Float) -> (Vec<Float>, Vec<Float>) {
    let step = |cur: &[Float], prev: &[Float], bk: &Float| {
        let mut out = vec![Float::with_val(BITS, 0)];
        out.extend(cur.iter().cloned());
        for (i, v) in prev.iter().enumerate() {
            out[i] -= Float::with_val(BITS, v * bk);
        }
        out
    };
    let mut p = (vec![f(1.0)], vec![f(0.0), f(1.0)]);
    let mut q = (vec![f(0.0)], vec![c0]);
    for k in 1..n {
        let bk = b(k);
        let pn = step(&p.1, &p.0, &bk);
        let qn = step(&q.1, &q.0, &bk);
        p = (p.1, pn);
        q = (q.1, qn);
    }
    (p.1, q.1)
}

fn max_rel(a: &[Float], b: &[Float]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| diff(x, y)).fold(0.0, f64::max) / scale
}

#[test]
fn legendre_matches_three_term_recurrence() {
    let g = gen(vec![MeasureSpec::legendre(-1.0, 1.0).unwrap()]);
    let sys = system(&g, &[10]);
    for n in 1..=10 {
        let sol = solve_hp(&sys, &MultiIndex::new(vec![n]).unwrap(), &policy()).unwrap();
        let (p, q) = recurrence(n, f(2.0), |k| {
            let k = Float::with_val(BITS, k as u32);
            let k2 = Float::with_val(BITS, k.square_ref());
            Float::with_val(BITS, &k2 / (Float::with_val(BITS, &k2 * 4u32) - 1u32))
        });
        assert!(max_rel(&sol.poly(1).coefficients, &p) < 1e-40, "a_1 at n={n}");
        assert!(max_rel(&sol.poly(0).coefficients, &q) < 1e-40, "a_0 at n={n}");
    }
}

#[test]
fn cauchy_transforms_match_closed_forms() {
    let g = gen(vec![MeasureSpec::chebyshev(-1.0, 1.0).unwrap(), MeasureSpec::legendre(2.0, 3.0).unwrap()]);
    let sys = NikishinSystem::build(&g, 8, &policy()).unwrap();
    let pi = Float::with_val(BITS, Constant::Pi);
    for (re, im) in [(0.0, 1.0), (1.5, 0.0), (-2.0, 0.5), (0.3, -0.2)] {
        let z = Complex::with_val(BITS, (re, im));
        // pi / sqrt(z^2 - 1) with the branch behaving like pi / z at infinity
        let root = Complex::with_val(BITS, &z - 1u32).sqrt() * Complex::with_val(BITS, &z + 1u32).sqrt();
        let cheb = Complex::with_val(BITS, &pi / root);
        let (v, _) = sys.cauchy_transform(1, 1, &z).unwrap();
        assert!(cdiff(&v, &cheb) < 1e-60, "Chebyshev transform at {re}+{im}i");
    }
    for (re, im) in [(0.0, 0.0), (2.5, 1.0), (5.0, 0.0), (1.0, -3.0)] {
        let z = Complex::with_val(BITS, (re, im));
        // log(z - 2) - log(z - 3)
        let leg = Complex::with_val(BITS, &z - 2u32).ln() - Complex::with_val(BITS, &z - 3u32).ln();
        let (v, _) = sys.cauchy_transform(2, 2, &z).unwrap();
        assert!(cdiff(&v, &leg) < 1e-60, "Legendre transform at {re}+{im}i");
    }
}

#[test]
fn nested_zeroth_moments_match_elementary_integrals() {
    // int ln(a - x) dx / sqrt(1 - x^2) = pi ln((a + sqrt(a^2 - 1)) / 2) for a > 1
    let g = gen(vec![MeasureSpec::chebyshev(-1.0, 1.0).unwrap(), MeasureSpec::legendre(2.0, 3.0).unwrap()]);
    let sys = NikishinSystem::build(&g, 4, &policy()).unwrap();
    let pi = Float::with_val(BITS, Constant::Pi);
    let lnhalf = |a: u32| {
        let s = (Float::with_val(BITS, a * a) - 1u32).sqrt();
        ((s + a) / 2u32).ln()
    };
    let forward = Float::with_val(BITS, &pi * (lnhalf(2) - lnhalf(3)));
    assert!(diff(&sys.table().forward(1, 2)[0], &forward) < 1e-60);
    // int_2^3 pi / sqrt(t^2 - 1) dt = pi (acosh 3 - acosh 2)
    let reversed = Float::with_val(BITS, &pi * (f(3.0).acosh() - f(2.0).acosh()));
    assert!(diff(&sys.table().reversed(2, 1)[0], &reversed) < 1e-60);
}

#[test]
fn joukowski_branches_match_quadratic_roots() {
    let spec = SurfaceSpec::new(vec![Interval::new(2.0, 5.0).unwrap()], 1).unwrap();
    let map = build_surface_map(&spec, &policy()).unwrap();
    // gamma w^2 + (delta - z) w + rho0 = 0, gamma = rho0 = 3/4, delta = 7/2
    for (re, im) in [(6.0, 0.0), (3.0, 2.0), (-1.0, -1.0)] {
        let z = Complex::with_val(BITS, (re, im));
        let b = Complex::with_val(BITS, &z - 3.5);
        let disc = Complex::with_val(BITS, Complex::with_val(BITS, b.square_ref()) - 2.25).sqrt();
        let r1: Complex = Complex::with_val(BITS, &b + &disc) / 1.5;
        let r2: Complex = Complex::with_val(BITS, &b - &disc) / 1.5;
        let (big, small) = if Float::with_val(BITS, r1.abs_ref()) > Float::with_val(BITS, r2.abs_ref()) {
            (r1, r2)
        } else {
            (r2, r1)
        };
        let bv = map.branch_values(&z).unwrap();
        assert!(cdiff(bv.psi(1), &big) < 1e-60);
        assert!(cdiff(bv.psi(0), &small) < 1e-60);
    }
}

#[test]
fn markov_rate_for_chebyshev_matches_joukowski_modulus() {
    let g = gen(vec![MeasureSpec::chebyshev(-1.0, 1.0).unwrap()]);
    let ladder: Vec<MultiIndex> = (4..=20).step_by(2).map(|n| MultiIndex::new(vec![n]).unwrap()).collect();
    let sys = system_for_ladder(&g, &ladder, &policy()).unwrap();
    let z = 2.0f64;
    let rep = run_markov_convergence(&sys, &ladder, &[Complex64::new(z, 0.0)], &policy()).unwrap();
    let fit = rep.series("a0/a1").unwrap().fit.clone().unwrap();
    let phi = z + (z * z - 1.0).sqrt();
    let expected = -2.0 * phi.ln();
    assert!((fit.slope / expected - 1.0).abs() < 0.05, "slope {} vs {expected}", fit.slope);
}

#[test]
fn scaling_the_generators_leaves_the_last_polynomial_unchanged() {
    let g = gen(vec![MeasureSpec::chebyshev(-1.0, 1.0).unwrap(), MeasureSpec::legendre(2.0, 3.0).unwrap()]);
    let sys = system(&g, &[5, 5]);
    let lambda = Float::with_val(BITS, 3.7);
    for n in [vec![3, 2], vec![4, 4], vec![1, 5]] {
        let n = MultiIndex::new(n).unwrap();
        let a = HPSolution::from_table(sys.table(), &n).unwrap();
        let b = HPSolution::from_table(&sys.table().scaled(&lambda), &n).unwrap();
        let m = n.m();
        assert!(max_rel(&a.poly(m).coefficients, &b.poly(m).coefficients) < 1e-30);
    }
}

#[test]
fn remainder_quotient_agrees_with_integral_representation() {
    let g = gen(vec![
        MeasureSpec::chebyshev(-1.0, 1.0).unwrap(),
        MeasureSpec::legendre(2.0, 3.0).unwrap(),
        MeasureSpec::legendre(4.0, 5.0).unwrap(),
    ]);
    let sys = system(&g, &[4, 4, 4]);
    let fam = FormFamily::solve(&sys, &MultiIndex::new(vec![4, 3, 4]).unwrap(), &policy()).unwrap();
    for (re, im) in [(0.0, 2.0), (6.5, 0.0), (3.5, -1.0), (-2.0, 0.0)] {
        let z = Complex::with_val(BITS, (re, im));
        for j in 0..3 {
            let (q, noise) = fam.h_eval(j, &z).unwrap();
            let (i, est) = fam.h_eval_integral(j, &z).unwrap();
            assert!(cdiff(&q, &i) <= 10.0 * (est.to_f64() + noise.to_f64()), "H_{j} at {re}+{im}i");
        }
    }
    for k in 1..=3 {
        assert!(fam.orthonormal_residual(k).unwrap().to_f64().abs() < 1e-60);
    }
    let (big_k, kappa) = fam.k_constants().unwrap();
    assert_eq!(big_k[3], 1);
    let prod: f64 = kappa[1..].iter().map(|k| k.to_f64()).product();
    assert!((big_k[0].to_f64() / prod - 1.0).abs() < 1e-12);
}
