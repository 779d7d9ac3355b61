use proptest::prelude::*;

use resolvent_core::linalg;
use resolvent_core::rates::{RateBound, RateFormula};
use resolvent_core::resolvent::{generalized_prox, moreau_decompose};
use resolvent_core::sampling;
use resolvent_core::{
    classify_metric, run, Matrix, MonotoneBlockOperator, ProxFn, ResolventScheme, RunOptions, Vector,
};

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn kind_strategy(n: usize) -> impl Strategy<Value = ProxFn> {
    prop_oneof![
        Just(ProxFn::zero(n)),
        (0.01..5.0f64).prop_map(move |w| ProxFn::l1(w, n).unwrap()),
        (0.01..5.0f64, vec_strategy(n))
            .prop_map(move |(w, c)| ProxFn::squared_l2(w, Vector::from_vec(c)).unwrap()),
        (0.0..3.0f64, 0.0..3.0f64).prop_map(move |(lo, hi)| {
            ProxFn::box_indicator(Vector::from_element(n, -lo), Vector::from_element(n, hi)).unwrap()
        }),
        any::<u64>().prop_map(move |seed| {
            let mut rng = sampling::rng(seed);
            let h = sampling::spd_matrix(&mut rng, n, 0.0);
            ProxFn::quadratic(h, sampling::normal_vector(&mut rng, n)).unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_is_firmly_nonexpansive(h in kind_strategy(4), a in vec_strategy(4), b in vec_strategy(4), tau in 0.01..10.0f64) {
        let (a, b) = (Vector::from_vec(a), Vector::from_vec(b));
        let pa = h.prox(&a, tau).unwrap();
        let pb = h.prox(&b, tau).unwrap();
        let dp = &pa - &pb;
        prop_assert!((&a - &b).dot(&dp) >= dp.norm_squared() - 1e-9 * (1.0 + dp.norm_squared()));
    }

    #[test]
    fn prox_minimizes_the_model(h in kind_strategy(3), b in vec_strategy(3), tau in 0.01..10.0f64, d in vec_strategy(3)) {
        let b = Vector::from_vec(b);
        let p = h.prox(&b, tau).unwrap();
        let model = |x: &Vector| h.value(x).unwrap() + (x - &b).norm_squared() / (2.0 * tau);
        let other = &p + Vector::from_vec(d) * 1e-2;
        let (mp, mo) = (model(&p), model(&other));
        prop_assert!(mp <= mo + 1e-9 * (1.0 + mp.abs()), "{mp} > {mo}");
    }

    #[test]
    fn prox_satisfies_its_optimality_condition(h in kind_strategy(5), b in vec_strategy(5), tau in 0.05..5.0f64) {
        let b = Vector::from_vec(b);
        let p = h.prox(&b, tau).unwrap();
        let g = (&b - &p) / tau;
        prop_assert!(h.subgradient_distance(&p, &g).unwrap() <= 1e-8 * (1.0 + g.norm()));
    }

    #[test]
    fn uniform_diagonal_prox_matches_scalar_prox(w in 0.01..3.0f64, b in vec_strategy(6), tau in 0.01..5.0f64) {
        let h = ProxFn::l1(w, 6).unwrap();
        let b = Vector::from_vec(b);
        let d = h.prox_diagonal(&b, &Vector::from_element(6, tau)).unwrap();
        prop_assert!((d - h.prox(&b, tau).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn moreau_split_in_diagonal_metrics(w in 0.01..3.0f64, b in vec_strategy(5), diag in prop::collection::vec(0.1..5.0f64, 5)) {
        let q = classify_metric(Matrix::from_diagonal(&Vector::from_vec(diag))).unwrap();
        let b = Vector::from_vec(b);
        for h in [ProxFn::l1(w, 5).unwrap(), ProxFn::zero(5)] {
            let (p, d) = moreau_decompose(&h, &q, &b).unwrap();
            prop_assert!((&p + &d - &b).norm() <= 1e-10 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn quadratic_prox_solves_the_normal_equations(seed in any::<u64>(), b in vec_strategy(4)) {
        let mut rng = sampling::rng(seed);
        let h = sampling::spd_matrix(&mut rng, 4, 0.1);
        let lin = sampling::normal_vector(&mut rng, 4);
        let q = sampling::spd_matrix(&mut rng, 4, 0.5);
        let b = Vector::from_vec(b);
        let p = generalized_prox(&ProxFn::quadratic(h.clone(), lin.clone()).unwrap(), &classify_metric(q.clone()).unwrap(), &b).unwrap();
        // H p + q + Q (p - b) = 0
        let r = &h * &p + &lin + &q * (&p - &b);
        prop_assert!(r.norm() <= 1e-9 * (1.0 + b.norm()));
    }

    #[test]
    fn linear_resolvent_matches_dense_inverse(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = sampling::rng(seed);
        let l = sampling::spd_matrix(&mut rng, n, 0.0) + sampling::skew_matrix(&mut rng, n, 1.0);
        let shift = sampling::normal_vector(&mut rng, n);
        let q = sampling::spd_matrix(&mut rng, n, 0.3);
        let b = sampling::normal_vector(&mut rng, n);
        let op = MonotoneBlockOperator::new(vec![ProxFn::zero(n)], l.clone(), shift.clone()).unwrap();
        let scheme = ResolventScheme::plain(op, q.clone()).unwrap();
        let expected = (&l + &q).try_inverse().unwrap() * (&q * &b - &shift);
        let t = scheme.apply_t(&b).unwrap();
        prop_assert!((t - &expected).norm() <= 1e-9 * (1.0 + expected.norm()));
    }

    #[test]
    fn zero_of_the_operator_is_fixed(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = sampling::rng(seed);
        let q = sampling::spd_matrix(&mut rng, n, 0.2);
        let op = MonotoneBlockOperator::new(vec![ProxFn::l1(0.5, n).unwrap()], Matrix::identity(n, n), Vector::zeros(n)).unwrap();
        let scheme = ResolventScheme::plain(op, Matrix::from_diagonal(&q.diagonal())).unwrap();
        // 0 is the unique zero of d||.||_1 / 2 + I
        let t = scheme.apply_t(&Vector::zeros(n)).unwrap();
        prop_assert!(t.norm() == 0.0);
    }

    #[test]
    fn picard_residuals_never_increase(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = sampling::rng(seed);
        let h = sampling::spd_matrix(&mut rng, n, 0.0);
        let op = MonotoneBlockOperator::new(
            vec![ProxFn::quadratic(h, sampling::normal_vector(&mut rng, n)).unwrap()],
            Matrix::zeros(n, n),
            Vector::zeros(n),
        ).unwrap();
        let scheme = ResolventScheme::plain(op, sampling::spd_matrix(&mut rng, n, 0.5)).unwrap();
        let trace = run(&scheme, &sampling::normal_vector(&mut rng, n), &RunOptions::new(50, 0.0)).unwrap();
        let r = trace.residual_q.unwrap();
        for k in 1..r.len() {
            prop_assert!(r[k] <= r[k - 1] * (1.0 + 1e-9) + 1e-14);
        }
    }

    #[test]
    fn bounds_decrease_in_k(d0 in 0.0..100.0f64, gamma in 0.05..1.95f64, mu in 0.01..5.0f64, q in 0.1..10.0f64) {
        let consts = [("d0", d0), ("gamma", gamma), ("mu", mu), ("q_norm", q), ("h_star", 0.0)];
        for f in RateFormula::ALL {
            let Ok(bound) = RateBound::new(f, &consts.iter().filter(|(n, _)| f.required_constants().contains(n)).copied().collect::<Vec<_>>()) else {
                continue;
            };
            let k0 = bound.first_valid_k.max(1);
            let a = bound.bound_at(k0).unwrap();
            let b = bound.bound_at(k0 + 7).unwrap();
            prop_assert!(b <= a * (1.0 + 1e-12), "{}: {a} -> {b}", f.name());
        }
    }

    #[test]
    fn scaled_distance_scales_the_bound(d0 in 0.1..100.0f64, factor in 0.01..1.0f64, k in 0usize..1000) {
        let bound = RateBound::new(RateFormula::PicardSequential, &[("d0", d0)]).unwrap();
        let scaled = bound.with_scaled_distance(factor);
        let (a, b) = (bound.bound_at(k).unwrap(), scaled.bound_at(k).unwrap());
        prop_assert!((b - factor * a).abs() <= 1e-12 * a);
    }

    #[test]
    fn sym_part_is_symmetric(seed in any::<u64>(), n in 1usize..10) {
        let mut rng = sampling::rng(seed);
        let m = sampling::normal_matrix(&mut rng, n, n);
        prop_assert!(linalg::is_symmetric(&linalg::sym_part(&m)));
        prop_assert!(linalg::max_asymmetry(&linalg::sym_part(&m)) == 0.0);
    }
}
