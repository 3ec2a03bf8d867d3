mod common;

use common::{random_state, rel_diff, small_model};
use dlr_core::dlr::{from_ddo, kl_initialize, reorthonormalize, to_ddo};
use dlr_core::integrators::{solve_stochastic_update, MatrixKind, Scheme, SchemeConfig, Stepper, UpdatePath};
use dlr_core::stochastic::{
    gauss_legendre_measure, inner, monte_carlo_measure, project_complement, project_span, DiscreteMeasure,
    StochasticBasis,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_values(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

fn compensated_total(w: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for &x in w {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

fn measure_strategy() -> impl Strategy<Value = DiscreteMeasure> {
    prop_oneof![
        (1usize..4, 1usize..7).prop_map(|(m, n)| gauss_legendre_measure(m, n).unwrap()),
        (1usize..11, 1usize..200, any::<u64>()).prop_map(|(m, n, s)| monte_carlo_measure(m, n, s).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weights_positive_and_normalized(mu in measure_strategy()) {
        prop_assert!(mu.weights().iter().all(|&w| w > 0.0));
        prop_assert!((compensated_total(mu.weights()) - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn seeded_monte_carlo_is_reproducible(m in 1usize..5, n in 1usize..40, seed in any::<u64>()) {
        let a = monte_carlo_measure(m, n, seed).unwrap();
        let b = monte_carlo_measure(m, n, seed).unwrap();
        prop_assert_eq!(a.points(), b.points());
    }

    #[test]
    fn projections_split_identity(n in 8usize..60, r in 1usize..5, seed in any::<u64>()) {
        let mu = monte_carlo_measure(2, n, seed).unwrap();
        let y = StochasticBasis::random_orthonormal(&mu, r, seed ^ 1).unwrap();
        let u = mu.scalar(random_values(n, seed ^ 2)).unwrap();
        let v = mu.scalar(random_values(n, seed ^ 3)).unwrap();
        let pu = project_span(&mu, &y, &u).unwrap();
        let qu = project_complement(&mu, &y, &u).unwrap();
        for k in 0..n {
            prop_assert!((pu.values()[k] + qu.values()[k] - u.values()[k]).abs() <= 1e-13);
        }
        let ppu = project_span(&mu, &y, &pu).unwrap();
        for k in 0..n {
            prop_assert!((ppu.values()[k] - pu.values()[k]).abs() <= 1e-12);
        }
        for j in 0..r {
            prop_assert!(inner(&mu, &qu, &y.column(j)).unwrap().abs() <= 1e-12);
        }
        let pv = project_span(&mu, &y, &v).unwrap();
        let lhs = inner(&mu, &pu, &v).unwrap();
        let rhs = inner(&mu, &u, &pv).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn reorthonormalize_keeps_function(r in 1usize..5, seed in any::<u64>()) {
        let model = small_model(4, 4);
        let mu = model.measure();
        let st = random_state(&model, r, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(mu.len(), r, |_, _| rng.random_range(-1.0..1.0));
        let mut centered = raw.clone();
        for mut c in centered.column_iter_mut() {
            let m = mu.mean_of(c.as_slice());
            c.add_scalar_mut(-m);
        }
        let re = reorthonormalize(mu, st.mean().clone(), st.modes(), &centered, 0.0, seed).unwrap();
        prop_assert!(re.state.basis().orthonormality_defect(mu).unwrap() <= 1e-10);
        let mut direct = st.modes() * centered.transpose();
        for mut c in direct.column_iter_mut() {
            c += st.mean().coeffs();
        }
        prop_assert!(rel_diff(&re.state.samples(), &direct) <= 1e-12);
    }

    #[test]
    fn ddo_round_trip(r in 0usize..5, seed in any::<u64>()) {
        let model = small_model(4, 4);
        let st = random_state(&model, r, seed);
        let d = to_ddo(model.ops(), model.measure(), &st, seed).unwrap();
        let back = from_ddo(model.measure(), &d).unwrap();
        prop_assert!(rel_diff(&st.samples(), &back.samples()) <= 1e-12);
    }

    #[test]
    fn kl_error_non_increasing_in_rank(seed in any::<u64>()) {
        let model = small_model(4, 4);
        let mu = model.measure();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dofs = model.space().dof_count();
        let left = DMatrix::from_fn(dofs, 5, |_, _| rng.random_range(-1.0..1.0));
        let right = DMatrix::from_fn(5, mu.len(), |_, _| rng.random_range(-1.0..1.0));
        let data = left * right;
        let mut prev = f64::INFINITY;
        for r in 1..=5 {
            let kl = kl_initialize(model.ops(), mu, &data, r, seed).unwrap();
            let err = dlr_core::fem::norm_h(model.ops(), mu, &(kl.state.samples() - &data)).unwrap();
            prop_assert!(err <= prev * (1.0 + 1e-12) + 1e-13);
            prev = err;
        }
        prop_assert!(prev <= 1e-10 * data.amax());
    }

    #[test]
    fn minimal_norm_update_matches_pseudo_inverse(seed in any::<u64>(), rank in 1usize..3) {
        let mu = monte_carlo_measure(2, 15, seed).unwrap();
        let y = StochasticBasis::random_orthonormal(&mu, 3, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = DMatrix::from_fn(3, rank, |_, _| rng.random_range(-1.0..1.0));
        let b = &f * f.transpose();
        let rhs = &b * DMatrix::from_fn(3, mu.len(), |_, _| rng.random_range(-1.0..1.0));
        let out = solve_stochastic_update(&mu, &b, &rhs, MatrixKind::Symmetric, &y, f64::EPSILON).unwrap();
        prop_assert_eq!(out.path, UpdatePath::PseudoInverse { rank });
        let pinv = b.clone().pseudo_inverse(1e-10).unwrap();
        let oracle = pinv * &rhs;
        let delta = (&out.y_tilde - y.values()).transpose();
        prop_assert!((&delta - &oracle).amax() <= 1e-10 * oracle.amax().max(1.0));
        prop_assert!(out.kernel_orthogonality <= 1e-10);
    }

    #[test]
    fn raw_update_keeps_do_identities(r in 1usize..6, seed in any::<u64>(), semi in any::<bool>(), log_dt in -4.0f64..2.0) {
        let model = small_model(4, 4);
        let st = random_state(&model, r, seed);
        let scheme = if semi { Scheme::SemiImplicit } else { Scheme::Explicit };
        let dt = if semi { 10f64.powf(log_dt) } else { 10f64.powf(log_dt.min(-3.0)) };
        let out = Stepper::new(&model, SchemeConfig::new(scheme, dt)).unwrap().step(&st).unwrap();
        prop_assert!(out.diagnostics.do_residual.worst() <= 1e-10);
        prop_assert!(out.state.basis().orthonormality_defect(model.measure()).unwrap() <= 1e-10);
    }
}
