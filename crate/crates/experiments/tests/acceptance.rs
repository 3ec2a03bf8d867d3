//! End-to-end acceptance suite. Each test prints one `PASS`/`FAIL` line.

use dlr_core::dlr::{kl_initialize, variational_residual, DlrState};
use dlr_core::fem::{build_space, norm_h, AffineDiffusion, FeFunction};
use dlr_core::integrators::{
    solve_stochastic_update, HeatModel, MatrixKind, ProjectionMode, Scheme, SchemeConfig, Stepper, UpdatePath,
};
use dlr_core::stochastic::{gauss_legendre_measure, monte_carlo_measure, StochasticBasis};
use dlr_experiments::{
    compare_projection_modes, compare_schemes, run_decay, stability_sweep, DtGrid, ExperimentConfig,
    InconclusiveReason, Outcome,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPLICIT_DT: f64 = 0.0017;

fn report(criterion: u32, name: &str, ok: bool, detail: &str) {
    println!("criterion {criterion} {}: {name} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {name}: {detail}");
}

#[derive(Clone, Copy)]
enum Setting {
    TwoParamGl,
    TenParamMc,
}

impl Setting {
    fn model_json(self) -> &'static str {
        match self {
            Self::TwoParamGl => r#"{"a0": 0.3, "M": 2, "measure": {"type": "gl", "n": 9}}"#,
            Self::TenParamMc => r#"{"a0": 0.3, "M": 10, "measure": {"type": "mc", "N": 50, "seed": 1}}"#,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::TwoParamGl => "M=2 GL9",
            Self::TenParamMc => "M=10 MC50",
        }
    }
}

fn config(setting: Setting, n: usize, rank: usize, scheme: &str, dt: f64) -> ExperimentConfig {
    let text = format!(
        r#"{{
            "model": {},
            "space": {{"n_per_side": {n}}},
            "dlr": {{"R": {rank}}},
            "scheme": {{"name": "{scheme}", "dt": {dt:e}}},
            "run": {{"max_steps": 200000, "stop_energy": 1e-10, "blowup_energy": 1e4}}
        }}"#,
        setting.model_json()
    );
    ExperimentConfig::from_json(&text).expect("valid config")
}

#[test]
fn criterion_1_explicit_cfl() {
    let cases = [
        (10, EXPLICIT_DT, Outcome::Decayed, true),
        (20, EXPLICIT_DT / 4.0, Outcome::Decayed, false),
        (20, EXPLICIT_DT / 3.0, Outcome::BlewUp, false),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for setting in [Setting::TwoParamGl, Setting::TenParamMc] {
        for (n, dt, expected, need_monotone) in cases {
            let run = run_decay(&config(setting, n, 3, "explicit", dt)).unwrap();
            let pass = run.outcome == expected && (!need_monotone || run.energy_monotone());
            ok &= pass;
            detail.push(format!("{} n={n} dt={dt:.3e}: {} after {}", setting.label(), run.outcome.label(), run.steps));
        }
    }
    report(1, "explicit scheme obeys the CFL-type restriction", ok, &detail.join("; "));
}

#[test]
fn criterion_2_stability_map() {
    let base = config(Setting::TwoParamGl, 10, 3, "explicit", EXPLICIT_DT);
    let ratios = vec![0.04, 0.06, 0.08, 0.09, 0.10, 0.11, 0.13, 0.16];
    let sweep = stability_sweep(&base, &[6, 8, 10, 12, 14, 16], &DtGrid::Scaled(ratios)).unwrap();
    let failed = sweep.cells.iter().filter(|c| c.result.outcome().is_none()).count();
    let (max_decayed, min_blown) = sweep.class_extremes();
    let ok = match sweep.k_fit {
        Some(dlr_experiments::KFit::Bounded(k)) => {
            (0.05..=0.15).contains(&k)
                && failed == 0
                && !sweep.cells.iter().any(|c| c.decayed() && c.ratio > 1.5 * k)
                && !sweep.cells.iter().any(|c| c.blew_up() && c.ratio < k / 1.5)
        }
        _ => false,
    };
    let detail = format!(
        "K_fit={:?}, largest decayed ratio {max_decayed:?}, smallest blow-up ratio {min_blown:?}, {} cells",
        sweep.k_fit,
        sweep.cells.len()
    );
    report(2, "sweep separates decay from blow-up at one threshold", ok, &detail);
}

#[test]
fn criterion_3_semi_implicit_unconditional() {
    let mut ok = true;
    let mut detail = Vec::new();
    for dt in [0.5, 10.0, 100.0] {
        let run = run_decay(&config(Setting::TenParamMc, 10, 3, "semi_implicit", dt)).unwrap();
        ok &= run.outcome == Outcome::Decayed && run.energy_monotone();
        detail.push(format!("dt={dt}: {} in {} steps, {} increases", run.outcome.label(), run.steps, run.trace.energy_increases()));
    }
    report(3, "semi-implicit energy is non-increasing for any dt", ok, &detail.join("; "));
}

#[test]
fn criterion_4_implicit_monotone() {
    let mut ok = true;
    let mut detail = Vec::new();
    for dt in [0.01, 1.0, 100.0] {
        let run = run_decay(&config(Setting::TwoParamGl, 10, 3, "implicit", dt)).unwrap();
        let converged = !matches!(
            run.outcome,
            Outcome::Inconclusive {
                reason: InconclusiveReason::FixedPointNotConverged
            }
        );
        let monotone = run.trace.energy_increases() == 0 && run.trace.h_increases() == 0;
        // a non-converged Picard loop still has to be monotone up to that step
        ok &= monotone && run.outcome != Outcome::BlewUp;
        detail.push(format!(
            "dt={dt}: {} in {} steps, picard {}, max {} iterations",
            run.outcome.label(),
            run.steps,
            if converged { "converged" } else { "not converged" },
            run.worst.max_fp_iters
        ));
    }
    report(4, "implicit H and energy norms are non-increasing", ok, &detail.join("; "));
}

fn random_state(model: &HeatModel, r: usize, dependent: bool, rng: &mut ChaCha8Rng) -> DlrState {
    let dofs = model.space().dof_count();
    let mu = model.measure();
    let mean = DVector::from_fn(dofs, |_, _| rng.random_range(-1.0..1.0));
    let mut modes = DMatrix::from_fn(dofs, r, |_, _| rng.random_range(-1.0..1.0));
    if dependent && r >= 2 {
        let combo = modes.column(0) + modes.column(1) * 0.5;
        modes.set_column(r - 1, &combo);
    }
    let basis = StochasticBasis::random_orthonormal(mu, r, rng.random()).unwrap();
    DlrState::new(mu, FeFunction::new(mean), modes, basis, 0.0).unwrap()
}

#[test]
fn criterion_5_discrete_invariants() {
    let space = build_space(6).unwrap();
    let mu = gauss_legendre_measure(2, 4).unwrap();
    let random = HeatModel::new(space.clone(), mu.clone(), AffineDiffusion::cosine_series(0.3, 2)).unwrap();
    // with a deterministic coefficient dependent modes stay dependent
    let frozen = HeatModel::new(space, mu, AffineDiffusion::constant(0.3, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_do, mut worst_vr) = (0.0f64, 0.0f64);
    let (mut full, mut deficient) = (0, 0);
    for i in 0..100 {
        let r = rng.random_range(1..=5);
        let dependent = i % 2 == 1 && r >= 2;
        let model = if dependent { &frozen } else { &random };
        let st = random_state(model, r, dependent, &mut rng);
        let (scheme, dt) = if rng.random_bool(0.5) {
            (Scheme::SemiImplicit, 10f64.powf(rng.random_range(-3.0..2.0)))
        } else {
            (Scheme::Explicit, 10f64.powf(rng.random_range(-5.0..-3.0)))
        };
        let cfg = SchemeConfig::new(scheme, dt);
        let out = Stepper::new(model, cfg).unwrap().step(&st).unwrap();
        match out.diagnostics.update_path {
            UpdatePath::PseudoInverse { .. } => deficient += 1,
            _ => full += 1,
        }
        worst_do = worst_do.max(out.diagnostics.do_residual.worst());
        let vr = variational_residual(model, &st, &out.state, &out.raw_modes, scheme, cfg.forcing_rule, dt, i).unwrap();
        worst_vr = worst_vr.max(vr.relative());
    }
    let ok = worst_do <= 1e-10 && worst_vr <= 1e-9 && full > 0 && deficient > 0;
    let detail = format!(
        "worst DO residual {worst_do:.2e}, worst relative variational residual {worst_vr:.2e}, {full} full-rank and {deficient} rank-deficient steps"
    );
    report(5, "every step satisfies the discrete identities", ok, &detail);
}

#[test]
fn criterion_6_splitting_equivalence() {
    let cmp = compare_schemes(&config(Setting::TenParamMc, 10, 3, "semi_implicit", 100.0), 50).unwrap();
    let diff = cmp.max_relative_difference();
    let ok = cmp.rows.len() == 51 && diff <= 1e-10;
    report(6, "staggered and projector-splitting schemes coincide", ok, &format!("max relative difference {diff:.2e} over 50 steps"));
}

#[test]
fn criterion_7_rank_deficient_stability() {
    let run = run_decay(&config(Setting::TwoParamGl, 10, 20, "semi_implicit", 100.0)).unwrap();
    let ko = run.worst.kernel_orthogonality;
    let ok = run.outcome == Outcome::Decayed && run.energy_monotone() && ko <= 1e-10;
    let detail = format!(
        "{} in {} steps, {} rank-deficient steps, worst kernel orthogonality {ko:.2e}",
        run.outcome.label(),
        run.steps,
        run.worst.rank_deficient_steps
    );
    report(7, "rank-deficient run stays monotone and avoids the kernel", ok, &detail);
}

fn backward_euler_error() -> f64 {
    let space = build_space(8).unwrap();
    let mu = gauss_legendre_measure(2, 3).unwrap();
    let model = HeatModel::new(space.clone(), mu.clone(), AffineDiffusion::constant(0.7, 2)).unwrap();
    let u0 = space.interpolate(|x| (x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])) * (2.0 + x[0] - x[1]));
    let samples = DMatrix::from_fn(space.dof_count(), mu.len(), |i, _| u0.coeffs()[i]);
    let mut st = kl_initialize(model.ops(), &mu, &samples, 3, 5).unwrap().state;
    let dt = 0.02;
    let mass = model.ops().mass.to_dense();
    let lhs = (&mass + model.ops().stiff_mean.to_dense() * dt).lu();
    let mut oracle = u0.coeffs().clone();
    let stepper = Stepper::new(&model, SchemeConfig::new(Scheme::SemiImplicit, dt)).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        st = stepper.step(&st).unwrap().state;
        oracle = lhs.solve(&(&mass * &oracle)).unwrap();
        worst = worst.max((st.mean().coeffs() - &oracle).amax() / oracle.amax());
    }
    worst
}

fn kl_best_approximation_error() -> f64 {
    let space = build_space(6).unwrap();
    let mu = monte_carlo_measure(3, 40, 9).unwrap();
    let model = HeatModel::new(space.clone(), mu.clone(), AffineDiffusion::cosine_series(0.3, 3)).unwrap();
    let ops = model.ops();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dofs = space.dof_count();
    let left = DMatrix::from_fn(dofs, 5, |_, _| rng.random_range(-1.0..1.0));
    let right = DMatrix::from_fn(5, mu.len(), |_, _| rng.random_range(-1.0..1.0));
    let data = left * right;

    // best rank-R error from the SVD of L^T (U - E[U]) W^{1/2}, M = L L^T
    let w = DVector::from_column_slice(mu.weights());
    let mean = &data * &w;
    let mut fluct = data.clone();
    for mut c in fluct.column_iter_mut() {
        c -= &mean;
    }
    let chol = ops.mass.to_dense().cholesky().unwrap();
    let mut x = chol.l().transpose() * fluct;
    for (k, mut c) in x.column_iter_mut().enumerate() {
        c *= w[k].sqrt();
    }
    let mut sigma: Vec<f64> = x.svd(false, false).singular_values.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    let scale = norm_h(ops, &mu, &data).unwrap();

    let mut worst = 0.0f64;
    for r in 1..=5 {
        let kl = kl_initialize(ops, &mu, &data, r, 3).unwrap();
        let err = norm_h(ops, &mu, &(kl.state.samples() - &data)).unwrap();
        let best = sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();
        worst = worst.max((err - best).abs() / scale);
    }
    worst
}

fn pseudo_inverse_error() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mu = monte_carlo_measure(2, 25, seed).unwrap();
        let r = 4;
        let y = StochasticBasis::random_orthonormal(&mu, r, seed + 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rank = 1 + (seed as usize % (r - 1));
        let f = DMatrix::from_fn(r, rank, |_, _| rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(r, rank, |_, _| rng.random_range(-1.0..1.0));
        for (kind, b) in [(MatrixKind::Symmetric, &f * f.transpose()), (MatrixKind::General, &f * g.transpose())] {
            let rhs = &b * DMatrix::from_fn(r, mu.len(), |_, _| rng.random_range(-1.0..1.0));
            let out = solve_stochastic_update(&mu, &b, &rhs, kind, &y, f64::EPSILON).unwrap();
            let oracle = b.clone().pseudo_inverse(1e-10).unwrap() * &rhs;
            let delta = (&out.y_tilde - y.values()).transpose();
            worst = worst.max((&delta - &oracle).amax() / oracle.amax().max(1.0));
        }
    }
    worst
}

#[test]
fn criterion_8_oracles() {
    let be = backward_euler_error();
    let kl = kl_best_approximation_error();
    let pinv = pseudo_inverse_error();
    let ok = be <= 1e-12 && kl <= 1e-10 && pinv <= 1e-10;
    let detail = format!("backward Euler {be:.2e}, KL vs weighted SVD {kl:.2e}, minimal norm vs pseudo-inverse {pinv:.2e}");
    report(8, "solver agrees with dense oracles", ok, &detail);
}

#[test]
fn criterion_9_projection_modes() {
    let runs = compare_projection_modes(&config(Setting::TenParamMc, 10, 3, "semi_implicit", 5.0), &[5.0, 100.0, 200.0]).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for run in &runs {
        match run.mode {
            ProjectionMode::GaussSeidel => ok &= run.monotone && run.outcome == Outcome::Decayed,
            ProjectionMode::FullyExplicit if run.dt == 200.0 => {
                ok &= run.energy_increases >= 1 && run.outcome == Outcome::Decayed
            }
            ProjectionMode::FullyExplicit => {}
        }
        detail.push(format!("{:?} dt={}: {} increases, {}", run.mode, run.dt, run.energy_increases, run.outcome.label()));
    }
    report(9, "fully explicit projection loses monotonicity, Gauss-Seidel keeps it", ok, &detail.join("; "));
}
