use liectl_core::adaptive::{
    adaptive_control, run_adaptive_tracking, scalar_benchmark, tracking_control, AdaptiveEstimates,
    QuasiLinearSystem, ReferenceSignal,
};
use liectl_core::catalog::siso_system;
use liectl_core::describing::{harmonic_balance_solve, QuasiLinearLoop};
use liectl_core::feedback_lin::{
    closed_loop_simulate, synthesize_controller, verify_linearity, AffineSiso,
};
use liectl_core::field::{DiffConfig, ScalarField, State, VectorField};
use liectl_core::kicks::{langevin_series, KickProcess, LangevinParams};
use liectl_core::linalg::eigenvalues;
use liectl_core::ode::{integrate_field, IntegratorConfig};
use liectl_core::operator::{
    cost_functional, crossover_frequency_response, CostWeights, CrossoverParams,
};
use liectl_core::signal::InputSignal;
use liectl_core::stability::{
    classify_equilibrium, estimate_decay_rate, lyapunov_rate, Classification, LyapunovCandidate,
};
use liectl_core::trajectory::Trajectory;
use nalgebra::{dvector, DMatrix, DVector};
use proptest::prelude::*;

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // --- stability ---------------------------------------------------------

    #[test]
    fn classification_follows_the_spectrum(a in (1..=3usize).prop_flat_map(matrix)) {
        let max_re = eigenvalues(&a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(max_re.abs() > 1e-6);
        let n = a.nrows();
        let verdict = classify_equilibrium(&VectorField::linear(a), &DVector::zeros(n), &DiffConfig::default()).unwrap();
        let expected = if max_re < 0.0 { Classification::AsymptoticallyStable } else { Classification::Unstable };
        prop_assert_eq!(verdict.classification, expected);
        if let Some(rate) = verdict.decay_rate {
            prop_assert!((rate + max_re).abs() < 1e-12);
        }
    }

    #[test]
    fn decay_rate_matches_slowest_mode(slow in 0.3..1.5f64, ratio in 3.0..6.0f64, t in matrix(2)) {
        let basis = DMatrix::identity(2, 2) + t * 0.2;
        let inv = basis.clone().try_inverse().unwrap();
        let a = &basis * DMatrix::from_diagonal(&dvector![-slow, -slow * ratio]) * inv;
        let f = VectorField::linear(a);
        let horizon = 12.0 / slow;
        let traj = integrate_field(&f, &dvector![1.0, 1.0], 0.0, horizon, &IntegratorConfig::rk4(horizon / 4000.0)).unwrap();
        let rate = estimate_decay_rate(&traj).unwrap();
        prop_assert!((rate - slow).abs() <= 0.05 * slow, "{rate} vs {slow}");
    }

    #[test]
    fn quadratic_rate_matches_differenced_rate(
        a in matrix(2),
        p in prop::collection::vec(-1.0..1.0f64, 3),
        x in prop::collection::vec(-1.0..1.0f64, 2),
    ) {
        let p = DMatrix::from_row_slice(2, 2, &[p[0] + 2.0, p[1], p[1], p[2] + 2.0]);
        let x = DVector::from_vec(x);
        let f = VectorField::linear(a);
        let cfg = DiffConfig::default();
        let exact = lyapunov_rate(&LyapunovCandidate::quadratic(p.clone()).unwrap(), &f, 0.0, &x, &cfg).unwrap();
        let plain = LyapunovCandidate::autonomous(2, move |y: &State| (y.transpose() * &p * y)[(0, 0)]);
        let numeric = lyapunov_rate(&plain, &f, 0.0, &x, &cfg).unwrap();
        prop_assert!((exact - numeric).abs() < 1e-6, "{exact} vs {numeric}");
    }

    // --- human operator ----------------------------------------------------

    #[test]
    fn crossover_gain_is_unity_at_crossover(k in 0.05..20.0f64, tau in 0.0..1.0f64) {
        let p = crossover_frequency_response(&CrossoverParams::new(k, tau).unwrap(), &[k]).unwrap();
        prop_assert!((p[0].magnitude - 1.0).abs() < 1e-14);
    }

    #[test]
    fn crossover_phase_decreases(k in 0.1..10.0f64, tau in 0.01..1.0f64) {
        let omegas: Vec<f64> = (0..60).map(|i| 10f64.powf(-2.0 + i as f64 / 15.0)).collect();
        let pts = crossover_frequency_response(&CrossoverParams::new(k, tau).unwrap(), &omegas).unwrap();
        prop_assert!(pts.windows(2).all(|w| w[1].phase < w[0].phase));
    }

    #[test]
    fn cost_is_time_reversal_invariant(
        ys in prop::collection::vec(-2.0..2.0f64, 5..40),
        q in 0.0..3.0f64, r in 0.0..3.0f64, g in 0.0..3.0f64,
    ) {
        let n = ys.len();
        let us: Vec<f64> = ys.iter().map(|y| (3.0 * y).sin()).collect();
        let build = |y: &[f64], u: &[f64]| {
            Trajectory::new(
                0.0,
                0.1,
                vec![DVector::zeros(0); n],
                y.iter().map(|&v| dvector![v]).collect(),
                u.iter().map(|&v| dvector![v]).collect(),
            )
            .unwrap()
        };
        let w = CostWeights { q: vec![q], r: vec![r], g: vec![g] };
        let fwd = cost_functional(&[build(&ys, &us)], &w).unwrap();
        let (yr, ur): (Vec<f64>, Vec<f64>) = ys.iter().rev().zip(us.iter().rev()).map(|(a, b)| (*a, *b)).unzip();
        let back = cost_functional(&[build(&yr, &ur)], &w).unwrap();
        prop_assert!((fwd - back).abs() <= 1e-12 * fwd.abs().max(1.0));
    }

    // --- describing function ----------------------------------------------

    #[test]
    fn prediction_is_independent_of_alpha(alpha in 0.05..6.0f64) {
        let p = harmonic_balance_solve(&QuasiLinearLoop::van_der_pol(alpha), 1.5, 0.8).unwrap();
        prop_assert!((p.amplitude - 2.0).abs() < 1e-8 && (p.omega - 1.0).abs() < 1e-8, "{p:?}");
        prop_assert!(p.residual < 1e-12);
    }

    // --- adaptive ----------------------------------------------------------

    #[test]
    fn certainty_equivalence_is_exact(
        gamma in -3.0..3.0f64, d in 0.5..3.0f64, x in -2.0..2.0f64, t in 0.0..10.0f64, alpha in 0.1..5.0f64,
    ) {
        let sys = QuasiLinearSystem::scalar(gamma, d);
        let est = AdaptiveEstimates::at_truth(&sys, t, 1.0, alpha);
        let r = ReferenceSignal::sine(1.0, 1.0);
        let x = dvector![x];
        let adaptive = adaptive_control(&est, &sys, &x, &r, t).unwrap();
        prop_assert!(!adaptive.clamped);
        prop_assert_eq!(adaptive.u, tracking_control(&sys, &x, &r, t, alpha).unwrap());
    }

    #[test]
    fn known_parameter_error_decays_exponentially(x0 in -2.0..2.0f64, alpha in 0.5..4.0f64) {
        let sys = QuasiLinearSystem::scalar(-1.0, 2.0);
        let est = AdaptiveEstimates::at_truth(&sys, 0.0, 0.0, alpha);
        let run = run_adaptive_tracking(&sys, &est, &ReferenceSignal::sine(1.0, 1.0), &dvector![x0], 5.0, 1e-3).unwrap();
        let e0 = run.error[0].abs();
        for (i, e) in run.error.iter().enumerate() {
            let t = run.trajectory.time(i);
            prop_assert!(e.abs() <= e0 * (-alpha * t).exp() + 1e-8, "t = {t}: {e}");
        }
    }

    // --- kicks ---------------------------------------------------------------

    #[test]
    fn equal_seeds_give_identical_series(seed in any::<u64>(), run in 0..1000u64) {
        let params = LangevinParams { gamma: 1.0, m: 1.0, q: 2.0 };
        let proc = KickProcess::with_fluctuation(2.0, 0.01, seed).unwrap();
        let a = langevin_series(&params, &proc, 0.0, 1.0, 0.01, run).unwrap();
        let b = langevin_series(&params, &proc, 0.0, 1.0, 0.01, run).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn lyapunov_candidate_does_not_increase() {
    let sys = QuasiLinearSystem::scalar(-1.0, 2.0);
    for gain in [1.0, 5.0, 20.0] {
        let dt = 1e-3;
        let run = scalar_benchmark(gain, 2.0, 20.0, dt).unwrap();
        assert_eq!(run.clamp_events, 0);
        let v = run.lyapunov_trace(&sys).unwrap();
        let worst = v
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 10.0 * dt * dt, "gain {gain}: increase {worst}");
    }
}

// --- feedback linearization -------------------------------------------------

/// `ẋ₁ = x₂`, `ẋ₂ = x₃² + u`, `ẋ₃ = −x₃ + x₁`, `y = x₁`: relative degree 2
/// with one internal state.
fn with_internal_dynamics() -> AffineSiso {
    AffineSiso::new(
        VectorField::new(3, |x: &State| dvector![x[1], x[2] * x[2], -x[2] + x[0]]),
        VectorField::constant(dvector![0.0, 1.0, 0.0]),
        ScalarField::coordinate(3, 0),
    )
    .unwrap()
}

#[test]
fn output_ignores_internal_state() {
    let sys = with_internal_dynamics();
    let cfg = DiffConfig::default();
    let beta = [2.0, 1.0];
    let v = InputSignal::function(1, |t| dvector![(0.7 * t).sin()]);
    let run = |x3: f64| {
        let x0 = dvector![0.4, -0.1, x3];
        let ctrl = synthesize_controller(&sys, &beta, &x0, &cfg).unwrap();
        closed_loop_simulate(&ctrl, &v, &x0, 5.0, 1e-3)
            .unwrap()
            .output_component(0)
    };
    let (a, b) = (run(0.0), run(0.8));
    let gap = a
        .iter()
        .zip(&b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    assert!(gap < 1e-3, "{gap}");
}

#[test]
fn gain_times_decoupling_is_one() {
    let cfg = DiffConfig::default();
    for (name, beta) in [
        ("cubic", vec![2.0, 1.0]),
        ("pendulum", vec![2.0, 1.0]),
        ("chain3", vec![3.0, 3.0, 1.0]),
    ] {
        let sys = siso_system(name).unwrap();
        let n = sys.dim();
        let x0 = DVector::from_fn(n, |i, _| 0.3 - 0.2 * i as f64);
        let ctrl = synthesize_controller(&sys, &beta, &x0, &cfg).unwrap();
        for k in 0..10 {
            let x = DVector::from_fn(n, |i, _| 0.1 * k as f64 - 0.05 * i as f64);
            let (_, q) = ctrl.evaluate(&x).unwrap();
            let dec = sys.input_derivative(ctrl.r, &x, &cfg).unwrap();
            assert!((q * dec - 1.0).abs() < 1e-12, "{name}: {}", q * dec);
        }
    }
}

#[test]
fn builtin_plants_follow_the_linear_reference() {
    let cfg = DiffConfig::default();
    let v = InputSignal::function(1, |t| dvector![0.5 * (0.8 * t).sin()]);
    for (name, beta) in [
        ("cubic", vec![2.0, 1.0]),
        ("pendulum", vec![2.0, 1.0]),
        ("chain3", vec![3.0, 3.0, 1.0]),
    ] {
        let sys = siso_system(name).unwrap();
        let x0 = DVector::from_fn(sys.dim(), |i, _| if i == 0 { 0.5 } else { 0.0 });
        let ctrl = synthesize_controller(&sys, &beta, &x0, &cfg).unwrap();
        let traj = closed_loop_simulate(&ctrl, &v, &x0, 10.0, 1e-3).unwrap();
        let report = verify_linearity(&traj, &beta, &v).unwrap();
        assert!(report.max_deviation < 1e-4, "{name}: {report:?}");
    }
}
