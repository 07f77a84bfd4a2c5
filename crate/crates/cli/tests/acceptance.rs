//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use liectl_core::adaptive::{
    run_adaptive_tracking, scalar_benchmark, AdaptiveEstimates, QuasiLinearSystem, ReferenceSignal,
    BENCHMARK_ALPHA, BENCHMARK_DT, BENCHMARK_DURATION, BENCHMARK_UPDATE_GAIN,
};
use liectl_core::catalog::{field, siso_system, switching_system};
use liectl_core::controllability::{
    car_rotate, car_slide, car_system, commutator_order, drift_controllability, stlc_rank,
    unicycle_bracket, unicycle_system, ControlAffineSystem,
};
use liectl_core::describing::{harmonic_balance_solve, vdp_simulate_amplitude, QuasiLinearLoop};
use liectl_core::feedback_lin::{closed_loop_simulate, synthesize_controller, verify_linearity};
use liectl_core::field::{bracket_field, lie_bracket, DiffConfig, State, VectorField};
use liectl_core::kicks::{
    einstein_q, langevin_ensemble, EnsembleSpec, KickProcess, LangevinParams, ThermalParams,
};
use liectl_core::linalg::numeric_rank_with;
use liectl_core::linear::StateSpaceModel;
use liectl_core::ode::{integrate, integrate_variable_structure, IntegratorConfig};
use liectl_core::operator::margin_battery;
use liectl_core::signal::InputSignal;
use nalgebra::{dvector, DMatrix, DVector};

type Check = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Check);

/// xorshift64* in [-1, 1); fixed seeds keep the suite reproducible.
struct Rng(u64);

impl Rng {
    fn next(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        let v = self.0.wrapping_mul(0x2545_F491_4F6C_DD1D);
        (v >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (self.next() + 1.0) * 0.5 * (hi - lo)
    }

    fn vector(&mut self, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.next())
    }

    fn matrix(&mut self, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| self.next())
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn vdp_prediction() -> Check {
    let mut worst = 0.0f64;
    for alpha in [0.1, 1.0, 5.0] {
        let p =
            harmonic_balance_solve(&QuasiLinearLoop::van_der_pol(alpha), 1.5, 0.8).map_err(err)?;
        let dev = (p.amplitude - 2.0).abs().max((p.omega - 1.0).abs());
        ensure(dev <= 1e-8, || {
            format!("alpha {alpha}: A = {}, omega = {}", p.amplitude, p.omega)
        })?;
        worst = worst.max(dev);
    }
    Ok(format!("max deviation {worst:.1e}"))
}

fn vdp_simulation() -> Check {
    let x0 = dvector![0.5, 0.0];
    let (slow, _) = vdp_simulate_amplitude(0.1, &x0, 300.0, 0.01).map_err(err)?;
    let (fast, _) = vdp_simulate_amplitude(1.0, &x0, 300.0, 0.01).map_err(err)?;
    let amp_err = |a: f64| (a - 2.0).abs() / 2.0;
    let period_err = (slow.period - 2.0 * PI).abs() / (2.0 * PI);
    ensure(amp_err(slow.amplitude) < 0.05, || {
        format!("alpha 0.1 amplitude {}", slow.amplitude)
    })?;
    ensure(period_err < 0.01, || {
        format!("alpha 0.1 period {}", slow.period)
    })?;
    ensure(amp_err(fast.amplitude) > amp_err(slow.amplitude), || {
        format!(
            "amplitude error alpha 1 = {} not above alpha 0.1 = {}",
            amp_err(fast.amplitude),
            amp_err(slow.amplitude)
        )
    })?;
    Ok(format!(
        "alpha 0.1: A {:.4}, T {:.4}; alpha 1: A {:.4}",
        slow.amplitude, slow.period, fast.amplitude
    ))
}

fn bracket_example() -> Check {
    let f = field("bracket-example-f", 1.0).map_err(err)?;
    let g = field("bracket-example-g", 1.0).map_err(err)?;
    let cfg = DiffConfig::default();
    let mut rng = Rng(0x1234_5678);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.vector(2) * 3.0;
        let v = lie_bracket(&f, &g, &x, &cfg).map_err(err)?;
        let expected = dvector![x[1].cos() + x[1].sin(), -x[0]];
        worst = worst.max((v - expected).amax());
    }
    ensure(worst <= 1e-6, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.1e} over 100 points"))
}

fn car_geometry() -> Check {
    let cfg = DiffConfig::default();
    let outer = DiffConfig { step: 1e-4, ..cfg };
    let car = car_system(1.0).map_err(err)?;
    let (drive, steer) = (&car.inputs[0], &car.inputs[1]);
    let rotate_field = bracket_field(steer, drive, &cfg);
    let uni = unicycle_system();
    let mut rng = Rng(0xdead_beef);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = dvector![
            rng.range(-3.0, 3.0),
            rng.range(-3.0, 3.0),
            rng.range(-PI, PI),
            rng.range(-1.3, 1.3)
        ];
        let rotate = lie_bracket(steer, drive, &x, &cfg).map_err(err)?;
        let slide = lie_bracket(drive, &rotate_field, &x, &outer).map_err(err)?;
        worst = worst
            .max((rotate - car_rotate(&x, 1.0).map_err(err)?).amax())
            .max((slide - car_slide(&x, 1.0).map_err(err)?).amax());
        let xu = x.rows(0, 3).into_owned();
        let b = lie_bracket(&uni.inputs[0], &uni.inputs[1], &xu, &cfg).map_err(err)?;
        worst = worst.max((b - unicycle_bracket(&xu)).amax());
    }
    ensure(worst <= 1e-5, || {
        format!("closed-form deviation {worst:.2e}")
    })?;
    let car_rank = stlc_rank(&car, &DVector::zeros(4), 2, &cfg).map_err(err)?;
    let uni_rank = stlc_rank(&uni, &DVector::zeros(3), 1, &cfg).map_err(err)?;
    ensure(car_rank.rank == 4 && car_rank.controllable, || {
        format!("car rank {}", car_rank.rank)
    })?;
    ensure(uni_rank.rank == 3 && uni_rank.controllable, || {
        format!("unicycle rank {}", uni_rank.rank)
    })?;
    Ok(format!("deviation {worst:.1e}; ranks car 4, unicycle 3"))
}

fn commutator_law() -> Check {
    let p = commutator_order(
        &unicycle_system(),
        0,
        1,
        &dvector![0.0, 0.0, 0.3],
        &[0.1, 0.05, 0.025],
        &DiffConfig::default(),
    )
    .map_err(err)?;
    ensure((p - 3.0).abs() <= 0.3, || format!("slope {p:.3}"))?;
    Ok(format!("slope {p:.3}"))
}

fn langevin_statistics() -> Check {
    let spec = EnsembleSpec {
        v0: 0.0,
        t_end: 10.0,
        dt: 0.01,
        runs: 10_000,
        t_start: 5.0,
        max_lag_steps: 300,
    };
    let params = LangevinParams {
        gamma: 1.0,
        m: 1.0,
        q: 2.0,
    };
    let proc = KickProcess::with_fluctuation(params.q, 0.01, 2024).map_err(err)?;
    let s = langevin_ensemble(&params, &proc, &spec).map_err(err)?;
    ensure((s.var - 1.0).abs() <= 0.05, || format!("<v^2> = {}", s.var))?;
    ensure(s.mean.abs() <= 0.05, || format!("<v> = {}", s.mean))?;
    let decay = s.decay_constant.ok_or("no autocorrelation decay fit")?;
    ensure((decay - 1.0).abs() <= 0.1, || {
        format!("decay constant {decay}")
    })?;

    let thermal = ThermalParams {
        kb: 1.0,
        t_abs: 0.5,
    };
    let q = einstein_q(params.gamma, &thermal).map_err(err)?;
    let warm = LangevinParams { q, ..params };
    let proc = KickProcess::with_fluctuation(q, 0.01, 2025).map_err(err)?;
    let t = langevin_ensemble(&warm, &proc, &spec).map_err(err)?;
    let ratio = warm.m * t.var / (thermal.kb * thermal.t_abs);
    ensure((ratio - 1.0).abs() <= 0.05, || {
        format!("m<v^2>/kT = {ratio}")
    })?;
    Ok(format!(
        "<v^2> {:.4}, <v> {:.4}, decay {decay:.4}, m<v^2>/kT {ratio:.4}",
        s.var, s.mean
    ))
}

fn gramian_and_endpoint() -> Check {
    let scalar = StateSpaceModel::scalar(-1.0, 1.0, 1.0, 0.0);
    let w = scalar.controllability_gramian(1.0, 1000).map_err(err)?[(0, 0)];
    let expected = (1.0 - (-2.0f64).exp()) / 2.0;
    ensure((w - expected).abs() <= 1e-6, || {
        format!("W = {w}, expected {expected}")
    })?;
    let di = StateSpaceModel::without_feedthrough(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
    .map_err(err)?;
    let dt = 1e-3;
    let (x0, target) = (dvector![0.0, 0.0], dvector![1.0, 0.0]);
    let u = di.min_energy_control(&x0, &target, 1.0, dt).map_err(err)?;
    let traj = di
        .simulate_continuous(
            &x0,
            &InputSignal::Sampled(u),
            1.0,
            &IntegratorConfig::rk4(dt),
        )
        .map_err(err)?;
    let e = (traj.last_state() - &target).norm();
    ensure(e < 1e-3, || format!("endpoint error {e}"))?;
    Ok(format!(
        "W error {:.1e}, endpoint error {e:.1e}",
        (w - expected).abs()
    ))
}

fn feedback_linearization() -> Check {
    let sys = siso_system("cubic").map_err(err)?;
    let beta = [2.0, 1.0];
    let x0 = dvector![1.0, 0.0];
    let v = InputSignal::function(1, |t| dvector![(0.5 * t).sin()]);
    let cfg = DiffConfig::default();
    let ctrl = synthesize_controller(&sys, &beta, &x0, &cfg).map_err(err)?;
    let traj = closed_loop_simulate(&ctrl, &v, &x0, 10.0, 1e-3).map_err(err)?;
    let report = verify_linearity(&traj, &beta, &v).map_err(err)?;
    ensure(report.max_deviation < 1e-3, || {
        format!("max deviation {}", report.max_deviation)
    })?;
    Ok(format!("max deviation {:.1e}", report.max_deviation))
}

fn adaptive_tracking() -> Check {
    let run = scalar_benchmark(
        BENCHMARK_UPDATE_GAIN,
        BENCHMARK_ALPHA,
        BENCHMARK_DURATION,
        BENCHMARK_DT,
    )
    .map_err(err)?;
    let rms = run.tail_rms(0.2);
    ensure(rms < 0.05, || format!("tail RMS {rms}"))?;
    ensure(run.clamp_events == 0, || {
        format!("{} clamp events", run.clamp_events)
    })?;

    let alpha = 2.0;
    let sys = QuasiLinearSystem::scalar(-1.0, 2.0);
    let est = AdaptiveEstimates::at_truth(&sys, 0.0, 0.0, alpha);
    let truth = run_adaptive_tracking(
        &sys,
        &est,
        &ReferenceSignal::sine(1.0, 1.0),
        &dvector![0.5],
        5.0,
        1e-3,
    )
    .map_err(err)?;
    let pts: Vec<(f64, f64)> = truth
        .error
        .iter()
        .enumerate()
        .map(|(i, e)| (truth.trajectory.time(i), e.abs()))
        .filter(|&(_, e)| e > 1e-9)
        .map(|(t, e)| (t, e.ln()))
        .collect();
    let rate = -fit_slope(&pts);
    ensure((rate - alpha).abs() <= 0.1 * alpha, || {
        format!("decay rate {rate}")
    })?;
    Ok(format!(
        "tail RMS {rms:.2e}, 0 clamps, decay rate {rate:.4}"
    ))
}

fn filippov_sliding() -> Check {
    let relay = switching_system("relay").map_err(err)?;
    let dt = 1e-3;
    let band = 1e-6;
    let traj = integrate_variable_structure(
        &relay,
        &dvector![1.0],
        0.0,
        2.0,
        &IntegratorConfig::rk4(dt),
        band,
    )
    .map_err(err)?;
    let inside: Vec<bool> = traj.states.iter().map(|x| x[0].abs() < band).collect();
    let first = inside
        .iter()
        .position(|&b| b)
        .ok_or("never reaches the band")?;
    let reach = traj.time(first);
    ensure((reach - 1.0).abs() <= 2.0 * dt, || {
        format!("reached band at t = {reach}")
    })?;
    ensure(inside[first..].iter().all(|&b| b), || {
        "left the band after reaching it".into()
    })?;
    let enter = traj
        .events
        .iter()
        .find(|e| e.kind == "sliding_enter")
        .ok_or("no sliding event")?;
    ensure((enter.t - 1.0).abs() <= 2.0 * dt, || {
        format!("sliding flagged at t = {}", enter.t)
    })?;
    Ok(format!(
        "band reached at t = {reach:.4}, sliding flagged at {:.4}",
        enter.t
    ))
}

fn crossover_margins() -> Check {
    let tau_ks: Vec<f64> = (0..=40).map(|i| PI * i as f64 / 40.0).collect();
    let report = margin_battery(&[0.5, 1.0, 2.0, 5.0], &tau_ks, 400.0, 0.05).map_err(err)?;
    ensure(report.agreement >= 0.95, || {
        format!("agreement {:.3}", report.agreement)
    })?;
    let outside = report.cells.iter().filter(|c| !c.near_boundary).count();
    Ok(format!(
        "agreement {:.3} over {outside} cells",
        report.agreement
    ))
}

// --- property battery ---------------------------------------------------------

fn smooth_field(rng: &mut Rng) -> VectorField {
    let a = rng.matrix(3, 3);
    let c = rng.vector(3);
    VectorField::new(3, move |x: &State| {
        let mut v = &a * x;
        for i in 0..3 {
            v[i] += c[i] * x[(i + 1) % 3].sin() * x[(i + 2) % 3];
        }
        v
    })
}

fn bracket_identities(rng: &mut Rng) -> Result<(), String> {
    let cfg = DiffConfig::default();
    let outer = DiffConfig {
        step: cfg.wide_step,
        ..cfg
    };
    for case in 0..50 {
        let (f, g, h) = (smooth_field(rng), smooth_field(rng), smooth_field(rng));
        let x = rng.vector(3);
        let (a, b) = (rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
        let fg = lie_bracket(&f, &g, &x, &cfg).map_err(err)?;
        let skew = (&fg + lie_bracket(&g, &f, &x, &cfg).map_err(err)?).amax();
        ensure(skew < 1e-6, || {
            format!("case {case}: skew residual {skew:.2e}")
        })?;
        let combo = f.scaled(a).add(&h.scaled(b));
        let lin = lie_bracket(&combo, &g, &x, &cfg).map_err(err)?
            - (&fg * a + lie_bracket(&h, &g, &x, &cfg).map_err(err)? * b);
        ensure(lin.amax() < 1e-5, || {
            format!("case {case}: bilinearity residual {:.2e}", lin.amax())
        })?;
        let term = |p: &VectorField, q: &VectorField, r: &VectorField| {
            lie_bracket(p, &bracket_field(q, r, &cfg), &x, &outer)
        };
        let jacobi = (term(&f, &g, &h).map_err(err)?
            + term(&g, &h, &f).map_err(err)?
            + term(&h, &f, &g).map_err(err)?)
        .amax();
        ensure(jacobi < 1e-4, || {
            format!("case {case}: Jacobi residual {jacobi:.2e}")
        })?;
    }
    Ok(())
}

fn rk4_slope() -> Result<f64, String> {
    let pts = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3]
        .iter()
        .map(|&dt| {
            let traj = integrate(
                |_, x: &State| -x,
                &dvector![1.0],
                0.0,
                1.0,
                &IntegratorConfig::rk4(dt),
            )
            .map_err(err)?;
            Ok((
                f64::ln(dt),
                (traj.last_state()[0] - (-1.0f64).exp()).abs().ln(),
            ))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let p = fit_slope(&pts);
    ensure((p - 4.0).abs() <= 0.2, || format!("RK4 slope {p:.3}"))?;
    Ok(p)
}

fn hidden(case: usize, n: usize) -> bool {
    case.is_multiple_of(3) && n > 1
}

/// Random model, sometimes with an unreachable trailing state.
fn random_model(rng: &mut Rng, case: usize) -> StateSpaceModel {
    let n = 1 + case % 4;
    let m = 1 + case % 2;
    let mut a = rng.matrix(n, n);
    let mut b = rng.matrix(n, m);
    if hidden(case, n) {
        for j in 0..n - 1 {
            a[(n - 1, j)] = 0.0;
        }
        b.row_mut(n - 1).fill(0.0);
    }
    let basis = DMatrix::identity(n, n) + rng.matrix(n, n) * 0.3;
    let inv = basis
        .clone()
        .try_inverse()
        .expect("perturbed identity is invertible");
    let c = DMatrix::<f64>::identity(n, n);
    StateSpaceModel::without_feedthrough(&basis * a * &inv, &basis * b, c * inv)
        .expect("consistent shapes")
}

fn gramian_battery(rng: &mut Rng) -> Result<(), String> {
    for case in 0..100 {
        let model = loop {
            let m = random_model(rng, case);
            // Nearly uncontrollable draws sit between the two rank tolerances.
            let sv = m.controllability_matrix().svd(false, false).singular_values;
            if hidden(case, m.states()) || sv.min() > 1e-3 * sv.max() {
                break m;
            }
        };
        if hidden(case, model.states()) {
            ensure(!model.rank_condition().controllable, || {
                format!("case {case}: hidden state reported reachable")
            })?;
        }
        let w = model.controllability_gramian(1.0, 400).map_err(err)?;
        let scale = w.amax().max(1e-300);
        ensure((&w - w.transpose()).amax() <= 1e-12 * scale, || {
            format!("case {case}: asymmetric Gramian")
        })?;
        let eig = w.clone().symmetric_eigen().eigenvalues;
        ensure(eig.iter().all(|&l| l >= -1e-10 * scale), || {
            format!("case {case}: eigenvalues {eig}")
        })?;
        let pd = numeric_rank_with(&w, 1e-10) == model.states();
        ensure(pd == model.rank_condition().controllable, || {
            format!("case {case}: rank and Gramian disagree")
        })?;
    }
    Ok(())
}

fn drift_battery(rng: &mut Rng) -> Result<usize, String> {
    let cfg = DiffConfig::default();
    let mut agree = 0;
    for case in 0..100 {
        let n = 1 + case % 3;
        let mut a = rng.matrix(n, n);
        let mut b = rng.matrix(n, 1);
        if case % 3 == 2 {
            for j in 0..n - 1 {
                a[(n - 1, j)] = 0.0;
            }
            b[(n - 1, 0)] = 0.0;
        }
        let linear =
            StateSpaceModel::without_feedthrough(a.clone(), b.clone(), DMatrix::identity(n, n))
                .map_err(err)?
                .rank_condition();
        let sys = ControlAffineSystem::new(
            Some(VectorField::linear(a)),
            vec![VectorField::constant(DVector::from_column_slice(
                b.as_slice(),
            ))],
        )
        .map_err(err)?;
        let verdict = drift_controllability(&sys, &rng.vector(n), &cfg).map_err(err)?;
        agree +=
            usize::from(verdict.rank == linear.rank && verdict.controllable == linear.controllable);
    }
    ensure(agree == 100, || {
        format!("drift test agrees in {agree}/100 cases")
    })?;
    Ok(agree)
}

fn run_cli(dir: &Path, threads: &str, args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_liectl"))
        .arg("--output-dir")
        .arg(dir)
        .args(args)
        .env("LIECTL_THREADS", threads)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(err)?;
    ensure(status.success(), || {
        format!("liectl {args:?} exited with {status}")
    })
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = std::fs::read_dir(dir)
        .map_err(err)?
        .map(|e| {
            let e = e.map_err(err)?;
            Ok((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).map_err(err)?,
            ))
        })
        .collect::<Result<Vec<_>, String>>()?;
    files.sort();
    Ok(files)
}

fn cli_determinism() -> Result<usize, String> {
    let jobs: [&[&str]; 7] = [
        &[
            "--seed", "7", "langevin", "--runs", "400", "--T", "8", "--t0", "0.02",
        ],
        &["vdp", "--alpha", "0.5", "--T", "60"],
        &["adaptive", "--T", "10"],
        &["sliding", "--system", "planar"],
        &["bracket", "--system", "car", "--maneuver", "parking"],
        &["operator", "--K", "1.5", "--tau", "0.2", "--T", "10"],
        &["feedbacklin", "--system", "chain3", "--T", "3"],
    ];
    let (a, b) = (
        tempfile::tempdir().map_err(err)?,
        tempfile::tempdir().map_err(err)?,
    );
    for job in jobs {
        run_cli(a.path(), "1", job)?;
        run_cli(b.path(), "4", job)?;
    }
    let (sa, sb) = (snapshot(a.path())?, snapshot(b.path())?);
    ensure(!sa.is_empty(), || "no artifacts written".into())?;
    ensure(sa.len() == sb.len(), || "artifact sets differ".into())?;
    for ((na, ca), (nb, cb)) in sa.iter().zip(&sb) {
        ensure(na == nb && ca == cb, || {
            format!("{na} differs between reruns")
        })?;
    }
    Ok(sa.len())
}

fn property_suites() -> Check {
    let mut rng = Rng(0x5eed_cafe);
    bracket_identities(&mut rng)?;
    let slope = rk4_slope()?;
    gramian_battery(&mut rng)?;
    let agree = drift_battery(&mut rng)?;
    let files = cli_determinism()?;
    Ok(format!(
        "RK4 slope {slope:.3}, drift agreement {agree}/100, {files} artifacts byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("vdp-harmonic-balance", 1.0, vdp_prediction),
        ("vdp-simulation", 30.0, vdp_simulation),
        ("bracket-example", 1.0, bracket_example),
        ("car-unicycle-geometry", 5.0, car_geometry),
        ("commutator-motion", 5.0, commutator_law),
        ("langevin-statistics", 60.0, langevin_statistics),
        ("gramian-endpoint-control", 5.0, gramian_and_endpoint),
        ("feedback-linearization", 5.0, feedback_linearization),
        ("adaptive-tracking", 10.0, adaptive_tracking),
        ("filippov-sliding", 1.0, filippov_sliding),
        ("crossover-margins", 60.0, crossover_margins),
        ("property-suites", 120.0, property_suites),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= Duration::from_secs_f64(*limit) {
                Ok(detail)
            } else {
                Err(format!(
                    "{detail}; took {:.2}s, limit {limit}s",
                    elapsed.as_secs_f64()
                ))
            }
        });
        match outcome {
            Ok(detail) => println!(
                "PASS {:>2} {name} ({:.2}s): {detail}",
                i + 1,
                elapsed.as_secs_f64()
            ),
            Err(why) => {
                failed += 1;
                println!(
                    "FAIL {:>2} {name} ({:.2}s): {why}",
                    i + 1,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
