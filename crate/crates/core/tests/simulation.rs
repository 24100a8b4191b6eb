use std::path::PathBuf;

use parallel_cbf::barrier::{ControlAffineSystem, ControlInput, State};
use parallel_cbf::config::load_config;
use parallel_cbf::sim::{closed_loop_control, rk4_step, run_scenario, EventKind, Scenario};
use parallel_cbf::systems::Unicycle;
use parallel_cbf::trajectory::{read_csv, write_csv};

fn config(name: &str) -> parallel_cbf::ScenarioConfig {
    load_config(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

fn integrate(system: &dyn ControlAffineSystem, u: &ControlInput, x0: &State, dt: f64, t_end: f64) -> State {
    let steps = (t_end / dt).round() as usize;
    (0..steps).fold(x0.clone(), |x, _| rk4_step(system, u, &x, dt).unwrap())
}

#[test]
fn rk4_self_convergence_on_unicycle() {
    let x0 = State::from_slice(&[0.1, -0.2, 1.0, 0.3]);
    let u = ControlInput::from_slice(&[0.5, -0.8]);
    let coarse = integrate(&Unicycle, &u, &x0, 1e-3, 2.22);
    let fine = integrate(&Unicycle, &u, &x0, 1e-4, 2.22);
    let err = (&coarse.0 - &fine.0).amax();
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn unicycle_start_has_no_heading_authority() {
    let scenario = Scenario::new(&config("fig1_parallel.toml")).unwrap();
    let step = closed_loop_control(&scenario, 0.0, &State::zeros(4)).unwrap();
    assert_eq!(step.u_nominal.as_slice(), &[2.0, 0.0]);
    assert_eq!(step.a[1], 0.0);
    assert_eq!(step.a[0], 1.0);
}

#[test]
fn runs_are_bit_identical() {
    for name in ["fig1_parallel.toml", "di_parallel.toml", "fig1_single.toml"] {
        let cfg = config(name);
        let (a, ea) = run_scenario(&cfg).unwrap();
        let (b, eb) = run_scenario(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ea, eb);
    }
}

#[test]
fn blow_up_time_is_step_size_robust() {
    let cfg = config("fig1_single.toml");
    let (_, coarse) = run_scenario(&cfg).unwrap();
    let mut half = cfg.clone();
    half.sim.dt = cfg.sim.dt / 2.0;
    let (_, fine) = run_scenario(&half).unwrap();
    assert_eq!(coarse.kind, EventKind::ControlBlowUp);
    assert_eq!(fine.kind, EventKind::ControlBlowUp);
    assert!((coarse.t_event - fine.t_event).abs() < 0.05, "{} vs {}", coarse.t_event, fine.t_event);
}

#[test]
fn completed_runs_respect_safety_tolerance() {
    let cfg = config("di_parallel.toml");
    for seed in 0..10 {
        let mut c = cfg.clone();
        c.seed = seed;
        let (traj, event) = run_scenario(&c).unwrap();
        assert_eq!(event.kind, EventKind::Completed);
        assert_eq!(traj.samples.len(), c.sample_count());
        assert!(traj.min_h1().min(traj.min_hbar1()) >= -c.sim.safety_tol);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }
}

#[test]
fn csv_round_trip_of_a_real_run() {
    let mut cfg = config("fig1_single.toml");
    cfg.sim.horizon = 3.0;
    let (traj, _) = run_scenario(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&traj, &mut buf).unwrap();
    let back = read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.samples.len(), traj.samples.len());
    for (a, b) in traj.samples.iter().zip(&back.samples) {
        assert_eq!(a.t.to_bits(), b.t.to_bits());
        assert_eq!(a.state, b.state);
        assert_eq!(a.u_nominal, b.u_nominal);
        assert_eq!(a.u_filtered, b.u_filtered);
        assert_eq!(a.h, b.h);
        assert_eq!(a.hbar, b.hbar);
        assert_eq!(a.slab_lower.to_bits(), b.slab_lower.to_bits());
        assert_eq!(a.slab_upper, b.slab_upper);
        assert_eq!(a.active, b.active);
    }
}

#[test]
fn filtered_run_from_outside_is_rejected() {
    let mut cfg = config("di_parallel.toml");
    cfg.x0 = vec![1.5, 0.0];
    assert!(run_scenario(&cfg).is_err());
    cfg.filter = parallel_cbf::FilterKind::None;
    let (_, event) = run_scenario(&cfg).unwrap();
    assert_eq!(event.kind, EventKind::SafetyViolation);
    assert_eq!(event.t_event, 0.0);
}
