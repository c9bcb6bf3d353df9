use frontlab::diagnostics::shape_defect;
use frontlab::front::{fit_log_correction, locate_front, Level};
use frontlab::solver::{
    conserved_mass, make_initial_scaled_wave, make_initial_step, run, FieldState, Grid,
    InitialData, RunConfig, Simulation,
};
use frontlab::wave::minimal_profile;
use frontlab::{Error, Model};

fn sq(chi: f64) -> Model {
    Model::power(2, chi, 1.0).unwrap()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + x.exp())
}

fn grid(left: f64, right: f64) -> Grid {
    Grid {
        dx: 0.05,
        left,
        right,
    }
}

fn stepper(model: &Model, eq: &str, g: Grid, u: Vec<f64>, recenter: bool) -> Simulation {
    let dt = 0.2 * g.dx * g.dx;
    Simulation::new(model.clone(), g.state(eq, u), dt)
        .unwrap()
        .with_recentering(recenter, Level::default())
}

#[test]
fn equilibria_are_preserved() {
    for eq in ["rde", "rcl", "rcl-upwind"] {
        for v in [0.0, 1.0] {
            let g = grid(5.0, 5.0);
            let mut sim = stepper(&sq(1.0), eq, g, vec![v; g.nodes()], false);
            for _ in 0..500 {
                sim.step().unwrap();
            }
            assert!(sim.state().u.iter().all(|u| *u == v), "{eq} u={v}");
        }
    }
}

#[test]
fn exact_wave_is_advected_at_speed_two() {
    let m = sq(1.0);
    let g = grid(40.0, 60.0);
    let u0: Vec<f64> = g.xs().iter().map(|x| logistic(*x)).collect();
    let mut sim = stepper(&m, "rde", g, u0, false);
    let steps = (5.0 / (0.2 * 0.05 * 0.05)) as usize;
    for _ in 0..steps {
        sim.step().unwrap();
    }
    let s = sim.state();
    let err =
        s.u.iter()
            .enumerate()
            .map(|(i, u)| (u - logistic(s.x(i) - 2.0 * s.t)).abs())
            .fold(0.0, f64::max);
    assert!(err < 1e-3, "sup error {err}");
}

#[test]
fn recentering_keeps_the_lab_frame() {
    let m = sq(1.0);
    let far = grid(30.0, 140.0);
    let near = grid(30.0, 60.0);
    let u_far = make_initial_step(&m, &far.xs(), 0.0, 0.0).unwrap();
    let u_near = make_initial_step(&m, &near.xs(), 0.0, 0.0).unwrap();
    let mut fixed = stepper(&m, "rde", far, u_far, false);
    let mut moving = stepper(&m, "rde", near, u_near, true);
    for _ in 0..(30.0 / (0.2 * 0.05 * 0.05)) as usize {
        fixed.step().unwrap();
        moving.step().unwrap();
    }
    assert!(moving.recenterings() > 0);
    assert!(moving.state().shift > 1000);
    let a = locate_front(fixed.state(), Level::default(), &m).unwrap();
    let b = locate_front(moving.state(), Level::default(), &m).unwrap();
    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    let (i, j, len) = moving.state().overlap(fixed.state()).unwrap();
    for k in 0..len {
        let (s, f) = (moving.state(), fixed.state());
        assert_eq!(s.x(i + k), f.x(j + k));
        assert!((s.u[i + k] - f.u[j + k]).abs() < 1e-6);
    }
}

#[test]
fn small_overshoots_are_clamped_and_large_ones_abort() {
    let m = sq(1.0);
    let g = grid(5.0, 5.0);
    let mut u = vec![0.0; g.nodes()];
    u[100] = -2e-13;
    let mut sim = stepper(&m, "rde", g, u.clone(), false);
    sim.step().unwrap();
    assert!(sim.state().u.iter().all(|v| *v >= 0.0));
    u[100] = -1e-9;
    let mut sim = stepper(&m, "rde", g, u, false);
    assert!(matches!(sim.step(), Err(Error::Numerical { .. })));
}

#[test]
fn conservation_law_mass_is_conserved() {
    let m = sq(1.0);
    for eq in ["rcl", "rcl-upwind"] {
        let g = grid(30.0, 60.0);
        let dt = 0.2 * g.dx * g.dx;
        let u0 = make_initial_step(&m, &g.xs(), 0.0, 0.0).unwrap();
        let mut sim = stepper(&m, eq, g, u0, true);
        let m0 = conserved_mass(sim.state(), dt).unwrap();
        for _ in 0..(10.0 / dt) as usize {
            sim.step().unwrap();
        }
        let m1 = conserved_mass(sim.state(), dt).unwrap();
        let drift = (m1 - m0).abs() / m0 / sim.state().t;
        assert!(drift < 1e-6, "{eq}: relative drift per unit time {drift}");
    }
    let g = grid(5.0, 5.0);
    assert!(conserved_mass(&g.state("rde", vec![0.0; g.nodes()]), 1e-3).is_err());
}

#[test]
fn centered_flux_needs_a_small_cell_peclet_number() {
    let m = sq(1.0);
    let g = Grid {
        dx: 1.5,
        left: 30.0,
        right: 30.0,
    };
    let u = vec![0.0; g.nodes()];
    assert!(matches!(
        Simulation::new(m.clone(), g.state("rcl", u.clone()), 0.2),
        Err(Error::Config(_))
    ));
    assert!(Simulation::new(m, g.state("rcl-upwind", u), 0.2).is_ok());
}

#[test]
fn conservation_law_keeps_the_shape_defect_nonnegative() {
    let m = sq(1.0);
    let p = minimal_profile(&m).unwrap();
    let mut cfg = RunConfig::new(&m, "rcl", 40.0);
    cfg.grid = grid(40.0, 80.0);
    cfg.snapshot_times = (0..=8).map(|k| k as f64 * 5.0).collect();
    for s in run(&cfg).unwrap().snapshots {
        let d = shape_defect(&s, &p);
        assert!(d.min_w >= -1e-8 * (1.0 + s.t), "t={}: {}", s.t, d.min_w);
    }
}

#[test]
fn reaction_diffusion_stays_below_conservation_law() {
    let m = sq(1.0);
    let mut cfg = RunConfig::new(&m, "rde", 20.0);
    cfg.grid = grid(30.0, 60.0);
    cfg.snapshot_times = (0..=20).map(|k| k as f64).collect();
    let rde = run(&cfg).unwrap();
    cfg.equation = "rcl".into();
    let rcl = run(&cfg).unwrap();
    for (a, b) in rde.snapshots.iter().zip(&rcl.snapshots) {
        let (i, j, len) = a.overlap(b).unwrap();
        for k in 0..len {
            assert!(
                a.u[i + k] <= b.u[j + k] + 1e-8,
                "t={} x={}",
                a.t,
                a.x(i + k)
            );
        }
    }
}

#[test]
fn ordered_data_stay_ordered() {
    for eq in ["rde", "rcl", "rcl-upwind"] {
        let m = sq(0.5);
        let g = grid(30.0, 60.0);
        let lo = make_initial_step(&m, &g.xs(), 0.0, 0.0).unwrap();
        let hi = make_initial_step(&m, &g.xs(), 2.0, 2.0).unwrap();
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
        let mut a = stepper(&m, eq, g, lo, false);
        let mut b = stepper(&m, eq, g, hi, false);
        for _ in 0..(10.0 / (0.2 * 0.05 * 0.05)) as usize {
            a.step().unwrap();
            b.step().unwrap();
        }
        assert!(a
            .state()
            .u
            .iter()
            .zip(&b.state().u)
            .all(|(x, y)| *x <= y + 1e-10));
    }
}

#[test]
fn steep_initial_step_has_nonnegative_defect() {
    for chi in [0.0, 0.5, 1.0, 4.0] {
        let m = sq(chi);
        let p = minimal_profile(&m).unwrap();
        let g = grid(20.0, 20.0);
        let u = make_initial_step(&m, &g.xs(), 1.0, 3.0).unwrap();
        assert!(u.iter().zip(g.xs()).all(|(u, x)| if x <= -2.0 {
            *u == 1.0
        } else if x >= 1.0 {
            *u == 0.0
        } else {
            true
        }));
        let d = shape_defect(&g.state("rde", u), &p);
        assert!(d.min_w >= -1e-10, "chi={chi}: min w {}", d.min_w);
    }
}

#[test]
fn initial_step_rejects_bad_arguments() {
    let m = sq(1.0);
    let xs = grid(5.0, 5.0).xs();
    assert!(make_initial_step(&m, &xs, 0.0, -1.0).is_err());
    assert!(make_initial_step(&m, &xs, 7.0, 0.0).is_err());
    let sharp = make_initial_step(&m, &xs, 0.0, 0.0).unwrap();
    assert!(sharp.iter().all(|u| *u == 0.0 || *u == 1.0 || *u == 0.5));
}

#[test]
fn scaled_wave_data() {
    let m = sq(1.0);
    let p = minimal_profile(&m).unwrap();
    let g = grid(30.0, 30.0);
    assert!(make_initial_scaled_wave(&m, &g.xs(), 1.0, 0.0).is_err());
    assert!(make_initial_scaled_wave(&m, &g.xs(), 1.2, -1.0).is_err());
    let u = make_initial_scaled_wave(&m, &g.xs(), 1.2, 0.0).unwrap();
    let d = shape_defect(&g.state("rcl", u), &p);
    assert!(d.min_w >= -1e-10, "min w {}", d.min_w);

    // ∫_{x≤0} e^x (1 − U(γ(x − a))) ≈ e^{−γa}/(1 + γ) for A = u², α'(1) = 1
    let gamma = 1.2;
    for a in [2.0, 4.0, 6.0, 8.0] {
        let u = make_initial_scaled_wave(&m, &g.xs(), gamma, a).unwrap();
        let mass: f64 = g
            .xs()
            .iter()
            .zip(&u)
            .filter(|(x, _)| **x <= 0.0)
            .map(|(x, u)| x.exp() * (1.0 - u) * g.dx)
            .sum();
        let scaled = mass * (gamma * a).exp() * (1.0 + gamma);
        assert!(scaled > 0.5 && scaled < 2.0, "a={a}: {scaled}");
    }
}

#[test]
fn runs_are_deterministic_and_zero_length_runs_return_the_data() {
    let m = sq(1.0);
    let mut cfg = RunConfig::new(&m, "rcl", 3.0);
    cfg.grid = grid(20.0, 40.0);
    cfg.snapshot_times = vec![0.0, 1.5, 3.0];
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.snapshots.len(), 3);
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        assert_eq!(x.u, y.u);
        assert_eq!(x.shift, y.shift);
    }
    assert_eq!(a.trace.m, b.trace.m);

    cfg.t_end = 0.0;
    cfg.snapshot_times = vec![0.0];
    let z = run(&cfg).unwrap();
    let want = make_initial_step(&m, &cfg.grid.xs(), 0.0, 0.0).unwrap();
    assert_eq!(z.snapshots.len(), 1);
    assert_eq!(z.snapshots[0].u, want);
}

#[test]
fn unstable_time_step_is_rejected() {
    let m = sq(1.0);
    let mut cfg = RunConfig::new(&m, "rde", 1.0);
    cfg.dt = Some(0.5 * 0.05 * 0.05);
    assert!(matches!(run(&cfg), Err(Error::Config(_))));
    cfg.dt = None;
    cfg.equation = "heat".into();
    assert!(matches!(run(&cfg), Err(Error::UnknownStrategy { .. })));
}

#[test]
fn front_hitting_the_window_edge_is_an_error() {
    let m = sq(1.0);
    let mut cfg = RunConfig::new(&m, "rde", 20.0);
    cfg.grid = grid(30.0, 8.0);
    assert!(matches!(run(&cfg), Err(Error::Numerical { .. })));
}

#[test]
fn pushmi_pullyu_delay_is_half_log() {
    let m = sq(1.0);
    let mut cfg = RunConfig::new(&m, "rde", 200.0);
    cfg.grid = grid(60.0, 120.0);
    let traj = run(&cfg).unwrap();
    let fit = fit_log_correction(&traj.trace, (50.0, 200.0)).unwrap();
    assert!((fit.r - 0.5).abs() < 0.1, "{fit:?}");
    assert!((fit.c - 2.0).abs() < 1e-3, "{fit:?}");
}

#[test]
fn states_serialize_round_trip() {
    let g = grid(2.0, 2.0);
    let s = g.state("rde", vec![0.25; g.nodes()]);
    let back: FieldState = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back.u, s.u);
    let cfg = RunConfig::new(&sq(0.5), "rcl", 10.0);
    let json = serde_json::to_string(&cfg).unwrap();
    let back: RunConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(back, cfg);
    assert!(matches!(back.initial, InitialData::Step { .. }));
}
