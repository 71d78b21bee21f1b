mod common;

use common::gaussian_moment_oracle;
use hyqmom::moment_algebra::{
    is_strictly_realizable, EquilibriumState, MomentVector, DEFAULT_REALIZABILITY_TOL,
};
use hyqmom::solver::{run, run_with, step, Boundary, FluxChoice, GridState, RunConfig, Segment};
use hyqmom::Error;

fn segment(x_min: f64, x_max: f64, rho: f64, u: f64, theta: f64) -> Segment {
    Segment {
        x_min,
        x_max,
        rho,
        velocity: u,
        theta,
        da: vec![],
        db: vec![],
    }
}

fn base_config(n: usize) -> RunConfig {
    RunConfig {
        n,
        gamma: 1.0,
        flux_variant: FluxChoice::GaussNodes,
        cfl: 0.9,
        tau: Some(0.05),
        dt_max: None,
        domain: [0.0, 1.0],
        cells: 50,
        t_final: 0.1,
        snapshot_every: None,
        boundary: Boundary::Periodic,
        initial: vec![segment(0.0, 1.0, 1.0, 0.3, 0.5)],
    }
}

fn riemann(n: usize, choice: FluxChoice) -> RunConfig {
    RunConfig {
        flux_variant: choice,
        cells: 200,
        t_final: 0.05,
        tau: Some(0.01),
        boundary: Boundary::ZeroGradient,
        initial: vec![
            segment(0.0, 0.5, 1.0, 0.5, 1.0),
            segment(0.5, 1.0, 0.125, -0.5, 0.8),
        ],
        ..base_config(n)
    }
}

fn max_rel_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(p, q)| (p - q).abs() / q.abs().max(p.abs()).max(1e-300))
        .fold(0.0, f64::max)
}

#[test]
fn uniform_equilibrium_is_stationary() {
    let cfg = RunConfig {
        t_final: 1.0,
        ..base_config(3)
    };
    let traj = run(&cfg).unwrap();
    assert!(traj.steps > 10);
    let first = &traj.snapshots[0];
    let last = traj.snapshots.last().unwrap();
    for (r0, r1) in first.rows.iter().zip(&last.rows) {
        assert!(max_rel_diff(&r1.moments, &r0.moments) < 1e-12);
    }
}

#[test]
fn homogeneous_relaxation_follows_scalar_recurrence() {
    for choice in [FluxChoice::GaussNodes, FluxChoice::EigenNodes] {
        let mut seg = segment(0.0, 1.0, 2.0, -0.4, 0.7);
        seg.da = vec![0.0, 0.3, -0.2];
        seg.db = vec![0.0, 0.0, 0.5, 0.4];
        let cfg = RunConfig {
            n: 3,
            flux_variant: choice,
            cells: 4,
            tau: Some(0.02),
            dt_max: Some(0.005),
            t_final: 0.2,
            initial: vec![seg],
            ..base_config(3)
        };
        let mut prev = cfg.initial_grid().unwrap().cells[0].clone();
        let mut checked = 0;
        run_with(&cfg, |g, info| {
            let next = &g.cells[0];
            let st = EquilibriumState::from_moments(&prev).unwrap();
            let factor = 1.0 / (1.0 + info.dt / 0.02);
            for k in 3..next.len() {
                let eq = st.rho * gaussian_moment_oracle(k, st.velocity, st.theta);
                let want = eq + factor * (prev.get(k) - eq);
                let scale = prev.get(k).abs() + eq.abs();
                assert!(
                    (next.get(k) - want).abs() <= 1e-12 * scale,
                    "k={k}: {} vs {want}",
                    next.get(k)
                );
            }
            for k in 0..3 {
                assert!((next.get(k) - prev.get(k)).abs() <= 1e-14 * prev.get(k).abs().max(1.0));
            }
            prev = next.clone();
            checked += 1;
        })
        .unwrap();
        assert!(checked > 5);
        // the non-equilibrium part has decayed towards the Maxwellian
        let st = EquilibriumState::from_moments(&prev).unwrap();
        let eq = st.moments(prev.len());
        assert!(max_rel_diff(prev.values(), eq.values()) < 1e-3);
    }
}

#[test]
fn two_state_riemann_problem_stays_realizable() {
    let cfg = RunConfig {
        n: 2,
        ..riemann(2, FluxChoice::GaussNodes)
    };
    let mut steps = 0;
    run_with(&cfg, |g, _| {
        for (j, m) in g.cells.iter().enumerate() {
            let rep = is_strictly_realizable(m, DEFAULT_REALIZABILITY_TOL).unwrap();
            assert!(rep.realizable, "cell {j} at t = {}", g.time);
        }
        steps += 1;
    })
    .unwrap();
    assert!(steps > 20);
}

#[test]
fn both_flux_variants_handle_riemann_data() {
    for n in 1..=3 {
        for choice in [FluxChoice::GaussNodes, FluxChoice::EigenNodes] {
            let traj = run(&riemann(n, choice)).unwrap();
            let last = traj.snapshots.last().unwrap();
            assert_eq!(last.flagged_cells(), 0, "n={n} {choice:?}");
        }
    }
}

#[test]
fn zero_final_time_gives_initial_snapshot_only() {
    let cfg = RunConfig {
        t_final: 0.0,
        snapshot_every: Some(0.01),
        ..base_config(2)
    };
    let traj = run(&cfg).unwrap();
    assert_eq!(traj.steps, 0);
    assert_eq!(traj.snapshots.len(), 1);
    assert_eq!(traj.snapshots[0].time, 0.0);
}

#[test]
fn snapshots_follow_the_requested_interval() {
    let cfg = RunConfig {
        t_final: 0.25,
        snapshot_every: Some(0.1),
        ..riemann(2, FluxChoice::GaussNodes)
    };
    let times: Vec<f64> = run(&cfg)
        .unwrap()
        .snapshots
        .iter()
        .map(|s| s.time)
        .collect();
    assert_eq!(times.len(), 4);
    for (t, want) in times.iter().zip([0.0, 0.1, 0.2, 0.25]) {
        assert!((t - want).abs() < 1e-15, "{times:?}");
    }
}

#[test]
fn huge_relaxation_time_matches_pure_transport() {
    let free = RunConfig {
        tau: None,
        ..riemann(2, FluxChoice::EigenNodes)
    };
    let slow = RunConfig {
        tau: Some(1e300),
        ..free.clone()
    };
    let a = run(&free).unwrap();
    let b = run(&slow).unwrap();
    assert_eq!(a.steps, b.steps);
    for (ra, rb) in a
        .snapshots
        .last()
        .unwrap()
        .rows
        .iter()
        .zip(&b.snapshots.last().unwrap().rows)
    {
        assert!(max_rel_diff(&ra.moments, &rb.moments) < 1e-12);
    }
}

#[test]
fn moments_are_conserved_under_periodic_boundaries() {
    for choice in [FluxChoice::GaussNodes, FluxChoice::EigenNodes] {
        let cfg = RunConfig {
            boundary: Boundary::Periodic,
            dt_max: Some(1e-3),
            ..riemann(3, choice)
        };
        let g0 = cfg.initial_grid().unwrap();
        let (start, size) = (g0.totals(), g0.abs_totals());
        run_with(&cfg, |g, _| {
            let now = g.totals();
            for k in 0..3 {
                assert!((now[k] - start[k]).abs() <= 1e-12 * size[k], "k={k}");
            }
        })
        .unwrap();
    }
}

#[test]
fn time_step_cap_is_respected() {
    let cfg = RunConfig {
        dt_max: Some(1e-4),
        t_final: 0.002,
        ..riemann(2, FluxChoice::GaussNodes)
    };
    let traj = run(&cfg).unwrap();
    assert!(traj.dts.iter().all(|dt| *dt <= 1e-4 * (1.0 + 1e-12)));
    assert_eq!(traj.steps, 20);
}

#[test]
fn runs_are_deterministic() {
    let cfg = riemann(3, FluxChoice::EigenNodes);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.snapshots.last().unwrap().to_csv(),
        b.snapshots.last().unwrap().to_csv()
    );
}

/// Grid sampled from a smooth periodic equilibrium profile.
fn smooth_grid(n: usize, cells: usize) -> GridState {
    let dx = 1.0 / cells as f64;
    let x: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * dx).collect();
    let cells_m: Vec<MomentVector> = x
        .iter()
        .map(|x| {
            let phase = 2.0 * std::f64::consts::PI * x;
            EquilibriumState::new(1.0 + 0.3 * phase.sin(), 0.5 + 0.2 * phase.cos(), 1.0)
                .unwrap()
                .moments(2 * n + 1)
        })
        .collect();
    GridState {
        cells: cells_m,
        dx: vec![dx; cells],
        x,
        time: 0.0,
        tau: Some(0.1),
        boundary: Boundary::Periodic,
    }
}

fn advance(mut g: GridState, t_final: f64) -> GridState {
    while g.time < t_final {
        step(&mut g, 1.0, FluxChoice::GaussNodes, 0.5, t_final).unwrap();
    }
    g
}

/// L1 distance of the density from a fine reference averaged onto the grid.
fn density_error(coarse: &GridState, fine: &GridState) -> f64 {
    let ratio = fine.cells.len() / coarse.cells.len();
    coarse
        .cells
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let avg: f64 = fine.cells[j * ratio..(j + 1) * ratio]
                .iter()
                .map(|c| c.get(0))
                .sum::<f64>()
                / ratio as f64;
            (m.get(0) - avg).abs() * coarse.dx[j]
        })
        .sum()
}

#[test]
fn refinement_shows_first_order_convergence() {
    let t = 0.2;
    let reference = advance(smooth_grid(2, 1280), t);
    let errors: Vec<f64> = [40, 80, 160]
        .iter()
        .map(|c| density_error(&advance(smooth_grid(2, *c), t), &reference))
        .collect();
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((0.7..1.4).contains(&rate), "errors {errors:?}");
    }
}

fn config_error(cfg: &RunConfig) -> String {
    match cfg.validate() {
        Err(Error::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn invalid_configs_name_the_field() {
    let good = base_config(2);
    good.validate().unwrap();
    assert!(config_error(&RunConfig {
        cfl: 1.5,
        ..good.clone()
    })
    .starts_with("cfl"));
    assert!(config_error(&RunConfig {
        n: 0,
        ..good.clone()
    })
    .starts_with("n:"));
    assert!(config_error(&RunConfig {
        tau: Some(-1.0),
        ..good.clone()
    })
    .starts_with("tau"));
    assert!(config_error(&RunConfig {
        domain: [1.0, 0.0],
        ..good.clone()
    })
    .starts_with("domain"));
    let eigen_low_gamma = RunConfig {
        gamma: -2.5,
        flux_variant: FluxChoice::EigenNodes,
        ..good.clone()
    };
    assert!(config_error(&eigen_low_gamma).starts_with("gamma"));
    let gap = RunConfig {
        initial: vec![segment(0.0, 0.4, 1.0, 0.0, 1.0)],
        ..good.clone()
    };
    assert!(config_error(&gap).starts_with("initial"));
    let mut bad_db = good.clone();
    bad_db.initial[0].db = vec![0.0, -5.0];
    assert!(config_error(&bad_db).contains("db"));
}

#[test]
fn config_json_round_trips_and_rejects_unknown_keys() {
    let cfg = riemann(2, FluxChoice::EigenNodes);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    let extra = text.replacen('{', "{\"cfll\":0.5,", 1);
    assert!(matches!(
        RunConfig::from_json(&extra),
        Err(Error::Config(_))
    ));
    let parsed = RunConfig::from_json(
        r#"{"n":1,"flux_variant":"gauss_nodes","cfl":0.5,"domain":[0,1],"cells":4,
            "t_final":0.1,"boundary":"zero_gradient",
            "initial":[{"x_min":0,"x_max":1,"rho":1,"U":0,"theta":1}]}"#,
    )
    .unwrap();
    assert_eq!(parsed.gamma, 1.0);
    assert_eq!(parsed.tau, None);
}
