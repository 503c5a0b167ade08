use coarsen::datastore::{Boundary, Channels, Grid, Trajectory};
use coarsen::emergent::*;
use coarsen::pipeline::ics::cgle_front;
use coarsen::solvers::{simulate_cgle, CgleConfig};
use coarsen::Error;
use ndarray::Array3;
use proptest::prelude::*;
use std::sync::OnceLock;

/// Early front-propagation window of the standard CGLE run, sampled every step.
fn cgle_window() -> &'static Trajectory<f64> {
    static CELL: OnceLock<Trajectory<f64>> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = CgleConfig {
            t_final: 1.0,
            sample_every: 1,
            ..CgleConfig::default()
        };
        let grid = Grid::cell_centered(cfg.n, cfg.length, Boundary::ZeroFlux).unwrap();
        simulate_cgle(&cgle_front(grid, cfg.length).unwrap(), &cfg).unwrap()
    })
}

fn true_positions(bundle: &AgentBundle<f64>) -> Vec<f64> {
    bundle
        .permutation
        .as_ref()
        .unwrap()
        .iter()
        .map(|&g| g as f64)
        .collect()
}

#[test]
fn scrambled_cgle_agents_are_reordered() {
    for seed in [1, 2] {
        let bundle = scramble(cgle_window(), seed).unwrap();
        let chart = build_emergent_chart(&bundle, &ChartConfig::default()).unwrap();
        let report = verify_ordering(&chart, &true_positions(&bundle)).unwrap();
        assert!(report.spearman.abs() >= 0.999, "{report:?}");
        assert!(report.rank_matches >= 126, "{report:?}");
    }
}

#[test]
fn ordering_is_stable_across_temporal_subsampling() {
    let bundle = scramble(cgle_window(), 11).unwrap();
    let truth = true_positions(&bundle);
    for every in [1, 2, 5, 10, 15, 20] {
        let cfg = ChartConfig {
            subsample_every: every,
            ..ChartConfig::default()
        };
        let report =
            verify_ordering(&build_emergent_chart(&bundle, &cfg).unwrap(), &truth).unwrap();
        assert_eq!(report.rank_matches, 128, "subsample {every}: {report:?}");
    }
}

#[test]
fn chart_is_permutation_equivariant() {
    let a = scramble(cgle_window(), 3).unwrap();
    let b = scramble(cgle_window(), 4).unwrap();
    let cfg = ChartConfig::default();
    let (ca, cb) = (
        build_emergent_chart(&a, &cfg).unwrap(),
        build_emergent_chart(&b, &cfg).unwrap(),
    );
    let mut by_grid_a = vec![0.0; 128];
    let mut by_grid_b = vec![0.0; 128];
    for (agent, &g) in a.permutation.as_ref().unwrap().iter().enumerate() {
        by_grid_a[g] = ca.phi1[agent];
    }
    for (agent, &g) in b.permutation.as_ref().unwrap().iter().enumerate() {
        by_grid_b[g] = cb.phi1[agent];
    }
    let sign = if by_grid_a[0] * by_grid_b[0] < 0.0 {
        -1.0
    } else {
        1.0
    };
    for (x, y) in by_grid_a.iter().zip(&by_grid_b) {
        assert!((x - sign * y).abs() < 1e-8, "{x} vs {y}");
    }
}

#[test]
fn rescaling_keeps_order_and_range() {
    let bundle = scramble(cgle_window(), 5).unwrap();
    let chart = build_emergent_chart(&bundle, &ChartConfig::default()).unwrap();
    let lo = chart
        .rescaled_phi
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = chart
        .rescaled_phi
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!((lo, hi), (-1.0, 1.0));
    let mut order: Vec<usize> = (0..128).collect();
    order.sort_by(|&i, &j| {
        chart.rescaled_phi[i]
            .partial_cmp(&chart.rescaled_phi[j])
            .unwrap()
            .then(i.cmp(&j))
    });
    assert_eq!(order, chart.agent_order);
    assert!(chart.phi1[0] < 0.0);
}

#[test]
fn resampled_cgle_field_is_smooth_in_phi() {
    let bundle = scramble(cgle_window(), 6).unwrap();
    let chart = build_emergent_chart(&bundle, &ChartConfig::default()).unwrap();
    let out = resample_on_phi(&bundle, &chart, 128).unwrap();
    assert_eq!(out.channels, Channels::Complex);
    assert_eq!(out.grid.boundary, Boundary::ZeroFlux);
    assert_eq!(out.n_snapshots(), bundle.n_times());
    assert!(out.data().iter().all(|v| v.is_finite() && v.abs() < 2.0));
}

/// Bundle whose agent `a` sits at `phi[a]` with `W = f(phi, t)`.
fn synthetic(
    phi: &[f64],
    times: usize,
    f: impl Fn(f64, f64) -> (f64, f64),
) -> (AgentBundle<f64>, EmergentChart<f64>) {
    let n = phi.len();
    let series = Array3::from_shape_fn((n, times, 2), |(a, t, c)| {
        let (re, im) = f(phi[a], t as f64 * 0.1);
        if c == 0 {
            re
        } else {
            im
        }
    });
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| phi[i].partial_cmp(&phi[j]).unwrap());
    let chart = EmergentChart {
        phi1: phi.to_vec(),
        rescaled_phi: phi.to_vec(),
        agent_order: order,
        epsilon: 1.0,
        eigenvalues: vec![],
    };
    (
        AgentBundle {
            series,
            t0: 0.0,
            dt_sample: 0.1,
            permutation: None,
        },
        chart,
    )
}

#[test]
fn quadratic_fields_are_resampled_exactly() {
    let phi = [0.3, -1.0, 0.85, -0.2, 1.0, -0.61, 0.05, 0.5, -0.9, 0.7];
    let (bundle, chart) = synthetic(&phi, 4, |p, t| (p * p + t, -2.0 * p * p * t));
    let out = resample_on_phi(&bundle, &chart, 33).unwrap();
    for s in 0..4 {
        let t = s as f64 * 0.1;
        for (i, p) in out.grid.coords().iter().enumerate() {
            assert!((out.snapshot(s)[2 * i] - (p * p + t)).abs() < 1e-10);
            assert!((out.snapshot(s)[2 * i + 1] + 2.0 * p * p * t).abs() < 1e-10);
        }
    }
}

#[test]
fn uniform_chart_reproduces_knot_values() {
    let phi: Vec<f64> = (0..16)
        .rev()
        .map(|i| -1.0 + 2.0 * i as f64 / 15.0)
        .collect();
    let (bundle, chart) = synthetic(&phi, 3, |p, t| ((5.0 * p).sin() + t, (3.0 * p).cos() * t));
    let out = resample_on_phi(&bundle, &chart, 16).unwrap();
    for s in 0..3 {
        for (i, p) in out.grid.coords().iter().enumerate() {
            let (re, im) = (
                (5.0 * p).sin() + s as f64 * 0.1,
                (3.0 * p).cos() * s as f64 * 0.1,
            );
            assert!((out.snapshot(s)[2 * i] - re).abs() < 1e-8);
            assert!((out.snapshot(s)[2 * i + 1] - im).abs() < 1e-8);
        }
    }
}

#[test]
fn duplicate_coordinates_are_rejected() {
    let mut phi: Vec<f64> = (0..10).map(|i| -1.0 + i as f64 * 0.2).collect();
    phi[4] = phi[3];
    let (bundle, chart) = synthetic(&phi, 2, |p, _| (p, 0.0));
    assert!(matches!(
        resample_on_phi(&bundle, &chart, 16),
        Err(Error::DuplicateCoordinate { .. })
    ));
    let (bundle, chart) = synthetic(&[-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 0.9, 1.0], 2, |p, _| {
        (p, 0.0)
    });
    assert!(resample_on_phi(&bundle, &chart, 7).is_err());
}

#[test]
fn two_agents_cannot_form_a_chart() {
    let series = Array3::from_shape_fn((2, 5, 2), |(a, t, _)| (a * t) as f64);
    let bundle = AgentBundle {
        series,
        t0: 0.0,
        dt_sample: 1.0,
        permutation: None,
    };
    assert!(matches!(
        build_emergent_chart(&bundle, &ChartConfig::default()),
        Err(Error::NotOneDimensional { .. })
    ));
}

#[test]
fn verify_ordering_reports_orientation() {
    let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
    let (_, chart) = synthetic(&x, 1, |p, _| (p, 0.0));
    let r = verify_ordering(&chart, &x).unwrap();
    assert_eq!((r.spearman, r.flipped, r.rank_matches), (1.0, false, 20));
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let (_, chart) = synthetic(&neg, 1, |p, _| (p, 0.0));
    let r = verify_ordering(&chart, &x).unwrap();
    assert_eq!((r.spearman, r.flipped, r.rank_matches), (-1.0, true, 20));
    assert!(verify_ordering(&chart, &x[..5]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scramble_inverts_exactly(seed in any::<u64>(), n in 8usize..40, snaps in 1usize..6) {
        let grid = Grid::cell_centered(n, 1.0, Boundary::ZeroFlux).unwrap();
        let data: Vec<f64> = (0..n * snaps * 2).map(|i| (i as f64 * 0.37).sin()).collect();
        let traj = Trajectory::from_data(grid, Channels::Complex, 0.0, 0.5, data).unwrap();
        let bundle = scramble(&traj, seed).unwrap();
        let mut perm = bundle.permutation.clone().unwrap();
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(bundle.unscrambled().unwrap(), AgentBundle::from_trajectory(&traj).unwrap().series);
    }

    #[test]
    fn timeseries_distances_are_metric_like(seed in any::<u64>(), every in 1usize..4) {
        let grid = Grid::cell_centered(10, 1.0, Boundary::ZeroFlux).unwrap();
        let data: Vec<f64> = (0..10 * 8 * 2).map(|i| ((i as f64 + seed as f64 % 97.0) * 0.91).cos()).collect();
        let bundle = scramble(&Trajectory::from_data(grid, Channels::Complex, 0.0, 0.5, data).unwrap(), seed).unwrap();
        let d = timeseries_distance_matrix(&bundle, every).unwrap();
        for i in 0..10 {
            prop_assert_eq!(d[[i, i]], 0.0);
            for j in 0..10 {
                prop_assert_eq!(d[[i, j]], d[[j, i]]);
                prop_assert!(d[[i, j]] >= 0.0);
            }
        }
    }
}
