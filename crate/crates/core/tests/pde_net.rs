use std::f64::consts::PI;

use coarsen::datastore::{Boundary, Channels, Grid, Provenance, Trajectory};
use coarsen::pde_net::*;
use ndarray::{concatenate, Array2, Axis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.5..1.5))
}

fn param_mut(layers: &mut [Layer<f64>], mut k: usize) -> &mut f64 {
    for layer in layers {
        if k < layer.weight.len() {
            let cols = layer.weight.ncols();
            return &mut layer.weight[[k / cols, k % cols]];
        }
        k -= layer.weight.len();
        if k < layer.bias.len() {
            return &mut layer.bias[k];
        }
        k -= layer.bias.len();
    }
    panic!("parameter index out of range");
}

fn check_gradient(arch: Architecture, probes: usize, seed: u64) {
    let model = Mlp::<f64>::init(arch.clone(), seed).unwrap();
    let x = random_matrix(24, arch.n_inputs(), seed + 1);
    let y = random_matrix(24, arch.n_outputs(), seed + 2);
    let (_, grads) = model.loss_and_gradient_standardized(x.view(), y.view());
    let analytic = flatten(&grads);
    let n = model.n_parameters();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 3);
    let h = 1e-6;
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    for _ in 0..probes {
        let k = rng.random_range(0..n);
        let mut plus = model.clone();
        *param_mut(&mut plus.layers, k) += h;
        let mut minus = model.clone();
        *param_mut(&mut minus.layers, k) -= h;
        let lp = half_mse(plus.forward_standardized(x.view()).view(), y.view());
        let lm = half_mse(minus.forward_standardized(x.view()).view(), y.view());
        let numeric = (lp - lm) / (2.0 * h);
        let err = (numeric - analytic[k]).abs();
        assert!(
            err <= 1e-5 * analytic[k].abs().max(1e-2 * scale),
            "parameter {k}: analytic {} numeric {numeric}",
            analytic[k]
        );
    }
}

#[test]
fn gradient_matches_central_differences_relu_network() {
    check_gradient(Architecture::burgers(), 400, 7);
}

#[test]
fn gradient_matches_central_differences_tanh_network() {
    check_gradient(Architecture::cgle(), 400, 11);
}

#[test]
fn duplicated_batch_leaves_loss_and_gradient_unchanged() {
    let model = Mlp::<f64>::init(Architecture::cgle(), 3).unwrap();
    let x = random_matrix(300, 8, 4);
    let y = random_matrix(300, 2, 5);
    let (l1, g1) = model.loss_and_gradient_standardized(x.view(), y.view());
    let xx = concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
    let yy = concatenate(Axis(0), &[y.view(), y.view()]).unwrap();
    let (l2, g2) = model.loss_and_gradient_standardized(xx.view(), yy.view());
    assert!((l1 - l2).abs() <= 1e-12 * l1);
    for (a, b) in flatten(&g1).iter().zip(flatten(&g2)) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn adam_descends_a_quadratic_bowl() {
    // one "layer" of parameters; loss ½Σ c_i p_i² with mixed curvature
    let curv = [1.0, 10.0, 0.1, 3.0];
    let mut params = vec![Layer {
        weight: Array2::from_shape_vec((2, 2), vec![1.0, -2.0, 0.5, 3.0]).unwrap(),
        bias: ndarray::arr1(&[0.0]),
    }];
    let loss = |p: &[Layer<f64>]| {
        p[0].weight
            .iter()
            .zip(curv)
            .map(|(w, c)| 0.5 * c * w * w)
            .sum::<f64>()
    };
    let initial = loss(&params);
    let mut adam = AdamState::new(&params, AdamConfig::default());
    for _ in 0..10_000 {
        let mut g = params.clone();
        g[0].weight.iter_mut().zip(curv).for_each(|(w, c)| *w *= c);
        g[0].bias.fill(0.0);
        adam.update(&mut params, &g).unwrap();
    }
    assert!(
        loss(&params) < 1e-6 * initial,
        "final loss {}",
        loss(&params)
    );
}

#[test]
fn training_recovers_a_linear_right_hand_side() {
    let x = random_matrix(4096, 3, 21);
    let mut y = Array2::zeros((4096, 1));
    for (i, row) in x.rows().into_iter().enumerate() {
        y[[i, 0]] = 0.3 * row[0] - 1.2 * row[1] + 0.05 * row[2] + 0.7;
    }
    let data = TrainingSet {
        features: x,
        targets: y,
        spec: FeatureSpec::burgers(),
    };
    let arch = Architecture {
        layer_sizes: vec![3, 1],
        activations: vec![],
    };
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 64,
        seed: 1,
        adam: AdamConfig {
            lr: 1e-2,
            ..AdamConfig::default()
        },
    };
    let (model, history) = train_pde_rhs(&data, arch, &cfg).unwrap();
    let (loss, _) = model
        .loss_and_gradient(data.features.view(), data.targets.view())
        .unwrap();
    assert!(loss < 1e-8, "loss {loss}");
    assert!(history.last().unwrap() < &history[0]);
}

#[test]
fn training_is_reproducible() {
    let x = random_matrix(700, 3, 31);
    let y = x
        .map_axis(Axis(1), |r| (r[0] * r[1]).sin())
        .insert_axis(Axis(1));
    let data = TrainingSet {
        features: x,
        targets: y,
        spec: FeatureSpec::burgers(),
    };
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 32,
        seed: 9,
        ..TrainConfig::default()
    };
    let (a, ha) = train_pde_rhs(&data, Architecture::burgers(), &cfg).unwrap();
    let (b, hb) = train_pde_rhs(&data, Architecture::burgers(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}

#[test]
fn model_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = Mlp::<f64>::init(Architecture::cgle(), 5).unwrap();
    let x = random_matrix(50, 8, 6);
    let y = random_matrix(50, 2, 7);
    model.fit_normalization(x.view(), y.view());
    let stem = dir.path().join("net");
    model.save(&stem, &Provenance::new()).unwrap();
    let back = Mlp::<f64>::load(&stem).unwrap();
    assert_eq!(back, model);
    assert_eq!(
        back.forward(x.view()).unwrap(),
        model.forward(x.view()).unwrap()
    );
}

fn max_derivative_error(n: usize, width: usize, boundary: Boundary, order: usize) -> f64 {
    let grid = match boundary {
        Boundary::Periodic => Grid::cell_centered(n, 2.0 * PI, boundary).unwrap(),
        Boundary::ZeroFlux => Grid::nodal(n, 0.0, 2.0, boundary).unwrap(),
    };
    let spec = FeatureSpec {
        orders: vec![order],
        boundary,
        stencil_width: width,
    };
    let op = DerivativeOperator::new(&spec, n, grid.spacing).unwrap();
    let z = grid.coords();
    let u: Vec<f64> = z.iter().map(|&z| (z + 0.3).sin()).collect();
    let f = op.features(&u, 1);
    z.iter()
        .enumerate()
        .map(|(i, &z)| (f[[i, 0]] - (z + 0.3 + order as f64 * PI / 2.0).sin()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn derivative_features_converge_at_stencil_order() {
    // the one-sided edge stencils set the rate: w − order
    let cases = [
        (3, Boundary::Periodic, 1, 2.0),
        (3, Boundary::Periodic, 2, 2.0),
        (9, Boundary::ZeroFlux, 1, 8.0),
        (9, Boundary::ZeroFlux, 3, 6.0),
    ];
    for (width, boundary, order, expected) in cases {
        let coarse = max_derivative_error(16, width, boundary, order);
        let fine = max_derivative_error(32, width, boundary, order);
        let observed = (coarse / fine).log2();
        assert!(
            observed > expected - 0.3,
            "width {width} order {order}: observed {observed}"
        );
    }
}

#[test]
fn heat_equation_rollout_tracks_exponential_decay() {
    let nu = 0.1;
    let n = 128;
    let grid = Grid::cell_centered(n, 2.0 * PI, Boundary::Periodic).unwrap();
    let spec = FeatureSpec {
        orders: vec![0, 1, 2],
        boundary: Boundary::Periodic,
        stencil_width: 9,
    };
    let heat = FnRhs {
        inputs: 3,
        outputs: 1,
        f: move |x: &[f64], o: &mut [f64]| o[0] = nu * x[2],
    };
    let ic: Vec<f64> = grid.coords().iter().map(|z| z.sin()).collect();
    let cfg = RolloutConfig {
        t0: 0.0,
        dt: 1e-4,
        duration: 1.0,
        record_every: 1000,
    };
    let traj = rollout(
        &heat,
        &ic,
        grid,
        Channels::Real,
        &spec,
        RolloutBoundary::Periodic,
        &cfg,
    )
    .unwrap();
    assert_eq!(traj.n_snapshots(), 11);
    for s in 0..traj.n_snapshots() {
        let t = traj.time(s);
        for (z, u) in grid.coords().iter().zip(traj.snapshot(s)) {
            assert!((u - (-nu * t).exp() * z.sin()).abs() < 1e-4);
        }
    }
}

#[test]
fn conservative_right_hand_side_keeps_the_mean() {
    // Σ u_i (u_{i+1} − u_{i−1}) and Σ (u_{i+1} − 2u_i + u_{i−1}) both telescope
    let n = 256;
    let grid = Grid::cell_centered(n, 2.0 * PI, Boundary::Periodic).unwrap();
    let burgers = FnRhs {
        inputs: 3,
        outputs: 1,
        f: |x: &[f64], o: &mut [f64]| o[0] = -x[0] * x[1] + 0.05 * x[2],
    };
    let ic: Vec<f64> = grid.coords().iter().map(|z| 2.0 + 0.5 * z.sin()).collect();
    let cfg = RolloutConfig {
        t0: 0.0,
        dt: 1e-3,
        duration: 1.0,
        record_every: 100,
    };
    let traj = rollout(
        &burgers,
        &ic,
        grid,
        Channels::Real,
        &FeatureSpec::burgers(),
        RolloutBoundary::Periodic,
        &cfg,
    )
    .unwrap();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let m0 = mean(traj.snapshot(0));
    for s in 0..traj.n_snapshots() {
        assert!((mean(traj.snapshot(s)) - m0).abs() < 1e-3);
    }
}

#[test]
fn rollout_rejects_mismatched_model() {
    let grid = Grid::cell_centered(16, 1.0, Boundary::Periodic).unwrap();
    let model = Mlp::<f64>::init(Architecture::cgle(), 0).unwrap();
    let cfg = RolloutConfig {
        t0: 0.0,
        dt: 0.1,
        duration: 1.0,
        record_every: 1,
    };
    assert!(rollout(
        &model,
        &[0.0; 16],
        grid,
        Channels::Real,
        &FeatureSpec::burgers(),
        RolloutBoundary::Periodic,
        &cfg
    )
    .is_err());
}

#[test]
fn mlp_rollout_matches_manual_euler_step() {
    let grid = Grid::cell_centered(32, 2.0 * PI, Boundary::Periodic).unwrap();
    let model = Mlp::<f64>::init(Architecture::burgers(), 2).unwrap();
    let ic: Vec<f64> = grid.coords().iter().map(|z| 1.0 + 0.2 * z.cos()).collect();
    let cfg = RolloutConfig {
        t0: 0.0,
        dt: 0.01,
        duration: 0.01,
        record_every: 1,
    };
    let spec = FeatureSpec::burgers();
    let traj = rollout(
        &model,
        &ic,
        grid,
        Channels::Real,
        &spec,
        RolloutBoundary::Periodic,
        &cfg,
    )
    .unwrap();
    let feats = DerivativeOperator::new(&spec, 32, grid.spacing)
        .unwrap()
        .features(&ic, 1);
    let rate = model.forward(feats.view()).unwrap();
    for i in 0..32 {
        assert_eq!(traj.snapshot(1)[i], ic[i] + 0.01 * rate[[i, 0]]);
    }
}

fn grid4() -> Grid<f64> {
    Grid::cell_centered(4, 1.0, Boundary::Periodic).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rel_mse_of_scaled_reference(data in prop::collection::vec(0.1f64..5.0, 8), c in -3.0f64..3.0) {
        let r = Trajectory::from_data(grid4(), Channels::Real, 0.0, 1.0, data.clone()).unwrap();
        let scaled = Trajectory::from_data(grid4(), Channels::Real, 0.0, 1.0, data.iter().map(|v| c * v).collect()).unwrap();
        let got = rel_mse(&scaled, &r).unwrap();
        prop_assert!((got - (c - 1.0).powi(2)).abs() < 1e-12 * (1.0 + got));
    }

    #[test]
    fn rel_mse_is_invariant_to_point_relabeling(
        a in prop::collection::vec(-2.0f64..2.0, 8),
        b in prop::collection::vec(0.5f64..2.0, 8),
        perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let relabel = |v: &[f64]| -> Vec<f64> { (0..2).flat_map(|s| perm.iter().map(move |&p| v[s * 4 + p])).collect() };
        let ta = Trajectory::from_data(grid4(), Channels::Real, 0.0, 1.0, a.clone()).unwrap();
        let tb = Trajectory::from_data(grid4(), Channels::Real, 0.0, 1.0, b.clone()).unwrap();
        let pa = Trajectory::from_data(grid4(), Channels::Real, 0.0, 1.0, relabel(&a)).unwrap();
        let pb = Trajectory::from_data(grid4(), Channels::Real, 0.0, 1.0, relabel(&b)).unwrap();
        let x = rel_mse(&ta, &tb).unwrap();
        let y = rel_mse(&pa, &pb).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * x.max(1e-300));
    }
}
