use coarsen::datastore::*;
use ndarray::Array2;
use proptest::prelude::*;
use serde_json::json;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 4.0),
        Just(f64::MAX),
    ]
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scalar_trajectory_round_trips(n in 3usize..20, snaps in 1usize..6, seed in any::<u64>(), data in prop::collection::vec(finite(), 120)) {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::cell_centered(n, 6.0, Boundary::Periodic).unwrap();
        let mut traj = Trajectory::new(grid, Channels::Real, 0.25, 1e-3).unwrap();
        for s in 0..snaps {
            traj.push(&(0..n).map(|i| data[(s * n + i) % data.len()]).collect::<Vec<_>>()).unwrap();
        }
        let mut prov = Provenance::new();
        prov.insert("seed".into(), json!(seed));
        save_trajectory(dir.path().join("t"), &traj, &prov).unwrap();
        let (back, manifest) = load_trajectory::<f64>(dir.path().join("t")).unwrap();
        prop_assert_eq!(bits(back.data()), bits(traj.data()));
        prop_assert_eq!(back.grid, traj.grid);
        prop_assert_eq!(back.t0.to_bits(), traj.t0.to_bits());
        prop_assert_eq!(back.dt_sample.to_bits(), traj.dt_sample.to_bits());
        prop_assert_eq!(&manifest.provenance["seed"], &json!(seed));
    }

    #[test]
    fn complex_trajectory_round_trips(n in 3usize..12, data in prop::collection::vec(finite(), 48)) {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::nodal(n, -1.0, 1.0, Boundary::ZeroFlux).unwrap();
        let mut traj = Trajectory::new(grid, Channels::Complex, 0.0, 0.5).unwrap();
        traj.push(&(0..2 * n).map(|i| data[i % data.len()]).collect::<Vec<_>>()).unwrap();
        save_trajectory(dir.path().join("c"), &traj, &Provenance::new()).unwrap();
        let (back, _) = load_trajectory::<f64>(dir.path().join("c")).unwrap();
        prop_assert_eq!(back.channels, Channels::Complex);
        prop_assert_eq!(bits(back.data()), bits(traj.data()));
    }

    #[test]
    fn single_precision_round_trips(data in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 8..64)) {
        let dir = tempfile::tempdir().unwrap();
        let m = Array2::from_shape_vec((1, data.len()), data.clone()).unwrap();
        save_matrix(dir.path().join("m"), &m, &Provenance::new()).unwrap();
        let (back, _) = load_matrix::<f32>(dir.path().join("m")).unwrap();
        let a: Vec<u32> = back.iter().map(|x| x.to_bits()).collect();
        let b: Vec<u32> = data.iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ensemble_round_trips(positions in prop::collection::vec(0.0f64..6.0, 0..200), r in 1.0f64..1e5) {
        let dir = tempfile::tempdir().unwrap();
        let ens = ParticleEnsemble::new(positions, r, 2.0 * std::f64::consts::PI).unwrap();
        save_ensemble(dir.path().join("e"), &ens, &Provenance::new()).unwrap();
        let (back, _) = load_ensemble::<f64>(dir.path().join("e")).unwrap();
        prop_assert_eq!(bits(&back.positions), bits(&ens.positions));
        prop_assert_eq!(back.resolution.to_bits(), r.to_bits());
    }
}

#[test]
fn rewriting_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::cell_centered(5, 1.0, Boundary::Periodic).unwrap();
    let traj = Trajectory::from_data(
        grid,
        Channels::Real,
        0.0,
        0.1,
        vec![0.1, 0.2, 0.3, 0.4, 0.5],
    )
    .unwrap();
    save_trajectory(dir.path().join("a"), &traj, &Provenance::new()).unwrap();
    let (back, _) = load_trajectory::<f64>(dir.path().join("a")).unwrap();
    save_trajectory(dir.path().join("b"), &back, &Provenance::new()).unwrap();
    for ext in ["bin", "json"] {
        let a = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(a, b, "{ext}");
    }
}
