use std::path::{Path, PathBuf};
use std::time::Instant;

use coarsen::datastore::{
    load_matrix, load_trajectory, save_ensemble, save_matrix, save_trajectory, Boundary, Channels,
    Grid, Provenance, ScalarField1D, Trajectory,
};
use coarsen::emergent::{
    build_emergent_chart, resample_on_phi, scramble, verify_ordering, ChartConfig,
};
use coarsen::manifold::ensemble_moments;
use coarsen::particles::{ParticleSimConfig, ParticleSimulator};
use coarsen::pde_net::{
    build_training_pairs, rollout as integrate, train_with, Architecture, FeatureSpec, Mlp,
    RolloutBoundary, RolloutConfig, TrainConfig, TrainingSet,
};
use coarsen::pipeline::burgers::{
    moving_average, run_learned_burgers, MassChart, MassChartConfig, MomentSeries,
};
use coarsen::pipeline::cgle::run_emergent_pde;
use coarsen::pipeline::ics::{cgle_front, cgle_perturbed, cosine_density, random_density};
use coarsen::solvers::{
    simulate_burgers_fv, simulate_cgle as cgle_solve, BurgersConfig, CgleConfig,
};
use coarsen::stats::spearman;
use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{set, PipelineConfig};
use crate::{
    BoundaryArg, CglePreset, CliError, DensityIc, EmbedDistributions, EmbedTimeseries, Evaluate,
    Experiment, Pipeline, Preset, Rollout, SimulateBurgers, SimulateCgle, SimulateParticles,
    TrainPde,
};

fn stem_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    p.with_file_name(format!("{}{suffix}", stem_name(p)))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn density_ic(kind: DensityIc, grid: Grid<f64>, seed: u64) -> Result<ScalarField1D<f64>, CliError> {
    Ok(match kind {
        DensityIc::PaperFig1 => cosine_density(grid)?,
        DensityIc::Random => random_density(grid, seed)?,
    })
}

pub fn simulate_particles(cfg: &mut PipelineConfig, a: SimulateParticles) -> Result<(), CliError> {
    let p = &mut cfg.particles;
    set!(p.n_traj, a.n_traj);
    set!(p.nu, a.nu);
    set!(p.resolution, a.resolution);
    set!(p.n_boxes, a.n_boxes);
    set!(p.dt, a.dt);
    set!(p.t_final, a.t_final);
    set!(p.sample_every, a.sample_every);
    set!(p.moments, a.moments);
    let p = cfg.particles.clone();
    let prov = cfg.provenance("simulate-particles");
    let grid = Grid::cell_centered(p.n_boxes, std::f64::consts::TAU, Boundary::Periodic)?;
    for k in 0..p.n_traj {
        let seed = cfg.seed + k as u64;
        let ic = density_ic(a.ic, grid, seed)?;
        let sim_cfg = ParticleSimConfig {
            nu: p.nu,
            dt: p.dt,
            n_boxes: p.n_boxes,
            resolution: p.resolution,
            seed,
            t_final: p.t_final,
            sample_every: p.sample_every,
        };
        let steps = sim_cfg.n_steps()?;
        let mut sim = ParticleSimulator::new(&ic, sim_cfg)?;
        let mut density = Trajectory::new(grid, Channels::Real, 0.0, p.dt * p.sample_every as f64)?;
        let mut moments: Vec<Array2<f64>> = Vec::new();
        let mut record = |sim: &ParticleSimulator<f64>| -> Result<(), CliError> {
            density.push(&sim.density()?.values)?;
            if p.moments > 0 {
                moments.push(ensemble_moments(sim.ensemble(), p.n_boxes, p.moments)?);
            }
            Ok(())
        };
        record(&sim)?;
        for step in 1..=steps {
            sim.step();
            if step % p.sample_every == 0 {
                record(&sim)?;
            }
        }
        let mut prov = prov.clone();
        prov.insert("seed".into(), json!(seed));
        prov.insert("ic".into(), json!(format!("{:?}", a.ic)));
        let stem = cfg.path(&format!("{}_{k}", a.name));
        save_trajectory(&stem, &density, &prov)?;
        save_ensemble(with_suffix(&stem, "_ensemble"), sim.ensemble(), &prov)?;
        if p.moments > 0 {
            let rows = moments.len() * p.n_boxes;
            let mut all = Array2::zeros((rows, p.moments + 1));
            for (i, m) in moments.iter().enumerate() {
                all.slice_mut(s![i * p.n_boxes..(i + 1) * p.n_boxes, ..])
                    .assign(m);
            }
            prov.insert("n_boxes".into(), json!(p.n_boxes));
            prov.insert("dt_sample".into(), json!(density.dt_sample));
            prov.insert("domain_length".into(), json!(grid.domain_length));
            save_matrix(with_suffix(&stem, "_moments"), &all, &prov)?;
        }
        log::info!(
            "wrote {} ({} snapshots)",
            stem.display(),
            density.n_snapshots()
        );
    }
    Ok(())
}

pub fn simulate_burgers(cfg: &mut PipelineConfig, a: SimulateBurgers) -> Result<(), CliError> {
    let b = &mut cfg.burgers;
    set!(b.nu, a.nu);
    set!(b.n_cells, a.n_cells);
    set!(b.dt, a.dt);
    set!(b.t_final, a.t_final);
    set!(b.sample_every, a.sample_every);
    set!(b.average_to, a.average_to);
    let b = cfg.burgers.clone();
    let grid = Grid::cell_centered(b.n_cells, std::f64::consts::TAU, Boundary::Periodic)?;
    let ic = density_ic(a.ic, grid, cfg.seed)?;
    let fv_cfg = BurgersConfig {
        nu: b.nu,
        n_cells: b.n_cells,
        dt: b.dt,
        t_final: b.t_final,
        sample_every: b.sample_every,
    };
    let mut traj = simulate_burgers_fv(&ic, &fv_cfg)?;
    if b.average_to > 0 && b.average_to != b.n_cells {
        traj = average_cells(&traj, b.average_to)?;
    }
    let mut prov = cfg.provenance("simulate-burgers");
    prov.insert("ic".into(), json!(format!("{:?}", a.ic)));
    save_trajectory(cfg.path(&a.name), &traj, &prov)?;
    log::info!(
        "wrote {} ({} snapshots)",
        cfg.path(&a.name).display(),
        traj.n_snapshots()
    );
    Ok(())
}

/// Cell averages of a periodic scalar trajectory on a coarser grid.
pub fn average_cells(traj: &Trajectory<f64>, n: usize) -> Result<Trajectory<f64>, CliError> {
    if n == 0 || !traj.grid.n.is_multiple_of(n) {
        return Err(CliError::Config(format!(
            "{} cells cannot be averaged onto {n}",
            traj.grid.n
        )));
    }
    let factor = traj.grid.n / n;
    let grid = Grid::cell_centered(n, traj.grid.domain_length, traj.grid.boundary)?;
    let mut out = Trajectory::new(grid, traj.channels, traj.t0, traj.dt_sample)?;
    for i in 0..traj.n_snapshots() {
        let coarse: Vec<f64> = traj
            .snapshot(i)
            .chunks(factor)
            .map(|c| c.iter().sum::<f64>() / factor as f64)
            .collect();
        out.push(&coarse)?;
    }
    Ok(out)
}

pub fn simulate_cgle(cfg: &mut PipelineConfig, a: SimulateCgle) -> Result<(), CliError> {
    let c = &mut cfg.cgle;
    set!(c.c1, a.c1);
    set!(c.c2, a.c2);
    set!(c.length, a.length);
    set!(c.n, a.n);
    set!(c.dt, a.dt);
    set!(c.t_final, a.t_final);
    set!(c.sample_every, a.sample_every);
    let c = cfg.cgle.clone();
    let grid = Grid::cell_centered(c.n, c.length, Boundary::ZeroFlux)?;
    let ic = match a.preset {
        CglePreset::Paper => cgle_front(grid, c.length)?,
        CglePreset::Perturbed => cgle_perturbed(grid, c.length, cfg.seed)?,
    };
    let solver = CgleConfig {
        c1: c.c1,
        c2: c.c2,
        length: c.length,
        n: c.n,
        dt: c.dt,
        t_final: c.t_final,
        sample_every: c.sample_every,
    };
    let traj = cgle_solve(&ic, &solver)?;
    let mut prov = cfg.provenance("simulate-cgle");
    prov.insert("preset".into(), json!(format!("{:?}", a.preset)));
    save_trajectory(cfg.path(&a.name), &traj, &prov)?;
    log::info!(
        "wrote {} ({} snapshots)",
        cfg.path(&a.name).display(),
        traj.n_snapshots()
    );
    Ok(())
}

fn load_moments(stem: &Path, k: usize) -> Result<MomentSeries<f64>, CliError> {
    let (m, manifest) = load_matrix::<f64>(with_suffix(stem, "_moments"))?;
    let get = |key: &str| {
        manifest
            .provenance
            .get(key)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| CliError::Config(format!("{} lacks {key}", stem.display())))
    };
    let n_boxes = get("n_boxes")? as usize;
    let dt_sample = get("dt_sample")?;
    let length = get("domain_length")?;
    if k + 1 > m.ncols() {
        return Err(CliError::Config(format!(
            "{} records moments up to {}, not {k}",
            stem.display(),
            m.ncols() - 1
        )));
    }
    if n_boxes == 0 || m.nrows() % n_boxes != 0 {
        return Err(CliError::Config(format!(
            "{}: moment rows do not split into boxes",
            stem.display()
        )));
    }
    let snapshots = (0..m.nrows() / n_boxes)
        .map(|i| m.slice(s![i * n_boxes..(i + 1) * n_boxes, ..=k]).to_owned())
        .collect();
    Ok(MomentSeries {
        grid: Grid::cell_centered(n_boxes, length, Boundary::Periodic)?,
        t0: 0.0,
        dt_sample,
        snapshots,
    })
}

pub fn load_chart(stem: &Path) -> Result<MassChart<f64>, CliError> {
    let (sample, manifest) = load_matrix::<f64>(stem)?;
    let width = manifest
        .provenance
        .get("box_width")
        .and_then(|v| v.as_f64());
    let chart_cfg = manifest
        .provenance
        .get("chart")
        .cloned()
        .map(serde_json::from_value::<MassChartConfig>);
    match (width, chart_cfg) {
        (Some(w), Some(Ok(c))) => Ok(MassChart::from_sample(sample, w, &c)?),
        _ => Err(CliError::Config(format!(
            "{} is not a mass chart",
            stem.display()
        ))),
    }
}

pub fn embed_distributions(
    cfg: &mut PipelineConfig,
    a: EmbedDistributions,
) -> Result<(), CliError> {
    set!(cfg.embed.n_points, a.n_points);
    let k = a.k.unwrap_or(cfg.particles.moments);
    let runs = a
        .inputs
        .iter()
        .map(|p| load_moments(p, k))
        .collect::<Result<Vec<_>, _>>()?;
    let chart = MassChart::fit(&runs, &cfg.embed)?;
    let mut prov = cfg.provenance("embed-distributions");
    prov.insert("box_width".into(), json!(chart.box_width));
    prov.insert("chart".into(), json!(cfg.embed));
    prov.insert("moment_order".into(), json!(k));
    save_matrix(cfg.path(&a.name), &chart.sample, &prov)?;
    for (run, input) in runs.iter().zip(&a.inputs) {
        let phi = chart.phi_trajectory(run)?;
        save_trajectory(cfg.path(&format!("{}_phi", stem_name(input))), &phi, &prov)?;
    }
    let phi = chart.embedding.coordinate(chart.coordinate).to_vec();
    let mass = chart.sample.column(0).to_vec();
    let report = json!({
        "spearman_phi_mass": spearman(&phi, &mass),
        "independent": chart.embedding.independent,
        "eigenvalues": chart.embedding.eigenvalues.to_vec(),
        "epsilon": chart.embedding.epsilon,
    });
    write_json(&cfg.path(&format!("{}_report.json", a.name)), &report)?;
    log::info!(
        "chart on {} boxes, spearman(phi, mass) = {}",
        chart.sample.nrows(),
        report["spearman_phi_mass"]
    );
    Ok(())
}

pub fn embed_timeseries(cfg: &mut PipelineConfig, a: EmbedTimeseries) -> Result<(), CliError> {
    let ts = &mut cfg.timeseries;
    set!(ts.subsample_every, a.subsample);
    set!(ts.scramble_seed, a.scramble_seed);
    set!(ts.n_grid, a.n_grid);
    let ts = cfg.timeseries.clone();
    let (traj, _) = load_trajectory::<f64>(&a.input)?;
    let bundle = scramble(&traj, ts.scramble_seed)?;
    let chart = build_emergent_chart(
        &bundle,
        &ChartConfig {
            subsample_every: ts.subsample_every,
            ..ChartConfig::default()
        },
    )?;
    let positions: Vec<f64> = bundle
        .permutation
        .as_ref()
        .expect("scrambled")
        .iter()
        .map(|&g| traj.grid.coord(g))
        .collect();
    let report = verify_ordering(&chart, &positions)?;
    let prov = cfg.provenance("embed-timeseries");
    write_json(&cfg.path(&format!("{}_chart.json", a.name)), &chart)?;
    write_json(&cfg.path(&format!("{}_ordering.json", a.name)), &report)?;
    save_trajectory(
        cfg.path(&format!("{}_phi", stem_name(&a.input))),
        &resample_on_phi(&bundle, &chart, ts.n_grid)?,
        &prov,
    )?;
    for other in &a.apply_to {
        let (t, _) = load_trajectory::<f64>(other)?;
        let out = resample_on_phi(&scramble(&t, ts.scramble_seed)?, &chart, ts.n_grid)?;
        save_trajectory(cfg.path(&format!("{}_phi", stem_name(other))), &out, &prov)?;
    }
    log::info!(
        "ordering: spearman {:.6}, {} agents in place",
        report.spearman,
        report.rank_matches
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TrainRecord {
    preset: String,
    precision: String,
    loss: Vec<f64>,
    seconds: f64,
    provenance: Provenance,
}

fn spec_for(preset: Preset) -> (FeatureSpec, Architecture) {
    match preset {
        Preset::Burgers => (FeatureSpec::burgers(), Architecture::burgers()),
        Preset::Cgle => (FeatureSpec::cgle(), Architecture::cgle()),
    }
}

fn train_typed<T: coarsen::Real>(
    trajs: &[Trajectory<f64>],
    spec: &FeatureSpec,
    arch: Architecture,
    tc: &TrainConfig,
) -> Result<(Mlp<f64>, Vec<f64>), CliError> {
    let sets = trajs
        .iter()
        .map(|t| build_training_pairs(&t.cast::<T>(), spec))
        .collect::<Result<Vec<_>, _>>()?;
    let data = TrainingSet::concat(&sets)?;
    drop(sets);
    log::info!("{} training rows", data.len());
    let (model, loss) = train_with(&data, arch, tc, |e, l| {
        log::info!("epoch {e}: loss {l:.5e}")
    })?;
    Ok((cast_model(&model), loss))
}

fn cast_model<T: coarsen::Real>(m: &Mlp<T>) -> Mlp<f64> {
    let layers = m
        .layers
        .iter()
        .map(|l| coarsen::pde_net::Layer {
            weight: l.weight.mapv(|v| v.as_f64()),
            bias: l.bias.mapv(|v| v.as_f64()),
        })
        .collect();
    let mut out = Mlp::from_layers(m.arch.clone(), layers).expect("same architecture");
    out.input = m.input.clone();
    out.output = m.output.clone();
    out
}

pub fn train_pde(cfg: &mut PipelineConfig, a: TrainPde) -> Result<(), CliError> {
    let mut tc = cfg.train.clone().unwrap_or_else(|| match a.preset {
        Preset::Burgers => TrainConfig::burgers(),
        Preset::Cgle => TrainConfig::cgle(),
    });
    set!(tc.epochs, a.epochs);
    set!(tc.batch_size, a.batch_size);
    set!(tc.adam.lr, a.lr);
    tc.seed = cfg.seed;
    cfg.train = Some(tc.clone());
    let (spec, arch) = spec_for(a.preset);
    let mut trajs = Vec::new();
    for p in &a.inputs {
        let (t, _) = load_trajectory::<f64>(p)?;
        trajs.push(if a.smooth > 0 {
            moving_average(&t, a.smooth)?
        } else {
            t
        });
    }
    let start = Instant::now();
    let (model, loss) = if a.f32 {
        train_typed::<f32>(&trajs, &spec, arch, &tc)?
    } else {
        train_typed::<f64>(&trajs, &spec, arch, &tc)?
    };
    let seconds = start.elapsed().as_secs_f64();
    let prov = cfg.provenance("train-pde");
    let stem = cfg.path(&a.name);
    model.save(&stem, &prov)?;
    let record = TrainRecord {
        preset: format!("{:?}", a.preset).to_lowercase(),
        precision: if a.f32 { "f32" } else { "f64" }.into(),
        loss,
        seconds,
        provenance: prov,
    };
    write_json(&with_suffix(&stem, "_train.json"), &record)?;
    log::info!("trained in {seconds:.1} s");
    Ok(())
}

pub fn rollout(cfg: &mut PipelineConfig, a: Rollout) -> Result<(), CliError> {
    let r = &mut cfg.rollout;
    set!(r.dt, a.dt);
    set!(r.duration, a.duration);
    set!(r.record_every, a.record_every);
    set!(r.corridor, a.corridor);
    let r = cfg.rollout.clone();
    let record: TrainRecord = read_json(&with_suffix(&a.model, "_train.json"))?;
    let preset = match record.preset.as_str() {
        "burgers" => Preset::Burgers,
        "cgle" => Preset::Cgle,
        other => return Err(CliError::Config(format!("unknown model preset {other}"))),
    };
    let (spec, _) = spec_for(preset);
    let (source, _) = load_trajectory::<f64>(&a.ic_from)?;
    if a.snapshot >= source.n_snapshots() {
        return Err(CliError::Config(format!(
            "snapshot {} of {}",
            a.snapshot,
            source.n_snapshots()
        )));
    }
    let truth = source.slice(a.snapshot, source.n_snapshots());
    let boundary = match a.boundary {
        BoundaryArg::Periodic => RolloutBoundary::Periodic,
        BoundaryArg::Corridor => RolloutBoundary::Corridor {
            truth: &truth,
            width: r.corridor,
        },
    };
    let rc = RolloutConfig {
        t0: truth.t0,
        dt: r.dt,
        duration: r.duration,
        record_every: r.record_every,
    };
    let start = Instant::now();
    let out = if record.precision == "f32" {
        let model = Mlp::<f32>::load(&a.model)?;
        let truth32 = truth.cast::<f32>();
        let boundary = match boundary {
            RolloutBoundary::Periodic => RolloutBoundary::Periodic,
            RolloutBoundary::Corridor { width, .. } => RolloutBoundary::Corridor {
                truth: &truth32,
                width,
            },
        };
        let rc = RolloutConfig {
            t0: rc.t0 as f32,
            dt: rc.dt as f32,
            duration: rc.duration as f32,
            record_every: rc.record_every,
        };
        integrate(
            &model,
            truth32.snapshot(0),
            truth32.grid,
            truth.channels,
            &spec,
            boundary,
            &rc,
        )?
        .cast::<f64>()
    } else {
        let model = Mlp::<f64>::load(&a.model)?;
        integrate(
            &model,
            truth.snapshot(0),
            truth.grid,
            truth.channels,
            &spec,
            boundary,
            &rc,
        )?
    };
    let mut prov = cfg.provenance("rollout");
    prov.insert(
        "runtime_seconds".into(),
        json!(start.elapsed().as_secs_f64()),
    );
    save_trajectory(cfg.path(&a.name), &out, &prov)?;
    log::info!(
        "wrote {} ({} snapshots)",
        cfg.path(&a.name).display(),
        out.n_snapshots()
    );
    Ok(())
}

/// Reference snapshots at the prediction's times.
fn align(
    prediction: &Trajectory<f64>,
    truth: &Trajectory<f64>,
) -> Result<Trajectory<f64>, CliError> {
    let mut out = Trajectory::new(
        truth.grid,
        truth.channels,
        prediction.t0,
        prediction.dt_sample,
    )?;
    for i in 0..prediction.n_snapshots() {
        let s = (prediction.time(i) - truth.t0) / truth.dt_sample;
        let k = s.round();
        if (s - k).abs() > 1e-6 || k < 0.0 || k as usize >= truth.n_snapshots() {
            return Err(CliError::Config(format!(
                "reference has no snapshot at t = {}",
                prediction.time(i)
            )));
        }
        out.push(truth.snapshot(k as usize))?;
    }
    Ok(out)
}

pub fn evaluate(cfg: &PipelineConfig, a: Evaluate) -> Result<(), CliError> {
    let (mut prediction, manifest) = load_trajectory::<f64>(&a.prediction)?;
    let (truth, _) = load_trajectory::<f64>(&a.truth)?;
    if let Some(chart) = &a.chart {
        prediction = load_chart(chart)?.density_trajectory(&prediction)?;
    }
    let reference = align(&prediction, &truth)?;
    let rel = coarsen::pde_net::rel_mse(&prediction, &reference)?;
    let ordering: Option<serde_json::Value> = a.ordering.as_deref().map(read_json).transpose()?;
    let metrics = json!({
        "rel_mse": rel,
        "spearman": ordering.as_ref().and_then(|o| o.get("spearman")).cloned(),
        "runtime": manifest.provenance.get("runtime_seconds").cloned(),
        "ordering": ordering,
    });
    write_json(&cfg.path(&format!("{}.json", a.name)), &metrics)?;
    log::info!("rel_mse = {rel:.4e}");
    Ok(())
}

pub fn pipeline(cfg: &mut PipelineConfig, a: Pipeline) -> Result<(), CliError> {
    let start = Instant::now();
    let log = |m: &str| log::info!("[{:.0} s] {m}", start.elapsed().as_secs_f64());
    match a.experiment {
        Experiment::Burgers => {
            set!(cfg.learned_burgers.train.epochs, a.epochs);
            let report = run_learned_burgers::<f64>(&cfg.learned_burgers, &a.train_seeds, log)?;
            let metrics = json!({
                "rel_mse": report.best(),
                "per_seed": report,
                "spearman": null,
                "runtime": start.elapsed().as_secs_f64(),
                "provenance": cfg.provenance("pipeline burgers"),
            });
            write_json(&cfg.path("burgers_metrics.json"), &metrics)?;
        }
        Experiment::Emergent => {
            set!(cfg.emergent.train.epochs, a.epochs);
            if let Some(&seed) = a.train_seeds.first() {
                cfg.emergent.train.seed = seed;
            }
            let (model, report) = run_emergent_pde::<f32>(&cfg.emergent, log)?;
            let prov = cfg.provenance("pipeline emergent");
            cast_model(&model).save(cfg.path("emergent_model"), &prov)?;
            let metrics = json!({
                "rel_mse": report.rel_mse,
                "spearman": report.ordering.spearman,
                "report": report,
                "runtime": start.elapsed().as_secs_f64(),
                "provenance": prov,
            });
            write_json(&cfg.path("emergent_metrics.json"), &metrics)?;
        }
    }
    Ok(())
}
