use proptest::prelude::*;

use codesign_lab::codesign::{BoxView, Objective, Task};
use codesign_lab::landscape::{analyze_objective, harvest_regions, slice_grid, spearman};
use codesign_lab::optimizers::{run, AlgorithmConfig, GaConfig, RunRecord};
use codesign_lab::rng::substream;
use codesign_lab::sim::{read_trajectory_csv, write_trajectory_csv};
use codesign_lab::tasks::{AnalyticTask, TaskSpec};

#[test]
fn isotropic_bowl_spreads_variance_evenly() {
    let m = 12;
    let task = AnalyticTask::sphere(m);
    let obj = BoxView::new(&task);
    let center = vec![0.5; m];
    let mut rng = substream(3, &[]);
    let s = analyze_objective(&obj, task.space(), &center, 0.05, 4000, &mut rng).unwrap();
    // gradients are linear in an isotropic Gaussian sample, so every direction carries ~1/m
    assert!(s.effective_dimensionality > 0.9 * m as f64, "ED {}", s.effective_dimensionality);
    for k in 1..=m {
        assert!((s.explained_at(k) - k as f64 / m as f64).abs() < 0.05, "k = {k}");
    }
}

#[test]
fn slice_of_a_bowl_is_exactly_quadratic_along_an_axis() {
    let task = AnalyticTask::sphere(5);
    let obj = BoxView::new(&task);
    let center = vec![0.5; 5];
    let (mut a, mut b) = (vec![0.0; 5], vec![0.0; 5]);
    a[1] = 3.0;
    b[4] = -1.0;
    let g = slice_grid(&obj, &center, &a, &b, 0.2, 9).unwrap();
    assert_eq!(g.at(4, 4), obj.value(&center).loss);
    let row: Vec<f64> = (0..9).map(|i| g.at(i, 4)).collect();
    let second: Vec<f64> = row.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    assert!(second.iter().all(|d| (d - second[0]).abs() < 1e-12 && *d > 0.0));
}

fn ga_records(n: usize, iterations: usize) -> Vec<RunRecord> {
    let task = AnalyticTask::rosenbrock(4);
    let obj = BoxView::new(&task);
    let alg = AlgorithmConfig::Ga(GaConfig::default());
    (0..n as u64)
        .map(|s| {
            let mut opt = alg.build(4, s).unwrap();
            run(opt.as_mut(), &obj, iterations, None, s, serde_json::Value::Null, false).unwrap()
        })
        .collect()
}

#[test]
fn harvesting_takes_strided_iterations_round_robin() {
    let recs = ga_records(3, 7);
    let h = harvest_regions(&recs, 8, 3).unwrap();
    let got: Vec<(usize, usize)> = h.iter().map(|r| (r.record, r.iteration)).collect();
    assert_eq!(got, vec![(0, 0), (1, 0), (2, 0), (0, 3), (1, 3), (2, 3), (0, 6), (1, 6)]);
    assert_eq!(h[4].point, recs[1].iterations[3].iteration_best_x);
    assert_eq!(harvest_regions(&recs, 100, 3).unwrap().len(), 9);
}

#[test]
fn manipulation_recordings_round_trip_through_csv() {
    let mut spec = TaskSpec::builtin("Mani212").unwrap().with_horizon(60);
    if let TaskSpec::Manipulation(s) = &mut spec {
        s.n_envs = 1;
    }
    let task = spec.build(0).unwrap();
    let x = task.space().from_box(&task.space().baseline_box());
    let rec = task.record(&x, 10).unwrap().expect("manipulation records trajectories");
    assert!(rec.ellipse_axes.is_some());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    write_trajectory_csv(&p, &rec.trajectory, &rec.network, rec.ellipse_axes, &["note".into()]).unwrap();
    let back = read_trajectory_csv(&p).unwrap();
    assert_eq!(back.frames.len(), rec.trajectory.frames.len());
    assert_eq!(back.springs.len(), rec.network.springs.len());
    assert_eq!(back.ellipse_axes, rec.ellipse_axes);
    for (a, b) in back.frames.iter().zip(&rec.trajectory.frames) {
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.ellipse.map(|e| e.0), b.ellipse.map(|e| e.0));
    }
}

#[test]
fn synthetic_tasks_do_not_record() {
    let task = AnalyticTask::sphere(3);
    let x = task.space().from_box(&[0.5; 3]);
    assert!(task.record(&x, 1).unwrap().is_none());
}

proptest! {
    #[test]
    fn spearman_is_invariant_to_monotone_maps(v in prop::collection::vec(-1e3f64..1e3, 3..40)) {
        let w: Vec<f64> = v.iter().map(|x| x.exp2().ln_1p() + x).collect();
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let distinct = {
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|p| p[0] < p[1])
        };
        prop_assume!(distinct);
        prop_assert!((spearman(&v, &w) - 1.0).abs() < 1e-12);
        prop_assert!((spearman(&v, &neg) + 1.0).abs() < 1e-12);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = codesign_lab::bench::ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert!(!cfg.algorithms.is_empty());
        n += 1;
    }
    assert!(n >= 3);
}
