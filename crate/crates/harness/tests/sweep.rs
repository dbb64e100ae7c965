mod common;

use std::fs;

use krk_harness::sweep::derive_seed;
use krk_harness::{run_experiment, run_sweep, Axis, CellStatus, SweepGrid, SweepOptions, SweepReport};
use serde_json::json;

fn grid(base: krk_harness::ExperimentConfig) -> SweepGrid {
    SweepGrid {
        base,
        axes: vec![
            Axis::single("learning_rate", [json!(0.1), json!(0.5)]),
            Axis::Linked {
                params: vec!["hidden_layers".into(), "momentum".into()],
                values: vec![vec![json!([8]), json!(0.0)], vec![json!([8, 4]), json!(0.5)]],
            },
        ],
    }
}

fn without_timing(report: &SweepReport) -> Vec<serde_json::Value> {
    report
        .rows()
        .into_iter()
        .map(|mut r| {
            r.train_seconds = 0.0;
            serde_json::to_value(r).unwrap()
        })
        .collect()
}

#[test]
fn a_single_cell_grid_matches_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::small_dataset(dir.path(), 8);
    let base = common::quick_nn(&data);
    let single = SweepGrid {
        base: base.clone(),
        axes: vec![Axis::single("learning_rate", [json!(0.1)])],
    };
    let report = run_sweep(&single, &SweepOptions::default()).unwrap();
    let plain = run_experiment(&base).unwrap();
    let CellStatus::Completed { row, metrics, .. } = &report.cells[0].status else {
        panic!("cell failed: {:?}", report.cells[0]);
    };
    assert_eq!(*metrics, plain.metrics);
    assert_eq!(row.seed, plain.row.seed);
    assert_eq!(row.label, "learning_rate=0.1");
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::small_dataset(dir.path(), 8);
    let g = grid(common::quick_nn(&data));
    let one = run_sweep(
        &g,
        &SweepOptions {
            output_dir: None,
            jobs: 1,
        },
    )
    .unwrap();
    let three = run_sweep(
        &g,
        &SweepOptions {
            output_dir: None,
            jobs: 3,
        },
    )
    .unwrap();
    assert_eq!(one.cells.len(), 4);
    assert_eq!(one.failures().count(), 0);
    assert_eq!(without_timing(&one), without_timing(&three));
    let seeds: Vec<u64> = one.rows().iter().map(|r| r.seed).collect();
    assert_eq!(seeds, (0..4).map(|i| derive_seed(1, i)).collect::<Vec<_>>());
}

#[test]
fn an_explicit_seed_axis_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::small_dataset(dir.path(), 8);
    let g = SweepGrid {
        base: common::quick_lr(&data),
        axes: vec![Axis::single("seed", [json!(7), json!(7)])],
    };
    let report = run_sweep(&g, &SweepOptions::default()).unwrap();
    let rows = report.rows();
    assert_eq!(rows[0].seed, 7);
    assert_eq!(rows[0].overall_accuracy, rows[1].overall_accuracy);
}

#[test]
fn a_failing_cell_is_recorded_and_the_rest_still_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::small_dataset(dir.path(), 8);
    let g = SweepGrid {
        base: common::quick_lr(&data),
        axes: vec![Axis::single("learning_rate", [json!(0.5), json!(-1.0), json!(1.0)])],
    };
    let out = dir.path().join("sweep");
    let report = run_sweep(
        &g,
        &SweepOptions {
            output_dir: Some(out.clone()),
            jobs: 2,
        },
    )
    .unwrap();
    let failed: Vec<_> = report.failures().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].index, 1);
    assert!(matches!(&failed[0].status, CellStatus::Failed { stage, .. } if stage.to_string() == "train"));
    assert_eq!(report.rows().len(), 2);

    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(2).unwrap().starts_with("1,failed,"));
    let saved: SweepReport = serde_json::from_str(&fs::read_to_string(out.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn a_rerun_resumes_finished_cells_and_redoes_changed_ones() {
    let dir = tempfile::tempdir().unwrap();
    let data = common::small_dataset(dir.path(), 8);
    let out = dir.path().join("sweep");
    let options = SweepOptions {
        output_dir: Some(out.clone()),
        jobs: 1,
    };
    let g = grid(common::quick_nn(&data));
    let first = run_sweep(&g, &options).unwrap();
    for i in 0..4 {
        let cell = out.join(format!("cells/{i:03}"));
        for f in [
            "cell.json",
            "manifest.json",
            "model.json",
            "report.json",
            "report.csv",
            "report.txt",
        ] {
            assert!(cell.join(f).is_file(), "{i} {f}");
        }
    }

    let again = run_sweep(&g, &options).unwrap();
    assert!(again
        .cells
        .iter()
        .all(|c| matches!(c.status, CellStatus::Completed { resumed: true, .. })));
    assert_eq!(again.rows(), first.rows());

    let mut changed = g.clone();
    changed.base.model = changed.base.model.with("iterations", json!(2));
    let third = run_sweep(&changed, &options).unwrap();
    assert!(third
        .cells
        .iter()
        .all(|c| matches!(c.status, CellStatus::Completed { resumed: false, .. })));
}

#[test]
fn grids_round_trip_through_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    fs::write(
        &path,
        r#"{"base": {"model": "neural-network", "fast": true},
            "axes": [{"param": "model", "values": ["logistic-regression", {"kind": "neural-network", "config": {"hidden_layers": [50]}}]},
                     {"param": "iterations", "values": [10, 20]}]}"#,
    )
    .unwrap();
    let g = SweepGrid::from_file(&path).unwrap();
    assert_eq!(g.len(), 4);
    let cells = g.cells().unwrap();
    assert_eq!(cells[0].config.model.kind, "logistic-regression");
    assert_eq!(cells[3].config.model.kind, "neural-network");
    assert_eq!(cells[3].config.model.config["hidden_layers"], json!([50]));
    assert_eq!(cells[3].config.model.config["iterations"], json!(20));
    assert!(cells.iter().all(|c| c.config.fast));
}
