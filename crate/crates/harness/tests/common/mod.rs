#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use krk_core::data::{write_dataset, Record};
use krk_core::oracle::{export_dataset, solve};
use krk_harness::{DatasetSource, ExperimentConfig, ModelSpec};
use serde_json::json;

pub fn all_records() -> &'static [Record] {
    static RECORDS: OnceLock<Vec<Record>> = OnceLock::new();
    RECORDS.get_or_init(|| export_dataset(&solve()))
}

/// Every `stride`-th record, written to `dir/small.data`.
pub fn small_dataset(dir: &Path, stride: usize) -> PathBuf {
    let records: Vec<Record> = all_records().iter().step_by(stride).cloned().collect();
    let path = dir.join("small.data");
    write_dataset(std::fs::File::create(&path).unwrap(), &records).unwrap();
    path
}

pub fn quick_nn(dataset: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        ModelSpec::new("neural-network")
            .with("hidden_layers", json!([12]))
            .with("iterations", json!(3)),
    );
    cfg.dataset = DatasetSource::File(dataset.to_path_buf());
    cfg
}

pub fn quick_lr(dataset: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ModelSpec::new("logistic-regression").with("iterations", json!(20)));
    cfg.dataset = DatasetSource::File(dataset.to_path_buf());
    cfg
}
