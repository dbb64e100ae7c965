//! Cartesian parameter sweeps with per-cell seeds and on-disk resumption.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use krk_core::data::{DataError, EncodingScheme, SplitSpec};
use krk_core::eval::MetricsReport;
use krk_core::models::Registry;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{read_json, ConfigError, ExperimentConfig, ModelSpec};
use crate::dataset::Dataset;
use crate::experiment::{describe_params, run_resolved, ResultRow, Stage};
use crate::report;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    Grid(#[from] ConfigError),
    #[error("loading the dataset: {0}")]
    Ingest(#[from] DataError),
    #[error("writing sweep reports: {0}")]
    Write(#[from] std::io::Error),
}

/// One dimension of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Single {
        param: String,
        values: Vec<Value>,
    },
    /// Parameters that move together; each entry of `values` sets all of
    /// them, in `params` order.
    Linked {
        params: Vec<String>,
        values: Vec<Vec<Value>>,
    },
}

impl Axis {
    pub fn single(param: &str, values: impl IntoIterator<Item = Value>) -> Axis {
        Axis::Single {
            param: param.to_string(),
            values: values.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Axis::Single { values, .. } => values.len(),
            Axis::Linked { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn names(&self) -> Vec<&str> {
        match self {
            Axis::Single { param, .. } => vec![param.as_str()],
            Axis::Linked { params, .. } => params.iter().map(String::as_str).collect(),
        }
    }

    fn assignment(&self, i: usize) -> Vec<(String, Value)> {
        match self {
            Axis::Single { param, values } => vec![(param.clone(), values[i].clone())],
            Axis::Linked { params, values } => params.iter().cloned().zip(values[i].iter().cloned()).collect(),
        }
    }
}

/// Axes over a base configuration. Parameter names address the model
/// configuration, except `model` (a model spec), `encoding` and `split`,
/// which replace the corresponding experiment fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: ExperimentConfig,
    pub axes: Vec<Axis>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub params: BTreeMap<String, Value>,
    pub config: ExperimentConfig,
}

impl SweepGrid {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        read_json(path)
    }

    /// Number of cells: the product of the axis lengths.
    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = BTreeSet::new();
        for axis in &self.axes {
            let names = axis.names();
            let bad = |message: String| ConfigError::Axis {
                param: names.join(","),
                message,
            };
            if axis.is_empty() {
                return Err(bad("no values".into()));
            }
            if let Axis::Linked { params, values } = axis {
                if let Some(v) = values.iter().find(|v| v.len() != params.len()) {
                    return Err(bad(format!("entry {v:?} does not have {} values", params.len())));
                }
            }
            for name in axis.names() {
                if !seen.insert(name.to_string()) {
                    return Err(bad(format!("`{name}` appears on more than one axis")));
                }
            }
        }
        Ok(())
    }

    /// Every cell in grid order: the first axis varies slowest.
    pub fn cells(&self) -> Result<Vec<Cell>, ConfigError> {
        self.validate()?;
        let base_seed = self.base.model.config.get("seed").and_then(Value::as_u64).unwrap_or(1);
        let seeded = self.axes.iter().any(|a| a.names().contains(&"seed"));
        let mut cells = Vec::with_capacity(self.len());
        for index in 0..self.len() {
            let mut rest = index;
            let mut picks = vec![0; self.axes.len()];
            for (a, axis) in self.axes.iter().enumerate().rev() {
                picks[a] = rest % axis.len();
                rest /= axis.len();
            }
            let assignments: Vec<(String, Value)> = self
                .axes
                .iter()
                .zip(&picks)
                .flat_map(|(axis, &i)| axis.assignment(i))
                .collect();
            let mut config = self.base.clone();
            for (name, value) in assignments.iter().filter(|(n, _)| n == "model") {
                config.model = serde_json::from_value::<ModelSpec>(value.clone()).map_err(|e| ConfigError::Axis {
                    param: name.clone(),
                    message: e.to_string(),
                })?;
            }
            for (name, value) in assignments.iter().filter(|(n, _)| n != "model") {
                apply(&mut config, name, value)?;
            }
            if !seeded {
                config.model.set("seed", derive_seed(base_seed, index).into());
            }
            let mut params: BTreeMap<String, Value> = assignments.into_iter().collect();
            if let Some(model) = params.get_mut("model") {
                *model = Value::String(config.model.kind.clone());
                if let Value::Object(fields) = &config.model.config {
                    for (k, v) in fields {
                        if k != "seed" {
                            params.entry(k.clone()).or_insert_with(|| v.clone());
                        }
                    }
                }
            }
            cells.push(Cell { index, params, config });
        }
        Ok(cells)
    }
}

fn apply(config: &mut ExperimentConfig, name: &str, value: &Value) -> Result<(), ConfigError> {
    let bad = |e: serde_json::Error| ConfigError::Axis {
        param: name.to_string(),
        message: e.to_string(),
    };
    match name {
        "encoding" => config.encoding = Some(serde_json::from_value::<EncodingScheme>(value.clone()).map_err(bad)?),
        "split" => config.split = serde_json::from_value::<SplitSpec>(value.clone()).map_err(bad)?,
        _ => config.model.set(name, value.clone()),
    }
    Ok(())
}

/// Seed of cell `index`: the base seed advanced by the cell's position, so
/// cell 0 reproduces a plain run and no seed depends on execution order.
pub fn derive_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Completed {
        row: ResultRow,
        metrics: MetricsReport,
        /// Loaded from an earlier run's output instead of retrained.
        resumed: bool,
    },
    Failed {
        stage: Stage,
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub label: String,
    pub params: BTreeMap<String, Value>,
    #[serde(flatten)]
    pub status: CellStatus,
}

impl CellResult {
    pub fn row(&self) -> Option<&ResultRow> {
        match &self.status {
            CellStatus::Completed { row, .. } => Some(row),
            CellStatus::Failed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
}

impl SweepReport {
    /// Completed rows in grid order.
    pub fn rows(&self) -> Vec<ResultRow> {
        self.cells.iter().filter_map(|c| c.row().cloned()).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.row().is_none())
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    /// Cell outputs go to `<dir>/cells/NNN`, the aggregate to `<dir>/sweep.*`.
    pub output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            output_dir: None,
            jobs: 1,
        }
    }
}

/// What a finished cell leaves behind so a rerun can skip it.
#[derive(Serialize, Deserialize)]
struct CellRecord {
    config: ExperimentConfig,
    row: ResultRow,
    metrics: MetricsReport,
}

const CELL_RECORD: &str = "cell.json";

pub fn run_sweep(grid: &SweepGrid, options: &SweepOptions) -> Result<SweepReport, SweepError> {
    let registry = Registry::standard();
    run_sweep_with(grid, options, &registry)
}

pub fn run_sweep_with(
    grid: &SweepGrid,
    options: &SweepOptions,
    registry: &Registry,
) -> Result<SweepReport, SweepError> {
    let mut cells = grid.cells()?;
    if let Some(dir) = &options.output_dir {
        for cell in &mut cells {
            cell.config.output_dir = Some(cell_dir(dir, cell.index));
        }
    }
    let dataset = Dataset::load(&grid.base.dataset)?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new(vec![None; cells.len()]);
    std::thread::scope(|scope| {
        for _ in 0..options.jobs.max(1).min(cells.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cell) = cells.get(i) else { break };
                let result = run_cell(cell, &dataset, registry);
                results.lock().expect("no worker panicked")[i] = Some(result);
            });
        }
    });
    let report = SweepReport {
        cells: results
            .into_inner()
            .expect("no worker panicked")
            .into_iter()
            .map(|r| r.expect("every cell ran"))
            .collect(),
    };
    if let Some(dir) = &options.output_dir {
        fs::write(
            dir.join("sweep.json"),
            serde_json::to_string_pretty(&report).expect("report serializes"),
        )?;
        report::write_cells_csv(&dir.join("sweep.csv"), &report.cells)?;
    }
    Ok(report)
}

fn cell_dir(root: &Path, index: usize) -> PathBuf {
    root.join("cells").join(format!("{index:03}"))
}

fn run_cell(cell: &Cell, dataset: &Dataset, registry: &Registry) -> CellResult {
    let label = describe_params(&cell.params);
    let finish = |status| CellResult {
        index: cell.index,
        label: label.clone(),
        params: cell.params.clone(),
        status,
    };
    if let Some(record) = cell
        .config
        .output_dir
        .as_deref()
        .and_then(|d| previous_record(d, &cell.config))
    {
        return finish(CellStatus::Completed {
            row: record.row,
            metrics: record.metrics,
            resumed: true,
        });
    }
    let resolved = match cell.config.resolve(registry) {
        Ok(r) => r,
        Err(e) => {
            return finish(CellStatus::Failed {
                stage: Stage::Config,
                error: e.to_string(),
            })
        }
    };
    match run_resolved(dataset, &resolved, registry, cell.params.clone()) {
        Ok(outcome) => {
            if let Some(dir) = &cell.config.output_dir {
                let record = CellRecord {
                    config: cell.config.clone(),
                    row: outcome.row.clone(),
                    metrics: outcome.metrics,
                };
                let text = serde_json::to_string_pretty(&record).expect("record serializes");
                if let Err(e) = fs::write(dir.join(CELL_RECORD), text) {
                    return finish(CellStatus::Failed {
                        stage: Stage::Write,
                        error: e.to_string(),
                    });
                }
            }
            finish(CellStatus::Completed {
                row: outcome.row,
                metrics: outcome.metrics,
                resumed: false,
            })
        }
        Err(e) => finish(CellStatus::Failed {
            stage: e.stage,
            error: e.source.to_string(),
        }),
    }
}

/// A finished record for exactly this configuration, if one exists.
fn previous_record(dir: &Path, config: &ExperimentConfig) -> Option<CellRecord> {
    let text = fs::read_to_string(dir.join(CELL_RECORD)).ok()?;
    let record: CellRecord = serde_json::from_str(&text).ok()?;
    (record.config == *config).then_some(record)
}
