//! Built-in grids, one per bundled reference table.

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ModelSpec};
use crate::reference::{ReferenceSet, GRID_ITERATIONS, GRID_NODES, GRID_RATES};
use crate::sweep::{Axis, SweepGrid};

pub const PRESETS: [&str; 4] = ["nn-grid", "nn-topologies", "final", "per-model"];

/// The grid that reproduces the reference table of the same name.
pub fn preset(name: &str, fast: bool) -> Option<SweepGrid> {
    let nn = || ExperimentConfig::new(ModelSpec::new("neural-network"));
    let mut grid = match name {
        "nn-grid" => SweepGrid {
            base: nn(),
            axes: vec![
                Axis::single("learning_rate", GRID_RATES.map(Value::from)),
                Axis::single("hidden_layers", GRID_NODES.map(|n| json!([n]))),
                Axis::single("iterations", GRID_ITERATIONS.map(Value::from)),
            ],
        },
        "nn-topologies" => {
            let table = ReferenceSet::bundled().table(name).ok()?;
            let params = ["netscript", "learning_rate", "iterations"];
            SweepGrid {
                base: nn(),
                axes: vec![Axis::Linked {
                    params: params.map(String::from).to_vec(),
                    values: table
                        .rows
                        .iter()
                        .map(|r| params.iter().map(|p| r.params[*p].clone()).collect())
                        .collect(),
                }],
            }
        }
        "final" => models_grid([
            json!({"kind": "neural-network", "config": {"hidden_layers": [1000, 1000, 1000]}}),
            json!("decision-forest"),
            json!("decision-jungle"),
            json!("logistic-regression"),
        ]),
        "per-model" => models_grid([
            json!("logistic-regression"),
            json!("decision-jungle"),
            json!("decision-forest"),
            json!({"kind": "neural-network", "config": {"hidden_layers": [100], "learning_rate": 0.1, "iterations": 100}}),
        ]),
        _ => return None,
    };
    grid.base.fast = fast;
    Some(grid)
}

fn models_grid(models: [Value; 4]) -> SweepGrid {
    SweepGrid {
        base: ExperimentConfig::new(ModelSpec::new("logistic-regression")),
        axes: vec![Axis::single("model", models)],
    }
}
