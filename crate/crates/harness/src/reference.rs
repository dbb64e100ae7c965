//! Published accuracies with tolerance bands, and the comparison of result
//! rows against them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use krk_core::eval::average_from_overall;
use krk_core::label::NUM_CLASSES;
use krk_core::models::ModelKind;
use krk_core::netscript::{self, LayerKind, LayerSize};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::experiment::ResultRow;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("no row of reference table `{table}` matches {model} {params}")]
    MissingReferenceRow {
        table: String,
        model: ModelKind,
        params: String,
    },
    #[error("unknown reference table `{0}`")]
    UnknownTable(String),
    #[error("the grid has no cell with {nodes} nodes, rate {rate}, {iterations} iterations")]
    MissingGridCell { nodes: u64, rate: f64, iterations: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub id: String,
    pub model: ModelKind,
    /// Must all be present, with equal values, in a result row's params.
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    pub overall: f64,
    pub average: f64,
    /// Judged by the deep-network floor rather than a symmetric band.
    #[serde(default)]
    pub deep: bool,
    /// Reported for information; `"NaN"` where undefined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_precision: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub macro_recall: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTable {
    pub name: String,
    pub description: String,
    /// Rows are listed best first and the ordering itself is checked.
    #[serde(default)]
    pub ranked: bool,
    pub rows: Vec<ReferenceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub tables: Vec<ReferenceTable>,
}

impl ReferenceSet {
    /// The tables shipped with the tool.
    pub fn bundled() -> &'static ReferenceSet {
        static SET: OnceLock<ReferenceSet> = OnceLock::new();
        SET.get_or_init(|| {
            serde_json::from_str(include_str!("../reference/reference.json")).expect("bundled reference parses")
        })
    }

    pub fn table(&self, name: &str) -> Result<&ReferenceTable, CompareError> {
        self.tables
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| CompareError::UnknownTable(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|t| t.name.as_str())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// `|observed - expected| <= tolerance`.
    Within(f64),
    /// `observed >= floor`.
    AtLeast(f64),
}

impl Band {
    /// Distance to the band edge; negative when outside.
    pub fn margin(&self, expected: f64, observed: f64) -> f64 {
        match *self {
            Band::Within(t) => t - (observed - expected).abs(),
            Band::AtLeast(floor) => observed - floor,
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Band::Within(t) => write!(f, "+/-{t}"),
            Band::AtLeast(floor) => write!(f, ">={floor}"),
        }
    }
}

/// Overall-accuracy tolerance per model kind.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub logistic_regression: f64,
    pub decision_forest: f64,
    pub decision_jungle: f64,
    pub neural_network: f64,
    pub deep_network_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            logistic_regression: 0.05,
            decision_forest: 0.08,
            decision_jungle: 0.10,
            neural_network: 0.05,
            deep_network_floor: 0.80,
        }
    }
}

impl Tolerances {
    pub fn band(&self, row: &ReferenceRow) -> Band {
        if row.deep {
            return Band::AtLeast(self.deep_network_floor);
        }
        Band::Within(match row.model {
            ModelKind::LogisticRegression => self.logistic_regression,
            ModelKind::DecisionForest => self.decision_forest,
            ModelKind::DecisionJungle => self.decision_jungle,
            ModelKind::NeuralNetwork => self.neural_network,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub reference_id: String,
    pub label: String,
    pub model: ModelKind,
    pub expected: f64,
    pub observed: f64,
    pub band: Band,
    pub margin: f64,
    pub passed: bool,
    /// The published average accuracy.
    pub expected_average: f64,
    /// Average accuracy implied by the published overall accuracy.
    pub implied_average: f64,
    /// Whether the two agree to two decimals.
    pub average_consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub expected: Vec<String>,
    pub observed: Vec<String>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub table: String,
    pub entries: Vec<Comparison>,
    pub ranking: Option<Ranking>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed) && self.ranking.as_ref().is_none_or(|r| r.holds)
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "reference table {}", self.table)?;
        for e in &self.entries {
            writeln!(
                f,
                "  {} {:<34} expected {:.4} observed {:.4} band {} margin {:+.4}",
                if e.passed { "PASS" } else { "FAIL" },
                e.label,
                e.expected,
                e.observed,
                e.band,
                e.margin
            )?;
        }
        if let Some(r) = &self.ranking {
            writeln!(
                f,
                "  {} ranking {}",
                if r.holds { "PASS" } else { "FAIL" },
                r.observed.join(" > ")
            )?;
        }
        Ok(())
    }
}

/// Two decimals, allowing for either rounding or truncation of the
/// published figure.
const AVERAGE_AGREEMENT: f64 = 0.01;

/// Checks each row against the reference row it matches. A reference row
/// matches when it names the same model and all its params appear in the
/// result row; the most specific match wins.
pub fn compare_to_reference(
    rows: &[ResultRow],
    table: &ReferenceTable,
    tolerances: &Tolerances,
) -> Result<ComparisonReport, CompareError> {
    let mut entries = Vec::with_capacity(rows.len());
    for row in rows {
        let reference = table
            .rows
            .iter()
            .filter(|r| {
                r.model == row.model
                    && r.params
                        .iter()
                        .all(|(k, v)| row.params.get(k).is_some_and(|w| param_eq(k, v, w)))
            })
            .min_by_key(|r| std::cmp::Reverse(r.params.len()))
            .ok_or_else(|| CompareError::MissingReferenceRow {
                table: table.name.clone(),
                model: row.model,
                params: serde_json::to_string(&row.params).unwrap_or_default(),
            })?;
        let band = tolerances.band(reference);
        let margin = band.margin(reference.overall, row.overall_accuracy);
        let implied_average = average_from_overall(reference.overall, NUM_CLASSES);
        entries.push(Comparison {
            reference_id: reference.id.clone(),
            label: row.label.clone(),
            model: row.model,
            expected: reference.overall,
            observed: row.overall_accuracy,
            band,
            margin,
            passed: margin >= -1e-12,
            expected_average: reference.average,
            implied_average,
            average_consistent: (implied_average - reference.average).abs() < AVERAGE_AGREEMENT,
        });
    }
    let ranking = table.ranked.then(|| {
        let position = |id: &str| table.rows.iter().position(|r| r.id == id);
        let mut expected: Vec<&Comparison> = entries.iter().collect();
        expected.sort_by_key(|e| position(&e.reference_id));
        let mut observed = expected.clone();
        observed.sort_by(|a, b| b.observed.total_cmp(&a.observed));
        let ids = |v: &[&Comparison]| v.iter().map(|e| e.reference_id.clone()).collect::<Vec<_>>();
        let (expected, observed) = (ids(&expected), ids(&observed));
        Ranking {
            holds: expected == observed,
            expected,
            observed,
        }
    });
    Ok(ComparisonReport {
        table: table.name.clone(),
        entries,
        ranking,
    })
}

/// JSON equality with numbers compared as floats and topology scripts
/// compared by their hidden layer sizes.
fn param_eq(key: &str, a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::String(x), Value::String(y)) if key == "netscript" => match (hidden_sizes(x), hidden_sizes(y)) {
            (Some(p), Some(q)) => p == q,
            _ => x == y,
        },
        (Value::Number(x), Value::Number(y)) => x.as_f64() == y.as_f64(),
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| param_eq(key, p, q)),
        _ => a == b,
    }
}

fn hidden_sizes(script: &str) -> Option<Vec<LayerSize>> {
    let ast = netscript::parse(script).ok()?;
    Some(
        ast.layers
            .iter()
            .filter(|l| l.kind == LayerKind::Hidden)
            .map(|l| l.size)
            .collect(),
    )
}

/// The qualitative shape expected of the single-layer network grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTrend {
    /// (nodes, rate, iterations, overall) of the weakest cell.
    pub minimum: (u64, f64, u64, f64),
    pub minimum_at_expected_cell: bool,
    /// Best accuracy among the longest runs.
    pub best_long_run: f64,
    pub long_run_reaches_floor: bool,
    /// Decreases in accuracy as iterations grow at the smallest rate.
    pub violations: usize,
    pub monotone: bool,
}

impl GridTrend {
    pub fn holds(&self) -> bool {
        self.minimum_at_expected_cell && self.long_run_reaches_floor && self.monotone
    }
}

pub const GRID_NODES: [u64; 3] = [100, 1000, 10000];
pub const GRID_RATES: [f64; 3] = [0.1, 0.01, 0.001];
pub const GRID_ITERATIONS: [u64; 3] = [100, 1000, 10000];

/// Checks that the widest, slowest, shortest cell is the grid minimum, that
/// some longest run reaches `floor`, and that at the smallest rate accuracy
/// rises with iterations for every width with at most one exception.
pub fn grid_trend(rows: &[ResultRow], floor: f64) -> Result<GridTrend, CompareError> {
    let lookup = |nodes: u64, rate: f64, iterations: u64| {
        rows.iter()
            .find(|r| {
                r.params.get("hidden_layers") == Some(&Value::from(vec![nodes]))
                    && r.params.get("learning_rate").and_then(Value::as_f64) == Some(rate)
                    && r.params.get("iterations").and_then(Value::as_u64) == Some(iterations)
            })
            .map(|r| r.overall_accuracy)
            .ok_or(CompareError::MissingGridCell {
                nodes,
                rate,
                iterations,
            })
    };
    let mut cells = Vec::new();
    for &rate in &GRID_RATES {
        for &nodes in &GRID_NODES {
            for &iterations in &GRID_ITERATIONS {
                cells.push((nodes, rate, iterations, lookup(nodes, rate, iterations)?));
            }
        }
    }
    let minimum = *cells
        .iter()
        .min_by(|a, b| a.3.total_cmp(&b.3))
        .expect("grid is not empty");
    let best_long_run = cells
        .iter()
        .filter(|c| c.2 == GRID_ITERATIONS[2])
        .map(|c| c.3)
        .fold(f64::NEG_INFINITY, f64::max);
    let slowest = GRID_RATES[2];
    let mut violations = 0;
    for &nodes in &GRID_NODES {
        let series: Vec<f64> = GRID_ITERATIONS
            .iter()
            .map(|&it| lookup(nodes, slowest, it))
            .collect::<Result<_, _>>()?;
        violations += series.windows(2).filter(|w| w[1] < w[0]).count();
    }
    Ok(GridTrend {
        minimum,
        minimum_at_expected_cell: (minimum.0, minimum.1, minimum.2) == (GRID_NODES[2], slowest, GRID_ITERATIONS[0]),
        best_long_run,
        long_run_reaches_floor: best_long_run >= floor,
        violations,
        monotone: violations <= 1,
    })
}
