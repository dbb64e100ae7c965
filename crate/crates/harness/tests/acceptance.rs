//! Acceptance run: one PASS, FAIL or SKIP line per criterion, non-zero exit
//! on any FAIL.
//!
//! Two criteria take hours and only run when asked for:
//! `KRK_ACCEPTANCE_DEEP=1` trains the full three-layer 1000-node network and
//! `KRK_ACCEPTANCE_GRID=1` runs the 27-cell single-layer grid (its cells are
//! kept in `KRK_ACCEPTANCE_GRID_OUT`, default a temp dir, so it resumes).
//! `KRKOPT_DATA` names a copy of the published data file to verify against.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use krk_core::chess::{legal_black_moves, Position, Side, Square};
use krk_core::data::{load_dataset, statistics, write_dataset, Record};
use krk_core::eval::{metrics, ConfusionMatrix, MetricsReport};
use krk_core::label::GameValue;
use krk_core::models::{
    DecisionJungleConfig, Jungle, LogisticModel, MlpConfig, ModelKind, Network, OutputLoss, Registry, TrainingSet,
};
use krk_core::netscript::{self, Activation};
use krk_core::oracle::{classify, export_dataset, solve, verify_against_dataset, Tablebase};
use krk_harness::dataset::Dataset;
use krk_harness::presets::preset;
use krk_harness::{
    compare_to_reference, grid_trend, run_resolved, run_sweep, ExperimentConfig, ExperimentOutcome, ModelSpec,
    ReferenceSet, ResultRow, SweepOptions, Tolerances,
};
use krk_service::{load_model, router, save_model, AppState, ModelEntry};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

const UCI_HISTOGRAM: [(&str, usize); 18] = [
    ("draw", 2796),
    ("zero", 27),
    ("one", 78),
    ("two", 246),
    ("three", 81),
    ("four", 198),
    ("five", 471),
    ("six", 592),
    ("seven", 683),
    ("eight", 1433),
    ("nine", 1712),
    ("ten", 1985),
    ("eleven", 2854),
    ("twelve", 3597),
    ("thirteen", 4194),
    ("fourteen", 4553),
    ("fifteen", 2166),
    ("sixteen", 390),
];

const FIRST_LINES: [&str; 3] = ["a,1,b,3,c,2,draw", "a,1,c,1,c,2,draw", "a,1,c,1,d,1,draw"];

const DESK_BUDGET: Duration = Duration::from_secs(15 * 60);

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let started = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Verdict::Fail(msg)
    });
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail, ok) = match verdict {
        Verdict::Pass(d) => ("PASS", d, true),
        Verdict::Fail(d) => ("FAIL", d, false),
        Verdict::Skip(d) => ("SKIP", d, true),
    };
    println!("{tag} {name:<22} {detail} [{secs:.1}s]");
    ok
}

fn judged(check: Check) -> Verdict {
    match check {
        Ok(d) => Verdict::Pass(d),
        Err(d) => Verdict::Fail(d),
    }
}

fn opted_in(var: &str) -> bool {
    std::env::var(var).is_ok_and(|v| !v.is_empty() && v != "0")
}

struct Solved {
    tablebase: Tablebase,
    records: Vec<Record>,
    seconds: f64,
}

fn solved() -> &'static Solved {
    static S: OnceLock<Solved> = OnceLock::new();
    S.get_or_init(|| {
        let started = Instant::now();
        let tablebase = solve();
        let records = export_dataset(&tablebase);
        Solved {
            tablebase,
            records,
            seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn dataset() -> &'static Dataset {
    static D: OnceLock<Dataset> = OnceLock::new();
    D.get_or_init(|| Dataset::from_tablebase(&solved().tablebase))
}

fn oracle_equivalence() -> Check {
    let s = solved();
    ensure(s.records.len() == 28056, || format!("{} records", s.records.len()))?;
    ensure(s.seconds < 60.0, || format!("solve and export took {:.1}s", s.seconds))?;

    let stats = statistics(&s.records);
    for (name, count) in UCI_HISTOGRAM {
        let got = stats.iter().find(|c| c.label.name() == name).map_or(0, |c| c.count);
        ensure(got == count, || format!("{name}: {got} records, published {count}"))?;
    }
    let head: Vec<String> = s.records.iter().take(3).map(Record::to_line).collect();
    ensure(head == FIRST_LINES, || format!("file begins {head:?}"))?;

    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &s.records).map_err(|e| e.to_string())?;
    let reread = load_dataset(bytes.as_slice()).map_err(|e| e.to_string())?;
    let report = verify_against_dataset(&s.tablebase, &reread).map_err(|e| e.to_string())?;
    ensure(report.success(), || {
        format!("{} disagreements on re-read", report.disagreements.len())
    })?;

    let published = match std::env::var_os("KRKOPT_DATA") {
        Some(path) => {
            let file = std::fs::File::open(&path).map_err(|e| format!("{}: {e}", PathBuf::from(&path).display()))?;
            let recs = load_dataset(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
            let report = verify_against_dataset(&s.tablebase, &recs).map_err(|e| e.to_string())?;
            ensure(report.success() && report.compared == 28056, || {
                format!(
                    "published file: {} of {} agree",
                    report.compared - report.disagreements.len(),
                    report.compared
                )
            })?;
            "published file 28056/28056 agree".to_string()
        }
        None => "published file not supplied (KRKOPT_DATA), class histogram matches it".to_string(),
    };
    Ok(format!("28056 records in {:.2}s; {published}", s.seconds))
}

fn class_statistics() -> Check {
    let s = solved();
    let stats = statistics(&s.records);
    let draw = stats.iter().find(|c| c.label.name() == "draw").ok_or("no draw row")?;
    ensure(draw.count == 2796 && (draw.percent - 9.97).abs() <= 0.005, || {
        format!("draw {} at {:.4}%", draw.count, draw.percent)
    })?;
    let depths: Vec<u8> = s
        .tablebase
        .entries(Side::Black)
        .filter_map(|(_, v)| match v {
            GameValue::Win(d) => Some(d),
            GameValue::Draw => None,
        })
        .collect();
    let (lo, hi) = (depths.iter().min().copied(), depths.iter().max().copied());
    ensure(lo == Some(0) && hi == Some(16), || format!("depths {lo:?}..{hi:?}"))?;
    Ok(format!("draw 2796 ({:.2}%), depths 0..16", draw.percent))
}

fn worked_examples() -> Check {
    let tb = &solved().tablebase;
    let label = |wk, wr, bk| -> Result<String, String> {
        let p = Position::black_to_move(wk, wr, bk).map_err(|e| e.to_string())?;
        Ok(classify(tb, &p).map_err(|e| e.to_string())?.name().to_string())
    };
    for (wk, wr, bk, want) in [
        ("a1", "b3", "c2", "draw"),
        ("c1", "c3", "a2", "one"),
        ("c1", "a3", "a1", "zero"),
    ] {
        let got = label(wk, wr, bk)?;
        ensure(got == want, || format!("{wk} {wr} {bk}: {got}, expected {want}"))?;
    }
    let p = Position::black_to_move("c1", "c3", "a2").map_err(|e| e.to_string())?;
    let moves = legal_black_moves(&p);
    let a1 = Square::new(1, 1).map_err(|e| e.to_string())?;
    ensure(moves.destinations == [a1] && !moves.captures_rook, || {
        format!("black moves from a2: {:?}", moves.destinations)
    })?;
    Ok("a1/b3/c2 draw, c1/c3/a2 one with Ka1 forced, c1/a3/a1 zero".into())
}

/// A confusion matrix over 18 classes with the given total and trace.
fn synthetic_confusion(rng: &mut StdRng, total: u64, correct: u64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::new(18);
    for _ in 0..correct {
        let k = rng.gen_range(0..18);
        cm.add(k, k, 1);
    }
    for _ in correct..total {
        let t = rng.gen_range(0..18);
        let p = (t + rng.gen_range(1..18)) % 18;
        cm.add(t, p, 1);
    }
    cm
}

fn identities_hold(m: &MetricsReport) -> bool {
    let implied = 1.0 - 2.0 * (1.0 - m.overall_accuracy) / 18.0;
    (m.micro_precision - m.overall_accuracy).abs() < 1e-12
        && (m.micro_recall - m.overall_accuracy).abs() < 1e-12
        && (m.average_accuracy - implied).abs() < 1e-12
}

fn metric_identities() -> Check {
    let mut rng = StdRng::seed_from_u64(7);
    for round in 0..200 {
        let total = rng.gen_range(1..20000);
        let correct = rng.gen_range(0..=total);
        let m = metrics(&synthetic_confusion(&mut rng, total, correct)).map_err(|e| e.to_string())?;
        ensure(identities_hold(&m), || format!("random matrix {round}: {m:?}"))?;
    }
    let pairs = [
        (0.321255, 0.924584),
        (0.496376, 0.944042),
        (0.622668, 0.958074),
        (0.793038, 0.977004),
    ];
    for (overall, average) in pairs {
        let correct = (overall * 8417.0_f64).round() as u64;
        let m = metrics(&synthetic_confusion(&mut rng, 8417, correct)).map_err(|e| e.to_string())?;
        let rounded = |x: f64| (x * 1e6).round() / 1e6;
        ensure(
            rounded(m.overall_accuracy) == overall && rounded(m.average_accuracy) == average,
            || {
                format!(
                    "{correct}/8417 gives {:.6} / {:.6}",
                    m.overall_accuracy, m.average_accuracy
                )
            },
        )?;
    }
    let trained = reproduction();
    for (name, outcome) in trained.all() {
        ensure(identities_hold(&outcome.metrics), || {
            format!("{name}: {:?}", outcome.metrics)
        })?;
    }
    Ok(format!(
        "200 random matrices, 4 published pairs, {} trained models",
        trained.all().len()
    ))
}

struct Reproduction {
    lr: ExperimentOutcome,
    jungle: ExperimentOutcome,
    forest: ExperimentOutcome,
    mlp: ExperimentOutcome,
    deep: ExperimentOutcome,
    seconds: f64,
}

impl Reproduction {
    fn all(&self) -> Vec<(&'static str, &ExperimentOutcome)> {
        vec![
            ("logistic-regression", &self.lr),
            ("decision-jungle", &self.jungle),
            ("decision-forest", &self.forest),
            ("mlp-100", &self.mlp),
            ("deep", &self.deep),
        ]
    }
}

fn train(spec: ModelSpec, fast: bool) -> ExperimentOutcome {
    let registry = Registry::standard();
    let mut cfg = ExperimentConfig::new(spec);
    cfg.fast = fast;
    let resolved = cfg.resolve(&registry).expect("valid configuration");
    run_resolved(dataset(), &resolved, &registry, BTreeMap::new()).expect("training succeeds")
}

fn deep_spec() -> ModelSpec {
    ModelSpec::new("neural-network").with("hidden_layers", json!([1000, 1000, 1000]))
}

/// Default configurations on the default split, in desk-scale mode.
fn reproduction() -> &'static Reproduction {
    static R: OnceLock<Reproduction> = OnceLock::new();
    R.get_or_init(|| {
        dataset();
        let started = Instant::now();
        let lr = train(ModelSpec::new("logistic-regression"), true);
        let jungle = train(ModelSpec::new("decision-jungle"), true);
        let forest = train(ModelSpec::new("decision-forest"), true);
        let mlp = train(
            ModelSpec::new("neural-network")
                .with("hidden_layers", json!([100]))
                .with("learning_rate", json!(0.1))
                .with("iterations", json!(100)),
            true,
        );
        let deep = train(deep_spec(), true);
        Reproduction {
            lr,
            jungle,
            forest,
            mlp,
            deep,
            seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn model_reproduction() -> Check {
    let r = reproduction();
    let set = ReferenceSet::bundled();
    let tol = Tolerances::default();
    let per_model: Vec<ResultRow> = [&r.lr, &r.jungle, &r.forest, &r.mlp].map(|o| o.row.clone()).to_vec();
    let mut mlp_row = r.mlp.row.clone();
    mlp_row.params =
        serde_json::from_value(json!({"hidden_layers": [100], "learning_rate": 0.1, "iterations": 100})).unwrap();
    let per_model = [
        per_model[0].clone(),
        per_model[1].clone(),
        per_model[2].clone(),
        mlp_row,
    ];
    let bands = compare_to_reference(&per_model, set.table("per-model").map_err(|e| e.to_string())?, &tol)
        .map_err(|e| e.to_string())?;
    let ranked = [
        r.deep.row.clone(),
        r.forest.row.clone(),
        r.jungle.row.clone(),
        r.lr.row.clone(),
    ];
    let ranking = compare_to_reference(&ranked, set.table("final").map_err(|e| e.to_string())?, &tol)
        .map_err(|e| e.to_string())?;

    let summary = bands
        .entries
        .iter()
        .map(|e| format!("{} {:.4} ({:+.3})", e.reference_id, e.observed, e.margin))
        .chain([format!("deep(3x200) {:.4}", r.deep.row.overall_accuracy)])
        .collect::<Vec<_>>()
        .join(", ");
    let order = ranking
        .ranking
        .as_ref()
        .map(|k| k.observed.join(" > "))
        .unwrap_or_default();
    ensure(bands.passed(), || format!("outside band: {summary}"))?;
    ensure(ranking.ranking.as_ref().is_some_and(|k| k.holds), || {
        format!("ranking {order}")
    })?;
    ensure(r.seconds < DESK_BUDGET.as_secs_f64(), || {
        format!("took {:.0}s", r.seconds)
    })?;
    Ok(format!("{summary}; ranking {order}; trained in {:.0}s", r.seconds))
}

fn deep_reproduction() -> Verdict {
    if !opted_in("KRK_ACCEPTANCE_DEEP") {
        return Verdict::Skip("3x1000 network takes hours; set KRK_ACCEPTANCE_DEEP=1".into());
    }
    let outcome = train(
        deep_spec()
            .with("learning_rate", json!(0.1))
            .with("iterations", json!(100)),
        false,
    );
    let overall = outcome.row.overall_accuracy;
    let check = ensure(overall >= 0.80, || format!("overall {overall:.4} < 0.80"))
        .map(|_| format!("overall {overall:.4} in {:.0}s", outcome.row.train_seconds));
    judged(check)
}

fn grid_trend_check() -> Verdict {
    if !opted_in("KRK_ACCEPTANCE_GRID") {
        return Verdict::Skip("27-cell grid up to 10000 nodes x 10000 iterations; set KRK_ACCEPTANCE_GRID=1".into());
    }
    let out = std::env::var_os("KRK_ACCEPTANCE_GRID_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("krk-acceptance-grid"));
    let grid = preset("nn-grid", false).expect("preset exists");
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let check = (|| {
        let report = run_sweep(
            &grid,
            &SweepOptions {
                output_dir: Some(out),
                jobs,
            },
        )
        .map_err(|e| e.to_string())?;
        ensure(report.failures().count() == 0, || {
            format!("{} cells failed", report.failures().count())
        })?;
        let trend = grid_trend(&report.rows(), 0.68).map_err(|e| e.to_string())?;
        let (n, rate, it, acc) = trend.minimum;
        let detail = format!(
            "minimum {acc:.4} at ({n}, {rate}, {it}), best long run {:.4}, {} violations",
            trend.best_long_run, trend.violations
        );
        ensure(trend.holds(), || detail.clone())?;
        Ok(detail)
    })();
    judged(check)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-3)
}

fn gradient_checks() -> Check {
    let mut rng = StdRng::seed_from_u64(3);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for instance in 0..5 {
        let (rows, cols, classes) = (rng.gen_range(5..30), rng.gen_range(2..7), rng.gen_range(2..6));
        let x: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
        let set = TrainingSet::new(&x, &y, cols, classes);
        let mut m = LogisticModel::zeros(cols, classes);
        m.weights
            .iter_mut()
            .chain(m.biases.iter_mut())
            .for_each(|w| *w = rng.gen_range(-1.0..1.0));
        let l2 = rng.gen_range(0.0..0.1);
        let (_, gw, gb) = m.loss_and_gradient(&set, l2);
        let n_weights = m.weights.len();
        for i in 0..n_weights + m.biases.len() {
            let nudge = |d: f64| {
                let mut p = m.clone();
                if i < n_weights {
                    p.weights[i] += d;
                } else {
                    p.biases[i - n_weights] += d;
                }
                p.loss_and_gradient(&set, l2).0
            };
            let fd = (nudge(h) - nudge(-h)) / (2.0 * h);
            let analytic = if i < n_weights { gw[i] } else { gb[i - n_weights] };
            let e = rel_err(fd, analytic);
            worst = worst.max(e);
            ensure(e < 1e-5, || {
                format!("logistic instance {instance} parameter {i}: {fd} vs {analytic}")
            })?;
        }
    }
    for (instance, (act, out)) in [
        (Activation::Sigmoid, OutputLoss::Sigmoid),
        (Activation::Sigmoid, OutputLoss::Softmax),
        (Activation::Tanh, OutputLoss::Sigmoid),
    ]
    .into_iter()
    .enumerate()
    {
        let cfg = MlpConfig {
            hidden_layers: vec![rng.gen_range(2..7), rng.gen_range(2..5)],
            hidden_activation: act,
            output_loss: out,
            ..Default::default()
        };
        let topology = cfg.topology(5, 4).map_err(|e| e.to_string())?;
        let mut net = Network::init(&topology, 2.0, &mut rng);
        net.biases
            .iter_mut()
            .flatten()
            .for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target = rng.gen_range(0..4);
        let (_, g) = net.gradients(&x, target);
        for l in 0..net.n_layers() {
            for (i, analytic) in g.weights[l].iter().chain(&g.biases[l]).enumerate() {
                let n_w = net.weights[l].len();
                let nudge = |d: f64| {
                    let mut p = net.clone();
                    if i < n_w {
                        p.weights[l][i] += d;
                    } else {
                        p.biases[l][i - n_w] += d;
                    }
                    p.loss(&x, target)
                };
                let fd = (nudge(h) - nudge(-h)) / (2.0 * h);
                let e = rel_err(fd, *analytic);
                worst = worst.max(e);
                ensure(e < 1e-5, || {
                    format!("network {instance} layer {l} parameter {i}: {fd} vs {analytic}")
                })?;
            }
        }
    }

    let x: Vec<f64> = (0..800 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<usize> = (0..800).map(|_| rng.gen_range(0..5)).collect();
    let cfg = DecisionJungleConfig {
        n_dags: 3,
        max_width: 8,
        max_depth: 12,
        optimization_passes: 4,
        n_random_splits_per_node: 8,
        ..Default::default()
    };
    let (_, trace) = Jungle::fit_with_trace(&TrainingSet::new(&x, &y, 4, 5), &cfg).map_err(|e| e.to_string())?;
    ensure(!trace.is_empty(), || "no levels traced".into())?;
    for level in &trace {
        ensure(level.objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9), || {
            format!("dag {} depth {}: {:?}", level.member, level.depth, level.objectives)
        })?;
    }
    Ok(format!(
        "worst relative error {worst:.1e}; jungle objective monotone over {} levels",
        trace.len()
    ))
}

fn netscript_parser() -> Check {
    let table = ReferenceSet::bundled()
        .table("nn-topologies")
        .map_err(|e| e.to_string())?;
    let expected = [200, 400, 600, 800, 3000, 9000, 600, 3000, 600, 600];
    ensure(table.rows.len() == expected.len(), || {
        format!("{} scripts", table.rows.len())
    })?;
    for (row, want) in table.rows.iter().zip(expected) {
        let text = row.params["netscript"].as_str().ok_or("script is not a string")?;
        let ast = netscript::parse(text).map_err(|e| format!("script {}: {e}", row.id))?;
        let total = netscript::total_hidden_nodes(&ast);
        ensure(total == want, || {
            format!("script {}: {total} hidden nodes, expected {want}", row.id)
        })?;
        netscript::elaborate(&ast, 27, 18).map_err(|e| format!("script {}: {e}", row.id))?;
    }
    let malformed = [
        ("input Data auto;\nhidden H [200 from Data all;", 2),
        (
            "input Data auto;\nhidden H [200] from Data all;\noutput Out [18] sigmoid from Nowhere all;",
            3,
        ),
        (
            "input Data auto;\nhidden H [200] from Data all;\n\n  output Out [18] softsign from H all;",
            4,
        ),
    ];
    for (text, line) in malformed {
        let err = netscript::parse(text)
            .and_then(|ast| netscript::elaborate(&ast, 27, 18).map(|_| ast))
            .err()
            .ok_or_else(|| format!("accepted {text:?}"))?;
        let span = err.span().ok_or_else(|| format!("no position in `{err}`"))?;
        ensure(span.line == line && span.column >= 1, || {
            format!("`{err}` reported at {span}, expected line {line}")
        })?;
    }
    Ok(format!("totals {expected:?}; 3 malformed scripts located"))
}

fn serialization_and_api() -> Check {
    let r = reproduction();
    let s = solved();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(11);
    let mut entries = Vec::new();
    for (name, outcome) in r.all() {
        let path = dir.path().join(format!("{name}.model.json"));
        save_model(&path, &outcome.model, Some(outcome.manifest.clone())).map_err(|e| e.to_string())?;
        let (loaded, _) = load_model(&path).map_err(|e| e.to_string())?;
        for i in 0..100 {
            let rec = &s.records[rng.gen_range(0..s.records.len())];
            let p = Position::new(rec.wk, rec.wr, rec.bk, Side::Black).map_err(|e| e.to_string())?;
            let x = outcome.model.encoder.encode_position(&p);
            let (a, b) = (
                outcome.model.predict(&x).map_err(|e| e.to_string())?,
                loaded.predict(&x).map_err(|e| e.to_string())?,
            );
            let same = a.label == b.label
                && a.scores.len() == b.scores.len()
                && a.scores.iter().zip(&b.scores).all(|(u, v)| u.to_bits() == v.to_bits());
            ensure(same, || format!("{name}: input {i} differs after reload"))?;
        }
        entries.push(ModelEntry {
            id: name.into(),
            model: loaded,
            manifest: None,
        });
    }

    let state = AppState::new(s.tablebase.clone(), s.records.clone(), entries);
    let app = router(state, None);
    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .map_err(|e| e.to_string())?;
    let call = |req: Request<Body>| -> Result<(StatusCode, Value), String> {
        runtime.block_on(async {
            let res = app.clone().oneshot(req).await.map_err(|e| e.to_string())?;
            let status = res.status();
            let bytes = res.into_body().collect().await.map_err(|e| e.to_string())?.to_bytes();
            Ok((status, serde_json::from_slice(&bytes).unwrap_or(Value::Null)))
        })
    };
    let predict = Request::post("/api/predict")
        .header("content-type", "application/json")
        .body(Body::from(
            json!({"wk": "c1", "wr": "c3", "bk": "a2", "model_id": "decision-forest"}).to_string(),
        ))
        .map_err(|e| e.to_string())?;
    let (status, body) = call(predict)?;
    ensure(status == StatusCode::OK && body["oracle_class"] == "one", || {
        format!("{status} {body}")
    })?;
    let forest_says = body["predicted_class"].as_str().unwrap_or("?").to_string();
    let stats = Request::get("/api/dataset/stats")
        .body(Body::empty())
        .map_err(|e| e.to_string())?;
    let (status, body) = call(stats)?;
    let draw = &body["classes"][0];
    ensure(
        status == StatusCode::OK && draw["label"] == "draw" && draw["count"] == 2796 && draw["percent"] == 9.97,
        || format!("{status} {draw}"),
    )?;
    Ok(format!(
        "5 models x 100 inputs bit-identical; predict oracle one (forest says {forest_says}); stats draw 2796 / 9.97"
    ))
}

fn main() {
    let kinds: Vec<&str> = ModelKind::ALL.iter().map(|k| k.name()).collect();
    println!("acceptance: models {}", kinds.join(", "));
    let results = [
        run("oracle-equivalence", || judged(oracle_equivalence())),
        run("class-statistics", || judged(class_statistics())),
        run("worked-examples", || judged(worked_examples())),
        run("metric-identities", || judged(metric_identities())),
        run("model-reproduction", || judged(model_reproduction())),
        run("deep-network", deep_reproduction),
        run("grid-trend", grid_trend_check),
        run("gradient-checks", || judged(gradient_checks())),
        run("netscript-parser", || judged(netscript_parser())),
        run("serialization-api", || judged(serialization_and_api())),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} of {} criteria passed or skipped",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
