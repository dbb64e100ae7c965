use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use krk_core::chess::{Position, Side, Square};
use krk_core::data::{load_dataset, statistics, statistics_csv, write_dataset, EncodingScheme};
use krk_core::oracle::{classify, export_dataset, solve, verify_against_dataset};
use krk_harness::experiment::{evaluate_on, RunReport};
use krk_harness::presets::{preset, PRESETS};
use krk_harness::report::{comparison_csv, rows_csv};
use krk_harness::{
    compare_to_reference, run_experiment, run_sweep, ComparisonReport, Dataset, DatasetSource, ExperimentConfig,
    ModelSpec, ReferenceSet, ResultRow, SweepGrid, SweepOptions, SweepReport, Tolerances,
};
use krk_service::{load_model, load_model_dir, AppState};
use serde_json::Value;

type AnyError = Box<dyn std::error::Error + Send + Sync>;

/// KRK endgame lab: dataset generation, model training and evaluation.
#[derive(Parser)]
#[command(name = "krk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the endgame and write the dataset file.
    Generate {
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a dataset file against the solved endgame.
    Verify {
        file: PathBuf,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the label of one black-to-move position.
    Probe { wk: String, wr: String, bk: String },
    /// Per-class counts and percentages.
    Stats {
        #[arg(long, default_value = "oracle:generate")]
        dataset: DatasetSource,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Train one model and evaluate it on the held-out split.
    Train(TrainArgs),
    /// Evaluate a saved model on a split of a dataset.
    Evaluate {
        model: PathBuf,
        #[arg(long)]
        dataset: Option<DatasetSource>,
        /// Defaults to the split recorded in the model's manifest.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run every cell of a parameter grid.
    Sweep {
        #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
        grid: Option<PathBuf>,
        /// One of nn-grid, nn-topologies, final, per-model.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Compare the finished rows with this reference table.
        #[arg(long)]
        compare: Option<String>,
    },
    /// Compare results with a reference table.
    Compare {
        /// sweep.json, report.json or a JSON array of result rows.
        results: PathBuf,
        #[arg(long)]
        table: String,
        /// Reference set file; the bundled one when omitted.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Tolerances file; the default bands when omitted.
        #[arg(long)]
        tolerances: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Serve the JSON API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of saved models.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value = "oracle:generate")]
        dataset: DatasetSource,
        /// Static web client served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Experiment configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    model: Option<String>,
    /// Model parameter as KEY=VALUE, VALUE in JSON or a bare string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Topology script file (neural-network only).
    #[arg(long)]
    netscript: Option<PathBuf>,
    /// Inline topology script.
    #[arg(long, conflicts_with = "netscript")]
    netscript_inline: Option<String>,
    #[arg(long)]
    dataset: Option<DatasetSource>,
    #[arg(long, value_enum)]
    encoding: Option<Encoding>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    fast: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Copy, Clone, ValueEnum)]
enum Encoding {
    Ordinal,
    OneHot,
    Mixed,
}

impl From<Encoding> for EncodingScheme {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Ordinal => EncodingScheme::ORDINAL_MINMAX,
            Encoding::OneHot => EncodingScheme::ONE_HOT,
            Encoding::Mixed => EncodingScheme::MIXED_MINMAX,
        }
    }
}

/// Exit status for a command that ran to completion.
enum Verdict {
    Pass,
    ToleranceFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::ToleranceFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<Verdict, AnyError> {
    match command {
        Command::Generate { out } => generate(out.as_deref()),
        Command::Verify { file, json } => verify(&file, json.as_deref()),
        Command::Probe { wk, wr, bk } => probe(&wk, &wr, &bk),
        Command::Stats { dataset, format } => stats(&dataset, format),
        Command::Train(args) => train(args),
        Command::Evaluate {
            model,
            dataset,
            train_fraction,
            split_seed,
            format,
        } => evaluate(&model, dataset, train_fraction, split_seed, format),
        Command::Sweep {
            grid,
            preset,
            out,
            fast,
            jobs,
            compare,
        } => sweep(grid, preset, out, fast, jobs, compare),
        Command::Compare {
            results,
            table,
            reference,
            tolerances,
            format,
        } => compare(&results, &table, reference.as_deref(), tolerances.as_deref(), format),
        Command::Serve {
            addr,
            models,
            dataset,
            ui,
        } => serve(addr, models.as_deref(), &dataset, ui.as_deref()),
    }
}

fn generate(out: Option<&Path>) -> Result<Verdict, AnyError> {
    let started = Instant::now();
    let records = export_dataset(&solve());
    match out {
        Some(path) => write_dataset(io::BufWriter::new(fs::File::create(path)?), &records)?,
        None => write_dataset(io::stdout().lock(), &records)?,
    }
    eprintln!("{} records in {:.2}s", records.len(), started.elapsed().as_secs_f64());
    Ok(Verdict::Pass)
}

fn verify(file: &Path, json: Option<&Path>) -> Result<Verdict, AnyError> {
    let records = load_dataset(io::BufReader::new(fs::File::open(file)?))?;
    let report = verify_against_dataset(&solve(), &records)?;
    println!(
        "compared {} agreed {} agreement {:.4}%",
        report.compared,
        report.agreed,
        report.agreement() * 100.0
    );
    for d in report.disagreements.iter().take(20) {
        println!(
            "  line {}: {} but the oracle says {}",
            d.index + 1,
            d.record.to_line(),
            d.oracle_label
        );
    }
    if report.disagreements.len() > 20 {
        println!("  ... {} more", report.disagreements.len() - 20);
    }
    for (label, delta) in krk_core::label::class_names().iter().zip(report.histogram_deltas()) {
        if delta != 0 {
            println!("  {label}: oracle {delta:+}");
        }
    }
    if let Some(path) = json {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(if report.success() {
        Verdict::Pass
    } else {
        Verdict::ToleranceFailure
    })
}

fn probe(wk: &str, wr: &str, bk: &str) -> Result<Verdict, AnyError> {
    let sq = |name: &str, s: &str| s.parse::<Square>().map_err(|e| format!("{name}: {e}"));
    let position = Position::new(sq("wk", wk)?, sq("wr", wr)?, sq("bk", bk)?, Side::Black)?;
    println!("{}", classify(&solve(), &position)?);
    Ok(Verdict::Pass)
}

fn stats(source: &DatasetSource, format: Format) -> Result<Verdict, AnyError> {
    let dataset = Dataset::load(source)?;
    let stats = statistics(&dataset.records);
    match format {
        Format::Csv => print!("{}", statistics_csv(&stats)),
        Format::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
        Format::Text => {
            for s in &stats {
                println!("{:<9} {:>6} {:>6.2}%", s.label.to_string(), s.count, s.percent);
            }
            println!("{:<9} {:>6}", "total", dataset.records.len());
        }
    }
    Ok(Verdict::Pass)
}

fn parse_assignment(text: &str) -> Result<(String, Value), AnyError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| format!("`{text}` is not KEY=VALUE"))?;
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.trim().to_string(), value))
}

fn train(args: TrainArgs) -> Result<Verdict, AnyError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::new(ModelSpec::new(args.model.as_deref().unwrap_or_default())),
    };
    if let Some(kind) = &args.model {
        if args.config.is_some() && *kind != cfg.model.kind {
            cfg.model = ModelSpec::new(kind);
        }
    }
    for a in &args.set {
        let (key, value) = parse_assignment(a)?;
        cfg.model.set(&key, value);
    }
    if let Some(path) = args.netscript {
        cfg.model.netscript = Some(path);
    }
    if let Some(text) = args.netscript_inline {
        cfg.model.set("netscript", Value::String(text));
    }
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if let Some(e) = args.encoding {
        cfg.encoding = Some(e.into());
    }
    if let Some(f) = args.train_fraction {
        cfg.split.train_fraction = f;
    }
    if let Some(s) = args.split_seed {
        cfg.split.seed = s;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out;
    }
    cfg.fast |= args.fast;

    let outcome = run_experiment(&cfg)?;
    println!("{} trained in {:.2}s", outcome.row.model, outcome.row.train_seconds);
    print!("{}", outcome.metrics);
    if let Some(dir) = &cfg.output_dir {
        eprintln!("wrote {}", dir.display());
    }
    Ok(Verdict::Pass)
}

fn evaluate(
    path: &Path,
    dataset: Option<DatasetSource>,
    train_fraction: Option<f64>,
    split_seed: Option<u64>,
    format: Format,
) -> Result<Verdict, AnyError> {
    let (model, manifest) = load_model(path)?;
    let mut split = manifest.as_ref().map(|m| m.split).unwrap_or_default();
    if let Some(f) = train_fraction {
        split.train_fraction = f;
    }
    if let Some(s) = split_seed {
        split.seed = s;
    }
    let source = match (dataset, &manifest) {
        (Some(d), _) => d,
        (None, Some(m)) => m.dataset.clone().into(),
        (None, None) => DatasetSource::Oracle,
    };
    let dataset = Dataset::load(&source)?;
    let (metrics, cm) = evaluate_on(&model, &dataset, &split)?;
    let row = ResultRow {
        label: path.display().to_string(),
        model: model.kind(),
        params: Default::default(),
        overall_accuracy: metrics.overall_accuracy,
        average_accuracy: metrics.average_accuracy,
        train_seconds: manifest.as_ref().map_or(0.0, |m| m.train_seconds),
        seed: manifest
            .as_ref()
            .and_then(|m| m.config.get("seed"))
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    match format {
        Format::Text => print!("{}", metrics),
        Format::Csv => rows_csv(io::stdout().lock(), &[row])?,
        Format::Json => {
            let report = RunReport {
                row,
                metrics,
                class_order: model.class_order.clone(),
                confusion: cm.rows(),
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(Verdict::Pass)
}

fn sweep(
    grid: Option<PathBuf>,
    preset_name: Option<String>,
    out: Option<PathBuf>,
    fast: bool,
    jobs: usize,
    compare_table: Option<String>,
) -> Result<Verdict, AnyError> {
    let mut grid = match (grid, preset_name) {
        (Some(path), _) => SweepGrid::from_file(&path)?,
        (None, Some(name)) => preset(&name, fast)
            .ok_or_else(|| format!("unknown preset `{name}`; expected one of {}", PRESETS.join(", ")))?,
        (None, None) => return Err("either --grid or --preset is required".into()),
    };
    grid.base.fast |= fast;
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
    }
    let options = SweepOptions { output_dir: out, jobs };
    let report = run_sweep(&grid, &options)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    for cell in &report.cells {
        match cell.row() {
            Some(row) => writeln!(
                w,
                "{:>3} {:<48} overall {:.4} average {:.4} {:>8.2}s",
                cell.index, cell.label, row.overall_accuracy, row.average_accuracy, row.train_seconds
            )?,
            None => writeln!(w, "{:>3} {:<48} FAILED {:?}", cell.index, cell.label, cell.status)?,
        }
    }
    let mut verdict = Verdict::Pass;
    if let Some(table) = compare_table {
        let comparison = compare_to_reference(
            &report.rows(),
            ReferenceSet::bundled().table(&table)?,
            &Tolerances::default(),
        )?;
        write!(w, "{comparison}")?;
        if let Some(dir) = &options.output_dir {
            write_comparison(dir, &comparison)?;
        }
        if !comparison.passed() {
            verdict = Verdict::ToleranceFailure;
        }
    }
    let failed = report.failures().count();
    if failed > 0 {
        return Err(format!("{failed} of {} cells failed", report.cells.len()).into());
    }
    Ok(verdict)
}

fn write_comparison(dir: &Path, report: &ComparisonReport) -> Result<(), AnyError> {
    fs::write(dir.join("comparison.json"), serde_json::to_string_pretty(report)?)?;
    comparison_csv(fs::File::create(dir.join("comparison.csv"))?, report)?;
    Ok(())
}

/// Rows from a sweep report, a single run report or a bare row list.
fn read_rows(path: &Path) -> Result<Vec<ResultRow>, AnyError> {
    let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    if value.get("cells").is_some() {
        return Ok(serde_json::from_value::<SweepReport>(value)?.rows());
    }
    if value.get("row").is_some() {
        return Ok(vec![serde_json::from_value::<RunReport>(value)?.row]);
    }
    Ok(serde_json::from_value(value)?)
}

fn compare(
    results: &Path,
    table: &str,
    reference: Option<&Path>,
    tolerances: Option<&Path>,
    format: Format,
) -> Result<Verdict, AnyError> {
    let rows = read_rows(results)?;
    let custom: Option<ReferenceSet> = match reference {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(p)?)?),
        None => None,
    };
    let set = custom.as_ref().unwrap_or_else(|| ReferenceSet::bundled());
    let tolerances: Tolerances = match tolerances {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => Tolerances::default(),
    };
    let report = compare_to_reference(&rows, set.table(table)?, &tolerances)?;
    match format {
        Format::Text => print!("{report}"),
        Format::Csv => comparison_csv(io::stdout().lock(), &report)?,
        Format::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(if report.passed() {
        Verdict::Pass
    } else {
        Verdict::ToleranceFailure
    })
}

fn serve(
    addr: SocketAddr,
    models: Option<&Path>,
    source: &DatasetSource,
    ui: Option<&Path>,
) -> Result<Verdict, AnyError> {
    let tablebase = solve();
    let records = match source {
        DatasetSource::Oracle => export_dataset(&tablebase),
        DatasetSource::File(_) => Dataset::load(source)?.records,
    };
    let entries = match models {
        Some(dir) => load_model_dir(dir)?,
        None => Vec::new(),
    };
    eprintln!(
        "serving {} records and {} models on http://{addr}",
        records.len(),
        entries.len()
    );
    let state = AppState::new(tablebase, records, entries);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(krk_service::serve(state, addr, ui))?;
    Ok(Verdict::Pass)
}
