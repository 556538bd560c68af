use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use arhgof::experiment::{self, Draw, ExperimentConfig, Scenario};
use arhgof::gof::{self, GofOptions};
use arhgof::sde::{self, PathRecord};
use arhgof::spectest::{self, SpecTestOptions, SpecTestResult};
use arhgof::ticks::{self, TickSeries};
use arhgof::{Error, Execution, FunctionalSample, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "arhgof", version, about = "Goodness-of-fit tests for functional autoregressions")]
struct Cli {
    /// Run every data-parallel loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset from a named scenario.
    Simulate(SimulateArgs),
    /// Test H0: ARH(z) on a curve sample.
    Gof(GofArgs),
    /// Test z = 0, 1, ... until the first non-rejection.
    OrderScan(OrderScanArgs),
    /// Two-stage Ornstein-Uhlenbeck specification test.
    SpecTest(SpecTestArgs),
    /// Monte Carlo rejection rates for a scenario.
    Experiment(ExperimentArgs),
    /// Turn a tick CSV into daily curves.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InputFormat {
    Auto,
    Curves,
    Path,
    Ticks,
}

#[derive(Args)]
struct InputArgs {
    /// Curve CSV, path CSV or tick CSV.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    format: InputFormat,
    /// Curve length when splitting a path.
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// Ticks per complete day when reading tick data.
    #[arg(long, default_value_t = 288)]
    day_length: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 150)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = arhgof::arh::DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Output directory; the data goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GofArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 1)]
    z: usize,
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    #[arg(long, default_value_t = 0.995)]
    ev: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OrderScanArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 3)]
    zmax: usize,
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.995)]
    ev: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpecTestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long = "B", default_value_t = 500)]
    b: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.995)]
    ev: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// key = value file; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long = "B")]
    b: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    ev: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated null orders for ARH scenarios.
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 288)]
    day_length: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let started = Instant::now();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Gof(a) => run_gof(a, exec),
        Command::OrderScan(a) => order_scan(a, exec),
        Command::SpecTest(a) => spec_test(a, exec),
        Command::Experiment(a) => run_experiment(a, exec),
        Command::Ingest(a) => ingest(a),
    };
    eprintln!("wall time: {:.3} s", started.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

/// Writes `manifest.json` next to a command's outputs.
fn write_manifest(dir: &Path, command: &str, config: serde_json::Value) -> Result<()> {
    let manifest = json!({
        "command": command,
        "config": config,
        "versions": {
            "arhgof": env!("CARGO_PKG_VERSION"),
            "format": 1,
        },
    });
    write_json(&dir.join("manifest.json"), &manifest)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn detect_format(text: &str) -> InputFormat {
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line.starts_with("# atom=") {
            return InputFormat::Curves;
        }
        if line.starts_with("# delta=") || line.starts_with("# model=") || line == "time,value" {
            return InputFormat::Path;
        }
        if line.starts_with('#') {
            continue;
        }
        let first = line.split(',').next().unwrap_or("");
        return if first.parse::<f64>().is_ok() && line.split(',').count() > 2 {
            InputFormat::Curves
        } else {
            InputFormat::Ticks
        };
    }
    InputFormat::Curves
}

enum Loaded {
    Curves(FunctionalSample),
    Path(PathRecord),
}

fn load_input(args: &InputArgs) -> Result<Loaded> {
    let text = fs::read_to_string(&args.input)?;
    let format = match args.format {
        InputFormat::Auto => detect_format(&text),
        f => f,
    };
    match format {
        InputFormat::Curves => Ok(Loaded::Curves(FunctionalSample::read_csv(text.as_bytes())?)),
        InputFormat::Path => Ok(Loaded::Path(PathRecord::read_csv(text.as_bytes())?)),
        InputFormat::Ticks => {
            let report = ticks::ingest_ticks(&TickSeries::read_csv(text.as_bytes())?, args.day_length)?;
            report_drops(&report);
            Ok(Loaded::Curves(report.curves))
        }
        InputFormat::Auto => unreachable!(),
    }
}

/// Curves from any input; paths are split into windows of length `h`.
fn load_curves(args: &InputArgs) -> Result<FunctionalSample> {
    match load_input(args)? {
        Loaded::Curves(c) => Ok(c),
        Loaded::Path(p) => {
            let m = experiment::grid_points(args.h, p.delta)?;
            sde::split_path(&p.centered().0, args.h, m)
        }
    }
}

fn report_drops(report: &ticks::IngestReport) {
    for d in &report.dropped {
        eprintln!("dropped {}: {} point(s)", d.date, d.points);
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario = Scenario::parse(&a.scenario)?;
    let cfg = ExperimentConfig {
        scenario: a.scenario.clone(),
        n: a.n,
        h: a.h,
        delta: a.delta,
        burn_in: a.burn_in,
        ..ExperimentConfig::default()
    };
    experiment::grid_points(a.h, a.delta)?;
    let mut buf = Vec::new();
    match experiment::simulate_scenario(&scenario, &cfg, 0, a.seed)? {
        Draw::Curves(c) => c.write_csv(&mut buf)?,
        Draw::Path(p) => p.write_csv(&mut buf)?,
    }
    match &a.out {
        Some(dir) => {
            create_dir(dir)?;
            fs::write(dir.join("data.csv"), &buf)?;
            write_manifest(
                dir,
                "simulate",
                json!({
                    "scenario": scenario,
                    "n": a.n,
                    "seed": a.seed,
                    "h": a.h,
                    "delta": a.delta,
                    "burn_in": a.burn_in,
                }),
            )?;
        }
        None => io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn run_gof(a: GofArgs, exec: Execution) -> Result<()> {
    let curves = load_curves(&a.input)?;
    let opts = GofOptions {
        b: a.b,
        ev_threshold: a.ev,
        execution: exec,
        ..GofOptions::default()
    };
    let res = gof::arh_gof_test_with(&curves, a.z, &opts, a.seed)?;
    if let Some(w) = &res.warning {
        eprintln!("warning: {w}");
    }
    println!("H0: ARH({})  n = {}  B = {}", a.z, curves.n(), a.b);
    println!("statistic  {}", res.statistic);
    println!("p-value    {}", res.p_value);
    println!("p = {}, q = {}, selected = {:?}", res.p, res.q, res.p_tilde_set);
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_json(&dir.join("gof.json"), &res)?;
        write_manifest(
            dir,
            "gof",
            json!({"input": a.input.input, "z": a.z, "B": a.b, "ev": a.ev, "seed": a.seed, "h": a.input.h}),
        )?;
    }
    Ok(())
}

fn order_scan(a: OrderScanArgs, exec: Execution) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage(format!("alpha must be in (0, 1), got {}", a.alpha)));
    }
    let curves = load_curves(&a.input)?;
    let opts = GofOptions {
        b: a.b,
        ev_threshold: a.ev,
        execution: exec,
        ..GofOptions::default()
    };
    let scan = gof::arh_order_scan(&curves, a.zmax, &opts, a.alpha, a.seed)?;
    println!("z  statistic  p-value");
    for t in &scan.tests {
        println!("{}  {}  {}", t.z, t.statistic, t.p_value);
    }
    match scan.order {
        Some(z) => println!("selected order: {z}"),
        None => println!("every order up to {} rejected at alpha = {}", a.zmax, a.alpha),
    }
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_json(&dir.join("order_scan.json"), &scan)?;
        write_manifest(
            dir,
            "order-scan",
            json!({"input": a.input.input, "zmax": a.zmax, "B": a.b, "alpha": a.alpha, "ev": a.ev, "seed": a.seed}),
        )?;
    }
    Ok(())
}

/// Stage rows and decision in the layout of a p-value table.
fn spec_test_table(res: &SpecTestResult) -> Result<String> {
    let p2 = res.p2.map(|p| format!("{p:.3}")).unwrap_or_else(|| "—".to_string());
    Ok(format!(
        "Stage    p-value\nStage 1  {:.3}\nStage 2  {}\nDecision: {} (alpha = {})\nkappa_hat = {}  sigma_hat = {}\n",
        res.p1,
        p2,
        serde_json::to_value(res.decision)?.as_str().unwrap_or_default(),
        res.alpha,
        res.kappa_hat,
        res.sigma_hat
    ))
}

fn spec_test(a: SpecTestArgs, exec: Execution) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::Usage(format!("alpha must be in (0, 1), got {}", a.alpha)));
    }
    let opts = SpecTestOptions {
        b: a.b,
        alpha: a.alpha,
        ev_threshold: a.ev,
        execution: exec,
    };
    let res = match load_input(&a.input)? {
        Loaded::Path(p) => spectest::two_stage_test_with(&p, a.input.h, &opts, a.seed)?,
        Loaded::Curves(c) => spectest::two_stage_test_curves(&c, &opts, a.seed)?,
    };
    let table = spec_test_table(&res)?;
    print!("{table}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_json(&dir.join("spec_test.json"), &res)?;
        fs::write(dir.join("spec_test.txt"), table)?;
        write_manifest(
            dir,
            "spec-test",
            json!({"input": a.input.input, "B": a.b, "alpha": a.alpha, "ev": a.ev, "seed": a.seed, "h": a.input.h}),
        )?;
    }
    Ok(())
}

fn run_experiment(a: ExperimentArgs, exec: Execution) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_kv(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("scenario", a.scenario.clone()),
        ("n", a.n.map(|v| v.to_string())),
        ("M", a.m.map(|v| v.to_string())),
        ("B", a.b.map(|v| v.to_string())),
        ("alpha", a.alpha.map(|v| v.to_string())),
        ("ev", a.ev.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("z", a.z.clone()),
        ("h", a.h.map(|v| v.to_string())),
        ("delta", a.delta.map(|v| v.to_string())),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    let report = experiment::run_experiment(&cfg, exec)?;
    print!("{}", report.results_csv());
    if let Some(dir) = &cfg.out {
        let dir = Path::new(dir);
        report.write(dir)?;
        write_manifest(dir, "experiment", serde_json::to_value(&cfg)?)?;
    }
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let file = fs::File::open(&a.input)?;
    let report = ticks::ingest_ticks(&TickSeries::read_csv(BufReader::new(file))?, a.day_length)?;
    report_drops(&report);
    println!(
        "{} complete day(s), {} dropped, mean {}",
        report.days.len(),
        report.dropped.len(),
        report.mean
    );
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let mut buf = Vec::new();
        report.curves.write_csv(&mut buf)?;
        fs::write(dir.join("curves.csv"), buf)?;
        write_json(
            &dir.join("ingest.json"),
            &json!({"days": report.days, "dropped": report.dropped, "mean": report.mean}),
        )?;
        write_manifest(dir, "ingest", json!({"input": a.input, "day_length": a.day_length}))?;
    }
    Ok(())
}
