//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use blinkswarm_core::config::{parse_script, Scenario};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{run_color_bench, write_runs_csv, write_summary_csv, BenchParams};
use crate::manifest::RunManifest;
use crate::observe_bench::{run_observe_bench, write_observe_csv, Scenario as ObserveScenario};
use crate::protocol::Session;
use crate::simrun::run_sim;
use crate::{server, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "blinkswarm",
    version,
    about = "Swarm chemistry simulator with blink-slot coloring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Round counts of the coloring protocol on random graphs.
    ColorBench(ColorBenchArgs),
    /// Run a scenario for a number of ticks and log every snapshot.
    Sim(SimArgs),
    /// Observer accuracy sweeps and recognition latency.
    ObserveBench(ObserveArgs),
    /// Serve live snapshots over TCP / WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ColorBenchArgs {
    #[arg(long, default_value_t = 100)]
    pub n_min: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_max: usize,
    #[arg(long, default_value_t = 100)]
    pub n_step: usize,
    /// Average vertex degree.
    #[arg(long, default_value_t = 3.0)]
    pub c: f64,
    #[arg(long, default_value_t = 5)]
    pub iterations: u32,
    #[arg(long, default_value_t = 0.0)]
    pub p_fail: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_rounds: u32,
    /// Run up to n = 10000 regardless of --n-max.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value = "out/color-bench")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SimArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub ticks: u64,
    /// Timed command script, one `<tick> <command> [args]` per line.
    #[arg(long)]
    pub script: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out/sim")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ObserveArgs {
    /// distance-sweep, count-sweep, angle-sweep or rounds-vs-n.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 21)]
    pub trials: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "out/observe")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    /// Scenario file; an empty default arena when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    /// Wall-clock tick interval; defaults to the scenario's tick_ms.
    #[arg(long)]
    pub tick_ms: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Parses `args` and runs the subcommand; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Cmd::ColorBench(a) => color_bench(a),
        Cmd::Sim(a) => sim(a),
        Cmd::ObserveBench(a) => observe(a),
        Cmd::Serve(a) => serve(a),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_manifest(m: &RunManifest, out: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    fs::write(out.join("manifest.json"), text)?;
    Ok(())
}

fn color_bench(a: ColorBenchArgs) -> Result<i32, CliError> {
    let params = BenchParams {
        n_min: a.n_min,
        n_max: if a.full { 10_000 } else { a.n_max },
        n_step: a.n_step,
        c: a.c,
        iterations: a.iterations,
        p_fail: a.p_fail,
        seed: a.seed,
        max_rounds: a.max_rounds,
    };
    params.validate()?;
    let result = run_color_bench(&params)?;
    fs::create_dir_all(&a.out)?;
    write_runs_csv(&result, fs::File::create(a.out.join("runs.csv"))?)?;
    write_summary_csv(&result, fs::File::create(a.out.join("summary.csv"))?)?;
    let seeds = (0..params.iterations)
        .map(|i| params.graph_seed(i))
        .collect();
    let mut m = RunManifest::new(
        "color-bench",
        serde_json::to_value(&params)?,
        &[],
        seeds,
        &a.out.display().to_string(),
    );
    m.outputs = vec!["runs.csv".into(), "summary.csv".into()];
    write_manifest(&m, &a.out)?;

    println!("run {}  n  mean_rounds  ln_n  3ln_n", m.run_id);
    for s in &result.summary {
        let ln = (s.n as f64).ln();
        println!(
            "{:>6} {:>10.3} {:>7.3} {:>7.3}",
            s.n,
            s.mean_rounds,
            ln,
            3.0 * ln
        );
    }
    if result.all_converged() {
        Ok(0)
    } else {
        let failed = result.runs.iter().filter(|r| r.rounds.is_none()).count();
        eprintln!(
            "{failed} run(s) did not converge within {} rounds",
            params.max_rounds
        );
        Ok(3)
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<(Scenario, Vec<u8>), CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let mut sc: Scenario = text
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        sc.arena.seed = s;
    }
    Ok((sc, bytes))
}

fn sim(a: SimArgs) -> Result<i32, CliError> {
    let (scenario, config_bytes) = load_scenario(&a.config, a.seed)?;
    let script_bytes = match &a.script {
        Some(p) => read(p)?,
        None => Vec::new(),
    };
    let script_text = String::from_utf8(script_bytes.clone())
        .map_err(|_| CliError::Config("script is not UTF-8".into()))?;
    let script = parse_script(&script_text).map_err(|e| CliError::Config(format!("script {e}")))?;
    let table = Arc::new(
        scenario
            .load_table()
            .map_err(|e| CliError::Config(e.to_string()))?,
    );
    let out = run_sim(&scenario, &script, a.ticks, table)?;

    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("droplets.csv"), &out.droplets_csv)?;
    fs::write(a.out.join("groups.csv"), &out.groups_csv)?;
    fs::write(a.out.join("snapshots.jsonl"), &out.snapshots_jsonl)?;
    let params = serde_json::json!({ "ticks": a.ticks, "seed": scenario.arena.seed });
    let mut m = RunManifest::new(
        "sim",
        params,
        &[&config_bytes, &script_bytes],
        vec![scenario.arena.seed],
        &a.out.display().to_string(),
    );
    m.config_path = Some(a.config.display().to_string());
    m.outputs = vec![
        "droplets.csv".into(),
        "groups.csv".into(),
        "snapshots.jsonl".into(),
    ];
    write_manifest(&m, &a.out)?;
    for (step, reason) in &out.rejected {
        eprintln!("warning: command at step {step} refused: {reason}");
    }
    if let Some(last) = &out.last {
        println!(
            "run {}  tick {}  droplets {}  molecules {}",
            m.run_id,
            last.tick,
            last.droplets.len(),
            last.groups.len()
        );
    }
    Ok(0)
}

fn observe(a: ObserveArgs) -> Result<i32, CliError> {
    let scenario: ObserveScenario = a.scenario.parse()?;
    let result = run_observe_bench(scenario, a.trials, a.seed)?;
    fs::create_dir_all(&a.out)?;
    let file = format!("{}.csv", a.scenario);
    write_observe_csv(&result, fs::File::create(a.out.join(&file))?)?;
    let mut m = RunManifest::new(
        "observe-bench",
        serde_json::to_value(&a)?,
        &[],
        vec![a.seed],
        &a.out.display().to_string(),
    );
    m.outputs = vec![file];
    write_manifest(&m, &a.out)?;
    println!("run {}  wrote {}", m.run_id, a.out.display());
    Ok(0)
}

fn serve(a: ServeArgs) -> Result<i32, CliError> {
    let (scenario, bytes) = match &a.config {
        Some(p) => load_scenario(p, a.seed)?,
        None => (Scenario::default(), Vec::new()),
    };
    let table = Arc::new(
        scenario
            .load_table()
            .map_err(|e| CliError::Config(e.to_string()))?,
    );
    let arena = scenario
        .build(table)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let run_id = crate::manifest::run_id(
        "serve",
        &serde_json::json!({ "seed": scenario.arena.seed }),
        &[&bytes],
    );
    let tick = Duration::from_millis(a.tick_ms.unwrap_or(scenario.arena.tick_ms).max(1));
    let handle = server::spawn(
        Session::new(arena, run_id.clone()),
        &format!("{}:{}", a.host, a.port),
        tick,
    )
    .map_err(|e| CliError::Other(format!("cannot bind {}:{}: {e}", a.host, a.port)))?;
    println!("run {run_id} listening on {}", handle.local_addr());
    handle.wait();
    Ok(0)
}
