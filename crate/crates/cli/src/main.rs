//! `qrefrig`: classify qubit channels, design refrigerators and run the
//! noise experiments from JSON configs.
//!
//! Exit codes: 0 success, 2 input error, 3 non-CP channel, 4 infeasible
//! refrigerator, 5 assertion failure.

mod output;
mod report;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use qrefrig_core::channel::{io::parse_channel, ChannelError};
use qrefrig_core::experiments::{
    run_bounds, run_depolarizing_decay, run_epr_storage, run_refrigerator_protocol, run_stockpile,
    BoundsConfig, DecayConfig, EprConfig, ExperimentError, ProtocolParams, RunOutput, StockpileConfig,
};
use qrefrig_core::{ClassifyError, FridgeError, SimError};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NOT_CP: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;
pub const EXIT_ASSERTION: u8 = 5;

#[derive(Parser)]
#[command(name = "qrefrig", version, about = "Qubit channel classification, refrigerator design and noise experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a single-qubit channel given as {"kraus": ...} or {"ptm": ...}.
    Classify {
        channel: PathBuf,
    },
    /// Design a refrigerator for bias `q` and report its ideal (and noisy) output.
    Fridge {
        #[arg(long)]
        q: f64,
        /// 1-norm target for the reset qubit; picks the smallest block that meets it.
        #[arg(long, conflicts_with = "r")]
        eps2: Option<f64>,
        /// Block size, overriding `--eps2`.
        #[arg(long)]
        r: Option<usize>,
        /// Channel file applied after every circuit stage.
        #[arg(long)]
        noise: Option<PathBuf>,
    },
    /// Run an experiment and write its outputs to `--out`.
    Experiment {
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Constant choice for the entropy bounds.
        #[arg(long)]
        mode: Option<ModeArg>,
        /// Simulation mode of the refrigerator protocol.
        #[arg(long)]
        sim: Option<SimArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Paper,
    Safe,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimArg {
    Exact,
    Factorized,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

fn channel_code(e: &ChannelError) -> u8 {
    match e {
        ChannelError::NotCompletelyPositive(_) => EXIT_NOT_CP,
        _ => EXIT_INPUT,
    }
}

fn fridge_code(e: &FridgeError) -> u8 {
    match e {
        FridgeError::BoundViolated { .. } => EXIT_ASSERTION,
        FridgeError::Sim(s) => sim_code(s),
        FridgeError::Channel(c) => channel_code(c),
        FridgeError::Arity { .. } => EXIT_INPUT,
        _ => EXIT_INFEASIBLE,
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::InvariantViolated(_) => EXIT_ASSERTION,
        _ => EXIT_INPUT,
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Channel(c) | ExperimentError::Classify(ClassifyError::Channel(c)) => channel_code(c),
            ExperimentError::Fridge(f) => fridge_code(f),
            ExperimentError::Sim(s) => sim_code(s),
            _ => EXIT_INPUT,
        };
        Self::new(code, e.to_string())
    }
}

impl From<FridgeError> for Failure {
    fn from(e: FridgeError) -> Self {
        Self::new(fridge_code(&e), e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_channel(path: &Path) -> Result<qrefrig_core::SuperOp, Failure> {
    parse_channel(&read(path)?).map_err(|e| Failure::new(channel_code(&e), format!("{}: {e}", path.display())))
}

/// Print to stdout, ignoring a closed pipe.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn print_json(v: &impl Serialize) {
    say(&serde_json::to_string_pretty(v).expect("serializable"));
}

fn cmd_classify(path: &Path) -> Result<(), Failure> {
    let c = load_channel(path)?;
    let rep = report::classify_report(&c);
    print_json(&rep);
    if !rep.completely_positive {
        return Err(Failure::new(EXIT_NOT_CP, "channel is not completely positive"));
    }
    Ok(())
}

fn cmd_fridge(q: f64, eps2: Option<f64>, r: Option<usize>, noise: Option<&Path>) -> Result<(), Failure> {
    let noise = noise.map(load_channel).transpose()?;
    let rep = report::fridge_report(q, eps2, r, noise.as_ref())?;
    print_json(&rep);
    Ok(())
}

fn parse_config<T: DeserializeOwned>(v: Value) -> Result<T, Failure> {
    serde_json::from_value(v).map_err(|e| Failure::input(format!("config: {e}")))
}

/// Run `name` on the merged config, returning the resolved config and output.
fn dispatch(name: &str, cfg: Value) -> Result<(Value, RunOutput), Failure> {
    fn run<T: DeserializeOwned + Serialize>(
        cfg: Value,
        f: impl FnOnce(&T) -> Result<RunOutput, ExperimentError>,
    ) -> Result<(Value, RunOutput), Failure> {
        let typed: T = parse_config(cfg)?;
        let out = f(&typed)?;
        Ok((serde_json::to_value(&typed).expect("serializable"), out))
    }
    match name {
        "depol_decay" => run::<DecayConfig>(cfg, run_depolarizing_decay),
        "stockpile" => run::<StockpileConfig>(cfg, run_stockpile),
        "epr_storage" => run::<EprConfig>(cfg, run_epr_storage),
        "fridge_protocol" => run::<ProtocolParams>(cfg, run_refrigerator_protocol),
        "bounds" => run::<BoundsConfig>(cfg, run_bounds),
        other => Err(Failure::input(format!(
            "unknown experiment {other:?} (expected depol_decay, stockpile, epr_storage, fridge_protocol or bounds)"
        ))),
    }
}

fn cmd_experiment(
    name: &str,
    config: Option<&Path>,
    seed: Option<u64>,
    out_dir: &Path,
    mode: Option<ModeArg>,
    sim: Option<SimArg>,
) -> Result<(), Failure> {
    let started = Instant::now();
    let mut cfg: Value = match config {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?,
        None => Value::Object(Default::default()),
    };
    let obj = cfg.as_object_mut().ok_or_else(|| Failure::input("config must be a JSON object"))?;
    if let Some(s) = seed {
        obj.insert("seed".into(), s.into());
    }
    if let Some(m) = mode {
        if !matches!(name, "bounds" | "epr_storage") {
            return Err(Failure::input(format!("--mode does not apply to {name}")));
        }
        obj.insert("mode".into(), if matches!(m, ModeArg::Paper) { "paper" } else { "safe" }.into());
    }
    if let Some(s) = sim {
        if name != "fridge_protocol" {
            return Err(Failure::input(format!("--sim does not apply to {name}")));
        }
        obj.insert("mode".into(), if matches!(s, SimArg::Exact) { "exact" } else { "factorized" }.into());
    }

    let (resolved, out) = dispatch(name, cfg)?;
    let manifest = output::RunManifest {
        command: format!("experiment {name}"),
        config_path: config.map(|p| p.display().to_string()),
        seed: resolved.get("seed").and_then(Value::as_u64).unwrap_or(0),
        out_dir: out_dir.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        duration_seconds: started.elapsed().as_secs_f64(),
        config: resolved,
    };
    output::write_run(out_dir, &out, &manifest).map_err(|e| Failure::input(format!("{}: {e}", out_dir.display())))?;

    for c in &out.checks {
        say(&format!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail));
    }
    say(&format!("{} records written to {}", out.records.len(), out_dir.display()));
    if !out.all_passed() {
        let names: Vec<&str> = out.failed().map(|c| c.name.as_str()).collect();
        return Err(Failure::new(EXIT_ASSERTION, format!("failed checks: {}", names.join(", "))));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Classify { channel } => cmd_classify(channel),
        Command::Fridge { q, eps2, r, noise } => cmd_fridge(*q, *eps2, *r, noise.as_deref()),
        Command::Experiment { name, config, seed, out, mode, sim } => {
            cmd_experiment(name, config.as_deref(), *seed, out, *mode, *sim)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
