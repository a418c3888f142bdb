//! `gbdeer` command-line front end.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gbdeer::engine::run;
use gbdeer::model::{validate_config, Protocol, ScenarioConfig};
use gbdeer::{Error, Metrics, RunOutput};
use log::{debug, info};
use rayon::prelude::*;

use crate::output::{OutputDir, Staged};

#[derive(Parser, Debug)]
#[command(name = "gbdeer", version, about = "Grid-based energy-efficient MANET routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write metrics.txt (and trace.csv).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's protocol.
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        trace: Toggle,
        /// Replace existing output files.
        #[arg(long)]
        overwrite: bool,
    },
    /// Run every (protocol, seed) pair and write comparison.csv.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Inclusive range `N..M`, or a single seed.
        #[arg(long)]
        seeds: String,
        /// Comma-separated protocol names.
        #[arg(long, default_value = "gbdeer,gaf-fixed,minhop")]
        protocols: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "off")]
        trace: Toggle,
        #[arg(long)]
        overwrite: bool,
    },
    /// Print the normalized config, or the invariant it violates.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Exit status 1: the invocation or its config is wrong.
/// Exit status 2: the run itself failed.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) => Failure::Runtime(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

fn parse_protocol(name: &str) -> Result<Protocol, Failure> {
    name.trim().parse::<Protocol>().map_err(|e| Failure::Usage(e.to_string()))
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("invalid --seeds '{spec}': expected N..M or N"));
    let (lo, hi) = match spec.split_once("..") {
        Some((a, b)) => (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?),
        None => {
            let n = spec.trim().parse::<u64>().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn load_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ScenarioConfig::from_toml_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(validate_config(cfg)?)
}

fn run_pair(base: &ScenarioConfig, protocol: Protocol, seed: u64) -> Result<RunOutput, Error> {
    let cfg = ScenarioConfig { protocol, seed, ..base.clone() };
    info!("running {} seed {seed}", protocol.name());
    let out = run(&cfg)?;
    debug!("{} seed {seed}: {} trace rows", protocol.name(), out.trace.len());
    Ok(out)
}

fn stage_run(staged: &mut Staged, prefix: &str, out: &RunOutput, with_trace: bool) -> Result<(), Failure> {
    staged.write(&format!("{prefix}metrics.txt"), out.metrics.to_document().as_bytes())?;
    if with_trace {
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf)?;
        staged.write(&format!("{prefix}trace.csv"), &buf)?;
    }
    Ok(())
}

fn cmd_run(config: &Path, seed: Option<u64>, protocol: Option<&str>, dir: &Path, trace: Toggle, overwrite: bool) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(p) = protocol {
        cfg.protocol = parse_protocol(p)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let out_dir = OutputDir::prepare(dir, overwrite)?;
    let out = run_pair(&cfg, cfg.protocol, cfg.seed)?;
    let mut staged = out_dir.stage()?;
    stage_run(&mut staged, "", &out, trace == Toggle::On)?;
    staged.commit()?;
    println!("{}", out.metrics.to_document().trim_end());
    Ok(())
}

fn comparison_csv(rows: &[(Protocol, u64, Metrics)]) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["protocol", "seed"];
    header.extend(Metrics::csv_header());
    w.write_record(&header).map_err(|e| Failure::Runtime(e.to_string()))?;
    for (p, seed, m) in rows {
        let mut rec = vec![p.name().to_string(), seed.to_string()];
        rec.extend(m.csv_values());
        w.write_record(&rec).map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Failure::Runtime(e.to_string()))
}

fn cmd_compare(config: &Path, seeds: &str, protocols: &str, dir: &Path, trace: Toggle, overwrite: bool) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let seeds = parse_seeds(seeds)?;
    let protocols = protocols.split(',').map(parse_protocol).collect::<Result<Vec<_>, _>>()?;
    let out_dir = OutputDir::prepare(dir, overwrite)?;

    let pairs: Vec<(Protocol, u64)> = protocols.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let results: Vec<Result<RunOutput, Error>> = pairs.par_iter().map(|&(p, s)| run_pair(&cfg, p, s)).collect();

    let mut staged = out_dir.stage()?;
    let mut rows = Vec::with_capacity(pairs.len());
    for (&(p, s), result) in pairs.iter().zip(results) {
        let out = result.map_err(|e| Failure::Runtime(format!("{} seed {s}: {e}", p.name())))?;
        stage_run(&mut staged, &format!("{}-seed{s}/", p.name()), &out, trace == Toggle::On)?;
        rows.push((p, s, out.metrics));
    }
    staged.write("comparison.csv", &comparison_csv(&rows)?)?;
    staged.commit()?;
    println!("{} runs written to {}", rows.len(), dir.display());
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    print!("{}", cfg.to_toml_string());
    Ok(())
}

fn main() -> ExitCode {
    let level = std::env::var("GBDEER_LOG").unwrap_or_else(|_| "error".into());
    env_logger::Builder::new().parse_filters(&level).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { config, seed, protocol, out, trace, overwrite } => {
            cmd_run(config, *seed, protocol.as_deref(), out, *trace, *overwrite)
        }
        Command::Compare { config, seeds, protocols, out, trace, overwrite } => {
            cmd_compare(config, seeds, protocols, out, *trace, *overwrite)
        }
        Command::Validate { config } => cmd_validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
