use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fdrelay_cli::config::ExperimentConfig;
use fdrelay_cli::output::{write_results_to, write_trace};
use fdrelay_cli::sweep::PointResult;
use fdrelay_cli::{parse_config, preset, run_sweep_detailed, write_results};

#[derive(Parser)]
#[command(name = "fdrelay", version, about = "Buffer-aided full-duplex relay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single-point config.
    Run(Opts),
    /// Run a config with a [sweep] section.
    Sweep(Opts),
    /// Rate vs. total power for all schemes and benchmarks.
    Fig2(Opts),
    /// Rate vs. source power at a fixed relay power, for several SI levels.
    Fig3(Opts),
    /// Rate vs. target delay.
    Fig4(Opts),
    /// Running delay over time for a delay target of 5 slots.
    Fig5(Opts),
}

#[derive(Args)]
struct Opts {
    /// Config file; figure verbs default to their checked-in preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output CSV; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of slots per run.
    #[arg(long)]
    slots: Option<u64>,
    /// Write per-slot traces next to the output file.
    #[arg(long, overrides_with = "no_trace")]
    trace: bool,
    /// Disable traces even if the config enables them.
    #[arg(long)]
    no_trace: bool,
}

fn load(opts: &Opts, preset_name: Option<&str>) -> Result<ExperimentConfig> {
    let text = match (&opts.config, preset_name) {
        (Some(path), _) => std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?,
        (None, Some(name)) => preset(name).context("unknown preset")?.to_string(),
        (None, None) => bail!("--config is required"),
    };
    let mut config = parse_config(&text).context("invalid config")?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(slots) = opts.slots {
        if slots == 0 {
            bail!("--slots must be at least 1");
        }
        if config.warmup >= slots {
            bail!("--slots ({slots}) must exceed the configured warmup ({})", config.warmup);
        }
        config.slots = slots;
    }
    if opts.trace {
        config.trace = true;
    }
    if opts.no_trace {
        config.trace = false;
    }
    Ok(config)
}

fn trace_path(output: &Path, result: &PointResult) -> PathBuf {
    let stem = output.file_stem().and_then(|s| s.to_str()).unwrap_or("results");
    let name = format!("{stem}.trace.{}.{}.{}.csv", result.index, result.row.scheme, result.row.control);
    output.with_file_name(name)
}

fn execute(command: Command) -> Result<()> {
    let (opts, preset_name, single) = match &command {
        Command::Run(o) => (o, None, true),
        Command::Sweep(o) => (o, None, false),
        Command::Fig2(o) => (o, Some("fig2"), false),
        Command::Fig3(o) => (o, Some("fig3"), false),
        Command::Fig4(o) => (o, Some("fig4"), false),
        Command::Fig5(o) => (o, Some("fig5"), false),
    };
    let config = load(opts, preset_name)?;
    if single && config.sweep.is_some() {
        bail!("`run` takes a config without a [sweep] section; use `sweep`");
    }
    if !single && config.sweep.is_none() {
        bail!("this verb needs a config with a [sweep] section; use `run`");
    }
    if config.trace && opts.output.is_none() {
        bail!("traces need --output to know where to go");
    }

    let results = run_sweep_detailed(&config)?;
    let rows: Vec<_> = results.iter().map(|r| r.row.clone()).collect();
    let variable = config.sweep_variable().map(|v| v.column_name()).unwrap_or("");
    match &opts.output {
        Some(path) => {
            write_results(&rows, variable, path)?;
            for r in &results {
                if let Some(trace) = &r.trace {
                    write_trace(trace, &trace_path(path, r))?;
                }
            }
        }
        None => write_results_to(&rows, variable, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
