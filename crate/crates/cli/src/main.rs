use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::Value;
use skewsim::eval::{
    emit_reports, evaluate, run_sweep, simulate, write_sweep_summary_csv, ExperimentConfig,
    ExperimentOutput,
};
use skewsim::sim::ExecutionTrace;
use skewsim::Error;

/// Simulate skewed MapReduce jobs and score reduce-phase progress indicators.
#[derive(Parser)]
#[command(name = "skewsim", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment configuration (JSON).
    config: PathBuf,
    /// Override a configuration field, e.g. `--set workload.sigma=1.6`.
    /// The value is read as JSON, falling back to a plain string.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured workload and write it as CSV.
    Gen {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "workload.csv")]
        out: PathBuf,
    },
    /// Run the simulator; writes trace.json and events.csv.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: u64,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay a saved trace through the configured indicators.
    Replay {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate, simulate, replay and write all reports.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Run one experiment per value of a configuration field.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Dotted field to vary; defaults to the config's own sweep.
        #[arg(long, requires = "values")]
        field: Option<String>,
        /// Comma-separated values, each read as JSON.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn load_config(args: &ConfigArgs, seed: Option<u64>) -> skewsim::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    for o in &args.overrides {
        let (field, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects FIELD=VALUE, got `{o}`")))?;
        let sweep = cfg.sweep.take();
        cfg = cfg.with_override(field.trim(), parse_value(raw.trim()))?;
        cfg.sweep = sweep;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(out: &ExperimentOutput) {
    println!("{:<18} {:>10} {:>10} {:>10}", "indicator", "avgErr", "maxErr", "overhead");
    for r in &out.summary {
        println!(
            "{:<18} {:>10.3} {:>10.3} {:>9.3}%",
            r.indicator, r.avg_err, r.max_err, r.overhead
        );
    }
}

fn write_sweep(cfg: &ExperimentConfig, out: &Path) -> skewsim::Result<()> {
    let runs = run_sweep(cfg)?;
    let Some(sweep) = &cfg.sweep else {
        let (_, run) = &runs[0];
        emit_reports(run, out)?;
        print_summary(run);
        return Ok(());
    };
    fs::create_dir_all(out)?;
    for (value, run) in &runs {
        let value = value.as_ref().map(Value::to_string).unwrap_or_default();
        let dir = out.join(format!("{}={}", sweep.field, value.trim_matches('"')));
        emit_reports(run, &dir)?;
        println!("{} = {value}", sweep.field);
        print_summary(run);
    }
    write_sweep_summary_csv(&sweep.field, &runs, &out.join("sweep_summary.csv"))?;
    info!("{} runs written to {}", runs.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> skewsim::Result<()> {
    match cli.command {
        Command::Gen { cfg, seed, out } => {
            let cfg = load_config(&cfg, seed)?;
            let workload = cfg
                .workload
                .generate(cfg.reducers, cfg.seed, cfg.base_dir.as_deref())?;
            workload.write_csv(BufWriter::new(File::create(&out)?))?;
            info!("{} keys written to {}", workload.keys.len(), out.display());
        }
        Command::Simulate { cfg, seed, out } => {
            let cfg = load_config(&cfg, Some(seed))?;
            let trace = simulate(&cfg)?;
            fs::create_dir_all(&out)?;
            serde_json::to_writer(BufWriter::new(File::create(out.join("trace.json"))?), &trace)?;
            trace.write_events_csv(BufWriter::new(File::create(out.join("events.csv"))?))?;
            println!(
                "reduce phase {} ms .. {} ms, {} events",
                trace.reduce_start().0,
                trace.job_end().0,
                trace.events.len()
            );
        }
        Command::Replay { cfg, trace, out } => {
            let cfg = load_config(&cfg, None)?;
            let trace: ExecutionTrace = serde_json::from_reader(File::open(&trace)?)?;
            let result = evaluate(&cfg, trace)?;
            emit_reports(&result, &out)?;
            print_summary(&result);
        }
        Command::Report { cfg, seed, out } => {
            let mut cfg = load_config(&cfg, seed)?;
            cfg.sweep = None;
            write_sweep(&cfg, &out)?;
        }
        Command::Sweep {
            cfg,
            field,
            values,
            seed,
            out,
        } => {
            let mut cfg = load_config(&cfg, seed)?;
            if let Some(field) = field {
                cfg.sweep = Some(skewsim::eval::SweepSpec {
                    field,
                    values: values.iter().map(|v| parse_value(v.trim())).collect(),
                });
                cfg.validate()?;
            }
            if cfg.sweep.is_none() {
                return Err(Error::InvalidArgument(
                    "no sweep: pass --field and --values or add one to the config".into(),
                ));
            }
            write_sweep(&cfg, &out)?;
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Validation { .. } | Error::Parse(_) | Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
