use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nimo::data::Setting;
use nimo_cli::{run, CliError, CliResult, ExperimentConfig, Method, Overrides};

/// Run NIMO and baseline methods on a synthetic setting or a CSV file.
#[derive(Debug, Parser)]
#[command(name = "nimo", version)]
struct Args {
    /// JSON experiment configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and the CSV tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Methods to run (nimo, lasso, logistic, mlp, ridge); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Synthetic setting, e.g. reg_toy, reg1, cls2.
    #[arg(long)]
    setting: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    target_col: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(args: Args) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let methods = if args.method.is_empty() {
        None
    } else {
        Some(args.method.iter().map(|m| m.parse()).collect::<CliResult<Vec<Method>>>()?)
    };
    let setting = match &args.setting {
        Some(s) => Some(s.parse::<Setting>().map_err(|e| CliError::Config(e.to_string()))?),
        None => None,
    };
    Overrides {
        seed: args.seed,
        out: args.out,
        methods,
        setting,
        csv: args.csv,
        target_col: args.target_col,
        repeats: args.repeats,
        workers: args.workers,
    }
    .apply(&mut cfg)?;
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from("nimo_out"));
    }
    let out = run(&cfg)?;
    for (name, m) in &out.report.methods {
        let reference = m.reference.as_ref().map_or(String::new(), |r| format!("  (reference {}, ratio {:.3})", r.value, r.ratio));
        println!("{name:<9} {} {:.4} ± {:.4}{reference}", m.metric.name(), m.mean, m.stddev);
    }
    println!("wrote {}", cfg.output_dir.as_deref().unwrap_or_else(|| "nimo_out".as_ref()).display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
