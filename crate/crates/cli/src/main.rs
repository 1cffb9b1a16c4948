use std::path::PathBuf;
use std::process::ExitCode;

use barrier_repl::commands;
use barrier_repl::config::{Format, RunConfig};
use barrier_repl::error::CliError;
use barrier_repl::parallel::with_threads;
use clap::Parser;

/// Price and replicate barrier claims on the log price and its quadratic variation.
#[derive(Debug, Parser)]
#[command(name = "barrier-repl", version)]
struct Args {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "BARRIER_REPL_THREADS", default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn execute(args: &Args) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let format = args.format.map(|f| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    });
    let (text, passed) = with_threads(args.threads, || commands::run(&cfg, format));
    let text = text?;
    let out = args.out.clone().or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    if passed {
        Ok(())
    } else {
        Err(CliError::Verification("one or more checks failed".into()))
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
