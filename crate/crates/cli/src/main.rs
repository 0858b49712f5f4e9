use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use mimic_cli::{run, CliResult, Command, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "mimic",
    version,
    about = "Desk-scale motion-imitation experiments"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Experiment config JSON. Relative paths inside it resolve against its directory.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Parallel episode streams.
    #[arg(long, global = true, value_name = "N")]
    streams: Option<usize>,
}

fn execute(args: &Args) -> CliResult<()> {
    let (mut cfg, base) = match &args.config {
        Some(path) => (
            ExperimentConfig::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (ExperimentConfig::default(), PathBuf::new()),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(streams) = args.streams {
        cfg.streams = streams;
    }
    let out = match &args.out {
        Some(dir) => dir.clone(),
        None => base.join(&cfg.out),
    };
    let report = run(args.command, &cfg, &base)?;
    report.write(&out)?;
    print!("{}", report.summary);
    println!("wrote {} file(s) to {}", report.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
