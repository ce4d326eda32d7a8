use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dareplane_cli::{commands, thread_cap, CliError, Config};

#[derive(Parser)]
#[command(
    name = "dareplane",
    version,
    about = "Direction-aware wavelet plane fields: fit, compare, transform, inspect"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file (for `inspect`, an archive or a config naming one)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the `out` key
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding the `seed` key
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a synthetic scene and write metrics, archive, renders and log
    Fit(Common),
    /// Fit the configured run and its DWT baseline at an equal budget
    Compare(Common),
    /// Write subband magnitude images and the reconstruction report
    Transform(Common),
    /// Print an archive header and verify its checksum
    Inspect(Common),
}

fn load(args: &Common) -> Result<(Config, PathBuf), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let mut cfg = Config::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.set("seed", seed.to_string())?;
    }
    if let Some(out) = &args.out {
        cfg.set("out", out.to_string_lossy())?;
    }
    let out = PathBuf::from(cfg.str("out")?);
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = thread_cap()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit(args) => {
            let (cfg, out) = load(&args)?;
            let r = commands::fit(&cfg, &out)?;
            Ok(r.metrics)
        }
        Command::Compare(args) => {
            let (cfg, out) = load(&args)?;
            Ok(commands::compare(&cfg, &out)?.report)
        }
        Command::Transform(args) => {
            let (cfg, out) = load(&args)?;
            Ok(commands::transform(&cfg, &out)?.report)
        }
        Command::Inspect(args) => commands::inspect(&args.config),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
