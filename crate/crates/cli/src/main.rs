use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use evwg_cli::{load_config, resolve_out_dir, run, CliError, Mode};

/// Simulations of atoms guided inside a hollow optical fiber with a
/// modulated evanescent-wave wall.
#[derive(Parser, Debug)]
#[command(name = "evwg", version)]
struct Args {
    /// convert-units, freqmap, portrait, fixedpoints, ensemble, detect, quantum or revival.
    mode: String,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides EVWG_OUT_DIR and the config's [output] dir).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Random seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides the config's `threads`).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("evwg: error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: Args) -> Result<String, CliError> {
    let mode: Mode = args.mode.parse()?;
    let mut cfg = load_config(&args.config, Some(mode))?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    if args.threads == Some(0) {
        return Err(CliError::config("--threads must be >= 1"));
    }
    if let Some(k) = args.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start {k} threads: {e}")))?;
    }
    let out_dir = resolve_out_dir(args.out_dir, std::env::var_os("EVWG_OUT_DIR"), &cfg);
    let outputs = run(&cfg, out_dir)?;
    Ok(outputs.summary(mode.name()))
}
