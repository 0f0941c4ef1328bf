use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sfde::{parse_config_with, run, Command, Overrides};

#[derive(Parser)]
#[command(name = "sfde", version, about = "Stock prices with finite memory: simulation, pricing, hedging and diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Simulate one path and dump it as `t,price`.
    Simulate,
    /// Price a European option.
    Price,
    /// Convergence study of the gap-closing sequence.
    Converge,
    /// Hedge backtest over the last delay period.
    Hedge,
    /// Girsanov normalization, martingale and moment checks.
    Check,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file (a manifest also works).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path; the manifest goes next to it with a `.manifest`
    /// suffix. Without it the CSV goes to stdout and the manifest to stderr.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true)]
    antithetic: bool,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Price => Command::Price,
        Cmd::Converge => Command::Converge,
        Cmd::Hedge => Command::Hedge,
        Cmd::Check => Command::Check,
    };
    let Some(config) = cli.common.config else {
        eprintln!("error: --config <file> is required");
        return ExitCode::from(1);
    };
    let text = match fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    if cli.common.replicates == Some(0) {
        eprintln!("error: --replicates must be at least 1");
        return ExitCode::from(1);
    }
    let overrides = Overrides {
        command: Some(command),
        seed: cli.common.seed,
        replicates: cli.common.replicates,
        antithetic: cli.common.antithetic,
        output: cli.common.out,
    };
    let base = config.parent().unwrap_or(Path::new("."));
    let cfg = match parse_config_with(&text, base, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration\n{e}");
            return ExitCode::from(1);
        }
    };
    let artifacts = match run(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let manifest = artifacts.manifest.render(None);
    let written = match &cfg.output {
        Some(out) => fs::write(out, &artifacts.csv).and_then(|_| fs::write(manifest_path(out), &manifest)),
        None => std::io::stdout()
            .write_all(artifacts.csv.as_bytes())
            .and_then(|_| std::io::stderr().write_all(manifest.as_bytes())),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(1)
        }
    }
}
