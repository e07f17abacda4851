use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dgqft_cli::{run, summary, to_json, Command, RunConfig, Theory};

#[derive(Parser, Debug)]
#[command(name = "dgqft", version, about = "Exact verification of quantized linear field theories on lattice cylinders")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long, default_value_t = 12)]
    nt: usize,
    #[arg(long, default_value_t = 4)]
    nx: usize,
    #[arg(long, default_value = "1")]
    dt: String,
    #[arg(long, default_value = "1")]
    dx: String,
    #[arg(long, default_value = "1")]
    mass: String,
    /// Theory for `homology` and `zigzag`.
    #[arg(long, value_enum, default_value = "kg")]
    theory: Theory,
    /// Maximum word length in the CCR algebras.
    #[arg(long, default_value_t = 6)]
    cap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file whose keys override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = RunConfig {
        nt: cli.nt,
        nx: cli.nx,
        dt: cli.dt,
        dx: cli.dx,
        mass: cli.mass,
        theory: cli.theory,
        cap: cli.cap,
        seed: cli.seed,
        out: cli.out,
    };
    if let Some(path) = &cli.config {
        cfg = match cfg.apply_file(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e:#}");
                return ExitCode::from(2);
            }
        };
    }
    if let Err(e) = cfg.validate(cli.command) {
        eprintln!("config error: {e:#}");
        return ExitCode::from(2);
    }
    let report = match run(cli.command, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    print!("{}", summary(&report));
    if let Some(path) = &cfg.out {
        if let Err(e) = std::fs::write(path, to_json(&report)) {
            eprintln!("writing {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
