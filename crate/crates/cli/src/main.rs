use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oamp_core::harness::{compare_runs, run_experiment, run_state_evolution, selftest, write_comparison, RunResult, RunTable};
use oamp_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "oamp", version, about = "Orthogonal AMP experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Output directory
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Worker threads for trials (default: logical cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte-Carlo trials plus state evolution
    Run { config: PathBuf },
    /// State evolution only
    Se { config: PathBuf },
    /// Per-iteration MSE ratio (dB) and Welch test between two runs
    Compare { a: PathBuf, b: PathBuf },
    /// Orthogonality and Gaussianity property checks
    Selftest {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidDimension(_)
        | Error::InvalidSpectrum(_)
        | Error::InvalidThreshold(_)
        | Error::InvalidVariance(_)
        | Error::UnsupportedStrategy(_) => EXIT_CONFIG,
        Error::Divergence { .. } | Error::ExperimentFailure(_) => EXIT_DIVERGED,
        _ => 1,
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(path).map_err(|e| match e {
        Error::Io(msg) => Error::Config(format!("{}: {msg}", path.display())),
        e => e,
    })?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn report(res: &RunResult, cli: &Cli) -> Result<(), Error> {
    let path = res.write_to_dir(&cli.out)?;
    for row in &res.aggregate {
        let se = 10.0 * row.se_mse.log10();
        if res.trajectories.is_empty() {
            println!("iter {:>3}  se {se:>9.3} dB", row.iter);
        } else {
            let sim = 10.0 * row.mean_gs_mse.log10();
            println!("iter {:>3}  sim {sim:>9.3} dB  se {se:>9.3} dB", row.iter);
        }
    }
    if !res.diverged.is_empty() {
        eprintln!("{} of {} trials diverged and were excluded", res.diverged.len(), res.config.trials);
    }
    println!("wrote {} ({:.2} s)", path.display(), res.wall_clock_secs);
    Ok(())
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    match &cli.cmd {
        Cmd::Run { config } => {
            let cfg = load(config, cli.seed)?;
            report(&run_experiment(&cfg)?, cli)?;
        }
        Cmd::Se { config } => {
            let cfg = load(config, cli.seed)?;
            report(&run_state_evolution(&cfg)?, cli)?;
        }
        Cmd::Compare { a, b } => {
            let rows = compare_runs(&RunTable::from_path(a)?, &RunTable::from_path(b)?)?;
            std::fs::create_dir_all(&cli.out)?;
            write_comparison(&rows, std::fs::File::create(cli.out.join("comparison.csv"))?)?;
            for r in &rows {
                println!(
                    "iter {:>3}  {:>+8.3} dB  p={:.3e}{}",
                    r.iter,
                    r.ratio_db,
                    r.p_value,
                    if r.significant { "  *" } else { "" }
                );
            }
        }
        Cmd::Selftest { n, seeds, iterations } => {
            let checks = selftest(*n, *seeds, *iterations)?;
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.pass) {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
