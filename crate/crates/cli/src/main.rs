use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use extremal_cli::commands::{self, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};
use extremal_cli::suite::{run_suite, summary_lines};
use extremal_cli::RunConfig;

#[derive(Parser)]
#[command(name = "extremal", version, about = "Radial extremals of doubly critical p-Laplace equations with Hardy potential")]
struct Cli {
    /// Run configuration (key = value sections)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overrides [output] dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Kernel cache directory, overrides [output] kernel_cache
    #[arg(long, global = true)]
    kernel_cache: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Random seed, overrides [verify] seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponents and decay roots (optionally over a μ sweep)
    Exponents,
    /// Riesz potential of a radial density given as a profile CSV
    Convolve {
        input: PathBuf,
        /// Riesz exponent; defaults to the variant's
        #[arg(long)]
        nu: Option<f64>,
    },
    /// Ground state of the configured instance
    Solve,
    /// Verification battery on a profile CSV
    Verify { profile: PathBuf },
    /// Acceptance criteria 1-8
    Suite,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            RunConfig::parse(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(dir) = &cli.kernel_cache {
        cfg.kernel_cache = Some(dir.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.verify.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<i32> {
    let cfg = load(cli)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.max(1))
        .build_global()
        .ok();
    match &cli.command {
        Command::Exponents => commands::cmd_exponents(&cfg),
        Command::Convolve { input, nu } => commands::cmd_convolve(&cfg, input, *nu),
        Command::Solve => commands::cmd_solve(&cfg),
        Command::Verify { profile } => commands::cmd_verify(&cfg, profile),
        Command::Suite => {
            let report = run_suite(&cfg, commands::kernel_store(&cfg)?, cli.jobs)?;
            if report.criteria.is_empty() {
                eprintln!("warning: no criteria selected");
            }
            for line in summary_lines(&report) {
                println!("{line}");
            }
            let pass = report.pass();
            println!(
                "suite: {} in {:.1} s (report {})",
                if pass { "PASS" } else { "FAIL" },
                report.elapsed.as_secs_f64(),
                cfg.out_dir.join("suite.csv").display()
            );
            Ok(if pass { EXIT_PASS } else { EXIT_FAIL })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
