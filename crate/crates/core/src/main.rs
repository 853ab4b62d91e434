use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gsa::cli::{self, CliError, EstimateRequest};
use gsa::harness::{Axis, FitWindow};
use gsa::models::TestCaseId;
use gsa::sampling::{LognormalParams, SamplerKind};

/// Overrides the worker thread count.
const THREADS_ENV: &str = "GSA_THREADS";

#[derive(Parser)]
#[command(
    name = "gsa",
    version,
    about = "Sobol' main-effect index estimators and convergence benchmarks"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate main-effect indices once and compare with analytic values.
    Estimate {
        #[arg(long)]
        test: String,
        /// Comma-separated list: sobol, sk, owen, oracle, dlr.
        #[arg(long, alias = "estimator")]
        estimators: String,
        #[arg(long, default_value = "QMC")]
        sampler: String,
        #[arg(long)]
        n: usize,
        /// Seed of the pseudo-random stream (MC).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Block index into the Sobol' sequence (QMC).
        #[arg(long, default_value_t = 0)]
        run_index: u64,
        /// Reading of the lognormal parameters of ParkAhn7.
        #[arg(long)]
        lognormal: Option<String>,
    },
    /// Run a convergence benchmark from a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `fit_window` from the config.
        #[arg(long)]
        fit_window: Option<String>,
    },
    /// Turn records.csv into per-input plot-data files.
    Plotdata {
        #[arg(long)]
        records: PathBuf,
        /// `N` or `N_CPU`.
        #[arg(long, default_value = "N")]
        axis: String,
        /// Defaults to the directory holding the records file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse<T: std::str::FromStr<Err = gsa::Error>>(s: &str) -> Result<T, CliError> {
    Ok(s.parse()?)
}

fn run(args: Args) -> Result<(), CliError> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v.parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got '{v}'"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }

    match args.command {
        Command::Estimate {
            test,
            estimators,
            sampler,
            n,
            seed,
            run_index,
            lognormal,
        } => {
            let req = EstimateRequest {
                test: parse::<TestCaseId>(&test)?,
                estimators: cli::parse_list(&estimators)?,
                sampler: parse::<SamplerKind>(&sampler)?,
                n,
                seed,
                run_index,
                lognormal: match lognormal {
                    Some(l) => parse::<LognormalParams>(&l)?,
                    None => LognormalParams::default(),
                },
            };
            if req.estimators.is_empty() {
                return Err(CliError::Usage("no estimators given".into()));
            }
            print!("{}", cli::estimate_table(&req)?);
        }
        Command::Bench {
            config,
            out,
            fit_window,
        } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(w) = fit_window {
                cfg.fit_window = parse::<FitWindow>(&w)?;
            }
            let result = cli::bench(cfg, &out)?;
            println!(
                "{} records -> {}",
                result.records.len(),
                result.manifest.records.display()
            );
            println!(
                "{:<8} {:>5} {:>6} {:>8} {:>6}",
                "method", "input", "axis", "alpha", "r2"
            );
            for f in &result.fits {
                println!(
                    "{:<8} {:>5} {:>6} {:>8.3} {:>6.3}",
                    f.estimator.name(),
                    f.input,
                    f.axis.name(),
                    f.alpha,
                    f.r2
                );
            }
        }
        Command::Plotdata { records, axis, out } => {
            let axis = parse::<Axis>(&axis)?;
            let out = out.unwrap_or_else(|| {
                records
                    .parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .map_or_else(|| PathBuf::from("."), PathBuf::from)
            });
            for path in cli::plotdata(&records, axis, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
