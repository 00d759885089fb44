use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use reaptomo_cli::{estimate, reproduce_fig3, simulate, CliError, Overrides, RunConfig, EXIT_NOT_CONVERGED};

#[derive(Parser)]
#[command(name = "reaptomo", version, about = "Pointer-qubit state tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample counts from the configured state; writes counts.csv and counts.meta.json
    Simulate {
        /// TOML run configuration
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Exact and/or ML reconstruction; writes estimates, convergence.csv and summary.json
    Estimate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Counts CSV; when omitted, data are generated from the configured state
        #[arg(long)]
        counts: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// ML runs for the W, Dicke, GHZ and TFIM states at n = 6, F = 24000
    #[command(name = "reproduce-fig3")]
    ReproduceFig3 {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: Option<&PathBuf>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let base = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(overrides.n.ok_or_else(|| {
            CliError::Config("give --config or at least --n".into())
        })?),
    };
    overrides.apply(base)
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Simulate { config, overrides } => {
            let config = load(config.as_ref(), &overrides)?;
            let out = simulate(&config)?;
            println!(
                "wrote {} ({} shots over {} cells)",
                out.counts_path.display(),
                out.counts.total(),
                out.counts.occupied_cells()
            );
            Ok(true)
        }
        Command::Estimate {
            config,
            counts,
            overrides,
        } => {
            let config = load(config.as_ref(), &overrides)?;
            let summary = estimate(&config, counts.as_deref())?;
            if let Some(e) = &summary.exact {
                println!(
                    "exact: residual {:.3e}, condition {:.3e}{}",
                    e.residual,
                    e.condition_estimate,
                    e.fidelity_to_truth.map_or(String::new(), |f| format!(", fidelity {f:.10}"))
                );
            }
            if let Some(m) = &summary.ml {
                println!(
                    "ml: {} iterations, converged {}{}",
                    m.iterations,
                    m.converged,
                    m.fidelity_to_truth.map_or(String::new(), |f| format!(", fidelity {f:.10}"))
                );
            }
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            println!("results in {}", config.output_dir.display());
            Ok(!summary.not_converged())
        }
        Command::ReproduceFig3 {
            config,
            seed,
            theta,
            max_iters,
            tol,
            out,
        } => {
            let overrides = Overrides {
                n: Some(6),
                seed,
                theta,
                max_iters,
                tol,
                out,
                ..Overrides::default()
            };
            let config = load(config.as_ref(), &overrides)?;
            let summary = reproduce_fig3(&config)?;
            println!("state   fidelity      iterations  to 1e-5  converged");
            for r in &summary.rows {
                println!(
                    "{:<7} {:.10}  {:>10}  {:>7}  {}",
                    r.state,
                    r.fidelity_to_truth,
                    r.iterations,
                    r.iterations_to_1e_5.map_or("-".to_string(), |k| k.to_string()),
                    r.converged
                );
            }
            println!("results in {}", config.output_dir.display());
            Ok(!summary.not_converged())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: iteration cap reached before the convergence tolerance; partial results written");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
