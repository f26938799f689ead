use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infoflow::experiments::{
    analyze, emit_csv, emit_strategy_csv, emit_surface_csv, emit_sweep_csv, emit_terminal_csv, load_config,
    run_experiment, strategy_report, sweep, ExperimentConfig,
};
use infoflow::Error;

#[derive(Parser)]
#[command(name = "infoflow", version, about = "Sequential-auction simulations with information-based prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of simulated paths.
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and write per-auction statistics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the closed-form quality, profit, gain and value surfaces.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare trading policies and check the value recursion by enumeration.
    Strategy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the experiment over a list of values of one parameter.
    Sweep {
        /// Parameter name, e.g. `sigma2`, `rate`, `auctions`, `rho`, `lambda`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Base config; the defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn prepare(path: Option<&Path>, o: &Overrides) -> infoflow::Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(paths) = o.paths {
        cfg.paths = paths;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(out: Option<PathBuf>, cfg: &ExperimentConfig) -> infoflow::Result<PathBuf> {
    let dir = out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run(cli: Cli) -> infoflow::Result<()> {
    let o = &cli.overrides;
    if let Some(n) = o.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = prepare(Some(&config), o)?;
            let dir = out_dir(out, &cfg)?;
            let result = run_experiment(&cfg)?;
            emit_csv(&result, dir.join("auctions.csv"))?;
            emit_terminal_csv(&result, dir.join("terminal.csv"))?;
            for (j, s) in result.terminal.iter().enumerate() {
                println!("agent {j}: mean total P&L {:.6} (SE {:.6})", s.mean, s.se);
            }
            log::info!("wrote {}", dir.display());
        }
        Command::Analyze { config, out } => {
            let cfg = prepare(Some(&config), o)?;
            let dir = out_dir(out, &cfg)?;
            let rows = analyze(&cfg)?;
            emit_surface_csv(&rows, dir.join("surface.csv"))?;
            println!("{} states written to {}", rows.len(), dir.join("surface.csv").display());
        }
        Command::Strategy { config, out } => {
            let cfg = prepare(Some(&config), o)?;
            let dir = out_dir(out, &cfg)?;
            let report = strategy_report(&cfg)?;
            emit_strategy_csv(&report, &dir)?;
            for p in &report.policies {
                let sharpe = p.sharpe.map_or("undefined".to_string(), |v| format!("{v:.4}"));
                println!(
                    "agent {} {:<9} trades {:>3}  expected profit {:.6}  Sharpe {sharpe}",
                    p.agent, p.policy, p.trades, p.expected_profit
                );
            }
            for (j, (v, e)) in report.optimum.iter().zip(&report.enumerated).enumerate() {
                match e {
                    Some(e) => println!("agent {j}: recursion {v:.12} enumeration {e:.12}"),
                    None => println!("agent {j}: recursion {v:.12} (grid too large to enumerate)"),
                }
            }
        }
        Command::Sweep {
            param,
            values,
            config,
            out,
        } => {
            let cfg = prepare(config.as_deref(), o)?;
            let dir = out_dir(out, &cfg)?;
            let points = sweep(&cfg, &param, &values)?;
            emit_sweep_csv(&param, &points, dir.join("sweep.csv"))?;
            println!("{} points written to {}", points.len(), dir.join("sweep.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
