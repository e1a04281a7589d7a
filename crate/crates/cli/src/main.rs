use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glbai_cli::{cmd_compare, cmd_run, cmd_sweep, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "glbai", version, about = "Best-arm identification experiments for generalized linear bandits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded replications of one algorithm.
    Run(Common),
    /// Replications at every value of the configured sweep axis.
    Sweep(Common),
    /// GLGapE and GapE on identical instances and seeds.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`; default `glbai-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (Command::Run(c) | Command::Sweep(c) | Command::Compare(c)) = &cli.command;
    if c.workers == Some(0) {
        return Err(CliError::Config("--workers must be >= 1".into()));
    }
    let cfg = ExperimentConfig::load(&c.config)?;
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("glbai-out"));
    match &cli.command {
        Command::Run(_) => {
            let s = cmd_run(&cfg, &out, c.workers)?;
            println!(
                "{} runs: mean tau {:.1}, median {:.1}, success rate {:.3}",
                s.num_replications, s.mean_tau, s.median_tau, s.success_rate
            );
        }
        Command::Sweep(_) => {
            let s = cmd_sweep(&cfg, &out, c.workers)?;
            for p in &s.points {
                println!("{} = {}: mean tau {:.1}", s.axis, p.value, p.mean_tau);
            }
            println!("spearman rho {:.3} (p = {:.2e})", s.spearman.rho, s.spearman.p_value);
        }
        Command::Compare(_) => {
            let s = cmd_compare(&cfg, &out, c.workers)?;
            println!(
                "mean tau glgape {:.1}, gape {:.1}, ratio {:.1}",
                s.glgape.mean_tau, s.gape.mean_tau, s.ratio
            );
        }
    }
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
