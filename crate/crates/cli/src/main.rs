use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcskel_cli::commands::{self, BenchParams};
use pcskel_cli::CliError;
use pcskel_core::{SkeletonConfig, Strategy};

/// PC-stable skeleton discovery on multi-core CPUs.
#[derive(Parser)]
#[command(name = "pcskel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random linear-Gaussian dataset and its true DAG.
    Gen {
        #[arg(long)]
        n: usize,
        /// Edge probability for each ordered pair.
        #[arg(long)]
        d: f64,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Data CSV; the edge list goes to `<stem>.truth.txt`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Discover the skeleton of a CSV dataset.
    Skeleton {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
        /// Output directory for skeleton.txt, sepsets.txt and report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Orient a skeleton into a CPDAG.
    Orient {
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long)]
        sepsets: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time strategies over generated datasets and write a CSV.
    Bench {
        /// Comma-separated `n:d:m` cases, e.g. `100:0.1:1000,200:0.1:1000`.
        #[arg(long)]
        spec: String,
        #[arg(long, default_value = "serial,edge,set")]
        strategies: String,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Workers for the parallel strategies [env: PCSKEL_WORKERS, default: all cores].
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "serial", value_parser = ["serial", "edge", "set"])]
    strategy: String,
    /// Edges per edge-parallel work unit.
    #[arg(long, default_value_t = 2)]
    beta: usize,
    /// Lanes sharing one edge's conditioning sets (edge-parallel).
    #[arg(long, default_value_t = 32)]
    gamma: usize,
    /// Consecutive conditioning sets per set-shared lane group.
    #[arg(long, default_value_t = 64)]
    theta: usize,
    /// Set-shared work units per row.
    #[arg(long, default_value_t = 2)]
    delta: usize,
    /// Worker threads [env: PCSKEL_WORKERS, default: all cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Highest conditioning-set size to try.
    #[arg(long)]
    max_level: Option<usize>,
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("PCSKEL_WORKERS") {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("PCSKEL_WORKERS={v:?} is not a count"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

impl EngineArgs {
    fn config(&self) -> Result<SkeletonConfig, CliError> {
        let strategy: Strategy = self.strategy.parse().map_err(|_| CliError::Usage("bad strategy".into()))?;
        Ok(SkeletonConfig {
            alpha: self.alpha,
            max_level: self.max_level,
            strategy,
            beta: self.beta,
            gamma: self.gamma,
            theta: self.theta,
            delta: self.delta,
            workers: resolve_workers(self.workers)?,
            schedule_seed: None,
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { n, d, m, seed, out } => commands::cmd_gen(n, d, m, seed, &out),
        Command::Skeleton { data, engine, out } => {
            let output = commands::cmd_skeleton(&data, &engine.config()?, &out)?;
            let r = &output.report;
            println!(
                "{} edges after {} levels ({}), {} CI tests in {} ms",
                r.edges_final, r.totals.level, r.stop_reason, r.totals.ci_tests, r.wall_ms
            );
            Ok(())
        }
        Command::Orient { skeleton, sepsets, out } => {
            let g = commands::cmd_orient(&skeleton, &sepsets, &out)?;
            println!("{} directed, {} undirected", g.directed().len(), g.undirected().len());
            Ok(())
        }
        Command::Bench { spec, strategies, repeats, seed, alpha, workers, out } => {
            let params = BenchParams {
                cases: commands::parse_bench_spec(&spec)?,
                strategies: commands::parse_strategies(&strategies)?,
                repeats,
                seed,
                workers: resolve_workers(workers)?,
                alpha,
            };
            let rows = commands::cmd_bench(&params, &out)?;
            println!("{} rows written to {}", rows.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
