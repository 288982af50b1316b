use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pslinucb_bench::experiment::Summary;
use pslinucb_bench::output::mean_stderr;
use pslinucb_bench::{export_logs, run_experiment, run_sweep, BenchError, ExperimentConfig, Mode, Overrides};

#[derive(Parser)]
#[command(name = "pslinucb-bench", version, about = "Run piecewise-stationary bandit experiments from config files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic environment with disjoint payoffs.
    SynthDisjoint(Common),
    /// Synthetic environment with a shared coefficient.
    SynthHybrid(Common),
    /// Offline replay evaluation on a logged file.
    Replay(Common),
    /// Repeat the configured mode over the values in [sweep].
    Sweep(Common),
    /// Write each seed's synthetic trajectory as a replay log.
    ExportLog(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seeds` in the config.
    #[arg(long)]
    seeds: Option<u64>,
    /// Overrides `master_seed` in the config.
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seeds: self.seeds, master_seed: self.master_seed, jobs: self.jobs }
    }
}

fn report(summary: &Summary) {
    let metric = if summary.mode == Mode::Replay { "ctr" } else { "regret" };
    for (index, policy) in summary.policies.iter().enumerate() {
        let finals: Vec<f64> = summary.runs.iter().filter(|r| r.policy == index).filter_map(|r| r.metric).collect();
        if finals.is_empty() {
            println!("{:<24} {metric} n/a (no matched events)", policy.label);
            continue;
        }
        let (mean, se) = mean_stderr(&finals);
        println!("{:<24} {metric} {mean:.4} ± {se:.4} over {} seeds", policy.label, finals.len());
    }
}

fn run(command: Command) -> Result<(), BenchError> {
    let (mode, common) = match &command {
        Command::SynthDisjoint(c) => (Some(Mode::SynthDisjoint), c),
        Command::SynthHybrid(c) => (Some(Mode::SynthHybrid), c),
        Command::Replay(c) => (Some(Mode::Replay), c),
        Command::Sweep(c) | Command::ExportLog(c) => (None, c),
    };
    let cfg = ExperimentConfig::load(&common.config)?;
    match &command {
        Command::Sweep(_) => {
            for summary in run_sweep(&cfg, common.overrides(), &common.out)? {
                report(&summary);
            }
            println!("wrote {}", common.out.join("sweep.csv").display());
        }
        Command::ExportLog(_) => {
            for path in export_logs(&cfg, common.overrides(), &common.out)? {
                println!("wrote {}", path.display());
            }
        }
        _ => {
            report(&run_experiment(&cfg, mode, common.overrides(), &common.out)?);
            println!("wrote {}", common.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
