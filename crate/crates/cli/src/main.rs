use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hetgp_cli::{run_experiment, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hetgp", version, about = "Heteroscedastic GP tracking experiment")]
struct Cli {
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment and write its CSV artifacts.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the configuration.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Report every problem in a configuration without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let threads = cli.threads;
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(CliError::Parse(format!("cannot start {n} threads: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?.validate()?;
            println!("{}: ok", config.display());
            Ok(())
        }
        Command::Run { config, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let report = run_experiment(&cfg)?;
            if let Some(ess) = report.effective_sample_size {
                println!("effective sample size: {ess:.3}");
            }
            println!("{:<12} {:>12} {:>10} {:>10}", "controller", "cost", "violations", "infeasible");
            for e in &report.episodes {
                println!(
                    "{:<12} {:>12.1} {:>10} {:>10}",
                    e.name, e.summary.cost, e.summary.violations, e.summary.infeasible_steps
                );
            }
            println!("artifacts in {}", report.output_dir.display());
            Ok(())
        }
    }
}
