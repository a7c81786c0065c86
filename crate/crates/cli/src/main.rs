use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kklab_cli::{execute, CliError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "kklab", version, about = "Numerical lab for the Källén–Kröner iteration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iteration and write the trace
    Run(Common),
    /// Fit the error decay rate per norm order
    Decay(Common),
    /// Measure the constants of the remainder bound classes
    RemainderAudit(Common),
    /// Propagate the constant ledger and print the threshold
    Ledger(Common),
    /// Compare decay with and without the self-interaction term
    R5Demo(Common),
    /// Decay fits over a list of λℓ values at fixed ℓ
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write SVG plots
    #[arg(long)]
    plot: bool,
    /// Output directory (default ./out)
    #[arg(long = "output_dir", alias = "output-dir")]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (experiment, common) = match cli.command {
        Command::Run(c) => (Experiment::Run, c),
        Command::Decay(c) => (Experiment::Decay, c),
        Command::RemainderAudit(c) => (Experiment::RemainderAudit, c),
        Command::Ledger(c) => (Experiment::Ledger, c),
        Command::R5Demo(c) => (Experiment::R5Demo, c),
        Command::Sweep(c) => (Experiment::Sweep, c),
    };
    match run(experiment, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kklab {experiment}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(experiment: Experiment, common: Common) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref(), &common.set)?;
    if let Some(dir) = common.output_dir {
        cfg.output_dir = dir;
    }
    cfg.plot |= common.plot;
    let outcome = execute(experiment, &cfg);
    match outcome {
        Ok(o) => {
            print!("{}", o.summary);
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Err(e) => Err(e),
    }
}
