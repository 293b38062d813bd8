use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lowshot::experiment::{cmd_compare, cmd_eval, cmd_gen_data, cmd_train, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lowshot", version, about = "Base + one-shot MLR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train.csv and test.csv
    GenData(Common),
    /// Run phase 1 and phase 2, write checkpoints and traces
    Train(Common),
    /// Score a checkpoint, write report.json and curve CSVs
    Eval(Common),
    /// Train and score all eight methods, print the table
    Compare(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output_dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed, overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> lowshot::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> lowshot::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::GenData(c) => cmd_gen_data(&c.load()?, &mut stdout).map(drop),
        Command::Train(c) => cmd_train(&c.load()?, &mut stdout).map(drop),
        Command::Eval(c) => cmd_eval(&c.load()?, &mut stdout).map(drop),
        Command::Compare(c) => cmd_compare(&c.load()?, &mut stdout).map(drop),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
