use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::error;

use conet_cli::{
    cmd_compare, cmd_evaluate, cmd_generate, cmd_lambda_sweep, cmd_reduce_study, cmd_sparsity_report, cmd_train,
    RunConfig,
};
use conet_core::evaluation::Partition;
use conet_core::Result;

#[derive(Parser)]
#[command(name = "conet", version, about = "Collaborative cross networks for cross-domain recommendation")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override one config key, e.g. `--set epochs=5`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (defaults to $CONET_OUTPUT_DIR, then `runs`).
    #[arg(short, long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartitionArg {
    Validation,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cross-domain dataset.
    Generate,
    /// Train one model.
    Train,
    /// Score a checkpoint on the configured split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        partition: PartitionArg,
    },
    /// Compare architectures on one shared split.
    Compare,
    /// SCoNet on reduced training sets against MLP on the full one.
    ReduceStudy,
    /// CoNet over a list of lasso weights.
    LambdaSweep,
    /// Zero-entry ratios of the transfer matrices.
    SparsityReport {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        history: Option<PathBuf>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve(&cli)?;
    match cli.command {
        Command::Generate => {
            let m = cmd_generate(&config)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Train => {
            let out = cmd_train(&config)?;
            println!("epochs run: {}", out.history.len());
            println!("{}", serde_json::to_string_pretty(&out.test.summary())?);
        }
        Command::Evaluate { checkpoint, partition } => {
            let partition = match partition {
                PartitionArg::Validation => Partition::Validation,
                PartitionArg::Test => Partition::Test,
            };
            let report = cmd_evaluate(&config, &checkpoint, partition)?;
            println!("{}", serde_json::to_string_pretty(&report.summary())?);
        }
        Command::Compare => {
            let out = cmd_compare(&config)?;
            print!("{}", out.report.to_table());
            println!();
            print!("{}", std::fs::read_to_string(config.output_dir.join("summary.txt"))?);
        }
        Command::ReduceStudy => print!("{}", cmd_reduce_study(&config)?.to_table()),
        Command::LambdaSweep => print!("{}", cmd_lambda_sweep(&config)?.to_table()),
        Command::SparsityReport { checkpoint, history } => {
            let report = cmd_sparsity_report(checkpoint.as_deref(), history.as_deref(), &config.output_dir)?;
            print!("{}", report.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
