use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use symdyn_cli::commands;
use symdyn_cli::suite::{run_suite, Suite};
use symdyn_cli::{init_threads, CliError, RunReport, ScenarioConfig};
use symdyn_core::pipeline::BaselineCombo;

#[derive(Parser)]
#[command(name = "symdyn", version, about = "Symbolic dynamics models for MPPI control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed to run; repeat for several. Defaults to the config's seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit base models by iterative data collection.
    TrainBase {
        #[command(flatten)]
        common: Common,
    },
    /// Adapt a saved base to the configured disturbance.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        base: PathBuf,
        /// One of sr_nn, sr_sr, nn_nn, nn_sr.
        #[arg(long)]
        combo: String,
        /// Adaptation trajectories; overrides `adapt.budget`.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Success rate of a saved base on training and test start regions.
    EvalCoverage {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        base: PathBuf,
    },
    /// Plan-call latency of one or more saved models.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
    },
    /// Run a batch of experiments: sim2sim-quad, sim2sim-car, coverage or efficiency.
    Suite {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

fn setup(common: &Common) -> Result<(ScenarioConfig, Vec<u64>, PathBuf), CliError> {
    let cfg = ScenarioConfig::load(&common.config)?;
    let seeds = if common.seeds.is_empty() { cfg.file.seeds.clone() } else { common.seeds.clone() };
    let out = cfg.out_dir(common.out.as_deref())?;
    Ok((cfg, seeds, out))
}

fn run(cli: Cli) -> Result<(RunReport, PathBuf), CliError> {
    init_threads()?;
    match cli.command {
        Command::TrainBase { common } => {
            let (cfg, seeds, out) = setup(&common)?;
            Ok((commands::train_base(&cfg, &seeds, &out)?, out))
        }
        Command::Adapt { common, base, combo, budget } => {
            let combo: BaselineCombo = combo.parse().map_err(|e: symdyn_core::Error| CliError::Config(e.to_string()))?;
            let (cfg, seeds, out) = setup(&common)?;
            Ok((commands::adapt(&cfg, &base, combo, budget, &seeds, &out)?, out))
        }
        Command::EvalCoverage { common, base } => {
            let (cfg, seeds, out) = setup(&common)?;
            Ok((commands::eval_coverage(&cfg, &base, &seeds, &out)?, out))
        }
        Command::Bench { common, models } => {
            let (cfg, _, out) = setup(&common)?;
            Ok((commands::bench(&cfg, &models, &out)?, out))
        }
        Command::Suite { name, common } => {
            let suite = Suite::parse(&name)?;
            let (cfg, seeds, out) = setup(&common)?;
            Ok((run_suite(suite, &cfg, &seeds, &out)?, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli).and_then(|(report, out)| report.write(&out)) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
