use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use radiomap::pipeline::{init_config, run_pipeline, run_stage, PipelineConfig, Stage};

#[derive(Parser)]
#[command(name = "radiomap", version, about = "Radio map reconstruction from unlabeled RSS sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed_sim: Option<u64>,
    #[arg(long)]
    seed_coarse: Option<u64>,
    #[arg(long)]
    seed_fine: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a default environment and config into a directory.
    InitConfig {
        dir: PathBuf,
        /// Seed for the AP position jitter.
        #[arg(long, default_value_t = 0)]
        layout_seed: u64,
    },
    /// Run every stage, or only the one given by --stage.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        stage: Option<Stage>,
    },
    Simulate(Common),
    InferRegions(Common),
    InferLocations(Common),
    BuildMap(Common),
    Localize(Common),
    Evaluate(Common),
}

fn load(common: &Common) -> radiomap::Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        config.output = out.clone();
    }
    if let Some(s) = common.seed_sim {
        config.seeds.simulation = s;
    }
    if let Some(s) = common.seed_coarse {
        config.seeds.coarse = s;
    }
    if let Some(s) = common.seed_fine {
        config.seeds.fine = s;
    }
    Ok(config)
}

fn stage_only(common: &Common, stage: Stage) -> radiomap::Result<()> {
    run_stage(&load(common)?, stage)
}

fn run(cli: Cli) -> radiomap::Result<()> {
    match cli.command {
        Command::InitConfig { dir, layout_seed } => {
            let path = init_config(&dir, layout_seed)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Run { common, stage: Some(stage) } => stage_only(&common, stage),
        Command::Run { common, stage: None } => {
            let config = load(&common)?;
            let mut report = serde_json::to_value(run_pipeline(&config)?)?;
            if let Some(obj) = report.as_object_mut() {
                obj.remove("cdf");
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Simulate(c) => stage_only(&c, Stage::Simulate),
        Command::InferRegions(c) => stage_only(&c, Stage::InferRegions),
        Command::InferLocations(c) => stage_only(&c, Stage::InferLocations),
        Command::BuildMap(c) => stage_only(&c, Stage::BuildMap),
        Command::Localize(c) => stage_only(&c, Stage::Localize),
        Command::Evaluate(c) => stage_only(&c, Stage::Evaluate),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
