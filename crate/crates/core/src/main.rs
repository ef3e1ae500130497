use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use batchrl::config::Config;
use batchrl::error::{Error, Result};
use batchrl::pipeline;
use batchrl::plants::PlantKind;
use batchrl::plots::emit_plot_data;

#[derive(Parser)]
#[command(name = "batchrl", version, about = "Batch-to-batch policy-gradient \
optimization of uncertain batch processes, with an NMPC baseline")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration file; omit for the built-in CS1 defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory to create (must be absent or empty).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Episode-count override for evaluation commands.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Worker threads for parallel rollouts (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy on the approximate model and checkpoint it.
    TrainOffline,
    /// Freeze early layers of an offline checkpoint and adapt it on the
    /// true plant.
    AdaptOnline {
        /// Offline checkpoint; defaults to b2b.offline_checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Offline training, transfer freeze, online adaptation, and a final
    /// Monte-Carlo evaluation in one run.
    RunPipeline,
    /// Monte-Carlo evaluation of a fixed checkpoint on the configured plant.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Closed-loop shrinking-horizon NMPC evaluation (smooth plants only).
    NmpcEval {
        /// Plant override, e.g. cs1 or cs2.
        #[arg(long)]
        plant: Option<String>,
        /// Multistart count override.
        #[arg(long)]
        multistarts: Option<usize>,
    },
    /// Distill plot-ready CSVs out of a completed run directory.
    EmitPlots {
        /// Completed run directory.
        #[arg(long)]
        run: PathBuf,
        /// Completed nmpc-eval run for RL-vs-NMPC overlays.
        #[arg(long)]
        nmpc: Option<PathBuf>,
    },
}

fn load_config(args: &GlobalArgs) -> Result<Config> {
    let mut config = match &args.config {
        Some(path) => Config::parse_file(path)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(episodes) = args.episodes {
        config.eval.episodes = episodes;
        config.validate()?;
    }
    Ok(config)
}

fn out_dir(args: &GlobalArgs, command: &str) -> PathBuf {
    args.out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{command}")))
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::config(format!("--threads: {e}")))?;
    }
    let summary = match &cli.command {
        Command::TrainOffline => {
            let config = load_config(&cli.global)?;
            let out = out_dir(&cli.global, "train-offline");
            pipeline::cmd_train_offline(&config, &out)?
        }
        Command::AdaptOnline { checkpoint } => {
            let config = load_config(&cli.global)?;
            let out = out_dir(&cli.global, "adapt-online");
            pipeline::cmd_adapt_online(&config, checkpoint.as_deref(), &out)?
        }
        Command::RunPipeline => {
            let config = load_config(&cli.global)?;
            let out = out_dir(&cli.global, "run-pipeline");
            pipeline::cmd_run_pipeline(&config, &out)?
        }
        Command::Evaluate { checkpoint } => {
            let config = load_config(&cli.global)?;
            let out = out_dir(&cli.global, "evaluate");
            pipeline::cmd_evaluate(&config, checkpoint, &out)?
        }
        Command::NmpcEval {
            plant,
            multistarts,
        } => {
            let mut config = load_config(&cli.global)?;
            if let Some(name) = plant {
                config.plant = PlantKind::parse(name)?;
                config.intervals = config.plant.default_intervals();
                config.validate()?;
            }
            if let Some(n) = multistarts {
                config.nmpc.multistarts = *n;
                config.validate()?;
            }
            let out = out_dir(&cli.global, "nmpc-eval");
            pipeline::cmd_nmpc_eval(&config, &out)?
        }
        Command::EmitPlots { run, nmpc } => {
            let out = cli
                .global
                .out
                .clone()
                .unwrap_or_else(|| run.join("plots"));
            emit_plot_data(run, nmpc.as_deref(), &out)?;
            serde_json::json!({
                "command": "emit-plots",
                "run": run.display().to_string(),
                "out": out.display().to_string(),
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
