//! `riskadapt` command-line entry point.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use riskadapt::harness::ExperimentPlan;

use commands::{Context, ModelChoice};
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "riskadapt",
    version,
    about = "Risk-based adaptive training for entity-resolution matchers"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed overriding the config or plan seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the labeled candidate pairs, split them and cache their features.
    Prepare,
    /// Train the matcher on the training split, keeping the best validation epoch.
    Pretrain,
    /// Risk-based fine-tuning of the pre-trained matcher on the test workload.
    Finetune,
    /// Precision, recall and F1 on the test split.
    Eval {
        #[arg(long, value_enum, default_value = "finetuned")]
        model: ModelChoice,
    },
    /// Bounds, concentration checks and diagnostics.
    Theory {
        #[command(subcommand)]
        which: Theory,
    },
    /// Run a multi-seed experiment plan.
    Experiment {
        /// Plan file (TOML, or JSON with a `.json` extension).
        #[arg(long, conflicts_with = "standard")]
        plan: Option<PathBuf>,
        /// Built-in plan.
        #[arg(long, value_enum)]
        standard: Option<StandardPlan>,
    },
}

#[derive(Subcommand, Debug)]
enum Theory {
    /// Flip-guarantee bound for one or more supporter counts.
    Bounds {
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, value_delimiter = ',', default_value = "100,1000000")]
        n: Vec<u64>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        /// `fn` or `fp`.
        #[arg(long, default_value = "fn")]
        direction: String,
    },
    /// Monte-Carlo tail of μ − 2σ against its bounded-differences bound.
    Mcdiarmid {
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.3,0.5")]
        eps: Vec<f64>,
    },
    /// Rule activation frequencies of correct against mispredicted test pairs.
    Assumption1 {
        #[arg(long, value_enum, default_value = "pretrained")]
        model: ModelChoice,
    },
    /// ΔVaR and ΔC estimates for every mispredicted test pair.
    Deltas {
        #[arg(long, value_enum, default_value = "pretrained")]
        model: ModelChoice,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StandardPlan {
    SameSource,
    Misaligned,
    Robustness,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(cli.config.as_deref(), cli.out, cli.seed, cli.quiet)?;
    match cli.command {
        Command::Prepare => commands::prepare(&ctx),
        Command::Pretrain => commands::pretrain_cmd(&ctx),
        Command::Finetune => commands::finetune_cmd(&ctx),
        Command::Eval { model } => commands::eval_cmd(&ctx, model),
        Command::Theory { which } => match which {
            Theory::Bounds {
                m,
                n,
                delta,
                epsilon,
                direction,
            } => commands::theory_bounds(&ctx, m, &n, delta, epsilon, &direction),
            Theory::Mcdiarmid { m, samples, eps } => {
                commands::theory_mcdiarmid(&ctx, m, samples, &eps)
            }
            Theory::Assumption1 { model } => commands::theory_assumption1(&ctx, model),
            Theory::Deltas { model } => commands::theory_deltas(&ctx, model),
        },
        Command::Experiment { plan, standard } => {
            let plan = match (plan, standard) {
                (Some(p), _) => commands::load_plan(&p)?,
                (None, Some(StandardPlan::SameSource)) => ExperimentPlan::standard_same_source(),
                (None, Some(StandardPlan::Misaligned)) => ExperimentPlan::standard_misaligned(),
                (None, Some(StandardPlan::Robustness)) => ExperimentPlan::standard_robustness(),
                (None, None) => {
                    return Err(CliError::Usage(
                        "experiment needs --plan PATH or --standard NAME".into(),
                    ))
                }
            };
            commands::experiment_cmd(&ctx, plan)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
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
