use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lexlink_cli::pipeline;
use lexlink_cli::{PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(
    name = "lexlink",
    about = "Link prediction on typed weighted lexical-semantic graphs: \
             biased walks, skip-gram embeddings, per-relation random forests",
    version
)]
struct Cli {
    /// Pipeline configuration file
    #[arg(long, global = true, default_value = "lexlink.toml")]
    config: PathBuf,

    /// Override the global seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the worker count (1 = deterministic reference mode)
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic planted-relation benchmark graph
    Synth,
    /// Parse and validate the input graph files
    Ingest,
    /// Filter by node type, relation type, and edge weight
    Subgraph,
    /// Generate second-order biased random walks
    Walk,
    /// Train skip-gram embeddings from the walk corpus
    Embed,
    /// Build the labeled edge dataset and train/test split
    Dataset,
    /// Fit one random forest per predictable relation
    Train,
    /// Evaluate the models and write the metrics report
    Eval,
    /// Sweep n_estimators and record validation accuracy
    Sweep,
    /// Print the probability of each relation from one node to another
    Query { source: String, target: String },
    /// Run ingest through eval in order
    Run,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers.max(1);
    }

    match &cli.command {
        Command::Synth => pipeline::cmd_synth(&cfg),
        Command::Ingest => pipeline::cmd_ingest(&cfg),
        Command::Subgraph => pipeline::cmd_subgraph(&cfg),
        Command::Walk => pipeline::cmd_walk(&cfg),
        Command::Embed => pipeline::cmd_embed(&cfg),
        Command::Dataset => pipeline::cmd_dataset(&cfg),
        Command::Train => pipeline::cmd_train(&cfg),
        Command::Eval => pipeline::cmd_eval(&cfg),
        Command::Sweep => pipeline::cmd_sweep(&cfg),
        Command::Query { source, target } => {
            let pairs = pipeline::cmd_query(&cfg, source, target)?;
            for (rel, proba) in pairs {
                println!("{rel}\t{proba}");
            }
            Ok(())
        }
        Command::Run => pipeline::run_all(&cfg),
    }
}
