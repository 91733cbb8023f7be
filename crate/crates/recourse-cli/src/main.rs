//! Experiment harness: train the classifier, build actionability graphs,
//! generate and evaluate recourse plans, sweep trade-off weights and plan
//! sizes, and benchmark the selectors. Every command emits CSV files.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "recourse",
    about = "Diverse recourse plan generation for binary classifiers over tabular data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the MLP classifier and write a model file plus an
    /// accuracy/AUC report.
    Train {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate the 2-D synthetic dataset as a CSV with its schema.
    Synth {
        #[command(flatten)]
        overrides: Overrides,
        /// Number of samples.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Build the actionability graph over the training split and save it.
    Graph {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate recourse plans for unfavorably-predicted test instances
    /// and write per-instance metrics.
    Plan {
        #[command(flatten)]
        overrides: Overrides,
        /// Dump the screening iterate trace of the first instance
        /// (quad-br / quad-da only) to this CSV path.
        #[arg(long)]
        dump_trace: Option<std::path::PathBuf>,
    },
    /// Sweep the diversity/proximity weight and report aggregate metrics
    /// per weight.
    Pareto {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated weight grid.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Sweep the plan size K and report aggregate diversity metrics.
    #[command(name = "sweep-k")]
    SweepK {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated list of K values.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Time the selectors on synthetic candidate pools across sample
    /// sizes.
    Bench {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated candidate pool sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Replications per size.
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { overrides } => {
            let config = RunConfig::load(&overrides)?;
            commands::cmd_train(&config)
        }
        Command::Synth { overrides, n, seed } => {
            let config = RunConfig::load(&overrides)?;
            commands::cmd_synth(&config, n, seed)
        }
        Command::Graph { overrides } => {
            let config = RunConfig::load(&overrides)?;
            commands::cmd_graph(&config)
        }
        Command::Plan {
            overrides,
            dump_trace,
        } => {
            let config = RunConfig::load(&overrides)?;
            commands::cmd_plan(&config, dump_trace)
        }
        Command::Pareto { overrides, weights } => {
            let config = RunConfig::load(&overrides)?;
            let weights =
                weights.unwrap_or_else(|| (1..=10).map(|i| f64::from(i) / 10.0).collect());
            commands::cmd_pareto(&config, &weights)
        }
        Command::SweepK { overrides, ks } => {
            let config = RunConfig::load(&overrides)?;
            let ks = ks.unwrap_or_else(|| vec![2, 3, 4, 5, 6]);
            commands::cmd_sweep_k(&config, &ks)
        }
        Command::Bench {
            overrides,
            sizes,
            reps,
        } => {
            let config = RunConfig::load(&overrides)?;
            let sizes = sizes.unwrap_or_else(|| vec![100, 500, 1000, 2000, 5000]);
            commands::cmd_bench(&config, &sizes, reps)
        }
    }
}
