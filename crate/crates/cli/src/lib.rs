//! Command-line front end for the occupancy forecasting pipeline.

pub mod commands;
pub mod config;
pub mod error;
pub mod shared;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use regraph_core::graph::Strategy;

use crate::commands::{analyze, build_graph, evaluate, predict, synth, train};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "regraph",
    version,
    about = "Regional graph forecasting of truck-parking occupancy"
)]
pub struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic site table and occupancy feed.
    Synth {
        /// Run config; only its `data.synthetic` section is used.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for sites.csv, records.csv and synth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the site graph and its decomposition.
    BuildGraph {
        /// Site table (sites.csv).
        #[arg(long)]
        sites: PathBuf,
        /// connected, random or regional.
        #[arg(long, value_parser = parse_strategy)]
        strategy: Strategy,
        /// Group count for the random strategy.
        #[arg(long)]
        regions: Option<usize>,
        /// Seed for the random strategy.
        #[arg(long)]
        seed: Option<u64>,
        /// Edge threshold in miles.
        #[arg(long)]
        threshold: Option<f64>,
        /// Run config whose `graph` section supplies defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Graph file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write a run directory.
    Train {
        /// Run config.
        #[arg(long)]
        config: PathBuf,
        /// Directory holding sites.csv and records.csv.
        #[arg(long)]
        data: PathBuf,
        /// Graph file from `build-graph`.
        #[arg(long)]
        graph: PathBuf,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Frozen inference with a checkpoint.
    Predict {
        /// Checkpoint file of a trained run.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Directory holding sites.csv and records.csv.
        #[arg(long)]
        data: PathBuf,
        /// Prediction CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Run config supplying the grid; defaults to the checkpoint's run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Restrict to windows inside these weeks.
        #[arg(long, value_delimiter = ',')]
        weeks: Vec<u32>,
    },
    /// Metrics, comparison table and overlap analysis over trained runs.
    Evaluate {
        /// Run directories written by `train`.
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        /// Report directory to create.
        #[arg(long)]
        out: PathBuf,
        /// Data directory, overriding the one recorded in each run.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Headline the squared-error readings of MAE and MAPE.
        #[arg(long = "literal-eq14")]
        literal: bool,
    },
    /// Degrees, degree monotonicity of the decomposition and overlap costs.
    AnalyzeGraph {
        /// Graph file from `build-graph`.
        #[arg(long)]
        graph: PathBuf,
        /// Write the analysis here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: regraph_core::Error| e.to_string())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { config, out } => synth::run(&config, &out),
        Command::BuildGraph {
            sites,
            strategy,
            regions,
            seed,
            threshold,
            config,
            out,
        } => build_graph::run(build_graph::BuildGraphArgs {
            sites: &sites,
            strategy,
            regions,
            seed,
            threshold,
            config: config.as_deref(),
            out: &out,
        }),
        Command::Train {
            config,
            data,
            graph,
            out,
        } => train::run(&config, &data, &graph, &out),
        Command::Predict {
            checkpoint,
            data,
            out,
            config,
            weeks,
        } => predict::run(&checkpoint, &data, &out, config.as_deref(), &weeks),
        Command::Evaluate {
            runs,
            out,
            data,
            literal,
        } => evaluate::run(evaluate::EvaluateArgs {
            runs: &runs,
            out: &out,
            data: data.as_deref(),
            literal,
        }),
        Command::AnalyzeGraph { graph, out } => analyze::run(&graph, out.as_deref()),
    }
}
