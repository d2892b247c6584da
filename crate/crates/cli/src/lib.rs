//! Command-line pipeline for the `kcrf` crate. Each stage persists its
//! artifact so later stages, and reruns, can pick it up from disk.

pub mod commands;
pub mod config;
pub mod error;

use clap::{Parser, Subcommand};

use config::{Flags, PipelineConfig};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "kcrf", version, about = "Knowledge-based CRF for complementary entity recognition")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Train a basic or primitive model on labeled data
    Pretrain,
    /// Select low-entropy primitive features into an initial knowledge base
    Select,
    /// Train a knowledge-feature model from a knowledge base
    Train,
    /// Grow a knowledge base over unlabeled sentences
    Expand,
    /// Tag sentences with a model
    Predict,
    /// Score predictions against gold labels
    Eval,
    /// Train and compare all four systems
    Experiment,
    /// Write a synthetic train/unlabeled/test corpus
    Synth,
}

pub fn run(command: Command, flags: &Flags) -> CliResult<String> {
    let cfg = PipelineConfig::resolve(flags)?;
    match command {
        Command::Pretrain => commands::pretrain(&cfg),
        Command::Select => commands::select(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Expand => commands::expand_cmd(&cfg),
        Command::Predict => commands::predict_cmd(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Experiment => commands::experiment(&cfg),
        Command::Synth => commands::synth(&cfg),
    }
}
