//! `flowseg`: segment the primary moving object in a video given its frames
//! and optical flow.

mod eval;
mod layout;
mod oracle;
mod segment;
mod settings;
mod synth;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "flowseg", version, about = "Foreground object segmentation from optical-flow chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment a video and write soft masks, binary masks and a run manifest.
    Segment(segment::SegmentArgs),
    /// Write a synthetic sequence with exact flow and ground truth.
    Synth(synth::SynthArgs),
    /// Score predicted masks against ground truth.
    Eval(eval::EvalArgs),
    /// Check the solver against dense reference matrices on a small instance.
    OracleCheck(oracle::OracleArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment(a) => segment::run(a).map(|_| true),
        Command::Synth(a) => synth::run(a).map(|_| true),
        Command::Eval(a) => eval::run(a).map(|_| true),
        Command::OracleCheck(a) => oracle::run(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
