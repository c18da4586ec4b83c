use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    ExitCode::from(congested_flow_cli::run(congested_flow_cli::Cli::parse()))
}
