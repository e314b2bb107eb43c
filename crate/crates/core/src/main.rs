use std::process::ExitCode;

use clap::Parser;
use qtdma::cli::{execute, Cli};

fn main() -> anyhow::Result<ExitCode> {
    let ok = execute(Cli::parse())?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
