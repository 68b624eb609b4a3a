use std::process::ExitCode;

use casimir_cli::{Cli, ConfigError};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match casimir_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<ConfigError>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
