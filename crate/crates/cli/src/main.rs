use std::process::ExitCode;

use clap::Parser;
use minerdyn_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("minerdyn: {e}");
            e.into()
        }
    }
}
