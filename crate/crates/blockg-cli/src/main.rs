use std::process::ExitCode;

use blockg_cli::args::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match blockg_cli::run(&cli) {
        Ok(dir) => {
            eprintln!("wrote outputs to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
