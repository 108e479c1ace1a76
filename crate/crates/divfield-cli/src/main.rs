use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = divfield_cli::cli::Args::parse();
    match divfield_cli::cli::execute(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
