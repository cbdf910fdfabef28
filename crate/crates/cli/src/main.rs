use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = symtp_cli::Args::parse();
    match symtp_cli::run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
