//! `ahcs`: spectra, coherent states, verification suites and period
//! inversion from the command line.
//!
//! Exit status is 0 on success, 1 for invalid input, 2 when a numerical step
//! or a verification check fails, and 3 for I/O errors.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match config::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ahcs: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
