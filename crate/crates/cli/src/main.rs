//! Experiment front end over the simulation library: table generation, the
//! inversion and search algorithms, lowering verification, and gate
//! accounting. Reports go to standard output (or `--out`), diagnostics and
//! timing to standard error.
//!
//! Exit codes: 0 all runs passed, 1 at least one run missed its tolerance,
//! 2 for usage or configuration problems.

mod cli;
mod suite;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

fn main() -> ExitCode {
    let parsed = match cli::Cli::try_parse() {
        Ok(parsed) => parsed,
        Err(err) => {
            // help and version land on stdout with a zero exit
            let code = if err.use_stderr() { 2 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let started = Instant::now();
    let code = match suite::run(parsed.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    };
    eprintln!("duration_ms={}", started.elapsed().as_millis());
    code
}
