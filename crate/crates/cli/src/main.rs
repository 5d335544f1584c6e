//! `jamiton`: stability bands, jamiton profiles, fundamental diagrams,
//! ring-road simulations and loop-detector overlays from the command line.
//!
//! Exit status: 0 on success, 2 when the model or a parameter fails
//! validation, 1 on a runtime error, 64 on a usage error.

mod commands;
mod config;
mod output;

use std::path::Path;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use commands::Cli;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("JAMITON_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("JAMITON_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!();
            eprintln!("{}", Cli::command().render_help());
            return ExitCode::from(64);
        }
    };
    match init_threads().and_then(|_| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
