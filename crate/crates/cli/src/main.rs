mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Exit statuses.
pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;
pub const EXIT_MISMATCH: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug)]
pub enum Failure {
    Core(cbond_core::Error),
    Usage(String),
    Domain(String),
    Io(std::io::Error),
}

impl From<cbond_core::Error> for Failure {
    fn from(e: cbond_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        use cbond_core::Error as E;
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Domain(_) | Failure::Io(_) => EXIT_DOMAIN,
            Failure::Core(e) => match e {
                E::Mismatch(_) => EXIT_MISMATCH,
                E::Config(_) | E::Seed(_) => EXIT_USAGE,
                E::Bracket(_) | E::NoConvergence { .. } | E::PastingViolation(_) => EXIT_NUMERICAL,
                E::Domain(_) | E::ParamMismatch(_) => EXIT_DOMAIN,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(m) | Failure::Domain(m) => write!(f, "{m}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("CBOND_THREADS") {
        let n: usize = v.parse().map_err(|_| {
            Failure::Usage(format!(
                "CBOND_THREADS must be a positive integer (got '{v}')"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match init_threads().and_then(|_| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
