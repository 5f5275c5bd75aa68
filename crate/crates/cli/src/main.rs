mod args;
mod commands;
mod table;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

/// Exit status for malformed command lines.
const EXIT_USAGE: u8 = 1;
/// Exit status for data and computation failures.
const EXIT_DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(msg) = configure_workers() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(commands::Failure::Data(err)) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var("AEDR_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("AEDR_WORKERS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
