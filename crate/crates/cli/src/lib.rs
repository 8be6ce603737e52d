//! Library side of the `keepaug` binary, kept separate so commands are testable in-process.

pub mod args;
mod commands;
mod error;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

fn report(err: &CliError, json: bool) {
    let mut stderr = std::io::stderr().lock();
    if json {
        let line = serde_json::json!({
            "error": err.kind(),
            "message": err.to_string(),
            "exit_code": err.exit_code(),
        });
        let _ = writeln!(stderr, "{line}");
    } else {
        let _ = writeln!(stderr, "error: {err}");
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) if json => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            report(&CliError::usage(first.trim_start_matches("error: ")), true);
            return 2;
        }
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            report(&e, cli.json);
            e.exit_code()
        }
    }
}
