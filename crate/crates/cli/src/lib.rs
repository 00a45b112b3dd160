//! Command-line front end: configuration, experiment orchestration and data files.

pub mod commands;
pub mod config;
pub mod output;
pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use freqbin::Error;

pub use commands::{execute, Cli, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Process exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_invariant_violation() {
        EXIT_INVARIANT
    } else if matches!(err, Error::Config(_) | Error::InvalidParameter(_) | Error::Io(_)) {
        EXIT_USAGE
    } else {
        EXIT_NUMERICAL
    }
}

/// Parse `args`, run, print the report and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for line in &outcome.report {
                let _ = writeln!(out, "{line}");
            }
            for path in &outcome.files {
                let _ = writeln!(out, "wrote {}", path.display());
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::InvalidParameter("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::FitFailed("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::AllFlagged), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::InvalidState("x".into())), EXIT_INVARIANT);
        assert_eq!(exit_code(&Error::EnvelopeMismatch { captured: 0.5, emitted: 1.0 }), EXIT_INVARIANT);
    }

    #[test]
    fn help_is_not_an_error() {
        assert_eq!(main_with_args(["freqbin-lab", "--help"]), EXIT_OK);
        assert_eq!(main_with_args(["freqbin-lab"]), EXIT_USAGE);
    }
}
