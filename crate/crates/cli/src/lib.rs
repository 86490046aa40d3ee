//! Front end of the `finsler` binary: argument handling, config files and
//! report rendering on top of `finsler-core`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use args::Cli;
use error::CliError;

/// Runs a parsed command line, writes its report and returns the exit code.
pub fn execute(cli: &Cli) -> i32 {
    let outcome = commands::run(&cli.command).and_then(|o| {
        report::write_output(&o.text, o.out.as_deref())?;
        Ok::<_, CliError>(o)
    });
    match outcome {
        Ok(o) => {
            eprintln!("{}", o.summary);
            o.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
