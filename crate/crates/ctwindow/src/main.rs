use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use clap::Parser;
use ctwindow::cli::{run, Cli};
use ctwindow::Error;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json_errors;
    let result = catch_unwind(AssertUnwindSafe(|| run(cli)))
        .unwrap_or_else(|_| Err(Error::Internal("unexpected panic".into())));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                eprintln!("{}", e.to_json());
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.kind().exit_code())
        }
    }
}
