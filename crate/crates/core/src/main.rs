use std::process::ExitCode;

use anyhow::Context;
use clap::error::ErrorKind;
use clap::Parser;
use sarfield::cli::{dispatch, Cli, Outcome};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors count as domain errors; exit 2 is reserved for failed checks
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    let outcome = dispatch(&cli.command, &mut lock).context("command failed")?;
    match &outcome {
        Outcome::Done => {}
        Outcome::Unsupported(notice) => eprintln!("{notice}"),
        Outcome::ChecksFailed(failures) => {
            for f in failures {
                eprintln!("check failed: {f}");
            }
        }
    }
    Ok(ExitCode::from(outcome.exit_code()))
}
