use std::process::ExitCode;

use clap::Parser;
use icin::cli::{replay, run, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay { manifest, out } => replay(&manifest, &out),
        command => run(&command.into_config().expect("mode subcommand")),
    };
    match result {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("icin: {note}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("icin: error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
