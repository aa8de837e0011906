use std::io::Write;
use std::process::ExitCode;

use anisokrr_cli::{execute, Cli};
use clap::Parser;

fn main() -> ExitCode {
    // sequential dense kernels keep results independent of the core count
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &outcome.out {
                Some(path) => std::fs::write(path, &outcome.text),
                None => std::io::stdout().write_all(outcome.text.as_bytes()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
