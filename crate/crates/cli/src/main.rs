use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = nstclg_cli::Cli::parse();
    match nstclg_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(nstclg_cli::exit_code(e.class()))
        }
    }
}
