//! Library surface of the command-line tool, exposed so integration tests
//! can drive the exact command implementations.

pub mod args;
pub mod commands;

use nstclg::error::{ErrorClass, Result};

pub use args::{Cli, Command};

/// Dispatches a parsed invocation.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // Ignore the error if a global pool already exists (tests call in).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Predict(a) => commands::cmd_predict(a),
        Command::Diagnose(a) => commands::cmd_diagnose(a),
        Command::Study(a) => commands::cmd_study(a),
    }
}

/// Process exit code for a failure class: config 2, data 3, numerical 4.
pub fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}
