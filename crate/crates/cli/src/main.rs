// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use strata_walk_cli::{run, Cli, EXIT_VALIDATION};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match run(&cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(p) = &e.payload {
                eprintln!("{}", serde_json::to_string_pretty(p).unwrap_or_default());
            }
            ExitCode::from(e.code)
        }
    }
}
