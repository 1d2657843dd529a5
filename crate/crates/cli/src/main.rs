//! `sgcoal`: run, sweep and inspect smart-grid community simulations.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{exit_code_for, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot configure {jobs} worker threads: {e}");
            return ExitCode::from(config::EXIT_USAGE);
        }
    }
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Error chain joined with `: `, skipping causes already quoted by the
/// message before them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}
