use std::process::ExitCode;

use clap::Parser;
use gibrat::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.global.quiet {
        log::LevelFilter::Error
    } else if cli.global.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    // configured from flags only, never from the environment
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{} failed: {e}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
