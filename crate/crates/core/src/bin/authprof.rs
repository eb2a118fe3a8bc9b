use std::process::ExitCode;

use clap::Parser;

use authprof::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();

    if let Ok(threads) = std::env::var("PROFILER_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => authprof::par::init_threads(n),
            _ => {
                eprintln!("error: PROFILER_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(1);
            }
        }
    }

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, flags) = cli.command.split();
    let cfg = match flags.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run(command, &cfg) {
        Ok(outcome) if outcome.skipped > 0 => {
            eprintln!("error: {} input file(s) skipped", outcome.skipped);
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
