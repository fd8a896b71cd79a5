use std::process::ExitCode;

use clap::Parser;
use gesture_service::cli::{execute, serve, serve_config, Cli, Command};

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Serve { addr, buffer, tick_hz } => serve_config(&cli, *addr, *buffer, *tick_hz).and_then(|cfg| {
            tokio::runtime::Runtime::new()?.block_on(serve(cfg))
        }),
        _ => execute(&cli, &mut std::io::stdout().lock()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
