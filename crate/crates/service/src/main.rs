use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use reqrec_service::cli::{run_recommend, run_report, run_serve, run_simulate, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let result = match &cli.command {
        Command::Recommend(args) => run_recommend(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Report(args) => run_report(args),
        Command::Serve(args) => tokio::runtime::Runtime::new()
            .map_err(reqrec_core::Error::from)
            .and_then(|rt| rt.block_on(run_serve(args)))
            .map(|()| String::new()),
    };
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error[{}]: {err}", err.code());
            ExitCode::FAILURE
        }
    }
}
