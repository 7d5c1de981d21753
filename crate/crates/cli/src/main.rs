use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use kennel_cli::{run, Cli, Exit};
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_env("KENNEL_LOG").unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    let result = run(cli, stdin.lock(), &mut stdout, &mut stderr);
    let _ = stdout.flush();
    match result {
        Ok(()) => ExitCode::from(Exit::Ok as u8),
        Err(e) => {
            let _ = writeln!(stderr, "kennel: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
