//! Translation server: `adaptmt-server --bind 127.0.0.1:8080 --config-root projects --credentials users.txt`

use std::path::PathBuf;
use std::process::ExitCode;

use adaptmt::server::{serve, Credentials, Registry, CONFIG_ROOT_ENV};
use clap::Parser;

#[derive(Parser)]
#[command(about = "HTTP/JSON translation server with online adaptation")]
struct Args {
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: String,
    /// Directory holding `<project_id>.conf` files.
    #[arg(long, env = CONFIG_ROOT_ENV)]
    config_root: PathBuf,
    /// Credential file (see `adaptmt hash-password`).
    #[arg(long)]
    credentials: PathBuf,
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let credentials = match Credentials::load(&args.credentials) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let handle = match serve(&args.bind, Registry::new(&args.config_root), credentials).await {
        Ok(h) => h,
        Err(e) => {
            eprintln!("error: cannot start server: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("listening on http://{}", handle.addr);
    let _ = tokio::signal::ctrl_c().await;
    eprintln!("shutting down");
    match handle.shutdown().await {
        Ok(n) => {
            eprintln!("wrote {n} checkpoint(s)");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error during shutdown: {e}");
            ExitCode::FAILURE
        }
    }
}
