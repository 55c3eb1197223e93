//! Simulated post-editing: `adaptmt-sim --config p.conf --document doc.tsv --ol on --out report.tsv`

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use adaptmt::checkpoint::open_project;
use adaptmt::files::{load_tsv_pairs, write_atomic};
use adaptmt::SystemClock;
use adaptmt_core::simulator::run_simulation;
use clap::{Parser, ValueEnum};

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Parser)]
#[command(about = "Replay a document with the reference as post-edit")]
struct Args {
    /// Project config file.
    #[arg(long)]
    config: PathBuf,
    /// `source<TAB>reference` per line.
    #[arg(long)]
    document: PathBuf,
    /// Online learning.
    #[arg(long, value_enum)]
    ol: Switch,
    /// Report destination.
    #[arg(long)]
    out: PathBuf,
}

fn run(args: &Args) -> adaptmt::Result<String> {
    let (session, _) = open_project(&args.config)?;
    let mut session = session.with_clock(Arc::new(SystemClock::new()));
    let doc = load_tsv_pairs(&args.document)?;
    let run = run_simulation(&mut session, &doc, matches!(args.ol, Switch::On))?;
    let report = run.report();
    write_atomic(&args.out, report.as_bytes())?;
    Ok(report.lines().last().unwrap_or_default().to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
