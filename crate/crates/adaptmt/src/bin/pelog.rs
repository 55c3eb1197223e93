//! Effort reports from post-editing logs: `pelog report log.xml --segments segments.tsv`

use std::path::PathBuf;
use std::process::ExitCode;

use adaptmt::files::read_text;
use adaptmt::pelog_xml::parse_log;
use adaptmt_core::pelog::{compute_effort, SegmentText};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(about = "Post-editing log tools")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tab-separated effort table for a log.
    Report {
        /// pelog XML file.
        log: PathBuf,
        /// `id<TAB>source<TAB>final target` per line.
        #[arg(long)]
        segments: PathBuf,
    },
}

fn segments(path: &PathBuf) -> adaptmt::Result<Vec<SegmentText>> {
    let mut out = Vec::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.splitn(3, '\t');
        match (f.next(), f.next(), f.next()) {
            (Some(id), Some(source), Some(target)) => out.push(SegmentText {
                id: id.into(),
                source: source.into(),
                target: target.into(),
            }),
            _ => {
                return Err(adaptmt::Error::Invalid(format!(
                    "{}:{}: expected `id<TAB>source<TAB>target`",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

fn run(args: Args) -> adaptmt::Result<String> {
    match args.command {
        Command::Report { log, segments: seg_path } => {
            let parsed = parse_log(&read_text(&log)?)?;
            for w in &parsed.warnings {
                eprintln!("warning: {w}");
            }
            let report = compute_effort(&parsed.events, &segments(&seg_path)?)?;
            Ok(report.to_tsv())
        }
    }
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
