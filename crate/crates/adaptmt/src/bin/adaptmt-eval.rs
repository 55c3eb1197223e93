//! Corpus scoring: `adaptmt-eval --hyp mt.txt --ref post_edits.txt [--lowercase]`

use std::path::PathBuf;
use std::process::ExitCode;

use adaptmt::files::load_lines;
use adaptmt_core::metrics::{bleu, corpus_ter, lowercase};
use adaptmt_core::textpipe::Tokenizer;
use clap::Parser;

#[derive(Parser)]
#[command(about = "BLEU and TER of a hypothesis file against a reference file")]
struct Args {
    /// One hypothesis per line.
    #[arg(long)]
    hyp: PathBuf,
    /// One reference (or post-edit) per line.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Compare case-insensitively.
    #[arg(long)]
    lowercase: bool,
}

fn run(args: &Args) -> adaptmt::Result<String> {
    let t = Tokenizer::new();
    let prep = |lines: Vec<String>| -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| {
                let toks = t.tokenize(l);
                if args.lowercase {
                    lowercase(&toks)
                } else {
                    toks
                }
            })
            .collect()
    };
    let hyps = prep(load_lines(&args.hyp)?);
    let refs = prep(load_lines(&args.reference)?);
    let b = bleu(&hyps, &refs)?;
    let ter = corpus_ter(&hyps, &refs)?;
    Ok(format!("BLEU={b:.1} TER={ter:.3} segs={}", hyps.len()))
}

fn main() -> ExitCode {
    match run(&Args::parse()) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
