//! Project setup tools: synthetic corpora, baseline training, credentials.

use std::io::BufRead;
use std::path::PathBuf;
use std::process::ExitCode;

use adaptmt::checkpoint::save_model;
use adaptmt::files::{load_tsv_pairs, save_bpe, save_config, save_tsv_pairs};
use adaptmt::server::ApiUser;
use adaptmt_core::adaptation::ModelConfig;
use adaptmt_core::simulator::{generate, pretrain, CorpusSpec, PretrainSpec};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(about = "Online-adaptive MT project tools")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic terminology corpus as train.tsv and test.tsv.
    GenCorpus {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        train_size: usize,
        #[arg(long, default_value_t = 100)]
        test_size: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a baseline model and write a ready-to-serve project.
    Pretrain {
        /// `source<TAB>target` training pairs.
        #[arg(long)]
        train: PathBuf,
        /// Directory for `<project>.conf` and the model files.
        #[arg(long)]
        project_dir: PathBuf,
        #[arg(long)]
        project_id: String,
        #[arg(long, default_value = "en")]
        src_lang: String,
        #[arg(long, default_value = "fr")]
        tgt_lang: String,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 400)]
        merges: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Online learning rate written to the config.
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
    },
    /// Read a password from stdin and print a credentials line.
    HashPassword {
        #[arg(long)]
        user: String,
        /// Comma-separated project ids, or `*`.
        #[arg(long, default_value = "*")]
        projects: String,
    },
}

fn run(args: Args) -> adaptmt::Result<()> {
    match args.command {
        Command::GenCorpus {
            seed,
            train_size,
            test_size,
            out_dir,
        } => {
            let c = generate(&CorpusSpec {
                train_size,
                test_size,
                seed,
                ..Default::default()
            });
            save_tsv_pairs(&c.train, &out_dir.join("train.tsv"))?;
            save_tsv_pairs(&c.test, &out_dir.join("test.tsv"))?;
            eprintln!("wrote {} training and {} test pairs to {}", c.train.len(), c.test.len(), out_dir.display());
        }
        Command::Pretrain {
            train,
            project_dir,
            project_id,
            src_lang,
            tgt_lang,
            epochs,
            merges,
            seed,
            learning_rate,
        } => {
            let pairs = load_tsv_pairs(&train)?;
            let mut spec = PretrainSpec {
                num_merges: merges,
                seed,
                ..Default::default()
            };
            spec.train.epochs = epochs;
            let (pipeline, model, trace) = pretrain(&pairs, &spec)?;
            if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
                eprintln!("loss {first:.4} -> {last:.4} over {} epochs", trace.len());
            }
            let bpe_name = format!("{project_id}.bpe");
            let ckpt_name = format!("{project_id}.ckpt");
            save_bpe(&pipeline.bpe, &project_dir.join(&bpe_name))?;
            save_model(&model, &pipeline, &[], &project_dir.join(&ckpt_name))?;
            let mut config = ModelConfig::new(&project_id, &src_lang, &tgt_lang, &bpe_name, &ckpt_name);
            config.learning_rate = learning_rate;
            config.validate()?;
            let conf = project_dir.join(format!("{project_id}.conf"));
            save_config(&config, &conf)?;
            eprintln!("wrote {}", conf.display());
        }
        Command::HashPassword { user, projects } => {
            let mut password = String::new();
            std::io::stdin()
                .lock()
                .read_line(&mut password)
                .map_err(|source| adaptmt::Error::Io {
                    path: "<stdin>".into(),
                    source,
                })?;
            let password = password.trim_end_matches(['\r', '\n']);
            let projects: Vec<&str> = projects.split(',').collect();
            println!("{}", ApiUser::new(&user, password, &projects).to_line());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
