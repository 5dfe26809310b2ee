//! `genma` — character-level sentiment classification from the command
//! line: train, evaluate, predict, render attention maps, and gradient-check
//! the layer stack. Every command is deterministic under a fixed seed, and
//! every error surfaces as a single `error: …` line with exit code 1.

mod commands;
mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{ModelKind, RunConfig};

#[derive(Parser)]
#[command(
    name = "genma",
    version,
    about = "Character-level sentiment classification: train, evaluate, and inspect models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes the model file, training history, and a validation report
    Train(TrainArgs),
    /// Evaluate a saved model on labeled data
    Eval(EvalArgs),
    /// Predict labels for new data
    Predict(PredictArgs),
    /// Render a genma checkpoint's attention maps as HTML and ANSI text
    Attn(AttnArgs),
    /// Check every layer's analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run configuration; flags override file values
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Model family to train
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// Training corpus (SentiMix format)
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Validation corpus; defaults to the training corpus
    #[arg(long, value_name = "FILE")]
    valid: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Maximum tweet length in characters
    #[arg(long, value_name = "N")]
    max_len: Option<usize>,
    /// Training epochs
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
}

impl TrainArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(model) = self.model {
            cfg.model = model;
        }
        if let Some(data) = self.data {
            cfg.data.train = Some(data);
        }
        if let Some(valid) = self.valid {
            cfg.data.valid = Some(valid);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = self.out {
            cfg.out = out;
        }
        if let Some(max_len) = self.max_len {
            cfg.max_len = max_len;
        }
        if let Some(epochs) = self.epochs {
            cfg.hyper.epochs = epochs;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Saved model: a genma/charcnn checkpoint or an svm model file
    model_file: PathBuf,
    /// Labeled corpus (SentiMix format)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Output directory for the report file
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model: a genma/charcnn checkpoint or an svm model file
    model_file: PathBuf,
    /// Corpus to label (SentiMix format; labels optional)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
}

#[derive(Args)]
struct AttnArgs {
    /// Trained genma checkpoint
    checkpoint: PathBuf,
    /// Corpus to visualize (SentiMix format)
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Output directory for attention.html and attention.ansi
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, value_name = "N", default_value_t = 7)]
    seed: u64,
    /// Append a deliberately broken layer as a negative control
    #[arg(long)]
    inject_fault: bool,
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.into_config()?;
            let outputs = commands::cmd_train(&cfg)?;
            println!("model:   {}", outputs.model_path.display());
            println!("history: {}", outputs.history_path.display());
            println!("report:  {}", outputs.report_path.display());
            Ok(0)
        }
        Command::Eval(args) => {
            let path = commands::cmd_eval(&args.model_file, &args.data, &args.out)?;
            println!("report: {}", path.display());
            Ok(0)
        }
        Command::Predict(args) => {
            print!("{}", commands::cmd_predict(&args.model_file, &args.data)?);
            Ok(0)
        }
        Command::Attn(args) => {
            print!("{}", commands::cmd_attn(&args.checkpoint, &args.data, &args.out)?);
            Ok(0)
        }
        Command::Gradcheck(args) => {
            let (report, all_pass) = commands::cmd_gradcheck(args.seed, args.inject_fault)?;
            print!("{report}");
            if all_pass {
                Ok(0)
            } else {
                eprintln!("error: a gradient check exceeded tolerance");
                Ok(1)
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            // `{:#}` flattens the context chain into one line.
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
