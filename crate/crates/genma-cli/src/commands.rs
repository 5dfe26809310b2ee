//! Command implementations. Each command is a pure function of its inputs
//! and the seed: run twice with the same arguments, every output file is
//! byte-identical.

use std::fs;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use genma::attnviz::{render_ansi, render_html, AttentionMap, BandThresholds};
use genma::baselines::{svm_fit_with_history, svm_predict, tfidf_fit_transform, SvmBundle};
use genma::corpus::{self, Example, RawTweet, Sentiment};
use genma::metrics::eval_report;
use genma::models::{build_charcnn, build_genma, Architecture, Checkpoint, Model};
use genma::train::{fit, history_text};

use crate::config::{ModelKind, RunConfig};

/// Paths written by a training run.
pub struct TrainOutputs {
    pub model_path: PathBuf,
    pub history_path: PathBuf,
    pub report_path: PathBuf,
}

/// What a model file on disk contains, decided by its header line.
enum ModelFile {
    Checkpoint,
    Svm,
}

fn sniff_model_file(path: &Path) -> Result<ModelFile> {
    let file =
        File::open(path).with_context(|| format!("cannot read model file `{}`", path.display()))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .with_context(|| format!("cannot read model file `{}`", path.display()))?;
    match first.trim_end() {
        "GENMA-CKPT 1" => Ok(ModelFile::Checkpoint),
        "GENMA-SVM 1" => Ok(ModelFile::Svm),
        _ => bail!(
            "`{}` is neither a genma checkpoint nor an svm model file",
            path.display()
        ),
    }
}

fn normalized_texts(tweets: &[RawTweet]) -> Vec<String> {
    tweets
        .iter()
        .map(|t| corpus::normalize(&t.joined_text()))
        .collect()
}

/// Gold labels for every tweet; errors with the file and uid when one is
/// missing.
fn gold_labels(tweets: &[RawTweet], path: &Path) -> Result<Vec<usize>> {
    tweets
        .iter()
        .map(|t| {
            t.label.map(Sentiment::label_id).with_context(|| {
                format!(
                    "`{}`: tweet {} is unlabeled; this command needs gold labels",
                    path.display(),
                    t.uid
                )
            })
        })
        .collect()
}

fn neural_predictions(model: &Model, examples: &[Example]) -> Result<Vec<usize>> {
    examples
        .iter()
        .map(|ex| Ok(model.predict(ex)?.0))
        .collect()
}

fn svm_predictions(bundle: &SvmBundle, texts: &[String]) -> Result<Vec<usize>> {
    texts
        .iter()
        .map(|text| {
            let x = bundle.tfidf.transform(text);
            Ok(svm_predict(&bundle.svm, &x)?)
        })
        .collect()
}

/// Writes the evaluation artifacts shared by `train` and `eval`: the
/// `key=value` report file, plus the human-readable table on stdout.
fn write_report(gold: &[usize], pred: &[usize], out_dir: &Path) -> Result<PathBuf> {
    let report = eval_report(gold, pred)?;
    let path = out_dir.join("eval.txt");
    fs::write(&path, report.to_text())
        .with_context(|| format!("cannot write `{}`", path.display()))?;
    print!("{}", report.to_table());
    Ok(path)
}

/// Trains the configured model and writes the model file, the per-epoch
/// history, and an evaluation report on the validation data (the training
/// data when no validation path is configured).
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutputs> {
    let train_path = cfg
        .data
        .train
        .as_ref()
        .context("no training data: set data.train in the config or pass --data")?;
    let train_tweets = corpus::load_sentimix(train_path)?;
    let valid_tweets = match &cfg.data.valid {
        Some(path) => corpus::load_sentimix(path)?,
        None => train_tweets.clone(),
    };
    let valid_path = cfg.data.valid.as_deref().unwrap_or(train_path.as_path());
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create output directory `{}`", cfg.out.display()))?;

    match cfg.model {
        ModelKind::Svm => {
            let texts = normalized_texts(&train_tweets);
            let labels = gold_labels(&train_tweets, train_path)?;
            let (tfidf, x) = tfidf_fit_transform(&texts, cfg.hyper.min_token_len)?;
            let (svm, objective) =
                svm_fit_with_history(&x, &labels, cfg.hyper.lambda, cfg.hyper.epochs, cfg.seed)?;
            let bundle = SvmBundle { tfidf, svm };

            let model_path = cfg.out.join("model.svm");
            bundle.save(&model_path)?;
            let history_path = cfg.out.join("history.txt");
            let history: String = objective
                .iter()
                .enumerate()
                .map(|(i, obj)| format!("epoch={} objective={}\n", i + 1, obj))
                .collect();
            fs::write(&history_path, history)
                .with_context(|| format!("cannot write `{}`", history_path.display()))?;

            let val_texts = normalized_texts(&valid_tweets);
            let gold = gold_labels(&valid_tweets, valid_path)?;
            let pred = svm_predictions(&bundle, &val_texts)?;
            let report_path = write_report(&gold, &pred, &cfg.out)?;
            Ok(TrainOutputs {
                model_path,
                history_path,
                report_path,
            })
        }
        ModelKind::Genma | ModelKind::CharCnn => {
            let texts = normalized_texts(&train_tweets);
            let vocab = corpus::build_vocab(&texts)?;
            let spec = cfg.model_spec(vocab.size())?;
            let train_ex = corpus::examples_from_tweets(&train_tweets, &vocab, cfg.max_len)?;
            let valid_ex = corpus::examples_from_tweets(&valid_tweets, &vocab, cfg.max_len)?;

            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let model = match spec.architecture {
                Architecture::Genma => build_genma(&spec, &mut rng)?,
                Architecture::CharCnn => build_charcnn(&spec, &mut rng)?,
            };
            let (checkpoint, history) = fit(&model, &vocab, &train_ex, &valid_ex, &cfg.train_config())?;

            let model_path = cfg.out.join("model.ckpt");
            checkpoint.save(&model_path)?;
            let history_path = cfg.out.join("history.txt");
            fs::write(&history_path, history_text(&history))
                .with_context(|| format!("cannot write `{}`", history_path.display()))?;

            let best = checkpoint.to_model()?;
            let gold = gold_labels(&valid_tweets, valid_path)?;
            let pred = neural_predictions(&best, &valid_ex)?;
            let report_path = write_report(&gold, &pred, &cfg.out)?;
            Ok(TrainOutputs {
                model_path,
                history_path,
                report_path,
            })
        }
    }
}

/// Evaluates a saved model (neural checkpoint or svm bundle) on labeled
/// data: prints the report table and writes the `key=value` report file.
pub fn cmd_eval(model_file: &Path, data: &Path, out_dir: &Path) -> Result<PathBuf> {
    let tweets = corpus::load_sentimix(data)?;
    let gold = gold_labels(&tweets, data)?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory `{}`", out_dir.display()))?;
    let pred = match sniff_model_file(model_file)? {
        ModelFile::Checkpoint => {
            let checkpoint = Checkpoint::load(model_file)?;
            let model = checkpoint.to_model()?;
            let examples =
                corpus::examples_from_tweets(&tweets, &checkpoint.vocab, checkpoint.spec.max_len)?;
            neural_predictions(&model, &examples)?
        }
        ModelFile::Svm => {
            let bundle = SvmBundle::load(model_file)?;
            svm_predictions(&bundle, &normalized_texts(&tweets))?
        }
    };
    write_report(&gold, &pred, out_dir)
}

/// Predicts labels for (possibly unlabeled) data; returns one
/// `uid<TAB>label` line per tweet.
pub fn cmd_predict(model_file: &Path, data: &Path) -> Result<String> {
    let tweets = corpus::load_sentimix(data)?;
    let pred = match sniff_model_file(model_file)? {
        ModelFile::Checkpoint => {
            let checkpoint = Checkpoint::load(model_file)?;
            let model = checkpoint.to_model()?;
            let examples =
                corpus::examples_from_tweets(&tweets, &checkpoint.vocab, checkpoint.spec.max_len)?;
            neural_predictions(&model, &examples)?
        }
        ModelFile::Svm => {
            let bundle = SvmBundle::load(model_file)?;
            svm_predictions(&bundle, &normalized_texts(&tweets))?
        }
    };
    let mut out = String::new();
    for (tweet, label) in tweets.iter().zip(&pred) {
        let name = Sentiment::from_label_id(*label).expect("predictions are class ids");
        out.push_str(&format!("{}\t{}\n", tweet.uid, name.as_str()));
    }
    Ok(out)
}

/// Renders attention maps for every tweet in `data`: an HTML page and an
/// ANSI text rendering, both written under `out_dir`. Returns the ANSI text
/// for stdout.
pub fn cmd_attn(checkpoint_path: &Path, data: &Path, out_dir: &Path) -> Result<String> {
    match sniff_model_file(checkpoint_path)? {
        ModelFile::Checkpoint => {}
        ModelFile::Svm => bail!(
            "`{}` is an svm model; attention maps need a genma checkpoint",
            checkpoint_path.display()
        ),
    }
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    if checkpoint.spec.architecture != Architecture::Genma {
        bail!(
            "`{}` is a {} checkpoint; attention maps need the genma architecture",
            checkpoint_path.display(),
            checkpoint.spec.architecture.as_str()
        );
    }
    let model = checkpoint.to_model()?;
    let tweets = corpus::load_sentimix(data)?;
    let examples = corpus::examples_from_tweets(&tweets, &checkpoint.vocab, checkpoint.spec.max_len)?;

    let maps: Vec<AttentionMap> = examples
        .iter()
        .map(|ex| Ok(model.attention_of(ex)?))
        .collect::<Result<_>>()?;
    let bands = BandThresholds::default();
    let mut ansi = String::new();
    for (tweet, map) in tweets.iter().zip(&maps) {
        ansi.push_str(&format!("{}: {}\n", tweet.uid, render_ansi(map, &bands)?));
    }

    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory `{}`", out_dir.display()))?;
    render_html(&maps, &out_dir.join("attention.html"))?;
    fs::write(out_dir.join("attention.ansi"), &ansi)
        .with_context(|| format!("cannot write `{}`", out_dir.join("attention.ansi").display()))?;
    Ok(ansi)
}

/// Runs the layer gradient-check suite. Returns the one-line-per-layer
/// report and whether every check passed.
pub fn cmd_gradcheck(seed: u64, inject_fault: bool) -> Result<(String, bool)> {
    let checks = genma::layers::run_layer_checks(seed, inject_fault)?;
    let mut report = String::new();
    let mut all_pass = true;
    for check in &checks {
        all_pass &= check.pass;
        report.push_str(&format!(
            "{:<20} max_rel_error={:>12.3e}  {}\n",
            check.name,
            check.max_rel_error,
            if check.pass { "pass" } else { "FAIL" }
        ));
    }
    Ok((report, all_pass))
}
