//! Loss, optimizer, and the training loop for the neural models: categorical
//! cross-entropy, bias-corrected Adam, and a seeded epoch/batch loop with
//! validation-driven early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CharVocabulary, Example};
use crate::error::{Error, Result};
use crate::metrics::macro_f1_from_labels;
use crate::models::{Checkpoint, Model};
use crate::tensor::{Tape, Tensor};

/// Mean categorical cross-entropy of a `[B×3]` probability matrix against
/// integer labels: `mean_i −ln(max(probs[i, labels[i]], 1e−12))`. The floor
/// keeps the loss finite on degenerate rows; it is far below any tolerance
/// used in tests.
pub fn cross_entropy(tape: &Tape, probs: &Tensor, labels: &[usize]) -> Result<Tensor> {
    tape.cross_entropy(probs, labels)
}

/// Adam optimizer state: one first/second moment buffer per parameter
/// (aligned with the model's canonical parameter order) and a shared step
/// counter. Defaults: β₁ = 0.9, β₂ = 0.999, ε = 1e−8, learning rate 0.0001.
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed steps; increases by exactly 1 per [`adam_step`].
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

/// Default learning rate for the neural models.
pub const DEFAULT_LR: f64 = 0.0001;

impl AdamState {
    /// Fresh state with zeroed moments mirroring each parameter's shape.
    pub fn new(params: &[(String, Tensor)], lr: f64) -> AdamState {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
            v: params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect(),
        }
    }
}

/// One bias-corrected Adam update, applied in place:
/// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g²`,
/// `θ ← θ − lr · (m/(1−β₁ᵗ)) / (√(v/(1−β₂ᵗ)) + ε)`.
/// Gradients are zeroed afterwards. Fails — without touching any state —
/// when a parameter has no gradient, naming that parameter.
pub fn adam_step(params: &[(String, Tensor)], state: &mut AdamState) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::InvalidArgument(format!(
            "adam_step: {} parameters but state was built for {}",
            params.len(),
            state.m.len()
        )));
    }
    let mut grads = Vec::with_capacity(params.len());
    for (name, tensor) in params {
        let grad = tensor
            .grad()
            .ok_or_else(|| Error::MissingGradient(name.clone()))?;
        grads.push(grad);
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    for (idx, (_, tensor)) in params.iter().enumerate() {
        let mut data = tensor.data_mut();
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for (j, &g) in grads[idx].iter().enumerate() {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            data[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        drop(data);
        tensor.clear_grad();
    }
    Ok(())
}

/// Training-loop configuration. Defaults: batch size 10, 10 epochs,
/// learning rate 0.0001, early-stopping patience 3 (on validation macro-F1),
/// shuffling on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lr: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            epochs: 10,
            seed: 0,
            lr: DEFAULT_LR,
            patience: 3,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be ≥ 1".to_string()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be ≥ 1".to_string()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be ≥ 1".to_string()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// One epoch of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean training loss over all examples of the epoch.
    pub train_loss: f64,
    /// Macro-F1 on the validation set; absent when no validation set.
    pub val_macro_f1: Option<f64>,
}

impl EpochRecord {
    /// Line-delimited structured text form, e.g.
    /// `epoch=3 train_loss=1.0542 val_macro_f1=0.41` (or `…=na`).
    pub fn to_line(&self) -> String {
        match self.val_macro_f1 {
            Some(f1) => format!(
                "epoch={} train_loss={} val_macro_f1={}",
                self.epoch, self.train_loss, f1
            ),
            None => format!(
                "epoch={} train_loss={} val_macro_f1=na",
                self.epoch, self.train_loss
            ),
        }
    }
}

/// Serializes a history as one record per line (with trailing newline).
pub fn history_text(history: &[EpochRecord]) -> String {
    let mut out = String::new();
    for record in history {
        out.push_str(&record.to_line());
        out.push('\n');
    }
    out
}

fn labels_of(what: &str, examples: &[Example]) -> Result<Vec<usize>> {
    examples
        .iter()
        .map(|e| {
            e.label_id.ok_or_else(|| {
                Error::InvalidArgument(format!("{what} example `{}` has no label", e.uid))
            })
        })
        .collect()
}

/// Trains `model` in place and returns the best checkpoint plus the per-epoch
/// history.
///
/// Each epoch: seeded shuffle (when enabled), split into `batch_size` groups
/// keeping the last partial batch, and for each batch run forward → loss →
/// backward → Adam on a fresh tape. After each epoch the validation macro-F1
/// is computed from predictions only — validation labels never feed a
/// gradient. The checkpoint snapshots the epoch with the best validation
/// score (the last epoch when `valid` is empty, which also disables early
/// stopping); everything is deterministic under a fixed seed.
pub fn fit(
    model: &Model,
    vocab: &CharVocabulary,
    train: &[Example],
    valid: &[Example],
    config: &TrainConfig,
) -> Result<(Checkpoint, Vec<EpochRecord>)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "fit: training set is empty".to_string(),
        ));
    }
    let train_labels = labels_of("training", train)?;
    let valid_labels = labels_of("validation", valid)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(model.parameters(), config.lr);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history: Vec<EpochRecord> = Vec::new();
    let mut loss_history: Vec<f64> = Vec::new();
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut since_improvement = 0usize;

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let tape = Tape::new();
            let mut rows = Vec::with_capacity(batch.len());
            let mut labels = Vec::with_capacity(batch.len());
            for &i in batch {
                let pass = model.forward(&tape, &train[i].char_ids, true, &mut rng)?;
                rows.push(pass.probs);
                labels.push(train_labels[i]);
            }
            let probs = tape.concat_rows(&rows)?;
            let loss = cross_entropy(&tape, &probs, &labels)?;
            loss_sum += loss.item() * batch.len() as f64;
            tape.backward(&loss)?;
            adam_step(model.parameters(), &mut adam)?;
        }
        let train_loss = loss_sum / train.len() as f64;
        loss_history.push(train_loss);

        let val_macro_f1 = if valid.is_empty() {
            None
        } else {
            let mut pred = Vec::with_capacity(valid.len());
            for example in valid {
                pred.push(model.predict(example)?.0);
            }
            Some(macro_f1_from_labels(&valid_labels, &pred)?.1)
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_macro_f1,
        });

        if let Some(f1) = val_macro_f1 {
            let improved = best.as_ref().is_none_or(|(b, _)| f1 > *b);
            if improved {
                best = Some((
                    f1,
                    Checkpoint::from_model(model, vocab, config.seed, epoch, loss_history.clone()),
                ));
                since_improvement = 0;
            } else {
                since_improvement += 1;
                if since_improvement >= config.patience {
                    break;
                }
            }
        }
    }

    let checkpoint = match best {
        Some((_, ckpt)) => ckpt,
        None => Checkpoint::from_model(model, vocab, config.seed, history.len(), loss_history),
    };
    Ok((checkpoint, history))
}
