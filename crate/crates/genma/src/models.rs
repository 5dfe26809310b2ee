//! Model assembly: the GenMA architecture (embed → two conv/pool stages →
//! BiLSTM → self-attention → dense → softmax) and the char-CNN baseline
//! (one-hot embed → three conv/pool stages → conv → dense → softmax), plus
//! prediction, attention extraction, and checkpoint serialization.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attnviz::AttentionMap;
use crate::corpus::{CharVocabulary, Example, PAD_ID};
use crate::error::{Error, Result};
use crate::layers::{
    attention_forward, bilstm_forward, conv1d_forward, dense_forward, embed, glorot, maxpool1d,
    BiLSTMLayer, Combine, Conv1DLayer, DenseLayer, EmbeddingLayer, LstmGates, MaxPool1DLayer,
    SelfAttentionLayer,
};
use crate::tensor::{Tape, Tensor};

/// The three sentiment classes are fixed across the crate.
pub const CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Genma,
    CharCnn,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Genma => "genma",
            Architecture::CharCnn => "charcnn",
        }
    }

    pub fn parse(s: &str) -> Option<Architecture> {
        match s {
            "genma" => Some(Architecture::Genma),
            "charcnn" => Some(Architecture::CharCnn),
            _ => None,
        }
    }
}

/// Hyperparameters fully describing a model's architecture. GenMA uses a
/// learned embedding and exactly two conv/pool stages before the BiLSTM; the
/// char-CNN baseline uses one-hot embeddings (dimension = vocabulary size)
/// and four conv layers with pooling after the first three.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub vocab_size: usize,
    pub max_len: usize,
    /// Learned embedding width (GenMA only; the char-CNN is one-hot).
    pub embedding_dim: usize,
    /// `(filters, kernel)` per conv layer, in order.
    pub conv: Vec<(usize, usize)>,
    pub pool: usize,
    pub lstm_hidden: usize,
    pub combine: Combine,
    pub dense: usize,
    pub dropout: f64,
}

impl ModelSpec {
    /// GenMA defaults: embedding 50, two conv layers of 32 filters × kernel 3,
    /// pool 3, BiLSTM hidden 100 (concatenated), dense 32 with dropout 0.5,
    /// max_len 280.
    pub fn genma(vocab_size: usize) -> ModelSpec {
        ModelSpec {
            architecture: Architecture::Genma,
            vocab_size,
            max_len: 280,
            embedding_dim: 50,
            conv: vec![(32, 3), (32, 3)],
            pool: 3,
            lstm_hidden: 100,
            combine: Combine::Concat,
            dense: 32,
            dropout: 0.5,
        }
    }

    /// Char-CNN defaults: one-hot embedding, four conv layers of 32 filters ×
    /// kernel 3 with pooling after the first three, dense 32 with dropout 0.5.
    pub fn charcnn(vocab_size: usize) -> ModelSpec {
        ModelSpec {
            architecture: Architecture::CharCnn,
            vocab_size,
            max_len: 280,
            embedding_dim: vocab_size,
            conv: vec![(32, 3); 4],
            pool: 3,
            lstm_hidden: 100,
            combine: Combine::Concat,
            dense: 32,
            dropout: 0.5,
        }
    }

    /// The conv/pool stage sequence between the embedding and the recurrent
    /// or dense head: GenMA pools after both conv layers, the char-CNN pools
    /// after the first three of its four.
    fn stages(&self) -> Vec<Stage> {
        let mut stages = Vec::new();
        let last = self.conv.len() - 1;
        for (i, &(_, kernel)) in self.conv.iter().enumerate() {
            stages.push(Stage::Conv { kernel });
            let pool_here = match self.architecture {
                Architecture::Genma => true,
                Architecture::CharCnn => i < last,
            };
            if pool_here {
                stages.push(Stage::Pool { size: self.pool });
            }
        }
        stages
    }

    /// Sequence length after each conv/pool stage, starting from `max_len`.
    /// Errors name the stage and the shape equation that failed.
    pub fn sequence_lengths(&self) -> Result<Vec<usize>> {
        let mut lengths = Vec::new();
        let mut len = self.max_len;
        let mut conv_no = 0;
        for stage in self.stages() {
            match stage {
                Stage::Conv { kernel } => {
                    conv_no += 1;
                    if len < kernel {
                        return Err(Error::Shape(format!(
                            "conv layer {}: input length {} < kernel {} \
                             (output length s = m − k + 1 must be ≥ 1)",
                            conv_no, len, kernel
                        )));
                    }
                    len = len - kernel + 1;
                }
                Stage::Pool { size } => {
                    if len < size {
                        return Err(Error::Shape(format!(
                            "pool after conv layer {}: input length {} < pool {} \
                             (output length d = floor(s / p) must be ≥ 1)",
                            conv_no, len, size
                        )));
                    }
                    len /= size;
                }
            }
            lengths.push(len);
        }
        Ok(lengths)
    }

    /// Width of the BiLSTM output rows / attention input.
    fn attention_width(&self) -> usize {
        match self.combine {
            Combine::Concat => 2 * self.lstm_hidden,
            Combine::Sum => self.lstm_hidden,
        }
    }

    /// Checks structural invariants and the whole shape chain.
    pub fn validate(&self) -> Result<()> {
        let expected_convs = match self.architecture {
            Architecture::Genma => 2,
            Architecture::CharCnn => 4,
        };
        if self.conv.len() != expected_convs {
            return Err(Error::InvalidArgument(format!(
                "{} requires exactly {} conv layers, spec has {}",
                self.architecture.as_str(),
                expected_convs,
                self.conv.len()
            )));
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidArgument(
                "vocab_size must be ≥ 2 (padding and unknown are reserved)".to_string(),
            ));
        }
        for (what, v) in [
            ("max_len", self.max_len),
            ("embedding_dim", self.embedding_dim),
            ("pool", self.pool),
            ("lstm_hidden", self.lstm_hidden),
            ("dense", self.dense),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{what} must be positive")));
            }
        }
        if self.conv.iter().any(|&(f, k)| f == 0 || k == 0) {
            return Err(Error::InvalidArgument(
                "conv filters and kernels must be positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        self.sequence_lengths()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Stage {
    Conv { kernel: usize },
    Pool { size: usize },
}

/// For each final pooled position, the inclusive interval of input character
/// indices that can influence it, derived by walking the conv/pool geometry
/// backwards (a pool window of `p` maps `[a,b]` to `[a·p, b·p+p−1]`, a conv
/// of kernel `k` maps `[a,b]` to `[a, b+k−1]`).
pub fn receptive_spans(spec: &ModelSpec) -> Result<Vec<(usize, usize)>> {
    let lengths = spec.sequence_lengths()?;
    let final_len = *lengths.last().expect("at least one stage");
    let stages = spec.stages();
    let spans = (0..final_len)
        .map(|p| {
            let (mut start, mut end) = (p, p);
            for stage in stages.iter().rev() {
                match stage {
                    Stage::Pool { size } => {
                        start *= size;
                        end = end * size + size - 1;
                    }
                    Stage::Conv { kernel } => {
                        end += kernel - 1;
                    }
                }
            }
            debug_assert!(end < spec.max_len);
            (start, end)
        })
        .collect();
    Ok(spans)
}

// ---------------------------------------------------------------------------
// Parameter plan
// ---------------------------------------------------------------------------

enum ParamInit {
    Glorot { fan_in: usize, fan_out: usize },
    Const(f64),
}

/// The canonical parameter list of a spec: names, shapes, and initialization,
/// in the fixed order used for seeding, checkpoints, and optimizer state.
fn parameter_plan(spec: &ModelSpec) -> Result<Vec<(String, Vec<usize>, ParamInit)>> {
    spec.validate()?;
    let mut plan: Vec<(String, Vec<usize>, ParamInit)> = Vec::new();
    let push_conv = |plan: &mut Vec<(String, Vec<usize>, ParamInit)>,
                         idx: usize,
                         in_channels: usize,
                         filters: usize,
                         kernel: usize| {
        plan.push((
            format!("conv{idx}.w"),
            vec![filters, kernel * in_channels],
            ParamInit::Glorot {
                fan_in: kernel * in_channels,
                fan_out: filters,
            },
        ));
        plan.push((format!("conv{idx}.b"), vec![filters], ParamInit::Const(0.0)));
    };

    match spec.architecture {
        Architecture::Genma => {
            let n = spec.vocab_size;
            let e = spec.embedding_dim;
            plan.push((
                "embed.table".to_string(),
                vec![n, e],
                ParamInit::Glorot { fan_in: n, fan_out: e },
            ));
            let mut channels = e;
            for (i, &(filters, kernel)) in spec.conv.iter().enumerate() {
                push_conv(&mut plan, i + 1, channels, filters, kernel);
                channels = filters;
            }
            let h = spec.lstm_hidden;
            let gate_in = h + channels;
            for dir in ["fw", "bw"] {
                for gate in ["i", "f", "o", "q"] {
                    plan.push((
                        format!("lstm.{dir}.w_{gate}"),
                        vec![h, gate_in],
                        ParamInit::Glorot { fan_in: gate_in, fan_out: h },
                    ));
                    // The forget gate opens at initialization so early cell
                    // state is not erased before training shapes it.
                    let bias = if gate == "f" { 1.0 } else { 0.0 };
                    plan.push((format!("lstm.{dir}.b_{gate}"), vec![h], ParamInit::Const(bias)));
                }
            }
            let width = spec.attention_width();
            plan.push((
                "attn.w_h".to_string(),
                vec![width],
                ParamInit::Glorot { fan_in: width, fan_out: 1 },
            ));
            plan.push(("attn.b_h".to_string(), vec![1], ParamInit::Const(0.0)));
            plan.push((
                "dense.w".to_string(),
                vec![spec.dense, width],
                ParamInit::Glorot { fan_in: width, fan_out: spec.dense },
            ));
            plan.push(("dense.b".to_string(), vec![spec.dense], ParamInit::Const(0.0)));
        }
        Architecture::CharCnn => {
            let mut channels = spec.vocab_size; // one-hot embedding: E = n
            for (i, &(filters, kernel)) in spec.conv.iter().enumerate() {
                push_conv(&mut plan, i + 1, channels, filters, kernel);
                channels = filters;
            }
            let final_len = *spec.sequence_lengths()?.last().expect("non-empty");
            let flat = final_len * channels;
            plan.push((
                "dense.w".to_string(),
                vec![spec.dense, flat],
                ParamInit::Glorot { fan_in: flat, fan_out: spec.dense },
            ));
            plan.push(("dense.b".to_string(), vec![spec.dense], ParamInit::Const(0.0)));
        }
    }
    // The class projection starts at zero in both architectures, so an
    // untrained model emits exactly the uniform distribution over classes.
    plan.push(("out.w".to_string(), vec![CLASSES, spec.dense], ParamInit::Const(0.0)));
    plan.push(("out.b".to_string(), vec![CLASSES], ParamInit::Const(0.0)));
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

enum Head {
    Genma {
        embedding: EmbeddingLayer,
        convs: Vec<Conv1DLayer>,
        pool: MaxPool1DLayer,
        lstm: BiLSTMLayer,
        attention: SelfAttentionLayer,
    },
    CharCnn {
        embedding: EmbeddingLayer,
        convs: Vec<Conv1DLayer>,
        pool: MaxPool1DLayer,
    },
}

/// An assembled model: the layer graph plus the flat named parameter list
/// (the layers hold handles to the same tensors, so optimizer updates through
/// [`Model::parameters`] are visible to the next forward pass).
pub struct Model {
    pub spec: ModelSpec,
    head: Head,
    dense: DenseLayer,
    out_w: Tensor,
    out_b: Tensor,
    params: Vec<(String, Tensor)>,
}

/// Output of one forward pass: class probabilities `[1×3]` and, for GenMA,
/// the attention weights `[1×T]` over pooled positions.
pub struct ForwardPass {
    pub probs: Tensor,
    pub attention: Option<Tensor>,
}

/// Builds a GenMA model with seed-deterministic initialization: Glorot-
/// uniform weights (forget-gate biases 1, other biases 0, class projection 0)
/// drawn in canonical parameter order.
pub fn build_genma(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Model> {
    if spec.architecture != Architecture::Genma {
        return Err(Error::InvalidArgument(format!(
            "build_genma called with architecture `{}`",
            spec.architecture.as_str()
        )));
    }
    Model::from_params(spec.clone(), init_params(spec, rng)?)
}

/// Builds a char-CNN model; initialization mirrors [`build_genma`].
pub fn build_charcnn(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Model> {
    if spec.architecture != Architecture::CharCnn {
        return Err(Error::InvalidArgument(format!(
            "build_charcnn called with architecture `{}`",
            spec.architecture.as_str()
        )));
    }
    Model::from_params(spec.clone(), init_params(spec, rng)?)
}

fn init_params(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Result<Vec<(String, Tensor)>> {
    Ok(parameter_plan(spec)?
        .into_iter()
        .map(|(name, shape, init)| {
            let tensor = match init {
                ParamInit::Glorot { fan_in, fan_out } => glorot(rng, &shape, fan_in, fan_out),
                ParamInit::Const(v) => {
                    Tensor::new(&shape, vec![v; shape.iter().product()]).expect("consistent")
                }
            };
            (name, tensor)
        })
        .collect())
}

impl Model {
    /// Assembles a model around an existing parameter list, checking that it
    /// carries exactly the names and shapes the [`ModelSpec`] implies, in
    /// canonical order.
    pub fn from_params(spec: ModelSpec, params: Vec<(String, Tensor)>) -> Result<Model> {
        let plan = parameter_plan(&spec)?;
        if params.len() != plan.len() {
            return Err(Error::InvalidArgument(format!(
                "parameter list has {} entries, the model description implies {}",
                params.len(),
                plan.len()
            )));
        }
        for ((name, tensor), (want_name, want_shape, _)) in params.iter().zip(&plan) {
            if name != want_name {
                return Err(Error::InvalidArgument(format!(
                    "parameter `{name}` where `{want_name}` was expected"
                )));
            }
            if tensor.shape() != want_shape.as_slice() {
                return Err(Error::Shape(format!(
                    "parameter `{}` has shape {:?}, the model description implies {:?}",
                    name,
                    tensor.shape(),
                    want_shape
                )));
            }
        }

        let lookup = |name: &str| -> Tensor {
            params
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, t)| t.clone())
                .expect("name checked against plan")
        };

        let pool = MaxPool1DLayer { pool: spec.pool };
        let convs: Vec<Conv1DLayer> = (1..=spec.conv.len())
            .map(|i| {
                Conv1DLayer::new(
                    lookup(&format!("conv{i}.w")),
                    lookup(&format!("conv{i}.b")),
                    spec.conv[i - 1].1,
                )
            })
            .collect::<Result<_>>()?;
        let head = match spec.architecture {
            Architecture::Genma => {
                let gates = |dir: &str| LstmGates {
                    w_i: lookup(&format!("lstm.{dir}.w_i")),
                    b_i: lookup(&format!("lstm.{dir}.b_i")),
                    w_f: lookup(&format!("lstm.{dir}.w_f")),
                    b_f: lookup(&format!("lstm.{dir}.b_f")),
                    w_o: lookup(&format!("lstm.{dir}.w_o")),
                    b_o: lookup(&format!("lstm.{dir}.b_o")),
                    w_q: lookup(&format!("lstm.{dir}.w_q")),
                    b_q: lookup(&format!("lstm.{dir}.b_q")),
                };
                let lstm = BiLSTMLayer::new(
                    gates("fw"),
                    gates("bw"),
                    spec.lstm_hidden,
                    spec.conv.last().expect("validated").0,
                    spec.combine,
                )?;
                let attention =
                    SelfAttentionLayer::new(lookup("attn.w_h"), lookup("attn.b_h"))?;
                Head::Genma {
                    embedding: EmbeddingLayer::learned(lookup("embed.table"))?,
                    convs,
                    pool,
                    lstm,
                    attention,
                }
            }
            Architecture::CharCnn => Head::CharCnn {
                embedding: EmbeddingLayer::OneHot { n: spec.vocab_size },
                convs,
                pool,
            },
        };
        let dense = DenseLayer::new(lookup("dense.w"), lookup("dense.b"), spec.dropout)?;
        let out_w = lookup("out.w");
        let out_b = lookup("out.b");
        Ok(Model {
            spec,
            head,
            dense,
            out_w,
            out_b,
            params,
        })
    }

    /// Named parameters in canonical order; handles are shared with the
    /// layers, so in-place updates take effect immediately.
    pub fn parameters(&self) -> &[(String, Tensor)] {
        &self.params
    }

    pub fn parameter(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Attention mask over pooled positions: a position is masked when its
    /// receptive span starts at or beyond the last real (non-padding)
    /// character. An all-padding input would mask every position, so it
    /// falls back to attending uniformly over the whole sequence instead of
    /// failing.
    fn attention_mask(&self, char_ids: &[usize]) -> Result<Vec<bool>> {
        let real_len = char_ids.iter().take_while(|&&id| id != PAD_ID).count();
        let spans = receptive_spans(&self.spec)?;
        let masked: Vec<bool> = spans.iter().map(|&(start, _)| start >= real_len).collect();
        if masked.iter().all(|&m| m) {
            Ok(vec![false; masked.len()])
        } else {
            Ok(masked)
        }
    }

    /// Runs the model on one encoded example. `rng` is drawn only when
    /// `training` is true (for dropout), so inference is rng-independent.
    pub fn forward(
        &self,
        tape: &Tape,
        char_ids: &[usize],
        training: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<ForwardPass> {
        if char_ids.len() != self.spec.max_len {
            return Err(Error::Shape(format!(
                "forward: input has {} ids, model expects max_len {}",
                char_ids.len(),
                self.spec.max_len
            )));
        }
        let (features, attention) = match &self.head {
            Head::Genma {
                embedding,
                convs,
                pool,
                lstm,
                attention,
            } => {
                let mut x = embed(tape, char_ids, embedding)?;
                for conv in convs {
                    x = conv1d_forward(tape, &x, conv)?;
                    x = maxpool1d(tape, &x, pool)?;
                }
                let h = bilstm_forward(tape, &x, lstm)?;
                let masked = self.attention_mask(char_ids)?;
                let (r, weights) = attention_forward(tape, &h, &masked, attention)?;
                (r, Some(weights))
            }
            Head::CharCnn {
                embedding,
                convs,
                pool,
            } => {
                let mut x = embed(tape, char_ids, embedding)?;
                let last = convs.len() - 1;
                for (i, conv) in convs.iter().enumerate() {
                    x = conv1d_forward(tape, &x, conv)?;
                    if i < last {
                        x = maxpool1d(tape, &x, pool)?;
                    }
                }
                let flat = tape.reshape(&x, &[1, x.numel()])?;
                (flat, None)
            }
        };
        let hidden = dense_forward(tape, &features, &self.dense, training, rng)?;
        let wt = tape.transpose(&self.out_w)?;
        let logits = tape.add_bias_rows(&tape.matmul(&hidden, &wt)?, &self.out_b)?;
        let probs = tape.softmax_rows(&logits)?;
        Ok(ForwardPass { probs, attention })
    }

    /// Predicts the label of an encoded example with dropout disabled.
    /// Returns the argmax class (lowest index on exact ties) and the class
    /// probabilities.
    pub fn predict(&self, example: &Example) -> Result<(usize, [f64; CLASSES])> {
        let tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0); // never drawn in inference
        let pass = self.forward(&tape, &example.char_ids, false, &mut rng)?;
        let data = pass.probs.data();
        let mut best = 0;
        for c in 1..CLASSES {
            if data[c] > data[best] {
                best = c;
            }
        }
        Ok((best, [data[0], data[1], data[2]]))
    }

    /// Extracts the attention map of a GenMA model for one example: raw
    /// weights over pooled positions plus their projection back onto the
    /// normalized text, where each character's weight is the maximum over
    /// the pooled positions whose receptive span covers it.
    pub fn attention_of(&self, example: &Example) -> Result<AttentionMap> {
        if self.spec.architecture != Architecture::Genma {
            return Err(Error::InvalidArgument(
                "attention_of: charcnn has no attention layer".to_string(),
            ));
        }
        let tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pass = self.forward(&tape, &example.char_ids, false, &mut rng)?;
        let weights = pass.attention.expect("genma forward yields attention");
        let pooled_weights: Vec<f64> = weights.data().clone();
        let spans = receptive_spans(&self.spec)?;
        let text_len = example.text.chars().count();
        // Characters beyond max_len were truncated away; characters covered
        // by no span (the tail lost to pooling remainders) keep weight 0.
        let mut char_weights = vec![0.0_f64; text_len];
        for (p, &(start, end)) in spans.iter().enumerate() {
            for c in start..=end.min(text_len.saturating_sub(1)) {
                if c < text_len {
                    char_weights[c] = char_weights[c].max(pooled_weights[p]);
                }
            }
        }
        Ok(AttentionMap {
            text: example.text.clone(),
            char_weights,
            pooled_weights,
            spans,
        })
    }
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

/// A trained (or training) model frozen to disk: spec, vocabulary, training
/// metadata, and every parameter tensor. The file format is a structured
/// text header (`GENMA-CKPT 1`, `key=value` lines, one `param=<name> <dims…>`
/// line per tensor, then `end`) followed by the raw little-endian f64 data of
/// each parameter in header order; round-trips are bit-exact.
#[derive(Debug)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub vocab: CharVocabulary,
    pub seed: u64,
    pub epoch: usize,
    pub loss_history: Vec<f64>,
    pub params: Vec<(String, Tensor)>,
}

const CKPT_MAGIC: &str = "GENMA-CKPT 1";

impl Checkpoint {
    /// Snapshots a model's current parameters (deep copy).
    pub fn from_model(
        model: &Model,
        vocab: &CharVocabulary,
        seed: u64,
        epoch: usize,
        loss_history: Vec<f64>,
    ) -> Checkpoint {
        let params = model
            .parameters()
            .iter()
            .map(|(name, t)| {
                let copy = Tensor::new(t.shape(), t.data().clone()).expect("same shape");
                (name.clone(), copy)
            })
            .collect();
        Checkpoint {
            spec: model.spec.clone(),
            vocab: vocab.clone(),
            seed,
            epoch,
            loss_history,
            params,
        }
    }

    /// Wires a model around this checkpoint's parameter tensors (shared
    /// handles — training the model mutates the checkpoint's copies).
    pub fn to_model(&self) -> Result<Model> {
        Model::from_params(self.spec.clone(), self.params.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{CKPT_MAGIC}")?;
        writeln!(w, "architecture={}", self.spec.architecture.as_str())?;
        writeln!(w, "vocab_size={}", self.spec.vocab_size)?;
        writeln!(w, "max_len={}", self.spec.max_len)?;
        writeln!(w, "embedding_dim={}", self.spec.embedding_dim)?;
        let conv: Vec<String> = self
            .spec
            .conv
            .iter()
            .map(|(f, k)| format!("{f}x{k}"))
            .collect();
        writeln!(w, "conv={}", conv.join(","))?;
        writeln!(w, "pool={}", self.spec.pool)?;
        writeln!(w, "lstm_hidden={}", self.spec.lstm_hidden)?;
        let combine = match self.spec.combine {
            Combine::Concat => "concat",
            Combine::Sum => "sum",
        };
        writeln!(w, "combine={combine}")?;
        writeln!(w, "dense={}", self.spec.dense)?;
        writeln!(w, "dropout={}", self.spec.dropout)?;
        writeln!(w, "seed={}", self.seed)?;
        writeln!(w, "epoch={}", self.epoch)?;
        let history: Vec<String> = self.loss_history.iter().map(|v| v.to_string()).collect();
        writeln!(w, "loss_history={}", history.join(","))?;
        let vocab: Vec<String> = self
            .vocab
            .chars()
            .iter()
            .map(|&c| format!("{:x}", c as u32))
            .collect();
        writeln!(w, "vocab={}", vocab.join(","))?;
        for (name, tensor) in &self.params {
            let dims: Vec<String> = tensor.shape().iter().map(|d| d.to_string()).collect();
            writeln!(w, "param={} {}", name, dims.join(" "))?;
        }
        writeln!(w, "end")?;
        for (_, tensor) in &self.params {
            for v in tensor.data().iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read `{}`: {}", path.display(), e))
        })?;
        let mut r = BufReader::new(file);
        let mut line_no = 0;
        fn read_line(r: &mut BufReader<File>, line_no: &mut usize) -> Result<Option<String>> {
            let mut buf = Vec::new();
            let n = r.read_until(b'\n', &mut buf)?;
            if n == 0 {
                return Ok(None);
            }
            *line_no += 1;
            let mut s = String::from_utf8(buf)
                .map_err(|_| Error::parse(*line_no, "header is not UTF-8"))?;
            while s.ends_with('\n') || s.ends_with('\r') {
                s.pop();
            }
            Ok(Some(s))
        }

        let magic = read_line(&mut r, &mut line_no)?
            .ok_or_else(|| Error::parse(1, "empty checkpoint file"))?;
        if magic != CKPT_MAGIC {
            return Err(Error::parse(1, format!("bad magic `{magic}`")));
        }

        let mut fields: Vec<(usize, String, String)> = Vec::new();
        let mut param_lines: Vec<(usize, String)> = Vec::new();
        loop {
            let line = read_line(&mut r, &mut line_no)?
                .ok_or_else(|| Error::parse(line_no, "missing `end` line"))?;
            let here = line_no;
            if line == "end" {
                break;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(here, format!("expected key=value, got `{line}`")))?;
            if key == "param" {
                param_lines.push((here, value.to_string()));
            } else {
                fields.push((here, key.to_string(), value.to_string()));
            }
        }

        let get = |key: &str| -> Result<(usize, String)> {
            fields
                .iter()
                .find(|(_, k, _)| k == key)
                .map(|(l, _, v)| (*l, v.clone()))
                .ok_or_else(|| Error::parse(1, format!("missing header field `{key}`")))
        };
        fn parsed<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::parse(line, format!("bad value for `{key}`: `{value}`")))
        }

        let (l, v) = get("architecture")?;
        let architecture = Architecture::parse(&v)
            .ok_or_else(|| Error::parse(l, format!("unknown architecture `{v}`")))?;
        let (l, v) = get("vocab_size")?;
        let vocab_size: usize = parsed(l, "vocab_size", &v)?;
        let (l, v) = get("max_len")?;
        let max_len: usize = parsed(l, "max_len", &v)?;
        let (l, v) = get("embedding_dim")?;
        let embedding_dim: usize = parsed(l, "embedding_dim", &v)?;
        let (l, v) = get("conv")?;
        let conv: Vec<(usize, usize)> = v
            .split(',')
            .map(|pair| {
                let (f, k) = pair
                    .split_once('x')
                    .ok_or_else(|| Error::parse(l, format!("bad conv entry `{pair}`")))?;
                Ok((parsed(l, "conv", f)?, parsed(l, "conv", k)?))
            })
            .collect::<Result<_>>()?;
        let (l, v) = get("pool")?;
        let pool: usize = parsed(l, "pool", &v)?;
        let (l, v) = get("lstm_hidden")?;
        let lstm_hidden: usize = parsed(l, "lstm_hidden", &v)?;
        let (l, v) = get("combine")?;
        let combine = match v.as_str() {
            "concat" => Combine::Concat,
            "sum" => Combine::Sum,
            other => return Err(Error::parse(l, format!("unknown combine `{other}`"))),
        };
        let (l, v) = get("dense")?;
        let dense: usize = parsed(l, "dense", &v)?;
        let (l, v) = get("dropout")?;
        let dropout: f64 = parsed(l, "dropout", &v)?;
        let (l, v) = get("seed")?;
        let seed: u64 = parsed(l, "seed", &v)?;
        let (l, v) = get("epoch")?;
        let epoch: usize = parsed(l, "epoch", &v)?;
        let (l, v) = get("loss_history")?;
        let loss_history: Vec<f64> = if v.is_empty() {
            Vec::new()
        } else {
            v.split(',')
                .map(|s| parsed(l, "loss_history", s))
                .collect::<Result<_>>()?
        };
        let (l, v) = get("vocab")?;
        let chars: Vec<char> = if v.is_empty() {
            Vec::new()
        } else {
            v.split(',')
                .map(|hex| {
                    let cp = u32::from_str_radix(hex, 16)
                        .map_err(|_| Error::parse(l, format!("bad codepoint `{hex}`")))?;
                    char::from_u32(cp)
                        .ok_or_else(|| Error::parse(l, format!("invalid codepoint `{hex}`")))
                })
                .collect::<Result<_>>()?
        };
        let vocab = CharVocabulary::from_chars(chars);

        let spec = ModelSpec {
            architecture,
            vocab_size,
            max_len,
            embedding_dim,
            conv,
            pool,
            lstm_hidden,
            combine,
            dense,
            dropout,
        };

        let mut params = Vec::with_capacity(param_lines.len());
        use std::io::Read;
        for (l, decl) in param_lines {
            let mut parts = decl.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| Error::parse(l, "empty param declaration"))?
                .to_string();
            let shape: Vec<usize> = parts
                .map(|d| parsed(l, "param", d))
                .collect::<Result<_>>()?;
            let numel: usize = shape.iter().product();
            let mut bytes = vec![0u8; numel * 8];
            r.read_exact(&mut bytes).map_err(|_| {
                Error::parse(l, format!("truncated data for parameter `{name}`"))
            })?;
            let data: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            params.push((name, Tensor::new(&shape, data)?));
        }
        Ok(Checkpoint {
            spec,
            vocab,
            seed,
            epoch,
            loss_history,
            params,
        })
    }
}
