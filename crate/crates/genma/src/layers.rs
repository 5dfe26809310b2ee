//! Neural layers: character embedding, 1-D convolution, max-pooling, BiLSTM,
//! scalar-score self-attention, and a dense layer with inverted dropout.
//!
//! Every forward function records onto a [`Tape`], so gradients for all layer
//! parameters come from a single audited backward per tensor primitive.
//! [`run_layer_checks`] verifies each layer against central finite
//! differences and backs the `gradcheck` CLI command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::tensor::{grad_check, Tape, Tensor};

/// How a BiLSTM merges its two directions per timestep. Concatenation (the
/// default, output width `2H`) is the supported configuration; `Sum` (output
/// width `H`) is provided as an alternative without endorsement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Concat,
    Sum,
}

/// Glorot-uniform initialization: entries drawn from
/// `U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))` in row-major order.
pub fn glorot(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(shape, data).expect("shape/data agree by construction")
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

/// Character embedding: either exact one-hot unit vectors of dimension `n`,
/// or a learned `n × E` table. In both modes the padding index embeds to the
/// zero vector and contributes no gradient.
#[derive(Debug, Clone)]
pub enum EmbeddingLayer {
    OneHot { n: usize },
    Learned { table: Tensor },
}

impl EmbeddingLayer {
    pub fn learned(table: Tensor) -> Result<EmbeddingLayer> {
        match table.shape() {
            [_, _] => Ok(EmbeddingLayer::Learned { table }),
            other => Err(Error::Shape(format!(
                "embedding table must be rank-2, got shape {:?}",
                other
            ))),
        }
    }

    /// Vocabulary size `n`.
    pub fn vocab_size(&self) -> usize {
        match self {
            EmbeddingLayer::OneHot { n } => *n,
            EmbeddingLayer::Learned { table } => table.shape()[0],
        }
    }

    /// Embedding dimension `E` (= `n` in one-hot mode).
    pub fn dim(&self) -> usize {
        match self {
            EmbeddingLayer::OneHot { n } => *n,
            EmbeddingLayer::Learned { table } => table.shape()[1],
        }
    }
}

/// Embeds an id sequence as a `[T×E]` matrix, row `t` being the embedding of
/// `ids[t]`. Padding rows are exactly zero.
pub fn embed(tape: &Tape, ids: &[usize], layer: &EmbeddingLayer) -> Result<Tensor> {
    let n = layer.vocab_size();
    if let Some(&bad) = ids.iter().find(|&&id| id >= n) {
        return Err(Error::InvalidArgument(format!(
            "embed: id {} out of range for vocabulary size {}",
            bad, n
        )));
    }
    match layer {
        EmbeddingLayer::OneHot { n } => {
            let mut data = vec![0.0; ids.len() * n];
            for (t, &id) in ids.iter().enumerate() {
                if id != PAD_ID {
                    data[t * n + id] = 1.0;
                }
            }
            // Constant with no parameters: nothing to record.
            Tensor::new(&[ids.len(), *n], data)
        }
        EmbeddingLayer::Learned { table } => {
            let e = table.shape()[1];
            let gathered = tape.gather_rows(table, ids)?;
            // Zero out padding rows; the mask is constant, so padding also
            // sends no gradient back into the table.
            let mut mask = vec![1.0; ids.len() * e];
            for (t, &id) in ids.iter().enumerate() {
                if id == PAD_ID {
                    mask[t * e..(t + 1) * e].fill(0.0);
                }
            }
            let mask = Tensor::new(&[ids.len(), e], mask)?;
            tape.hadamard(&gathered, &mask)
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution and pooling
// ---------------------------------------------------------------------------

/// Stride-1 1-D convolution over a `[m×C]` sequence with `f` filters of width
/// `k`, followed by relu. The weight matrix is `[f × k·C]`: filter `c`'s row
/// is dotted with the flattened window `[x_j, …, x_{j+k−1}]`.
#[derive(Debug, Clone)]
pub struct Conv1DLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub kernel: usize,
    pub in_channels: usize,
}

impl Conv1DLayer {
    pub fn new(weights: Tensor, bias: Tensor, kernel: usize) -> Result<Conv1DLayer> {
        let (f, cols) = match weights.shape() {
            [f, cols] => (*f, *cols),
            other => {
                return Err(Error::Shape(format!(
                    "conv1d weights must be rank-2, got shape {:?}",
                    other
                )))
            }
        };
        if kernel == 0 || cols % kernel != 0 {
            return Err(Error::Shape(format!(
                "conv1d weight width {} is not a multiple of kernel {}",
                cols, kernel
            )));
        }
        if bias.shape() != [f] {
            return Err(Error::Shape(format!(
                "conv1d bias shape {:?} does not match {} filters",
                bias.shape(),
                f
            )));
        }
        Ok(Conv1DLayer {
            weights,
            bias,
            kernel,
            in_channels: cols / kernel,
        })
    }

    pub fn filters(&self) -> usize {
        self.weights.shape()[0]
    }

    /// Output length for an input of length `m`: `s = m − k + 1`.
    pub fn output_len(&self, m: usize) -> Result<usize> {
        if m < self.kernel {
            return Err(Error::Shape(format!(
                "conv1d: input length {} < kernel {} (output length s = m − k + 1 must be ≥ 1)",
                m, self.kernel
            )));
        }
        Ok(m - self.kernel + 1)
    }
}

/// Applies a [`Conv1DLayer`] to `x: [m×C]`, producing `[(m−k+1)×f]`.
pub fn conv1d_forward(tape: &Tape, x: &Tensor, layer: &Conv1DLayer) -> Result<Tensor> {
    let (m, c) = match x.shape() {
        [m, c] => (*m, *c),
        other => {
            return Err(Error::Shape(format!(
                "conv1d: input must be rank-2, got shape {:?}",
                other
            )))
        }
    };
    if c != layer.in_channels {
        return Err(Error::Shape(format!(
            "conv1d: input has {} channels, layer expects {}",
            c, layer.in_channels
        )));
    }
    layer.output_len(m)?;
    let win = tape.windows(x, layer.kernel)?;
    let wt = tape.transpose(&layer.weights)?;
    let z = tape.matmul(&win, &wt)?;
    let zb = tape.add_bias_rows(&z, &layer.bias)?;
    tape.relu(&zb)
}

/// Non-overlapping max-pooling over the sequence dimension.
#[derive(Debug, Clone, Copy)]
pub struct MaxPool1DLayer {
    pub pool: usize,
}

impl Default for MaxPool1DLayer {
    fn default() -> Self {
        MaxPool1DLayer { pool: 3 }
    }
}

/// Applies max-pooling to `x: [s×f]`, producing `[floor(s/p)×f]`; trailing
/// rows that do not fill a window are dropped.
pub fn maxpool1d(tape: &Tape, x: &Tensor, layer: &MaxPool1DLayer) -> Result<Tensor> {
    if let [s, _] = x.shape() {
        if *s < layer.pool {
            return Err(Error::Shape(format!(
                "maxpool: input length {} < pool {} (output length d = floor(s / p) must be ≥ 1)",
                s, layer.pool
            )));
        }
    }
    tape.maxpool_rows(x, layer.pool)
}

// ---------------------------------------------------------------------------
// BiLSTM
// ---------------------------------------------------------------------------

/// One LSTM direction's parameters. Each gate weight is `[H × (H+in)]` and
/// acts on the concatenation `[h_{t−1}, x_t]`; biases are `[H]`.
#[derive(Debug, Clone)]
pub struct LstmGates {
    pub w_i: Tensor,
    pub b_i: Tensor,
    pub w_f: Tensor,
    pub b_f: Tensor,
    pub w_o: Tensor,
    pub b_o: Tensor,
    pub w_q: Tensor,
    pub b_q: Tensor,
}

impl LstmGates {
    fn validate(&self, hidden: usize, input: usize) -> Result<()> {
        let expect_w = [hidden, hidden + input];
        for (name, w, b) in [
            ("i", &self.w_i, &self.b_i),
            ("f", &self.w_f, &self.b_f),
            ("o", &self.w_o, &self.b_o),
            ("q", &self.w_q, &self.b_q),
        ] {
            if w.shape() != expect_w {
                return Err(Error::Shape(format!(
                    "lstm gate {} weight shape {:?}, expected {:?}",
                    name,
                    w.shape(),
                    expect_w
                )));
            }
            if b.shape() != [hidden] {
                return Err(Error::Shape(format!(
                    "lstm gate {} bias shape {:?}, expected [{}]",
                    name,
                    b.shape(),
                    hidden
                )));
            }
        }
        Ok(())
    }
}

/// Bidirectional LSTM with hidden size `H` per direction.
///
/// Cell equations per timestep, with `[h, x] = concat(h_{t−1}, x_t)`:
///
/// ```text
/// i_t = σ(W_i·[h,x] + b_i)        f_t = σ(W_f·[h,x] + b_f)
/// o_t = σ(W_o·[h,x] + b_o)        q_t = tanh(W_q·[h,x] + b_q)
/// c_t = f_t ⊙ c_{t−1} + i_t ⊙ q_t
/// h_t = o_t ⊙ tanh(c_t)
/// ```
///
/// Both directions start from `h_0 = c_0 = 0`; the backward direction
/// consumes the sequence reversed, and the per-timestep outputs are merged
/// according to [`Combine`].
#[derive(Debug, Clone)]
pub struct BiLSTMLayer {
    pub fw: LstmGates,
    pub bw: LstmGates,
    pub hidden: usize,
    pub input: usize,
    pub combine: Combine,
}

impl BiLSTMLayer {
    pub fn new(
        fw: LstmGates,
        bw: LstmGates,
        hidden: usize,
        input: usize,
        combine: Combine,
    ) -> Result<BiLSTMLayer> {
        fw.validate(hidden, input)?;
        bw.validate(hidden, input)?;
        Ok(BiLSTMLayer {
            fw,
            bw,
            hidden,
            input,
            combine,
        })
    }

    /// Width of one output row: `2H` for concatenation, `H` for sum.
    pub fn output_width(&self) -> usize {
        match self.combine {
            Combine::Concat => 2 * self.hidden,
            Combine::Sum => self.hidden,
        }
    }
}

/// Runs one direction over `x: [T×in]`, returning `h_t` as `[1×H]` rows
/// indexed by the original timestep (the reversed direction's outputs are
/// stored back at their original positions).
fn lstm_direction(
    tape: &Tape,
    x: &Tensor,
    gates: &LstmGates,
    hidden: usize,
    reverse: bool,
) -> Result<Vec<Tensor>> {
    let t_len = x.shape()[0];
    // Transpose each gate weight once per pass, not per timestep.
    let wt_i = tape.transpose(&gates.w_i)?;
    let wt_f = tape.transpose(&gates.w_f)?;
    let wt_o = tape.transpose(&gates.w_o)?;
    let wt_q = tape.transpose(&gates.w_q)?;

    let mut h = Tensor::zeros(&[1, hidden]);
    let mut c = Tensor::zeros(&[1, hidden]);
    let mut out: Vec<Option<Tensor>> = vec![None; t_len];
    for step in 0..t_len {
        let t = if reverse { t_len - 1 - step } else { step };
        let xt = tape.row(x, t)?;
        let hx = tape.concat_cols(&h, &xt)?;
        let i = tape.sigmoid(&tape.add_bias_rows(&tape.matmul(&hx, &wt_i)?, &gates.b_i)?)?;
        let f = tape.sigmoid(&tape.add_bias_rows(&tape.matmul(&hx, &wt_f)?, &gates.b_f)?)?;
        let o = tape.sigmoid(&tape.add_bias_rows(&tape.matmul(&hx, &wt_o)?, &gates.b_o)?)?;
        let q = tape.tanh(&tape.add_bias_rows(&tape.matmul(&hx, &wt_q)?, &gates.b_q)?)?;
        c = tape.add(&tape.hadamard(&f, &c)?, &tape.hadamard(&i, &q)?)?;
        h = tape.hadamard(&o, &tape.tanh(&c)?)?;
        out[t] = Some(h.clone());
    }
    Ok(out.into_iter().map(|t| t.expect("all steps visited")).collect())
}

/// Runs the BiLSTM over `x: [T×in]`, producing `[T×2H]` (concat) or `[T×H]`
/// (sum).
pub fn bilstm_forward(tape: &Tape, x: &Tensor, layer: &BiLSTMLayer) -> Result<Tensor> {
    let (t_len, width) = match x.shape() {
        [t, w] => (*t, *w),
        other => {
            return Err(Error::Shape(format!(
                "bilstm: input must be rank-2, got shape {:?}",
                other
            )))
        }
    };
    if t_len == 0 {
        return Err(Error::InvalidArgument(
            "bilstm: zero-length sequence".to_string(),
        ));
    }
    if width != layer.input {
        return Err(Error::Shape(format!(
            "bilstm: input width {} does not match layer input {}",
            width, layer.input
        )));
    }
    let fw = lstm_direction(tape, x, &layer.fw, layer.hidden, false)?;
    let bw = lstm_direction(tape, x, &layer.bw, layer.hidden, true)?;
    let mut rows = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let row = match layer.combine {
            Combine::Concat => tape.concat_cols(&fw[t], &bw[t])?,
            Combine::Sum => tape.add(&fw[t], &bw[t])?,
        };
        rows.push(row);
    }
    tape.concat_rows(&rows)
}

// ---------------------------------------------------------------------------
// Self-attention
// ---------------------------------------------------------------------------

/// Scalar-score self-attention over timesteps: each row `h_i` of the input
/// gets score `tanh(w_h·h_i + b_h)`; the scores are softmax-normalized over
/// unmasked positions into weights `a`, and the output is `r = Σ a_i·h_i`.
#[derive(Debug, Clone)]
pub struct SelfAttentionLayer {
    /// Score vector, shape `[D]` where `D` is the input row width.
    pub w_h: Tensor,
    /// Scalar score bias, shape `[1]`.
    pub b_h: Tensor,
}

impl SelfAttentionLayer {
    pub fn new(w_h: Tensor, b_h: Tensor) -> Result<SelfAttentionLayer> {
        if w_h.shape().len() != 1 {
            return Err(Error::Shape(format!(
                "attention score vector must be rank-1, got shape {:?}",
                w_h.shape()
            )));
        }
        if b_h.shape() != [1] {
            return Err(Error::Shape(format!(
                "attention bias must have shape [1], got {:?}",
                b_h.shape()
            )));
        }
        Ok(SelfAttentionLayer { w_h, b_h })
    }
}

/// Applies self-attention to `h: [T×D]`. `masked[t] = true` marks position
/// `t` as padding: its weight is exactly 0 and it contributes nothing to `r`.
/// Returns `(r: [1×D], weights: [1×T])`.
pub fn attention_forward(
    tape: &Tape,
    h: &Tensor,
    masked: &[bool],
    layer: &SelfAttentionLayer,
) -> Result<(Tensor, Tensor)> {
    let (t_len, d) = match h.shape() {
        [t, d] => (*t, *d),
        other => {
            return Err(Error::Shape(format!(
                "attention: input must be rank-2, got shape {:?}",
                other
            )))
        }
    };
    if layer.w_h.shape() != [d] {
        return Err(Error::Shape(format!(
            "attention: score vector shape {:?} does not match input width {}",
            layer.w_h.shape(),
            d
        )));
    }
    if masked.len() != t_len {
        return Err(Error::Shape(format!(
            "attention: mask length {} does not match {} timesteps",
            masked.len(),
            t_len
        )));
    }
    if masked.iter().all(|&m| m) {
        return Err(Error::InvalidArgument(
            "attention: all positions are masked".to_string(),
        ));
    }
    let w_col = tape.reshape(&layer.w_h, &[d, 1])?;
    let scores = tape.add_bias_rows(&tape.matmul(h, &w_col)?, &layer.b_h)?;
    let activated = tape.tanh(&scores)?;
    let scores_row = tape.transpose(&activated)?;
    let weights = tape.softmax_rows_masked(&scores_row, masked)?;
    let r = tape.matmul(&weights, h)?;
    Ok((r, weights))
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully connected layer `tanh(W·x + b)` with inverted dropout after the
/// activation: at training time each output unit is dropped with probability
/// `dropout` and kept units are scaled by `1/(1−dropout)`, so inference
/// applies no correction (and no dropout at all).
#[derive(Debug, Clone)]
pub struct DenseLayer {
    /// Weights, shape `[out × in]`.
    pub weights: Tensor,
    /// Bias, shape `[out]`.
    pub bias: Tensor,
    pub dropout: f64,
}

impl DenseLayer {
    pub fn new(weights: Tensor, bias: Tensor, dropout: f64) -> Result<DenseLayer> {
        let out = match weights.shape() {
            [out, _] => *out,
            other => {
                return Err(Error::Shape(format!(
                    "dense weights must be rank-2, got shape {:?}",
                    other
                )))
            }
        };
        if bias.shape() != [out] {
            return Err(Error::Shape(format!(
                "dense bias shape {:?} does not match {} outputs",
                bias.shape(),
                out
            )));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!(
                "dense dropout rate must be in [0, 1), got {}",
                dropout
            )));
        }
        Ok(DenseLayer {
            weights,
            bias,
            dropout,
        })
    }
}

/// Applies a [`DenseLayer`] to `x: [r×in]`, producing `[r×out]`. The rng is
/// consumed only when `training` is true and the dropout rate is positive, so
/// inference output is a pure function of the input.
pub fn dense_forward(
    tape: &Tape,
    x: &Tensor,
    layer: &DenseLayer,
    training: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Tensor> {
    let wt = tape.transpose(&layer.weights)?;
    let z = tape.matmul(x, &wt)?;
    let zb = tape.add_bias_rows(&z, &layer.bias)?;
    let y = tape.tanh(&zb)?;
    if !training || layer.dropout == 0.0 {
        return Ok(y);
    }
    let keep = 1.0 - layer.dropout;
    let mask: Vec<f64> = (0..y.numel())
        .map(|_| {
            if rng.gen::<f64>() < layer.dropout {
                0.0
            } else {
                1.0 / keep
            }
        })
        .collect();
    let mask = Tensor::new(y.shape(), mask)?;
    tape.hadamard(&y, &mask)
}

// ---------------------------------------------------------------------------
// Gradient-check suite
// ---------------------------------------------------------------------------

/// Result of one entry in the layer gradient-check suite.
#[derive(Debug, Clone)]
pub struct LayerCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub pass: bool,
}

const CHECK_H: f64 = 1e-5;
const CHECK_TOL: f64 = 1e-4;
const CHECK_ROUNDS: usize = 10;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let numel = shape.iter().product();
    let data = (0..numel).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Tensor::new(shape, data).expect("shape/data agree by construction")
}

/// Reduces a layer output to a scalar by summing its product with a fixed
/// random probe, so every output coordinate influences the root.
fn scalarize(tape: &Tape, out: &Tensor, probe: &Tensor) -> Result<Tensor> {
    tape.sum_all(&tape.hadamard(out, probe)?)
}

/// Runs `f` against every target tensor over [`CHECK_ROUNDS`] seeded random
/// trials and folds the worst relative error into one named result.
fn run_check<F>(name: &str, rng: &mut ChaCha8Rng, mut build: F) -> Result<LayerCheck>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<(Box<dyn Fn(&Tape, &Tensor) -> Result<Tensor>>, Vec<Tensor>)>,
{
    let mut worst = 0.0f64;
    for _ in 0..CHECK_ROUNDS {
        let (f, targets) = build(rng)?;
        for target in &targets {
            let report = grad_check(&f, target, CHECK_H, CHECK_TOL)?;
            worst = worst.max(report.max_rel_error);
        }
    }
    Ok(LayerCheck {
        name: name.to_string(),
        max_rel_error: worst,
        pass: worst <= CHECK_TOL,
    })
}

/// Runs the full layer gradient-check suite: every differentiable layer is
/// checked against central finite differences (h = 1e−5) at relative
/// tolerance 1e−4 on [`CHECK_ROUNDS`] seeded random inputs per layer,
/// checking gradients with respect to inputs and parameters alike.
///
/// `inject_fault` appends a negative control whose backward rule is
/// deliberately wrong; it must fail, demonstrating the suite can detect a
/// broken gradient.
pub fn run_layer_checks(seed: u64, inject_fault: bool) -> Result<Vec<LayerCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    let mut checks = Vec::new();

    checks.push(run_check("embedding-learned", rng, |rng| {
        let table = rand_tensor(rng, &[6, 4]);
        let probe = rand_tensor(rng, &[5, 4]);
        let layer = EmbeddingLayer::learned(table.clone())?;
        let f = move |tape: &Tape, _: &Tensor| {
            let out = embed(tape, &[3, 0, 2, 5, 2], &layer)?;
            scalarize(tape, &out, &probe)
        };
        Ok((Box::new(f) as _, vec![table]))
    })?);

    checks.push(run_check("conv1d", rng, |rng| {
        let x = rand_tensor(rng, &[8, 3]);
        let w = rand_tensor(rng, &[4, 9]);
        let b = rand_tensor(rng, &[4]);
        let probe = rand_tensor(rng, &[6, 4]);
        let layer = Conv1DLayer::new(w.clone(), b.clone(), 3)?;
        let xc = x.clone();
        let f = move |tape: &Tape, _: &Tensor| {
            let out = conv1d_forward(tape, &xc, &layer)?;
            scalarize(tape, &out, &probe)
        };
        Ok((Box::new(f) as _, vec![x, w, b]))
    })?);

    checks.push(run_check("maxpool", rng, |rng| {
        let x = rand_tensor(rng, &[7, 2]);
        let probe = rand_tensor(rng, &[2, 2]);
        let xc = x.clone();
        let f = move |tape: &Tape, _: &Tensor| {
            let out = maxpool1d(tape, &xc, &MaxPool1DLayer::default())?;
            scalarize(tape, &out, &probe)
        };
        Ok((Box::new(f) as _, vec![x]))
    })?);

    checks.push(run_check("bilstm", rng, |rng| {
        let hidden = 3;
        let input = 3;
        let gates = |rng: &mut ChaCha8Rng| LstmGates {
            w_i: rand_tensor(rng, &[hidden, hidden + input]),
            b_i: rand_tensor(rng, &[hidden]),
            w_f: rand_tensor(rng, &[hidden, hidden + input]),
            b_f: rand_tensor(rng, &[hidden]),
            w_o: rand_tensor(rng, &[hidden, hidden + input]),
            b_o: rand_tensor(rng, &[hidden]),
            w_q: rand_tensor(rng, &[hidden, hidden + input]),
            b_q: rand_tensor(rng, &[hidden]),
        };
        let x = rand_tensor(rng, &[4, input]);
        let probe = rand_tensor(rng, &[4, 2 * hidden]);
        let layer = BiLSTMLayer::new(gates(rng), gates(rng), hidden, input, Combine::Concat)?;
        let targets = vec![
            x.clone(),
            layer.fw.w_i.clone(),
            layer.fw.b_f.clone(),
            layer.fw.w_q.clone(),
            layer.bw.w_o.clone(),
            layer.bw.b_q.clone(),
            layer.bw.w_f.clone(),
        ];
        let xc = x;
        let f = move |tape: &Tape, _: &Tensor| {
            let out = bilstm_forward(tape, &xc, &layer)?;
            scalarize(tape, &out, &probe)
        };
        Ok((Box::new(f) as _, targets))
    })?);

    checks.push(run_check("self-attention", rng, |rng| {
        let h = rand_tensor(rng, &[5, 6]);
        let w_h = rand_tensor(rng, &[6]);
        let b_h = rand_tensor(rng, &[1]);
        let probe = rand_tensor(rng, &[1, 6]);
        let layer = SelfAttentionLayer::new(w_h.clone(), b_h.clone())?;
        let hc = h.clone();
        let f = move |tape: &Tape, _: &Tensor| {
            let (r, _) = attention_forward(tape, &hc, &[false, false, true, false, true], &layer)?;
            scalarize(tape, &r, &probe)
        };
        Ok((Box::new(f) as _, vec![h, w_h, b_h]))
    })?);

    checks.push(run_check("dense", rng, |rng| {
        let x = rand_tensor(rng, &[1, 7]);
        let w = rand_tensor(rng, &[4, 7]);
        let b = rand_tensor(rng, &[4]);
        let probe = rand_tensor(rng, &[1, 4]);
        let layer = DenseLayer::new(w.clone(), b.clone(), 0.5)?;
        let xc = x.clone();
        // Dropout is disabled during the check: the rng is never drawn in
        // inference mode, so `f` stays deterministic across re-evaluations.
        let f = move |tape: &Tape, _: &Tensor| {
            let mut unused = ChaCha8Rng::seed_from_u64(0);
            let out = dense_forward(tape, &xc, &layer, false, &mut unused)?;
            scalarize(tape, &out, &probe)
        };
        Ok((Box::new(f) as _, vec![x, w, b]))
    })?);

    checks.push(run_check("softmax", rng, |rng| {
        let x = rand_tensor(rng, &[3, 4]);
        let probe = rand_tensor(rng, &[3, 4]);
        let xc = x.clone();
        let f = move |tape: &Tape, _: &Tensor| {
            let y = tape.softmax_rows(&xc)?;
            scalarize(tape, &y, &probe)
        };
        Ok((Box::new(f) as _, vec![x]))
    })?);

    checks.push(run_check("cross-entropy", rng, |rng| {
        let logits = rand_tensor(rng, &[4, 3]);
        let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(0..3)).collect();
        let lc = logits.clone();
        let f = move |tape: &Tape, _: &Tensor| {
            let probs = tape.softmax_rows(&lc)?;
            tape.cross_entropy(&probs, &labels)
        };
        Ok((Box::new(f) as _, vec![logits]))
    })?);

    if inject_fault {
        checks.push(run_check("relu (injected fault)", rng, |rng| {
            let x = rand_tensor(rng, &[2, 3]);
            let probe = rand_tensor(rng, &[2, 3]);
            let xc = x.clone();
            let f = move |tape: &Tape, _: &Tensor| {
                // Correct forward, deliberately miscaled backward (×1.05):
                // the suite must flag this as a gradient failure.
                let data = xc.data().iter().map(|&v| v.max(0.0)).collect();
                let out = Tensor::new(xc.shape(), data)?;
                let inner = xc.clone();
                tape.record(out.clone(), move |bar, adj| {
                    let dx = inner.data();
                    let buf = adj.buffer_mut(&inner);
                    for i in 0..bar.len() {
                        if dx[i] > 0.0 {
                            buf[i] += 1.05 * bar[i];
                        }
                    }
                });
                scalarize(tape, &out, &probe)
            };
            Ok((Box::new(f) as _, vec![x]))
        })?);
    }

    Ok(checks)
}
