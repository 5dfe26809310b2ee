//! Classical baselines: TF-IDF features and a linear SVM trained one-vs-rest
//! with a Pegasos-style primal subgradient solver. The dual objective is kept
//! as a verification oracle; training happens in the primal.
//!
//! TF-IDF contract (frozen): tokens are lower-cased alphanumeric runs of at
//! least `min_token_len` characters (default 2); `tf` is the raw in-document
//! count; `idf_t = ln((1+N)/(1+df_t)) + 1`; document vectors are
//! L2-normalized.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of sentiment classes.
const CLASSES: usize = 3;

/// Default regularization strength for the SVM (not recoverable from any
/// stated hyperparameter; chosen and frozen here).
pub const DEFAULT_LAMBDA: f64 = 1e-4;

/// Splits text into lower-cased alphanumeric runs of at least `min_len`
/// characters.
pub fn tokenize(text: &str, min_len: usize) -> Vec<String> {
    let lowered = text.to_lowercase();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|run| !run.is_empty() && run.chars().count() >= min_len)
        .map(|run| run.to_string())
        .collect()
}

/// Fitted TF-IDF featurizer: token→column mapping (first-occurrence order)
/// and the idf vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    tokens: Vec<String>,
    idf: Vec<f64>,
    min_token_len: usize,
    token_to_col: HashMap<String, usize>,
}

impl TfidfModel {
    /// Assembles a model from its parts, validating that idf entries are
    /// positive and aligned with the vocabulary.
    pub fn new(tokens: Vec<String>, idf: Vec<f64>, min_token_len: usize) -> Result<TfidfModel> {
        if tokens.len() != idf.len() {
            return Err(Error::InvalidArgument(format!(
                "tfidf: {} tokens but {} idf entries",
                tokens.len(),
                idf.len()
            )));
        }
        if let Some(v) = idf.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "tfidf: idf entry {v} is not positive and finite"
            )));
        }
        let token_to_col: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if token_to_col.len() != tokens.len() {
            return Err(Error::InvalidArgument(
                "tfidf: duplicate token in vocabulary".to_string(),
            ));
        }
        Ok(TfidfModel {
            tokens,
            idf,
            min_token_len,
            token_to_col,
        })
    }

    /// Vocabulary in column order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn min_token_len(&self) -> usize {
        self.min_token_len
    }

    pub fn dim(&self) -> usize {
        self.tokens.len()
    }

    pub fn col_of(&self, token: &str) -> Option<usize> {
        self.token_to_col.get(token).copied()
    }

    /// Featurizes one document: raw-count tf × idf, L2-normalized. Tokens
    /// outside the vocabulary contribute nothing; a document with no known
    /// tokens maps to the zero vector.
    pub fn transform(&self, text: &str) -> Vec<f64> {
        let mut row = vec![0.0; self.tokens.len()];
        for token in tokenize(text, self.min_token_len) {
            if let Some(col) = self.col_of(&token) {
                row[col] += 1.0;
            }
        }
        for (col, v) in row.iter_mut().enumerate() {
            *v *= self.idf[col];
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        row
    }
}

/// Fits the TF-IDF vocabulary/idf on a corpus with the given minimum token
/// length, then transforms every document. The returned rows are exactly
/// what [`TfidfModel::transform`] produces on the same texts (same code
/// path), so re-transforming the training documents is bitwise identical.
pub fn tfidf_fit_transform<S: AsRef<str>>(
    docs: &[S],
    min_token_len: usize,
) -> Result<(TfidfModel, Vec<Vec<f64>>)> {
    if docs.is_empty() {
        return Err(Error::InvalidArgument(
            "tfidf: empty corpus".to_string(),
        ));
    }
    let mut tokens: Vec<String> = Vec::new();
    let mut token_to_col: HashMap<String, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    for doc in docs {
        let mut seen: HashSet<usize> = HashSet::new();
        for token in tokenize(doc.as_ref(), min_token_len) {
            let col = *token_to_col.entry(token.clone()).or_insert_with(|| {
                tokens.push(token);
                df.push(0);
                tokens.len() - 1
            });
            if seen.insert(col) {
                df[col] += 1;
            }
        }
    }
    if tokens.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "tfidf: no tokens of length ≥ {min_token_len} in the corpus"
        )));
    }
    let n = docs.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let model = TfidfModel::new(tokens, idf, min_token_len)?;
    let matrix = docs.iter().map(|d| model.transform(d.as_ref())).collect();
    Ok((model, matrix))
}

/// One-vs-rest linear SVM: per-class weight vector and bias. The decision
/// for class `c` is the sign of `w_c·x + b_c`; the multi-class label is the
/// argmax of the three margins (lowest index on exact ties).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub weights: [Vec<f64>; CLASSES],
    pub bias: [f64; CLASSES],
    pub lambda: f64,
}

fn check_features(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x.first().map(|r| r.len()).unwrap_or(0);
    if x.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidArgument(
            "svm: feature rows have inconsistent dimensions".to_string(),
        ));
    }
    Ok(dim)
}

/// Hinge + regularization objective of one binary subproblem:
/// `(1/n) Σ max(0, 1 − yᵢ(w·xᵢ + b)) + λ‖w‖²`.
fn primal_objective(x: &[Vec<f64>], signs: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(signs)
        .map(|(xi, &y)| {
            let margin = dot(w, xi) + b;
            (1.0 - y * margin).max(0.0)
        })
        .sum();
    hinge / x.len() as f64 + lambda * dot(w, w)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Trains the one-vs-rest SVM; see [`svm_fit_with_history`]. The history is
/// discarded.
pub fn svm_fit(
    x: &[Vec<f64>],
    y: &[usize],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearSvm> {
    svm_fit_with_history(x, y, lambda, epochs, seed).map(|(model, _)| model)
}

/// Trains one Pegasos-style binary subproblem per class (labels mapped to
/// ±1) with step size `η_t = 1/(λt)` over a global, per-class step counter:
/// on a margin violation `w ← (1−η_t λ)w + η_t y xᵢ` and `b ← b + η_t y`
/// (bias unregularized), otherwise decay only. Example order is reshuffled
/// every epoch with a per-class seeded generator, so training is fully
/// deterministic under the seed.
///
/// The returned history has one entry per epoch: the primal objective
/// (hinge + λ‖w‖², summed over the three subproblems) averaged over the
/// steps of that epoch — the epoch-averaged value is non-increasing on a
/// fixed dataset even though single steps are noisy.
pub fn svm_fit_with_history(
    x: &[Vec<f64>],
    y: &[usize],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<(LinearSvm, Vec<f64>)> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("svm: empty training set".to_string()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "svm: {} feature rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "svm: λ must be positive and finite, got {lambda}"
        )));
    }
    if epochs == 0 {
        return Err(Error::InvalidArgument("svm: epochs must be ≥ 1".to_string()));
    }
    let dim = check_features(x)?;
    for c in 0..CLASSES {
        if !y.contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "svm: class {c} has zero examples"
            )));
        }
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= CLASSES) {
        return Err(Error::InvalidArgument(format!(
            "svm: label {bad} outside {{0, 1, 2}}"
        )));
    }

    let mut weights: [Vec<f64>; CLASSES] = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut bias = [0.0; CLASSES];
    let mut history = vec![0.0; epochs];

    for c in 0..CLASSES {
        let signs: Vec<f64> = y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
        let mut order: Vec<usize> = (0..x.len()).collect();
        let w = &mut weights[c];
        let b = &mut bias[c];
        let mut t = 0u64;
        for epoch_objectives in history.iter_mut() {
            order.shuffle(&mut rng);
            let mut objective_sum = 0.0;
            for &i in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let margin = dot(w, &x[i]) + *b;
                let violated = signs[i] * margin < 1.0;
                let decay = 1.0 - eta * lambda;
                for wj in w.iter_mut() {
                    *wj *= decay;
                }
                if violated {
                    for (wj, &xj) in w.iter_mut().zip(&x[i]) {
                        *wj += eta * signs[i] * xj;
                    }
                    *b += eta * signs[i];
                }
                objective_sum += primal_objective(x, &signs, w, *b, lambda);
            }
            *epoch_objectives += objective_sum / x.len() as f64;
        }
    }
    Ok((
        LinearSvm {
            weights,
            bias,
            lambda,
        },
        history,
    ))
}

impl LinearSvm {
    /// Margin of every class for one feature vector.
    pub fn margins(&self, x: &[f64]) -> Result<[f64; CLASSES]> {
        if x.len() != self.weights[0].len() {
            return Err(Error::InvalidArgument(format!(
                "svm: input has dimension {}, model expects {}",
                x.len(),
                self.weights[0].len()
            )));
        }
        let mut margins = [0.0; CLASSES];
        for c in 0..CLASSES {
            margins[c] = dot(&self.weights[c], x) + self.bias[c];
        }
        Ok(margins)
    }
}

/// Predicted label: argmax of the class margins, lowest index on exact ties.
pub fn svm_predict(model: &LinearSvm, x: &[f64]) -> Result<usize> {
    let margins = model.margins(x)?;
    let mut best = 0;
    for c in 1..CLASSES {
        if margins[c] > margins[best] {
            best = c;
        }
    }
    Ok(best)
}

/// The dual objective `Σ αᵢ − ½ Σᵢ Σⱼ yᵢ yⱼ αᵢ αⱼ ⟨xᵢ, xⱼ⟩`, evaluated
/// exactly as written. `y` entries are the ±1 labels of one binary
/// subproblem. Used as a diagnostic/verification oracle, not for training.
pub fn eval_dual_objective(alpha: &[f64], x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    if alpha.len() != x.len() || alpha.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "dual objective: {} α vs {} rows vs {} labels",
            alpha.len(),
            x.len(),
            y.len()
        )));
    }
    check_features(x)?;
    let linear: f64 = alpha.iter().sum();
    let mut quadratic = 0.0;
    for i in 0..alpha.len() {
        for j in 0..alpha.len() {
            quadratic += y[i] * y[j] * alpha[i] * alpha[j] * dot(&x[i], &x[j]);
        }
    }
    Ok(linear - 0.5 * quadratic)
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// A trained SVM baseline bundled with its featurizer, serialized as a
/// single structured text file (`GENMA-SVM 1` header, `key=value` lines).
/// Floats are written in shortest round-trip form, so save → load → save is
/// byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmBundle {
    pub tfidf: TfidfModel,
    pub svm: LinearSvm,
}

const SVM_MAGIC: &str = "GENMA-SVM 1";

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_floats(line: usize, key: &str, value: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(' ')
        .map(|s| {
            s.parse()
                .map_err(|_| Error::parse(line, format!("bad float in `{key}`: `{s}`")))
        })
        .collect()
}

impl SvmBundle {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot write `{}`: {}", path.display(), e))
        })?;
        let mut w = BufWriter::new(file);
        writeln!(w, "{SVM_MAGIC}")?;
        writeln!(w, "lambda={}", self.svm.lambda)?;
        writeln!(w, "min_token_len={}", self.tfidf.min_token_len())?;
        writeln!(w, "vocab={}", self.tfidf.tokens().join(" "))?;
        writeln!(w, "idf={}", join_floats(self.tfidf.idf()))?;
        for c in 0..CLASSES {
            writeln!(w, "w{c}={}", join_floats(&self.svm.weights[c]))?;
            writeln!(w, "b{c}={}", self.svm.bias[c])?;
        }
        writeln!(w, "end")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SvmBundle> {
        let file = File::open(path).map_err(|e| {
            Error::InvalidArgument(format!("cannot read `{}`: {}", path.display(), e))
        })?;
        let reader = BufReader::new(file);
        let mut fields: HashMap<String, (usize, String)> = HashMap::new();
        let mut saw_magic = false;
        let mut saw_end = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            if line_no == 1 {
                if line != SVM_MAGIC {
                    return Err(Error::parse(1, format!("bad magic `{line}`")));
                }
                saw_magic = true;
                continue;
            }
            if line == "end" {
                saw_end = true;
                break;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected key=value, got `{line}`"))
            })?;
            fields.insert(key.to_string(), (line_no, value.to_string()));
        }
        if !saw_magic {
            return Err(Error::parse(1, "empty model file"));
        }
        if !saw_end {
            return Err(Error::parse(fields.len() + 1, "missing `end` line"));
        }
        let get = |key: &str| -> Result<(usize, String)> {
            fields
                .get(key)
                .cloned()
                .ok_or_else(|| Error::parse(1, format!("missing field `{key}`")))
        };
        let (l, v) = get("lambda")?;
        let lambda: f64 = v
            .parse()
            .map_err(|_| Error::parse(l, format!("bad value for `lambda`: `{v}`")))?;
        let (l, v) = get("min_token_len")?;
        let min_token_len: usize = v
            .parse()
            .map_err(|_| Error::parse(l, format!("bad value for `min_token_len`: `{v}`")))?;
        let (_, v) = get("vocab")?;
        let tokens: Vec<String> = if v.is_empty() {
            Vec::new()
        } else {
            v.split(' ').map(|s| s.to_string()).collect()
        };
        let (l, v) = get("idf")?;
        let idf = parse_floats(l, "idf", &v)?;
        let tfidf = TfidfModel::new(tokens, idf, min_token_len)?;
        let mut weights: [Vec<f64>; CLASSES] = [Vec::new(), Vec::new(), Vec::new()];
        let mut bias = [0.0; CLASSES];
        for c in 0..CLASSES {
            let (l, v) = get(&format!("w{c}"))?;
            weights[c] = parse_floats(l, &format!("w{c}"), &v)?;
            if weights[c].len() != tfidf.dim() {
                return Err(Error::parse(
                    l,
                    format!(
                        "class {c} weights have {} entries for {} vocabulary columns",
                        weights[c].len(),
                        tfidf.dim()
                    ),
                ));
            }
            let (l, v) = get(&format!("b{c}"))?;
            bias[c] = v
                .parse()
                .map_err(|_| Error::parse(l, format!("bad value for `b{c}`: `{v}`")))?;
        }
        Ok(SvmBundle {
            tfidf,
            svm: LinearSvm {
                weights,
                bias,
                lambda,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // ----- TF-IDF -----

    #[test]
    fn tokenizer_keeps_alphanumeric_runs_of_min_length() {
        assert_eq!(
            tokenize("Hello, WORLD!! a b2c #tag", 2),
            vec!["hello", "world", "b2c", "tag"]
        );
        assert_eq!(tokenize("a b c", 1), vec!["a", "b", "c"]);
        assert!(tokenize("!!! ...", 2).is_empty());
    }

    #[test]
    fn single_char_corpus_idf_matches_hand_formula() {
        // docs ["a b", "a c"], min token length 1:
        // "a" appears in both docs → idf = ln(3/3)+1 = 1 exactly.
        let (model, rows) = tfidf_fit_transform(&["a b", "a c"], 1).unwrap();
        assert_eq!(model.tokens(), ["a", "b", "c"]);
        assert_eq!(model.idf()[0], 1.0);
        let idf_rare = (3.0_f64 / 2.0).ln() + 1.0;
        assert!((model.idf()[1] - idf_rare).abs() < 1e-15);
        assert!((model.idf()[2] - idf_rare).abs() < 1e-15);
        // Row 0 holds tokens a and b only.
        assert_eq!(rows[0][2], 0.0);
        let norm: f64 = rows[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_doc_corpus_matches_hand_computed_matrix() {
        // Independent hand evaluation of tf·idf with L2 normalization.
        let docs = [
            "apple banana apple",
            "banana cherry",
            "apple cherry cherry date",
        ];
        let (model, rows) = tfidf_fit_transform(&docs, 2).unwrap();
        assert_eq!(model.tokens(), ["apple", "banana", "cherry", "date"]);

        let idf_df2 = (4.0_f64 / 3.0).ln() + 1.0; // apple, banana, cherry
        let idf_df1 = (4.0_f64 / 2.0).ln() + 1.0; // date
        for (col, expect) in [(0, idf_df2), (1, idf_df2), (2, idf_df2), (3, idf_df1)] {
            assert!((model.idf()[col] - expect).abs() < 1e-15, "col {col}");
        }

        let expect_row = |tf: [f64; 4]| -> Vec<f64> {
            let raw: Vec<f64> = tf
                .iter()
                .zip([idf_df2, idf_df2, idf_df2, idf_df1])
                .map(|(t, i)| t * i)
                .collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            raw.iter().map(|v| v / norm).collect()
        };
        let expected = [
            expect_row([2.0, 1.0, 0.0, 0.0]),
            expect_row([0.0, 1.0, 1.0, 0.0]),
            expect_row([1.0, 0.0, 2.0, 1.0]),
        ];
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!(
                    (v - expected[r][c]).abs() < 1e-9,
                    "row {r} col {c}: {v} vs {}",
                    expected[r][c]
                );
            }
        }
    }

    #[test]
    fn single_document_gets_unit_idf_and_unit_norm() {
        let (model, rows) = tfidf_fit_transform(&["red green green blue"], 2).unwrap();
        for &v in model.idf() {
            assert_eq!(v, 1.0); // ln(2/2)+1
        }
        let norm: f64 = rows[0].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_token_contributes_nothing() {
        let (model, _) = tfidf_fit_transform(&["apple banana", "apple cherry"], 2).unwrap();
        let with_unknown = model.transform("apple zebra999");
        let without = model.transform("apple");
        assert_eq!(with_unknown, without);
    }

    #[test]
    fn transform_of_training_docs_is_bitwise_identical_to_fit_rows() {
        let docs = ["some tweet text", "another tweet", "text text text tweet"];
        let (model, rows) = tfidf_fit_transform(&docs, 2).unwrap();
        for (doc, row) in docs.iter().zip(&rows) {
            assert_eq!(&model.transform(doc), row);
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        assert!(tfidf_fit_transform::<&str>(&[], 2).is_err());
        assert!(tfidf_fit_transform(&["!!", "??"], 2).is_err());
    }

    // ----- SVM -----

    fn separable_toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let offsets = [(-0.4, 0.0), (0.4, 0.0), (0.0, -0.4), (0.0, 0.4)];
        for (cx, cy, label) in [(5.0, 0.0, 0), (-5.0, 0.0, 1), (0.0, 5.0, 2)] {
            for (dx, dy) in offsets {
                x.push(vec![cx + dx, cy + dy]);
                y.push(label);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_clusters_reach_perfect_training_accuracy() {
        let (x, y) = separable_toy();
        let model = svm_fit(&x, &y, 0.01, 50, 7).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, &yi)| svm_predict(&model, xi).unwrap() == yi)
            .count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn duplicated_dataset_keeps_probe_decisions() {
        let (x, y) = separable_toy();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().cloned());
        // A strong regularizer keeps the early 1/(lambda*t) steps small, so
        // both runs settle near the shared optimum quickly.
        let base = svm_fit(&x, &y, 1.0, 200, 7).unwrap();
        let doubled = svm_fit(&x2, &y2, 1.0, 200, 7).unwrap();
        // Probe inside and around each cluster, away from the ambiguous
        // far-field corners where the data carries no signal.
        let probes = [
            (5.0, 0.0, 0),
            (6.0, 1.0, 0),
            (4.0, -1.0, 0),
            (-5.0, 0.0, 1),
            (-6.0, 1.0, 1),
            (-4.0, -1.0, 1),
            (0.0, 5.0, 2),
            (1.0, 6.0, 2),
            (-1.0, 4.0, 2),
        ];
        for (px, py, expected) in probes {
            let probe = vec![px, py];
            let a = svm_predict(&base, &probe).unwrap();
            let b = svm_predict(&doubled, &probe).unwrap();
            assert_eq!(a, b, "probe ({px}, {py})");
            assert_eq!(a, expected, "probe ({px}, {py})");
        }
    }

    #[test]
    fn balanced_identical_features_leave_margin_near_zero() {
        // Class 0 has as many examples as the rest combined and every row is
        // the same vector, so the class-0 subproblem is a balanced tug of
        // war on one point: its margin settles near zero.
        let x: Vec<Vec<f64>> = vec![vec![1.0, 1.0]; 4];
        let y = vec![0, 0, 1, 2];
        let model = svm_fit(&x, &y, 0.01, 50, 3).unwrap();
        let margins = model.margins(&[1.0, 1.0]).unwrap();
        // The decaying-step walk wanders inside the hinge's flat region, so
        // the margin lands near zero rather than exactly on it: well inside
        // (-1, 1) and never losing to the all-negative subproblems.
        assert!(margins[0].abs() < 0.5, "margin {margins:?}");
        assert!(margins[0] > margins[1], "margin {margins:?}");
        assert!(margins[0] > margins[2], "margin {margins:?}");
    }

    #[test]
    fn all_zero_weights_predict_class_zero() {
        let model = LinearSvm {
            weights: [vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]],
            bias: [0.0; 3],
            lambda: DEFAULT_LAMBDA,
        };
        assert_eq!(svm_predict(&model, &[3.0, -1.0]).unwrap(), 0);
    }

    #[test]
    fn hand_set_weights_select_class_two() {
        let model = LinearSvm {
            weights: [vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]],
            bias: [0.0, 0.0, 0.1],
            lambda: DEFAULT_LAMBDA,
        };
        // margins at (1, 1): [1, 1, 4.1]
        assert_eq!(svm_predict(&model, &[1.0, 1.0]).unwrap(), 2);
    }

    #[test]
    fn prediction_invariant_under_uniform_positive_rescaling() {
        let model = LinearSvm {
            weights: [vec![1.5, -0.25], vec![0.75, 0.5], vec![-1.0, 2.0]],
            bias: [0.1, -0.2, 0.05],
            lambda: DEFAULT_LAMBDA,
        };
        let scaled = LinearSvm {
            weights: [
                model.weights[0].iter().map(|v| v * 3.0).collect(),
                model.weights[1].iter().map(|v| v * 3.0).collect(),
                model.weights[2].iter().map(|v| v * 3.0).collect(),
            ],
            bias: [
                model.bias[0] * 3.0,
                model.bias[1] * 3.0,
                model.bias[2] * 3.0,
            ],
            lambda: DEFAULT_LAMBDA,
        };
        for probe in [[2.0, 1.0], [-1.0, 4.0], [0.5, -0.5], [3.0, 3.0]] {
            assert_eq!(
                svm_predict(&model, &probe).unwrap(),
                svm_predict(&scaled, &probe).unwrap()
            );
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let (x, y) = separable_toy();
        let model = svm_fit(&x, &y, DEFAULT_LAMBDA, 5, 1).unwrap();
        assert!(svm_predict(&model, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn missing_class_is_rejected() {
        let x = vec![vec![1.0], vec![-1.0]];
        let err = svm_fit(&x, &[0, 1], DEFAULT_LAMBDA, 5, 1)
            .unwrap_err()
            .to_string();
        assert!(err.contains("class 2"), "{err}");
    }

    #[test]
    fn fit_is_deterministic_under_seed() {
        let (x, y) = separable_toy();
        let a = svm_fit(&x, &y, DEFAULT_LAMBDA, 10, 5).unwrap();
        let b = svm_fit(&x, &y, DEFAULT_LAMBDA, 10, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn epoch_averaged_objective_is_non_increasing() {
        let (x, y) = separable_toy();
        let (_, history) = svm_fit_with_history(&x, &y, 0.01, 6, 11).unwrap();
        assert!(history.len() >= 5);
        for w in history.windows(2) {
            assert!(
                w[1] <= w[0] * (1.0 + 1e-12),
                "objective increased: {history:?}"
            );
        }
    }

    // ----- Dual objective -----

    #[test]
    fn dual_objective_vanishes_at_zero_alpha() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let value = eval_dual_objective(&[0.0, 0.0], &x, &[1.0, -1.0]).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn dual_objective_single_sample_hand_value() {
        // α=[1], ‖x‖²=2, y=+1 → 1 − ½·2 = 0.
        let value = eval_dual_objective(&[1.0], &[vec![1.0, 1.0]], &[1.0]).unwrap();
        assert!(value.abs() < 1e-15);
    }

    #[test]
    fn dual_objective_symmetric_pair_hand_value() {
        // x and −x with equal α = a and opposite labels:
        // Σα = 2a; quadratic = 4a²‖x‖² → objective 2a − 2a²‖x‖².
        let a = 0.25;
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let value = eval_dual_objective(&[a, a], &x, &[1.0, -1.0]).unwrap();
        let hand = 2.0 * a - 2.0 * a * a * 1.0;
        assert!((value - hand).abs() < 1e-15, "{value} vs {hand}");
    }

    #[test]
    fn dual_objective_rejects_length_mismatch() {
        assert!(eval_dual_objective(&[1.0], &[vec![1.0], vec![2.0]], &[1.0, -1.0]).is_err());
    }

    proptest! {
        #[test]
        fn dual_objective_is_permutation_symmetric(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 2 + (rng.gen::<u64>() % 5) as usize;
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let alpha: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let y: Vec<f64> = (0..n)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let base = eval_dual_objective(&alpha, &x, &y).unwrap();

            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let xp: Vec<Vec<f64>> = perm.iter().map(|&i| x[i].clone()).collect();
            let ap: Vec<f64> = perm.iter().map(|&i| alpha[i]).collect();
            let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
            let permuted = eval_dual_objective(&ap, &xp, &yp).unwrap();
            prop_assert!((base - permuted).abs() < 1e-9, "{} vs {}", base, permuted);
        }
    }

    // ----- Serialization -----

    #[test]
    fn bundle_round_trip_is_byte_identical_and_prediction_preserving() {
        let dir = tempfile::tempdir().unwrap();
        let docs = ["good happy day", "bad sad day", "plain neutral words"];
        let (tfidf, rows) = tfidf_fit_transform(&docs, 2).unwrap();
        let svm = svm_fit(&rows, &[0, 1, 2], DEFAULT_LAMBDA, 10, 2).unwrap();
        let bundle = SvmBundle { tfidf, svm };

        let path_a = dir.path().join("model.svm");
        let path_b = dir.path().join("model2.svm");
        bundle.save(&path_a).unwrap();
        let loaded = SvmBundle::load(&path_a).unwrap();
        loaded.save(&path_b).unwrap();
        assert_eq!(
            std::fs::read(&path_a).unwrap(),
            std::fs::read(&path_b).unwrap()
        );
        assert_eq!(bundle, loaded);

        for doc in docs {
            let row_a = bundle.tfidf.transform(doc);
            let row_b = loaded.tfidf.transform(doc);
            assert_eq!(row_a, row_b);
            assert_eq!(
                svm_predict(&bundle.svm, &row_a).unwrap(),
                svm_predict(&loaded.svm, &row_b).unwrap()
            );
        }
    }

    #[test]
    fn bundle_load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.svm");
        std::fs::write(&path, "not a model\n").unwrap();
        assert!(SvmBundle::load(&path).is_err());
        std::fs::write(&path, "GENMA-SVM 1\nlambda=0.1\n").unwrap();
        assert!(SvmBundle::load(&path).is_err()); // missing fields / end
    }
}
