//! Evaluation metrics: 3×3 confusion matrix, per-class F1, unweighted
//! macro-F1, and accuracy, with a fixed-key text serialization and the
//! class-wise table rendering used by the CLI.

use crate::corpus::Sentiment;
use crate::error::{Error, Result};

/// Number of sentiment classes.
pub const CLASSES: usize = 3;

/// Evaluation summary for one labeled set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `confusion[g][p]` counts examples with gold class `g` predicted `p`.
    pub confusion: [[usize; CLASSES]; CLASSES],
    /// F1 per class, indexed by label id (positive, negative, neutral).
    pub per_class_f1: [f64; CLASSES],
    /// Unweighted mean of the three class F1 values.
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn check_labels(name: &str, labels: &[usize]) -> Result<()> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= CLASSES) {
        return Err(Error::InvalidArgument(format!(
            "{name} label {bad} outside {{0, 1, 2}}"
        )));
    }
    Ok(())
}

/// Tallies gold/predicted label pairs into a confusion matrix
/// (rows = gold, columns = predicted).
pub fn confusion_matrix(gold: &[usize], pred: &[usize]) -> Result<[[usize; CLASSES]; CLASSES]> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "confusion_matrix: {} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    check_labels("gold", gold)?;
    check_labels("predicted", pred)?;
    let mut matrix = [[0usize; CLASSES]; CLASSES];
    for (&g, &p) in gold.iter().zip(pred) {
        matrix[g][p] += 1;
    }
    Ok(matrix)
}

fn f1_of(tp: usize, pred_total: usize, gold_total: usize) -> f64 {
    // Degenerate 0/0 cases are defined as 0 to keep the macro mean finite.
    let precision = if pred_total == 0 {
        0.0
    } else {
        tp as f64 / pred_total as f64
    };
    let recall = if gold_total == 0 {
        0.0
    } else {
        tp as f64 / gold_total as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class F1 and their unweighted mean, from a confusion matrix.
pub fn macro_f1(confusion: &[[usize; CLASSES]; CLASSES]) -> Result<([f64; CLASSES], f64)> {
    let total: usize = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "macro_f1: confusion matrix is all zero".to_string(),
        ));
    }
    let mut per_class = [0.0; CLASSES];
    for (c, f1) in per_class.iter_mut().enumerate() {
        let tp = confusion[c][c];
        let col: usize = (0..CLASSES).map(|g| confusion[g][c]).sum();
        let row: usize = confusion[c].iter().sum();
        *f1 = f1_of(tp, col, row);
    }
    let macro_score = per_class.iter().sum::<f64>() / CLASSES as f64;
    Ok((per_class, macro_score))
}

/// Per-class F1 and macro-F1 computed directly from label lists by counting
/// true positives and the per-class prediction/gold totals, without building
/// a confusion matrix. Always equals the matrix path.
pub fn macro_f1_from_labels(gold: &[usize], pred: &[usize]) -> Result<([f64; CLASSES], f64)> {
    if gold.len() != pred.len() {
        return Err(Error::InvalidArgument(format!(
            "macro_f1_from_labels: {} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument(
            "macro_f1_from_labels: empty label lists".to_string(),
        ));
    }
    check_labels("gold", gold)?;
    check_labels("predicted", pred)?;
    let mut per_class = [0.0; CLASSES];
    for (c, f1) in per_class.iter_mut().enumerate() {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|&(&g, &p)| g == c && p == c)
            .count();
        let pred_total = pred.iter().filter(|&&p| p == c).count();
        let gold_total = gold.iter().filter(|&&g| g == c).count();
        *f1 = f1_of(tp, pred_total, gold_total);
    }
    let macro_score = per_class.iter().sum::<f64>() / CLASSES as f64;
    Ok((per_class, macro_score))
}

/// Builds the full report for a labeled set.
pub fn eval_report(gold: &[usize], pred: &[usize]) -> Result<EvalReport> {
    let confusion = confusion_matrix(gold, pred)?;
    let (per_class_f1, macro_score) = macro_f1(&confusion)?;
    let correct: usize = (0..CLASSES).map(|c| confusion[c][c]).sum();
    let total: usize = confusion.iter().flatten().sum();
    Ok(EvalReport {
        confusion,
        per_class_f1,
        macro_f1: macro_score,
        accuracy: correct as f64 / total as f64,
    })
}

impl EvalReport {
    /// Structured text serialization with exactly the keys
    /// `positive`, `negative`, `neutral`, `macro_f1`, `accuracy`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in 0..CLASSES {
            let name = Sentiment::from_label_id(c).expect("c < 3").as_str();
            out.push_str(&format!("{}={}\n", name, self.per_class_f1[c]));
        }
        out.push_str(&format!("macro_f1={}\n", self.macro_f1));
        out.push_str(&format!("accuracy={}\n", self.accuracy));
        out
    }

    /// Class-wise table rendering with the columns
    /// `Pos Class / Neg Class / Neut Class / Score`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10}{:>12}{:>12}{:>12}{:>10}\n",
            "", "Pos Class", "Neg Class", "Neut Class", "Score"
        ));
        out.push_str(&format!(
            "{:<10}{:>12.4}{:>12.4}{:>12.4}{:>10.4}\n",
            "F1",
            self.per_class_f1[0],
            self.per_class_f1[1],
            self.per_class_f1[2],
            self.macro_f1
        ));
        out.push_str(&format!("Accuracy  {:.4}\n", self.accuracy));
        out
    }
}
