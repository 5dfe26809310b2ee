//! Attention visualization: projects attention weights onto characters and
//! renders them as terminal-colored text or a static HTML report.
//!
//! ## ANSI escape table
//!
//! | band   | prefix      | suffix    |
//! |--------|-------------|-----------|
//! | high   | `\x1b[31m` (red)  | `\x1b[0m` (reset) |
//! | medium | `\x1b[34m` (blue) | `\x1b[0m` (reset) |
//! | low    | — (plain)   | —         |
//!
//! Runs of equal band share one prefix/suffix pair. Stripping every CSI
//! escape sequence from the rendered string yields the input text unchanged.
//!
//! ## HTML structure
//!
//! One `<section class="entry">` per map, containing a `<p class="text">` of
//! `<span class="ch">` elements (one per character, background
//! `rgba(220,38,38,A)` where `A` = weight ÷ max weight of that map) and a
//! `<table class="pooled">` listing the top-10 pooled positions by weight
//! with their receptive character spans.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

/// Attention weights for one example, both at the pooled-position level and
/// projected down to characters of the normalized text.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    /// The normalized text the weights refer to.
    pub text: String,
    /// One weight per character of `text`, each in `[0, 1]`.
    pub char_weights: Vec<f64>,
    /// The raw attention distribution over pooled positions.
    pub pooled_weights: Vec<f64>,
    /// Per pooled position, the inclusive character interval it covers.
    pub spans: Vec<(usize, usize)>,
}

impl AttentionMap {
    fn validate(&self) -> Result<()> {
        let chars = self.text.chars().count();
        if chars == 0 {
            return Err(Error::InvalidArgument(
                "attention map has empty text".to_string(),
            ));
        }
        if self.char_weights.len() != chars {
            return Err(Error::InvalidArgument(format!(
                "attention map has {} character weights for {} characters",
                self.char_weights.len(),
                chars
            )));
        }
        if let Some(w) = self
            .char_weights
            .iter()
            .find(|w| !w.is_finite() || **w < 0.0 || **w > 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "character weight {w} outside [0, 1]"
            )));
        }
        if self.spans.len() != self.pooled_weights.len() {
            return Err(Error::InvalidArgument(format!(
                "attention map has {} spans for {} pooled weights",
                self.spans.len(),
                self.pooled_weights.len()
            )));
        }
        Ok(())
    }
}

/// Importance band of a character; ordering follows importance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Band {
    Low,
    Medium,
    High,
}

/// Quantile cut points over the *distinct* weight values: weights at or
/// above the `high` quantile band high, at or above `medium` band medium,
/// the rest band low. Defaults put the top decile of values in the high band
/// and the next quartile in the medium band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandThresholds {
    pub high: f64,
    pub medium: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds {
            high: 0.90,
            medium: 0.65,
        }
    }
}

impl BandThresholds {
    fn validate(&self) -> Result<()> {
        if !(0.0 < self.medium && self.medium <= self.high && self.high <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "band thresholds must satisfy 0 < medium ≤ high ≤ 1, got medium={} high={}",
                self.medium, self.high
            )));
        }
        Ok(())
    }
}

/// Quantile over the sorted distinct values: index `min(u−1, floor(q·u))`.
/// Using distinct values makes the bands describe the weight *levels*
/// present rather than the character counts, so a map that is mostly
/// background zeros still isolates its few heavy spans in the high band.
fn distinct_quantile(sorted_distinct: &[f64], q: f64) -> f64 {
    let u = sorted_distinct.len();
    let idx = ((q * u as f64).floor() as usize).min(u - 1);
    sorted_distinct[idx]
}

/// Assigns each character of the map to an importance band by weight
/// quantiles. Band assignment is monotone in the weight: a higher weight
/// never receives a lower band.
pub fn rank_characters(map: &AttentionMap, bands: &BandThresholds) -> Result<Vec<Band>> {
    map.validate()?;
    bands.validate()?;
    let mut distinct: Vec<f64> = map.char_weights.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    distinct.dedup();
    let t_high = distinct_quantile(&distinct, bands.high);
    let t_medium = distinct_quantile(&distinct, bands.medium);
    Ok(map
        .char_weights
        .iter()
        .map(|&w| {
            if w >= t_high {
                Band::High
            } else if w >= t_medium {
                Band::Medium
            } else {
                Band::Low
            }
        })
        .collect())
}

const ANSI_RED: &str = "\x1b[31m";
const ANSI_BLUE: &str = "\x1b[34m";
const ANSI_RESET: &str = "\x1b[0m";

/// Renders the map for a terminal: high-band runs in red, medium in blue,
/// low plain. Stripping the escape codes recovers the text exactly.
pub fn render_ansi(map: &AttentionMap, bands: &BandThresholds) -> Result<String> {
    if map.text.is_empty() {
        return Ok(String::new());
    }
    let ranks = rank_characters(map, bands)?;
    let mut out = String::with_capacity(map.text.len() + 16);
    let mut current: Option<Band> = None;
    for (ch, &band) in map.text.chars().zip(&ranks) {
        if current != Some(band) {
            if matches!(current, Some(Band::High) | Some(Band::Medium)) {
                out.push_str(ANSI_RESET);
            }
            match band {
                Band::High => out.push_str(ANSI_RED),
                Band::Medium => out.push_str(ANSI_BLUE),
                Band::Low => {}
            }
            current = Some(band);
        }
        out.push(ch);
    }
    if matches!(current, Some(Band::High) | Some(Band::Medium)) {
        out.push_str(ANSI_RESET);
    }
    Ok(out)
}

/// Removes every CSI escape sequence (`ESC [ … final-byte`) from a string.
pub fn strip_ansi(s: &str) -> String {
    static CSI: OnceLock<Regex> = OnceLock::new();
    let re = CSI.get_or_init(|| Regex::new("\u{1b}\\[[0-9;]*[A-Za-z]").expect("valid regex"));
    re.replace_all(s, "").into_owned()
}

fn escape_html(c: char) -> String {
    match c {
        '&' => "&amp;".to_string(),
        '<' => "&lt;".to_string(),
        '>' => "&gt;".to_string(),
        '"' => "&quot;".to_string(),
        other => other.to_string(),
    }
}

/// Writes a static HTML report of the given maps. Each character sits in a
/// `span.ch` whose background opacity equals its weight divided by the map's
/// maximum weight; a `table.pooled` lists the top-10 pooled positions per
/// map. An empty list yields a valid document with no entries.
pub fn render_html(maps: &[AttentionMap], out: &Path) -> Result<()> {
    let mut doc = String::new();
    doc.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    doc.push_str("<title>Attention report</title>\n<style>\n");
    doc.push_str("body { font-family: monospace; margin: 2em; }\n");
    doc.push_str(".text { font-size: 1.2em; line-height: 1.8; }\n");
    doc.push_str(".ch { padding: 0 1px; }\n");
    doc.push_str(".pooled { border-collapse: collapse; margin: 1em 0; }\n");
    doc.push_str(".pooled td, .pooled th { border: 1px solid #999; padding: 2px 8px; }\n");
    doc.push_str("</style>\n</head>\n<body>\n");
    for map in maps {
        map.validate()?;
        let max = map
            .char_weights
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        doc.push_str("<section class=\"entry\">\n<p class=\"text\">");
        for (ch, &w) in map.text.chars().zip(&map.char_weights) {
            let alpha = if max > 0.0 { w / max } else { 0.0 };
            write!(
                doc,
                "<span class=\"ch\" style=\"background: rgba(220,38,38,{alpha:.6})\">{}</span>",
                escape_html(ch)
            )
            .expect("writing to String cannot fail");
        }
        doc.push_str("</p>\n<table class=\"pooled\">\n");
        doc.push_str("<tr><th>position</th><th>span</th><th>weight</th></tr>\n");
        let mut order: Vec<usize> = (0..map.pooled_weights.len()).collect();
        order.sort_by(|&a, &b| {
            map.pooled_weights[b]
                .partial_cmp(&map.pooled_weights[a])
                .expect("finite")
                .then(a.cmp(&b))
        });
        for &p in order.iter().take(10) {
            let (start, end) = map.spans[p];
            writeln!(
                doc,
                "<tr><td>{p}</td><td>{start}..={end}</td><td>{:.6}</td></tr>",
                map.pooled_weights[p]
            )
            .expect("writing to String cannot fail");
        }
        doc.push_str("</table>\n</section>\n");
    }
    doc.push_str("</body>\n</html>\n");
    std::fs::write(out, doc).map_err(|e| {
        Error::InvalidArgument(format!("cannot write `{}`: {}", out.display(), e))
    })
}
