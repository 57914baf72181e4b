//! Evaluation math: alignment correctness/missing/precision/recall/F1,
//! transcription error rates, and corpus statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::LoadedEntry;
use crate::matchers::{edit_distance_chars, normalize_text, NormalizationOptions};
use crate::model::{AlignmentResult, GroundTruth, RegionKind};

// --- Alignment metrics ----------------------------------------------------

/// Fraction of predicted regions that are correct; 1 when nothing is
/// predicted.
pub fn correctness_score(pred: &BTreeSet<String>, gt: &BTreeSet<String>) -> f64 {
    if pred.is_empty() {
        return 1.0;
    }
    pred.intersection(gt).count() as f64 / pred.len() as f64
}

/// Fraction of expected regions absent from the prediction; 0 when nothing
/// is expected.
pub fn missing_score(pred: &BTreeSet<String>, gt: &BTreeSet<String>) -> f64 {
    if gt.is_empty() {
        return 0.0;
    }
    gt.difference(pred).count() as f64 / gt.len() as f64
}

/// Precision is zero (not one) for an empty prediction; recall = 1 - S_m;
/// F1 is the harmonic mean, zero when p + r = 0.
pub fn precision_recall_f1(pred: &BTreeSet<String>, gt: &BTreeSet<String>) -> (f64, f64, f64) {
    let precision = if pred.is_empty() {
        0.0
    } else {
        pred.intersection(gt).count() as f64 / pred.len() as f64
    };
    let recall = 1.0 - missing_score(pred, gt);
    let f1 = harmonic_f1(precision, recall);
    (precision, recall, f1)
}

fn harmonic_f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineScores {
    pub sc: f64,
    pub sm: f64,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

pub fn line_scores(pred: &BTreeSet<String>, gt: &BTreeSet<String>) -> LineScores {
    let sc = correctness_score(pred, gt);
    let sm = missing_score(pred, gt);
    let (p, r, f1) = precision_recall_f1(pred, gt);
    LineScores { sc, sm, p, r, f1 }
}

/// Per-line scores plus unweighted dataset averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentScores {
    pub per_line: BTreeMap<String, LineScores>,
    pub avg: LineScores,
}

fn average(per_line: &BTreeMap<String, LineScores>) -> LineScores {
    let n = per_line.len() as f64;
    if per_line.is_empty() {
        return LineScores {
            sc: 0.0,
            sm: 0.0,
            p: 0.0,
            r: 0.0,
            f1: 0.0,
        };
    }
    let mut avg = LineScores {
        sc: 0.0,
        sm: 0.0,
        p: 0.0,
        r: 0.0,
        f1: 0.0,
    };
    for s in per_line.values() {
        avg.sc += s.sc;
        avg.sm += s.sm;
        avg.p += s.p;
        avg.r += s.r;
        avg.f1 += s.f1;
    }
    avg.sc /= n;
    avg.sm /= n;
    avg.p /= n;
    avg.r /= n;
    avg.f1 /= n;
    avg
}

/// Scores one slide's alignment against its ground truth. Every line named
/// by either side is scored; a line missing from the prediction counts as
/// an empty prediction.
pub fn evaluate_alignment(result: &AlignmentResult, gt: &GroundTruth) -> AlignmentScores {
    let mut line_ids: BTreeSet<&String> = result.lines.keys().collect();
    line_ids.extend(gt.lines.keys());
    let per_line: BTreeMap<String, LineScores> = line_ids
        .into_iter()
        .map(|line_id| {
            let pred = result.predicted_set(line_id);
            let expected = gt.lines.get(line_id).cloned().unwrap_or_default();
            (line_id.clone(), line_scores(&pred, &expected))
        })
        .collect();
    let avg = average(&per_line);
    AlignmentScores { per_line, avg }
}

/// Dataset-level scores: unweighted mean over all lines of all slides.
/// Line keys are prefixed with the slide id to stay unique.
pub fn evaluate_dataset(pairs: &[(&AlignmentResult, &GroundTruth)]) -> AlignmentScores {
    let mut per_line = BTreeMap::new();
    for (result, gt) in pairs {
        let scores = evaluate_alignment(result, gt);
        for (line_id, s) in scores.per_line {
            per_line.insert(format!("{}/{}", result.slide_id, line_id), s);
        }
    }
    let avg = average(&per_line);
    AlignmentScores { per_line, avg }
}

// --- Transcription metrics ------------------------------------------------

fn word_tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Word-level edit distance over whitespace tokens.
pub fn edit_distance(reference: &str, hypothesis: &str) -> usize {
    crate::matchers::edit_distance_slices(&word_tokens(reference), &word_tokens(hypothesis))
}

/// Character edit distance / reference length; 0 when both empty, 1 when
/// only the reference is empty.
pub fn cer(reference: &str, hypothesis: &str) -> f64 {
    let ref_len = reference.chars().count();
    if ref_len == 0 {
        return if hypothesis.is_empty() { 0.0 } else { 1.0 };
    }
    edit_distance_chars(reference, hypothesis) as f64 / ref_len as f64
}

/// Word edit distance / reference word count; same empty-reference
/// conventions as [`cer`].
pub fn wer(reference: &str, hypothesis: &str) -> f64 {
    let ref_words = word_tokens(reference).len();
    if ref_words == 0 {
        return if word_tokens(hypothesis).is_empty() {
            0.0
        } else {
            1.0
        };
    }
    edit_distance(reference, hypothesis) as f64 / ref_words as f64
}

fn token_bag(s: &str) -> BTreeMap<String, usize> {
    let opts = NormalizationOptions::default();
    let mut bag = BTreeMap::new();
    for token in normalize_text(s, opts).split_whitespace() {
        *bag.entry(token.to_string()).or_insert(0) += 1;
    }
    bag
}

/// Bag-of-words precision/recall/F1 on normalized tokens with multiset
/// intersection.
pub fn transcription_prf(reference: &str, hypothesis: &str) -> (f64, f64, f64) {
    let ref_bag = token_bag(reference);
    let hyp_bag = token_bag(hypothesis);
    let ref_total: usize = ref_bag.values().sum();
    let hyp_total: usize = hyp_bag.values().sum();
    let overlap: usize = hyp_bag
        .iter()
        .map(|(token, count)| (*count).min(ref_bag.get(token).copied().unwrap_or(0)))
        .sum();
    let p = if hyp_total == 0 {
        0.0
    } else {
        overlap as f64 / hyp_total as f64
    };
    let r = if ref_total == 0 {
        0.0
    } else {
        overlap as f64 / ref_total as f64
    };
    (p, r, harmonic_f1(p, r))
}

// --- Corpus statistics ----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn stats_of(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Some(Stats {
        min: sorted[0],
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
    })
}

/// Per-slide segment duration, OCR word count and ASR word count stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub slides: usize,
    pub duration_s: Stats,
    pub ocr_words: Stats,
    pub asr_words: Stats,
}

impl CorpusStats {
    /// Aligned plain-text table, one row per quantity.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<22}{:>8}{:>8}{:>10}{:>10}\n",
            "", "Min", "Max", "Mean", "Median"
        ));
        for (label, s) in [
            ("Duration (s)", &self.duration_s),
            ("Word count in OCR", &self.ocr_words),
            ("Word count in ASR", &self.asr_words),
        ] {
            out.push_str(&format!(
                "{:<22}{:>8}{:>8}{:>10.2}{:>10}\n",
                label, s.min, s.max, s.mean, s.median
            ));
        }
        out
    }
}

/// Segment duration of a slide = last line t_end - first line t_start.
/// OCR/ASR word counts are whitespace tokens over all region/line texts.
pub fn corpus_stats(entries: &[LoadedEntry]) -> Option<CorpusStats> {
    let mut durations = Vec::new();
    let mut ocr_words = Vec::new();
    let mut asr_words = Vec::new();
    for entry in entries {
        if let (Some(first), Some(last)) = (entry.transcript.lines.first(), entry.transcript.lines.last()) {
            durations.push(last.t_end - first.t_start);
        }
        let ocr: usize = entry
            .slide
            .regions
            .iter()
            .filter(|r| r.kind == RegionKind::Textual || !r.text.trim().is_empty())
            .map(|r| word_tokens(&r.text).len())
            .sum();
        ocr_words.push(ocr as f64);
        let asr: usize = entry
            .transcript
            .lines
            .iter()
            .map(|l| word_tokens(&l.text).len())
            .sum();
        asr_words.push(asr as f64);
    }
    Some(CorpusStats {
        slides: entries.len(),
        duration_s: stats_of(&durations)?,
        ocr_words: stats_of(&ocr_words)?,
        asr_words: stats_of(&asr_words)?,
    })
}
