//! The alignment methods: fuzzy string matching, embedding similarity, and
//! the two LLM protocols (per-region yes/no, per-line region selection),
//! all behind one scoring + thresholding path.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};
use unicode_normalization::UnicodeNormalization;

use crate::model::{
    AlignmentResult, Region, RegionMatch, SlideDocument, ThresholdPolicy, Transcript,
};
use crate::providers::{EmbeddingProvider, LlmProvider, ProviderError};

/// Per-token similarity gate for a fuzzy hit.
pub const FUZZY_TOKEN_GATE: f64 = 0.8;

/// Default bound on in-flight LLM requests.
pub const DEFAULT_IN_FLIGHT_CAP: usize = 4;

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("method {method} requires a {missing} provider")]
    MissingProvider {
        method: String,
        missing: &'static str,
    },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// A non-fatal per-pair or per-line event recorded during alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_id: Option<String>,
    pub message: String,
}

// --- Text normalization ---------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationOptions {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub collapse_whitespace: bool,
}

impl Default for NormalizationOptions {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            collapse_whitespace: true,
        }
    }
}

fn is_punct_or_symbol(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
            | MathSymbol
            | CurrencySymbol
            | ModifierSymbol
            | OtherSymbol
    )
}

/// Unicode NFC, then (per options) lowercasing, punctuation/symbol stripping
/// with intra-word hyphens and apostrophes kept, and whitespace collapse.
/// Stripped characters become spaces so words never fuse.
pub fn normalize_text(text: &str, options: NormalizationOptions) -> String {
    let nfc: String = text.nfc().collect();
    let lowered = if options.lowercase {
        nfc.to_lowercase()
    } else {
        nfc
    };
    let stripped = if options.strip_punctuation {
        let chars: Vec<char> = lowered.chars().collect();
        let mut out = String::with_capacity(lowered.len());
        for (i, &c) in chars.iter().enumerate() {
            let intra_word = (c == '-' || c == '\'')
                && i > 0
                && i + 1 < chars.len()
                && chars[i - 1].is_alphanumeric()
                && chars[i + 1].is_alphanumeric();
            if is_punct_or_symbol(c) && !intra_word {
                out.push(' ');
            } else {
                out.push(c);
            }
        }
        out
    } else {
        lowered
    };
    if options.collapse_whitespace {
        stripped.split_whitespace().collect::<Vec<_>>().join(" ")
    } else {
        stripped
    }
}

// --- String similarity ----------------------------------------------------

/// Character-level Levenshtein distance, classic two-row DP.
pub fn edit_distance_chars(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance_slices(&a, &b)
}

pub(crate) fn edit_distance_slices<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            curr[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// 1 - editdistance(a, b) / max(|a|, |b|); 1 when both strings are empty.
pub fn levenshtein_similarity(a: &str, b: &str) -> f64 {
    let len_a = a.chars().count();
    let len_b = b.chars().count();
    let max_len = len_a.max(len_b);
    if max_len == 0 {
        return 1.0;
    }
    1.0 - edit_distance_chars(a, b) as f64 / max_len as f64
}

/// Directional token coverage of the line by the region: the fraction of
/// line tokens with some region token at similarity >= 0.8. Zero when
/// either side has no tokens. Inputs are expected normalized.
pub fn fuzzy_score(line_text: &str, region_text: &str) -> f64 {
    let line_tokens: Vec<&str> = line_text.split_whitespace().collect();
    let region_tokens: Vec<&str> = region_text.split_whitespace().collect();
    if line_tokens.is_empty() || region_tokens.is_empty() {
        return 0.0;
    }
    let hits = line_tokens
        .iter()
        .filter(|t| {
            region_tokens
                .iter()
                .any(|r| levenshtein_similarity(t, r) >= FUZZY_TOKEN_GATE)
        })
        .count();
    hits as f64 / line_tokens.len() as f64
}

// --- Embedding similarity -------------------------------------------------

fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (na * nb))
}

/// Cosine of the two vectors mapped to [0, 1] via (c + 1) / 2 so every
/// matcher shares one score scale. Zero when either vector is zero (empty
/// text) so empty regions never match.
pub fn embedding_pair_score(line_vec: &[f64], region_vec: &[f64]) -> f64 {
    match cosine(line_vec, region_vec) {
        Some(c) => ((c + 1.0) / 2.0).clamp(0.0, 1.0),
        None => 0.0,
    }
}

pub fn embedding_score(
    line_text: &str,
    region_text: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, MatcherError> {
    if region_text.is_empty() {
        return Ok(0.0);
    }
    let vectors = provider.embed(&[line_text.to_string(), region_text.to_string()])?;
    Ok(embedding_pair_score(&vectors[0], &vectors[1]))
}

// --- LLM prompts and decisions --------------------------------------------

pub fn yes_no_prompt(line_text: &str, region_text: &str) -> String {
    format!(
        "Transcript: \"{line_text}\"\nSlide region: \"{region_text}\"\nIs the slide region relevant to the transcript? Answer Yes or No."
    )
}

pub fn select_prompt(line_text: &str, regions: &[Region]) -> String {
    let listing: Vec<String> = regions
        .iter()
        .map(|r| format!("[{}] {}", r.id, r.text))
        .collect();
    format!(
        "Transcript: \"{line_text}\"\nSlide regions:\n{}\nList the ids of all relevant regions, comma-separated, or \"none\".",
        listing.join("\n")
    )
}

/// Maps the first token of the reply case-insensitively: yes/no. Any other
/// reply is a decision error; the caller treats the pair as non-matching.
pub fn llm_yes_no_decide(
    line_text: &str,
    region: &Region,
    provider: &dyn LlmProvider,
) -> Result<Result<bool, String>, ProviderError> {
    let reply = provider.complete(&yes_no_prompt(line_text, &region.text))?;
    let first = reply
        .split_whitespace()
        .next()
        .unwrap_or("")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    Ok(match first.as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        _ => Err(reply),
    })
}

/// Parses the selection reply as comma/newline-separated ids; unknown ids
/// are dropped with a diagnostic; "none" or an empty reply selects nothing.
pub fn llm_select(
    line_text: &str,
    regions: &[Region],
    provider: &dyn LlmProvider,
) -> Result<(BTreeSet<String>, Vec<String>), ProviderError> {
    let reply = provider.complete(&select_prompt(line_text, regions))?;
    let trimmed = reply.trim();
    let mut selected = BTreeSet::new();
    let mut dropped = Vec::new();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("none") {
        return Ok((selected, dropped));
    }
    let known: BTreeSet<&str> = regions.iter().map(|r| r.id.as_str()).collect();
    for token in trimmed.split([',', '\n']) {
        let id = token.trim().trim_matches(|c| c == '[' || c == ']');
        if id.is_empty() {
            continue;
        }
        if known.contains(id) {
            selected.insert(id.to_string());
        } else {
            dropped.push(id.to_string());
        }
    }
    Ok((selected, dropped))
}

// --- Configuration --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatcherMethod {
    Fuzzy,
    Embedding,
    LlmYesNo,
    LlmSelect,
}

impl MatcherMethod {
    pub fn tag(self) -> &'static str {
        match self {
            MatcherMethod::Fuzzy => "fuzzy",
            MatcherMethod::Embedding => "embedding",
            MatcherMethod::LlmYesNo => "llm-yes-no",
            MatcherMethod::LlmSelect => "llm-select",
        }
    }

    pub fn uses_thresholds(self) -> bool {
        matches!(self, MatcherMethod::Fuzzy | MatcherMethod::Embedding)
    }
}

#[derive(Debug, Clone)]
pub struct MatcherConfig {
    pub method: MatcherMethod,
    pub policy: ThresholdPolicy,
    pub normalization: NormalizationOptions,
    /// Bound on concurrent LLM requests.
    pub in_flight_cap: usize,
}

impl MatcherConfig {
    pub fn new(method: MatcherMethod, policy: ThresholdPolicy) -> Self {
        Self {
            method,
            policy,
            normalization: NormalizationOptions::default(),
            in_flight_cap: DEFAULT_IN_FLIGHT_CAP,
        }
    }
}

/// Providers handed to [`align`]; only the ones the method needs must be set.
#[derive(Clone, Copy, Default)]
pub struct ProviderBundle<'a> {
    pub embedding: Option<&'a dyn EmbeddingProvider>,
    pub llm: Option<&'a dyn LlmProvider>,
}

// --- Score matrix ---------------------------------------------------------

/// Scores for the full lines x regions cross product, row-major by line.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub line_ids: Vec<String>,
    pub region_ids: Vec<String>,
    pub scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn get(&self, line_idx: usize, region_idx: usize) -> f64 {
        self.scores[line_idx * self.region_ids.len() + region_idx]
    }

    pub fn score(&self, line_id: &str, region_id: &str) -> Option<f64> {
        let li = self.line_ids.iter().position(|l| l == line_id)?;
        let ri = self.region_ids.iter().position(|r| r == region_id)?;
        Some(self.get(li, ri))
    }
}

/// Sequential reference path for the score matrix.
pub fn score_matrix_sequential(
    lines: &[(String, String)],
    regions: &[(String, String)],
    score: impl Fn(&str, &str) -> f64 + Sync,
) -> ScoreMatrix {
    let score = &score;
    let scores = lines
        .iter()
        .flat_map(|(_, lt)| regions.iter().map(move |(_, rt)| score(lt, rt)))
        .collect();
    matrix_from(lines, regions, scores)
}

/// Data-parallel score matrix over lines.
#[cfg(feature = "parallel")]
pub fn score_matrix_parallel(
    lines: &[(String, String)],
    regions: &[(String, String)],
    score: impl Fn(&str, &str) -> f64 + Sync,
) -> ScoreMatrix {
    use rayon::prelude::*;
    let scores = lines
        .par_iter()
        .flat_map_iter(|(_, lt)| regions.iter().map(|(_, rt)| score(lt, rt)))
        .collect();
    matrix_from(lines, regions, scores)
}

fn matrix_from(
    lines: &[(String, String)],
    regions: &[(String, String)],
    scores: Vec<f64>,
) -> ScoreMatrix {
    ScoreMatrix {
        line_ids: lines.iter().map(|(id, _)| id.clone()).collect(),
        region_ids: regions.iter().map(|(id, _)| id.clone()).collect(),
        scores,
    }
}

fn score_matrix(
    lines: &[(String, String)],
    regions: &[(String, String)],
    score: impl Fn(&str, &str) -> f64 + Sync,
) -> ScoreMatrix {
    #[cfg(feature = "parallel")]
    {
        score_matrix_parallel(lines, regions, score)
    }
    #[cfg(not(feature = "parallel"))]
    {
        score_matrix_sequential(lines, regions, score)
    }
}

/// Region r is predicted for line t iff its score clears the per-kind
/// threshold. Every transcript line gets an entry, possibly empty.
pub fn apply_thresholds(
    matrix: &ScoreMatrix,
    slide: &SlideDocument,
    policy: &ThresholdPolicy,
    matcher_tag: &str,
) -> AlignmentResult {
    let mut lines = BTreeMap::new();
    for (li, line_id) in matrix.line_ids.iter().enumerate() {
        let mut matches = Vec::new();
        for (ri, region_id) in matrix.region_ids.iter().enumerate() {
            let Some(region) = slide.region(region_id) else {
                continue;
            };
            let score = matrix.get(li, ri);
            if score >= policy.threshold_for(region.kind) {
                matches.push(RegionMatch {
                    region_id: region_id.clone(),
                    score,
                });
            }
        }
        lines.insert(line_id.clone(), matches);
    }
    AlignmentResult {
        slide_id: slide.slide_id.clone(),
        matcher: matcher_tag.to_string(),
        lines,
    }
}

// --- Alignment ------------------------------------------------------------

#[derive(Debug)]
pub struct AlignOutcome {
    pub result: AlignmentResult,
    pub diagnostics: Vec<Diagnostic>,
}

/// Runs one matcher over a slide/transcript pair and thresholds the scores
/// into an [`AlignmentResult`]. Provider errors abort the affected line
/// (recorded as a diagnostic); other lines are retained.
pub fn align(
    slide: &SlideDocument,
    transcript: &Transcript,
    config: &MatcherConfig,
    providers: ProviderBundle<'_>,
) -> Result<AlignOutcome, MatcherError> {
    let norm = config.normalization;
    let lines: Vec<(String, String)> = transcript
        .lines
        .iter()
        .map(|l| (l.line_id.clone(), normalize_text(&l.text, norm)))
        .collect();
    let regions: Vec<(String, String)> = slide
        .regions
        .iter()
        .map(|r| (r.id.clone(), normalize_text(&r.text, norm)))
        .collect();

    match config.method {
        MatcherMethod::Fuzzy => {
            let matrix = score_matrix(&lines, &regions, fuzzy_score);
            Ok(AlignOutcome {
                result: apply_thresholds(&matrix, slide, &config.policy, config.method.tag()),
                diagnostics: Vec::new(),
            })
        }
        MatcherMethod::Embedding => {
            let provider = providers.embedding.ok_or(MatcherError::MissingProvider {
                method: config.method.tag().into(),
                missing: "embedding",
            })?;
            // One batched embed call covers every distinct text.
            let mut texts: Vec<String> = Vec::new();
            for (_, t) in lines.iter().chain(regions.iter()) {
                texts.push(t.clone());
            }
            let vectors = provider.embed(&texts)?;
            let (line_vecs, region_vecs) = vectors.split_at(lines.len());
            let matrix = build_embedding_matrix(&lines, &regions, line_vecs, region_vecs);
            Ok(AlignOutcome {
                result: apply_thresholds(&matrix, slide, &config.policy, config.method.tag()),
                diagnostics: Vec::new(),
            })
        }
        MatcherMethod::LlmYesNo => {
            let provider = providers.llm.ok_or(MatcherError::MissingProvider {
                method: config.method.tag().into(),
                missing: "llm",
            })?;
            align_llm_yes_no(slide, transcript, &lines, config, provider)
        }
        MatcherMethod::LlmSelect => {
            let provider = providers.llm.ok_or(MatcherError::MissingProvider {
                method: config.method.tag().into(),
                missing: "llm",
            })?;
            align_llm_select(slide, transcript, &lines, config, provider)
        }
    }
}

fn build_embedding_matrix(
    lines: &[(String, String)],
    regions: &[(String, String)],
    line_vecs: &[Vec<f64>],
    region_vecs: &[Vec<f64>],
) -> ScoreMatrix {
    let mut scores = Vec::with_capacity(lines.len() * regions.len());
    for lv in line_vecs {
        for ((_, rt), rv) in regions.iter().zip(region_vecs) {
            if rt.is_empty() {
                scores.push(0.0);
            } else {
                scores.push(embedding_pair_score(lv, rv));
            }
        }
    }
    matrix_from(lines, regions, scores)
}

/// Runs `task` over lines with at most `cap` in flight, assembling results
/// in line order regardless of completion order.
fn run_per_line<T: Send>(
    lines: &[(String, String)],
    cap: usize,
    task: impl Fn(&str, &str) -> T + Sync,
) -> Vec<T> {
    let cap = cap.max(1);
    let mut out = Vec::with_capacity(lines.len());
    for chunk in lines.chunks(cap) {
        let results: Vec<T> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|(id, text)| scope.spawn(|| task(id, text)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        out.extend(results);
    }
    out
}

fn align_llm_yes_no(
    slide: &SlideDocument,
    _transcript: &Transcript,
    lines: &[(String, String)],
    config: &MatcherConfig,
    provider: &dyn LlmProvider,
) -> Result<AlignOutcome, MatcherError> {
    type LineOut = Result<(Vec<RegionMatch>, Vec<Diagnostic>), Diagnostic>;
    let per_line: Vec<LineOut> = run_per_line(lines, config.in_flight_cap, |line_id, line_text| {
        let mut matches = Vec::new();
        let mut diags = Vec::new();
        for region in &slide.regions {
            match llm_yes_no_decide(line_text, region, provider) {
                Ok(Ok(true)) => matches.push(RegionMatch {
                    region_id: region.id.clone(),
                    score: 1.0,
                }),
                Ok(Ok(false)) => {}
                Ok(Err(reply)) => diags.push(Diagnostic {
                    line_id: line_id.to_string(),
                    region_id: Some(region.id.clone()),
                    message: format!("undecidable reply {reply:?}; pair treated as non-matching"),
                }),
                Err(e) => {
                    return Err(Diagnostic {
                        line_id: line_id.to_string(),
                        region_id: Some(region.id.clone()),
                        message: format!("line aborted: {e}"),
                    })
                }
            }
        }
        Ok((matches, diags))
    });
    let mut result_lines = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for ((line_id, _), outcome) in lines.iter().zip(per_line) {
        match outcome {
            Ok((matches, diags)) => {
                result_lines.insert(line_id.clone(), matches);
                diagnostics.extend(diags);
            }
            Err(diag) => diagnostics.push(diag),
        }
    }
    Ok(AlignOutcome {
        result: AlignmentResult {
            slide_id: slide.slide_id.clone(),
            matcher: config.method.tag().to_string(),
            lines: result_lines,
        },
        diagnostics,
    })
}

fn align_llm_select(
    slide: &SlideDocument,
    _transcript: &Transcript,
    lines: &[(String, String)],
    config: &MatcherConfig,
    provider: &dyn LlmProvider,
) -> Result<AlignOutcome, MatcherError> {
    type LineOut = Result<(BTreeSet<String>, Vec<String>), String>;
    let per_line: Vec<LineOut> = run_per_line(lines, config.in_flight_cap, |_, line_text| {
        llm_select(line_text, &slide.regions, provider).map_err(|e| e.to_string())
    });
    let mut result_lines = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for ((line_id, _), outcome) in lines.iter().zip(per_line) {
        match outcome {
            Ok((selected, dropped)) => {
                for id in dropped {
                    diagnostics.push(Diagnostic {
                        line_id: line_id.clone(),
                        region_id: None,
                        message: format!("reply named unknown region id {id}; dropped"),
                    });
                }
                result_lines.insert(
                    line_id.clone(),
                    selected
                        .into_iter()
                        .map(|region_id| RegionMatch {
                            region_id,
                            score: 1.0,
                        })
                        .collect(),
                );
            }
            Err(message) => diagnostics.push(Diagnostic {
                line_id: line_id.clone(),
                region_id: None,
                message: format!("line aborted: {message}"),
            }),
        }
    }
    Ok(AlignOutcome {
        result: AlignmentResult {
            slide_id: slide.slide_id.clone(),
            matcher: config.method.tag().to_string(),
            lines: result_lines,
        },
        diagnostics,
    })
}
