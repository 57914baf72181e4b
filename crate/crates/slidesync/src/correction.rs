//! OCR-guided ASR post-correction: refine transcript text using slide
//! vocabulary, either through an LLM provider or a deterministic lexicon
//! fallback.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matchers::{levenshtein_similarity, normalize_text, Diagnostic, NormalizationOptions};
use crate::model::{RegionKind, SlideDocument, Transcript, TranscriptLine};
use crate::providers::LlmProvider;

/// Lexicon substitution fires at or above this similarity; slightly below
/// the 0.8 fuzzy-hit gate so correction is a bit more aggressive than
/// matching.
pub const LEXICON_SIMILARITY_GATE: f64 = 0.75;

/// Tokens shorter than this never enter the lexicon.
pub const MIN_LEXICON_TOKEN_LEN: usize = 3;

/// Multiset of normalized slide tokens with occurrence counts.
pub type Lexicon = BTreeMap<String, usize>;

/// Union of normalized tokens over all textual regions, counts preserved,
/// tokens shorter than three characters excluded.
pub fn build_slide_lexicon(slide: &SlideDocument) -> Lexicon {
    let opts = NormalizationOptions::default();
    let mut lexicon = Lexicon::new();
    for region in &slide.regions {
        if region.kind != RegionKind::Textual {
            continue;
        }
        for token in normalize_text(&region.text, opts).split_whitespace() {
            if token.chars().count() >= MIN_LEXICON_TOKEN_LEN {
                *lexicon.entry(token.to_string()).or_insert(0) += 1;
            }
        }
    }
    lexicon
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub from: String,
    pub to: String,
    pub similarity: f64,
}

/// Per-line substitution log, the external log format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionLog {
    pub line_id: String,
    pub subs: Vec<Substitution>,
}

/// The unique nearest lexicon token at similarity >= 0.75, or None on a
/// tie or when nothing clears the gate.
fn best_lexicon_candidate(token: &str, lexicon: &Lexicon) -> Option<(String, f64)> {
    let mut best: Option<(String, f64)> = None;
    let mut tied = false;
    for candidate in lexicon.keys() {
        let sim = levenshtein_similarity(token, candidate);
        if sim < LEXICON_SIMILARITY_GATE {
            continue;
        }
        match &best {
            Some((_, best_sim)) if sim > *best_sim => {
                best = Some((candidate.clone(), sim));
                tied = false;
            }
            Some((_, best_sim)) if sim == *best_sim => tied = true,
            Some(_) => {}
            None => best = Some((candidate.clone(), sim)),
        }
    }
    if tied {
        None
    } else {
        best
    }
}

/// Replaces transcript tokens absent from the lexicon by their unique
/// nearest lexicon token. Timestamps are untouched; word texts follow the
/// substitutions when the word list matches the token count.
pub fn correct_lexical(line: &TranscriptLine, lexicon: &Lexicon) -> (TranscriptLine, Vec<Substitution>) {
    let opts = NormalizationOptions::default();
    let tokens: Vec<&str> = line.text.split_whitespace().collect();
    let mut subs = Vec::new();
    let mut out_tokens: Vec<String> = Vec::with_capacity(tokens.len());
    for token in &tokens {
        let normalized = normalize_text(token, opts);
        if normalized.chars().count() < MIN_LEXICON_TOKEN_LEN
            || lexicon.contains_key(&normalized)
        {
            out_tokens.push((*token).to_string());
            continue;
        }
        match best_lexicon_candidate(&normalized, lexicon) {
            Some((candidate, similarity)) => {
                subs.push(Substitution {
                    from: (*token).to_string(),
                    to: candidate.clone(),
                    similarity,
                });
                out_tokens.push(candidate);
            }
            None => out_tokens.push((*token).to_string()),
        }
    }
    let mut corrected = line.clone();
    corrected.text = out_tokens.join(" ");
    if let Some(words) = &mut corrected.words {
        if words.len() == out_tokens.len() {
            for (word, token) in words.iter_mut().zip(&out_tokens) {
                word.text = token.clone();
            }
        }
    }
    (corrected, subs)
}

/// Lexicon correction over a whole transcript against its paired slide.
pub fn correct_transcript_lexical(
    transcript: &Transcript,
    slide: &SlideDocument,
) -> (Transcript, Vec<SubstitutionLog>) {
    let lexicon = build_slide_lexicon(slide);
    let mut lines = Vec::with_capacity(transcript.lines.len());
    let mut logs = Vec::new();
    for line in &transcript.lines {
        let (corrected, subs) = correct_lexical(line, &lexicon);
        if !subs.is_empty() {
            logs.push(SubstitutionLog {
                line_id: line.line_id.clone(),
                subs,
            });
        }
        lines.push(corrected);
    }
    (
        Transcript {
            slide_id: transcript.slide_id.clone(),
            lines,
        },
        logs,
    )
}

/// The exact correction prompt sent per line.
pub fn correction_prompt(slide_text: &str, line_text: &str) -> String {
    format!(
        "Slide text:\n{slide_text}\nTranscript line: \"{line_text}\"\nRewrite the transcript line, correcting only misrecognized words using the slide text. Reply with the corrected line only."
    )
}

fn concatenated_slide_text(slide: &SlideDocument) -> String {
    slide
        .regions
        .iter()
        .filter(|r| !r.text.trim().is_empty())
        .map(|r| r.text.trim())
        .collect::<Vec<_>>()
        .join("\n")
}

/// LLM correction, one request per line. A provider failure keeps that
/// line unmodified and records a diagnostic. Word-level timings are dropped
/// for lines whose token count changed; line timestamps are preserved.
pub fn correct_llm(
    transcript: &Transcript,
    slide: &SlideDocument,
    provider: &dyn LlmProvider,
) -> (Transcript, Vec<Diagnostic>) {
    let slide_text = concatenated_slide_text(slide);
    let mut lines = Vec::with_capacity(transcript.lines.len());
    let mut diagnostics = Vec::new();
    for line in &transcript.lines {
        match provider.complete(&correction_prompt(&slide_text, &line.text)) {
            Ok(reply) => {
                let mut corrected = line.clone();
                let new_text = reply.trim().to_string();
                let old_count = line.text.split_whitespace().count();
                let new_count = new_text.split_whitespace().count();
                if old_count != new_count {
                    corrected.words = None;
                }
                corrected.text = new_text;
                lines.push(corrected);
            }
            Err(e) => {
                diagnostics.push(Diagnostic {
                    line_id: line.line_id.clone(),
                    region_id: None,
                    message: format!("correction failed, line kept: {e}"),
                });
                lines.push(line.clone());
            }
        }
    }
    (
        Transcript {
            slide_id: transcript.slide_id.clone(),
            lines,
        },
        diagnostics,
    )
}
