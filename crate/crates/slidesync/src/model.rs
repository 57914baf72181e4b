//! Domain types shared by every other module.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Word timestamps from ASR jitter; word intervals may stick out of the
/// line interval by up to this many seconds.
pub const WORD_TIMING_TOLERANCE_S: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Textual,
    Visual,
}

/// Axis-aligned rectangle in normalized slide coordinates, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn is_valid(&self) -> bool {
        self.width > 0.0
            && self.height > 0.0
            && self.x >= 0.0
            && self.y >= 0.0
            && self.x + self.width <= 1.0
            && self.y + self.height <= 1.0
    }

    /// Pixel-space rectangle (x, y, w, h) for a raster of the given size.
    pub fn to_pixels(&self, image_size: (u32, u32)) -> (f64, f64, f64, f64) {
        let (w, h) = (image_size.0 as f64, image_size.1 as f64);
        (self.x * w, self.y * h, self.width * w, self.height * h)
    }
}

/// One layout element of a slide: a textual block, figure or table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub kind: RegionKind,
    pub bbox: BBox,
    pub text: String,
    pub confidence: Option<f64>,
}

/// One slide image plus its set of layout regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlideDocument {
    pub slide_id: String,
    pub image_path: PathBuf,
    pub image_size: (u32, u32),
    pub regions: Vec<Region>,
}

impl SlideDocument {
    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Word {
    pub text: String,
    pub t_start: f64,
    pub t_end: f64,
}

/// One ASR segment with text and a time interval, the unit of alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub line_id: String,
    pub text: String,
    pub t_start: f64,
    pub t_end: f64,
    pub words: Option<Vec<Word>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub slide_id: String,
    pub lines: Vec<TranscriptLine>,
}

impl Transcript {
    pub fn line(&self, id: &str) -> Option<&TranscriptLine> {
        self.lines.iter().find(|l| l.line_id == id)
    }
}

/// One predicted region for a transcript line, with its match score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMatch {
    pub region_id: String,
    pub score: f64,
}

/// Per transcript line, the predicted set of regions with scores.
///
/// `BTreeMap` keeps serialization key order stable for golden files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub slide_id: String,
    pub matcher: String,
    pub lines: BTreeMap<String, Vec<RegionMatch>>,
}

impl AlignmentResult {
    pub fn predicted_set(&self, line_id: &str) -> BTreeSet<String> {
        self.lines
            .get(line_id)
            .map(|ms| ms.iter().map(|m| m.region_id.clone()).collect())
            .unwrap_or_default()
    }
}

/// Per transcript line, the annotated set of relevant regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub slide_id: String,
    pub lines: BTreeMap<String, BTreeSet<String>>,
}

/// Per-kind score cutoffs turning a score matrix into predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub name: String,
    pub textual_threshold: f64,
    pub visual_threshold: f64,
}

impl ThresholdPolicy {
    pub fn new(name: &str, textual: f64, visual: f64) -> Self {
        Self {
            name: name.to_string(),
            textual_threshold: textual,
            visual_threshold: visual,
        }
    }

    pub fn t1() -> Self {
        Self::new("T-1", 0.8, 0.6)
    }

    pub fn t2() -> Self {
        Self::new("T-2", 0.7, 0.6)
    }

    pub fn t3() -> Self {
        Self::new("T-3", 0.6, 0.6)
    }

    /// Per-method best textual thresholds; the visual threshold stays at
    /// the general-purpose 0.6 since no per-method visual value exists.
    pub fn best_fuzzy() -> Self {
        Self::new("best-fuzzy", 0.45, 0.6)
    }

    pub fn best_sbert() -> Self {
        Self::new("best-sbert", 0.55, 0.6)
    }

    pub fn best_scibert() -> Self {
        Self::new("best-scibert", 0.75, 0.6)
    }

    pub fn best_specter() -> Self {
        Self::new("best-specter", 0.85, 0.6)
    }

    pub fn threshold_for(&self, kind: RegionKind) -> f64 {
        match kind {
            RegionKind::Textual => self.textual_threshold,
            RegionKind::Visual => self.visual_threshold,
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.textual_threshold)
            && (0.0..=1.0).contains(&self.visual_threshold)
    }
}

/// One invariant violation found by [`validate_dataset`]. Violations are
/// data, not failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// The offending entity, e.g. `slide s1 / region R2`.
    pub entity: String,
    /// The rule that was broken.
    pub rule: String,
}

impl Violation {
    fn new(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            entity: entity.into(),
            rule: rule.into(),
        }
    }
}

pub fn validate_slide(slide: &SlideDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let entity = |suffix: &str| format!("slide {}{}", slide.slide_id, suffix);
    if slide.image_size.0 == 0 || slide.image_size.1 == 0 {
        out.push(Violation::new(
            entity(""),
            "image_size dimensions must be positive",
        ));
    }
    let mut seen = BTreeSet::new();
    for region in &slide.regions {
        let ent = entity(&format!(" / region {}", region.id));
        if !seen.insert(region.id.clone()) {
            out.push(Violation::new(&ent, "region id must be unique within its slide"));
        }
        if !region.bbox.is_valid() {
            out.push(Violation::new(
                &ent,
                "bbox must satisfy 0 <= x, y, x+width, y+height <= 1 with width, height > 0",
            ));
        }
        if region.kind == RegionKind::Textual && region.text.trim().is_empty() {
            out.push(Violation::new(&ent, "textual region must have non-empty text"));
        }
        if let Some(c) = region.confidence {
            if !(0.0..=1.0).contains(&c) {
                out.push(Violation::new(&ent, "confidence must lie in [0, 1]"));
            }
        }
    }
    out
}

pub fn validate_transcript(transcript: &Transcript) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut prev_start = f64::NEG_INFINITY;
    for line in &transcript.lines {
        let ent = format!("transcript {} / line {}", transcript.slide_id, line.line_id);
        if !seen.insert(line.line_id.clone()) {
            out.push(Violation::new(&ent, "line_id must be unique within its transcript"));
        }
        if !(line.t_start >= 0.0 && line.t_start < line.t_end) {
            out.push(Violation::new(&ent, "line must satisfy 0 <= t_start < t_end"));
        }
        if line.t_start < prev_start {
            out.push(Violation::new(&ent, "lines must be sorted by t_start"));
        }
        prev_start = line.t_start;
        if let Some(words) = &line.words {
            let mut prev_word_start = f64::NEG_INFINITY;
            for word in words {
                if word.t_start < prev_word_start {
                    out.push(Violation::new(
                        &ent,
                        "word intervals must be non-decreasing in t_start",
                    ));
                    break;
                }
                prev_word_start = word.t_start;
            }
            let lo = line.t_start - WORD_TIMING_TOLERANCE_S;
            let hi = line.t_end + WORD_TIMING_TOLERANCE_S;
            if words.iter().any(|w| w.t_start < lo || w.t_end > hi) {
                out.push(Violation::new(
                    &ent,
                    "word intervals must lie within the line interval up to a 0.25 s tolerance",
                ));
            }
        }
    }
    out
}

/// Checks every type invariant plus cross-references between slides,
/// transcripts and ground truth. Pure: same inputs, same violation list.
pub fn validate_dataset(
    slides: &[SlideDocument],
    transcripts: &[Transcript],
    ground_truth: &[GroundTruth],
) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut slide_ids = BTreeSet::new();
    for slide in slides {
        if !slide_ids.insert(slide.slide_id.clone()) {
            out.push(Violation::new(
                format!("slide {}", slide.slide_id),
                "slide_id must be unique within the dataset",
            ));
        }
        out.extend(validate_slide(slide));
    }
    let by_id: BTreeMap<&str, &SlideDocument> =
        slides.iter().map(|s| (s.slide_id.as_str(), s)).collect();
    for transcript in transcripts {
        out.extend(validate_transcript(transcript));
        if !by_id.contains_key(transcript.slide_id.as_str()) {
            out.push(Violation::new(
                format!("transcript {}", transcript.slide_id),
                "transcript references an unknown slide_id",
            ));
        }
    }
    for gt in ground_truth {
        let Some(slide) = by_id.get(gt.slide_id.as_str()) else {
            out.push(Violation::new(
                format!("ground truth {}", gt.slide_id),
                "ground truth references an unknown slide_id",
            ));
            continue;
        };
        for (line_id, region_ids) in &gt.lines {
            for region_id in region_ids {
                if slide.region(region_id).is_none() {
                    out.push(Violation::new(
                        format!("ground truth {} / line {}", gt.slide_id, line_id),
                        format!("references region id {region_id} absent from the slide"),
                    ));
                }
            }
        }
    }
    out
}
