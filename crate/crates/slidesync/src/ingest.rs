//! Parsers and writers for all external file formats, plus the dataset
//! manifest abstraction.
//!
//! All interchange is JSON. Writers are deterministic (sorted keys, scores
//! rounded to six decimals) so golden-file tests stay stable. Warnings are
//! returned as data alongside values; the library never writes to output
//! streams.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AlignmentResult, BBox, GroundTruth, Region, RegionKind, RegionMatch, SlideDocument,
    Transcript, TranscriptLine, Word,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed JSON at byte offset {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation in {entity}: {rule}")]
    Schema { entity: String, rule: String },
    #[error("manifest entry {slide_id}: path {path} does not resolve")]
    MissingPath { slide_id: String, path: PathBuf },
    #[error("duplicate slide_id {0} in manifest")]
    DuplicateSlide(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    fn schema(entity: impl Into<String>, rule: impl Into<String>) -> Self {
        IngestError::Schema {
            entity: entity.into(),
            rule: rule.into(),
        }
    }

    fn json(err: serde_json::Error, input: &[u8]) -> Self {
        let (line, column) = (err.line(), err.column());
        IngestError::Json {
            offset: byte_offset(input, line, column),
            line,
            column,
            message: err.to_string(),
        }
    }
}

/// serde_json reports line/column; recover the byte offset for error messages.
fn byte_offset(input: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut current_line = 1;
    let mut line_start = 0;
    for (i, b) in input.iter().enumerate() {
        if current_line == line {
            line_start = i;
            break;
        }
        if *b == b'\n' {
            current_line += 1;
            line_start = i + 1;
        }
    }
    (line_start + column.saturating_sub(1)).min(input.len())
}

/// A non-fatal data quality note produced while parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub entity: String,
    pub message: String,
}

/// A parsed value together with any warnings raised along the way.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<ParseWarning>,
}

// --- Slide Layout JSON ----------------------------------------------------

#[derive(Deserialize)]
struct RawSlide {
    slide_id: String,
    image_path: String,
    image_size: [u32; 2],
    regions: Vec<RawRegion>,
}

#[derive(Deserialize)]
struct RawRegion {
    id: String,
    kind: String,
    bbox: [f64; 4],
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    confidence: Option<f64>,
}

pub fn parse_slide_layout(bytes: &[u8]) -> Result<SlideDocument, IngestError> {
    let raw: RawSlide =
        serde_json::from_slice(bytes).map_err(|e| IngestError::json(e, bytes))?;
    let mut regions = Vec::with_capacity(raw.regions.len());
    let mut seen = BTreeSet::new();
    for r in raw.regions {
        let entity = format!("slide {} / region {}", raw.slide_id, r.id);
        let kind = match r.kind.as_str() {
            "textual" => RegionKind::Textual,
            "visual" => RegionKind::Visual,
            other => {
                return Err(IngestError::schema(
                    &entity,
                    format!("kind must be \"textual\" or \"visual\", got {other:?}"),
                ))
            }
        };
        let text = r.text.unwrap_or_default();
        if kind == RegionKind::Textual && text.trim().is_empty() {
            return Err(IngestError::schema(
                &entity,
                "textual region must have non-empty text",
            ));
        }
        let bbox = BBox {
            x: r.bbox[0],
            y: r.bbox[1],
            width: r.bbox[2],
            height: r.bbox[3],
        };
        if !bbox.is_valid() {
            return Err(IngestError::schema(
                &entity,
                "bbox must satisfy 0 <= x, y, x+w, y+h <= 1 with w, h > 0",
            ));
        }
        if let Some(c) = r.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(IngestError::schema(&entity, "confidence must lie in [0, 1]"));
            }
        }
        if !seen.insert(r.id.clone()) {
            return Err(IngestError::schema(&entity, "duplicate region id"));
        }
        regions.push(Region {
            id: r.id,
            kind,
            bbox,
            text,
            confidence: r.confidence,
        });
    }
    if raw.image_size[0] == 0 || raw.image_size[1] == 0 {
        return Err(IngestError::schema(
            format!("slide {}", raw.slide_id),
            "image_size dimensions must be positive",
        ));
    }
    Ok(SlideDocument {
        slide_id: raw.slide_id,
        image_path: PathBuf::from(raw.image_path),
        image_size: (raw.image_size[0], raw.image_size[1]),
        regions,
    })
}

// --- Transcript JSON ------------------------------------------------------

#[derive(Deserialize)]
struct RawTranscript {
    slide_id: String,
    lines: Vec<RawLine>,
}

#[derive(Deserialize)]
struct RawLine {
    line_id: String,
    text: String,
    t_start: f64,
    t_end: f64,
    #[serde(default)]
    words: Option<Vec<RawWord>>,
}

#[derive(Deserialize)]
struct RawWord {
    w: String,
    s: f64,
    e: f64,
}

pub fn parse_transcript(bytes: &[u8]) -> Result<Parsed<Transcript>, IngestError> {
    let raw: RawTranscript =
        serde_json::from_slice(bytes).map_err(|e| IngestError::json(e, bytes))?;
    let mut warnings = Vec::new();
    let mut lines = Vec::with_capacity(raw.lines.len());
    let mut seen = BTreeSet::new();
    for l in raw.lines {
        let entity = format!("transcript {} / line {}", raw.slide_id, l.line_id);
        if !(l.t_start >= 0.0 && l.t_end > l.t_start) {
            return Err(IngestError::schema(
                &entity,
                "line must satisfy 0 <= t_start < t_end",
            ));
        }
        if !seen.insert(l.line_id.clone()) {
            return Err(IngestError::schema(&entity, "duplicate line_id"));
        }
        lines.push(TranscriptLine {
            line_id: l.line_id,
            text: l.text,
            t_start: l.t_start,
            t_end: l.t_end,
            words: l.words.map(|ws| {
                ws.into_iter()
                    .map(|w| Word {
                        text: w.w,
                        t_start: w.s,
                        t_end: w.e,
                    })
                    .collect()
            }),
        });
    }
    lines.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    // Overlapping intervals are ASR artifacts; keep them but flag.
    for pair in lines.windows(2) {
        if pair[1].t_start < pair[0].t_end {
            warnings.push(ParseWarning {
                entity: format!("transcript {} / line {}", raw.slide_id, pair[1].line_id),
                message: format!("interval overlaps previous line {}", pair[0].line_id),
            });
        }
    }
    Ok(Parsed {
        value: Transcript {
            slide_id: raw.slide_id,
            lines,
        },
        warnings,
    })
}

/// Writes a transcript back out in the Transcript JSON schema.
pub fn write_transcript(transcript: &Transcript) -> Vec<u8> {
    #[derive(Serialize)]
    struct OutWord<'a> {
        w: &'a str,
        s: f64,
        e: f64,
    }
    #[derive(Serialize)]
    struct OutLine<'a> {
        line_id: &'a str,
        text: &'a str,
        t_start: f64,
        t_end: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        words: Option<Vec<OutWord<'a>>>,
    }
    #[derive(Serialize)]
    struct OutTranscript<'a> {
        slide_id: &'a str,
        lines: Vec<OutLine<'a>>,
    }
    let out = OutTranscript {
        slide_id: &transcript.slide_id,
        lines: transcript
            .lines
            .iter()
            .map(|l| OutLine {
                line_id: &l.line_id,
                text: &l.text,
                t_start: l.t_start,
                t_end: l.t_end,
                words: l.words.as_ref().map(|ws| {
                    ws.iter()
                        .map(|w| OutWord {
                            w: &w.text,
                            s: w.t_start,
                            e: w.t_end,
                        })
                        .collect()
                }),
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&out).expect("transcript serializes");
    bytes.push(b'\n');
    bytes
}

// --- Ground Truth JSON ----------------------------------------------------

#[derive(Deserialize)]
struct RawGroundTruth {
    slide_id: String,
    lines: BTreeMap<String, Vec<String>>,
}

pub fn parse_ground_truth(bytes: &[u8]) -> Result<Parsed<GroundTruth>, IngestError> {
    let raw: RawGroundTruth =
        serde_json::from_slice(bytes).map_err(|e| IngestError::json(e, bytes))?;
    let mut warnings = Vec::new();
    let mut lines = BTreeMap::new();
    for (line_id, region_ids) in raw.lines {
        let mut set = BTreeSet::new();
        for rid in region_ids {
            if !set.insert(rid.clone()) {
                warnings.push(ParseWarning {
                    entity: format!("ground truth {} / line {}", raw.slide_id, line_id),
                    message: format!("duplicate region id {rid} deduplicated"),
                });
            }
        }
        lines.insert(line_id, set);
    }
    Ok(Parsed {
        value: GroundTruth {
            slide_id: raw.slide_id,
            lines,
        },
        warnings,
    })
}

// --- Alignment JSON -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawAlignment {
    slide_id: String,
    matcher: String,
    lines: BTreeMap<String, Vec<RawMatch>>,
}

#[derive(Serialize, Deserialize)]
struct RawMatch {
    region_id: String,
    score: f64,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Deterministic serialization: keys sorted, scores rounded to 1e-6.
pub fn write_alignment(result: &AlignmentResult) -> Vec<u8> {
    let raw = RawAlignment {
        slide_id: result.slide_id.clone(),
        matcher: result.matcher.clone(),
        lines: result
            .lines
            .iter()
            .map(|(line_id, matches)| {
                (
                    line_id.clone(),
                    matches
                        .iter()
                        .map(|m| RawMatch {
                            region_id: m.region_id.clone(),
                            score: round6(m.score),
                        })
                        .collect(),
                )
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&raw).expect("alignment serializes");
    bytes.push(b'\n');
    bytes
}

pub fn read_alignment(bytes: &[u8]) -> Result<AlignmentResult, IngestError> {
    let raw: RawAlignment =
        serde_json::from_slice(bytes).map_err(|e| IngestError::json(e, bytes))?;
    let mut lines = BTreeMap::new();
    for (line_id, matches) in raw.lines {
        let entity = format!("alignment {} / line {}", raw.slide_id, line_id);
        let mut seen = BTreeSet::new();
        for m in &matches {
            if !(0.0..=1.0).contains(&m.score) {
                return Err(IngestError::schema(&entity, "score must lie in [0, 1]"));
            }
            if !seen.insert(m.region_id.clone()) {
                return Err(IngestError::schema(
                    &entity,
                    format!("duplicate region_id {}", m.region_id),
                ));
            }
        }
        lines.insert(
            line_id,
            matches
                .into_iter()
                .map(|m| RegionMatch {
                    region_id: m.region_id,
                    score: m.score,
                })
                .collect(),
        );
    }
    Ok(AlignmentResult {
        slide_id: raw.slide_id,
        matcher: raw.matcher,
        lines,
    })
}

// --- Manifest -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub slide_id: String,
    pub slide: PathBuf,
    pub transcript: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
    pub image: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

/// Everything one manifest entry points at, loaded and parsed.
#[derive(Debug, Clone)]
pub struct LoadedEntry {
    pub slide: SlideDocument,
    pub transcript: Transcript,
    pub ground_truth: Option<GroundTruth>,
    pub warnings: Vec<ParseWarning>,
}

fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a manifest, resolving relative paths against the manifest's
/// directory and verifying every referenced path exists. Entries keep file
/// order.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let bytes = read_file(path)?;
    let mut manifest: DatasetManifest =
        serde_json::from_slice(&bytes).map_err(|e| IngestError::json(e, &bytes))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = BTreeSet::new();
    for entry in &mut manifest.entries {
        if !seen.insert(entry.slide_id.clone()) {
            return Err(IngestError::DuplicateSlide(entry.slide_id.clone()));
        }
        for p in [&mut entry.slide, &mut entry.transcript, &mut entry.image] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        if let Some(gt) = &mut entry.ground_truth {
            if gt.is_relative() {
                *gt = base.join(&gt);
            }
        }
        let mut paths = vec![&entry.slide, &entry.transcript, &entry.image];
        if let Some(gt) = &entry.ground_truth {
            paths.push(gt);
        }
        for p in paths {
            if !p.exists() {
                return Err(IngestError::MissingPath {
                    slide_id: entry.slide_id.clone(),
                    path: p.clone(),
                });
            }
        }
    }
    Ok(manifest)
}

pub fn load_entry(entry: &ManifestEntry) -> Result<LoadedEntry, IngestError> {
    let mut slide = parse_slide_layout(&read_file(&entry.slide)?)?;
    // The manifest's resolved image path wins over the layout file's,
    // which may be relative to an unknown base.
    slide.image_path = entry.image.clone();
    let transcript = parse_transcript(&read_file(&entry.transcript)?)?;
    let mut warnings = transcript.warnings;
    let ground_truth = match &entry.ground_truth {
        Some(path) => {
            let gt = parse_ground_truth(&read_file(path)?)?;
            warnings.extend(gt.warnings);
            Some(gt.value)
        }
        None => None,
    };
    Ok(LoadedEntry {
        slide,
        transcript: transcript.value,
        ground_truth,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_slide_parses() {
        let json = br#"{"slide_id":"s1","image_path":"s1.png","image_size":[800,600],
            "regions":[{"id":"R1","kind":"textual","bbox":[0,0,1,1],"text":"all of it"}]}"#;
        let slide = parse_slide_layout(json).unwrap();
        assert_eq!(slide.regions.len(), 1);
        assert_eq!(slide.regions[0].bbox, BBox { x: 0.0, y: 0.0, width: 1.0, height: 1.0 });
    }

    #[test]
    fn textual_region_without_text_is_schema_error() {
        let json = br#"{"slide_id":"s1","image_path":"s1.png","image_size":[800,600],
            "regions":[{"id":"R1","kind":"textual","bbox":[0,0,1,1]}]}"#;
        let err = parse_slide_layout(json).unwrap_err();
        match err {
            IngestError::Schema { entity, rule } => {
                assert!(entity.contains("R1"));
                assert!(rule.contains("non-empty text"));
            }
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let json = br#"{"slide_id":"s1","image_path":"s1.png","image_size":[800,600],
            "vendor_extras":{"a":1},
            "regions":[{"id":"R1","kind":"visual","bbox":[0.1,0.1,0.2,0.2],"zz":3}]}"#;
        assert!(parse_slide_layout(json).is_ok());
    }

    #[test]
    fn textract_style_two_column_fixture_keeps_document_order() {
        let json = br#"{"slide_id":"s2","image_path":"s2.png","image_size":[1280,720],
            "regions":[
              {"id":"title","kind":"textual","bbox":[0.05,0.02,0.9,0.1],"text":"Results"},
              {"id":"left","kind":"textual","bbox":[0.05,0.2,0.4,0.7],"text":"left column"},
              {"id":"fig","kind":"visual","bbox":[0.55,0.2,0.4,0.7],"text":""}]}"#;
        let slide = parse_slide_layout(json).unwrap();
        let ids: Vec<_> = slide.regions.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["title", "left", "fig"]);
    }

    #[test]
    fn malformed_json_reports_byte_offset() {
        let bytes = b"{\"slide_id\": }";
        match parse_slide_layout(bytes).unwrap_err() {
            IngestError::Json { offset, .. } => assert_eq!(offset, 13),
            other => panic!("expected json error, got {other}"),
        }
    }

    #[test]
    fn transcript_lines_sorted_and_overlap_warned() {
        let json = br#"{"slide_id":"s1","lines":[
            {"line_id":"L2","text":"b","t_start":3.0,"t_end":6.0},
            {"line_id":"L1","text":"a","t_start":0.0,"t_end":3.5}]}"#;
        let parsed = parse_transcript(json).unwrap();
        let ids: Vec<_> = parsed.value.lines.iter().map(|l| l.line_id.as_str()).collect();
        assert_eq!(ids, ["L1", "L2"]);
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].message.contains("overlaps"));
    }

    #[test]
    fn transcript_inverted_interval_is_error() {
        let json = br#"{"slide_id":"s1","lines":[
            {"line_id":"L1","text":"a","t_start":2.0,"t_end":2.0}]}"#;
        assert!(parse_transcript(json).is_err());
    }

    #[test]
    fn transcript_words_preserved() {
        let json = br#"{"slide_id":"s1","lines":[
            {"line_id":"L1","text":"a b c d e","t_start":3.0,"t_end":8.2,
             "words":[{"w":"a","s":3.0,"e":3.5},{"w":"b","s":3.5,"e":4.2},
                      {"w":"c","s":4.2,"e":5.0},{"w":"d","s":5.0,"e":7.0},
                      {"w":"e","s":7.0,"e":8.2}]}]}"#;
        let parsed = parse_transcript(json).unwrap();
        let words = parsed.value.lines[0].words.as_ref().unwrap();
        assert_eq!(words.len(), 5);
        assert_eq!(words[4].text, "e");
        assert_eq!(words[4].t_end, 8.2);
    }

    #[test]
    fn ground_truth_empty_line_is_legal() {
        let json = br#"{"slide_id":"s1","lines":{"L1":[]}}"#;
        let parsed = parse_ground_truth(json).unwrap();
        assert!(parsed.value.lines["L1"].is_empty());
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn ground_truth_duplicates_deduplicated_with_warning() {
        let json = br#"{"slide_id":"s1","lines":{"L1":["R1","R1","R2"]}}"#;
        let parsed = parse_ground_truth(json).unwrap();
        assert_eq!(parsed.value.lines["L1"].len(), 2);
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn alignment_round_trip() {
        let result = AlignmentResult {
            slide_id: "s1".into(),
            matcher: "fuzzy".into(),
            lines: BTreeMap::from([
                (
                    "L1".to_string(),
                    vec![RegionMatch { region_id: "R1".into(), score: 0.45 }],
                ),
                (
                    "L2".to_string(),
                    vec![RegionMatch { region_id: "R2".into(), score: 0.80 }],
                ),
            ]),
        };
        let bytes = write_alignment(&result);
        assert_eq!(read_alignment(&bytes).unwrap(), result);
    }

    #[test]
    fn empty_alignment_is_canonical() {
        let result = AlignmentResult {
            slide_id: "s1".into(),
            matcher: "fuzzy".into(),
            lines: BTreeMap::new(),
        };
        let a = write_alignment(&result);
        let b = write_alignment(&read_alignment(&a).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn parsers_survive_arbitrary_bytes() {
        for junk in [&b"\xff\xfe"[..], b"{", b"[1,2,", b"null", b"{\"a\":}"] {
            assert!(parse_slide_layout(junk).is_err());
            assert!(parse_transcript(junk).is_err());
            assert!(parse_ground_truth(junk).is_err());
            assert!(read_alignment(junk).is_err());
        }
    }
}
