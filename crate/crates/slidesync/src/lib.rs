//! slidesync aligns timestamped speech transcripts with slide layout
//! regions, scores the alignments, post-corrects transcripts using slide
//! text, and renders timed SVG highlight overlays.
//!
//! The pipeline: parse slide layouts and transcripts ([`ingest`]), score
//! every (line, region) pair with one of the matchers and threshold into an
//! alignment ([`matchers`]), evaluate against ground truth ([`metrics`]),
//! and turn the alignment into a timed highlight schedule plus SVG overlays
//! ([`highlight`]). [`providers`] supplies embedding/LLM backends, including
//! fully deterministic local ones; [`correction`] refines ASR output with
//! slide vocabulary.

pub mod correction;
pub mod highlight;
pub mod ingest;
pub mod matchers;
pub mod metrics;
pub mod model;
pub mod providers;
