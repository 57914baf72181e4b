//! Timed highlight schedules and the four SVG overlay styles: bounding
//! box, shading, background removal and magnification.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AlignmentResult, SlideDocument, Transcript};

pub const DEFAULT_STROKE_COLOR: &str = "#ff3b30";
pub const DEFAULT_FILL_COLOR: &str = "#ffcc00";
pub const DEFAULT_FILL_OPACITY: f64 = 0.35;
pub const DEFAULT_MAGNIFY_SCALE: f64 = 1.6;
/// Opacity of the dark layer in the hide_background style.
pub const DARK_LAYER_OPACITY: f64 = 0.85;
/// Bounding-box stroke width as a fraction of image width.
pub const STROKE_WIDTH_FRACTION: f64 = 0.004;

#[derive(Debug, Error)]
pub enum HighlightError {
    #[error("event references line {line_id} absent from the transcript")]
    DanglingLine { line_id: String },
    #[error("event references region {region_id} absent from slide {slide_id}")]
    DanglingRegion { slide_id: String, region_id: String },
    #[error("style {style} needs the slide raster, but {path} is unreadable: {reason}")]
    UnreadableImage {
        style: String,
        path: PathBuf,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighlightStyle {
    BoundingBox,
    Shading,
    HideBackground,
    Magnify,
}

impl HighlightStyle {
    pub fn tag(self) -> &'static str {
        match self {
            HighlightStyle::BoundingBox => "bounding_box",
            HighlightStyle::Shading => "shading",
            HighlightStyle::HideBackground => "hide_background",
            HighlightStyle::Magnify => "magnify",
        }
    }

    /// Magnify and hide reference the raster; box and shading only need
    /// geometry.
    pub fn needs_raster(self) -> bool {
        matches!(self, HighlightStyle::HideBackground | HighlightStyle::Magnify)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    pub stroke_color: String,
    pub fill_color: String,
    pub fill_opacity: f64,
    pub magnify_scale: f64,
}

impl Default for StyleParams {
    fn default() -> Self {
        Self {
            stroke_color: DEFAULT_STROKE_COLOR.to_string(),
            fill_color: DEFAULT_FILL_COLOR.to_string(),
            fill_opacity: DEFAULT_FILL_OPACITY,
            magnify_scale: DEFAULT_MAGNIFY_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightEvent {
    pub slide_id: String,
    pub region_ids: BTreeSet<String>,
    pub t_start: f64,
    pub t_end: f64,
    pub style: HighlightStyle,
    pub params: StyleParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    HoldPrevious,
    Clear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightSchedule {
    pub gap_policy: GapPolicy,
    pub events: Vec<HighlightEvent>,
}

/// One event per line with non-empty predictions, spanning the line's
/// interval. Under hold_previous, each event is extended up to the next
/// event on the same slide; extension never creates new overlap.
pub fn build_schedule(
    result: &AlignmentResult,
    transcript: &Transcript,
    style: HighlightStyle,
    params: &StyleParams,
    gap_policy: GapPolicy,
) -> Result<HighlightSchedule, HighlightError> {
    let mut events = Vec::new();
    for (line_id, matches) in &result.lines {
        let line = transcript
            .line(line_id)
            .ok_or_else(|| HighlightError::DanglingLine {
                line_id: line_id.clone(),
            })?;
        if matches.is_empty() {
            continue;
        }
        events.push(HighlightEvent {
            slide_id: result.slide_id.clone(),
            region_ids: matches.iter().map(|m| m.region_id.clone()).collect(),
            t_start: line.t_start,
            t_end: line.t_end,
            style,
            params: params.clone(),
        });
    }
    events.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    if gap_policy == GapPolicy::HoldPrevious {
        for i in 0..events.len().saturating_sub(1) {
            if events[i + 1].slide_id == events[i].slide_id
                && events[i + 1].t_start > events[i].t_end
            {
                events[i].t_end = events[i + 1].t_start;
            }
        }
    }
    Ok(HighlightSchedule { gap_policy, events })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn fmt_px(v: f64) -> String {
    // Trim trailing zeros so output is stable and compact.
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Renders one event as a standalone SVG overlay over the slide raster.
pub fn render_overlay(
    slide: &SlideDocument,
    event: &HighlightEvent,
) -> Result<String, HighlightError> {
    let (w, h) = (slide.image_size.0 as f64, slide.image_size.1 as f64);
    let mut regions = Vec::new();
    for id in &event.region_ids {
        let region = slide
            .region(id)
            .ok_or_else(|| HighlightError::DanglingRegion {
                slide_id: slide.slide_id.clone(),
                region_id: id.clone(),
            })?;
        regions.push(region);
    }
    if event.style.needs_raster() {
        if let Err(e) = fs::metadata(&slide.image_path) {
            return Err(HighlightError::UnreadableImage {
                style: event.style.tag().to_string(),
                path: slide.image_path.clone(),
                reason: e.to_string(),
            });
        }
    }
    let image_href = xml_escape(&slide.image_path.to_string_lossy());
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n",
        fmt_px(w), fmt_px(h), fmt_px(w), fmt_px(h)
    ));
    svg.push_str(&format!(
        "  <image xlink:href=\"{image_href}\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\"/>\n",
        fmt_px(w),
        fmt_px(h)
    ));
    let params = &event.params;
    match event.style {
        HighlightStyle::BoundingBox => {
            let stroke_width = w * STROKE_WIDTH_FRACTION;
            for region in &regions {
                let (x, y, rw, rh) = region.bbox.to_pixels(slide.image_size);
                svg.push_str(&format!(
                    "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" stroke=\"{}\" stroke-width=\"{}\" fill-opacity=\"0\"/>\n",
                    fmt_px(x), fmt_px(y), fmt_px(rw), fmt_px(rh),
                    xml_escape(&params.stroke_color), fmt_px(stroke_width)
                ));
            }
        }
        HighlightStyle::Shading => {
            for region in &regions {
                let (x, y, rw, rh) = region.bbox.to_pixels(slide.image_size);
                svg.push_str(&format!(
                    "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n",
                    fmt_px(x), fmt_px(y), fmt_px(rw), fmt_px(rh),
                    xml_escape(&params.fill_color), params.fill_opacity
                ));
            }
        }
        HighlightStyle::HideBackground => {
            // Full canvas with the regions cut out via even-odd subpaths.
            let mut d = format!("M0 0H{}V{}H0Z", fmt_px(w), fmt_px(h));
            for region in &regions {
                let (x, y, rw, rh) = region.bbox.to_pixels(slide.image_size);
                d.push_str(&format!(
                    " M{} {}H{}V{}H{}Z",
                    fmt_px(x),
                    fmt_px(y),
                    fmt_px(x + rw),
                    fmt_px(y + rh),
                    fmt_px(x)
                ));
            }
            svg.push_str(&format!(
                "  <path d=\"{d}\" fill=\"#000000\" fill-opacity=\"{DARK_LAYER_OPACITY}\" fill-rule=\"evenodd\"/>\n"
            ));
        }
        HighlightStyle::Magnify => {
            let scale = params.magnify_scale;
            for (i, region) in regions.iter().enumerate() {
                let (x, y, rw, rh) = region.bbox.to_pixels(slide.image_size);
                let (cx, cy) = (x + rw / 2.0, y + rh / 2.0);
                let (mx, my) = (cx - rw * scale / 2.0, cy - rh * scale / 2.0);
                let clip_id = format!("magnify-clip-{i}");
                svg.push_str(&format!(
                    "  <clipPath id=\"{clip_id}\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
                    fmt_px(mx), fmt_px(my), fmt_px(rw * scale), fmt_px(rh * scale)
                ));
                // The raster re-drawn scaled about the region center, clipped
                // to the magnified footprint.
                svg.push_str(&format!(
                    "  <g clip-path=\"url(#{clip_id})\"><image xlink:href=\"{image_href}\" x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" transform=\"translate({} {}) scale({scale}) translate({} {})\"/></g>\n",
                    fmt_px(w), fmt_px(h), fmt_px(cx), fmt_px(cy), fmt_px(-cx), fmt_px(-cy)
                ));
                svg.push_str(&format!(
                    "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" stroke=\"{}\" stroke-width=\"{}\" fill-opacity=\"0\"/>\n",
                    fmt_px(mx), fmt_px(my), fmt_px(rw * scale), fmt_px(rh * scale),
                    xml_escape(&params.stroke_color), fmt_px(w * STROKE_WIDTH_FRACTION / 2.0)
                ));
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// One index row per rendered SVG, for an external video compositor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub file: String,
    pub slide_id: String,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderIndex {
    pub entries: Vec<IndexEntry>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HighlightError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|source| HighlightError::Io {
        path: tmp.clone(),
        source,
    })?;
    fs::rename(&tmp, path).map_err(|source| HighlightError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Renders every event of a schedule into `out_dir`, named
/// `{slide_id}_{t_start_ms}_{style}.svg`, plus an `index.json`.
pub fn render_schedule(
    slides: &[SlideDocument],
    schedule: &HighlightSchedule,
    out_dir: &Path,
) -> Result<RenderIndex, HighlightError> {
    fs::create_dir_all(out_dir).map_err(|source| HighlightError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::new();
    for event in &schedule.events {
        let slide = slides
            .iter()
            .find(|s| s.slide_id == event.slide_id)
            .ok_or_else(|| HighlightError::DanglingRegion {
                slide_id: event.slide_id.clone(),
                region_id: "<slide missing>".to_string(),
            })?;
        let svg = render_overlay(slide, event)?;
        let file = format!(
            "{}_{}_{}.svg",
            event.slide_id,
            (event.t_start * 1000.0).round() as u64,
            event.style.tag()
        );
        write_atomic(&out_dir.join(&file), svg.as_bytes())?;
        entries.push(IndexEntry {
            file,
            slide_id: event.slide_id.clone(),
            t_start: event.t_start,
            t_end: event.t_end,
        });
    }
    let index = RenderIndex { entries };
    let mut bytes = serde_json::to_vec_pretty(&index).expect("index serializes");
    bytes.push(b'\n');
    write_atomic(&out_dir.join("index.json"), &bytes)?;
    Ok(index)
}
