//! slidesync command line: file-in, file-out access to the full pipeline.
//!
//! Exit codes: 0 success, 1 fatal error, 2 completed with diagnostics,
//! 64 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use slidesync::correction;
use slidesync::highlight::{
    build_schedule, render_schedule, GapPolicy, HighlightSchedule, HighlightStyle, StyleParams,
};
use slidesync::ingest::{self, LoadedEntry, ManifestEntry};
use slidesync::matchers::{align, MatcherConfig, MatcherMethod, ProviderBundle};
use slidesync::metrics;
use slidesync::model::{AlignmentResult, GroundTruth, ThresholdPolicy};
use slidesync::providers::{
    build_embedding_provider, build_llm_provider, EmbeddingProvider, EmbeddingProviderSpec,
    LlmProvider, LlmProviderSpec,
};

const EXIT_OK: u8 = 0;
const EXIT_FATAL: u8 = 1;
const EXIT_DIAGNOSTICS: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "slidesync", version, about = "Align speech transcripts with slide regions")]
struct Cli {
    /// Worker threads for per-slide parallelism (default: all processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    #[value(name = "T-1")]
    T1,
    #[value(name = "T-2")]
    T2,
    #[value(name = "T-3")]
    T3,
    #[value(name = "best-fuzzy")]
    BestFuzzy,
    #[value(name = "best-sbert")]
    BestSbert,
    #[value(name = "best-scibert")]
    BestScibert,
    #[value(name = "best-specter")]
    BestSpecter,
    Custom,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Fuzzy,
    Embedding,
    LlmYesNo,
    LlmSelect,
}

impl From<MethodArg> for MatcherMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Fuzzy => MatcherMethod::Fuzzy,
            MethodArg::Embedding => MatcherMethod::Embedding,
            MethodArg::LlmYesNo => MatcherMethod::LlmYesNo,
            MethodArg::LlmSelect => MatcherMethod::LlmSelect,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Lexicon,
    Llm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StyleArg {
    BoundingBox,
    Shading,
    HideBackground,
    Magnify,
}

impl From<StyleArg> for HighlightStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::BoundingBox => HighlightStyle::BoundingBox,
            StyleArg::Shading => HighlightStyle::Shading,
            StyleArg::HideBackground => HighlightStyle::HideBackground,
            StyleArg::Magnify => HighlightStyle::Magnify,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GapPolicyArg {
    HoldPrevious,
    Clear,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum)]
    policy: PolicyArg,
    #[arg(long)]
    textual_th: Option<f64>,
    #[arg(long)]
    visual_th: Option<f64>,
    #[arg(long)]
    provider_config: Option<PathBuf>,
    /// Output directory; one Alignment JSON per slide.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CorrectArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    backend: BackendArg,
    #[arg(long)]
    provider_config: Option<PathBuf>,
    /// Output directory for corrected transcripts and substitution logs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Align each slide's transcript lines with its regions.
    Align(AlignArgs),
    /// Post-correct transcripts using slide text.
    Correct(CorrectArgs),
    /// Score a predicted alignment against the manifest's ground truth.
    EvalAlign {
        #[arg(long)]
        manifest: PathBuf,
        /// Alignment JSON file or directory of per-slide files.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pretty: bool,
    },
    /// Transcription error metrics between two transcripts.
    EvalAsr {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corpus statistics over a manifest.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
        /// Also print an aligned plain-text table.
        #[arg(long)]
        pretty: bool,
    },
    /// Turn an alignment into a timed highlight schedule.
    Schedule {
        #[arg(long)]
        manifest: PathBuf,
        /// Alignment JSON file or directory of per-slide files.
        #[arg(long)]
        alignment: PathBuf,
        #[arg(long, value_enum)]
        style: StyleArg,
        #[arg(long, value_enum, default_value = "hold-previous")]
        gap_policy: GapPolicyArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a schedule as SVG overlays plus an index.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Errors that should exit with the usage code rather than the fatal one.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit 0
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    configure_jobs(cli.jobs);
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {e}");
                ExitCode::from(EXIT_USAGE)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(EXIT_FATAL)
            }
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_jobs(jobs: Option<usize>) {
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_jobs(_jobs: Option<usize>) {}

/// Per-slide map over manifest entries, parallel when the feature is on.
/// Results come back in manifest order either way.
fn for_each_entry<T: Send>(
    entries: &[ManifestEntry],
    f: impl Fn(&ManifestEntry) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let f = &f;
        entries.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        entries.iter().map(&f).collect()
    }
}

#[derive(Deserialize, Default)]
struct ProviderConfig {
    embedding: Option<EmbeddingProviderSpec>,
    llm: Option<LlmProviderSpec>,
}

fn load_provider_config(path: Option<&Path>) -> Result<ProviderConfig> {
    match path {
        None => Ok(ProviderConfig::default()),
        Some(path) => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_slice(&bytes)
                .with_context(|| format!("parsing provider config {}", path.display()))
        }
    }
}

fn resolve_policy(args: &AlignArgs) -> Result<ThresholdPolicy> {
    let policy = match args.policy {
        PolicyArg::T1 => ThresholdPolicy::t1(),
        PolicyArg::T2 => ThresholdPolicy::t2(),
        PolicyArg::T3 => ThresholdPolicy::t3(),
        PolicyArg::BestFuzzy => ThresholdPolicy::best_fuzzy(),
        PolicyArg::BestSbert => ThresholdPolicy::best_sbert(),
        PolicyArg::BestScibert => ThresholdPolicy::best_scibert(),
        PolicyArg::BestSpecter => ThresholdPolicy::best_specter(),
        PolicyArg::Custom => {
            let (Some(textual), Some(visual)) = (args.textual_th, args.visual_th) else {
                return Err(anyhow!(UsageError(
                    "--policy custom requires --textual-th and --visual-th".into()
                )));
            };
            ThresholdPolicy::new("custom", textual, visual)
        }
    };
    if !policy.is_valid() {
        return Err(anyhow!(UsageError("thresholds must lie in [0, 1]".into())));
    }
    Ok(policy)
}

fn write_json(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn pretty_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("value serializes");
    bytes.push(b'\n');
    bytes
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Align(args) => run_align(args),
        Command::Correct(args) => run_correct(args),
        Command::EvalAlign {
            manifest,
            pred,
            out,
            pretty,
        } => run_eval_align(&manifest, &pred, &out, pretty),
        Command::EvalAsr {
            reference,
            hyp,
            out,
        } => run_eval_asr(&reference, &hyp, &out),
        Command::Stats { manifest, pretty } => run_stats(&manifest, pretty),
        Command::Schedule {
            manifest,
            alignment,
            style,
            gap_policy,
            out,
        } => run_schedule(&manifest, &alignment, style, gap_policy, &out),
        Command::Render {
            manifest,
            schedule,
            out_dir,
        } => run_render(&manifest, &schedule, &out_dir),
    }
}

fn run_align(args: AlignArgs) -> Result<u8> {
    let policy = resolve_policy(&args)?;
    let method: MatcherMethod = args.method.into();
    let providers = load_provider_config(args.provider_config.as_deref())?;
    let embedding: Option<Box<dyn EmbeddingProvider>> = match (&providers.embedding, method) {
        (Some(spec), _) => Some(build_embedding_provider(spec)?),
        (None, MatcherMethod::Embedding) => {
            return Err(anyhow!(UsageError(
                "--method embedding requires --provider-config with an embedding spec".into()
            )))
        }
        _ => None,
    };
    let llm: Option<Box<dyn LlmProvider>> = match (&providers.llm, method) {
        (Some(spec), _) => Some(build_llm_provider(spec)?),
        (None, MatcherMethod::LlmYesNo | MatcherMethod::LlmSelect) => {
            return Err(anyhow!(UsageError(format!(
                "--method {} requires --provider-config with an llm spec",
                method.tag()
            ))))
        }
        _ => None,
    };

    let manifest = ingest::load_manifest(&args.manifest)?;
    let config = MatcherConfig::new(method, policy);
    let bundle = ProviderBundle {
        embedding: embedding.as_deref(),
        llm: llm.as_deref(),
    };
    let outcomes = for_each_entry(&manifest.entries, |entry| {
        let loaded = ingest::load_entry(entry)?;
        let outcome = align(&loaded.slide, &loaded.transcript, &config, bundle)?;
        Ok((entry.slide_id.clone(), outcome))
    })?;

    fs::create_dir_all(&args.out)?;
    let mut had_diagnostics = false;
    for (slide_id, outcome) in outcomes {
        write_json(
            &args.out.join(format!("{slide_id}.json")),
            &ingest::write_alignment(&outcome.result),
        )?;
        if !outcome.diagnostics.is_empty() {
            had_diagnostics = true;
            write_json(
                &args.out.join(format!("{slide_id}.diagnostics.json")),
                &pretty_json(&outcome.diagnostics),
            )?;
            for diag in &outcome.diagnostics {
                eprintln!(
                    "diagnostic [{slide_id}/{}]: {}",
                    diag.line_id, diag.message
                );
            }
        }
    }
    Ok(if had_diagnostics { EXIT_DIAGNOSTICS } else { EXIT_OK })
}

fn run_correct(args: CorrectArgs) -> Result<u8> {
    let providers = load_provider_config(args.provider_config.as_deref())?;
    let llm: Option<Box<dyn LlmProvider>> = match (args.backend, &providers.llm) {
        (BackendArg::Llm, Some(spec)) => Some(build_llm_provider(spec)?),
        (BackendArg::Llm, None) => {
            return Err(anyhow!(UsageError(
                "--backend llm requires --provider-config with an llm spec".into()
            )))
        }
        (BackendArg::Lexicon, _) => None,
    };

    let manifest = ingest::load_manifest(&args.manifest)?;
    let outputs = for_each_entry(&manifest.entries, |entry| {
        let loaded = ingest::load_entry(entry)?;
        match args.backend {
            BackendArg::Lexicon => {
                let (corrected, logs) =
                    correction::correct_transcript_lexical(&loaded.transcript, &loaded.slide);
                Ok((entry.slide_id.clone(), corrected, pretty_json(&logs), false))
            }
            BackendArg::Llm => {
                let provider = llm.as_deref().expect("llm backend has a provider");
                let (corrected, diags) =
                    correction::correct_llm(&loaded.transcript, &loaded.slide, provider);
                let had = !diags.is_empty();
                Ok((entry.slide_id.clone(), corrected, pretty_json(&diags), had))
            }
        }
    })?;

    fs::create_dir_all(&args.out)?;
    let mut had_diagnostics = false;
    for (slide_id, corrected, log_bytes, had) in outputs {
        had_diagnostics |= had;
        write_json(
            &args.out.join(format!("{slide_id}.transcript.json")),
            &ingest::write_transcript(&corrected),
        )?;
        write_json(&args.out.join(format!("{slide_id}.log.json")), &log_bytes)?;
    }
    Ok(if had_diagnostics { EXIT_DIAGNOSTICS } else { EXIT_OK })
}

/// Accepts either a single Alignment JSON or a directory of them.
fn load_alignments(path: &Path) -> Result<BTreeMap<String, AlignmentResult>> {
    let mut out = BTreeMap::new();
    let mut insert = |path: &Path| -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let result = ingest::read_alignment(&bytes)?;
        out.insert(result.slide_id.clone(), result);
        Ok(())
    };
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                p.extension().is_some_and(|e| e == "json")
                    && !p
                        .file_name()
                        .is_some_and(|n| n.to_string_lossy().ends_with(".diagnostics.json"))
            })
            .collect();
        files.sort();
        for file in files {
            insert(&file)?;
        }
    } else {
        insert(path)?;
    }
    Ok(out)
}

fn run_eval_align(manifest: &Path, pred: &Path, out: &Path, pretty: bool) -> Result<u8> {
    let manifest = ingest::load_manifest(manifest)?;
    let alignments = load_alignments(pred)?;
    let entries = for_each_entry(&manifest.entries, |e| Ok(ingest::load_entry(e)?))?;
    let mut pairs: Vec<(&AlignmentResult, &GroundTruth)> = Vec::new();
    for loaded in &entries {
        let Some(gt) = &loaded.ground_truth else {
            continue;
        };
        let Some(result) = alignments.get(&loaded.slide.slide_id) else {
            continue;
        };
        pairs.push((result, gt));
    }
    if pairs.is_empty() {
        return Err(anyhow!("no (prediction, ground truth) pairs to evaluate"));
    }
    let scores = metrics::evaluate_dataset(&pairs);
    write_json(out, &pretty_json(&scores))?;
    if pretty {
        println!(
            "avg: sc={:.4} sm={:.4} p={:.4} r={:.4} f1={:.4} over {} lines",
            scores.avg.sc,
            scores.avg.sm,
            scores.avg.p,
            scores.avg.r,
            scores.avg.f1,
            scores.per_line.len()
        );
    } else {
        println!("{}", String::from_utf8_lossy(&pretty_json(&scores.avg)).trim_end());
    }
    Ok(EXIT_OK)
}

#[derive(serde::Serialize)]
struct AsrLineReport {
    cer: f64,
    wer: f64,
    edit_distance: usize,
    p: f64,
    r: f64,
    f1: f64,
}

#[derive(serde::Serialize)]
struct AsrReport {
    per_line: BTreeMap<String, AsrLineReport>,
    avg: BTreeMap<String, f64>,
}

fn run_eval_asr(reference: &Path, hyp: &Path, out: &Path) -> Result<u8> {
    let reference = ingest::parse_transcript(&fs::read(reference)?)?.value;
    let hypothesis = ingest::parse_transcript(&fs::read(hyp)?)?.value;
    let mut per_line = BTreeMap::new();
    for ref_line in &reference.lines {
        let Some(hyp_line) = hypothesis.line(&ref_line.line_id) else {
            continue;
        };
        let (p, r, f1) = metrics::transcription_prf(&ref_line.text, &hyp_line.text);
        per_line.insert(
            ref_line.line_id.clone(),
            AsrLineReport {
                cer: metrics::cer(&ref_line.text, &hyp_line.text),
                wer: metrics::wer(&ref_line.text, &hyp_line.text),
                edit_distance: metrics::edit_distance(&ref_line.text, &hyp_line.text),
                p,
                r,
                f1,
            },
        );
    }
    if per_line.is_empty() {
        return Err(anyhow!("no line_ids shared between reference and hypothesis"));
    }
    let n = per_line.len() as f64;
    let mut avg = BTreeMap::new();
    avg.insert("cer".to_string(), per_line.values().map(|l| l.cer).sum::<f64>() / n);
    avg.insert("wer".to_string(), per_line.values().map(|l| l.wer).sum::<f64>() / n);
    avg.insert(
        "edit_distance".to_string(),
        per_line.values().map(|l| l.edit_distance as f64).sum::<f64>() / n,
    );
    avg.insert("p".to_string(), per_line.values().map(|l| l.p).sum::<f64>() / n);
    avg.insert("r".to_string(), per_line.values().map(|l| l.r).sum::<f64>() / n);
    avg.insert("f1".to_string(), per_line.values().map(|l| l.f1).sum::<f64>() / n);
    let report = AsrReport { per_line, avg };
    write_json(out, &pretty_json(&report))?;
    println!("{}", String::from_utf8_lossy(&pretty_json(&report.avg)).trim_end());
    Ok(EXIT_OK)
}

fn run_stats(manifest: &Path, pretty: bool) -> Result<u8> {
    let manifest = ingest::load_manifest(manifest)?;
    let entries: Vec<LoadedEntry> = for_each_entry(&manifest.entries, |e| Ok(ingest::load_entry(e)?))?;
    let stats = metrics::corpus_stats(&entries).ok_or_else(|| anyhow!("empty manifest"))?;
    print!("{}", String::from_utf8_lossy(&pretty_json(&stats)));
    if pretty {
        print!("{}", stats.to_table());
    }
    Ok(EXIT_OK)
}

fn run_schedule(
    manifest: &Path,
    alignment: &Path,
    style: StyleArg,
    gap_policy: GapPolicyArg,
    out: &Path,
) -> Result<u8> {
    let manifest = ingest::load_manifest(manifest)?;
    let alignments = load_alignments(alignment)?;
    let gap_policy = match gap_policy {
        GapPolicyArg::HoldPrevious => GapPolicy::HoldPrevious,
        GapPolicyArg::Clear => GapPolicy::Clear,
    };
    let entries = for_each_entry(&manifest.entries, |e| Ok(ingest::load_entry(e)?))?;
    let mut events = Vec::new();
    for loaded in &entries {
        let Some(result) = alignments.get(&loaded.slide.slide_id) else {
            continue;
        };
        let schedule = build_schedule(
            result,
            &loaded.transcript,
            style.into(),
            &StyleParams::default(),
            gap_policy,
        )?;
        events.extend(schedule.events);
    }
    let schedule = HighlightSchedule { gap_policy, events };
    write_json(out, &pretty_json(&schedule))?;
    Ok(EXIT_OK)
}

fn run_render(manifest: &Path, schedule: &Path, out_dir: &Path) -> Result<u8> {
    let manifest = ingest::load_manifest(manifest)?;
    let schedule: HighlightSchedule = serde_json::from_slice(
        &fs::read(schedule).with_context(|| format!("reading {}", schedule.display()))?,
    )?;
    let entries = for_each_entry(&manifest.entries, |e| Ok(ingest::load_entry(e)?))?;
    let slides: Vec<_> = entries.into_iter().map(|e| e.slide).collect();
    render_schedule(&slides, &schedule, out_dir)?;
    Ok(EXIT_OK)
}
