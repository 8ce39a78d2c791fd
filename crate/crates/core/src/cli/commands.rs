//! The batch subcommands. Every clip is handled independently on a worker
//! pool; per-clip results come back in manifest order and are the only
//! shared output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use super::manifest::{load_manifest, render_manifest, ManifestEntry};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::heatmap::render_clip;
use crate::ingest::{parse_boxes, parse_clip, parse_source_clip, write_atomic, write_bundle, ClipBundle, ClipMeta};
use crate::maskgen::{analyze, plan_stream, MaskPlan, Stream};
use crate::pipeline::preprocess;
use crate::rng::clip_seed;

pub const PREPROCESS_REPORT: &str = "report.jsonl";
pub const GENMASK_REPORT: &str = "genmask_report.jsonl";
pub const GENMASK_SUMMARY: &str = "genmask_summary.json";

/// Settings shared by every batch subcommand.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: PipelineConfig,
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub streams: Vec<Stream>,
    /// Worker count; zero uses one worker per core.
    pub jobs: usize,
}

/// Clip counts of a finished batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub clips: usize,
    pub failed: usize,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_meta(entry: &ManifestEntry) -> Result<ClipMeta> {
    let meta = ClipMeta::from_json(&read_text(&entry.meta)?)?;
    if meta.clip_id != entry.clip_id {
        return Err(Error::InvalidMeta(format!(
            "meta names clip {:?}, manifest {:?}",
            meta.clip_id, entry.clip_id
        )));
    }
    Ok(meta)
}

/// Loads a tokenizable bundle listed in a manifest.
pub fn load_bundle(entry: &ManifestEntry, cfg: &PipelineConfig) -> Result<ClipBundle> {
    let meta = load_meta(entry)?;
    parse_clip(
        &read_text(&entry.keypoints)?,
        &read(&entry.segments)?,
        &meta,
        cfg.label_map.as_ref(),
    )
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn run_clips<T: Send>(
    job: &Job,
    entries: &[ManifestEntry],
    work: impl Fn(&ManifestEntry) -> T + Sync,
) -> Result<Vec<T>> {
    Ok(pool(job.jobs)?.install(|| entries.par_iter().map(&work).collect()))
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn jsonl(lines: &[Value]) -> Vec<u8> {
    let mut out = String::new();
    for line in lines {
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out.into_bytes()
}

fn failure(clip_id: &str, err: &Error) -> Value {
    eprintln!("error: clip {clip_id}: {err}");
    json!({ "clip_id": clip_id, "status": "failed", "error": err.to_string() })
}

fn preprocess_clip(entry: &ManifestEntry, job: &Job) -> Result<(ManifestEntry, Value)> {
    let cfg = &job.config;
    let meta = load_meta(entry)?;
    let source = parse_source_clip(
        &read_text(&entry.keypoints)?,
        &read(&entry.segments)?,
        &meta,
        cfg.label_map.as_ref(),
    )?;
    let boxes = match &entry.boxes {
        Some(path) => {
            let all = parse_boxes(&read_text(path)?, meta.frame_count)?;
            Some(all[meta.active_range()].to_vec())
        }
        None => None,
    };
    let done = preprocess(&source, boxes.as_deref(), cfg)?;
    let dir = job.out.join(&entry.clip_id);
    create_out(&dir)?;
    let mut keypoints = Vec::new();
    let mut segments = Vec::new();
    let written = write_bundle(&done.bundle, &mut keypoints, &mut segments).map_err(|e| Error::io(&dir, e))?;
    let target = ManifestEntry::bundle(&entry.clip_id, &dir);
    write_atomic(&target.keypoints, &keypoints)?;
    write_atomic(&target.segments, &segments)?;
    write_atomic(&target.meta, written.to_json().as_bytes())?;
    let mut report = serde_json::to_value(&done.report).expect("report serializes");
    report["status"] = json!("ok");
    Ok((target, report))
}

/// Crops and trims every source clip into `out/<clip_id>/`, then writes
/// `out/manifest.jsonl` for the clips that succeeded and `out/report.jsonl`
/// for all of them.
pub fn cmd_preprocess(job: &Job) -> Result<Outcome> {
    let entries = load_manifest(&job.manifest)?;
    create_out(&job.out)?;
    let results = run_clips(job, &entries, |e| preprocess_clip(e, job))?;
    let mut produced = Vec::new();
    let mut report = Vec::new();
    let mut failed = 0;
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok((target, line)) => {
                produced.push(target);
                report.push(line);
            }
            Err(err) => {
                failed += 1;
                report.push(failure(&entry.clip_id, &err));
            }
        }
    }
    write_atomic(
        &job.out.join("manifest.jsonl"),
        render_manifest(&produced, &job.out).as_bytes(),
    )?;
    write_atomic(&job.out.join(PREPROCESS_REPORT), &jsonl(&report))?;
    println!("preprocessed {} clips, {failed} failed", entries.len());
    Ok(Outcome {
        clips: entries.len(),
        failed,
    })
}

/// File name of one stream's plan.
pub fn plan_file_name(clip_id: &str, stream: Stream) -> String {
    format!("{clip_id}.{}.smsk", stream.name())
}

fn plan_summary(stream: Stream, plan: &MaskPlan) -> Value {
    json!({
        "stream": stream.name(),
        "strategy": plan.strategy.name(),
        "branch": plan.trace.branch.map(|b| format!("{b:?}")),
        "direction": plan.direction.map(|d| d.name()),
        "tokens": plan.grid.len(),
        "masked": plan.masked.len(),
        "decoder_targets": plan.decoder_targets.len(),
        "ratio_bp": plan.ratio_bp,
        "alignment_steps": plan.trace.alignment_steps,
    })
}

fn genmask_clip(entry: &ManifestEntry, job: &Job) -> Result<Value> {
    let cfg = &job.config;
    let bundle = load_bundle(entry, cfg).map_err(|e| Error::MissingBundle {
        clip_id: entry.clip_id.clone(),
        detail: e.to_string(),
    })?;
    let analysis = analyze(&bundle, cfg)?;
    let seed = clip_seed(cfg.seed, &entry.clip_id);
    let mut plans = Vec::with_capacity(job.streams.len());
    for &stream in &job.streams {
        let plan = plan_stream(&analysis, stream, cfg, seed)?;
        write_atomic(&job.out.join(plan_file_name(&entry.clip_id, stream)), &plan.to_bytes())?;
        plans.push(plan_summary(stream, &plan));
    }
    Ok(json!({
        "clip_id": entry.clip_id,
        "status": "ok",
        "handedness": analysis.handedness,
        "plans": plans,
    }))
}

/// Writes `<clip_id>.<stream>.smsk` for every clip and selected stream, a
/// per-clip report and a timing summary.
pub fn cmd_genmask(job: &Job) -> Result<Outcome> {
    let entries = load_manifest(&job.manifest)?;
    if job.streams.is_empty() {
        return Err(Error::Usage("no streams selected".into()));
    }
    create_out(&job.out)?;
    let started = Instant::now();
    let results = run_clips(job, &entries, |e| genmask_clip(e, job))?;
    let elapsed = started.elapsed().as_secs_f64();
    let mut report = Vec::new();
    let mut failed = 0;
    for (entry, result) in entries.iter().zip(results) {
        match result {
            Ok(line) => report.push(line),
            Err(err) => {
                failed += 1;
                report.push(failure(&entry.clip_id, &err));
            }
        }
    }
    write_atomic(&job.out.join(GENMASK_REPORT), &jsonl(&report))?;
    let summary = json!({
        "clips": entries.len(),
        "failed": failed,
        "seed": job.config.seed,
        "jobs": job.jobs,
        "streams": job.streams.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "elapsed_s": elapsed,
        "clips_per_s": entries.len() as f64 / elapsed.max(1e-9),
    });
    write_atomic(&job.out.join(GENMASK_SUMMARY), format!("{summary:#}\n").as_bytes())?;
    println!(
        "generated plans for {} clips, {failed} failed, {:.3}s",
        entries.len() - failed,
        elapsed
    );
    Ok(Outcome {
        clips: entries.len(),
        failed,
    })
}

/// Renders each clip's keypoint heatmaps to `out/<clip_id>.shmp`.
pub fn cmd_heatmap(job: &Job) -> Result<Outcome> {
    let entries = load_manifest(&job.manifest)?;
    create_out(&job.out)?;
    let results = run_clips(job, &entries, |entry| -> Result<()> {
        let bundle = load_bundle(entry, &job.config).map_err(|e| Error::MissingBundle {
            clip_id: entry.clip_id.clone(),
            detail: e.to_string(),
        })?;
        let clip = render_clip(&bundle.keypoints, &job.config)?;
        write_atomic(&job.out.join(format!("{}.shmp", entry.clip_id)), &clip.to_bytes()?)
    })?;
    let mut failed = 0;
    for (entry, result) in entries.iter().zip(results) {
        if let Err(err) = result {
            failed += 1;
            failure(&entry.clip_id, &err);
        }
    }
    println!(
        "rendered heatmaps for {} clips, {failed} failed",
        entries.len() - failed
    );
    Ok(Outcome {
        clips: entries.len(),
        failed,
    })
}
