//! Corpus summary from the reports written by `genmask` and `preprocess`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::commands::{GENMASK_REPORT, GENMASK_SUMMARY, PREPROCESS_REPORT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlanRow {
    pub clip_id: String,
    pub stream: String,
    pub strategy: String,
    pub masked: usize,
    pub tokens: usize,
}

impl PlanRow {
    pub fn ratio(&self) -> f64 {
        self.masked as f64 / self.tokens as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    pub rows: Vec<PlanRow>,
    pub handedness: BTreeMap<String, usize>,
    pub failed: usize,
    /// Mean front and back trims, when a preprocessing report was found.
    pub mean_trims: Option<(f64, f64)>,
    pub clips_per_s: Option<f64>,
}

fn read_lines(path: &Path) -> Result<Vec<Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::format("report", e.to_string())))
        .collect()
}

/// Collects statistics from `dir`. The preprocessing report is read from
/// `trims` when given, else from `dir` if present.
pub fn collect(dir: &Path, trims: Option<&Path>) -> Result<CorpusStats> {
    let mut stats = CorpusStats::default();
    for line in read_lines(&dir.join(GENMASK_REPORT))? {
        if line["status"] != "ok" {
            stats.failed += 1;
            continue;
        }
        let clip_id = line["clip_id"].as_str().unwrap_or_default().to_string();
        if let Some(h) = line["handedness"].as_str() {
            *stats.handedness.entry(h.to_string()).or_default() += 1;
        }
        for plan in line["plans"].as_array().into_iter().flatten() {
            stats.rows.push(PlanRow {
                clip_id: clip_id.clone(),
                stream: plan["stream"].as_str().unwrap_or_default().to_string(),
                strategy: plan["strategy"].as_str().unwrap_or_default().to_string(),
                masked: plan["masked"].as_u64().unwrap_or(0) as usize,
                tokens: plan["tokens"].as_u64().unwrap_or(1) as usize,
            });
        }
    }
    let summary_path = dir.join(GENMASK_SUMMARY);
    if summary_path.exists() {
        let text = std::fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: Value = serde_json::from_str(&text).map_err(|e| Error::format("summary", e.to_string()))?;
        stats.clips_per_s = summary["clips_per_s"].as_f64();
    }
    let trim_path = trims
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(PREPROCESS_REPORT));
    if trim_path.exists() {
        let ok: Vec<Value> = read_lines(&trim_path)?
            .into_iter()
            .filter(|l| l["status"] == "ok")
            .collect();
        if !ok.is_empty() {
            let mean = |key: &str| ok.iter().map(|l| l[key].as_f64().unwrap_or(0.0)).sum::<f64>() / ok.len() as f64;
            stats.mean_trims = Some((mean("front_trim"), mean("back_trim")));
        }
    }
    Ok(stats)
}

pub fn print(stats: &CorpusStats, out: &mut impl Write) -> std::io::Result<()> {
    let id_width = stats.rows.iter().map(|r| r.clip_id.len()).max().unwrap_or(0).max(7);
    writeln!(
        out,
        "{:<id_width$}  {:<11}  {:<12}  {:>6}  {:>6}  {:>7}",
        "clip_id", "stream", "strategy", "masked", "tokens", "ratio"
    )?;
    for r in &stats.rows {
        writeln!(
            out,
            "{:<id_width$}  {:<11}  {:<12}  {:>6}  {:>6}  {:>7.4}",
            r.clip_id,
            r.stream,
            r.strategy,
            r.masked,
            r.tokens,
            r.ratio()
        )?;
    }
    let mut dist: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in &stats.rows {
        *dist.entry((r.masked, r.tokens)).or_default() += 1;
    }
    writeln!(out, "\nachieved ratio distribution ({} plans):", stats.rows.len())?;
    for ((m, n), count) in &dist {
        writeln!(out, "  {m}/{n} = {:.4}: {count}", *m as f64 / *n as f64)?;
    }
    writeln!(out, "\nhandedness:")?;
    for (h, count) in &stats.handedness {
        writeln!(out, "  {h}: {count}")?;
    }
    if stats.failed > 0 {
        writeln!(out, "  failed: {}", stats.failed)?;
    }
    match stats.mean_trims {
        Some((front, back)) => writeln!(out, "\nmean trim: front {front:.2}, back {back:.2} frames")?,
        None => writeln!(out, "\nmean trim: no preprocessing report")?,
    }
    match stats.clips_per_s {
        Some(rate) => writeln!(out, "throughput: {rate:.1} clips/s")?,
        None => writeln!(out, "throughput: no generation summary")?,
    }
    Ok(())
}
