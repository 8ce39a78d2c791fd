//! Line-delimited clip manifests.
//!
//! Each line is `{"clip_id": .., "keypoints": .., "segments": .., "meta": ..}`
//! with an optional `"boxes"` path. Relative paths resolve against the
//! manifest's directory. Blank lines and lines starting with `#` are skipped.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub clip_id: String,
    pub keypoints: PathBuf,
    pub segments: PathBuf,
    pub meta: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<PathBuf>,
}

impl ManifestEntry {
    /// Entry for the standard bundle layout `<dir>/{keypoints.jsonl,
    /// segments.sgmt, meta.json}`.
    pub fn bundle(clip_id: &str, dir: &Path) -> Self {
        ManifestEntry {
            clip_id: clip_id.to_string(),
            keypoints: dir.join("keypoints.jsonl"),
            segments: dir.join("segments.sgmt"),
            meta: dir.join("meta.json"),
            boxes: None,
        }
    }

    fn resolved(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.keypoints);
        fix(&mut self.segments);
        fix(&mut self.meta);
        if let Some(b) = self.boxes.as_mut() {
            fix(b);
        }
        self
    }
}

/// Clip ids become file names, so they are limited to a safe alphabet.
pub fn valid_clip_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| Error::Usage(format!("manifest line {}: {e}", lineno + 1)))?;
        if !valid_clip_id(&entry.clip_id) {
            return Err(Error::Usage(format!(
                "manifest line {}: clip id {:?} must use only letters, digits, '-', '_' and '.'",
                lineno + 1,
                entry.clip_id
            )));
        }
        if !seen.insert(entry.clip_id.clone()) {
            return Err(Error::Usage(format!("manifest lists clip {} twice", entry.clip_id)));
        }
        entries.push(entry.resolved(base));
    }
    if entries.is_empty() {
        return Err(Error::Usage("manifest lists no clips".into()));
    }
    Ok(entries)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Usage(format!("cannot read manifest {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, base)
}

/// Serializes entries one per line, paths made relative to `base` where
/// possible.
pub fn render_manifest(entries: &[ManifestEntry], base: &Path) -> String {
    let rel = |p: &Path| {
        p.strip_prefix(base)
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| p.to_path_buf())
    };
    let mut out = String::new();
    for e in entries {
        let e = ManifestEntry {
            clip_id: e.clip_id.clone(),
            keypoints: rel(&e.keypoints),
            segments: rel(&e.segments),
            meta: rel(&e.meta),
            boxes: e.boxes.as_deref().map(rel),
        };
        out.push_str(&serde_json::to_string(&e).expect("entry serializes"));
        out.push('\n');
    }
    out
}
