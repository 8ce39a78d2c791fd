//! Pipeline configuration and its `key = value` text form.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! Unknown keys are rejected. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::PartLabel;

/// How keypoints are laid out across heatmap channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelPolicy {
    /// All 55 keypoints max-composited into one map.
    #[default]
    Single,
    /// Body, left hand and right hand in three separate maps.
    PerGroup,
}

impl ChannelPolicy {
    pub fn channels(self) -> usize {
        match self {
            ChannelPolicy::Single => 1,
            ChannelPolicy::PerGroup => 3,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ChannelPolicy::Single => "single",
            ChannelPolicy::PerGroup => "per_group",
        }
    }
}

/// How overlapping Gaussians combine in a heatmap channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Composite {
    /// Per-pixel maximum.
    #[default]
    Max,
    /// Per-pixel sum, clipped at 1.
    Sum,
}

impl Composite {
    fn as_str(self) -> &'static str {
        match self {
            Composite::Max => "max",
            Composite::Sum => "sum",
        }
    }
}

/// Maps upstream parser class codes onto the six-code part vocabulary.
#[derive(Clone, PartialEq, Eq)]
pub struct LabelMap {
    table: [Option<PartLabel>; 256],
}

impl LabelMap {
    pub fn new(pairs: impl IntoIterator<Item = (u8, PartLabel)>) -> Self {
        let mut table = [None; 256];
        for (from, to) in pairs {
            table[from as usize] = Some(to);
        }
        LabelMap { table }
    }

    pub fn get(&self, code: u8) -> Option<PartLabel> {
        self.table[code as usize]
    }

    fn pairs(&self) -> impl Iterator<Item = (u8, PartLabel)> + '_ {
        self.table
            .iter()
            .enumerate()
            .filter_map(|(code, to)| to.map(|to| (code as u8, to)))
    }
}

impl std::fmt::Debug for LabelMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_map().entries(self.pairs()).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Target fraction of masked tokens for every plan.
    pub mask_ratio: f64,
    /// Hand-region overlap above which two-handed signs use directional masking.
    pub overlap_threshold: f64,
    /// Allowed deviation of the shoulder angle from 90 degrees.
    pub arm_angle1_tolerance: f64,
    /// Allowed deviation of the elbow angle from 180 degrees.
    pub arm_angle2_tolerance: f64,
    /// Allowed relative difference between upper-arm and forearm lengths.
    pub arm_length_tolerance: f64,
    /// Wrist path length, as a fraction of the crop diagonal, that counts as moving.
    pub movement_threshold: f64,
    /// Keypoints below this confidence are treated as absent.
    pub presence_threshold: f64,
    /// Fraction of tube-frames removed by the temporal mask.
    pub temporal_mask_fraction: f64,
    /// Gaussian standard deviation for heatmap splats, in pixels.
    pub heatmap_sigma: f64,
    pub heatmap_channels: ChannelPolicy,
    pub heatmap_composite: Composite,
    /// Side of the square signer crop, in pixels.
    pub output_size: usize,
    /// A token joins a region when more than this fraction of its footprint
    /// carries the region label in one of its frames. Zero means one pixel.
    pub region_coverage: f64,
    /// Fall back to tube masking when spatio-temporal masking has no hands.
    pub no_hands_fallback: bool,
    pub mixup_alpha: f64,
    pub label_map: Option<LabelMap>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mask_ratio: 0.9,
            overlap_threshold: 0.25,
            arm_angle1_tolerance: 15.0,
            arm_angle2_tolerance: 20.0,
            arm_length_tolerance: 0.25,
            movement_threshold: 0.2,
            presence_threshold: 0.3,
            temporal_mask_fraction: 0.25,
            heatmap_sigma: 4.0,
            heatmap_channels: ChannelPolicy::Single,
            heatmap_composite: Composite::Max,
            output_size: 224,
            region_coverage: 0.0,
            no_hands_fallback: true,
            mixup_alpha: 0.8,
            label_map: None,
            seed: 0,
        }
    }
}

fn open_unit(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{key} must lie in (0, 1), got {v}")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{key} must be nonnegative, got {v}")))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        open_unit("mask_ratio", self.mask_ratio)?;
        open_unit("overlap_threshold", self.overlap_threshold)?;
        open_unit("movement_threshold", self.movement_threshold)?;
        open_unit("temporal_mask_fraction", self.temporal_mask_fraction)?;
        nonnegative("arm_angle1_tolerance", self.arm_angle1_tolerance)?;
        nonnegative("arm_angle2_tolerance", self.arm_angle2_tolerance)?;
        nonnegative("arm_length_tolerance", self.arm_length_tolerance)?;
        nonnegative("presence_threshold", self.presence_threshold)?;
        if self.presence_threshold > 1.0 {
            return Err(Error::InvalidConfig("presence_threshold must not exceed 1".into()));
        }
        if !(self.heatmap_sigma > 0.0 && self.heatmap_sigma.is_finite()) {
            return Err(Error::InvalidConfig("heatmap_sigma must be positive".into()));
        }
        if self.output_size == 0 || !self.output_size.is_multiple_of(16) {
            return Err(Error::InvalidConfig(format!(
                "output_size must be a positive multiple of 16, got {}",
                self.output_size
            )));
        }
        if !(0.0..1.0).contains(&self.region_coverage) {
            return Err(Error::InvalidConfig("region_coverage must lie in [0, 1)".into()));
        }
        if !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(Error::InvalidConfig("mixup_alpha must be positive".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("{key}: not a number: {value:?}")))
        };
        match key {
            "mask_ratio" => self.mask_ratio = float()?,
            "overlap_threshold" => self.overlap_threshold = float()?,
            "arm_angle1_tolerance" => self.arm_angle1_tolerance = float()?,
            "arm_angle2_tolerance" => self.arm_angle2_tolerance = float()?,
            "arm_length_tolerance" => self.arm_length_tolerance = float()?,
            "movement_threshold" => self.movement_threshold = float()?,
            "presence_threshold" => self.presence_threshold = float()?,
            "temporal_mask_fraction" => self.temporal_mask_fraction = float()?,
            "heatmap_sigma" => self.heatmap_sigma = float()?,
            "region_coverage" => self.region_coverage = float()?,
            "mixup_alpha" => self.mixup_alpha = float()?,
            "heatmap_channels" => {
                self.heatmap_channels = match value {
                    "single" => ChannelPolicy::Single,
                    "per_group" => ChannelPolicy::PerGroup,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "heatmap_channels: expected single or per_group, got {value:?}"
                        )))
                    }
                }
            }
            "heatmap_composite" => {
                self.heatmap_composite = match value {
                    "max" => Composite::Max,
                    "sum" => Composite::Sum,
                    _ => {
                        return Err(Error::InvalidConfig(format!(
                            "heatmap_composite: expected max or sum, got {value:?}"
                        )))
                    }
                }
            }
            "output_size" => {
                self.output_size = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("output_size: {value:?}")))?
            }
            "no_hands_fallback" => {
                self.no_hands_fallback = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("no_hands_fallback: {value:?}")))?
            }
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("seed: {value:?}")))?
            }
            "label_map" => self.label_map = parse_label_map(value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("mask_ratio", self.mask_ratio.to_string());
        line("overlap_threshold", self.overlap_threshold.to_string());
        line("arm_angle1_tolerance", self.arm_angle1_tolerance.to_string());
        line("arm_angle2_tolerance", self.arm_angle2_tolerance.to_string());
        line("arm_length_tolerance", self.arm_length_tolerance.to_string());
        line("movement_threshold", self.movement_threshold.to_string());
        line("presence_threshold", self.presence_threshold.to_string());
        line("temporal_mask_fraction", self.temporal_mask_fraction.to_string());
        line("heatmap_sigma", self.heatmap_sigma.to_string());
        line("heatmap_channels", self.heatmap_channels.as_str().to_string());
        line("heatmap_composite", self.heatmap_composite.as_str().to_string());
        line("output_size", self.output_size.to_string());
        line("region_coverage", self.region_coverage.to_string());
        line("no_hands_fallback", self.no_hands_fallback.to_string());
        line("mixup_alpha", self.mixup_alpha.to_string());
        if let Some(map) = &self.label_map {
            let pairs: Vec<String> = map.pairs().map(|(from, to)| format!("{from}:{}", to as u8)).collect();
            line("label_map", pairs.join(","));
        }
        line("seed", self.seed.to_string());
        out
    }
}

/// `from:to` pairs separated by commas, e.g. `14:1,15:2,21:5`.
fn parse_label_map(value: &str) -> Result<Option<LabelMap>> {
    if value.is_empty() {
        return Ok(None);
    }
    let mut pairs = Vec::new();
    for item in value.split(',') {
        let (from, to) = item
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("label_map entry {item:?}")))?;
        let from: u8 = from
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("label_map source code {from:?}")))?;
        let to: u8 = to
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("label_map target code {to:?}")))?;
        let to = PartLabel::from_code(to)
            .ok_or_else(|| Error::InvalidConfig(format!("label_map target {to} is not a part code")))?;
        pairs.push((from, to));
    }
    Ok(Some(LabelMap::new(pairs)))
}
