//! Mask plans for every pretraining stream.
//!
//! A plan splits the token lattice into visible and masked tokens and names
//! the masked tokens the decoder must reconstruct. Baselines (random patch,
//! random tube) ignore the segmentation; the spatio-temporal strategies
//! reserve parts of the hand and arm regions, blank a window of tube-frames
//! in the middle of the clip and then align the masked count to the target
//! ratio.

mod align;
mod plan;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::geometry::{classify_handedness, overlap_ratio, Handedness};
use crate::ingest::{ClipBundle, Side};
use crate::patchgrid::{build_grid, region_tokens, RegionTokens, TokenCoord, TokenGrid};
use crate::rng::{clip_seed, fnv1a, round_count, MaskRng};
use crate::tokenset::TokenSet;

use align::{AlignInput, ScanOrder};

pub use plan::PLAN_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Strategy {
    Random = 0,
    Tube = 1,
    StHandArm = 2,
    StHandOnly = 3,
}

impl Strategy {
    pub fn from_code(code: u8) -> Option<Strategy> {
        Some(match code {
            0 => Strategy::Random,
            1 => Strategy::Tube,
            2 => Strategy::StHandArm,
            3 => Strategy::StHandOnly,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Tube => "tube",
            Strategy::StHandArm => "st-hand-arm",
            Strategy::StHandOnly => "st-hand-only",
        }
    }

    pub fn from_name(name: &str) -> Option<Strategy> {
        [
            Strategy::Random,
            Strategy::Tube,
            Strategy::StHandArm,
            Strategy::StHandOnly,
        ]
        .into_iter()
        .find(|s| s.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Direction {
    Top = 0,
    Bottom = 1,
    Left = 2,
    Right = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Top, Direction::Bottom, Direction::Left, Direction::Right];

    pub fn from_code(code: u8) -> Option<Direction> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Top => "top",
            Direction::Bottom => "bottom",
            Direction::Left => "left",
            Direction::Right => "right",
        }
    }

    pub fn from_name(name: &str) -> Option<Direction> {
        Self::ALL.into_iter().find(|d| d.name() == name)
    }

    pub fn mirrored(self) -> Direction {
        match self {
            Direction::Left => Direction::Right,
            Direction::Right => Direction::Left,
            other => other,
        }
    }

    /// Distance of a token from this side of the frame, in rows or columns.
    fn depth(self, grid: &TokenGrid, at: TokenCoord) -> usize {
        match self {
            Direction::Top => at.r,
            Direction::Bottom => grid.rows - 1 - at.r,
            Direction::Left => at.c,
            Direction::Right => grid.cols - 1 - at.c,
        }
    }
}

/// Tube-frames `[start, start + len)` masked in full.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TemporalWindow {
    pub start: usize,
    pub len: usize,
}

impl TemporalWindow {
    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && t < self.start + self.len
    }
}

/// Which branch of the strategy produced a plan. Kept in memory only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskBranch {
    Random,
    Tube,
    /// Two-handed with overlapping hands: directional half of the hands.
    Directional,
    /// Two-handed with separated hands: one side's arm and hand kept.
    SideReserve(Side),
    /// One moving hand on this side.
    OneHanded(Side),
    /// Spatio-temporal masking had no hands; tube masking was used instead.
    NoHandsFallback,
}

/// Provenance of a plan that is not part of its canonical encoding.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanTrace {
    pub branch: Option<MaskBranch>,
    pub overlap: Option<f64>,
    pub alignment_steps: usize,
}

#[derive(Debug, Clone)]
pub struct MaskPlan {
    pub grid: TokenGrid,
    pub strategy: Strategy,
    pub masked: TokenSet,
    pub decoder_targets: TokenSet,
    /// Achieved masked fraction in units of 1/10000, rounded half up.
    pub ratio_bp: u16,
    pub direction: Option<Direction>,
    pub temporal_window: Option<TemporalWindow>,
    pub seed: u64,
    pub trace: PlanTrace,
}

/// Plans compare by their canonical content; the trace is ignored.
impl PartialEq for MaskPlan {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.strategy == other.strategy
            && self.masked == other.masked
            && self.decoder_targets == other.decoder_targets
            && self.ratio_bp == other.ratio_bp
            && self.direction == other.direction
            && self.temporal_window == other.temporal_window
            && self.seed == other.seed
    }
}

fn ratio_bp(masked: usize, total: usize) -> u16 {
    ((masked as u64 * 20_000 + total as u64) / (2 * total as u64)) as u16
}

impl MaskPlan {
    fn new(grid: TokenGrid, strategy: Strategy, masked: TokenSet, decoder_targets: TokenSet, seed: u64) -> Self {
        let ratio_bp = ratio_bp(masked.len(), grid.len());
        MaskPlan {
            grid,
            strategy,
            masked,
            decoder_targets,
            ratio_bp,
            direction: None,
            temporal_window: None,
            seed,
            trace: PlanTrace::default(),
        }
    }

    pub fn visible(&self) -> TokenSet {
        self.masked.complement()
    }

    pub fn achieved_ratio(&self) -> f64 {
        self.masked.len() as f64 / self.grid.len() as f64
    }

    fn refresh_ratio(&mut self) {
        self.ratio_bp = ratio_bp(self.masked.len(), self.grid.len());
    }
}

/// Uniformly masks `round(ratio * N)` tokens.
pub fn random_mask(grid: &TokenGrid, ratio: f64, seed: u64) -> MaskPlan {
    let n = grid.len();
    let count = round_count(ratio, n);
    let mut order: Vec<u32> = (0..n as u32).collect();
    MaskRng::new(seed).partial_shuffle(&mut order, count);
    let masked = TokenSet::from_indices(n, order[..count].iter().map(|&i| i as usize));
    let mut plan = MaskPlan::new(*grid, Strategy::Random, masked.clone(), masked, seed);
    plan.trace.branch = Some(MaskBranch::Random);
    plan
}

/// Masks `round(ratio * cells)` spatial cells in every tube-frame.
pub fn tube_mask(grid: &TokenGrid, ratio: f64, seed: u64) -> MaskPlan {
    let cells = grid.cells();
    let count = round_count(ratio, cells);
    let mut order: Vec<u32> = (0..cells as u32).collect();
    MaskRng::new(seed).partial_shuffle(&mut order, count);
    let mut masked = TokenSet::empty(grid.len());
    for t in 0..grid.frames {
        let base = grid.frame_range(t).start;
        for &cell in &order[..count] {
            masked.insert(base + cell as usize);
        }
    }
    let mut plan = MaskPlan::new(*grid, Strategy::Tube, masked.clone(), masked, seed);
    plan.trace.branch = Some(MaskBranch::Tube);
    plan
}

/// Window of `max(1, round(fraction * T'))` tube-frames starting at
/// `(T' - k) / 2`.
pub fn temporal_window(grid: &TokenGrid, fraction: f64) -> TemporalWindow {
    let len = round_count(fraction, grid.frames).clamp(1, grid.frames);
    TemporalWindow {
        start: (grid.frames - len) / 2,
        len,
    }
}

/// Masks every token of the centred temporal window and records it.
pub fn temporal_mask(mut plan: MaskPlan, cfg: &PipelineConfig) -> MaskPlan {
    let window = temporal_window(&plan.grid, cfg.temporal_mask_fraction);
    for t in window.start..window.start + window.len {
        for i in plan.grid.frame_range(t) {
            plan.masked.insert(i);
        }
    }
    plan.temporal_window = Some(window);
    plan.refresh_ratio();
    plan
}

/// Aligns a plan's masked count to `round(ratio * N)`. Masking grows from the
/// edges of the visible set; unmasking takes masked tokens next to visible
/// ones, then tokens outside the window and the decoder targets, then
/// tokens outside the window, then anything. Decoder targets are restricted
/// to the final masked set.
pub fn align_ratio(mut plan: MaskPlan, ratio: f64, seed: u64) -> MaskPlan {
    let grid = plan.grid;
    let protected = plan.decoder_targets.clone();
    let input = AlignInput {
        order: ScanOrder::new(&grid, false),
        target: round_count(ratio, grid.len()),
        window: plan.temporal_window,
        protected: &protected,
    };
    let steps = align::align(&mut plan.masked, &input, &mut MaskRng::new(seed));
    plan.decoder_targets = plan.decoder_targets.intersection(&plan.masked);
    plan.trace.alignment_steps = steps;
    plan.refresh_ratio();
    plan
}

/// Visible tokens with even `t + r + c`: a regularly spaced half for
/// running-cell style decoding.
pub fn running_cell_decoder_subset(plan: &MaskPlan) -> TokenSet {
    let grid = plan.grid;
    TokenSet::from_indices(
        grid.len(),
        plan.visible().iter().filter(|&i| {
            let TokenCoord { t, r, c } = grid.coord(i);
            (t + r + c) % 2 == 0
        }),
    )
}

/// Draw results that override the seeded choice. The draw is still consumed,
/// so the rest of the random stream is unchanged. Directional masking draws
/// a side too: ties in depth are broken from that side of the frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ForcedDraws {
    pub direction: Option<Direction>,
    pub side: Option<Side>,
}

impl ForcedDraws {
    fn direction(&self, rng: &mut MaskRng) -> Direction {
        let drawn = Direction::ALL[rng.below(4)];
        self.direction.unwrap_or(drawn)
    }

    fn side(&self, rng: &mut MaskRng) -> Side {
        let drawn = [Side::Left, Side::Right][rng.below(2)];
        self.side.unwrap_or(drawn)
    }
}

fn st_regions(regions: &RegionTokens, strategy: Strategy) -> RegionTokens {
    match strategy {
        Strategy::StHandArm => regions.clone(),
        Strategy::StHandOnly => regions.hands_only(),
        other => panic!("{} is not a spatio-temporal strategy", other.name()),
    }
}

/// Splits each tube-frame's share of `tokens` into the `ceil(n/2)` nearest
/// the `direction` side and the rest. Ties fall back to `(t, r, c)` order.
/// Splits each tube-frame's tokens into the `ceil(n/2)` nearest `direction`
/// and the rest. Equal depths are ordered from the `lean` side of the frame
/// across, then top to bottom.
fn directional_halves(grid: &TokenGrid, tokens: &TokenSet, direction: Direction, lean: Side) -> (TokenSet, TokenSet) {
    let n = grid.len();
    let mut near = TokenSet::empty(n);
    let mut far = TokenSet::empty(n);
    for t in 0..grid.frames {
        let range = grid.frame_range(t);
        let mut frame: Vec<usize> = tokens
            .iter()
            .skip_while(|&i| i < range.start)
            .take_while(|&i| i < range.end)
            .collect();
        frame.sort_by_key(|&i| {
            let at = grid.coord(i);
            let across = match lean {
                Side::Left => at.c,
                Side::Right => grid.cols - 1 - at.c,
            };
            (direction.depth(grid, at), across, at.r)
        });
        let cut = frame.len().div_ceil(2);
        frame[..cut].iter().for_each(|&i| near.insert(i));
        frame[cut..].iter().for_each(|&i| far.insert(i));
    }
    (near, far)
}

/// Arm tokens in the upper half (by row) of the arm's extent in each
/// tube-frame.
fn upper_arm(grid: &TokenGrid, arm: &TokenSet) -> TokenSet {
    let mut upper = TokenSet::empty(grid.len());
    for t in 0..grid.frames {
        let range = grid.frame_range(t);
        let frame: Vec<usize> = arm
            .iter()
            .skip_while(|&i| i < range.start)
            .take_while(|&i| i < range.end)
            .collect();
        let rows = frame.iter().map(|&i| grid.coord(i).r);
        let (Some(lo), Some(hi)) = (rows.clone().min(), rows.max()) else {
            continue;
        };
        for &i in &frame {
            if 2 * grid.coord(i).r <= lo + hi {
                upper.insert(i);
            }
        }
    }
    upper
}

/// Shared tail of the spatio-temporal strategies: everything outside the
/// reserve starts masked, then the temporal window and ratio alignment are
/// applied and decoder targets are the masked part of the target region.
#[allow(clippy::too_many_arguments)]
fn finish_st(
    grid: &TokenGrid,
    strategy: Strategy,
    reserved: &TokenSet,
    target_region: &TokenSet,
    cfg: &PipelineConfig,
    seed: u64,
    rng: &mut MaskRng,
    mirrored_scan: bool,
    direction: Option<Direction>,
    trace: PlanTrace,
) -> MaskPlan {
    let mut masked = reserved.complement();
    let window = temporal_window(grid, cfg.temporal_mask_fraction);
    for t in window.start..window.start + window.len {
        for i in grid.frame_range(t) {
            masked.insert(i);
        }
    }
    let input = AlignInput {
        order: ScanOrder::new(grid, mirrored_scan),
        target: round_count(cfg.mask_ratio, grid.len()),
        window: Some(window),
        protected: target_region,
    };
    let steps = align::align(&mut masked, &input, rng);
    let decoder_targets = target_region.intersection(&masked);
    let mut plan = MaskPlan::new(*grid, strategy, masked, decoder_targets, seed);
    plan.direction = direction;
    plan.temporal_window = Some(window);
    plan.trace = PlanTrace {
        alignment_steps: steps,
        ..trace
    };
    plan
}

/// Spatio-temporal plan for a sign where both hands move.
pub fn st_mask_two_handed(
    grid: &TokenGrid,
    regions: &RegionTokens,
    strategy: Strategy,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<MaskPlan> {
    st_mask_two_handed_with(grid, regions, strategy, cfg, seed, ForcedDraws::default())
}

pub fn st_mask_two_handed_with(
    grid: &TokenGrid,
    regions: &RegionTokens,
    strategy: Strategy,
    cfg: &PipelineConfig,
    seed: u64,
    forced: ForcedDraws,
) -> Result<MaskPlan> {
    let regions = st_regions(regions, strategy);
    let hands = regions.hands();
    if hands.is_empty() {
        return Err(Error::EmptyRegions);
    }
    let left = regions.side(Side::Left);
    let right = regions.side(Side::Right);
    let overlap = overlap_ratio(&left, &right);
    let mut rng = MaskRng::new(seed);
    let (reserved, direction, branch, mirrored_scan) = if overlap > cfg.overlap_threshold {
        let direction = forced.direction(&mut rng);
        let lean = forced.side(&mut rng);
        let (_, far) = directional_halves(grid, &hands, direction, lean);
        (far, Some(direction), MaskBranch::Directional, lean == Side::Right)
    } else {
        let side = forced.side(&mut rng);
        let shared = left.intersection(&right);
        let reserved = regions.side(side).difference(&shared);
        (reserved, None, MaskBranch::SideReserve(side), side == Side::Right)
    };
    let trace = PlanTrace {
        branch: Some(branch),
        overlap: Some(overlap),
        alignment_steps: 0,
    };
    Ok(finish_st(
        grid,
        strategy,
        &reserved,
        &regions.hand_arm(),
        cfg,
        seed,
        &mut rng,
        mirrored_scan,
        direction,
        trace,
    ))
}

/// Spatio-temporal plan for a sign with one moving hand: the upper part of
/// the moving arm and the half of the moving hand away from a random side
/// stay visible.
pub fn st_mask_one_handed(
    grid: &TokenGrid,
    regions: &RegionTokens,
    moving: Side,
    strategy: Strategy,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<MaskPlan> {
    st_mask_one_handed_with(grid, regions, moving, strategy, cfg, seed, ForcedDraws::default())
}

pub fn st_mask_one_handed_with(
    grid: &TokenGrid,
    regions: &RegionTokens,
    moving: Side,
    strategy: Strategy,
    cfg: &PipelineConfig,
    seed: u64,
    forced: ForcedDraws,
) -> Result<MaskPlan> {
    let regions = st_regions(regions, strategy);
    let hand = regions.hand(moving);
    if hand.is_empty() {
        return Err(Error::EmptyRegions);
    }
    let mut rng = MaskRng::new(seed);
    let direction = forced.direction(&mut rng);
    let lean = forced.side(&mut rng);
    let (near, far) = directional_halves(grid, hand, direction, lean);
    let reserved = upper_arm(grid, regions.arm(moving)).union(&far).difference(&near);
    let trace = PlanTrace {
        branch: Some(MaskBranch::OneHanded(moving)),
        overlap: None,
        alignment_steps: 0,
    };
    Ok(finish_st(
        grid,
        strategy,
        &reserved,
        &regions.hand_arm(),
        cfg,
        seed,
        &mut rng,
        lean == Side::Right,
        Some(direction),
        trace,
    ))
}

/// The three pretraining streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stream {
    VideoTube,
    VideoSt,
    KeypointSt,
}

impl Stream {
    pub const ALL: [Stream; 3] = [Stream::VideoTube, Stream::VideoSt, Stream::KeypointSt];

    pub fn name(self) -> &'static str {
        match self {
            Stream::VideoTube => "video-tube",
            Stream::VideoSt => "video-st",
            Stream::KeypointSt => "keypoint-st",
        }
    }

    pub fn from_name(name: &str) -> Option<Stream> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Per-stream seed: the clip seed xor a hash of the stream name.
    pub fn seed(self, clip_seed: u64) -> u64 {
        clip_seed ^ fnv1a(self.name().as_bytes())
    }
}

/// Everything the mask generator needs to know about one clip.
#[derive(Debug, Clone)]
pub struct ClipAnalysis {
    pub grid: TokenGrid,
    pub regions: RegionTokens,
    pub handedness: Handedness,
}

impl ClipAnalysis {
    pub fn mirrored(&self) -> ClipAnalysis {
        ClipAnalysis {
            grid: self.grid,
            regions: self.regions.mirrored(&self.grid),
            handedness: self.handedness.mirrored(),
        }
    }
}

pub fn analyze(bundle: &ClipBundle, cfg: &PipelineConfig) -> Result<ClipAnalysis> {
    let grid = build_grid(&bundle.meta)?;
    let regions = region_tokens(&grid, &bundle.segments, cfg.region_coverage)?;
    let diagonal = (bundle.meta.height as f64).hypot(bundle.meta.width as f64);
    let handedness = classify_handedness(&bundle.keypoints, diagonal, cfg);
    Ok(ClipAnalysis {
        grid,
        regions,
        handedness,
    })
}

/// Plan for one stream of an analysed clip, seeded from the clip seed.
pub fn plan_stream(analysis: &ClipAnalysis, stream: Stream, cfg: &PipelineConfig, clip_seed: u64) -> Result<MaskPlan> {
    plan_stream_with(analysis, stream, cfg, clip_seed, ForcedDraws::default())
}

pub fn plan_stream_with(
    analysis: &ClipAnalysis,
    stream: Stream,
    cfg: &PipelineConfig,
    clip_seed: u64,
    forced: ForcedDraws,
) -> Result<MaskPlan> {
    let seed = stream.seed(clip_seed);
    let grid = &analysis.grid;
    let strategy = match stream {
        Stream::VideoTube => return Ok(tube_mask(grid, cfg.mask_ratio, seed)),
        Stream::VideoSt => Strategy::StHandArm,
        Stream::KeypointSt => Strategy::StHandOnly,
    };
    let planned = match analysis.handedness {
        Handedness::TwoHanded => st_mask_two_handed_with(grid, &analysis.regions, strategy, cfg, seed, forced),
        Handedness::OneHandedLeft | Handedness::OneHandedRight => {
            let side = analysis.handedness.moving_side().expect("one-handed");
            st_mask_one_handed_with(grid, &analysis.regions, side, strategy, cfg, seed, forced)
        }
        Handedness::NoHands => Err(Error::EmptyRegions),
    };
    match planned {
        Err(Error::EmptyRegions) if cfg.no_hands_fallback => {
            let mut plan = tube_mask(grid, cfg.mask_ratio, seed);
            plan.trace.branch = Some(MaskBranch::NoHandsFallback);
            Ok(plan)
        }
        other => other,
    }
}

/// Plans for the requested streams, in the order given.
pub fn generate_streams(
    analysis: &ClipAnalysis,
    streams: &[Stream],
    cfg: &PipelineConfig,
    clip_seed: u64,
) -> Result<Vec<MaskPlan>> {
    streams
        .iter()
        .map(|&s| plan_stream(analysis, s, cfg, clip_seed))
        .collect()
}

/// All three stream plans for a clip, seeded with `cfg.seed` mixed with the
/// clip id (the same seeds the CLI uses).
pub fn generate(bundle: &ClipBundle, cfg: &PipelineConfig) -> Result<Vec<MaskPlan>> {
    let analysis = analyze(bundle, cfg)?;
    generate_streams(&analysis, &Stream::ALL, cfg, clip_seed(cfg.seed, &bundle.meta.clip_id))
}

#[cfg(test)]
mod tests;
