//! The tube-token lattice and the hand/arm token regions read off the
//! segmentation.

use crate::error::{Error, Result};
use crate::ingest::{ClipMeta, PartLabel, SegmentFrame, Side};
use crate::tokenset::TokenSet;

pub const TUBE_DEPTH: usize = 2;
pub const PATCH_SIZE: usize = 16;

/// `frames x rows x cols` tube tokens; index = `t*rows*cols + r*cols + c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenGrid {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenCoord {
    pub t: usize,
    pub r: usize,
    pub c: usize,
}

impl TokenGrid {
    pub fn new(frames: usize, rows: usize, cols: usize) -> Self {
        assert!(frames > 0 && rows > 0 && cols > 0, "empty token grid");
        TokenGrid { frames, rows, cols }
    }

    pub fn len(&self) -> usize {
        self.frames * self.cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial cells per tube-frame.
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, t: usize, r: usize, c: usize) -> usize {
        debug_assert!(t < self.frames && r < self.rows && c < self.cols);
        (t * self.rows + r) * self.cols + c
    }

    pub fn coord(&self, index: usize) -> TokenCoord {
        let cells = self.cells();
        let t = index / cells;
        let rem = index % cells;
        TokenCoord {
            t,
            r: rem / self.cols,
            c: rem % self.cols,
        }
    }

    /// Index range of the tokens in tube-frame `t`.
    pub fn frame_range(&self, t: usize) -> std::ops::Range<usize> {
        let cells = self.cells();
        t * cells..(t + 1) * cells
    }

    /// 4-neighbours within the same tube-frame.
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> {
        let TokenCoord { t, r, c } = self.coord(index);
        let (rows, cols) = (self.rows, self.cols);
        let base = t * rows * cols;
        [
            (r > 0).then(|| base + (r - 1) * cols + c),
            (r + 1 < rows).then(|| base + (r + 1) * cols + c),
            (c > 0).then(|| base + r * cols + c - 1),
            (c + 1 < cols).then(|| base + r * cols + c + 1),
        ]
        .into_iter()
        .flatten()
    }

    /// Index of the horizontally mirrored token.
    pub fn mirror(&self, index: usize) -> usize {
        let TokenCoord { t, r, c } = self.coord(index);
        self.index(t, r, self.cols - 1 - c)
    }

    pub fn mirror_set(&self, set: &TokenSet) -> TokenSet {
        TokenSet::from_indices(self.len(), set.iter().map(|i| self.mirror(i)))
    }
}

pub fn build_grid(meta: &ClipMeta) -> Result<TokenGrid> {
    let frames = meta.active_frames();
    if frames == 0
        || !frames.is_multiple_of(TUBE_DEPTH)
        || meta.height == 0
        || meta.width == 0
        || !meta.height.is_multiple_of(PATCH_SIZE)
        || !meta.width.is_multiple_of(PATCH_SIZE)
    {
        return Err(Error::IndivisibleDims {
            frames,
            height: meta.height,
            width: meta.width,
        });
    }
    Ok(TokenGrid::new(
        frames / TUBE_DEPTH,
        meta.height / PATCH_SIZE,
        meta.width / PATCH_SIZE,
    ))
}

/// Token sets of the four semantic regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionTokens {
    pub left_hand: TokenSet,
    pub right_hand: TokenSet,
    pub left_arm: TokenSet,
    pub right_arm: TokenSet,
}

impl RegionTokens {
    pub fn empty(universe: usize) -> Self {
        RegionTokens {
            left_hand: TokenSet::empty(universe),
            right_hand: TokenSet::empty(universe),
            left_arm: TokenSet::empty(universe),
            right_arm: TokenSet::empty(universe),
        }
    }

    pub fn hand(&self, side: Side) -> &TokenSet {
        match side {
            Side::Left => &self.left_hand,
            Side::Right => &self.right_hand,
        }
    }

    pub fn arm(&self, side: Side) -> &TokenSet {
        match side {
            Side::Left => &self.left_arm,
            Side::Right => &self.right_arm,
        }
    }

    /// Hand and arm tokens of one side.
    pub fn side(&self, side: Side) -> TokenSet {
        self.hand(side).union(self.arm(side))
    }

    pub fn hands(&self) -> TokenSet {
        self.left_hand.union(&self.right_hand)
    }

    pub fn arms(&self) -> TokenSet {
        self.left_arm.union(&self.right_arm)
    }

    pub fn hand_arm(&self) -> TokenSet {
        self.hands().union(&self.arms())
    }

    /// The same regions with both arm sets emptied.
    pub fn hands_only(&self) -> RegionTokens {
        let n = self.left_hand.universe();
        RegionTokens {
            left_hand: self.left_hand.clone(),
            right_hand: self.right_hand.clone(),
            left_arm: TokenSet::empty(n),
            right_arm: TokenSet::empty(n),
        }
    }

    /// Regions of the horizontally mirrored clip (sides swapped).
    pub fn mirrored(&self, grid: &TokenGrid) -> RegionTokens {
        RegionTokens {
            left_hand: grid.mirror_set(&self.right_hand),
            right_hand: grid.mirror_set(&self.left_hand),
            left_arm: grid.mirror_set(&self.right_arm),
            right_arm: grid.mirror_set(&self.left_arm),
        }
    }
}

fn region_slot(label: PartLabel) -> Option<usize> {
    match label {
        PartLabel::LeftHand => Some(0),
        PartLabel::RightHand => Some(1),
        PartLabel::LeftArm => Some(2),
        PartLabel::RightArm => Some(3),
        _ => None,
    }
}

/// A token belongs to a region when, in either of its two frames, more than
/// `coverage` of its 16x16 footprint carries the region's label. With
/// `coverage = 0` a single pixel suffices.
pub fn region_tokens(grid: &TokenGrid, segments: &[SegmentFrame], coverage: f64) -> Result<RegionTokens> {
    let needed = grid.frames * TUBE_DEPTH;
    if segments.len() < needed {
        return Err(Error::MissingFrame { frame: segments.len() });
    }
    let (height, width) = (grid.rows * PATCH_SIZE, grid.cols * PATCH_SIZE);
    let min_pixels = coverage * (PATCH_SIZE * PATCH_SIZE) as f64;
    let n = grid.len();
    let mut regions = [
        TokenSet::empty(n),
        TokenSet::empty(n),
        TokenSet::empty(n),
        TokenSet::empty(n),
    ];
    let mut counts = vec![[0u16; 4]; grid.cells()];
    for (f, seg) in segments[..needed].iter().enumerate() {
        if seg.height != height || seg.width != width {
            return Err(Error::DimensionMismatch {
                expected: format!("{height}x{width}"),
                found: format!("{}x{}", seg.height, seg.width),
            });
        }
        counts.iter_mut().for_each(|c| *c = [0; 4]);
        for (y, row) in seg.labels.chunks_exact(width).enumerate() {
            let cell_row = (y / PATCH_SIZE) * grid.cols;
            for (x, &label) in row.iter().enumerate() {
                if let Some(slot) = region_slot(label) {
                    counts[cell_row + x / PATCH_SIZE][slot] += 1;
                }
            }
        }
        let base = (f / TUBE_DEPTH) * grid.cells();
        for (cell, cell_counts) in counts.iter().enumerate() {
            for (slot, &count) in cell_counts.iter().enumerate() {
                if count > 0 && count as f64 > min_pixels {
                    regions[slot].insert(base + cell);
                }
            }
        }
    }
    let [left_hand, right_hand, left_arm, right_arm] = regions;
    Ok(RegionTokens {
        left_hand,
        right_hand,
        left_arm,
        right_arm,
    })
}
