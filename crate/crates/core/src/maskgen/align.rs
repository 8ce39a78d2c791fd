//! Mask-ratio alignment: grow or shrink the masked set one boundary token at
//! a time until it holds exactly the target count.

use crate::maskgen::TemporalWindow;
use crate::patchgrid::TokenGrid;
use crate::rng::MaskRng;
use crate::tokenset::TokenSet;

const ABSENT: u32 = u32::MAX;

/// Insertion-ordered set with O(1) insert, remove and uniform pick.
struct Candidates {
    items: Vec<u32>,
    slot: Vec<u32>,
}

impl Candidates {
    fn new(universe: usize) -> Self {
        Candidates {
            items: Vec::new(),
            slot: vec![ABSENT; universe],
        }
    }

    fn insert(&mut self, i: usize) {
        if self.slot[i] == ABSENT {
            self.slot[i] = self.items.len() as u32;
            self.items.push(i as u32);
        }
    }

    fn remove(&mut self, i: usize) {
        let s = self.slot[i];
        if s == ABSENT {
            return;
        }
        self.items.swap_remove(s as usize);
        if let Some(&moved) = self.items.get(s as usize) {
            self.slot[moved as usize] = s;
        }
        self.slot[i] = ABSENT;
    }

    fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn pick(&self, rng: &mut MaskRng) -> usize {
        self.items[rng.below(self.items.len())] as usize
    }
}

/// Token visiting order for alignment. With `mirrored` set, columns run
/// right-to-left and horizontal neighbours are visited east-first, so a
/// plan and its horizontal mirror evolve identically.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ScanOrder<'g> {
    grid: &'g TokenGrid,
    mirrored: bool,
}

impl<'g> ScanOrder<'g> {
    pub(crate) fn new(grid: &'g TokenGrid, mirrored: bool) -> Self {
        ScanOrder { grid, mirrored }
    }

    fn col(&self, c: usize) -> usize {
        if self.mirrored {
            self.grid.cols - 1 - c
        } else {
            c
        }
    }

    fn tokens(&self) -> impl Iterator<Item = usize> + '_ {
        let g = self.grid;
        (0..g.frames)
            .flat_map(move |t| (0..g.rows).flat_map(move |r| (0..g.cols).map(move |c| g.index(t, r, self.col(c)))))
    }

    fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> {
        let g = self.grid;
        let coord = g.coord(index);
        let (t, r, c) = (coord.t, coord.r, coord.c);
        let west = (c > 0).then(|| g.index(t, r, c - 1));
        let east = (c + 1 < g.cols).then(|| g.index(t, r, c + 1));
        let (first, second) = if self.mirrored { (east, west) } else { (west, east) };
        [
            (r > 0).then(|| g.index(t, r - 1, c)),
            (r + 1 < g.rows).then(|| g.index(t, r + 1, c)),
            first,
            second,
        ]
        .into_iter()
        .flatten()
    }
}

pub(crate) struct AlignInput<'a> {
    pub order: ScanOrder<'a>,
    pub target: usize,
    pub window: Option<TemporalWindow>,
    /// Tokens the decoder will reconstruct; unmasked only as a late fallback.
    pub protected: &'a TokenSet,
}

/// Moves `masked` to exactly `input.target` tokens. Returns the number of
/// single-token steps taken, which equals the initial count gap.
pub(crate) fn align(masked: &mut TokenSet, input: &AlignInput<'_>, rng: &mut MaskRng) -> usize {
    let grid = input.order.grid;
    let start = masked.len();
    if start < input.target {
        grow(masked, input, rng);
    } else if start > input.target {
        shrink(masked, input, rng);
    }
    debug_assert_eq!(masked.len(), input.target);
    debug_assert!(start.abs_diff(input.target) <= grid.len());
    start.abs_diff(input.target)
}

fn grow(masked: &mut TokenSet, input: &AlignInput<'_>, rng: &mut MaskRng) {
    let order = input.order;
    let mut boundary = Candidates::new(order.grid.len());
    for i in order.tokens() {
        if !masked.contains(i) && order.neighbors(i).any(|n| masked.contains(n)) {
            boundary.insert(i);
        }
    }
    let mut count = masked.len();
    while count < input.target {
        let chosen = if boundary.is_empty() {
            let visible: Vec<usize> = order.tokens().filter(|&i| !masked.contains(i)).collect();
            visible[rng.below(visible.len())]
        } else {
            boundary.pick(rng)
        };
        masked.insert(chosen);
        boundary.remove(chosen);
        count += 1;
        for n in order.neighbors(chosen) {
            if !masked.contains(n) {
                boundary.insert(n);
            }
        }
    }
}

fn shrink(masked: &mut TokenSet, input: &AlignInput<'_>, rng: &mut MaskRng) {
    let order = input.order;
    let grid = order.grid;
    let in_window = |i: usize| input.window.is_some_and(|w| w.contains(grid.coord(i).t));
    let mut adjacent = Candidates::new(grid.len());
    for i in order.tokens() {
        if masked.contains(i) && !in_window(i) && order.neighbors(i).any(|n| !masked.contains(n)) {
            adjacent.insert(i);
        }
    }
    let mut count = masked.len();
    while count > input.target {
        let chosen = if adjacent.is_empty() {
            fallback(masked, input, &in_window, rng)
        } else {
            adjacent.pick(rng)
        };
        masked.remove(chosen);
        adjacent.remove(chosen);
        count -= 1;
        for n in order.neighbors(chosen) {
            if masked.contains(n) && !in_window(n) {
                adjacent.insert(n);
            }
        }
    }
}

/// Masked tokens outside the window and the protected set; then outside the
/// window; then anything masked.
fn fallback(masked: &TokenSet, input: &AlignInput<'_>, in_window: &impl Fn(usize) -> bool, rng: &mut MaskRng) -> usize {
    let order = input.order;
    let tiers: [&dyn Fn(usize) -> bool; 3] = [
        &|i| !in_window(i) && !input.protected.contains(i),
        &|i| !in_window(i),
        &|_| true,
    ];
    for keep in tiers {
        let pool: Vec<usize> = order.tokens().filter(|&i| masked.contains(i) && keep(i)).collect();
        if !pool.is_empty() {
            return pool[rng.below(pool.len())];
        }
    }
    unreachable!("shrinking an empty masked set")
}
