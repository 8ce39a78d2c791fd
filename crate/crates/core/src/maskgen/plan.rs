//! Canonical `SMSK` encoding of a mask plan and its text rendering.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SMSK" | version u16 | strategy u8 | frames u16 | rows u16 | cols u16
//! | ratio u16 (1/10000) | seed u64 | direction u8 (255 = none)
//! | window start u16 | window len u16 (both 65535 = none)
//! | masked: count u32, ascending u32 indices
//! | decoder targets: count u32, ascending u32 indices
//! ```
//!
//! The visible set is the complement of the masked list.

use std::fmt::Write as _;

use super::{Direction, MaskPlan, PlanTrace, Strategy, TemporalWindow};
use crate::error::{Error, Result};
use crate::patchgrid::TokenGrid;
use crate::tokenset::TokenSet;

const MAGIC: &[u8; 4] = b"SMSK";
pub const PLAN_VERSION: u16 = 1;
const NO_DIRECTION: u8 = 255;
const NO_WINDOW: u16 = u16::MAX;

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.at + N;
        let chunk = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::format("mask plan", "truncated"))?;
        self.at = end;
        Ok(chunk.try_into().expect("sized slice"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn index_list(&mut self, universe: usize) -> Result<TokenSet> {
        let count = self.u32()? as usize;
        if count > universe {
            return Err(Error::format("mask plan", "index list longer than grid"));
        }
        let mut set = TokenSet::empty(universe);
        let mut prev: Option<u32> = None;
        for _ in 0..count {
            let i = self.u32()?;
            if prev.is_some_and(|p| i <= p) || i as usize >= universe {
                return Err(Error::format(
                    "mask plan",
                    "index list not strictly ascending within the grid",
                ));
            }
            set.insert(i as usize);
            prev = Some(i);
        }
        Ok(set)
    }
}

fn dim_u16(v: usize, what: &str) -> u16 {
    u16::try_from(v).unwrap_or_else(|_| panic!("{what} {v} exceeds the u16 plan field"))
}

fn push_list(out: &mut Vec<u8>, set: &TokenSet) {
    out.extend_from_slice(&(set.len() as u32).to_le_bytes());
    for i in set.iter() {
        out.extend_from_slice(&(i as u32).to_le_bytes());
    }
}

impl MaskPlan {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 4 * (self.masked.len() + self.decoder_targets.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&PLAN_VERSION.to_le_bytes());
        out.push(self.strategy as u8);
        for (v, what) in [
            (self.grid.frames, "frames"),
            (self.grid.rows, "rows"),
            (self.grid.cols, "cols"),
        ] {
            out.extend_from_slice(&dim_u16(v, what).to_le_bytes());
        }
        out.extend_from_slice(&self.ratio_bp.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.push(self.direction.map_or(NO_DIRECTION, |d| d as u8));
        let (start, len) = self.temporal_window.map_or((NO_WINDOW, NO_WINDOW), |w| {
            (dim_u16(w.start, "window start"), dim_u16(w.len, "window length"))
        });
        out.extend_from_slice(&start.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        push_list(&mut out, &self.masked);
        push_list(&mut out, &self.decoder_targets);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<MaskPlan> {
        let mut r = Reader { bytes, at: 0 };
        if &r.take::<4>()? != MAGIC {
            return Err(Error::format("mask plan", "missing SMSK magic"));
        }
        let version = r.u16()?;
        if version != PLAN_VERSION {
            return Err(Error::format("mask plan", format!("unsupported version {version}")));
        }
        let strategy = r.u8()?;
        let strategy = Strategy::from_code(strategy)
            .ok_or_else(|| Error::format("mask plan", format!("unknown strategy {strategy}")))?;
        let (frames, rows, cols) = (r.u16()? as usize, r.u16()? as usize, r.u16()? as usize);
        if frames == 0 || rows == 0 || cols == 0 {
            return Err(Error::format("mask plan", "empty grid"));
        }
        let grid = TokenGrid::new(frames, rows, cols);
        let ratio_bp = r.u16()?;
        if ratio_bp > 10_000 {
            return Err(Error::format("mask plan", "ratio above 1"));
        }
        let seed = r.u64()?;
        let direction = match r.u8()? {
            NO_DIRECTION => None,
            code => Some(
                Direction::from_code(code)
                    .ok_or_else(|| Error::format("mask plan", format!("unknown direction {code}")))?,
            ),
        };
        let temporal_window = match (r.u16()?, r.u16()?) {
            (NO_WINDOW, NO_WINDOW) => None,
            (start, len) if len > 0 && start as usize + len as usize <= frames => Some(TemporalWindow {
                start: start as usize,
                len: len as usize,
            }),
            _ => return Err(Error::format("mask plan", "temporal window outside the grid")),
        };
        let masked = r.index_list(grid.len())?;
        let decoder_targets = r.index_list(grid.len())?;
        if r.at != bytes.len() {
            return Err(Error::format("mask plan", "trailing bytes"));
        }
        if !decoder_targets.is_subset(&masked) {
            return Err(Error::format("mask plan", "decoder targets outside the masked set"));
        }
        Ok(MaskPlan {
            grid,
            strategy,
            masked,
            decoder_targets,
            ratio_bp,
            direction,
            temporal_window,
            seed,
            trace: PlanTrace::default(),
        })
    }

    /// Line-oriented rendering for debugging: a header, then one line per
    /// masked token `index t r c flag`, where flag is `M` (masked) or `D`
    /// (masked decoder target). Parses back with [`MaskPlan::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "SMSK {PLAN_VERSION}");
        let _ = writeln!(s, "strategy {}", self.strategy.name());
        let _ = writeln!(s, "dims {} {} {}", self.grid.frames, self.grid.rows, self.grid.cols);
        let _ = writeln!(s, "ratio {}", self.ratio_bp);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "direction {}", self.direction.map_or("none", |d| d.name()));
        match self.temporal_window {
            Some(w) => {
                let _ = writeln!(s, "window {} {}", w.start, w.len);
            }
            None => s.push_str("window none\n"),
        }
        for i in self.masked.iter() {
            let c = self.grid.coord(i);
            let flag = if self.decoder_targets.contains(i) { 'D' } else { 'M' };
            let _ = writeln!(s, "{i} {} {} {} {flag}", c.t, c.r, c.c);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<MaskPlan> {
        let bad = |what: &str| Error::format("mask plan text", what.to_string());
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<Vec<&str>> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(&format!("expected {key} line")));
            }
            Ok(parts.collect())
        };
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(&format!("bad number {s:?}")));
        if header("SMSK")? != [PLAN_VERSION.to_string().as_str()] {
            return Err(bad("unsupported version"));
        }
        let strategy = header("strategy")?;
        let strategy = strategy
            .first()
            .and_then(|n| Strategy::from_name(n))
            .ok_or_else(|| bad("unknown strategy"))?;
        let dims = header("dims")?;
        let [f, r, c] = dims.as_slice() else {
            return Err(bad("dims"));
        };
        let grid = TokenGrid::new(num(f)? as usize, num(r)? as usize, num(c)? as usize);
        let ratio_bp = num(header("ratio")?.first().ok_or_else(|| bad("ratio"))?)? as u16;
        let seed = num(header("seed")?.first().ok_or_else(|| bad("seed"))?)?;
        let direction = match header("direction")?.as_slice() {
            ["none"] => None,
            [name] => Some(Direction::from_name(name).ok_or_else(|| bad("direction"))?),
            _ => return Err(bad("direction")),
        };
        let temporal_window = match header("window")?.as_slice() {
            ["none"] => None,
            [start, len] => Some(TemporalWindow {
                start: num(start)? as usize,
                len: num(len)? as usize,
            }),
            _ => return Err(bad("window")),
        };
        let mut masked = TokenSet::empty(grid.len());
        let mut decoder_targets = TokenSet::empty(grid.len());
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [i, _, _, _, flag] = parts.as_slice() else {
                return Err(bad("token line"));
            };
            let i = num(i)? as usize;
            if i >= grid.len() {
                return Err(bad("token index outside grid"));
            }
            masked.insert(i);
            match *flag {
                "D" => decoder_targets.insert(i),
                "M" => {}
                _ => return Err(bad("token flag")),
            }
        }
        Ok(MaskPlan {
            grid,
            strategy,
            masked,
            decoder_targets,
            ratio_bp,
            direction,
            temporal_window,
            seed,
            trace: PlanTrace::default(),
        })
    }
}
