//! Mask overlays for eyeballing plans.
//!
//! Masked 16x16 cells are blended half-way toward red; decoder targets get a
//! one-pixel yellow outline. Frames come from a raw RGB dump (frames x H x W
//! x 3 bytes, row-major) or, without one, a flat gray canvas.

use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::ingest::write_atomic;
use crate::maskgen::MaskPlan;
use crate::patchgrid::{PATCH_SIZE, TUBE_DEPTH};

pub const CANVAS_GRAY: u8 = 128;
const RED: [u8; 3] = [255, 0, 0];
const YELLOW: Rgb<u8> = Rgb([255, 255, 0]);

/// Colour of a masked pixel over `base`.
pub fn tint(base: [u8; 3]) -> [u8; 3] {
    let mix = |b: u8, r: u8| (b as u16 + r as u16).div_ceil(2) as u8;
    [mix(base[0], RED[0]), mix(base[1], RED[1]), mix(base[2], RED[2])]
}

fn frames_from_dump(bytes: &[u8], needed: usize, height: usize, width: usize) -> Result<Vec<RgbImage>> {
    let frame_len = height * width * 3;
    if !bytes.len().is_multiple_of(frame_len) {
        return Err(Error::format(
            "frame dump",
            format!(
                "{} bytes is not a whole number of {width}x{height} RGB frames",
                bytes.len()
            ),
        ));
    }
    let found = bytes.len() / frame_len;
    if found < needed {
        return Err(Error::MissingFrames { needed, found });
    }
    Ok(bytes
        .chunks_exact(frame_len)
        .take(needed)
        .map(|chunk| RgbImage::from_raw(width as u32, height as u32, chunk.to_vec()).expect("sized frame"))
        .collect())
}

/// Draws one overlay per video frame of the plan.
pub fn render_overlays(plan: &MaskPlan, frames: Option<&[u8]>) -> Result<Vec<RgbImage>> {
    let grid = plan.grid;
    let (height, width) = (grid.rows * PATCH_SIZE, grid.cols * PATCH_SIZE);
    let needed = grid.frames * TUBE_DEPTH;
    let mut images = match frames {
        Some(bytes) => frames_from_dump(bytes, needed, height, width)?,
        None => vec![RgbImage::from_pixel(width as u32, height as u32, Rgb([CANVAS_GRAY; 3])); needed],
    };
    for (f, img) in images.iter_mut().enumerate() {
        let t = f / TUBE_DEPTH;
        for r in 0..grid.rows {
            for c in 0..grid.cols {
                let i = grid.index(t, r, c);
                if !plan.masked.contains(i) {
                    continue;
                }
                let (x0, y0) = ((c * PATCH_SIZE) as u32, (r * PATCH_SIZE) as u32);
                let last = PATCH_SIZE as u32 - 1;
                let outline = plan.decoder_targets.contains(i);
                for dy in 0..PATCH_SIZE as u32 {
                    for dx in 0..PATCH_SIZE as u32 {
                        let px = img.get_pixel_mut(x0 + dx, y0 + dy);
                        let edge = dx == 0 || dy == 0 || dx == last || dy == last;
                        *px = if outline && edge { YELLOW } else { Rgb(tint(px.0)) };
                    }
                }
            }
        }
    }
    Ok(images)
}

/// Overlay file name for one frame.
pub fn overlay_file_name(clip_id: &str, stream: &str, frame: usize) -> String {
    format!("{clip_id}.{stream}.{frame:04}.png")
}

/// Reads `<plans>/<clip>.<stream>.smsk`, renders every frame and writes PNGs
/// into `out`. Returns the written paths.
pub fn cmd_visualize(
    plans: &Path,
    clip_id: &str,
    stream: &str,
    frames: Option<&Path>,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let plan_path = plans.join(format!("{clip_id}.{stream}.smsk"));
    let bytes = std::fs::read(&plan_path).map_err(|e| Error::MissingBundle {
        clip_id: clip_id.to_string(),
        detail: format!("{}: {e}", plan_path.display()),
    })?;
    let plan = MaskPlan::from_bytes(&bytes)?;
    let dump = match frames {
        Some(p) => Some(std::fs::read(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    let images = render_overlays(&plan, dump.as_deref())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut written = Vec::with_capacity(images.len());
    for (f, img) in images.iter().enumerate() {
        let path = out.join(overlay_file_name(clip_id, stream, f));
        let mut png = std::io::Cursor::new(Vec::new());
        img.write_to(&mut png, ImageFormat::Png)
            .map_err(|e| Error::format("png", e.to_string()))?;
        write_atomic(&path, png.get_ref())?;
        written.push(path);
    }
    println!("wrote {} overlays for {clip_id} {stream}", written.len());
    Ok(written)
}
