//! Synthetic observation masks for benchmarking recovery.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// The supported missing-data patterns. `p` (from [`MaskSpec`]) is the
/// selection probability for the random patterns; block and watermark masks
/// ignore it.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskPattern {
    /// Every pixel site observed independently with probability `p`; the
    /// channels of a site share one coin flip.
    RandomPixel,
    /// Rows and columns each selected with probability `p` per frame; a
    /// pixel is observed when its row or column is selected.
    RandomStripe,
    /// One random pixel-site mask drawn once and repeated on every frame.
    RandomTube,
    /// Per frame, a random number of small rectangles knocked out, each
    /// hitting one color channel or all of them.
    RandomBlock {
        count: (usize, usize),
        height: (usize, usize),
        width: (usize, usize),
    },
    /// A fixed sentence rendered in a blocky font, masked identically on
    /// every frame.
    Watermark { text: String, scale: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSpec {
    pub pattern: MaskPattern,
    pub p: f64,
    pub seed: u64,
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "observation ratio must be in (0, 1], got {}",
                self.p
            )));
        }
        match &self.pattern {
            MaskPattern::RandomBlock { count, height, width } => {
                for (lo, hi) in [count, height, width] {
                    if lo > hi || *hi == 0 {
                        return Err(Error::InvalidConfig(format!(
                            "empty block parameter range [{lo}, {hi}]"
                        )));
                    }
                }
                Ok(())
            }
            MaskPattern::Watermark { text, scale } => {
                if *scale == 0 {
                    return Err(Error::InvalidConfig("watermark scale must be positive".into()));
                }
                for ch in text.chars() {
                    let up = ch.to_ascii_uppercase();
                    if up != ' ' && !up.is_ascii_uppercase() {
                        return Err(Error::InvalidConfig(format!(
                            "watermark text supports A-Z and spaces only, got {ch:?}"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

pub fn default_block_pattern() -> MaskPattern {
    MaskPattern::RandomBlock { count: (50, 150), height: (1, 10), width: (1, 100) }
}

struct Dims {
    h: usize,
    w: usize,
    n: usize,
    t: usize,
}

fn dims(shape: &[usize]) -> Result<Dims> {
    match shape.len() {
        3 => Ok(Dims { h: shape[0], w: shape[1], n: shape[2], t: 1 }),
        4 => Ok(Dims { h: shape[0], w: shape[1], n: shape[2], t: shape[3] }),
        _ => Err(Error::InvalidShape(format!(
            "mask shape must be (h, w, channels) or (h, w, channels, frames), got {shape:?}"
        ))),
    }
}

/// Generates the observation mask for an image (3-way shape) or a video
/// (4-way shape). Deterministic in `spec.seed`.
pub fn gen_mask(shape: &[usize], spec: &MaskSpec) -> Result<DenseTensor> {
    spec.validate()?;
    let d = dims(shape)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut mask = DenseTensor::filled(shape, 1.0);
    let set_site = |mask: &mut DenseTensor, row: usize, col: usize, t: usize, v: f64| {
        for ch in 0..d.n {
            let idx = if shape.len() == 3 {
                mask.offset(&[row, col, ch])
            } else {
                mask.offset(&[row, col, ch, t])
            };
            mask.data_mut()[idx] = v;
        }
    };
    match &spec.pattern {
        MaskPattern::RandomPixel => {
            for t in 0..d.t {
                for col in 0..d.w {
                    for row in 0..d.h {
                        if rng.gen::<f64>() >= spec.p {
                            set_site(&mut mask, row, col, t, 0.0);
                        }
                    }
                }
            }
        }
        MaskPattern::RandomTube => {
            let site: Vec<bool> =
                (0..d.h * d.w).map(|_| rng.gen::<f64>() < spec.p).collect();
            for t in 0..d.t {
                for col in 0..d.w {
                    for row in 0..d.h {
                        if !site[row + col * d.h] {
                            set_site(&mut mask, row, col, t, 0.0);
                        }
                    }
                }
            }
        }
        MaskPattern::RandomStripe => {
            for t in 0..d.t {
                let rows: Vec<bool> = (0..d.h).map(|_| rng.gen::<f64>() < spec.p).collect();
                let cols: Vec<bool> = (0..d.w).map(|_| rng.gen::<f64>() < spec.p).collect();
                for col in 0..d.w {
                    for row in 0..d.h {
                        if !rows[row] && !cols[col] {
                            set_site(&mut mask, row, col, t, 0.0);
                        }
                    }
                }
            }
        }
        MaskPattern::RandomBlock { count, height, width } => {
            for t in 0..d.t {
                let blocks = rng.gen_range(count.0..=count.1);
                for _ in 0..blocks {
                    let bh = rng.gen_range(height.0..=height.1).min(d.h);
                    let bw = rng.gen_range(width.0..=width.1).min(d.w);
                    let row0 = rng.gen_range(0..=d.h - bh);
                    let col0 = rng.gen_range(0..=d.w - bw);
                    let all_channels = rng.gen::<bool>();
                    let only = rng.gen_range(0..d.n);
                    for col in col0..col0 + bw {
                        for row in row0..row0 + bh {
                            for ch in 0..d.n {
                                if all_channels || ch == only {
                                    let idx = if shape.len() == 3 {
                                        mask.offset(&[row, col, ch])
                                    } else {
                                        mask.offset(&[row, col, ch, t])
                                    };
                                    mask.data_mut()[idx] = 0.0;
                                }
                            }
                        }
                    }
                }
            }
        }
        MaskPattern::Watermark { text, scale } => {
            let stamp = render_text(text, *scale, d.h, d.w);
            for t in 0..d.t {
                for col in 0..d.w {
                    for row in 0..d.h {
                        if stamp[row + col * d.h] {
                            set_site(&mut mask, row, col, t, 0.0);
                        }
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// 5x7 glyphs for A-Z, one bit row per byte, most significant of the low
/// five bits on the left.
const GLYPHS: [[u8; 7]; 26] = [
    [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], // A
    [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E], // B
    [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E], // C
    [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E], // D
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F], // E
    [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10], // F
    [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F], // G
    [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11], // H
    [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E], // I
    [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C], // J
    [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11], // K
    [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F], // L
    [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11], // M
    [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11], // N
    [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], // O
    [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10], // P
    [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D], // Q
    [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11], // R
    [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E], // S
    [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04], // T
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E], // U
    [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04], // V
    [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11], // W
    [0x11, 0x0A, 0x04, 0x04, 0x04, 0x0A, 0x11], // X
    [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04], // Y
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F], // Z
];

/// Rasterizes `text` centered on an `h x w` canvas (column-major bool grid),
/// wrapping lines when they would overflow.
fn render_text(text: &str, scale: usize, h: usize, w: usize) -> Vec<bool> {
    let mut canvas = vec![false; h * w];
    let chars: Vec<char> = text.to_ascii_uppercase().chars().collect();
    let char_w = 6 * scale; // 5 columns plus 1 spacing
    let line_h = 9 * scale; // 7 rows plus 2 spacing
    let per_line = (w / char_w).max(1);
    let lines: Vec<&[char]> = chars.chunks(per_line).collect();
    let total_h = lines.len() * line_h;
    let top = h.saturating_sub(total_h) / 2;
    for (li, line) in lines.iter().enumerate() {
        let line_w = line.len() * char_w;
        let left = w.saturating_sub(line_w) / 2;
        for (ci, &ch) in line.iter().enumerate() {
            if ch == ' ' {
                continue;
            }
            let glyph = &GLYPHS[(ch as u8 - b'A') as usize];
            for (gr, bits) in glyph.iter().enumerate() {
                for gc in 0..5 {
                    if bits & (1 << (4 - gc)) == 0 {
                        continue;
                    }
                    for sr in 0..scale {
                        for sc in 0..scale {
                            let row = top + li * line_h + gr * scale + sr;
                            let col = left + ci * char_w + gc * scale + sc;
                            if row < h && col < w {
                                canvas[row + col * h] = true;
                            }
                        }
                    }
                }
            }
        }
    }
    canvas
}
