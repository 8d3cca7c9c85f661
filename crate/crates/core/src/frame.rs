//! Image frames, mirror padding and observation-dilation.

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, MaskedTensor};

/// One image frame: `height x width x channels` pixels in `[0, 1]` with a
/// per-entry observation mask. Channels are 1 (gray) or 3 (color).
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    data: MaskedTensor,
}

impl Frame {
    pub fn new(data: MaskedTensor) -> Result<Self> {
        let shape = data.shape();
        if shape.len() != 3 {
            return Err(Error::InvalidShape(format!(
                "frame tensor must be 3-way (h, w, channels), got {shape:?}"
            )));
        }
        let channels = shape[2];
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidShape(format!("channels must be 1 or 3, got {channels}")));
        }
        for (off, &v) in data.values().data().iter().enumerate() {
            if data.is_observed_at(off) && !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidShape(format!(
                    "observed pixel value {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { data })
    }

    pub fn from_parts(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
        mask: Vec<f64>,
    ) -> Result<Self> {
        let shape = [height, width, channels];
        let values = DenseTensor::from_vec(&shape, values)?;
        let mask = DenseTensor::from_vec(&shape, mask)?;
        Self::new(MaskedTensor::new(values, mask)?)
    }

    pub fn fully_observed(values: DenseTensor) -> Result<Self> {
        Self::new(MaskedTensor::fully_observed(values))
    }

    pub fn height(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn data(&self) -> &MaskedTensor {
        &self.data
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data.values().get(&[row, col, ch])
    }

    #[inline]
    pub fn is_observed(&self, row: usize, col: usize, ch: usize) -> bool {
        self.data.mask().get(&[row, col, ch]) != 0.0
    }

    pub fn observed_count(&self) -> usize {
        self.data.observed_count()
    }
}

/// A frame padded by mirror reflection, remembering the border widths and the
/// original size so recovered content can be cropped back out.
///
/// Padding is symmetric per axis. When the requested border cannot make the
/// padded extent divisible by the sampling interval (even intervals with odd
/// extents), a one-pixel remainder is absorbed on the bottom/right edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedFrame {
    frame: Frame,
    border_top: usize,
    border_left: usize,
    orig_height: usize,
    orig_width: usize,
}

impl PaddedFrame {
    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn padded_height(&self) -> usize {
        self.frame.height()
    }

    pub fn padded_width(&self) -> usize {
        self.frame.width()
    }

    pub fn channels(&self) -> usize {
        self.frame.channels()
    }

    pub fn border_top(&self) -> usize {
        self.border_top
    }

    pub fn border_left(&self) -> usize {
        self.border_left
    }

    pub fn orig_height(&self) -> usize {
        self.orig_height
    }

    pub fn orig_width(&self) -> usize {
        self.orig_width
    }
}

/// Edge-duplicating symmetric reflection of index `q` into `[0, n)`:
/// `[a, b, c]` extends to `... b, a, | a, b, c, | c, b ...`.
fn reflect(q: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = q.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Per-axis padding: the smallest symmetric border `b' >= b` that makes
/// `extent + 2b'` divisible by `interval`, or `(b, deficit)` asymmetric when
/// parity makes that impossible.
fn axis_padding(extent: usize, border: usize, interval: usize) -> (usize, usize) {
    if interval <= 1 {
        return (border, border);
    }
    for b in border..border + interval {
        if (extent + 2 * b) % interval == 0 {
            return (b, b);
        }
    }
    let deficit = (interval - (extent + 2 * border) % interval) % interval;
    (border, border + deficit)
}

/// Pads a frame by mirroring at least `border` pixels on every side, growing
/// the border so the padded size is divisible by `interval`. Values and mask
/// are reflected identically.
pub fn pad_mirror(f: &Frame, border: usize, interval: usize) -> Result<PaddedFrame> {
    if interval == 0 {
        return Err(Error::InvalidConfig("sampling interval must be at least 1".into()));
    }
    let (h, w, n) = (f.height(), f.width(), f.channels());
    let (top, bottom) = axis_padding(h, border, interval);
    let (left, right) = axis_padding(w, border, interval);
    let (ph, pw) = (h + top + bottom, w + left + right);
    let shape = [ph, pw, n];
    let mut values = DenseTensor::zeros(&shape);
    let mut mask = DenseTensor::zeros(&shape);
    for col in 0..pw {
        let sc = reflect(col as isize - left as isize, w);
        for row in 0..ph {
            let sr = reflect(row as isize - top as isize, h);
            for ch in 0..n {
                values.set(&[row, col, ch], f.value(sr, sc, ch));
                mask.set(&[row, col, ch], if f.is_observed(sr, sc, ch) { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(PaddedFrame {
        frame: Frame::new(MaskedTensor::new(values, mask)?)?,
        border_top: top,
        border_left: left,
        orig_height: h,
        orig_width: w,
    })
}

/// Propagates observed pixels to their 3x3 neighborhoods by taking the
/// per-channel maximum over observed neighbors. Pixels with no observed
/// neighbor stay missing, so the output mask is the dilation of the input
/// mask.
pub fn dilate(f: &PaddedFrame) -> PaddedFrame {
    let (h, w, n) = (f.padded_height(), f.padded_width(), f.channels());
    let src = f.frame();
    let shape = [h, w, n];
    let mut values = DenseTensor::zeros(&shape);
    let mut mask = DenseTensor::zeros(&shape);
    for col in 0..w {
        for row in 0..h {
            for ch in 0..n {
                let mut best = f64::NEG_INFINITY;
                let mut seen = false;
                for dc in -1isize..=1 {
                    let c = col as isize + dc;
                    if c < 0 || c >= w as isize {
                        continue;
                    }
                    for dr in -1isize..=1 {
                        let r = row as isize + dr;
                        if r < 0 || r >= h as isize {
                            continue;
                        }
                        if src.is_observed(r as usize, c as usize, ch) {
                            best = best.max(src.value(r as usize, c as usize, ch));
                            seen = true;
                        }
                    }
                }
                if seen {
                    values.set(&[row, col, ch], best);
                    mask.set(&[row, col, ch], 1.0);
                }
            }
        }
    }
    PaddedFrame {
        frame: Frame::new(MaskedTensor::new(values, mask).unwrap()).unwrap(),
        border_top: f.border_top,
        border_left: f.border_left,
        orig_height: f.orig_height,
        orig_width: f.orig_width,
    }
}
