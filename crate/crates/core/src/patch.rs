//! Patch tensors: extraction from padded frames, aggregation of recovered
//! blocks back onto a frame canvas, and overlap accounting for the tracker.

use crate::error::{Error, Result};
use crate::frame::{Frame, PaddedFrame};
use crate::matching::PatchDescriptor;
use crate::tensor::{DenseTensor, MaskedTensor};

/// A stack of K same-size patches cut from one padded frame, kept with the
/// descriptors they came from. The first descriptor is the tracked (or new)
/// patch itself.
#[derive(Debug, Clone)]
pub struct PatchTensor {
    pub data: MaskedTensor,
    pub descriptors: Vec<PatchDescriptor>,
}

/// Copies the pixels and mask under each descriptor out of the padded frame
/// into an `edge x edge x channels x K` stack.
pub fn extract_patch_tensor(
    frame: &PaddedFrame,
    descriptors: &[PatchDescriptor],
) -> Result<PatchTensor> {
    if descriptors.is_empty() {
        return Err(Error::Empty("no patch descriptors to extract".into()));
    }
    let edge = descriptors[0].edge;
    let n = frame.channels();
    for d in descriptors {
        if d.edge != edge {
            return Err(Error::InvalidShape("descriptors disagree on patch edge".into()));
        }
        if !d.fits(frame) {
            return Err(Error::InvalidShape(format!(
                "descriptor at ({}, {}) with edge {} exceeds the padded frame",
                d.row, d.col, d.edge
            )));
        }
    }
    let k = descriptors.len();
    let shape = [edge, edge, n, k];
    let mut values = DenseTensor::zeros(&shape);
    let mut mask = DenseTensor::zeros(&shape);
    let src = frame.frame();
    for (j, d) in descriptors.iter().enumerate() {
        for ch in 0..n {
            for v in 0..edge {
                for u in 0..edge {
                    let idx = [u, v, ch, j];
                    values.set(&idx, src.value(d.row + u, d.col + v, ch));
                    if src.is_observed(d.row + u, d.col + v, ch) {
                        mask.set(&idx, 1.0);
                    }
                }
            }
        }
    }
    Ok(PatchTensor { data: MaskedTensor::new(values, mask)?, descriptors: descriptors.to_vec() })
}

/// Averages recovered blocks onto the padded canvas (uniform count-weighted
/// mean where blocks overlap), crops the border, and clamps into `[0, 1]`.
/// Canvas pixels covered by no block come out as masked zeros.
pub fn aggregate(
    blocks: &[(PatchDescriptor, DenseTensor)],
    geometry: &PaddedFrame,
) -> Result<Frame> {
    if blocks.is_empty() {
        return Err(Error::Empty("no recovered blocks to aggregate".into()));
    }
    let (hp, wp, n) = (geometry.padded_height(), geometry.padded_width(), geometry.channels());
    let mut sum = DenseTensor::zeros(&[hp, wp, n]);
    let mut count = DenseTensor::zeros(&[hp, wp, n]);
    for (d, block) in blocks {
        let expect = [d.edge, d.edge, n];
        if block.shape() != expect {
            return Err(Error::ShapeMismatch {
                left: block.shape().to_vec(),
                right: expect.to_vec(),
            });
        }
        if d.row + d.edge > hp || d.col + d.edge > wp {
            return Err(Error::InvalidShape("recovered block exceeds the canvas".into()));
        }
        for ch in 0..n {
            for v in 0..d.edge {
                for u in 0..d.edge {
                    let idx = [d.row + u, d.col + v, ch];
                    sum.set(&idx, sum.get(&idx) + block.get(&[u, v, ch]));
                    count.set(&idx, count.get(&idx) + 1.0);
                }
            }
        }
    }
    let (top, left) = (geometry.border_top(), geometry.border_left());
    let (h, w) = (geometry.orig_height(), geometry.orig_width());
    let mut values = DenseTensor::zeros(&[h, w, n]);
    let mut mask = DenseTensor::zeros(&[h, w, n]);
    for ch in 0..n {
        for col in 0..w {
            for row in 0..h {
                let src = [row + top, col + left, ch];
                let c = count.get(&src);
                if c > 0.0 {
                    values.set(&[row, col, ch], (sum.get(&src) / c).clamp(0.0, 1.0));
                    mask.set(&[row, col, ch], 1.0);
                }
            }
        }
    }
    Frame::new(MaskedTensor::new(values, mask)?)
}

/// Minimum, over the pixels of `descriptor`, of how many OTHER descriptors
/// cover that pixel. Zero for a lone patch; large when the whole patch sits
/// under a thick pile of others.
pub fn overlap_degree(descriptor: &PatchDescriptor, others: &[PatchDescriptor]) -> usize {
    let e = descriptor.edge;
    let mut counts = vec![0usize; e * e];
    for other in others {
        if std::ptr::eq(other, descriptor) {
            continue;
        }
        let r_lo = other.row.max(descriptor.row);
        let r_hi = (other.row + other.edge).min(descriptor.row + e);
        let c_lo = other.col.max(descriptor.col);
        let c_hi = (other.col + other.edge).min(descriptor.col + e);
        if r_lo >= r_hi || c_lo >= c_hi {
            continue;
        }
        for col in c_lo..c_hi {
            for row in r_lo..r_hi {
                counts[(row - descriptor.row) + (col - descriptor.col) * e] += 1;
            }
        }
    }
    counts.into_iter().min().unwrap_or(0)
}
