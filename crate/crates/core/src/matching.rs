//! Coarse-scale patch matching on interleaved down-sampled frames.
//!
//! A frame whose padded size is divisible by the sampling interval `s` splits
//! into `s^2` interleaved sub-frames. Matching runs a small window search in
//! every sub-frame against the down-sampled reference patch and maps winners
//! back to full-scale coordinates, cutting the per-candidate cost by `s^2`.

use crate::error::{Error, Result};
use crate::frame::PaddedFrame;
use crate::tensor::MaskedTensor;

/// Maps a 1-based full-scale pixel `(x, y)` to its 1-based location
/// `(x', y', c)` in the `c`-th of the `s^2` interleaved sub-frames.
pub fn coord_map(x: usize, y: usize, s: usize) -> (usize, usize, usize) {
    debug_assert!(x >= 1 && y >= 1 && s >= 1);
    let xp = (x - 1) / s + 1;
    let yp = (y - 1) / s + 1;
    let c = (x - 1) % s + ((y - 1) % s) * s + 1;
    (xp, yp, c)
}

/// Inverse of [`coord_map`].
pub fn coord_map_inv(xp: usize, yp: usize, c: usize, s: usize) -> (usize, usize) {
    debug_assert!(xp >= 1 && yp >= 1 && (1..=s * s).contains(&c));
    let x = (xp - 1) * s + 1 + (c - 1) % s;
    let y = (yp - 1) * s + 1 + (c - 1) / s;
    (x, y)
}

/// Location of one square patch inside a padded frame: 0-based top-left
/// `(row, col)` plus the edge length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchDescriptor {
    pub row: usize,
    pub col: usize,
    pub edge: usize,
}

impl PatchDescriptor {
    pub fn fits(&self, frame: &PaddedFrame) -> bool {
        self.row + self.edge <= frame.padded_height() && self.col + self.edge <= frame.padded_width()
    }

    pub fn covers(&self, row: usize, col: usize) -> bool {
        (self.row..self.row + self.edge).contains(&row)
            && (self.col..self.col + self.edge).contains(&col)
    }
}

/// Mean squared difference over commonly observed entries; plus infinity when
/// the masks share no observation, so distances always sort.
pub fn patch_distance(a: &MaskedTensor, b: &MaskedTensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { left: a.shape().to_vec(), right: b.shape().to_vec() });
    }
    let mut acc = 0.0f64;
    let mut common = 0usize;
    for off in 0..a.len() {
        if a.is_observed_at(off) && b.is_observed_at(off) {
            let d = a.values().data()[off] - b.values().data()[off];
            acc += d * d;
            common += 1;
        }
    }
    if common == 0 {
        Ok(f64::INFINITY)
    } else {
        Ok(acc / common as f64)
    }
}

/// One ranked match returned by the coarse search.
#[derive(Debug, Clone, Copy)]
pub struct PatchMatch {
    pub desc: PatchDescriptor,
    pub distance: f64,
}

/// Work accounting for the search, in evaluated candidates and compared
/// pixel positions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchStats {
    pub candidates: u64,
    pub pixels_compared: u64,
}

/// Distance between the stride-`s` grids anchored at two top-left corners,
/// restricted to commonly observed positions.
#[allow(clippy::too_many_arguments)]
fn strided_distance(
    prev: &PaddedFrame,
    (pr, pc): (usize, usize),
    next: &PaddedFrame,
    (nr, nc): (usize, usize),
    e: usize,
    s: usize,
    stats: &mut MatchStats,
) -> f64 {
    let n = prev.channels();
    let (pf, nf) = (prev.frame(), next.frame());
    let mut acc = 0.0f64;
    let mut common = 0usize;
    for v in 0..e {
        for u in 0..e {
            let (ar, ac) = (pr + u * s, pc + v * s);
            let (br, bc) = (nr + u * s, nc + v * s);
            for ch in 0..n {
                if pf.is_observed(ar, ac, ch) && nf.is_observed(br, bc, ch) {
                    let d = pf.value(ar, ac, ch) - nf.value(br, bc, ch);
                    acc += d * d;
                    common += 1;
                }
            }
        }
    }
    stats.candidates += 1;
    stats.pixels_compared += (e * e * n) as u64;
    if common == 0 {
        f64::INFINITY
    } else {
        acc / common as f64
    }
}

/// Finds up to `count` nearest patches to `reference` (a patch of `prev`)
/// inside `next`, searching a `ceil(l/s)`-wide window in each of the `s^2`
/// interleaved sub-frames around the mapped reference location. Matching is
/// meant to run on dilated frames; extraction for completion happens on the
/// originals.
///
/// Results are sorted by ascending distance with ties broken in raster order
/// (down-sampled row, then column, then sub-frame index). Returns fewer than
/// `count` matches when the window has fewer valid candidates.
pub fn ecpm_match(
    reference: &PatchDescriptor,
    prev: &PaddedFrame,
    next: &PaddedFrame,
    count: usize,
    search: usize,
    interval: usize,
) -> Result<Vec<PatchMatch>> {
    Ok(ecpm_match_with_stats(reference, prev, next, count, search, interval)?.0)
}

/// As [`ecpm_match`], also reporting how much work the search did.
pub fn ecpm_match_with_stats(
    reference: &PatchDescriptor,
    prev: &PaddedFrame,
    next: &PaddedFrame,
    count: usize,
    search: usize,
    interval: usize,
) -> Result<(Vec<PatchMatch>, MatchStats)> {
    let s = interval;
    if s == 0 {
        return Err(Error::InvalidConfig("sampling interval must be at least 1".into()));
    }
    if count == 0 {
        return Err(Error::InvalidConfig("requested match count must be at least 1".into()));
    }
    if prev.padded_height() != next.padded_height()
        || prev.padded_width() != next.padded_width()
        || prev.channels() != next.channels()
    {
        return Err(Error::ShapeMismatch {
            left: vec![prev.padded_height(), prev.padded_width(), prev.channels()],
            right: vec![next.padded_height(), next.padded_width(), next.channels()],
        });
    }
    let (hp, wp) = (prev.padded_height(), prev.padded_width());
    if hp % s != 0 || wp % s != 0 {
        return Err(Error::InvalidShape(format!(
            "padded size {hp}x{wp} is not divisible by interval {s}"
        )));
    }
    if !reference.fits(prev) {
        return Err(Error::InvalidShape("reference patch exceeds the padded frame".into()));
    }

    let m = reference.edge;
    let e = m.div_ceil(s);
    let window = search.div_ceil(s);
    let lo = (window - 1) / 2;
    let hi = window - 1 - lo;
    let (hs, ws) = (hp / s, wp / s);
    let (r0, c0) = (reference.row, reference.col);
    let (r0s, c0s) = (r0 / s, c0 / s);

    let mut stats = MatchStats::default();
    struct Cand {
        dist: f64,
        rs: usize,
        cs: usize,
        sub: usize,
        row: usize,
        col: usize,
    }
    let mut cands: Vec<Cand> = Vec::with_capacity(window * window * s * s);
    for sub in 0..s * s {
        let (dr, dc) = (sub % s, sub / s);
        for rs in r0s.saturating_sub(lo)..=(r0s + hi).min(hs.saturating_sub(e)) {
            if rs + e > hs {
                continue;
            }
            for cs in c0s.saturating_sub(lo)..=(c0s + hi).min(ws.saturating_sub(e)) {
                if cs + e > ws {
                    continue;
                }
                let row = rs * s + dr;
                let col = cs * s + dc;
                if row + m > hp || col + m > wp {
                    continue;
                }
                let dist =
                    strided_distance(prev, (r0, c0), next, (row, col), e, s, &mut stats);
                cands.push(Cand { dist, rs, cs, sub, row, col });
            }
        }
    }
    cands.sort_by(|a, b| {
        a.dist
            .total_cmp(&b.dist)
            .then(a.rs.cmp(&b.rs))
            .then(a.cs.cmp(&b.cs))
            .then(a.sub.cmp(&b.sub))
    });
    let matches = cands
        .into_iter()
        .take(count)
        .map(|c| PatchMatch {
            desc: PatchDescriptor { row: c.row, col: c.col, edge: m },
            distance: c.dist,
        })
        .collect();
    Ok((matches, stats))
}
