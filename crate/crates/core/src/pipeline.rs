//! Frame-by-frame orchestration: track patches into the incoming frame,
//! prune bad or redundant tracks, cover what is left with new patches,
//! complete every patch tensor, and blend the aggregate with the observed
//! pixels.
//!
//! The state carried between frames is one previous frame plus the pool of
//! tracked patches with their ring cores; nothing older is retained.

use rayon::prelude::*;

use crate::batch::{
    estimate_rank, trssd_complete, BatchStopCriteria, RankHeuristicParams, SsdParams,
};
use crate::error::{Error, Result};
use crate::frame::{dilate, pad_mirror, Frame, PaddedFrame};
use crate::matching::{ecpm_match_with_stats, PatchDescriptor, PatchMatch};
use crate::patch::{aggregate, extract_patch_tensor, overlap_degree};
use crate::ring::TrCores;
use crate::streaming::{strc_update, StreamParams};
use crate::tensor::DenseTensor;

/// All tuning knobs for the tracker and the completion solvers.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Patch edge length m.
    pub patch_size: usize,
    /// Overlap o between neighboring grid patches.
    pub overlap: usize,
    /// Mirror border b (grown to meet divisibility by the interval).
    pub border: usize,
    /// Coarse-matching sampling interval s.
    pub interval_s: usize,
    /// Search window edge l (odd).
    pub search_size: usize,
    /// Patches stacked for a new patch tensor (K_b).
    pub k_new: usize,
    /// Patches stacked for a tracked patch tensor (K_o).
    pub k_tracked: usize,
    /// Tracking-failure distance threshold.
    pub tau_f: f64,
    /// Overlap-degree pruning threshold (usize::MAX disables).
    pub tau_c: usize,
    /// Ridge weight for temporal-slice solves.
    pub gamma: f64,
    /// Batch sweep limit L.
    pub max_sweeps: usize,
    /// Batch relative-change tolerance.
    pub tolerance: f64,
    /// Rank rule constant C1.
    pub c1: f64,
    /// Rank rule constant C2.
    pub c2: f64,
    /// Rank rule offset r_o.
    pub rank_offset: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    /// Regularizer for the descent scaling Gram matrix.
    pub epsilon_scale: f64,
    /// Root seed; all randomness in a run derives from it.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            patch_size: 36,
            overlap: 12,
            border: 20,
            interval_s: 3,
            search_size: 41,
            k_new: 30,
            k_tracked: 10,
            tau_f: 0.02,
            tau_c: 3,
            gamma: 1e-5,
            max_sweeps: 10,
            tolerance: 1e-2,
            c1: 1000.0,
            c2: 6.0,
            rank_offset: 4,
            min_rank: 1,
            max_rank: 64,
            epsilon_scale: 1e-10,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size <= self.overlap {
            return Err(Error::InvalidConfig(format!(
                "patch_size {} must exceed overlap {}",
                self.patch_size, self.overlap
            )));
        }
        if self.search_size % 2 == 0 {
            return Err(Error::InvalidConfig("search_size must be odd".into()));
        }
        if self.k_tracked == 0 || self.k_tracked > self.k_new {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k_tracked ({}) <= k_new ({})",
                self.k_tracked, self.k_new
            )));
        }
        if self.interval_s == 0 {
            return Err(Error::InvalidConfig("interval_s must be at least 1".into()));
        }
        self.rank_params().validate()?;
        self.stop_criteria().validate()?;
        self.stream_params().validate()
    }

    pub fn rank_params(&self) -> RankHeuristicParams {
        RankHeuristicParams {
            c1: self.c1,
            c2: self.c2,
            rank_offset: self.rank_offset,
            min_rank: self.min_rank,
            max_rank: self.max_rank,
        }
    }

    pub fn stop_criteria(&self) -> BatchStopCriteria {
        BatchStopCriteria { max_sweeps: self.max_sweeps, tolerance: self.tolerance }
    }

    pub fn stream_params(&self) -> StreamParams {
        StreamParams { gamma: self.gamma, epsilon_scale: self.epsilon_scale }
    }

    pub fn ssd_params(&self) -> SsdParams {
        SsdParams { epsilon_scale: self.epsilon_scale }
    }
}

/// One tracked patch: where it sits in the current padded frame and the ring
/// cores fitted to its patch tensor.
#[derive(Debug, Clone)]
pub struct TrackedPatchState {
    pub desc: PatchDescriptor,
    pub cores: TrCores,
    uid: u64,
}

impl TrackedPatchState {
    pub fn uid(&self) -> u64 {
        self.uid
    }
}

/// Per-frame tracker accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameStats {
    pub pool_size: usize,
    pub new_patches: usize,
    pub pruned: usize,
    pub matched_candidates: u64,
}

/// Everything carried from one frame to the next.
#[derive(Debug, Clone)]
pub struct PipelineState {
    prev: Frame,
    pool: Vec<TrackedPatchState>,
    frame_index: usize,
    next_uid: u64,
    last_stats: FrameStats,
}

impl PipelineState {
    pub fn pool(&self) -> &[TrackedPatchState] {
        &self.pool
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn prev_frame(&self) -> &Frame {
        &self.prev
    }

    pub fn last_stats(&self) -> FrameStats {
        self.last_stats
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-patch completion seed, stable across thread schedules.
fn derive_seed(root: u64, uid: u64) -> u64 {
    splitmix64(root ^ uid.wrapping_mul(0xD1B54A32D192ED03))
}

/// Grid start positions covering pixel range `[lo, hi]` with `edge`-long
/// patches stepping by `stride`, clipped to `[0, bound - edge]`. The final
/// start is pulled back so the last patch still fits while reaching `hi`.
fn grid_starts(lo: usize, hi: usize, edge: usize, stride: usize, bound: usize) -> Vec<usize> {
    debug_assert!(edge <= bound && hi < bound && lo <= hi && stride >= 1);
    let max_start = bound - edge;
    let mut out = Vec::new();
    let mut p = lo.min(max_start);
    loop {
        out.push(p);
        if p + edge - 1 >= hi || p == max_start {
            break;
        }
        p = (p + stride).min(max_start);
    }
    out
}

/// Stacks `count` descriptors out of ranked matches, repeating the best one
/// when the search returned fewer than requested.
fn pad_descriptors(matches: &[PatchMatch], count: usize) -> Vec<PatchDescriptor> {
    debug_assert!(!matches.is_empty());
    let mut descs: Vec<PatchDescriptor> = matches.iter().take(count).map(|m| m.desc).collect();
    while descs.len() < count {
        descs.push(matches[0].desc);
    }
    descs
}

struct CompletedPatch {
    state: TrackedPatchState,
    blocks: Vec<(PatchDescriptor, DenseTensor)>,
}

/// Splits a recovered `m x m x n x K` stack into its per-descriptor blocks.
fn split_blocks(
    recon: &DenseTensor,
    descs: &[PatchDescriptor],
) -> Vec<(PatchDescriptor, DenseTensor)> {
    let (e, n, k) = (recon.shape()[0], recon.shape()[2], recon.shape()[3]);
    let slice_len = e * e * n;
    descs
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let start = j * slice_len;
            let data = recon.data()[start..start + slice_len].to_vec();
            (*d, DenseTensor::from_vec(&[e, e, n], data).unwrap())
        })
        .take(k)
        .collect()
}

/// Blends observed input pixels over the aggregated estimate; observed
/// entries pass through bit-exactly.
fn blend_with_observed(input: &Frame, estimate: &Frame) -> Result<Frame> {
    let (h, w, n) = (input.height(), input.width(), input.channels());
    let mut values = DenseTensor::zeros(&[h, w, n]);
    for ch in 0..n {
        for col in 0..w {
            for row in 0..h {
                let v = if input.is_observed(row, col, ch) {
                    input.value(row, col, ch)
                } else {
                    estimate.value(row, col, ch)
                };
                values.set(&[row, col, ch], v);
            }
        }
    }
    Frame::fully_observed(values)
}

fn complete_new_patch(
    padded: &PaddedFrame,
    descs: &[PatchDescriptor],
    cfg: &PipelineConfig,
    uid: u64,
) -> Result<CompletedPatch> {
    let tensor = extract_patch_tensor(padded, descs)?;
    let rank = estimate_rank(&tensor.data, &cfg.rank_params())?;
    let seed = derive_seed(cfg.seed, uid);
    let (cores, recon) = trssd_complete(&tensor.data, rank, &cfg.stop_criteria(), seed)?;
    Ok(CompletedPatch {
        state: TrackedPatchState { desc: descs[0], cores, uid },
        blocks: split_blocks(&recon, descs),
    })
}

fn refresh_tracked_patch(
    padded: &PaddedFrame,
    descs: &[PatchDescriptor],
    prior: &TrackedPatchState,
    cfg: &PipelineConfig,
) -> Result<CompletedPatch> {
    let tensor = extract_patch_tensor(padded, descs)?;
    let (cores, recon) = strc_update(&tensor.data, prior.cores.spatial(), &cfg.stream_params())?;
    Ok(CompletedPatch {
        state: TrackedPatchState { desc: descs[0], cores, uid: prior.uid },
        blocks: split_blocks(&recon, descs),
    })
}

/// Descriptor-coverage counts over an `h x w` canvas.
pub fn coverage_counts(descs: &[PatchDescriptor], h: usize, w: usize) -> DenseTensor {
    let mut counts = DenseTensor::zeros(&[h, w]);
    for d in descs {
        for col in d.col..(d.col + d.edge).min(w) {
            for row in d.row..(d.row + d.edge).min(h) {
                counts.set(&[row, col], counts.get(&[row, col]) + 1.0);
            }
        }
    }
    counts
}

fn process_inner(
    frame: &Frame,
    prior: Option<PipelineState>,
    cfg: &PipelineConfig,
) -> Result<(Frame, PipelineState)> {
    cfg.validate()?;
    let m = cfg.patch_size;
    let padded = pad_mirror(frame, cfg.border, cfg.interval_s)?;
    if padded.padded_height() < m || padded.padded_width() < m {
        return Err(Error::InvalidConfig(format!(
            "padded frame {}x{} is smaller than the patch size {}",
            padded.padded_height(),
            padded.padded_width(),
            m
        )));
    }
    let dil_cur = dilate(&padded);

    let (mut next_uid, frame_index, prev_pool, prev_frame) = match prior {
        Some(st) => {
            if st.prev.height() != frame.height()
                || st.prev.width() != frame.width()
                || st.prev.channels() != frame.channels()
            {
                return Err(Error::InvalidState(format!(
                    "frame geometry {}x{}x{} does not match state {}x{}x{}",
                    frame.height(),
                    frame.width(),
                    frame.channels(),
                    st.prev.height(),
                    st.prev.width(),
                    st.prev.channels()
                )));
            }
            (st.next_uid, st.frame_index + 1, st.pool, Some(st.prev))
        }
        None => (0, 1, Vec::new(), None),
    };

    let mut stats = FrameStats::default();
    let mut completed: Vec<CompletedPatch> = Vec::new();
    let mut survivor_descs: Vec<PatchDescriptor> = Vec::new();

    // Tracking: match every pooled patch from the previous frame into this
    // one, then prune failures and over-covered tracks.
    if let Some(prev) = &prev_frame {
        let dil_prev = dilate(&pad_mirror(prev, cfg.border, cfg.interval_s)?);
        let match_results: Vec<(Vec<PatchMatch>, u64)> = prev_pool
            .par_iter()
            .map(|p| {
                ecpm_match_with_stats(
                    &p.desc,
                    &dil_prev,
                    &dil_cur,
                    cfg.k_tracked,
                    cfg.search_size,
                    cfg.interval_s,
                )
                .map(|(m, s)| (m, s.candidates))
            })
            .collect::<Result<_>>()?;
        stats.matched_candidates += match_results.iter().map(|(_, c)| c).sum::<u64>();

        // Prune pass, in pool order: tracking failures first, then overlap
        // against the still-live candidate positions.
        let n_tracked = prev_pool.len();
        let mut live = vec![true; n_tracked];
        let candidates: Vec<Option<PatchDescriptor>> = match_results
            .iter()
            .map(|(ms, _)| ms.first().map(|best| best.desc))
            .collect();
        for i in 0..n_tracked {
            let fail = match match_results[i].0.first() {
                Some(best) => !(best.distance <= cfg.tau_f),
                None => true,
            };
            if fail {
                live[i] = false;
                stats.pruned += 1;
                continue;
            }
            let me = candidates[i].expect("matched");
            let others: Vec<PatchDescriptor> = (0..n_tracked)
                .filter(|&j| j != i && live[j])
                .filter_map(|j| candidates[j])
                .collect();
            if overlap_degree(&me, &others) > cfg.tau_c {
                live[i] = false;
                stats.pruned += 1;
            }
        }

        let survivors: Vec<(usize, Vec<PatchDescriptor>)> = (0..n_tracked)
            .filter(|&i| live[i])
            .map(|i| (i, pad_descriptors(&match_results[i].0, cfg.k_tracked)))
            .collect();
        let refreshed: Vec<CompletedPatch> = survivors
            .par_iter()
            .map(|(i, descs)| refresh_tracked_patch(&padded, descs, &prev_pool[*i], cfg))
            .collect::<Result<_>>()?;
        survivor_descs.extend(refreshed.iter().map(|c| c.state.desc));
        completed.extend(refreshed);
    }

    // New patches over uncovered pixels: a stride grid across the bounding
    // box of whatever the surviving tracks leave exposed.
    let (hp, wp) = (padded.padded_height(), padded.padded_width());
    let counts = coverage_counts(&survivor_descs, hp, wp);
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for col in 0..wp {
        for row in 0..hp {
            if counts.get(&[row, col]) == 0.0 {
                let b = bbox.get_or_insert((row, row, col, col));
                b.0 = b.0.min(row);
                b.1 = b.1.max(row);
                b.2 = b.2.min(col);
                b.3 = b.3.max(col);
            }
        }
    }
    if let Some((r_lo, r_hi, c_lo, c_hi)) = bbox {
        let stride = m - cfg.overlap;
        let mut new_descs = Vec::new();
        for &row in &grid_starts(r_lo, r_hi, m, stride, hp) {
            for &col in &grid_starts(c_lo, c_hi, m, stride, wp) {
                let d = PatchDescriptor { row, col, edge: m };
                let touches_uncovered = (d.col..d.col + m)
                    .any(|c| (d.row..d.row + m).any(|r| counts.get(&[r, c]) == 0.0));
                if touches_uncovered {
                    new_descs.push(d);
                }
            }
        }
        let jobs: Vec<(PatchDescriptor, u64)> = new_descs
            .iter()
            .map(|d| {
                let uid = next_uid;
                next_uid += 1;
                (*d, uid)
            })
            .collect();
        let created: Vec<CompletedPatch> = jobs
            .par_iter()
            .map(|(d, uid)| {
                let (matches, mstats) = ecpm_match_with_stats(
                    d,
                    &dil_cur,
                    &dil_cur,
                    cfg.k_new,
                    cfg.search_size,
                    cfg.interval_s,
                )?;
                // The patch itself leads the stack; keep the nearest distinct
                // locations after it.
                let mut descs = Vec::with_capacity(cfg.k_new);
                descs.push(*d);
                descs.extend(
                    matches.iter().map(|pm| pm.desc).filter(|c| c != d).take(cfg.k_new - 1),
                );
                while descs.len() < cfg.k_new {
                    descs.push(descs[1.min(descs.len() - 1)]);
                }
                complete_new_patch(&padded, &descs, cfg, *uid)
                    .map(|c| (c, mstats.candidates))
            })
            .collect::<Result<Vec<(CompletedPatch, u64)>>>()?
            .into_iter()
            .map(|(c, cand)| {
                stats.matched_candidates += cand;
                c
            })
            .collect();
        stats.new_patches = created.len();
        completed.extend(created);
    }

    // Aggregate every recovered block, crop, then pass observed pixels
    // through untouched.
    let all_blocks: Vec<(PatchDescriptor, DenseTensor)> =
        completed.iter().flat_map(|c| c.blocks.iter().cloned()).collect();
    let estimate = aggregate(&all_blocks, &padded)?;
    let output = blend_with_observed(frame, &estimate)?;

    let pool: Vec<TrackedPatchState> = completed.into_iter().map(|c| c.state).collect();
    stats.pool_size = pool.len();
    let state = PipelineState {
        prev: frame.clone(),
        pool,
        frame_index,
        next_uid,
        last_stats: stats,
    };
    Ok((output, state))
}

/// Processes the first frame of a stream: the whole padded canvas counts as
/// uncovered, so a full grid of new patches is created and batch-completed.
pub fn process_first_frame(frame: &Frame, cfg: &PipelineConfig) -> Result<(Frame, PipelineState)> {
    process_inner(frame, None, cfg)
}

/// Processes a subsequent frame against the carried state.
pub fn process_frame(
    frame: &Frame,
    state: PipelineState,
    cfg: &PipelineConfig,
) -> Result<(Frame, PipelineState)> {
    process_inner(frame, Some(state), cfg)
}

/// Single-image completion: the first-frame path without keeping state.
pub fn complete_image(frame: &Frame, cfg: &PipelineConfig) -> Result<Frame> {
    Ok(process_first_frame(frame, cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::MaskedTensor;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Small config so unit tests stay quick.
    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            patch_size: 8,
            overlap: 3,
            border: 4,
            interval_s: 2,
            search_size: 9,
            k_new: 8,
            k_tracked: 4,
            max_sweeps: 6,
            ..PipelineConfig::default()
        }
    }

    fn textured(h: usize, w: usize, phase: f64) -> DenseTensor {
        DenseTensor::from_fn(&[h, w, 1], |idx| {
            let (r, c) = (idx[0] as f64, idx[1] as f64);
            0.5 + 0.3 * ((0.35 * r + phase).sin() * (0.27 * c + 0.4 * phase).cos())
        })
    }

    fn masked_frame(values: DenseTensor, p: f64, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = DenseTensor::from_fn(values.shape(), |_| {
            if rng.gen::<f64>() < p {
                1.0
            } else {
                0.0
            }
        });
        Frame::new(MaskedTensor::new(values, mask).unwrap()).unwrap()
    }

    fn psnr_vs(a: &Frame, b: &DenseTensor) -> f64 {
        let mse: f64 = a
            .data()
            .values()
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / b.len() as f64;
        10.0 * (1.0 / mse).log10()
    }

    #[test]
    fn fully_observed_frame_passes_through_bitwise() {
        let values = textured(24, 24, 0.0);
        let frame = Frame::fully_observed(values.clone()).unwrap();
        let (out, st) = process_first_frame(&frame, &small_cfg()).unwrap();
        assert_eq!(out.data().values(), &values);
        assert!(st.pool().len() >= 4);
        assert_eq!(st.frame_index(), 1);
    }

    #[test]
    fn constant_frame_recovers_from_sparse_observations() {
        let values = DenseTensor::filled(&[24, 24, 1], 0.5);
        let frame = masked_frame(values, 0.2, 9);
        let out = complete_image(&frame, &small_cfg()).unwrap();
        for &v in out.data().values().data() {
            assert!((v - 0.5).abs() < 1e-2, "pixel {v}");
        }
    }

    #[test]
    fn textured_image_beats_zero_fill_by_a_wide_margin() {
        let truth = textured(32, 32, 1.3);
        let frame = masked_frame(truth.clone(), 0.3, 11);
        let out = complete_image(&frame, &small_cfg()).unwrap();
        let zero_fill = {
            let vals = DenseTensor::from_fn(truth.shape(), |idx| {
                if frame.is_observed(idx[0], idx[1], idx[2]) {
                    frame.value(idx[0], idx[1], idx[2])
                } else {
                    0.0
                }
            });
            Frame::fully_observed(vals).unwrap()
        };
        let got = psnr_vs(&out, &truth);
        let base = psnr_vs(&zero_fill, &truth);
        assert!(got > base + 10.0, "psnr {got:.2} vs zero-fill {base:.2}");
    }

    #[test]
    fn static_video_keeps_descriptors_in_place() {
        let values = textured(24, 24, 2.0);
        let frame = Frame::fully_observed(values).unwrap();
        let cfg = small_cfg();
        let (_, st1) = process_first_frame(&frame, &cfg).unwrap();
        let descs_before: Vec<_> = st1.pool().iter().map(|p| p.desc).collect();
        let (out, st2) = process_frame(&frame, st1, &cfg).unwrap();
        let moved = st2
            .pool()
            .iter()
            .take(descs_before.len())
            .zip(&descs_before)
            .filter(|(a, b)| a.desc != **b)
            .count();
        assert_eq!(moved, 0, "tracked descriptors moved on a static frame");
        assert_eq!(out.data().values(), frame.data().values());
        assert_eq!(st2.frame_index(), 2);
    }

    #[test]
    fn translation_moves_the_tracked_descriptors() {
        let cfg = small_cfg();
        let shift = cfg.interval_s;
        let base = textured(32, 32, 0.7);
        let shifted = DenseTensor::from_fn(&[32, 32, 1], |idx| {
            let (r, c) = (idx[0], idx[1]);
            if c >= shift {
                base.get(&[r, c - shift, 0])
            } else {
                base.get(&[r, 0, 0])
            }
        });
        let f1 = Frame::fully_observed(base).unwrap();
        let f2 = Frame::fully_observed(shifted).unwrap();
        let (_, st1) = process_first_frame(&f1, &cfg).unwrap();
        let before: Vec<_> = st1.pool().iter().map(|p| (p.uid(), p.desc)).collect();
        let (_, st2) = process_frame(&f2, st1, &cfg).unwrap();
        let mut dr = Vec::new();
        let mut dc = Vec::new();
        for p in st2.pool() {
            if let Some((_, old)) = before.iter().find(|(uid, _)| *uid == p.uid()) {
                dr.push(p.desc.row as isize - old.row as isize);
                dc.push(p.desc.col as isize - old.col as isize);
            }
        }
        assert!(!dr.is_empty());
        dr.sort_unstable();
        dc.sort_unstable();
        assert_eq!(dr[dr.len() / 2], 0, "median row displacement");
        assert_eq!(dc[dc.len() / 2], shift as isize, "median col displacement");
    }

    #[test]
    fn scene_cut_prunes_most_tracks() {
        let cfg = small_cfg();
        let scene_a = masked_frame(textured(24, 24, 0.0), 0.5, 21);
        let scene_b = masked_frame(
            DenseTensor::from_fn(&[24, 24, 1], |idx| {
                if (idx[0] / 4 + idx[1] / 4) % 2 == 0 {
                    0.95
                } else {
                    0.05
                }
            }),
            0.5,
            22,
        );
        let (_, st1) = process_first_frame(&scene_a, &cfg).unwrap();
        let tracked = st1.pool().len();
        let (_, st2) = process_frame(&scene_b, st1, &cfg).unwrap();
        let pruned = st2.last_stats().pruned;
        assert!(
            pruned * 10 >= tracked * 9,
            "only {pruned} of {tracked} tracks pruned at the cut"
        );
        assert!(st2.last_stats().new_patches > 0);
    }

    #[test]
    fn infinite_thresholds_disable_pruning() {
        let cfg = PipelineConfig {
            tau_f: f64::INFINITY,
            tau_c: usize::MAX,
            ..small_cfg()
        };
        let a = masked_frame(textured(24, 24, 0.3), 0.4, 31);
        let b = masked_frame(textured(24, 24, 4.0), 0.4, 32); // unrelated content
        let (_, st1) = process_first_frame(&a, &cfg).unwrap();
        let (_, st2) = process_frame(&b, st1, &cfg).unwrap();
        assert_eq!(st2.last_stats().pruned, 0);
    }

    #[test]
    fn coverage_is_complete_after_new_patch_generation() {
        let cfg = small_cfg();
        let a = masked_frame(textured(20, 26, 0.5), 0.4, 41);
        let b = masked_frame(textured(20, 26, 0.8), 0.4, 42);
        let (_, st1) = process_first_frame(&a, &cfg).unwrap();
        let padded = pad_mirror(&a, cfg.border, cfg.interval_s).unwrap();
        let check = |st: &PipelineState| {
            let descs: Vec<_> = st.pool().iter().map(|p| p.desc).collect();
            let counts =
                coverage_counts(&descs, padded.padded_height(), padded.padded_width());
            assert!(counts.data().iter().all(|&c| c >= 1.0), "uncovered pixel");
        };
        check(&st1);
        let (_, st2) = process_frame(&b, st1, &cfg).unwrap();
        check(&st2);
    }

    #[test]
    fn state_is_bounded_on_a_static_stream() {
        let cfg = small_cfg();
        let frame = masked_frame(textured(20, 20, 1.0), 0.5, 51);
        let (_, mut st) = process_first_frame(&frame, &cfg).unwrap();
        let mut sizes = Vec::new();
        for _ in 0..4 {
            let (_, next) = process_frame(&frame, st, &cfg).unwrap();
            sizes.push(next.pool().len());
            st = next;
        }
        let cap = sizes[0] * 2 + 8;
        assert!(sizes.iter().all(|&s| s <= cap), "pool sizes grew: {sizes:?}");
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let cfg = small_cfg();
        let a = masked_frame(textured(20, 20, 0.1), 0.5, 61);
        let b = masked_frame(textured(22, 20, 0.1), 0.5, 62);
        let (_, st) = process_first_frame(&a, &cfg).unwrap();
        assert!(process_frame(&b, st, &cfg).is_err());
    }

    #[test]
    fn tiny_frames_are_a_config_error() {
        let cfg = PipelineConfig { patch_size: 64, overlap: 12, border: 2, ..small_cfg() };
        let f = masked_frame(textured(10, 10, 0.2), 0.5, 71);
        assert!(matches!(process_first_frame(&f, &cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn runs_are_deterministic_in_the_seed() {
        let cfg = small_cfg();
        let a = masked_frame(textured(20, 20, 0.9), 0.3, 81);
        let b = masked_frame(textured(20, 20, 1.1), 0.3, 82);
        let run = || {
            let (o1, st) = process_first_frame(&a, &cfg).unwrap();
            let (o2, _) = process_frame(&b, st, &cfg).unwrap();
            (o1, o2)
        };
        let (x1, x2) = run();
        let (y1, y2) = run();
        assert_eq!(x1.data().values(), y1.data().values());
        assert_eq!(x2.data().values(), y2.data().values());
    }
}
