//! Recovery of missing pixels in images and streaming video by tracking
//! small patches across frames and completing the stacked patch tensors
//! under a tensor-ring model.
//!
//! The layers, bottom to top:
//!
//! * [`tensor`] / [`ring`] — dense N-way tensors, mode unfoldings, ring
//!   cores and the subchain contraction identities.
//! * [`batch`] — batch completion (rank estimation plus scaled steepest
//!   descent with exact line search) used to create cores for new patches.
//! * [`streaming`] — the per-frame update: closed-form temporal-slice solve
//!   plus a one-step refresh of the spatial cores.
//! * [`frame`] / [`matching`] / [`patch`] — mirror padding, observation
//!   dilation, coarse-scale patch matching, extraction and aggregation.
//! * [`pipeline`] — the frame-by-frame tracker tying it all together, with a
//!   single-image mode.
//! * [`mask`] / [`metrics`] — synthetic missing-data patterns, PSNR and the
//!   temporal-subspace diagnostic.

pub mod batch;
pub mod error;
pub mod frame;
pub mod mask;
pub mod matching;
pub mod metrics;
pub mod patch;
pub mod pipeline;
pub mod ring;
pub mod streaming;
pub mod tensor;

pub use batch::{
    estimate_rank, masked_loss, ssd_core_step, ssd_core_step_detailed, trssd_complete,
    trssd_complete_with_cost, BatchStopCriteria, RankHeuristicParams, SsdParams, SsdStepDetail,
};
pub use error::{Error, Result};
pub use frame::{dilate, pad_mirror, Frame, PaddedFrame};
pub use mask::{default_block_pattern, gen_mask, MaskPattern, MaskSpec};
pub use matching::{
    coord_map, coord_map_inv, ecpm_match, ecpm_match_with_stats, patch_distance, MatchStats,
    PatchDescriptor, PatchMatch,
};
pub use metrics::{psnr, psnr_dense, subspace_diagnostic};
pub use patch::{aggregate, extract_patch_tensor, overlap_degree, PatchTensor};
pub use pipeline::{
    complete_image, coverage_counts, process_first_frame, process_frame, FrameStats,
    PipelineConfig, PipelineState, TrackedPatchState,
};
pub use ring::{subchain_merge, tr_reconstruct, TrCores};
pub use streaming::{solve_temporal_core, strc_update, strc_update_with_cost, StreamParams};
pub use tensor::{
    mode_fold_bracket, mode_fold_paren, mode_unfold_bracket, mode_unfold_paren, DenseTensor,
    MaskedTensor,
};
