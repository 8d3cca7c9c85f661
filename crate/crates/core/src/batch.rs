//! Batch tensor-ring completion: adaptive rank estimation followed by sweeps
//! of scaled steepest descent with an exact line search.
//!
//! Each core update works on the cyclic unfolding of the data at that mode.
//! With `U` the unfolded merged subchain of the other cores, the observed-entry
//! loss is quadratic along any direction in the core's matricization, so the
//! line-search step length has a closed form and the loss never increases.

use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ring::{
    core_folded, core_unfolded, merge_chain_cost, reconstruct_counted, subchain_merge,
    subchain_unfolded, TrCores,
};
use crate::tensor::{mode_unfold_bracket, DenseTensor, MaskedTensor};

/// Parameters of the adaptive rank rule: the estimate is
/// `min(ceil(c1 * sqrt(p) * var), floor(c2 * sqrt(p)) + rank_offset)` with
/// `p` the observed fraction and `var` the variance of observed values,
/// clamped to `[min_rank, max_rank]` and to what the tensor shape supports.
#[derive(Debug, Clone)]
pub struct RankHeuristicParams {
    pub c1: f64,
    pub c2: f64,
    pub rank_offset: usize,
    pub min_rank: usize,
    pub max_rank: usize,
}

impl Default for RankHeuristicParams {
    fn default() -> Self {
        Self { c1: 1000.0, c2: 6.0, rank_offset: 4, min_rank: 1, max_rank: 64 }
    }
}

impl RankHeuristicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0) || !(self.c2 > 0.0) {
            return Err(Error::InvalidConfig("rank constants must be positive".into()));
        }
        if self.min_rank == 0 || self.min_rank > self.max_rank {
            return Err(Error::InvalidConfig(format!(
                "rank clamp [{}, {}] is empty or zero",
                self.min_rank, self.max_rank
            )));
        }
        Ok(())
    }
}

/// Outer-loop stopping rule: at most `max_sweeps` full sweeps, or earlier
/// when the relative change of the reconstruction falls below `tolerance`.
#[derive(Debug, Clone)]
pub struct BatchStopCriteria {
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Default for BatchStopCriteria {
    fn default() -> Self {
        Self { max_sweeps: 10, tolerance: 1e-2 }
    }
}

impl BatchStopCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Regularizer added to the scaling Gram matrix before the SPD solve.
#[derive(Debug, Clone)]
pub struct SsdParams {
    pub epsilon_scale: f64,
}

impl Default for SsdParams {
    fn default() -> Self {
        Self { epsilon_scale: 1e-10 }
    }
}

/// Largest rank the shape meaningfully supports: the tightest matrix-rank
/// bound over all mode unfoldings.
fn shape_rank_cap(shape: &[usize]) -> usize {
    let total: usize = shape.iter().product();
    shape.iter().map(|&e| e.min(total / e)).min().unwrap_or(1).max(1)
}

/// Estimates a single shared bond rank for a partially observed tensor.
pub fn estimate_rank(m: &MaskedTensor, params: &RankHeuristicParams) -> Result<usize> {
    params.validate()?;
    let observed = m.observed_count();
    if observed == 0 {
        return Err(Error::NoObservations);
    }
    let p = observed as f64 / m.len() as f64;
    let mean = m.observed_values().sum::<f64>() / observed as f64;
    let var = m.observed_values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / observed as f64;
    let a = (params.c1 * p.sqrt() * var).ceil() as usize;
    let b = (params.c2 * p.sqrt()).floor() as usize + params.rank_offset;
    let raw = a.min(b);
    let cap = params.max_rank.min(shape_rank_cap(m.shape()));
    Ok(raw.clamp(params.min_rank, cap.max(params.min_rank)))
}

/// Observed-entry squared error between the data and the ring reconstruction.
pub fn masked_loss(m: &MaskedTensor, cores: &TrCores) -> Result<f64> {
    if m.shape() != cores.extents().as_slice() {
        return Err(Error::ShapeMismatch { left: m.shape().to_vec(), right: cores.extents() });
    }
    let x = crate::ring::tr_reconstruct(cores);
    let mut acc = 0.0;
    for (off, (&v, &xv)) in m.values().data().iter().zip(x.data()).enumerate() {
        if m.is_observed_at(off) {
            let d = v - xv;
            acc += d * d;
        }
    }
    Ok(acc)
}

pub(crate) struct StepMats {
    pub z_new: DMatrix<f64>,
    pub gradient: DMatrix<f64>,
    pub direction: DMatrix<f64>,
    pub step_size: f64,
}

/// One scaled-steepest-descent update of core `k` given the mode-k cyclic
/// unfoldings of the data and mask. Returns the new core matricization along
/// with the pieces the caller may want to inspect.
pub(crate) fn ssd_step_on_unfolded(
    m_unf: &DMatrix<f64>,
    p_unf: &DMatrix<f64>,
    cores: &TrCores,
    k: usize,
    epsilon_scale: f64,
    madds: &mut u64,
) -> Result<StepMats> {
    let sub = subchain_merge(cores, k)?;
    {
        let n = cores.num_modes();
        let order: Vec<usize> = (1..n).map(|d| (k - 1 + d) % n).collect();
        let chain: Vec<&DenseTensor> = order.iter().map(|&j| cores.core(j + 1)).collect();
        *madds += merge_chain_cost(&chain);
    }
    let u = subchain_unfolded(&sub);
    let z = core_unfolded(cores.core(k));
    let rows = z.nrows();
    let r2 = z.ncols();
    let j = u.nrows();

    // Residual on observed entries.
    *madds += (rows * r2 * j) as u64;
    let x = &z * u.transpose();
    let mut resid = m_unf - &x;
    resid.component_mul_assign(p_unf);

    // A residual at roundoff scale is a perfect fit: the gradient is zero up
    // to floating error and the line-search ratio would be 0/0.
    let resid_norm = resid.norm();
    let scale = {
        let mut masked_m = m_unf.clone();
        masked_m.component_mul_assign(p_unf);
        let mut masked_x = x;
        masked_x.component_mul_assign(p_unf);
        masked_m.norm().max(masked_x.norm())
    };
    if resid_norm <= 1e-13 * scale {
        let zero = DMatrix::zeros(rows, r2);
        return Ok(StepMats { z_new: z, gradient: zero.clone(), direction: zero, step_size: 0.0 });
    }

    // Gradient of the observed squared error w.r.t. the core matricization.
    *madds += (rows * j * r2) as u64;
    let gradient = -2.0 * (&resid * &u);

    // Scaling Gram matrix, regularized and solved by Cholesky. If the Gram
    // is numerically singular at this scale the jitter is escalated; any SPD
    // scaling keeps the step a descent direction.
    *madds += (j * r2 * r2) as u64;
    let gram = u.tr_mul(&u);
    let mut jitter = epsilon_scale;
    let chol = loop {
        let mut g = gram.clone();
        for d in 0..r2 {
            g[(d, d)] += jitter;
        }
        match Cholesky::new(g) {
            Some(c) => break c,
            None => {
                jitter *= 1e3;
                let scale = gram.diagonal().amax().max(1.0);
                if jitter > scale {
                    return Err(Error::Numeric(
                        "scaling Gram matrix is not positive definite".into(),
                    ));
                }
            }
        }
    };
    *madds += (r2 * r2 * r2 / 3) as u64;
    let direction = chol.solve(&gradient.transpose()).transpose();
    *madds += (rows * r2 * r2) as u64;

    // Exact line search along the direction: the loss is quadratic in the
    // step length, masked to observed entries.
    *madds += (rows * r2 * j) as u64;
    let mut h = &direction * u.transpose();
    h.component_mul_assign(p_unf);
    let den: f64 = h.iter().map(|v| v * v).sum();
    *madds += 2 * (rows * j) as u64;
    if den <= f64::MIN_POSITIVE {
        // Perfect fit (zero gradient) or direction invisible on the mask:
        // the step length is 0/0, so skip the update.
        return Ok(StepMats { z_new: z, gradient, direction, step_size: 0.0 });
    }
    let num: f64 = resid.iter().zip(h.iter()).map(|(a, b)| a * b).sum();
    let mu = -num / den;
    let z_new = &z - mu * &direction;
    Ok(StepMats { z_new, gradient, direction, step_size: mu })
}

fn unfold_to_matrix(t: &DenseTensor, k: usize) -> Result<DMatrix<f64>> {
    let unf = mode_unfold_bracket(t, k)?;
    let (r, c) = (unf.shape()[0], unf.shape()[1]);
    Ok(DMatrix::from_column_slice(r, c, unf.data()))
}

fn check_data_against_cores(m: &MaskedTensor, cores: &TrCores) -> Result<()> {
    if m.shape() != cores.extents().as_slice() {
        return Err(Error::ShapeMismatch { left: m.shape().to_vec(), right: cores.extents() });
    }
    Ok(())
}

/// Everything produced by one SSD core update, for callers that want to
/// inspect the search direction or re-evaluate the line search.
#[derive(Debug, Clone)]
pub struct SsdStepDetail {
    pub updated: TrCores,
    /// Gradient of the observed squared error w.r.t. the mode-2 natural
    /// unfolding of core `k` (an `I_k x r_k r_{k+1}` matrix).
    pub gradient: DenseTensor,
    /// Scaled descent direction, same layout as `gradient`.
    pub direction: DenseTensor,
    /// Exact line-search step length (0 when the step was skipped).
    pub step_size: f64,
}

/// Applies one scaled-steepest-descent update to core `k` (1-based).
pub fn ssd_core_step(
    m: &MaskedTensor,
    cores: &TrCores,
    k: usize,
    params: &SsdParams,
) -> Result<TrCores> {
    Ok(ssd_core_step_detailed(m, cores, k, params)?.updated)
}

/// As [`ssd_core_step`], returning the gradient, direction and step length.
pub fn ssd_core_step_detailed(
    m: &MaskedTensor,
    cores: &TrCores,
    k: usize,
    params: &SsdParams,
) -> Result<SsdStepDetail> {
    check_data_against_cores(m, cores)?;
    let m_unf = unfold_to_matrix(m.values(), k)?;
    let p_unf = unfold_to_matrix(m.mask(), k)?;
    let mut madds = 0u64;
    let step = ssd_step_on_unfolded(&m_unf, &p_unf, cores, k, params.epsilon_scale, &mut madds)?;
    let core = cores.core(k);
    let (ra, i, rb) = (core.shape()[0], core.shape()[1], core.shape()[2]);
    let mut updated = cores.clone();
    updated.replace_core(k, core_folded(&step.z_new, ra, i, rb))?;
    let to_tensor = |mat: &DMatrix<f64>| {
        DenseTensor::from_vec(&[mat.nrows(), mat.ncols()], mat.as_slice().to_vec()).unwrap()
    };
    Ok(SsdStepDetail {
        updated,
        gradient: to_tensor(&step.gradient),
        direction: to_tensor(&step.direction),
        step_size: step.step_size,
    })
}

/// Random initialization around the data's mean component.
///
/// The leading rank slot of every core is seeded so the initial
/// reconstruction carries the observed mean; zero-mean noise with standard
/// deviation `(sigma / r)^{1/N}` is layered on top. Starting inside the
/// dominant component's basin avoids the sign-locked local minima a pure
/// zero-mean start falls into on data with a strong constant part, which is
/// every pixel patch.
fn init_cores(m: &MaskedTensor, rank: usize, seed: u64) -> TrCores {
    let shape = m.shape();
    let n = shape.len() as f64;
    let count = m.observed_count() as f64;
    let mean = m.observed_values().sum::<f64>() / count;
    let var = m.observed_values().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let sigma = var.sqrt();
    // Constant observations leave nothing for the noise scale; seed the mean
    // and keep the symmetry-breaking noise small in core space.
    let noise_std =
        if sigma > 1e-12 { (sigma / rank as f64).powf(1.0 / n) } else { 1e-3 };
    let dc = mean.abs().powf(1.0 / n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_std).expect("positive std");
    let cores: Vec<DenseTensor> = shape
        .iter()
        .enumerate()
        .map(|(k, &extent)| {
            let len = rank * extent * rank;
            let data: Vec<f64> = (0..len).map(|_| normal.sample(&mut rng)).collect();
            let mut core = DenseTensor::from_vec(&[rank, extent, rank], data).unwrap();
            let lead = if k == 0 { mean.signum() * dc } else { dc };
            for i in 0..extent {
                let v = core.get(&[0, i, 0]);
                core.set(&[0, i, 0], v + lead);
            }
            core
        })
        .collect();
    TrCores::new(cores).expect("equal ranks are ring-consistent")
}

fn validate_completion_input(m: &MaskedTensor) -> Result<()> {
    if m.observed_count() == 0 {
        return Err(Error::NoObservations);
    }
    if m.observed_values().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Batch completion: random core initialization, then full sweeps of SSD
/// updates until the stopping rule fires. Returns the cores and the final
/// reconstruction. Deterministic in `seed`.
pub fn trssd_complete(
    m: &MaskedTensor,
    rank: usize,
    stop: &BatchStopCriteria,
    seed: u64,
) -> Result<(TrCores, DenseTensor)> {
    let (cores, recon, _) = trssd_complete_with_cost(m, rank, stop, seed)?;
    Ok((cores, recon))
}

/// As [`trssd_complete`], also returning the multiply-add count of all core
/// updates and reconstructions performed.
pub fn trssd_complete_with_cost(
    m: &MaskedTensor,
    rank: usize,
    stop: &BatchStopCriteria,
    seed: u64,
) -> Result<(TrCores, DenseTensor, u64)> {
    stop.validate()?;
    if rank == 0 {
        return Err(Error::InvalidConfig("rank must be at least 1".into()));
    }
    validate_completion_input(m)?;

    let n = m.shape().len();
    let mut cores = init_cores(m, rank, seed);
    let mut madds = 0u64;

    // The unfolded data and mask are reused by every sweep.
    let mut unfolds = Vec::with_capacity(n);
    for k in 1..=n {
        unfolds.push((unfold_to_matrix(m.values(), k)?, unfold_to_matrix(m.mask(), k)?));
    }

    let mut x_prev = reconstruct_counted(&cores, &mut madds);
    for _sweep in 0..stop.max_sweeps {
        for k in 1..=n {
            let (m_unf, p_unf) = &unfolds[k - 1];
            let step = ssd_step_on_unfolded(m_unf, p_unf, &cores, k, 1e-10, &mut madds)?;
            let core = cores.core(k);
            let (ra, i, rb) = (core.shape()[0], core.shape()[1], core.shape()[2]);
            cores.replace_core(k, core_folded(&step.z_new, ra, i, rb))?;
        }
        let x = reconstruct_counted(&cores, &mut madds);
        let diff = x
            .data()
            .iter()
            .zip(x_prev.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let denom = x_prev.frobenius();
        x_prev = x;
        let rel = if denom > 0.0 {
            diff / denom
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if rel < stop.tolerance {
            break;
        }
    }
    Ok((cores, x_prev, madds))
}
