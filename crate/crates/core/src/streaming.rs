//! Streaming tensor-ring completion: a closed-form ridge solve for the
//! temporal core followed by a single scaled-steepest-descent refresh of each
//! spatial core.
//!
//! The temporal mode is the last one. Its core decomposes into independent
//! per-slice least-squares problems against the unfolded merged spatial
//! subchain, so each slice is solved in closed form; the spatial cores then
//! get exactly one line-searched descent step each.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::batch::ssd_step_on_unfolded;
use crate::error::{Error, Result};
use crate::ring::{core_folded, merge_chain, merge_chain_cost, reconstruct_counted, subchain_unfolded, TrCores};
use crate::tensor::{mode_unfold_bracket, DenseTensor, MaskedTensor};

/// Ridge weight for the temporal slices plus the Gram regularizer shared
/// with the descent steps.
#[derive(Debug, Clone)]
pub struct StreamParams {
    pub gamma: f64,
    pub epsilon_scale: f64,
}

impl Default for StreamParams {
    fn default() -> Self {
        Self { gamma: 1e-5, epsilon_scale: 1e-10 }
    }
}

impl StreamParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 {
            return Err(Error::InvalidConfig("gamma must be nonnegative".into()));
        }
        if !(self.epsilon_scale > 0.0) {
            return Err(Error::InvalidConfig("epsilon_scale must be positive".into()));
        }
        Ok(())
    }
}

fn check_spatial_chain(m: &MaskedTensor, spatial: &[DenseTensor]) -> Result<()> {
    let n = m.shape().len();
    if n < 2 {
        return Err(Error::InvalidState("streaming update needs at least 2 modes".into()));
    }
    if spatial.len() != n - 1 {
        return Err(Error::InvalidState(format!(
            "expected {} spatial cores for a {}-way tensor, got {}",
            n - 1,
            n,
            spatial.len()
        )));
    }
    for (k, core) in spatial.iter().enumerate() {
        if core.ndim() != 3 {
            return Err(Error::InvalidCores(format!("spatial core {} is not 3-way", k + 1)));
        }
        if core.shape()[1] != m.shape()[k] {
            return Err(Error::InvalidState(format!(
                "spatial core {} covers extent {}, data has {}",
                k + 1,
                core.shape()[1],
                m.shape()[k]
            )));
        }
        if k + 1 < spatial.len() && core.shape()[2] != spatial[k + 1].shape()[0] {
            return Err(Error::InvalidCores(format!(
                "spatial cores {} and {} have mismatched bond ranks",
                k + 1,
                k + 2
            )));
        }
    }
    Ok(())
}

/// Solves the temporal core slice by slice. For each slice along the last
/// mode, the observed entries define a ridge least-squares problem in the
/// slice's vectorized core; a slice with no observations gets a zero vector,
/// the limit of the ridge solution as observations vanish.
pub fn solve_temporal_core(
    m: &MaskedTensor,
    spatial_cores: &[DenseTensor],
    params: &StreamParams,
) -> Result<DenseTensor> {
    solve_temporal_core_counted(m, spatial_cores, params, &mut 0)
}

pub(crate) fn solve_temporal_core_counted(
    m: &MaskedTensor,
    spatial_cores: &[DenseTensor],
    params: &StreamParams,
    madds: &mut u64,
) -> Result<DenseTensor> {
    params.validate()?;
    check_spatial_chain(m, spatial_cores)?;
    let n = m.shape().len();
    let slices = m.shape()[n - 1];
    let r_front = spatial_cores[0].shape()[0]; // r_1
    let r_back = spatial_cores[spatial_cores.len() - 1].shape()[2]; // r_N
    let width = r_back * r_front;

    let chain: Vec<&DenseTensor> = spatial_cores.iter().collect();
    *madds += merge_chain_cost(&chain);
    let merged = merge_chain(&chain);
    let u = subchain_unfolded(&merged); // J x (r_N * r_1), back rank fastest

    let m_unf = mode_unfold_bracket(m.values(), n)?;
    let p_unf = mode_unfold_bracket(m.mask(), n)?;

    let mut v = DenseTensor::zeros(&[r_back, slices, r_front]);
    for slice in 0..slices {
        let obs: Vec<usize> = (0..u.nrows())
            .filter(|&col| p_unf.get(&[slice, col]) != 0.0)
            .collect();
        if obs.is_empty() {
            continue; // zero vector
        }
        let mut b = DMatrix::zeros(obs.len(), width);
        let mut rhs = DVector::zeros(obs.len());
        for (row, &col) in obs.iter().enumerate() {
            for w in 0..width {
                b[(row, w)] = u[(col, w)];
            }
            rhs[row] = m_unf.get(&[slice, col]);
        }
        *madds += (obs.len() * width * width) as u64;
        let mut gram = b.tr_mul(&b);
        for d in 0..width {
            gram[(d, d)] += params.gamma;
        }
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::Numeric(format!(
                "temporal slice {slice}: normal equations are rank-deficient (gamma too small)"
            ))
        })?;
        *madds += (width * width * width / 3) as u64;
        *madds += (obs.len() * width) as u64;
        let bt_rhs = b.tr_mul(&rhs);
        *madds += (width * width) as u64;
        let sol = chol.solve(&bt_rhs);
        for c in 0..r_back {
            for a in 0..r_front {
                v.set(&[c, slice, a], sol[c + a * r_back]);
            }
        }
    }
    Ok(v)
}

/// One streaming update: recompute the temporal core in closed form, install
/// it as the last core, then apply one descent step to each spatial core in
/// order. Returns the full updated ring and its reconstruction.
pub fn strc_update(
    m: &MaskedTensor,
    spatial_cores: &[DenseTensor],
    params: &StreamParams,
) -> Result<(TrCores, DenseTensor)> {
    let (cores, recon, _) = strc_update_with_cost(m, spatial_cores, params)?;
    Ok((cores, recon))
}

/// As [`strc_update`], also returning the multiply-add count of the temporal
/// solve, the spatial refreshes and the final reconstruction.
pub fn strc_update_with_cost(
    m: &MaskedTensor,
    spatial_cores: &[DenseTensor],
    params: &StreamParams,
) -> Result<(TrCores, DenseTensor, u64)> {
    let mut madds = 0u64;
    let v = solve_temporal_core_counted(m, spatial_cores, params, &mut madds)?;
    let mut cores_vec: Vec<DenseTensor> = spatial_cores.to_vec();
    cores_vec.push(v);
    let mut cores = TrCores::new(cores_vec)?;

    let n = m.shape().len();
    for k in 1..n {
        let m_unf = mode_unfold_bracket(m.values(), k)?;
        let p_unf = mode_unfold_bracket(m.mask(), k)?;
        let m_mat = DMatrix::from_column_slice(m_unf.shape()[0], m_unf.shape()[1], m_unf.data());
        let p_mat = DMatrix::from_column_slice(p_unf.shape()[0], p_unf.shape()[1], p_unf.data());
        let step = ssd_step_on_unfolded(&m_mat, &p_mat, &cores, k, params.epsilon_scale, &mut madds)?;
        let core = cores.core(k);
        let (ra, i, rb) = (core.shape()[0], core.shape()[1], core.shape()[2]);
        cores.replace_core(k, core_folded(&step.z_new, ra, i, rb))?;
    }
    let recon = reconstruct_counted(&cores, &mut madds);
    Ok((cores, recon, madds))
}
