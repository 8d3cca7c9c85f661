//! Tensor-ring cores and the contraction identities built on them.
//!
//! A ring of N cores `Z_k` of shape `r_k x I_k x r_{k+1}` (with `r_{N+1} =
//! r_1`) represents the tensor whose entries are traces of products of core
//! slices. The workhorse here is the merged subchain: the product of all
//! cores except one, whose mode-2 unfolding linearizes the tensor in the
//! remaining core.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::{mode_fold_bracket, DenseTensor};

/// Ordered ring of 3-way cores with consistent bond ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrCores {
    cores: Vec<DenseTensor>,
}

impl TrCores {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidCores("core list is empty".into()));
        }
        for (k, core) in cores.iter().enumerate() {
            if core.ndim() != 3 {
                return Err(Error::InvalidCores(format!(
                    "core {} has {} modes, expected 3",
                    k + 1,
                    core.ndim()
                )));
            }
            let next = &cores[(k + 1) % cores.len()];
            if core.shape()[2] != next.shape()[0] {
                return Err(Error::InvalidCores(format!(
                    "core {} has back rank {} but core {} has front rank {}",
                    k + 1,
                    core.shape()[2],
                    (k + 1) % cores.len() + 1,
                    next.shape()[0]
                )));
            }
        }
        Ok(Self { cores })
    }

    pub fn num_modes(&self) -> usize {
        self.cores.len()
    }

    /// Bond ranks `[r_1, ..., r_N]`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[0]).collect()
    }

    /// Mode extents `[I_1, ..., I_N]`.
    pub fn extents(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Core for 1-based mode `k`.
    pub fn core(&self, k: usize) -> &DenseTensor {
        &self.cores[k - 1]
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    /// All cores except the last; the tail mode is the temporal one in the
    /// streaming setting.
    pub fn spatial(&self) -> &[DenseTensor] {
        &self.cores[..self.cores.len() - 1]
    }

    pub fn replace_core(&mut self, k: usize, core: DenseTensor) -> Result<()> {
        let old = &self.cores[k - 1];
        if core.shape() != old.shape() {
            return Err(Error::InvalidCores(format!(
                "replacement core for mode {k} has shape {:?}, expected {:?}",
                core.shape(),
                old.shape()
            )));
        }
        self.cores[k - 1] = core;
        Ok(())
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }
}

/// Merges a consistent chain of cores into one 3-way tensor
/// `(r_front, prod of extents, r_back)`, appending each new mode as the
/// slower-varying merged index.
///
/// Both the full-ring contraction and the excluded-mode subchain reduce to
/// this; the chain is only required to be adjacent-consistent.
pub(crate) fn merge_chain(chain: &[&DenseTensor]) -> DenseTensor {
    assert!(!chain.is_empty());
    let mut merged = chain[0].clone();
    for core in &chain[1..] {
        let (ra, j, rb) = dims3(&merged);
        let (rb2, i, rc) = dims3(core);
        debug_assert_eq!(rb, rb2);
        // (ra*j x rb) . (rb x i*rc), both column-major views of the buffers
        let left = DMatrix::from_column_slice(ra * j, rb, merged.data());
        let right = DMatrix::from_column_slice(rb, i * rc, core.data());
        let prod = left * right;
        let data: Vec<f64> = prod.as_slice().to_vec();
        merged = DenseTensor::from_vec(&[ra, j * i, rc], data).expect("merge shape");
    }
    merged
}

fn dims3(t: &DenseTensor) -> (usize, usize, usize) {
    let s = t.shape();
    (s[0], s[1], s[2])
}

/// Number of multiply-adds a [`merge_chain`] over the same cores performs.
pub(crate) fn merge_chain_cost(chain: &[&DenseTensor]) -> u64 {
    if chain.is_empty() {
        return 0;
    }
    let (ra, mut j, mut rb) = dims3(chain[0]);
    let mut cost = 0u64;
    for core in &chain[1..] {
        let (_, i, rc) = dims3(core);
        cost += (ra * j) as u64 * rb as u64 * (i * rc) as u64;
        j *= i;
        rb = rc;
    }
    cost
}

/// Merged subchain of all cores except mode `k` (1-based): a 3-way tensor of
/// shape `r_{k+1} x prod_{j != k} I_j x r_k` whose slice at the cyclic merged
/// index `(i_{k+1}, ..., i_N, i_1, ..., i_{k-1})` is the matching product of
/// core slices.
pub fn subchain_merge(cores: &TrCores, k: usize) -> Result<DenseTensor> {
    let n = cores.num_modes();
    if k == 0 || k > n {
        return Err(Error::ModeOutOfRange { mode: k, ndim: n });
    }
    let order: Vec<usize> = (1..n).map(|d| (k - 1 + d) % n).collect();
    if order.is_empty() {
        // Single-core ring: the empty product is the r x 1 x r identity.
        let r = cores.core(1).shape()[0];
        let mut id = DenseTensor::zeros(&[r, 1, r]);
        for a in 0..r {
            id.set(&[a, 0, a], 1.0);
        }
        return Ok(id);
    }
    let chain: Vec<&DenseTensor> = order.iter().map(|&j| &cores.cores[j]).collect();
    Ok(merge_chain(&chain))
}

/// Mode-2 cyclic unfolding of a merged subchain `(r_front, J, r_back)` laid
/// out as a `J x (r_back * r_front)` matrix with the back rank varying
/// fastest along columns. This is the factor that multiplies the core's
/// mode-2 unfolding in the ring identity.
pub(crate) fn subchain_unfolded(sub: &DenseTensor) -> DMatrix<f64> {
    let (rf, j, rb) = dims3(sub);
    let mut out = DMatrix::zeros(j, rb * rf);
    let data = sub.data();
    for c in 0..rb {
        for a in 0..rf {
            let col = c + a * rb;
            for row in 0..j {
                out[(row, col)] = data[a + row * rf + c * rf * j];
            }
        }
    }
    out
}

/// Mode-2 natural unfolding of a core `(r_k, I_k, r_{k+1})` as an
/// `I_k x (r_k * r_{k+1})` matrix, front rank fastest along columns.
pub(crate) fn core_unfolded(core: &DenseTensor) -> DMatrix<f64> {
    let (ra, i, rb) = dims3(core);
    let mut out = DMatrix::zeros(i, ra * rb);
    let data = core.data();
    for b in 0..rb {
        for a in 0..ra {
            let col = a + b * ra;
            for row in 0..i {
                out[(row, col)] = data[a + row * ra + b * ra * i];
            }
        }
    }
    out
}

/// Inverse of [`core_unfolded`]: packs an `I_k x (r_k * r_{k+1})` matrix back
/// into a `(r_k, I_k, r_{k+1})` core.
pub(crate) fn core_folded(mat: &DMatrix<f64>, ra: usize, i: usize, rb: usize) -> DenseTensor {
    debug_assert_eq!(mat.nrows(), i);
    debug_assert_eq!(mat.ncols(), ra * rb);
    let mut out = DenseTensor::zeros(&[ra, i, rb]);
    for b in 0..rb {
        for a in 0..ra {
            let col = a + b * ra;
            for row in 0..i {
                out.set(&[a, row, b], mat[(row, col)]);
            }
        }
    }
    out
}

/// Reconstructs the full tensor represented by the ring.
pub fn tr_reconstruct(cores: &TrCores) -> DenseTensor {
    reconstruct_counted(cores, &mut 0)
}

/// Reconstruction that also tallies multiply-adds into `madds`.
pub(crate) fn reconstruct_counted(cores: &TrCores, madds: &mut u64) -> DenseTensor {
    let extents = cores.extents();
    let n = cores.num_modes();
    // Contract through the subchain that excludes the largest mode: the
    // intermediate then has prod/I_max * r^2 entries instead of prod * r^2.
    let k = extents
        .iter()
        .enumerate()
        .max_by_key(|(_, &e)| e)
        .map(|(i, _)| i + 1)
        .unwrap();
    let sub = subchain_merge(cores, k).expect("mode in range");
    {
        let order: Vec<usize> = (1..n).map(|d| (k - 1 + d) % n).collect();
        let chain: Vec<&DenseTensor> = order.iter().map(|&j| &cores.cores[j]).collect();
        if !chain.is_empty() {
            *madds += merge_chain_cost(&chain);
        }
    }
    let u = subchain_unfolded(&sub);
    let z = core_unfolded(cores.core(k));
    *madds += (z.nrows() * z.ncols() * u.nrows()) as u64;
    let x_unf = &z * u.transpose();
    let mat = DenseTensor::from_vec(&[x_unf.nrows(), x_unf.ncols()], x_unf.as_slice().to_vec())
        .expect("unfold shape");
    mode_fold_bracket(&mat, k, &extents).expect("fold shape")
}
