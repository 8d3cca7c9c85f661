//! Dense N-way tensors and the two mode-k matricizations.
//!
//! Multi-indices are linearized first-index-fastest: entry `(i_1, ..., i_N)`
//! (0-based here) lives at offset `i_1 + i_2*I_1 + i_3*I_1*I_2 + ...`. Every
//! unfolding in this crate uses the same convention for its column
//! multi-index, which is what makes the ring-decomposition identities hold.

use crate::error::{Error, Result};

/// Dense real tensor backed by a single linear buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() {
        return Err(Error::InvalidShape("tensor must have at least one mode".into()));
    }
    if shape.iter().any(|&e| e == 0) {
        return Err(Error::InvalidShape(format!("zero extent in shape {shape:?}")));
    }
    Ok(())
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        check_shape(shape).expect("invalid tensor shape");
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if data.len() != len {
            return Err(Error::InvalidShape(format!(
                "buffer length {} does not match shape {:?} ({} entries)",
                data.len(),
                shape,
                len
            )));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Builds a tensor by evaluating `f` at every (0-based) multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = Self::zeros(shape);
        let mut idx = vec![0usize; shape.len()];
        for off in 0..t.data.len() {
            t.data[off] = f(&idx);
            increment(&mut idx, shape);
            let _ = off;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // shapes with zero extents are rejected at construction
    }

    /// Linear offset of a 0-based multi-index.
    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0usize;
        let mut stride = 1usize;
        for (&i, &e) in idx.iter().zip(&self.shape) {
            debug_assert!(i < e, "index {idx:?} out of bounds for shape {:?}", self.shape);
            off += i * stride;
            stride *= e;
        }
        off
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], value: f64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn hadamard(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { left: self.shape.clone(), right: other.shape.clone() });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(DenseTensor { shape: self.shape.clone(), data })
    }

    /// Reinterprets the buffer under a new shape with the same entry count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<DenseTensor> {
        check_shape(shape)?;
        let len: usize = shape.iter().product();
        if len != self.data.len() {
            return Err(Error::InvalidShape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }
}

/// Advances a 0-based odometer over `shape`, first index fastest.
#[inline]
pub(crate) fn increment(idx: &mut [usize], shape: &[usize]) {
    for d in 0..idx.len() {
        idx[d] += 1;
        if idx[d] < shape[d] {
            return;
        }
        idx[d] = 0;
    }
}

/// Dense tensor paired with a same-shape {0,1} observation mask.
///
/// Consumers ignore values at masked (0) positions; those entries may hold
/// anything finite.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedTensor {
    values: DenseTensor,
    mask: DenseTensor,
}

impl MaskedTensor {
    pub fn new(values: DenseTensor, mask: DenseTensor) -> Result<Self> {
        if values.shape() != mask.shape() {
            return Err(Error::ShapeMismatch {
                left: values.shape().to_vec(),
                right: mask.shape().to_vec(),
            });
        }
        if mask.data().iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::InvalidMask);
        }
        Ok(Self { values, mask })
    }

    /// Fully observed wrapper around a dense tensor.
    pub fn fully_observed(values: DenseTensor) -> Self {
        let mask = DenseTensor::filled(values.shape(), 1.0);
        Self { values, mask }
    }

    pub fn values(&self) -> &DenseTensor {
        &self.values
    }

    pub fn mask(&self) -> &DenseTensor {
        &self.mask
    }

    pub fn shape(&self) -> &[usize] {
        self.values.shape()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn is_observed_at(&self, offset: usize) -> bool {
        self.mask.data()[offset] != 0.0
    }

    pub fn observed_count(&self) -> usize {
        self.mask.data().iter().filter(|&&m| m != 0.0).count()
    }

    pub fn observed_fraction(&self) -> f64 {
        self.observed_count() as f64 / self.len() as f64
    }

    pub fn observed_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .data()
            .iter()
            .zip(self.mask.data())
            .filter(|(_, &m)| m != 0.0)
            .map(|(&v, _)| v)
    }

    /// Frobenius norm restricted to observed entries.
    pub fn masked_frobenius(&self) -> f64 {
        self.values
            .data()
            .iter()
            .zip(self.mask.data())
            .filter(|(_, &m)| m != 0.0)
            .map(|(&v, _)| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

fn check_mode(k: usize, ndim: usize) -> Result<usize> {
    if k == 0 || k > ndim {
        return Err(Error::ModeOutOfRange { mode: k, ndim });
    }
    Ok(k - 1)
}

/// Column-mode order for the cyclic (bracket) unfolding of mode `k0`:
/// `(i_{k+1}, ..., i_N, i_1, ..., i_{k-1})`, fastest first.
fn bracket_order(k0: usize, ndim: usize) -> Vec<usize> {
    (1..ndim).map(|d| (k0 + d) % ndim).collect()
}

/// Column-mode order for the natural (paren) unfolding of mode `k0`:
/// `(i_1, ..., i_{k-1}, i_{k+1}, ..., i_N)`, fastest first.
fn paren_order(k0: usize, ndim: usize) -> Vec<usize> {
    (0..ndim).filter(|&d| d != k0).collect()
}

/// Destination stride per source mode for an unfolding with row mode `k0`
/// and column modes `col_order` (fastest first).
fn unfold_strides(shape: &[usize], k0: usize, col_order: &[usize]) -> Vec<usize> {
    let mut strides = vec![0usize; shape.len()];
    strides[k0] = 1;
    let mut acc = shape[k0];
    for &j in col_order {
        strides[j] = acc;
        acc *= shape[j];
    }
    strides
}

fn unfold(x: &DenseTensor, k0: usize, col_order: &[usize]) -> DenseTensor {
    let rows = x.shape[k0];
    let cols = x.len() / rows;
    let strides = unfold_strides(&x.shape, k0, col_order);
    let mut out = vec![0.0; x.len()];
    let mut idx = vec![0usize; x.ndim()];
    let mut dst = 0usize;
    for src in 0..x.len() {
        out[dst] = x.data[src];
        // odometer step keeping dst in lockstep
        for d in 0..idx.len() {
            idx[d] += 1;
            dst += strides[d];
            if idx[d] < x.shape[d] {
                break;
            }
            dst -= x.shape[d] * strides[d];
            idx[d] = 0;
        }
    }
    DenseTensor { shape: vec![rows, cols], data: out }
}

fn fold(mat: &DenseTensor, k0: usize, shape: &[usize], col_order: &[usize]) -> Result<DenseTensor> {
    let rows = shape[k0];
    let total: usize = shape.iter().product();
    if mat.ndim() != 2 || mat.shape[0] != rows || mat.len() != total {
        return Err(Error::InvalidShape(format!(
            "matrix of shape {:?} cannot fold into {:?} at mode {}",
            mat.shape,
            shape,
            k0 + 1
        )));
    }
    let strides = unfold_strides(shape, k0, col_order);
    let mut out = vec![0.0; total];
    let mut idx = vec![0usize; shape.len()];
    let mut src = 0usize;
    for dst in 0..total {
        out[dst] = mat.data[src];
        for d in 0..idx.len() {
            idx[d] += 1;
            src += strides[d];
            if idx[d] < shape[d] {
                break;
            }
            src -= shape[d] * strides[d];
            idx[d] = 0;
        }
    }
    Ok(DenseTensor { shape: shape.to_vec(), data: out })
}

/// Cyclic mode-k unfolding: rows are mode k, columns run over
/// `(i_{k+1}, ..., i_N, i_1, ..., i_{k-1})` first-index-fastest. `k` is 1-based.
pub fn mode_unfold_bracket(x: &DenseTensor, k: usize) -> Result<DenseTensor> {
    let k0 = check_mode(k, x.ndim())?;
    Ok(unfold(x, k0, &bracket_order(k0, x.ndim())))
}

/// Inverse of [`mode_unfold_bracket`] for the given tensor shape.
pub fn mode_fold_bracket(mat: &DenseTensor, k: usize, shape: &[usize]) -> Result<DenseTensor> {
    check_shape(shape)?;
    let k0 = check_mode(k, shape.len())?;
    fold(mat, k0, shape, &bracket_order(k0, shape.len()))
}

/// Natural mode-k unfolding: rows are mode k, columns run over
/// `(i_1, ..., i_{k-1}, i_{k+1}, ..., i_N)` first-index-fastest. `k` is 1-based.
pub fn mode_unfold_paren(x: &DenseTensor, k: usize) -> Result<DenseTensor> {
    let k0 = check_mode(k, x.ndim())?;
    Ok(unfold(x, k0, &paren_order(k0, x.ndim())))
}

/// Inverse of [`mode_unfold_paren`] for the given tensor shape.
pub fn mode_fold_paren(mat: &DenseTensor, k: usize, shape: &[usize]) -> Result<DenseTensor> {
    check_shape(shape)?;
    let k0 = check_mode(k, shape.len())?;
    fold(mat, k0, shape, &paren_order(k0, shape.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iota(shape: &[usize]) -> DenseTensor {
        let len: usize = shape.iter().product();
        DenseTensor::from_vec(shape, (0..len).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn linearization_is_first_index_fastest() {
        let t = iota(&[2, 3, 4]);
        // offset (i,j,k) = i + 2j + 6k
        assert_eq!(t.get(&[1, 2, 3]), (1 + 2 * 2 + 6 * 3) as f64);
        assert_eq!(t.get(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn from_vec_rejects_bad_lengths() {
        assert!(DenseTensor::from_vec(&[2, 2], vec![0.0; 3]).is_err());
        assert!(DenseTensor::from_vec(&[], vec![]).is_err());
        assert!(DenseTensor::from_vec(&[2, 0], vec![]).is_err());
    }

    #[test]
    fn two_way_bracket_unfold_is_identity() {
        let t = iota(&[3, 5]);
        let u = mode_unfold_bracket(&t, 1).unwrap();
        assert_eq!(u, t);
    }

    #[test]
    fn bracket_unfold_matches_index_formula() {
        // Entry (2,3,4) of a 2x3x4 tensor lands at row 2, column 3+(4-1)*3 = 12
        // in 1-based terms; 0-based that is (1, 11).
        let t = iota(&[2, 3, 4]);
        let u = mode_unfold_bracket(&t, 1).unwrap();
        assert_eq!(u.shape(), &[2, 12]);
        assert_eq!(u.get(&[1, 11]), t.get(&[1, 2, 3]));
        // Exhaustive check against the index formula.
        for i1 in 0..2 {
            for i2 in 0..3 {
                for i3 in 0..4 {
                    let col = i2 + i3 * 3;
                    assert_eq!(u.get(&[i1, col]), t.get(&[i1, i2, i3]));
                }
            }
        }
        // k=2: columns are (i3, i1).
        let u2 = mode_unfold_bracket(&t, 2).unwrap();
        for i1 in 0..2 {
            for i2 in 0..3 {
                for i3 in 0..4 {
                    let col = i3 + i1 * 4;
                    assert_eq!(u2.get(&[i2, col]), t.get(&[i1, i2, i3]));
                }
            }
        }
    }

    #[test]
    fn paren_unfold_matches_index_formula() {
        // Entry (2,3,4), k=2: row 3, column 2+(4-1)*2 = 8 in 1-based terms.
        let t = iota(&[2, 3, 4]);
        let u = mode_unfold_paren(&t, 2).unwrap();
        assert_eq!(u.shape(), &[3, 8]);
        assert_eq!(u.get(&[2, 7]), t.get(&[1, 2, 3]));
        for i1 in 0..2 {
            for i2 in 0..3 {
                for i3 in 0..4 {
                    let col = i1 + i3 * 2;
                    assert_eq!(u.get(&[i2, col]), t.get(&[i1, i2, i3]));
                }
            }
        }
    }

    #[test]
    fn bracket_and_paren_agree_for_mode_one() {
        let t = iota(&[3, 4, 2, 2]);
        let a = mode_unfold_bracket(&t, 1).unwrap();
        let b = mode_unfold_paren(&t, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fold_inverts_unfold_bitwise() {
        let shapes: [&[usize]; 4] = [&[2, 3, 4], &[5], &[2, 2, 2, 3], &[4, 1, 3]];
        for shape in shapes {
            let t = iota(shape);
            for k in 1..=shape.len() {
                let ub = mode_unfold_bracket(&t, k).unwrap();
                let tb = mode_fold_bracket(&ub, k, shape).unwrap();
                assert_eq!(tb, t, "bracket round-trip failed for {shape:?} k={k}");
                let up = mode_unfold_paren(&t, k).unwrap();
                let tp = mode_fold_paren(&up, k, shape).unwrap();
                assert_eq!(tp, t, "paren round-trip failed for {shape:?} k={k}");
            }
        }
    }

    #[test]
    fn mode_out_of_range_is_an_error() {
        let t = iota(&[2, 3]);
        assert!(mode_unfold_bracket(&t, 0).is_err());
        assert!(mode_unfold_bracket(&t, 3).is_err());
        assert!(mode_unfold_paren(&t, 3).is_err());
    }

    #[test]
    fn frobenius_examples() {
        let z = DenseTensor::zeros(&[3, 3]);
        assert_eq!(z.frobenius(), 0.0);
        let ones = DenseTensor::filled(&[2, 2], 1.0);
        assert_eq!(ones.frobenius(), 2.0);
    }

    #[test]
    fn masked_frobenius_counts_only_observed() {
        let ones = DenseTensor::filled(&[2, 2], 1.0);
        let mask = DenseTensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let m = MaskedTensor::new(ones, mask).unwrap();
        assert!((m.masked_frobenius() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.observed_count(), 2);
    }

    #[test]
    fn mask_must_be_binary() {
        let v = DenseTensor::zeros(&[2, 2]);
        let bad = DenseTensor::filled(&[2, 2], 0.5);
        assert!(MaskedTensor::new(v.clone(), bad).is_err());
        let mismatched = DenseTensor::zeros(&[2, 3]);
        assert!(MaskedTensor::new(v, mismatched).is_err());
    }

    #[test]
    fn hadamard_requires_equal_shapes() {
        let a = iota(&[2, 3]);
        let b = iota(&[3, 2]);
        assert!(a.hadamard(&b).is_err());
        let c = a.hadamard(&a).unwrap();
        assert_eq!(c.get(&[1, 2]), a.get(&[1, 2]) * a.get(&[1, 2]));
    }
}
