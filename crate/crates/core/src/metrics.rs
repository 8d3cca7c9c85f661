//! Recovery metrics and the temporal-subspace diagnostic.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::tensor::{mode_unfold_bracket, DenseTensor};

/// Peak signal-to-noise ratio in dB with peak 1.0 over all channels.
/// Identical inputs give positive infinity.
pub fn psnr(reference: &Frame, test: &Frame) -> Result<f64> {
    psnr_dense(reference.data().values(), test.data().values())
}

/// PSNR between two same-shape dense tensors on the `[0, 1]` scale.
pub fn psnr_dense(reference: &DenseTensor, test: &DenseTensor) -> Result<f64> {
    if reference.shape() != test.shape() {
        return Err(Error::ShapeMismatch {
            left: reference.shape().to_vec(),
            right: test.shape().to_vec(),
        });
    }
    let mse: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(10.0 * (1.0 / mse).log10())
    }
}

/// Normalized singular values of the temporal (mode-4) unfolding of a stack,
/// descending and divided by the largest. Flat spectra mean the temporal
/// subspace barely moves; heavy tails mean it drifts.
pub fn subspace_diagnostic(stack: &DenseTensor) -> Result<Vec<f64>> {
    if stack.ndim() != 4 {
        return Err(Error::InvalidShape(format!(
            "diagnostic expects a 4-way stack, got {:?}",
            stack.shape()
        )));
    }
    let unf = mode_unfold_bracket(stack, 4)?;
    let mat = DMatrix::from_column_slice(unf.shape()[0], unf.shape()[1], unf.data());
    let mut values: Vec<f64> = mat.svd(false, false).singular_values.iter().copied().collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let top = values[0];
    if top <= 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.into_iter().map(|v| v / top).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn frame_of(values: DenseTensor) -> Frame {
        Frame::fully_observed(values).unwrap()
    }

    #[test]
    fn identical_frames_have_infinite_psnr() {
        let f = frame_of(DenseTensor::filled(&[4, 4, 1], 0.3));
        assert!(psnr(&f, &f).unwrap().is_infinite());
    }

    #[test]
    fn psnr_hand_values() {
        // Uniform difference 0.1 -> MSE 0.01 -> 20 dB.
        let a = frame_of(DenseTensor::filled(&[8, 8, 1], 0.5));
        let b = frame_of(DenseTensor::filled(&[8, 8, 1], 0.6));
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-12);
        // All zeros vs all ones -> MSE 1 -> 0 dB.
        let z = frame_of(DenseTensor::filled(&[4, 4, 3], 0.0));
        let o = frame_of(DenseTensor::filled(&[4, 4, 3], 1.0));
        assert_eq!(psnr(&z, &o).unwrap(), 0.0);
    }

    #[test]
    fn psnr_requires_matching_shapes() {
        let a = frame_of(DenseTensor::filled(&[4, 4, 1], 0.5));
        let b = frame_of(DenseTensor::filled(&[4, 5, 1], 0.5));
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn identical_stacked_frames_are_rank_one() {
        let stack = DenseTensor::from_fn(&[4, 4, 1, 5], |idx| ((idx[0] + idx[1]) % 3) as f64);
        let vals = subspace_diagnostic(&stack).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        for &v in &vals[1..] {
            assert!(v < 1e-12, "trailing value {v}");
        }
    }

    #[test]
    fn orthogonal_equal_norm_slices_have_a_flat_spectrum() {
        // Slice t is an indicator of position t: rows of the unfolding are
        // orthogonal with equal norms.
        let t = 4usize;
        let stack = DenseTensor::from_fn(&[2, 2, 1, t], |idx| {
            let pos = idx[0] + idx[1] * 2;
            if pos == idx[3] {
                1.0
            } else {
                0.0
            }
        });
        let vals = subspace_diagnostic(&stack).unwrap();
        assert_eq!(vals.len(), t);
        for &v in &vals {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    /// One-sided Jacobi SVD on the columns of the transposed unfolding, an
    /// implementation independent of the library path.
    fn jacobi_singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
        // data: column-major rows x cols matrix; orthogonalize the `rows`
        // columns of its transpose (each of length `cols`).
        let mut v: Vec<Vec<f64>> = (0..rows)
            .map(|r| (0..cols).map(|c| data[r + c * rows]).collect())
            .collect();
        for _ in 0..60 {
            let mut off = 0.0f64;
            for i in 0..rows {
                for j in i + 1..rows {
                    let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
                    for k in 0..cols {
                        a += v[i][k] * v[i][k];
                        b += v[j][k] * v[j][k];
                        g += v[i][k] * v[j][k];
                    }
                    off += g.abs();
                    if g.abs() <= 1e-300 {
                        continue;
                    }
                    let zeta = (b - a) / (2.0 * g);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for k in 0..cols {
                        let (vi, vj) = (v[i][k], v[j][k]);
                        v[i][k] = c * vi - s * vj;
                        v[j][k] = s * vi + c * vj;
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
        }
        let mut sv: Vec<f64> =
            v.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    #[test]
    fn random_stack_matches_jacobi_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let stack = DenseTensor::from_fn(&[5, 4, 3, 6], |_| rng.gen_range(-1.0..1.0));
        let got = subspace_diagnostic(&stack).unwrap();
        let unf = mode_unfold_bracket(&stack, 4).unwrap();
        let oracle = jacobi_singular_values(unf.shape()[0], unf.shape()[1], unf.data());
        let top = oracle[0];
        assert_eq!(got.len(), oracle.len());
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o / top).abs() < 1e-10, "{g} vs {}", o / top);
        }
    }

    #[test]
    fn diagnostic_requires_four_way_stacks() {
        assert!(subspace_diagnostic(&DenseTensor::zeros(&[3, 3, 3])).is_err());
    }

    #[test]
    fn zero_stack_yields_zero_spectrum() {
        let vals = subspace_diagnostic(&DenseTensor::zeros(&[2, 2, 1, 3])).unwrap();
        assert!(vals.iter().all(|&v| v == 0.0));
    }
}
