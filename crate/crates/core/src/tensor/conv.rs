//! Direct 2D convolution and its adjoint.
//!
//! Both kernels loop over the entries of the smaller operand and stream
//! rows of the larger one, which keeps the inner loops contiguous.

use super::grid::{Grid2, Shape};
use crate::error::{Error, Result};

/// Linear (zero-padded) full convolution, shape `(a.h + b.h - 1, a.w + b.w - 1)`.
pub fn conv_full(a: &Grid2, b: &Grid2) -> Result<Grid2> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("conv_full of an empty grid"));
    }
    let shape = a.shape().full_with(b.shape());
    let mut out = vec![0.0; shape.len()];
    conv_full_acc(&mut out, shape, a, b);
    Ok(Grid2::from_raw(shape, out))
}

/// Adds `conv_full(a, b)` into `out`, which must have the full extent.
pub(crate) fn conv_full_acc(out: &mut [f64], out_shape: Shape, a: &Grid2, b: &Grid2) {
    debug_assert_eq!(out_shape, a.shape().full_with(b.shape()));
    let (kernel, signal) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let oc = out_shape.cols;
    let sc = signal.cols();
    for p in 0..kernel.rows() {
        for (q, &w) in kernel.row(p).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..signal.rows() {
                let start = (i + p) * oc + q;
                axpy(&mut out[start..start + sc], w, signal.row(i));
            }
        }
    }
}

/// Cross-correlation over fully overlapping positions,
/// shape `(a.h - b.h + 1, a.w - b.w + 1)`.
///
/// This is the adjoint of [`conv_full`] in its second argument:
/// `<conv_full(f, z), r> == <z, corr_valid(r, f)>`.
pub fn corr_valid(a: &Grid2, b: &Grid2) -> Result<Grid2> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("corr_valid of an empty grid"));
    }
    let shape = a
        .shape()
        .map_for(b.shape())
        .ok_or_else(|| Error::shape(format!("corr_valid: {} does not fit in {}", b.shape(), a.shape())))?;
    let mut out = vec![0.0; shape.len()];
    corr_valid_acc(&mut out, shape, a, b);
    Ok(Grid2::from_raw(shape, out))
}

/// Adds `corr_valid(a, b)` into `out`.
pub(crate) fn corr_valid_acc(out: &mut [f64], out_shape: Shape, a: &Grid2, b: &Grid2) {
    let (oh, ow) = (out_shape.rows, out_shape.cols);
    debug_assert_eq!(out_shape, a.shape().map_for(b.shape()).unwrap());
    if b.len() <= out_shape.len() {
        // small kernel: one axpy per kernel tap and output row
        for p in 0..b.rows() {
            for (q, &w) in b.row(p).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for i in 0..oh {
                    axpy(&mut out[i * ow..(i + 1) * ow], w, &a.row(i + p)[q..q + ow]);
                }
            }
        }
    } else {
        // small output (filter gradients): one long dot product per entry
        let bc = b.cols();
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0;
                for p in 0..b.rows() {
                    acc += dot(&a.row(i + p)[j..j + bc], b.row(p));
                }
                out[i * ow + j] += acc;
            }
        }
    }
}

#[inline]
fn axpy(dst: &mut [f64], w: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += w * s;
    }
}

/// Four-lane dot product so the reduction vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            lanes[l] += x[l] * y[l];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(rows: &[&[f64]]) -> Grid2 {
        Grid2::from_rows(rows).unwrap()
    }

    #[test]
    fn conv_full_small_cases() {
        let out = conv_full(&g(&[&[1.0, 2.0]]), &g(&[&[1.0, 1.0, 1.0]])).unwrap();
        assert_eq!(out, g(&[&[1.0, 3.0, 3.0, 2.0]]));

        let a = g(&[&[1.0, -2.0, 0.5], &[3.0, 4.0, -1.0]]);
        assert_eq!(conv_full(&a, &g(&[&[1.0]])).unwrap(), a);
        assert_eq!(conv_full(&g(&[&[1.0]]), &a).unwrap(), a);
    }

    #[test]
    fn corr_valid_small_cases() {
        let out = corr_valid(&g(&[&[1.0, 2.0, 3.0]]), &g(&[&[1.0, 1.0]])).unwrap();
        assert_eq!(out, g(&[&[3.0, 5.0]]));

        let a = g(&[&[1.0, -2.0, 0.5], &[3.0, 4.0, -1.0]]);
        assert_eq!(corr_valid(&a, &g(&[&[1.0]])).unwrap(), a);
    }

    #[test]
    fn corr_valid_both_paths_agree() {
        // same sums through the axpy path (small kernel) and the dot path
        let a = Grid2::from_fn(Shape::new(7, 9), |r, c| ((r * 31 + c * 17) % 11) as f64 - 5.0);
        let b = Grid2::from_fn(Shape::new(5, 6), |r, c| ((r * 7 + c * 3) % 5) as f64 - 2.0);
        let out = corr_valid(&a, &b).unwrap();
        assert_eq!(out.shape(), Shape::new(3, 4));
        for i in 0..3 {
            for j in 0..4 {
                let mut s = 0.0;
                for p in 0..5 {
                    for q in 0..6 {
                        s += a.get(i + p, j + q) * b.get(p, q);
                    }
                }
                assert_eq!(out.get(i, j), s);
            }
        }
    }

    #[test]
    fn errors() {
        let a = g(&[&[1.0, 2.0]]);
        let b = g(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(corr_valid(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..11).map(f64::from).collect();
        assert_eq!(dot(&a, &a), (0..11).map(|i| (i * i) as f64).sum::<f64>());
    }
}
