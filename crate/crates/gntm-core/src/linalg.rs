//! Slice-level matrix/vector helpers for the layer code.
//!
//! Shapes are validated once at the layer boundary; these helpers assert in
//! debug builds and run tight loops with a fixed summation order.

use crate::tensor::Tensor;

/// y = W x + b, W is out x in.
pub fn matvec_bias(w: &Tensor, b: &Tensor, x: &[f64], y: &mut [f64]) {
    let (rows, cols) = (w.rows(), w.cols());
    debug_assert_eq!(cols, x.len());
    debug_assert_eq!(rows, y.len());
    debug_assert_eq!(rows, b.len());
    let wd = w.data();
    let bd = b.data();
    for i in 0..rows {
        let row = &wd[i * cols..(i + 1) * cols];
        let mut acc = bd[i];
        for j in 0..cols {
            acc += row[j] * x[j];
        }
        y[i] = acc;
    }
}

/// dx += W^T dy.
pub fn matvec_t_accum(w: &Tensor, dy: &[f64], dx: &mut [f64]) {
    let (rows, cols) = (w.rows(), w.cols());
    debug_assert_eq!(rows, dy.len());
    debug_assert_eq!(cols, dx.len());
    let wd = w.data();
    for i in 0..rows {
        let row = &wd[i * cols..(i + 1) * cols];
        let d = dy[i];
        for j in 0..cols {
            dx[j] += row[j] * d;
        }
    }
}

/// gW += dy (outer) x.
pub fn outer_accum(gw: &mut Tensor, dy: &[f64], x: &[f64]) {
    let (rows, cols) = (gw.rows(), gw.cols());
    debug_assert_eq!(rows, dy.len());
    debug_assert_eq!(cols, x.len());
    let gd = gw.data_mut();
    for i in 0..rows {
        let row = &mut gd[i * cols..(i + 1) * cols];
        let d = dy[i];
        for j in 0..cols {
            row[j] += d * x[j];
        }
    }
}

/// acc += v elementwise.
pub fn add_accum(acc: &mut [f64], v: &[f64]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, &b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
