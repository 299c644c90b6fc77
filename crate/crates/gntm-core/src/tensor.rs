//! Minimal dense f64 tensor kernel.
//!
//! Row-major storage, no broadcasting beyond scalar, fixed loop order so
//! every operation is bit-reproducible. Any NaN/Inf produced by a public
//! operation surfaces as an error instead of propagating silently.

use crate::error::{Error, Result};

/// Dense row-major 64-bit float array (1D/2D/3D).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.check_finite("new")?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Tensor { shape: vec![n], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    /// Row `i` of a 2-D tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.shape[1];
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.shape[1];
        &mut self.data[i * c..(i + 1) * c]
    }

    fn check_finite(&self, op: &str) -> Result<()> {
        for &v in &self.data {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{op} produced {v}")));
            }
        }
        Ok(())
    }

    /// Standard matrix product. Fixed i-k-j loop order; sequential summation.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 {
            return Err(Error::Shape(format!(
                "matmul needs 2-D tensors, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                let brow = &other.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += a * brow[j];
                }
            }
        }
        let t = Tensor { shape: vec![m, n], data: out };
        t.check_finite("matmul")?;
        Ok(t)
    }

    fn binary(&self, other: &Tensor, op: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{op}: shapes {:?} and {:?} differ",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        let t = Tensor { shape: self.shape.clone(), data };
        t.check_finite(op)?;
        Ok(t)
    }

    fn unary(&self, op: &str, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let data = self.data.iter().map(|&a| f(a)).collect();
        let t = Tensor { shape: self.shape.clone(), data };
        t.check_finite(op)?;
        Ok(t)
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "sub", |a, b| a - b)
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Tensor> {
        self.unary("scale", |a| a * c)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Tensor> {
        self.unary("add_scalar", |a| a + c)
    }

    pub fn sigmoid(&self) -> Result<Tensor> {
        self.unary("sigmoid", sigmoid)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        self.unary("tanh", f64::tanh)
    }

    pub fn relu(&self) -> Result<Tensor> {
        self.unary("relu", |a| a.max(0.0))
    }

    pub fn exp(&self) -> Result<Tensor> {
        self.unary("exp", f64::exp)
    }

    pub fn log(&self) -> Result<Tensor> {
        for &v in &self.data {
            if v <= 0.0 {
                return Err(Error::Domain(format!("log of non-positive value {v}")));
            }
        }
        self.unary("log", f64::ln)
    }

    /// Concatenate along `axis`. All other dimensions must match; `self`'s
    /// block comes first.
    pub fn concat(&self, other: &Tensor, axis: usize) -> Result<Tensor> {
        if self.shape.len() != other.shape.len() {
            return Err(Error::Shape(format!(
                "concat: ranks {} and {} differ",
                self.shape.len(),
                other.shape.len()
            )));
        }
        if axis >= self.shape.len() {
            return Err(Error::Shape(format!(
                "concat: axis {axis} out of range for rank {}",
                self.shape.len()
            )));
        }
        for (d, (&a, &b)) in self.shape.iter().zip(&other.shape).enumerate() {
            if d != axis && a != b {
                return Err(Error::Shape(format!(
                    "concat: shapes {:?} and {:?} differ off axis {axis}",
                    self.shape, other.shape
                )));
            }
        }
        let mut shape = self.shape.clone();
        shape[axis] += other.shape[axis];

        // Treat the tensor as outer x axis x inner blocks.
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let a_axis = self.shape[axis];
        let b_axis = other.shape[axis];
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            let a_start = o * a_axis * inner;
            data.extend_from_slice(&self.data[a_start..a_start + a_axis * inner]);
            let b_start = o * b_axis * inner;
            data.extend_from_slice(&other.data[b_start..b_start + b_axis * inner]);
        }
        Ok(Tensor { shape, data })
    }

    pub fn identity(n: usize) -> Tensor {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
