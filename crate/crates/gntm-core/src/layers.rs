//! GRU cell, dense layer and softmax, with forward and manual backward passes.
//!
//! The GRU follows the gate form
//!   z = sigmoid(W_z [h, x] + b_z)
//!   r = sigmoid(W_r [h, x] + b_r)
//!   h~ = tanh(W_h [r*h, x] + b_h)
//!   h' = (1 - z) * h + z * h~
//! with a single concatenated input [h_prev, x] per gate. Biases start at
//! zero, so the zero-bias configuration is the plain bias-free form.

use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// GRU weights: three gate matrices of shape units x (units + input_dim)
/// plus per-gate biases.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
    units: usize,
}

impl GruParams {
    pub fn zeros(units: usize, input_dim: usize) -> Self {
        let w = || Tensor::zeros(vec![units, units + input_dim]);
        let b = || Tensor::zeros(vec![units]);
        GruParams {
            w_z: w(),
            w_r: w(),
            w_h: w(),
            b_z: b(),
            b_r: b(),
            b_h: b(),
            units,
        }
    }

    /// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))), zero biases.
    pub fn glorot(units: usize, input_dim: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(units, input_dim);
        let limit = (6.0 / (units + input_dim + units) as f64).sqrt();
        for w in [&mut p.w_z, &mut p.w_r, &mut p.w_h] {
            for v in w.data_mut() {
                *v = rng.uniform(-limit, limit);
            }
        }
        p
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols() - self.units
    }
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    h_prev: Vec<f64>,
    hx: Vec<f64>,
    rhx: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    h_cand: Vec<f64>,
}

/// One GRU step. Returns the new hidden state and the backward cache.
pub fn gru_step(p: &GruParams, h_prev: &[f64], x: &[f64]) -> Result<(Vec<f64>, GruStepCache)> {
    let units = p.units();
    let input_dim = p.input_dim();
    if h_prev.len() != units {
        return Err(Error::Shape(format!(
            "gru_step: state length {} != units {units}",
            h_prev.len()
        )));
    }
    if x.len() != input_dim {
        return Err(Error::Shape(format!(
            "gru_step: input length {} != input_dim {input_dim}",
            x.len()
        )));
    }

    let mut hx = Vec::with_capacity(units + input_dim);
    hx.extend_from_slice(h_prev);
    hx.extend_from_slice(x);

    let mut z = vec![0.0; units];
    let mut r = vec![0.0; units];
    linalg::matvec_bias(&p.w_z, &p.b_z, &hx, &mut z);
    linalg::matvec_bias(&p.w_r, &p.b_r, &hx, &mut r);
    for v in z.iter_mut().chain(r.iter_mut()) {
        *v = crate::tensor::sigmoid(*v);
    }

    let mut rhx = Vec::with_capacity(units + input_dim);
    rhx.extend((0..units).map(|i| r[i] * h_prev[i]));
    rhx.extend_from_slice(x);

    let mut h_cand = vec![0.0; units];
    linalg::matvec_bias(&p.w_h, &p.b_h, &rhx, &mut h_cand);
    for v in h_cand.iter_mut() {
        *v = v.tanh();
    }

    let h_new: Vec<f64> = (0..units)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * h_cand[i])
        .collect();

    Ok((
        h_new,
        GruStepCache {
            h_prev: h_prev.to_vec(),
            hx,
            rhx,
            z,
            r,
            h_cand,
        },
    ))
}

/// Backward through one GRU step. Accumulates parameter gradients into
/// `grads` and returns (d_h_prev, d_x).
pub fn gru_step_backward(
    p: &GruParams,
    cache: &GruStepCache,
    d_h_new: &[f64],
    grads: &mut GruParams,
) -> (Vec<f64>, Vec<f64>) {
    let units = p.units();
    let input_dim = p.input_dim();
    let GruStepCache {
        h_prev,
        hx,
        rhx,
        z,
        r,
        h_cand,
    } = cache;

    let mut d_h_prev = vec![0.0; units];
    let mut d_x = vec![0.0; input_dim];

    // h' = (1-z) h + z h~
    let mut d_z = vec![0.0; units];
    let mut d_h_cand = vec![0.0; units];
    for i in 0..units {
        d_z[i] = d_h_new[i] * (h_cand[i] - h_prev[i]);
        d_h_cand[i] = d_h_new[i] * z[i];
        d_h_prev[i] += d_h_new[i] * (1.0 - z[i]);
    }

    // h~ = tanh(W_h rhx + b_h)
    let d_a_h: Vec<f64> = (0..units)
        .map(|i| d_h_cand[i] * (1.0 - h_cand[i] * h_cand[i]))
        .collect();
    linalg::outer_accum(&mut grads.w_h, &d_a_h, rhx);
    linalg::add_accum(grads.b_h.data_mut(), &d_a_h);
    let mut d_rhx = vec![0.0; units + input_dim];
    linalg::matvec_t_accum(&p.w_h, &d_a_h, &mut d_rhx);

    // rhx = [r*h, x]
    let mut d_r = vec![0.0; units];
    for i in 0..units {
        d_r[i] = d_rhx[i] * h_prev[i];
        d_h_prev[i] += d_rhx[i] * r[i];
    }
    linalg::add_accum(&mut d_x, &d_rhx[units..]);

    // gates through the sigmoid
    let d_a_z: Vec<f64> = (0..units).map(|i| d_z[i] * z[i] * (1.0 - z[i])).collect();
    let d_a_r: Vec<f64> = (0..units).map(|i| d_r[i] * r[i] * (1.0 - r[i])).collect();
    linalg::outer_accum(&mut grads.w_z, &d_a_z, hx);
    linalg::add_accum(grads.b_z.data_mut(), &d_a_z);
    linalg::outer_accum(&mut grads.w_r, &d_a_r, hx);
    linalg::add_accum(grads.b_r.data_mut(), &d_a_r);

    let mut d_hx = vec![0.0; units + input_dim];
    linalg::matvec_t_accum(&p.w_z, &d_a_z, &mut d_hx);
    linalg::matvec_t_accum(&p.w_r, &d_a_r, &mut d_hx);
    linalg::add_accum(&mut d_h_prev, &d_hx[..units]);
    linalg::add_accum(&mut d_x, &d_hx[units..]);

    (d_h_prev, d_x)
}

/// Runs a GRU over a T x input_dim sequence from a zero initial state.
/// With `return_sequences` the output is T x units, otherwise the final
/// hidden state as a length-units vector.
pub fn gru_sequence(
    p: &GruParams,
    xs: &Tensor,
    return_sequences: bool,
) -> Result<(Tensor, Vec<GruStepCache>)> {
    if xs.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "gru_sequence: expected 2-D input, got {:?}",
            xs.shape()
        )));
    }
    let steps = xs.rows();
    if steps == 0 {
        return Err(Error::Shape("gru_sequence: empty sequence".into()));
    }
    let units = p.units();
    let mut h = vec![0.0; units];
    let mut caches = Vec::with_capacity(steps);
    let mut outputs = Vec::with_capacity(steps * units);
    for t in 0..steps {
        let (h_new, cache) = gru_step(p, &h, xs.row(t))?;
        if return_sequences {
            outputs.extend_from_slice(&h_new);
        }
        caches.push(cache);
        h = h_new;
    }
    let out = if return_sequences {
        Tensor::new(vec![steps, units], outputs)?
    } else {
        Tensor::vector(h)
    };
    Ok((out, caches))
}

/// BPTT through `gru_sequence`. `d_out` is T x units (return_sequences)
/// or length units (final state only). Returns d_xs as T x input_dim.
pub fn gru_sequence_backward(
    p: &GruParams,
    caches: &[GruStepCache],
    d_out: &Tensor,
    return_sequences: bool,
    grads: &mut GruParams,
) -> Result<Tensor> {
    let steps = caches.len();
    let units = p.units();
    let input_dim = p.input_dim();
    let mut d_xs = Tensor::zeros(vec![steps, input_dim]);
    let mut d_h = vec![0.0; units];
    for t in (0..steps).rev() {
        if return_sequences {
            linalg::add_accum(&mut d_h, d_out.row(t));
        } else if t == steps - 1 {
            linalg::add_accum(&mut d_h, d_out.data());
        }
        let (d_h_prev, d_x) = gru_step_backward(p, &caches[t], &d_h, grads);
        d_xs.row_mut(t).copy_from_slice(&d_x);
        d_h = d_h_prev;
    }
    Ok(d_xs)
}

/// Dense layer weights: W is out x in.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Tensor,
    pub b: Tensor,
}

impl DenseParams {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        DenseParams {
            w: Tensor::zeros(vec![out_dim, in_dim]),
            b: Tensor::zeros(vec![out_dim]),
        }
    }

    pub fn glorot(out_dim: usize, in_dim: usize, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(out_dim, in_dim);
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        for v in p.w.data_mut() {
            *v = rng.uniform(-limit, limit);
        }
        p
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
}

#[derive(Debug, Clone)]
pub struct DenseCache {
    x: Vec<f64>,
    pre: Vec<f64>,
    act: Activation,
}

impl DenseCache {
    /// Pre-activation output (equals the layer output for Linear).
    pub(crate) fn pre(&self) -> &[f64] {
        &self.pre
    }
}

/// y = act(W x + b).
pub fn dense_forward(
    p: &DenseParams,
    x: &[f64],
    act: Activation,
) -> Result<(Vec<f64>, DenseCache)> {
    if x.len() != p.in_dim() {
        return Err(Error::Shape(format!(
            "dense_forward: input length {} != in_dim {}",
            x.len(),
            p.in_dim()
        )));
    }
    let mut pre = vec![0.0; p.out_dim()];
    linalg::matvec_bias(&p.w, &p.b, x, &mut pre);
    let y = match act {
        Activation::Linear => pre.clone(),
        Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
    };
    Ok((
        y,
        DenseCache {
            x: x.to_vec(),
            pre,
            act,
        },
    ))
}

/// Backward through the dense layer; accumulates into `grads`, returns dx.
pub fn dense_backward(
    p: &DenseParams,
    cache: &DenseCache,
    d_y: &[f64],
    grads: &mut DenseParams,
) -> Vec<f64> {
    let d_pre: Vec<f64> = match cache.act {
        Activation::Linear => d_y.to_vec(),
        Activation::Relu => d_y
            .iter()
            .zip(&cache.pre)
            .map(|(&d, &p)| if p > 0.0 { d } else { 0.0 })
            .collect(),
    };
    linalg::outer_accum(&mut grads.w, &d_pre, &cache.x);
    linalg::add_accum(grads.b.data_mut(), &d_pre);
    let mut d_x = vec![0.0; p.in_dim()];
    linalg::matvec_t_accum(&p.w, &d_pre, &mut d_x);
    d_x
}

/// Numerically stable softmax (max subtraction; mathematically identical).
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
