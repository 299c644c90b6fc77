//! Neural Turing Machine layer: external memory matrix, content-based
//! addressing, one read head and one write head, driven by a GRU controller.
//!
//! Addressing is content-only: w = softmax(cosine(M_i, k)) with the cosine
//! denominator clamped at 1e-8. Writes are erase-then-add,
//!   M'_i = M_i * (1 - w_i e) + w_i v,
//! which with e = 0 (or `additive_write`) reduces to the plain additive
//! update M' = M + w (outer) v.

use crate::error::{Error, Result};
use crate::layers::{
    dense_backward, dense_forward, gru_step, gru_step_backward, softmax, Activation, DenseCache,
    DenseParams, GruParams, GruStepCache,
};
use crate::linalg;
use crate::rng::Rng;
use crate::tensor::Tensor;

const COSINE_DENOM_CLAMP: f64 = 1e-8;

/// Initial memory fill; avoids degenerate zero-norm rows in the cosine.
pub const MEMORY_INIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NtmConfig {
    pub memory_rows: usize,
    pub memory_width: usize,
    pub controller_units: usize,
    /// Skip the erase head entirely, recovering the purely additive write.
    pub additive_write: bool,
}

impl Default for NtmConfig {
    fn default() -> Self {
        NtmConfig {
            memory_rows: 32,
            memory_width: 20,
            controller_units: 32,
            additive_write: false,
        }
    }
}

/// Controller plus the head projections (read key, write key, write vector,
/// erase vector), all driven by the controller's hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct NtmParams {
    pub config: NtmConfig,
    pub controller: GruParams,
    pub read_key: DenseParams,
    pub write_key: DenseParams,
    pub write_vec: DenseParams,
    pub erase: DenseParams,
}

impl NtmParams {
    pub fn zeros(config: NtmConfig, input_dim: usize) -> Self {
        let units = config.controller_units;
        let width = config.memory_width;
        NtmParams {
            config,
            controller: GruParams::zeros(units, input_dim + width),
            read_key: DenseParams::zeros(width, units),
            write_key: DenseParams::zeros(width, units),
            write_vec: DenseParams::zeros(width, units),
            erase: DenseParams::zeros(width, units),
        }
    }

    pub fn glorot(config: NtmConfig, input_dim: usize, rng: &mut Rng) -> Self {
        let units = config.controller_units;
        let width = config.memory_width;
        NtmParams {
            config,
            controller: GruParams::glorot(units, input_dim + width, rng),
            read_key: DenseParams::glorot(width, units, rng),
            write_key: DenseParams::glorot(width, units, rng),
            write_vec: DenseParams::glorot(width, units, rng),
            erase: DenseParams::glorot(width, units, rng),
        }
    }

    /// External input width (excludes the fed-back read vector).
    pub fn input_dim(&self) -> usize {
        self.controller.input_dim() - self.config.memory_width
    }

    /// Output width: controller hidden state concatenated with the read vector.
    pub fn output_dim(&self) -> usize {
        self.config.controller_units + self.config.memory_width
    }
}

/// Per-sequence recurrent state.
#[derive(Debug, Clone)]
pub struct NtmState {
    pub memory: Tensor,
    pub read: Vec<f64>,
    pub hidden: Vec<f64>,
    pub read_weights: Vec<f64>,
    pub write_weights: Vec<f64>,
}

impl NtmState {
    pub fn initial(config: &NtmConfig) -> Self {
        let n = config.memory_rows;
        let mut memory = Tensor::zeros(vec![n, config.memory_width]);
        for v in memory.data_mut() {
            *v = MEMORY_INIT;
        }
        NtmState {
            memory,
            read: vec![0.0; config.memory_width],
            hidden: vec![0.0; config.controller_units],
            read_weights: vec![1.0 / n as f64; n],
            write_weights: vec![1.0 / n as f64; n],
        }
    }
}

struct AddressCache {
    cos: Vec<f64>,
    weights: Vec<f64>,
    denoms: Vec<f64>,
    clamped: Vec<bool>,
    key_norm: f64,
    row_norms: Vec<f64>,
}

fn address_cached(memory: &Tensor, key: &[f64]) -> Result<(Vec<f64>, AddressCache)> {
    if memory.shape().len() != 2 || memory.cols() != key.len() {
        return Err(Error::Shape(format!(
            "address: memory {:?} vs key length {}",
            memory.shape(),
            key.len()
        )));
    }
    let n = memory.rows();
    let key_norm = linalg::norm(key);
    let mut cos = vec![0.0; n];
    let mut denoms = vec![0.0; n];
    let mut clamped = vec![false; n];
    let mut row_norms = vec![0.0; n];
    for i in 0..n {
        let row = memory.row(i);
        let rn = linalg::norm(row);
        row_norms[i] = rn;
        let raw = rn * key_norm;
        let (d, cl) = if raw < COSINE_DENOM_CLAMP {
            (COSINE_DENOM_CLAMP, true)
        } else {
            (raw, false)
        };
        denoms[i] = d;
        clamped[i] = cl;
        cos[i] = linalg::dot(row, key) / d;
    }
    let weights = softmax(&cos);
    Ok((
        weights.clone(),
        AddressCache {
            cos,
            weights,
            denoms,
            clamped,
            key_norm,
            row_norms,
        },
    ))
}

/// Content addressing: softmax over cosine similarity between the key and
/// each memory row. Always returns a probability vector.
pub fn address(memory: &Tensor, key: &[f64]) -> Result<Vec<f64>> {
    address_cached(memory, key).map(|(w, _)| w)
}

fn address_backward(
    memory: &Tensor,
    key: &[f64],
    cache: &AddressCache,
    d_weights: &[f64],
    d_memory: &mut Tensor,
    d_key: &mut [f64],
) {
    let n = memory.rows();
    // Softmax backward.
    let inner: f64 = (0..n).map(|i| cache.weights[i] * d_weights[i]).sum();
    let d_cos: Vec<f64> = (0..n)
        .map(|i| cache.weights[i] * (d_weights[i] - inner))
        .collect();

    for i in 0..n {
        let row = memory.row(i);
        let d = cache.denoms[i];
        let dc = d_cos[i];
        if dc == 0.0 {
            continue;
        }
        if cache.clamped[i] {
            // Denominator pinned at the clamp: only the dot product varies.
            for j in 0..key.len() {
                d_key[j] += dc * row[j] / d;
            }
            let dm = d_memory.row_mut(i);
            for j in 0..key.len() {
                dm[j] += dc * key[j] / d;
            }
        } else {
            let cos = cache.cos[i];
            let kn2 = cache.key_norm * cache.key_norm;
            let rn2 = cache.row_norms[i] * cache.row_norms[i];
            for j in 0..key.len() {
                d_key[j] += dc * (row[j] / d - cos * key[j] / kn2);
            }
            let dm = d_memory.row_mut(i);
            for j in 0..key.len() {
                dm[j] += dc * (key[j] / d - cos * row[j] / rn2);
            }
        }
    }
}

/// Weighted read: r = sum_i w_i M_i.
pub fn read(memory: &Tensor, weights: &[f64]) -> Result<Vec<f64>> {
    if memory.rows() != weights.len() {
        return Err(Error::Shape(format!(
            "read: memory {:?} vs weighting length {}",
            memory.shape(),
            weights.len()
        )));
    }
    let width = memory.cols();
    let mut r = vec![0.0; width];
    for i in 0..memory.rows() {
        let row = memory.row(i);
        let w = weights[i];
        for j in 0..width {
            r[j] += w * row[j];
        }
    }
    Ok(r)
}

fn read_backward(
    memory: &Tensor,
    weights: &[f64],
    d_read: &[f64],
    d_memory: &mut Tensor,
    d_weights: &mut [f64],
) {
    for i in 0..memory.rows() {
        d_weights[i] += linalg::dot(memory.row(i), d_read);
        let dm = d_memory.row_mut(i);
        let w = weights[i];
        for j in 0..d_read.len() {
            dm[j] += w * d_read[j];
        }
    }
}

/// Erase-then-add write: M'_i = M_i * (1 - w_i e) + w_i v.
pub fn write(memory: &Tensor, weights: &[f64], value: &[f64], erase: &[f64]) -> Result<Tensor> {
    let width = memory.cols();
    if memory.rows() != weights.len() || value.len() != width || erase.len() != width {
        return Err(Error::Shape(format!(
            "write: memory {:?}, weighting {}, value {}, erase {}",
            memory.shape(),
            weights.len(),
            value.len(),
            erase.len()
        )));
    }
    let mut out = memory.clone();
    for i in 0..memory.rows() {
        let w = weights[i];
        let row = out.row_mut(i);
        for j in 0..width {
            row[j] = row[j] * (1.0 - w * erase[j]) + w * value[j];
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn write_backward(
    memory_prev: &Tensor,
    weights: &[f64],
    value: &[f64],
    erase: &[f64],
    d_memory_new: &Tensor,
    d_memory_prev: &mut Tensor,
    d_weights: &mut [f64],
    d_value: &mut [f64],
    d_erase: &mut [f64],
) {
    let width = memory_prev.cols();
    for i in 0..memory_prev.rows() {
        let w = weights[i];
        let m = memory_prev.row(i);
        let dn = d_memory_new.row(i);
        let dp = d_memory_prev.row_mut(i);
        let mut dw = 0.0;
        for j in 0..width {
            dp[j] += dn[j] * (1.0 - w * erase[j]);
            dw += dn[j] * (value[j] - m[j] * erase[j]);
            d_value[j] += dn[j] * w;
            d_erase[j] -= dn[j] * w * m[j];
        }
        d_weights[i] += dw;
    }
}

/// Backward cache for one NTM step.
pub struct NtmStepCache {
    ctrl_cache: GruStepCache,
    memory_prev: Tensor,
    kr_cache: DenseCache,
    kw_cache: DenseCache,
    v_cache: DenseCache,
    e_cache: Option<DenseCache>,
    read_addr: AddressCache,
    write_addr: AddressCache,
    w_r: Vec<f64>,
    w_w: Vec<f64>,
    v: Vec<f64>,
    e: Vec<f64>,
}

/// Gradients flowing backwards through the recurrent state.
pub struct NtmStateGrad {
    pub hidden: Vec<f64>,
    pub read: Vec<f64>,
    pub memory: Tensor,
}

impl NtmStateGrad {
    pub fn zeros(config: &NtmConfig) -> Self {
        NtmStateGrad {
            hidden: vec![0.0; config.controller_units],
            read: vec![0.0; config.memory_width],
            memory: Tensor::zeros(vec![config.memory_rows, config.memory_width]),
        }
    }
}

/// One NTM step: controller consumes [x, previous read vector], the heads
/// address the pre-write memory (read first, then write), and the output is
/// concat(controller hidden state, new read vector).
pub fn ntm_step(
    params: &NtmParams,
    state: &NtmState,
    x: &[f64],
) -> Result<(Vec<f64>, NtmState, NtmStepCache)> {
    if x.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "ntm_step: input length {} != {}",
            x.len(),
            params.input_dim()
        )));
    }
    let mut ctrl_in = Vec::with_capacity(x.len() + state.read.len());
    ctrl_in.extend_from_slice(x);
    ctrl_in.extend_from_slice(&state.read);
    let (hidden, ctrl_cache) = gru_step(&params.controller, &state.hidden, &ctrl_in)?;

    let (k_r, kr_cache) = dense_forward(&params.read_key, &hidden, Activation::Linear)?;
    let (w_r, read_addr) = address_cached(&state.memory, &k_r)?;
    let read_vec = read(&state.memory, &w_r)?;

    let (k_w, kw_cache) = dense_forward(&params.write_key, &hidden, Activation::Linear)?;
    let (w_w, write_addr) = address_cached(&state.memory, &k_w)?;
    let (v, v_cache) = dense_forward(&params.write_vec, &hidden, Activation::Linear)?;
    let (e, e_cache) = if params.config.additive_write {
        (vec![0.0; params.config.memory_width], None)
    } else {
        let (pre, cache) = dense_forward(&params.erase, &hidden, Activation::Linear)?;
        (
            pre.iter().map(|&a| crate::tensor::sigmoid(a)).collect(),
            Some(cache),
        )
    };
    let memory_new = write(&state.memory, &w_w, &v, &e)?;

    let mut out = Vec::with_capacity(params.output_dim());
    out.extend_from_slice(&hidden);
    out.extend_from_slice(&read_vec);

    let cache = NtmStepCache {
        ctrl_cache,
        memory_prev: state.memory.clone(),
        kr_cache,
        kw_cache,
        v_cache,
        e_cache,
        read_addr,
        write_addr,
        w_r: w_r.clone(),
        w_w: w_w.clone(),
        v,
        e,
    };
    let new_state = NtmState {
        memory: memory_new,
        read: read_vec,
        hidden,
        read_weights: w_r,
        write_weights: w_w,
    };
    Ok((out, new_state, cache))
}

/// Backward through one NTM step. `d_out` is the gradient on this step's
/// output vector, `d_next` the gradients arriving from the following step's
/// state. Returns (d_x, gradients for the previous state).
pub fn ntm_step_backward(
    params: &NtmParams,
    cache: &NtmStepCache,
    d_out: &[f64],
    d_next: &NtmStateGrad,
    grads: &mut NtmParams,
) -> (Vec<f64>, NtmStateGrad) {
    let units = params.config.controller_units;
    let width = params.config.memory_width;
    let rows = params.config.memory_rows;

    let mut d_hidden: Vec<f64> = d_next.hidden.clone();
    linalg::add_accum(&mut d_hidden, &d_out[..units]);
    let mut d_read: Vec<f64> = d_next.read.clone();
    linalg::add_accum(&mut d_read, &d_out[units..]);

    let mut d_memory_prev = Tensor::zeros(vec![rows, width]);

    // Write: memory_new = write(memory_prev, w_w, v, e).
    let mut d_w_w = vec![0.0; rows];
    let mut d_v = vec![0.0; width];
    let mut d_e = vec![0.0; width];
    write_backward(
        &cache.memory_prev,
        &cache.w_w,
        &cache.v,
        &cache.e,
        &d_next.memory,
        &mut d_memory_prev,
        &mut d_w_w,
        &mut d_v,
        &mut d_e,
    );

    // Head projections back to the controller state.
    if let Some(e_cache) = &cache.e_cache {
        let d_a_e: Vec<f64> = (0..width)
            .map(|j| d_e[j] * cache.e[j] * (1.0 - cache.e[j]))
            .collect();
        let d_h = dense_backward(&params.erase, e_cache, &d_a_e, &mut grads.erase);
        linalg::add_accum(&mut d_hidden, &d_h);
    }
    let d_h = dense_backward(&params.write_vec, &cache.v_cache, &d_v, &mut grads.write_vec);
    linalg::add_accum(&mut d_hidden, &d_h);

    let mut d_k_w = vec![0.0; width];
    address_backward(
        &cache.memory_prev,
        cache.kw_cache.pre(),
        &cache.write_addr,
        &d_w_w,
        &mut d_memory_prev,
        &mut d_k_w,
    );
    let d_h = dense_backward(&params.write_key, &cache.kw_cache, &d_k_w, &mut grads.write_key);
    linalg::add_accum(&mut d_hidden, &d_h);

    // Read: r = memory_prev^T w_r.
    let mut d_w_r = vec![0.0; rows];
    read_backward(
        &cache.memory_prev,
        &cache.w_r,
        &d_read,
        &mut d_memory_prev,
        &mut d_w_r,
    );
    let mut d_k_r = vec![0.0; width];
    address_backward(
        &cache.memory_prev,
        cache.kr_cache.pre(),
        &cache.read_addr,
        &d_w_r,
        &mut d_memory_prev,
        &mut d_k_r,
    );
    let d_h = dense_backward(&params.read_key, &cache.kr_cache, &d_k_r, &mut grads.read_key);
    linalg::add_accum(&mut d_hidden, &d_h);

    // Controller.
    let (d_hidden_prev, d_ctrl_in) =
        gru_step_backward(&params.controller, &cache.ctrl_cache, &d_hidden, &mut grads.controller);
    let x_dim = params.input_dim();
    let d_x = d_ctrl_in[..x_dim].to_vec();
    let d_read_prev = d_ctrl_in[x_dim..].to_vec();

    (
        d_x,
        NtmStateGrad {
            hidden: d_hidden_prev,
            read: d_read_prev,
            memory: d_memory_prev,
        },
    )
}

/// Runs the NTM over a T x input_dim sequence from the standard initial
/// state and returns the final step's output vector.
pub fn ntm_sequence(params: &NtmParams, xs: &Tensor) -> Result<(Vec<f64>, Vec<NtmStepCache>)> {
    if xs.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "ntm_sequence: expected 2-D input, got {:?}",
            xs.shape()
        )));
    }
    let steps = xs.rows();
    if steps == 0 {
        return Err(Error::Shape("ntm_sequence: empty sequence".into()));
    }
    let mut state = NtmState::initial(&params.config);
    let mut caches = Vec::with_capacity(steps);
    let mut out = Vec::new();
    for t in 0..steps {
        let (o, new_state, cache) = ntm_step(params, &state, xs.row(t))?;
        caches.push(cache);
        state = new_state;
        out = o;
    }
    Ok((out, caches))
}

/// Full BPTT through memory. `d_out` is the gradient on the final step's
/// output; returns d_xs as T x input_dim.
pub fn ntm_sequence_backward(
    params: &NtmParams,
    caches: &[NtmStepCache],
    d_out: &[f64],
    grads: &mut NtmParams,
) -> Result<Tensor> {
    let steps = caches.len();
    let x_dim = params.input_dim();
    let mut d_xs = Tensor::zeros(vec![steps, x_dim]);
    let mut d_state = NtmStateGrad::zeros(&params.config);
    let zero_out = vec![0.0; params.output_dim()];
    for t in (0..steps).rev() {
        let step_d_out = if t == steps - 1 { d_out } else { &zero_out[..] };
        let (d_x, d_prev) = ntm_step_backward(params, &caches[t], step_d_out, &d_state, grads);
        d_xs.row_mut(t).copy_from_slice(&d_x);
        d_state = d_prev;
    }
    Ok(d_xs)
}
