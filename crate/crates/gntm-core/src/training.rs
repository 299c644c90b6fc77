//! Training loop: cross-entropy loss, Adam, early stopping, per-epoch
//! logging and the binary checkpoint format.

use crate::data::{CategoricalMode, LabeledWindow, NormStats};
use crate::error::{Error, Result};
use crate::fileio;
use crate::model::{argmax, backward_into, forward, ModelConfig, ModelParams};
use crate::ntm::NtmConfig;
use crate::rng::Rng;
use crate::tensor::Tensor;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

/// Categorical cross-entropy -sum(y * ln p) with probabilities clamped to
/// at least 1e-12 before the log.
pub fn cross_entropy(probs: &[f64], target: &[f64]) -> f64 {
    probs
        .iter()
        .zip(target)
        .map(|(&p, &y)| -y * p.max(1e-12).ln())
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    /// Validation share of the training windows (used by the pipeline, not
    /// by the loop itself, which receives pre-split data).
    pub val_fraction: f64,
    /// Share of windows kept after the dataset-reduction step.
    pub reduce_fraction: f64,
    pub seed: u64,
    /// When false, the epoch log records 0.000 seconds so two identical
    /// runs produce byte-identical logs.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 16,
            max_epochs: 20,
            patience: 4,
            min_delta: 1e-6,
            val_fraction: 0.2,
            reduce_fraction: 0.2,
            seed: 42,
            record_timing: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch_size, max_epochs and patience must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

// ------------------------------------------------------------------ adam --

/// One Adam update on a single tensor. `t` is the 1-based global step.
pub fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &TrainConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..param.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// First and second moment estimates for every model tensor, in the fixed
/// named-tensor order, plus the shared step counter.
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(config: &ModelConfig) -> Self {
        let zeros = ModelParams::zeros(config);
        let m: Vec<Tensor> = zeros
            .named_tensors()
            .into_iter()
            .map(|(_, t)| t.clone())
            .collect();
        AdamState {
            v: m.clone(),
            m,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// Applies one Adam step across every parameter tensor. Increments the
/// step counter first, so the first call uses t = 1.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) {
    state.t += 1;
    let t = state.t;
    let grads: Vec<&Tensor> = grads.named_tensors().into_iter().map(|(_, g)| g).collect();
    for (i, (_, param)) in params.named_tensors_mut().into_iter().enumerate() {
        adam_update(
            param.data_mut(),
            grads[i].data(),
            state.m[i].data_mut(),
            state.v[i].data_mut(),
            t,
            cfg,
        );
    }
}

// ---------------------------------------------------------- early stopping --

/// Stops after `patience` consecutive epochs without the validation loss
/// improving by more than `min_delta`.
pub struct EarlyStopper {
    patience: usize,
    min_delta: f64,
    best_loss: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopper {
            patience,
            min_delta,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Feed one epoch's validation loss (epochs are 1-based). Returns true
    /// when training should stop after this epoch.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> bool {
        if val_loss < self.best_loss - self.min_delta {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            false
        } else {
            self.bad_epochs += 1;
            self.bad_epochs >= self.patience
        }
    }

    pub fn improved(&self, epoch: usize) -> bool {
        self.best_epoch == epoch
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

// --------------------------------------------------------------- epoch log --

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub seconds: f64,
}

/// Fixed-format CSV: identical inputs produce byte-identical files.
pub fn write_epoch_log(path: &Path, logs: &[EpochLog]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "epoch,train_loss,train_acc,val_loss,val_acc,seconds")?;
    for l in logs {
        writeln!(
            w,
            "{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            l.epoch, l.train_loss, l.train_acc, l.val_loss, l.val_acc, l.seconds
        )?;
    }
    w.flush().map_err(Into::into)
}

// ------------------------------------------------------------------ loop --

pub struct TrainResult {
    pub params: ModelParams,
    pub logs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub best_val_loss: f64,
}

/// Mean loss and accuracy over a full dataset pass.
pub fn evaluate_loss_acc(params: &ModelParams, windows: &[LabeledWindow]) -> Result<(f64, f64)> {
    if windows.is_empty() {
        return Err(Error::Data("evaluate_loss_acc: empty dataset".into()));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for w in windows {
        let (probs, _) = forward(params, &w.window)?;
        loss += cross_entropy(&probs, w.label_onehot.data());
        if argmax(&probs) == w.label() {
            correct += 1;
        }
    }
    Ok((
        loss / windows.len() as f64,
        correct as f64 / windows.len() as f64,
    ))
}

/// Full training loop: seeded init, seeded per-epoch shuffle, mini-batches
/// of `batch_size` (final partial batch kept), mean-of-batch gradients,
/// one Adam step per batch, early stopping on validation loss, and restore
/// of the best-epoch weights at the end. Aborts with a NonFinite error if
/// the loss diverges.
pub fn train(
    model_config: &ModelConfig,
    cfg: &TrainConfig,
    train_set: &[LabeledWindow],
    val_set: &[LabeledWindow],
) -> Result<TrainResult> {
    model_config.validate()?;
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Data("train: empty train or validation set".into()));
    }
    for w in train_set.iter().chain(val_set) {
        if w.window.rows() != model_config.window || w.window.cols() != model_config.input_features
        {
            return Err(Error::Shape(format!(
                "train: window shape {:?} does not match configured {}x{}",
                w.window.shape(),
                model_config.window,
                model_config.input_features
            )));
        }
    }

    let mut rng = Rng::new(cfg.seed);
    let mut params = ModelParams::init(model_config, &mut rng);
    let mut adam = AdamState::new(model_config);
    let mut stopper = EarlyStopper::new(cfg.patience, cfg.min_delta);
    let mut best_params = params.clone();
    let mut logs = Vec::new();
    let mut stopped_epoch = 0;

    let mut indices: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        rng.shuffle(&mut indices);
        for batch in indices.chunks(cfg.batch_size) {
            let mut grads = ModelParams::zeros(model_config);
            let mut batch_loss = 0.0;
            for &i in batch {
                let w = &train_set[i];
                let (probs, cache) = forward(&params, &w.window)?;
                batch_loss += cross_entropy(&probs, w.label_onehot.data());
                backward_into(&params, &cache, w.label_onehot.data(), &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training diverged at epoch {epoch} (batch loss not finite)"
                )));
            }
            let scale = 1.0 / batch.len() as f64;
            for (_, g) in grads.named_tensors_mut() {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            adam_step(&mut params, &grads, &mut adam, cfg);
        }

        let (train_loss, train_acc) = evaluate_loss_acc(&params, train_set)?;
        let (val_loss, val_acc) = evaluate_loss_acc(&params, val_set)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "training diverged at epoch {epoch} (epoch loss not finite)"
            )));
        }
        let seconds = if cfg.record_timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        };
        logs.push(EpochLog {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            seconds,
        });

        let stop = stopper.observe(epoch, val_loss);
        if stopper.improved(epoch) {
            best_params = params.clone();
        }
        stopped_epoch = epoch;
        if stop {
            break;
        }
    }

    Ok(TrainResult {
        params: best_params,
        logs,
        best_epoch: stopper.best_epoch(),
        stopped_epoch,
        best_val_loss: stopper.best_loss(),
    })
}

// ------------------------------------------------------------- checkpoint --

const CHECKPOINT_VERSION: u16 = 1;

/// Trained weights plus everything inference needs: the architecture
/// dimensions and the normalization statistics fitted on the training split.
#[derive(Debug)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub norm: NormStats,
    pub meta: CheckpointMeta,
}

/// Provenance of the saved weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMeta {
    /// 1-based epoch whose weights these are (the best-val-loss epoch).
    pub epoch: u32,
    pub val_loss: f64,
    pub seed: u64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        fileio::write_header(&mut w, fileio::KIND_CHECKPOINT, CHECKPOINT_VERSION)?;

        let c = &self.config;
        for dim in [
            c.input_features,
            c.window,
            c.gru1_units,
            c.gru2_units,
            c.ntm.memory_rows,
            c.ntm.memory_width,
            c.ntm.controller_units,
            c.dense_units,
            c.classes,
        ] {
            fileio::write_u32(&mut w, dim as u32)?;
        }
        w.write_all(&[c.ntm.additive_write as u8])?;

        fileio::write_u32(&mut w, self.meta.epoch)?;
        fileio::write_f64(&mut w, self.meta.val_loss)?;
        fileio::write_u64(&mut w, self.meta.seed)?;

        fileio::write_u32(&mut w, self.norm.features() as u32)?;
        for &v in &self.norm.min {
            fileio::write_f64(&mut w, v)?;
        }
        for &v in &self.norm.max {
            fileio::write_f64(&mut w, v)?;
        }
        let mode = match self.norm.categorical_mode {
            CategoricalMode::Hash => 0u8,
            CategoricalMode::Drop => 1u8,
        };
        w.write_all(&[mode])?;

        let tensors = self.params.named_tensors();
        fileio::write_u32(&mut w, tensors.len() as u32)?;
        for (name, t) in tensors {
            fileio::write_string(&mut w, name)?;
            fileio::write_u32(&mut w, t.shape().len() as u32)?;
            for &d in t.shape() {
                fileio::write_u32(&mut w, d as u32)?;
            }
            let mut bytes = Vec::with_capacity(t.len() * 8);
            for &v in t.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            fileio::write_u64(&mut w, fileio::fnv1a64(&bytes))?;
            w.write_all(&bytes)?;
        }
        w.flush().map_err(Into::into)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        fileio::read_header(&mut r, fileio::KIND_CHECKPOINT, CHECKPOINT_VERSION)?;

        let mut dims = [0usize; 9];
        for d in dims.iter_mut() {
            *d = fileio::read_u32(&mut r)? as usize;
        }
        let additive = fileio::read_u8(&mut r)? != 0;
        let config = ModelConfig {
            input_features: dims[0],
            window: dims[1],
            gru1_units: dims[2],
            gru2_units: dims[3],
            ntm: NtmConfig {
                memory_rows: dims[4],
                memory_width: dims[5],
                controller_units: dims[6],
                additive_write: additive,
            },
            dense_units: dims[7],
            classes: dims[8],
        };
        config.validate()?;

        let meta = CheckpointMeta {
            epoch: fileio::read_u32(&mut r)?,
            val_loss: fileio::read_f64(&mut r)?,
            seed: fileio::read_u64(&mut r)?,
        };

        let f = fileio::read_u32(&mut r)? as usize;
        if f != config.input_features {
            return Err(Error::Format(format!(
                "normalization covers {f} features but the model takes {}",
                config.input_features
            )));
        }
        let mut min = Vec::with_capacity(f);
        for _ in 0..f {
            min.push(fileio::read_f64(&mut r)?);
        }
        let mut max = Vec::with_capacity(f);
        for _ in 0..f {
            max.push(fileio::read_f64(&mut r)?);
        }
        let categorical_mode = match fileio::read_u8(&mut r)? {
            0 => CategoricalMode::Hash,
            1 => CategoricalMode::Drop,
            m => return Err(Error::Format(format!("unknown categorical mode {m}"))),
        };
        let norm = NormStats {
            min,
            max,
            categorical_mode,
        };

        let mut params = ModelParams::zeros(&config);
        let expected = params.named_tensors_mut();
        let count = fileio::read_u32(&mut r)? as usize;
        if count != expected.len() {
            return Err(Error::Format(format!(
                "checkpoint holds {count} tensors, expected {}",
                expected.len()
            )));
        }
        for (exp_name, tensor) in expected {
            let name = fileio::read_string(&mut r)?;
            if name != exp_name {
                return Err(Error::Format(format!(
                    "tensor '{name}' out of order, expected '{exp_name}'"
                )));
            }
            let ndim = fileio::read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(fileio::read_u32(&mut r)? as usize);
            }
            if shape != tensor.shape() {
                return Err(Error::Format(format!(
                    "tensor '{name}' has shape {shape:?}, expected {:?}",
                    tensor.shape()
                )));
            }
            let stored_sum = fileio::read_u64(&mut r)?;
            let mut bytes = vec![0u8; tensor.len() * 8];
            std::io::Read::read_exact(&mut r, &mut bytes).map_err(|_| {
                Error::Format(format!("checkpoint truncated inside tensor '{name}'"))
            })?;
            if fileio::fnv1a64(&bytes) != stored_sum {
                return Err(Error::Format(format!(
                    "checksum mismatch in tensor '{name}' (corrupted file?)"
                )));
            }
            for (i, v) in tensor.data_mut().iter_mut().enumerate() {
                *v = f64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().unwrap());
            }
        }

        Ok(Checkpoint {
            config,
            params,
            norm,
            meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_windows, synth_generate, FlowRecord, SynthSpec};

    #[test]
    fn cross_entropy_reference_values() {
        let ln2 = std::f64::consts::LN_2;
        let ln3 = 3f64.ln();
        assert!((cross_entropy(&[0.5, 0.25, 0.25], &[1.0, 0.0, 0.0]) - ln2).abs() < 1e-12);
        let third = 1.0 / 3.0;
        assert!((cross_entropy(&[third, third, third], &[0.0, 1.0, 0.0]) - ln3).abs() < 1e-12);
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]), 0.0);
    }

    #[test]
    fn cross_entropy_clamps_zero_probability() {
        let ce = cross_entropy(&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0]);
        assert!((ce - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(ce.is_finite());
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        // With zero moments, bias correction makes m_hat = g and
        // v_hat = g^2 at t = 1, so the step is ~ -lr * sign(g).
        let cfg = TrainConfig::default();
        let mut p = [0.5];
        let mut m = [0.0];
        let mut v = [0.0];
        adam_update(&mut p, &[2.0], &mut m, &mut v, 1, &cfg);
        assert!((p[0] - (0.5 - 0.001)).abs() < 1e-9, "{}", p[0]);
        let mut q = [0.5];
        let (mut m2, mut v2) = ([0.0], [0.0]);
        adam_update(&mut q, &[-0.3], &mut m2, &mut v2, 1, &cfg);
        assert!((q[0] - (0.5 + 0.001)).abs() < 1e-8, "{}", q[0]);
    }

    #[test]
    fn adam_matches_scalar_recurrence_oracle() {
        // Independent transcription of the update equations, evaluated
        // step by step on a fixed gradient sequence.
        let cfg = TrainConfig::default();
        let grads = [1.0, -0.5, 0.25, 2.0, -1.5];
        let (mut m_ref, mut v_ref, mut p_ref) = (0.0f64, 0.0f64, 0.3f64);
        let mut p = [0.3];
        let (mut m, mut v) = ([0.0], [0.0]);
        for (step, &g) in grads.iter().enumerate() {
            let t = (step + 1) as i32;
            m_ref = 0.9 * m_ref + 0.1 * g;
            v_ref = 0.999 * v_ref + 0.001 * g * g;
            let m_hat = m_ref / (1.0 - 0.9f64.powi(t));
            let v_hat = v_ref / (1.0 - 0.999f64.powi(t));
            p_ref -= 0.001 * m_hat / (v_hat.sqrt() + 1e-8);

            adam_update(&mut p, &[g], &mut m, &mut v, t as u64, &cfg);
            assert!(
                (p[0] - p_ref).abs() < 1e-12,
                "step {t}: {} vs {p_ref}",
                p[0]
            );
        }
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let mut p = [10.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        for t in 1..=2000u64 {
            let g = 2.0 * (p[0] - 3.0);
            adam_update(&mut p, &[g], &mut m, &mut v, t, &cfg);
        }
        assert!((p[0] - 3.0).abs() < 1e-3, "{}", p[0]);
    }

    #[test]
    fn early_stop_reference_sequence() {
        let mut stopper = EarlyStopper::new(4, 1e-6);
        let losses = [1.0, 0.9, 0.91, 0.92, 0.93, 0.94];
        let mut stopped_at = None;
        for (i, &loss) in losses.iter().enumerate() {
            if stopper.observe(i + 1, loss) {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(6));
        assert_eq!(stopper.best_epoch(), 2);
        assert_eq!(stopper.best_loss(), 0.9);
    }

    #[test]
    fn early_stop_counter_resets_on_improvement() {
        let mut stopper = EarlyStopper::new(2, 1e-6);
        assert!(!stopper.observe(1, 1.0));
        assert!(!stopper.observe(2, 1.1)); // bad 1
        assert!(!stopper.observe(3, 0.5)); // improvement resets
        assert!(!stopper.observe(4, 0.6)); // bad 1
        assert!(stopper.observe(5, 0.7)); // bad 2 -> stop
        assert_eq!(stopper.best_epoch(), 3);
    }

    #[test]
    fn early_stop_ignores_sub_threshold_improvement() {
        let mut stopper = EarlyStopper::new(1, 1e-6);
        assert!(!stopper.observe(1, 1.0));
        // 1e-9 better than best: below min_delta, counts as no improvement.
        assert!(stopper.observe(2, 1.0 - 1e-9));
        assert_eq!(stopper.best_epoch(), 1);
    }

    fn tiny_dataset(seed: u64) -> (Vec<LabeledWindow>, Vec<LabeledWindow>) {
        let spec = SynthSpec {
            seed,
            per_class: 30,
            features: 4,
        };
        let classes = synth_generate(&spec).unwrap();
        let mut windows = Vec::new();
        for c in &classes {
            windows.extend(make_windows(c, 3, 1).unwrap());
        }
        let mut rng = Rng::new(seed ^ 0xabcd);
        crate::data::train_val_split(windows, 0.25, &mut rng).unwrap()
    }

    #[test]
    fn train_is_deterministic() {
        let (train_set, val_set) = tiny_dataset(9);
        let mc = ModelConfig::tiny();
        let tc = TrainConfig {
            max_epochs: 2,
            seed: 5,
            record_timing: false,
            ..TrainConfig::default()
        };
        let a = train(&mc, &tc, &train_set, &val_set).unwrap();
        let b = train(&mc, &tc, &train_set, &val_set).unwrap();
        assert_eq!(a.logs, b.logs);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn train_descends_across_seeds() {
        // Loss after 3 epochs should beat the epoch-1 loss for nearly every
        // seed; allow one unlucky draw.
        let (train_set, val_set) = tiny_dataset(2);
        let mc = ModelConfig::tiny();
        let mut failures = 0;
        for seed in 0..20 {
            let tc = TrainConfig {
                max_epochs: 3,
                seed,
                record_timing: false,
                ..TrainConfig::default()
            };
            let res = train(&mc, &tc, &train_set, &val_set).unwrap();
            if res.logs.last().unwrap().train_loss >= res.logs[0].train_loss {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of 20 seeds failed to descend");
    }

    #[test]
    fn train_restores_best_epoch_weights() {
        let (train_set, val_set) = tiny_dataset(4);
        let mc = ModelConfig::tiny();
        let tc = TrainConfig {
            max_epochs: 4,
            seed: 11,
            record_timing: false,
            ..TrainConfig::default()
        };
        let res = train(&mc, &tc, &train_set, &val_set).unwrap();
        let (val_loss, _) = evaluate_loss_acc(&res.params, &val_set).unwrap();
        assert!((val_loss - res.best_val_loss).abs() < 1e-12);
        assert!(res.best_epoch >= 1 && res.best_epoch <= res.stopped_epoch);
    }

    #[test]
    fn epoch_log_is_byte_identical() {
        let logs = vec![
            EpochLog {
                epoch: 1,
                train_loss: 1.0986122,
                train_acc: 0.3333333,
                val_loss: 1.0986,
                val_acc: 0.34,
                seconds: 0.0,
            },
            EpochLog {
                epoch: 2,
                train_loss: 0.25,
                train_acc: 0.9,
                val_loss: 0.3,
                val_acc: 0.88,
                seconds: 0.0,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_epoch_log(&a, &logs).unwrap();
        write_epoch_log(&b, &logs).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let text = std::fs::read_to_string(&a).unwrap();
        assert!(text.starts_with("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n"));
        assert!(text.contains("\n1,1.098612,0.333333,1.098600,0.340000,0.000\n"));
    }

    fn sample_checkpoint() -> Checkpoint {
        let config = ModelConfig::tiny();
        let mut rng = Rng::new(17);
        let params = ModelParams::init(&config, &mut rng);
        let norm = NormStats {
            min: vec![0.0, -1.0, 2.0, 0.5],
            max: vec![1.0, 1.0, 9.0, 0.5],
            categorical_mode: CategoricalMode::Hash,
        };
        Checkpoint {
            config,
            params,
            norm,
            meta: CheckpointMeta {
                epoch: 3,
                val_loss: 0.0123,
                seed: 17,
            },
        }
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gntm");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.config, ck.config);
        assert_eq!(back.norm, ck.norm);
        assert_eq!(back.params, ck.params);
        assert_eq!(back.meta, ck.meta);
    }

    #[test]
    fn checkpoint_rejects_truncation() {
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gntm");
        ck.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.gntm");
        std::fs::write(&cut, &bytes[..bytes.len() - 10]).unwrap();
        let err = Checkpoint::load(&cut).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn checkpoint_detects_payload_corruption_by_name() {
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gntm");
        ck.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // The file ends with the "out/b" tensor payload.
        let last = bytes.len() - 1;
        bytes[last] ^= 0xff;
        let bad = dir.path().join("bad.gntm");
        std::fs::write(&bad, &bytes).unwrap();
        let err = Checkpoint::load(&bad).unwrap_err();
        assert!(err.to_string().contains("out/b"), "{err}");
    }

    #[test]
    fn checkpoint_rejects_wrong_kind() {
        // A window cache is not a checkpoint, even though it shares the magic.
        let records: Vec<FlowRecord> = (0..12)
            .map(|i| FlowRecord {
                features: vec![i as f64, 0.0],
                label: 0,
            })
            .collect();
        let windows = make_windows(&records, 10, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.gnw");
        crate::data::save_windows(&path, &windows).unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(err.to_string().contains("kind"), "{err}");
    }

    #[test]
    fn checkpoint_rejects_shape_mismatch_naming_tensor() {
        // Hand-build a file whose first tensor declares the wrong shape.
        let ck = sample_checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gntm");
        {
            let mut w = BufWriter::new(File::create(&path).unwrap());
            fileio::write_header(&mut w, fileio::KIND_CHECKPOINT, CHECKPOINT_VERSION).unwrap();
            let c = &ck.config;
            for dim in [
                c.input_features,
                c.window,
                c.gru1_units,
                c.gru2_units,
                c.ntm.memory_rows,
                c.ntm.memory_width,
                c.ntm.controller_units,
                c.dense_units,
                c.classes,
            ] {
                fileio::write_u32(&mut w, dim as u32).unwrap();
            }
            w.write_all(&[0]).unwrap();
            fileio::write_u32(&mut w, 1).unwrap();
            fileio::write_f64(&mut w, 0.0).unwrap();
            fileio::write_u64(&mut w, 0).unwrap();
            fileio::write_u32(&mut w, c.input_features as u32).unwrap();
            for _ in 0..2 * c.input_features {
                fileio::write_f64(&mut w, 0.0).unwrap();
            }
            w.write_all(&[0]).unwrap();
            fileio::write_u32(&mut w, 30).unwrap();
            fileio::write_string(&mut w, "gru1/w_z").unwrap();
            fileio::write_u32(&mut w, 2).unwrap();
            fileio::write_u32(&mut w, 1).unwrap(); // wrong dims
            fileio::write_u32(&mut w, 1).unwrap();
            fileio::write_u64(&mut w, 0).unwrap();
            fileio::write_f64(&mut w, 0.0).unwrap();
        }
        let err = Checkpoint::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gru1/w_z") && msg.contains("shape"), "{msg}");
    }
}
