//! Pretraining: dataset specs, forward-noised batches, Adam loop.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::denoiser::{BatchItem, Denoiser, ModelKind, NoiseSpec};
use crate::error::{invalid, Error, Result};
use crate::rng::Rng;
use crate::schedule::Schedule;
use crate::sequence::{LatentSequence, LatentToken, NoiseAssignment, Sequence};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub eval_every: usize,
    /// Floor on per-token log-probabilities before NELBO weighting; floored
    /// terms are constants for gradients.
    pub log_prob_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 20_000,
            batch_size: 256,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            eval_every: 500,
            log_prob_floor: -30.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(invalid("batch_size and eval_every must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.adam_eps > 0.0) {
            return Err(invalid("learning rate and adam_eps must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(invalid("Adam betas must be in [0, 1)"));
        }
        if !(self.log_prob_floor < 0.0) {
            return Err(invalid("log_prob_floor must be negative"));
        }
        Ok(())
    }

    /// Trace every `eval_every` iterations plus the final one.
    pub fn should_trace(&self, iter: usize, total: usize) -> bool {
        iter % self.eval_every == 0 || iter + 1 == total
    }
}

/// Data distribution to train on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DatasetSpec {
    /// Binary pairs {00, 11}, each with probability 1/2.
    SyntheticPair,
    /// Explicit weighted list of sequences over `n_tokens`.
    ExplicitList {
        n_tokens: usize,
        seq_len: usize,
        sequences: Vec<Vec<u32>>,
        weights: Vec<f64>,
    },
}

impl DatasetSpec {
    pub fn n_tokens(&self) -> usize {
        match self {
            DatasetSpec::SyntheticPair => 2,
            DatasetSpec::ExplicitList { n_tokens, .. } => *n_tokens,
        }
    }

    pub fn seq_len(&self) -> usize {
        match self {
            DatasetSpec::SyntheticPair => 2,
            DatasetSpec::ExplicitList { seq_len, .. } => *seq_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::SyntheticPair => Ok(()),
            DatasetSpec::ExplicitList {
                n_tokens,
                seq_len,
                sequences,
                weights,
            } => {
                if *n_tokens < 2 {
                    return Err(invalid("dataset needs >= 2 tokens"));
                }
                if sequences.is_empty() || sequences.len() != weights.len() {
                    return Err(invalid("sequences and weights must be non-empty and aligned"));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
                    return Err(invalid(format!(
                        "weights must be non-negative and sum to 1, got {sum}"
                    )));
                }
                for s in sequences {
                    if s.len() != *seq_len {
                        return Err(invalid("sequence length mismatch"));
                    }
                    if s.iter().any(|&t| t as usize >= *n_tokens) {
                        return Err(invalid("sequence token outside vocabulary"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Sequence {
        match self {
            DatasetSpec::SyntheticPair => {
                let v = if rng.uniform() < 0.5 { 0 } else { 1 };
                Sequence { tokens: vec![v, v] }
            }
            DatasetSpec::ExplicitList {
                sequences, weights, ..
            } => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (s, &w) in sequences.iter().zip(weights.iter()) {
                    acc += w;
                    if u < acc {
                        return Sequence { tokens: s.clone() };
                    }
                }
                Sequence {
                    tokens: sequences.last().expect("non-empty").clone(),
                }
            }
        }
    }

    /// Explicit probability table over the data support, outcomes indexed in
    /// lexicographic token order.
    pub fn joint_probs(&self) -> Vec<f64> {
        let n = self.n_tokens();
        let l = self.seq_len();
        let size = n.pow(l as u32);
        let mut table = vec![0.0; size];
        match self {
            DatasetSpec::SyntheticPair => {
                table[0] = 0.5; // 00
                table[3] = 0.5; // 11
            }
            DatasetSpec::ExplicitList {
                sequences, weights, ..
            } => {
                for (s, &w) in sequences.iter().zip(weights.iter()) {
                    let mut idx = 0usize;
                    for &t in s {
                        idx = idx * n + t as usize;
                    }
                    table[idx] += w;
                }
            }
        }
        table
    }
}

/// Forward-noise one clean sequence at time `t`: each position masks
/// independently with probability `1 - alpha_t`; masked IMDM positions draw
/// fresh noise.
pub fn forward_noise(
    x: &Sequence,
    t: f64,
    schedule: &Schedule,
    kind: ModelKind,
    noise_spec: &NoiseSpec,
    rng: &mut Rng,
) -> Result<(LatentSequence, NoiseAssignment)> {
    let alpha = schedule.alpha(t)?;
    let mut states = Vec::with_capacity(x.len());
    let mut eps = Vec::with_capacity(x.len());
    for &tok in &x.tokens {
        if rng.uniform() < 1.0 - alpha {
            states.push(LatentToken::Masked);
            eps.push(match kind {
                ModelKind::Imdm => Some(noise_spec.sample(rng)),
                ModelKind::Mdm => None,
            });
        } else {
            states.push(LatentToken::Data(tok));
            eps.push(None);
        }
    }
    Ok((LatentSequence { states }, NoiseAssignment { eps }))
}

/// Independent forward-noised batch. Item `i` uses the split stream
/// `rng.split(i)`, so the batch is identical however it is sharded.
pub fn make_batch(
    dataset: &DatasetSpec,
    schedule: &Schedule,
    kind: ModelKind,
    noise_spec: &NoiseSpec,
    batch_size: usize,
    rng: &Rng,
) -> Result<Vec<BatchItem>> {
    if batch_size == 0 {
        return Err(invalid("batch size must be >= 1"));
    }
    dataset.validate()?;
    let mut batch = Vec::with_capacity(batch_size);
    for i in 0..batch_size {
        let mut item_rng = rng.split(i as u64);
        let x = dataset.sample(&mut item_rng);
        let t = item_rng.uniform();
        let (z, noise) = forward_noise(&x, t, schedule, kind, noise_spec, &mut item_rng)?;
        batch.push(BatchItem {
            z,
            noise,
            t,
            x_true: x,
        });
    }
    Ok(batch)
}

/// Adam with bias correction over the flat parameter vector.
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize, cfg: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.step += 1;
        let b1t = 1.0 - libm::pow(self.beta1, self.step as f64);
        let b2t = 1.0 - libm::pow(self.beta2, self.step as f64);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (crate::math::sqrt(vhat) + self.eps);
        }
    }
}

/// Loss trace entry recorded every `eval_every` iterations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TracePoint {
    pub iteration: usize,
    pub loss: f64,
}

/// Minimize the Rao-Blackwellized NELBO on the dataset. Fully reproducible
/// from `cfg.seed`; aborts with a diagnostic on NaN loss.
pub fn train(
    model: &mut Denoiser,
    cfg: &TrainConfig,
    dataset: &DatasetSpec,
    schedule: &Schedule,
) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    dataset.validate()?;
    if dataset.n_tokens() != model.dims.n_tokens || dataset.seq_len() != model.dims.seq_len {
        return Err(invalid("dataset shape does not match model dims"));
    }
    let root = Rng::new(cfg.seed, 0);
    let mut adam = Adam::new(model.params.n_params(), cfg);
    let mut flat = model.params.to_flat();
    let mut trace = Vec::new();
    for iter in 0..cfg.iterations {
        let batch_rng = root.split(iter as u64);
        let batch = make_batch(
            dataset,
            schedule,
            model.kind,
            &model.noise,
            cfg.batch_size,
            &batch_rng,
        )?;
        let (loss, grads) = model.loss_and_grads(&batch, schedule, cfg.log_prob_floor)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss {loss} at iteration {iter}"
            )));
        }
        adam.step(&mut flat, &grads.to_flat());
        model.params.from_flat(&flat);
        if !model.params.all_finite() {
            return Err(Error::Training(format!(
                "non-finite parameter after iteration {iter}"
            )));
        }
        if iter % cfg.eval_every == 0 || iter + 1 == cfg.iterations {
            trace.push(TracePoint {
                iteration: iter,
                loss,
            });
        }
    }
    Ok(trace)
}
