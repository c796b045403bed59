//! Few-step ancestral decoding for MDM and IMDM.
//!
//! Decoding starts fully masked (IMDM: with fresh noise per masked position)
//! and applies the reverse kernel on a uniform time grid. Per step and
//! masked position: unmask with probability `(alpha_s - alpha_t)/(1 - alpha_t)`
//! to a token drawn from the model prediction; otherwise IMDM keeps the
//! current noise with probability `alpha_t/alpha_s` and redraws it otherwise.
//! That keep/redraw/discard lifecycle is the operational reading of the
//! IMDM posterior's mask branch. The final knot forces every remaining
//! position to unmask. Sampling is plain categorical, without temperature,
//! top-k, or top-p.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::categorical::Categorical;
use crate::denoiser::{Denoiser, ModelKind};
use crate::error::{invalid, Result};
use crate::rng::Rng;
use crate::schedule::{make_grid, Schedule};
use crate::sequence::{LatentSequence, LatentToken, NoiseAssignment, Sequence};

/// Decoding setup.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DecodeConfig {
    pub steps: usize,
    pub mode: ModelKind,
    pub length: usize,
    /// Fixed (position, token) pairs that are never altered.
    pub conditioning: Vec<(usize, u32)>,
    pub seed: u64,
    /// Record per-step mask sets and final noise for analysis.
    pub log_trajectory: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            steps: 1,
            mode: ModelKind::Imdm,
            length: 2,
            conditioning: Vec::new(),
            seed: 0,
            log_trajectory: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self, model: &Denoiser) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("decoding needs at least one step"));
        }
        if self.length != model.dims.seq_len {
            return Err(invalid(format!(
                "decode length {} != model length {}",
                self.length, model.dims.seq_len
            )));
        }
        for &(pos, tok) in &self.conditioning {
            if pos >= self.length {
                return Err(invalid(format!("conditioned position {pos} out of range")));
            }
            if tok as usize >= model.dims.n_tokens {
                return Err(invalid(format!("conditioned token {tok} outside vocabulary")));
            }
        }
        // Weight transfer both ways is fine while the noise path is zero.
        if self.mode != model.kind && !model.noise_path_is_zero() {
            return Err(invalid(
                "decode mode differs from model kind and the noise path is not zero",
            ));
        }
        Ok(())
    }
}

/// Per-trajectory record for the event-probability and branching checks.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryLog {
    /// Bitmask of masked positions before each step.
    pub mask_sets: Vec<u64>,
    /// Step index at which each position unmasked.
    pub unmask_step: Vec<usize>,
    /// Noise vector each position held at the moment it unmasked (IMDM).
    pub final_eps: Vec<Option<Vec<f64>>>,
    /// Counts of keep-noise and fresh-noise branch firings (IMDM).
    pub keep_events: usize,
    pub fresh_events: usize,
}

/// Decode one sequence. The caller owns the rng; use [`decode_batch`] for
/// the standard per-trajectory stream discipline.
pub fn decode(
    model: &Denoiser,
    cfg: &DecodeConfig,
    schedule: &Schedule,
    rng: &mut Rng,
) -> Result<(Sequence, Option<TrajectoryLog>)> {
    cfg.validate(model)?;
    let grid = make_grid(cfg.steps)?;
    let len = cfg.length;
    let imdm = cfg.mode == ModelKind::Imdm;

    let mut z = LatentSequence::fully_masked(len);
    let mut noise = NoiseAssignment::none(len);
    for &(pos, tok) in &cfg.conditioning {
        z.states[pos] = LatentToken::Data(tok);
    }
    if imdm {
        for pos in 0..len {
            if z.states[pos].is_masked() {
                noise.eps[pos] = Some(model.noise.sample(rng));
            }
        }
    }

    let mut log = cfg.log_trajectory.then(|| TrajectoryLog {
        unmask_step: vec![usize::MAX; len],
        final_eps: vec![None; len],
        ..TrajectoryLog::default()
    });

    // Predict with the model's own kind; weight transfer is only allowed
    // when the noise path is zero, where both kinds agree.
    let eval_model;
    let model_ref = if model.kind == cfg.mode {
        model
    } else {
        eval_model = model.with_kind(cfg.mode);
        &eval_model
    };

    for k in 0..grid.steps() {
        let (t, s) = grid.step(k);
        let (alpha_t, _) = schedule.alpha_at(t)?;
        let (alpha_s, _) = schedule.alpha_at(s)?;
        let last = k + 1 == grid.steps();
        // The final knot is t = 0: force the clipped endpoint to act as
        // alpha_s = 1 so every position unmasks.
        let p_unmask = if last {
            1.0
        } else {
            (alpha_s - alpha_t) / (1.0 - alpha_t)
        };
        let alpha_ts = alpha_t / alpha_s;

        if let Some(log) = log.as_mut() {
            let mut bits = 0u64;
            for pos in z.masked_positions() {
                bits |= 1 << pos;
            }
            log.mask_sets.push(bits);
        }

        let preds = model_ref.predict(&z, &noise, t)?;
        for pos in 0..len {
            if !z.states[pos].is_masked() {
                continue;
            }
            let u = rng.uniform();
            if u < p_unmask {
                let tok = preds[pos].sample(rng) as u32;
                if let Some(log) = log.as_mut() {
                    log.unmask_step[pos] = k;
                    log.final_eps[pos] = noise.eps[pos].clone();
                }
                z.states[pos] = LatentToken::Data(tok);
                noise.eps[pos] = None;
            } else if imdm {
                let v = rng.uniform();
                if v < alpha_ts {
                    if let Some(log) = log.as_mut() {
                        log.keep_events += 1;
                    }
                } else {
                    noise.eps[pos] = Some(model.noise.sample(rng));
                    if let Some(log) = log.as_mut() {
                        log.fresh_events += 1;
                    }
                }
            }
        }
    }

    debug_assert!(z.fully_unmasked(), "decode left masked positions");
    for &(pos, tok) in &cfg.conditioning {
        debug_assert_eq!(z.states[pos], LatentToken::Data(tok));
    }
    Ok((z.to_sequence()?, log))
}

/// `n` independent trajectories; trajectory `i` runs on `root.split(i)` with
/// `root = Rng::new(cfg.seed, 0)`, so results do not depend on sharding.
pub fn decode_batch(
    model: &Denoiser,
    cfg: &DecodeConfig,
    schedule: &Schedule,
    n: usize,
) -> Result<Vec<Sequence>> {
    if n == 0 {
        return Err(invalid("need at least one trajectory"));
    }
    let root = Rng::new(cfg.seed, 0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = root.split(i as u64);
        let (seq, _) = decode(model, cfg, schedule, &mut rng)?;
        out.push(seq);
    }
    Ok(out)
}

/// Decode with trajectory logs, same stream discipline as [`decode_batch`].
pub fn decode_batch_logged(
    model: &Denoiser,
    cfg: &DecodeConfig,
    schedule: &Schedule,
    n: usize,
) -> Result<Vec<(Sequence, TrajectoryLog)>> {
    if n == 0 {
        return Err(invalid("need at least one trajectory"));
    }
    let mut cfg = cfg.clone();
    cfg.log_trajectory = true;
    let root = Rng::new(cfg.seed, 0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = root.split(i as u64);
        let (seq, log) = decode(model, &cfg, schedule, &mut rng)?;
        out.push((seq, log.expect("trajectory logging enabled")));
    }
    Ok(out)
}

/// Single full-mask prediction as used by one-step decoding and the probe
/// tables: the per-position categoricals at t = 1 for the given noise.
pub fn full_mask_prediction(model: &Denoiser, noise: &NoiseAssignment) -> Result<Vec<Categorical>> {
    let z = LatentSequence::fully_masked(model.dims.seq_len);
    model.predict(&z, noise, 1.0)
}
