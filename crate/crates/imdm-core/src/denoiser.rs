//! Trainable per-position token predictor `x_pred(z_t, t)`.
//!
//! The trunk is deliberately tiny: per-position embeddings are concatenated
//! with a learned time feature and pushed through two GeLU hidden layers and
//! per-position linear heads. This is the smallest shape in which positions
//! can see each other's mask noise, which the infinite-mask routing needs.
//!
//! Masked positions embed as `mask_embed + noise_mlp(eps * scale)`; the
//! noise MLP output layer initializes to exactly zero, so a fresh IMDM is
//! observationally identical to the MDM it wraps. Gradients are analytic
//! throughout and validated by [`Denoiser::grad_check`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::categorical::Categorical;
use crate::error::{invalid, Result};
use crate::kernels::nelbo_weight;
use crate::math::{self, Matrix};
use crate::rng::Rng;
use crate::schedule::Schedule;
use crate::sequence::{LatentSequence, LatentToken, NoiseAssignment, Sequence};

/// Distribution of the injected mask noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseDistribution {
    /// Uniform on [-1, 1).
    Uniform,
    /// Standard normal.
    Gaussian,
}

/// Design of the injected noise: distribution, dimension, scale.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseSpec {
    pub distribution: NoiseDistribution,
    pub dim: usize,
    pub scale: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("noise dimension must be >= 1"));
        }
        if !(self.scale > 0.0) {
            return Err(invalid(format!("noise scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.dim)
            .map(|_| match self.distribution {
                NoiseDistribution::Uniform => rng.uniform_signed(),
                NoiseDistribution::Gaussian => rng.gaussian(),
            })
            .collect()
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            distribution: NoiseDistribution::Uniform,
            dim: 8,
            scale: 1.0,
        }
    }
}

/// Whether the mask embedding consumes noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    Mdm,
    Imdm,
}

/// Static shape of the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelDims {
    pub n_tokens: usize,
    pub seq_len: usize,
    pub embed_dim: usize,
    pub noise_dim: usize,
    pub time_dim: usize,
    pub hidden_width: usize,
}

impl ModelDims {
    pub fn synthetic() -> Self {
        ModelDims {
            n_tokens: 2,
            seq_len: 2,
            embed_dim: 16,
            noise_dim: 8,
            time_dim: 4,
            hidden_width: 64,
        }
    }

    fn noise_hidden(&self) -> usize {
        4 * self.embed_dim
    }

    fn trunk_input(&self) -> usize {
        self.seq_len * self.embed_dim + self.time_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tokens < 2 {
            return Err(invalid("need >= 2 tokens"));
        }
        if self.seq_len == 0 || self.embed_dim == 0 || self.noise_dim == 0 || self.hidden_width == 0
        {
            return Err(invalid("model dimensions must be positive"));
        }
        Ok(())
    }
}

/// All trainable weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    pub token_embed: Matrix,
    pub mask_embed: Vec<f64>,
    pub noise_w1: Matrix,
    pub noise_b1: Vec<f64>,
    pub noise_w2: Matrix,
    pub noise_b2: Vec<f64>,
    pub time_w: Vec<f64>,
    pub time_b: Vec<f64>,
    pub trunk_w1: Matrix,
    pub trunk_b1: Vec<f64>,
    pub trunk_w2: Matrix,
    pub trunk_b2: Vec<f64>,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl DenoiserParams {
    pub fn zeros(dims: &ModelDims) -> Self {
        let d = dims.embed_dim;
        let nh = dims.noise_hidden();
        let w = dims.hidden_width;
        DenoiserParams {
            token_embed: Matrix::zeros(dims.n_tokens, d),
            mask_embed: vec![0.0; d],
            noise_w1: Matrix::zeros(nh, dims.noise_dim),
            noise_b1: vec![0.0; nh],
            noise_w2: Matrix::zeros(d, nh),
            noise_b2: vec![0.0; d],
            time_w: vec![0.0; dims.time_dim],
            time_b: vec![0.0; dims.time_dim],
            trunk_w1: Matrix::zeros(w, dims.trunk_input()),
            trunk_b1: vec![0.0; w],
            trunk_w2: Matrix::zeros(w, w),
            trunk_b2: vec![0.0; w],
            head_w: Matrix::zeros(dims.seq_len * dims.n_tokens, w),
            head_b: vec![0.0; dims.seq_len * dims.n_tokens],
        }
    }

    /// Canonical tensor order; checkpoint manifests and the flat parameter
    /// vector both follow it.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64], Vec<usize>)> {
        vec![
            ("token_embed", &self.token_embed.data[..], vec![self.token_embed.rows, self.token_embed.cols]),
            ("mask_embed", &self.mask_embed[..], vec![self.mask_embed.len()]),
            ("noise_w1", &self.noise_w1.data[..], vec![self.noise_w1.rows, self.noise_w1.cols]),
            ("noise_b1", &self.noise_b1[..], vec![self.noise_b1.len()]),
            ("noise_w2", &self.noise_w2.data[..], vec![self.noise_w2.rows, self.noise_w2.cols]),
            ("noise_b2", &self.noise_b2[..], vec![self.noise_b2.len()]),
            ("time_w", &self.time_w[..], vec![self.time_w.len()]),
            ("time_b", &self.time_b[..], vec![self.time_b.len()]),
            ("trunk_w1", &self.trunk_w1.data[..], vec![self.trunk_w1.rows, self.trunk_w1.cols]),
            ("trunk_b1", &self.trunk_b1[..], vec![self.trunk_b1.len()]),
            ("trunk_w2", &self.trunk_w2.data[..], vec![self.trunk_w2.rows, self.trunk_w2.cols]),
            ("trunk_b2", &self.trunk_b2[..], vec![self.trunk_b2.len()]),
            ("head_w", &self.head_w.data[..], vec![self.head_w.rows, self.head_w.cols]),
            ("head_b", &self.head_b[..], vec![self.head_b.len()]),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.token_embed.data[..],
            &mut self.mask_embed[..],
            &mut self.noise_w1.data[..],
            &mut self.noise_b1[..],
            &mut self.noise_w2.data[..],
            &mut self.noise_b2[..],
            &mut self.time_w[..],
            &mut self.time_b[..],
            &mut self.trunk_w1.data[..],
            &mut self.trunk_b1[..],
            &mut self.trunk_w2.data[..],
            &mut self.trunk_b2[..],
            &mut self.head_w.data[..],
            &mut self.head_b[..],
        ]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t, _)| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (_, t, _) in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn from_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        debug_assert_eq!(off, flat.len());
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t, _)| t.iter().all(|v| v.is_finite()))
    }
}

/// One training example: latent state, attached noise, time, and the clean
/// sequence the masked positions should recover.
#[derive(Debug, Clone)]
pub struct BatchItem {
    pub z: LatentSequence,
    pub noise: NoiseAssignment,
    pub t: f64,
    pub x_true: Sequence,
}

/// Denoiser model: kind + noise design + weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub kind: ModelKind,
    pub dims: ModelDims,
    pub noise: NoiseSpec,
    pub params: DenoiserParams,
}

pub(crate) struct ItemForward {
    noise_in: Vec<Option<(Vec<f64>, Vec<f64>, Vec<f64>)>>, // (scaled eps, pre1, hidden)
    input: Vec<f64>,
    pre1: Vec<f64>,
    h1: Vec<f64>,
    pre2: Vec<f64>,
    h2: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

impl Denoiser {
    /// Fresh random initialization. The noise MLP output layer starts at
    /// exactly zero regardless of kind.
    pub fn init(kind: ModelKind, dims: ModelDims, noise: NoiseSpec, rng: &mut Rng) -> Result<Self> {
        dims.validate()?;
        noise.validate()?;
        if noise.dim != dims.noise_dim {
            return Err(invalid(format!(
                "noise spec dim {} != model noise dim {}",
                noise.dim, dims.noise_dim
            )));
        }
        let mut params = DenoiserParams::zeros(&dims);
        let d = dims.embed_dim;
        fill_uniform(&mut params.token_embed.data, 1.0 / math::sqrt(d as f64), rng);
        fill_uniform(&mut params.mask_embed, 1.0 / math::sqrt(d as f64), rng);
        fill_uniform(&mut params.noise_w1.data, 1.0 / math::sqrt(dims.noise_dim as f64), rng);
        // noise_w2 / noise_b2 stay zero.
        fill_uniform(&mut params.time_w, 0.1, rng);
        fill_uniform(&mut params.time_b, 0.1, rng);
        fill_uniform(&mut params.trunk_w1.data, 1.0 / math::sqrt(dims.trunk_input() as f64), rng);
        fill_uniform(&mut params.trunk_w2.data, 1.0 / math::sqrt(dims.hidden_width as f64), rng);
        fill_uniform(&mut params.head_w.data, 1.0 / math::sqrt(dims.hidden_width as f64), rng);
        Ok(Denoiser {
            kind,
            dims,
            noise,
            params,
        })
    }

    /// Reinterpret these weights as the other kind (weight transfer).
    pub fn with_kind(&self, kind: ModelKind) -> Denoiser {
        let mut m = self.clone();
        m.kind = kind;
        m
    }

    /// True while the noise path is the exact zero map, i.e. the model still
    /// behaves identically as MDM and IMDM.
    pub fn noise_path_is_zero(&self) -> bool {
        self.params.noise_w2.data.iter().all(|&v| v == 0.0)
            && self.params.noise_b2.iter().all(|&v| v == 0.0)
    }

    /// Embed one position. `eps` must be present exactly when the state is
    /// masked and the model is IMDM; MDM takes no noise anywhere.
    pub fn embed(&self, state: LatentToken, eps: Option<&[f64]>) -> Result<Vec<f64>> {
        match state {
            LatentToken::Data(v) => {
                if eps.is_some() {
                    return Err(invalid("noise supplied for an unmasked position"));
                }
                let v = v as usize;
                if v >= self.dims.n_tokens {
                    return Err(invalid(format!("token {v} outside vocabulary")));
                }
                Ok(self.params.token_embed.row(v).to_vec())
            }
            LatentToken::Masked => match self.kind {
                ModelKind::Mdm => {
                    if eps.is_some() {
                        return Err(invalid("MDM takes no mask noise"));
                    }
                    Ok(self.params.mask_embed.clone())
                }
                ModelKind::Imdm => {
                    let eps = eps.ok_or_else(|| invalid("masked IMDM position needs noise"))?;
                    if eps.len() != self.dims.noise_dim {
                        return Err(invalid(format!(
                            "noise dim {} != expected {}",
                            eps.len(),
                            self.dims.noise_dim
                        )));
                    }
                    let (_, _, _, out) = self.noise_path(eps);
                    let mut e = self.params.mask_embed.clone();
                    for (ei, oi) in e.iter_mut().zip(out.iter()) {
                        *ei += oi;
                    }
                    Ok(e)
                }
            },
        }
    }

    fn noise_path(&self, eps: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let scaled: Vec<f64> = eps.iter().map(|&e| e * self.noise.scale).collect();
        let mut pre1 = vec![0.0; self.dims.noise_hidden()];
        self.params.noise_w1.affine(&scaled, &self.params.noise_b1, &mut pre1);
        let hidden: Vec<f64> = pre1.iter().map(|&v| math::gelu(v)).collect();
        let mut out = vec![0.0; self.dims.embed_dim];
        self.params.noise_w2.affine(&hidden, &self.params.noise_b2, &mut out);
        (scaled, pre1, hidden, out)
    }

    fn check_item_shapes(&self, z: &LatentSequence, noise: &NoiseAssignment, t: f64) -> Result<()> {
        if z.len() != self.dims.seq_len {
            return Err(invalid(format!(
                "sequence length {} != model length {}",
                z.len(),
                self.dims.seq_len
            )));
        }
        if noise.len() != z.len() {
            return Err(invalid("noise assignment length mismatch"));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(format!("t must be in [0, 1], got {t}")));
        }
        if self.kind == ModelKind::Imdm && !noise.matches_mask(z) {
            return Err(invalid("IMDM needs noise exactly at masked positions"));
        }
        if self.kind == ModelKind::Mdm && noise.eps.iter().any(|e| e.is_some()) {
            return Err(invalid("MDM takes no mask noise"));
        }
        Ok(())
    }

    pub(crate) fn forward_item(
        &self,
        z: &LatentSequence,
        noise: &NoiseAssignment,
        t: f64,
    ) -> Result<ItemForward> {
        self.check_item_shapes(z, noise, t)?;
        let dims = &self.dims;
        let d = dims.embed_dim;
        let mut input = vec![0.0; dims.trunk_input()];
        let mut noise_in: Vec<Option<(Vec<f64>, Vec<f64>, Vec<f64>)>> = vec![None; dims.seq_len];
        for (pos, state) in z.states.iter().enumerate() {
            let dst = &mut input[pos * d..(pos + 1) * d];
            match state {
                LatentToken::Data(v) => {
                    dst.copy_from_slice(self.params.token_embed.row(*v as usize));
                }
                LatentToken::Masked => {
                    dst.copy_from_slice(&self.params.mask_embed);
                    if self.kind == ModelKind::Imdm {
                        let eps = noise.eps[pos].as_deref().expect("checked above");
                        let (scaled, pre1, hidden, out) = self.noise_path(eps);
                        for (di, oi) in dst.iter_mut().zip(out.iter()) {
                            *di += oi;
                        }
                        noise_in[pos] = Some((scaled, pre1, hidden));
                    }
                }
            }
        }
        let toff = dims.seq_len * d;
        for i in 0..dims.time_dim {
            input[toff + i] = self.params.time_w[i] * t + self.params.time_b[i];
        }

        let mut pre1 = vec![0.0; dims.hidden_width];
        self.params.trunk_w1.affine(&input, &self.params.trunk_b1, &mut pre1);
        let h1: Vec<f64> = pre1.iter().map(|&v| math::gelu(v)).collect();
        let mut pre2 = vec![0.0; dims.hidden_width];
        self.params.trunk_w2.affine(&h1, &self.params.trunk_b2, &mut pre2);
        let h2: Vec<f64> = pre2.iter().map(|&v| math::gelu(v)).collect();
        let mut logits = vec![0.0; dims.seq_len * dims.n_tokens];
        self.params.head_w.affine(&h2, &self.params.head_b, &mut logits);

        let mut probs = Vec::with_capacity(dims.seq_len);
        for pos in 0..dims.seq_len {
            let mut p = logits[pos * dims.n_tokens..(pos + 1) * dims.n_tokens].to_vec();
            math::softmax(&mut p);
            probs.push(p);
        }
        Ok(ItemForward {
            noise_in,
            input,
            pre1,
            h1,
            pre2,
            h2,
            probs,
        })
    }

    /// Per-position prediction over the data vocabulary. Pure function of
    /// its inputs: identical calls agree bit for bit.
    pub fn predict(
        &self,
        z: &LatentSequence,
        noise: &NoiseAssignment,
        t: f64,
    ) -> Result<Vec<Categorical>> {
        let fwd = self.forward_item(z, noise, t)?;
        fwd.probs.into_iter().map(Categorical::new).collect()
    }

    /// Accumulate parameter gradients for one item given d(loss)/d(logits).
    pub(crate) fn backward_item(
        &self,
        z: &LatentSequence,
        t: f64,
        fwd: &ItemForward,
        dlogits: &[f64],
        grads: &mut DenoiserParams,
    ) {
        let dims = &self.dims;
        let d = dims.embed_dim;

        grads.head_w.add_outer(dlogits, &fwd.h2);
        axpy(&mut grads.head_b, dlogits);
        let mut dh2 = vec![0.0; dims.hidden_width];
        self.params.head_w.add_t_matvec(dlogits, &mut dh2);

        let da2: Vec<f64> = dh2
            .iter()
            .zip(fwd.pre2.iter())
            .map(|(&g, &pre)| g * math::gelu_prime(pre))
            .collect();
        grads.trunk_w2.add_outer(&da2, &fwd.h1);
        axpy(&mut grads.trunk_b2, &da2);
        let mut dh1 = vec![0.0; dims.hidden_width];
        self.params.trunk_w2.add_t_matvec(&da2, &mut dh1);

        let da1: Vec<f64> = dh1
            .iter()
            .zip(fwd.pre1.iter())
            .map(|(&g, &pre)| g * math::gelu_prime(pre))
            .collect();
        grads.trunk_w1.add_outer(&da1, &fwd.input);
        axpy(&mut grads.trunk_b1, &da1);
        let mut dinput = vec![0.0; dims.trunk_input()];
        self.params.trunk_w1.add_t_matvec(&da1, &mut dinput);

        for (pos, state) in z.states.iter().enumerate() {
            let de = &dinput[pos * d..(pos + 1) * d];
            match state {
                LatentToken::Data(v) => {
                    let row = grads.token_embed.row_mut(*v as usize);
                    for (g, &x) in row.iter_mut().zip(de.iter()) {
                        *g += x;
                    }
                }
                LatentToken::Masked => {
                    axpy(&mut grads.mask_embed, de);
                    if let Some((scaled, pre1n, hidden)) = &fwd.noise_in[pos] {
                        grads.noise_w2.add_outer(de, hidden);
                        axpy(&mut grads.noise_b2, de);
                        let mut dg = vec![0.0; dims.noise_hidden()];
                        self.params.noise_w2.add_t_matvec(de, &mut dg);
                        let dn1: Vec<f64> = dg
                            .iter()
                            .zip(pre1n.iter())
                            .map(|(&g, &pre)| g * math::gelu_prime(pre))
                            .collect();
                        grads.noise_w1.add_outer(&dn1, scaled);
                        axpy(&mut grads.noise_b1, &dn1);
                    }
                }
            }
        }

        let toff = dims.seq_len * d;
        for i in 0..dims.time_dim {
            let dtf = dinput[toff + i];
            grads.time_w[i] += t * dtf;
            grads.time_b[i] += dtf;
        }
    }

    /// Mean Rao-Blackwellized NELBO over the batch's masked positions, with
    /// the log-probability floored at `log_prob_floor` (floored terms are
    /// constants: their gradient is zero), plus exact analytic gradients.
    pub fn loss_and_grads(
        &self,
        batch: &[BatchItem],
        schedule: &Schedule,
        log_prob_floor: f64,
    ) -> Result<(f64, DenoiserParams)> {
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let n_masked: usize = batch.iter().map(|b| b.z.masked_positions().count()).sum();
        let mut grads = DenoiserParams::zeros(&self.dims);
        if n_masked == 0 {
            return Ok((0.0, grads));
        }
        let inv = 1.0 / n_masked as f64;
        let n = self.dims.n_tokens;
        let mut loss = 0.0;
        for item in batch {
            if item.x_true.len() != self.dims.seq_len {
                return Err(invalid("clean sequence length mismatch"));
            }
            let fwd = self.forward_item(&item.z, &item.noise, item.t)?;
            let w = nelbo_weight(item.t, schedule)?;
            let mut dlogits = vec![0.0; self.dims.seq_len * n];
            for pos in item.z.masked_positions() {
                let truth = item.x_true.tokens[pos] as usize;
                let p = fwd.probs[pos][truth];
                let logp = if p > 0.0 { math::ln(p) } else { f64::NEG_INFINITY };
                if logp > log_prob_floor {
                    loss += w * logp * inv;
                    let c = w * inv;
                    let dl = &mut dlogits[pos * n..(pos + 1) * n];
                    for (j, dv) in dl.iter_mut().enumerate() {
                        let indicator = if j == truth { 1.0 } else { 0.0 };
                        *dv += c * (indicator - fwd.probs[pos][j]);
                    }
                } else {
                    loss += w * log_prob_floor * inv;
                }
            }
            self.backward_item(&item.z, item.t, &fwd, &dlogits, &mut grads);
        }
        Ok((loss, grads))
    }

    fn loss_only(&self, batch: &[BatchItem], schedule: &Schedule, floor: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let n_masked: usize = batch.iter().map(|b| b.z.masked_positions().count()).sum();
        if n_masked == 0 {
            return Ok(0.0);
        }
        let inv = 1.0 / n_masked as f64;
        let mut loss = 0.0;
        for item in batch {
            let fwd = self.forward_item(&item.z, &item.noise, item.t)?;
            let w = nelbo_weight(item.t, schedule)?;
            for pos in item.z.masked_positions() {
                let truth = item.x_true.tokens[pos] as usize;
                let p = fwd.probs[pos][truth];
                let logp = if p > 0.0 { math::ln(p) } else { f64::NEG_INFINITY };
                loss += w * logp.max(floor) * inv;
            }
        }
        Ok(loss)
    }

    /// Central finite differences against the analytic gradient over
    /// `n_coords` randomly chosen coordinates; returns the worst relative
    /// error. `h` must sit in `[1e-6, 1e-3]`.
    pub fn grad_check(
        &self,
        batch: &[BatchItem],
        schedule: &Schedule,
        log_prob_floor: f64,
        h: f64,
        n_coords: usize,
        rng: &mut Rng,
    ) -> Result<f64> {
        if !(1e-6..=1e-3).contains(&h) {
            return Err(invalid(format!("step h must be in [1e-6, 1e-3], got {h}")));
        }
        let (_, grads) = self.loss_and_grads(batch, schedule, log_prob_floor)?;
        let analytic = grads.to_flat();
        let base = self.params.to_flat();
        let mut probe = self.clone();
        let mut worst = 0.0f64;
        for _ in 0..n_coords {
            let idx = rng.below(base.len());
            let mut flat = base.clone();
            flat[idx] = base[idx] + h;
            probe.params.from_flat(&flat);
            let up = probe.loss_only(batch, schedule, log_prob_floor)?;
            flat[idx] = base[idx] - h;
            probe.params.from_flat(&flat);
            let down = probe.loss_only(batch, schedule, log_prob_floor)?;
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[idx].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[idx] - numeric).abs() / denom);
        }
        Ok(worst)
    }
}

fn fill_uniform(slice: &mut [f64], scale: f64, rng: &mut Rng) {
    for v in slice.iter_mut() {
        *v = rng.uniform_signed() * scale;
    }
}

fn axpy(acc: &mut [f64], x: &[f64]) {
    for (a, &b) in acc.iter_mut().zip(x.iter()) {
        *a += b;
    }
}
