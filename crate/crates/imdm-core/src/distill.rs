//! Few-step distillation: step-compression against a multi-step teacher and
//! rectified-coupling training on teacher-generated pairs.
//!
//! Step compression matches the student's single reverse step against the
//! teacher's composed multi-step prediction from a shared initial state
//! (including its continuous noise), with forward KL (teacher target given,
//! student optimized). Rectified coupling pairs each generated token with
//! the last noise vector it held before unmasking; the student then trains
//! on the standard NELBO with the data distribution replaced by the coupled
//! pairs, reusing the stored noise whenever a position is masked. Routing
//! noise to outcomes this way is exactly what the partition-and-map
//! construction asks of an optimal infinite-mask model.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::DEFAULT_CAPACITY;
use crate::categorical::Categorical;
use crate::denoiser::{BatchItem, Denoiser, ModelKind, NoiseSpec};
use crate::error::{invalid, Error, Result};
use crate::rng::Rng;
use crate::sampler::{decode, DecodeConfig};
use crate::schedule::{make_grid, Schedule};
use crate::sequence::{LatentSequence, LatentToken, NoiseAssignment, Sequence};
use crate::training::{Adam, DatasetSpec, TrainConfig, TracePoint};

/// Anything that can stand in as the teacher's `x_pred(z_t, t)`; tests plug
/// in exact-oracle predictors alongside trained denoisers.
pub trait TokenPredictor {
    fn kind(&self) -> ModelKind;
    fn noise_spec(&self) -> &NoiseSpec;
    fn seq_len(&self) -> usize;
    fn n_tokens(&self) -> usize;
    fn predict(
        &self,
        z: &LatentSequence,
        noise: &NoiseAssignment,
        t: f64,
    ) -> Result<Vec<Categorical>>;
}

impl TokenPredictor for Denoiser {
    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn noise_spec(&self) -> &NoiseSpec {
        &self.noise
    }

    fn seq_len(&self) -> usize {
        self.dims.seq_len
    }

    fn n_tokens(&self) -> usize {
        self.dims.n_tokens
    }

    fn predict(
        &self,
        z: &LatentSequence,
        noise: &NoiseAssignment,
        t: f64,
    ) -> Result<Vec<Categorical>> {
        Denoiser::predict(self, z, noise, t)
    }
}

/// KL orientation of the step-compression loss. Only the distillation
/// convention (teacher target, student optimized) is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KlDirection {
    TeacherToStudent,
}

/// Distillation hyperparameters shared by both recipes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DistillConfig {
    /// Rounds of the outer loop; 0 is the identity (skip entirely).
    pub rounds: usize,
    pub iterations_per_round: usize,
    /// Teacher steps compressed into one student step per round.
    pub inner_steps: usize,
    /// Resolution of the grid the teacher walks.
    pub teacher_steps: usize,
    pub kl_direction: KlDirection,
    /// Pairs generated per coupling construction.
    pub coupling_size: usize,
    /// Teacher sampler steps when building a coupling.
    pub coupling_steps: usize,
    /// Rollouts per Monte Carlo target during training.
    pub mc_rollouts: usize,
    /// Fresh-noise quadrature draws per branch in exact composition.
    pub n_eps_quad: usize,
    pub train: TrainConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            rounds: 2,
            iterations_per_round: 2_000,
            inner_steps: 2,
            teacher_steps: 16,
            kl_direction: KlDirection::TeacherToStudent,
            coupling_size: 10_000,
            coupling_steps: 16,
            mc_rollouts: 64,
            n_eps_quad: 64,
            train: TrainConfig::default(),
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds > 0 && self.inner_steps < 2 {
            return Err(invalid("inner_steps must be >= 2"));
        }
        if self.inner_steps > self.teacher_steps {
            return Err(invalid("inner_steps cannot exceed teacher_steps"));
        }
        if self.mc_rollouts == 0 || self.n_eps_quad == 0 {
            return Err(invalid("mc_rollouts and n_eps_quad must be positive"));
        }
        self.train.validate()
    }
}

/// How step-compression targets are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// Full enumeration of the composed kernels, fresh-noise branches
    /// marginalized over a fixed quadrature of draws.
    Exact { n_eps_quad: usize },
    /// Average of `rollouts` teacher rollouts from the shared state.
    MonteCarlo { rollouts: usize },
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum PosKey {
    Tok(u32),
    Mask(u32),
}

/// Teacher's composed prediction of the state at `s`, starting from
/// `(z_t, noise)` at `t` and stepping through `inner_steps` kernel
/// applications. Returns one row per position over `V + mask` (mask last).
#[allow(clippy::too_many_arguments)]
pub fn sdtt_targets<T: TokenPredictor>(
    teacher: &T,
    z_t: &LatentSequence,
    noise: &NoiseAssignment,
    t: f64,
    s: f64,
    inner_steps: usize,
    mode: TargetMode,
    schedule: &Schedule,
    rng: &Rng,
) -> Result<Vec<Categorical>> {
    if inner_steps == 0 {
        return Err(invalid("need at least one inner step"));
    }
    if s >= t {
        return Err(invalid(format!("need s < t, got s={s} t={t}")));
    }
    let knots: Vec<f64> = (0..=inner_steps)
        .map(|i| t + (s - t) * i as f64 / inner_steps as f64)
        .collect();
    match mode {
        TargetMode::Exact { n_eps_quad } => {
            exact_targets(teacher, z_t, noise, &knots, n_eps_quad, schedule, rng)
        }
        TargetMode::MonteCarlo { rollouts } => {
            mc_targets(teacher, z_t, noise, &knots, rollouts, schedule, rng)
        }
    }
}

fn branch_weights(schedule: &Schedule, t: f64, s: f64) -> Result<(f64, f64, f64)> {
    let (alpha_t, _) = schedule.alpha_at(t)?;
    let (alpha_s, _) = schedule.alpha_at(s)?;
    let denom = 1.0 - alpha_t;
    let unmask = (alpha_s - alpha_t) / denom;
    let alpha_ts = alpha_t / alpha_s;
    let keep = alpha_ts * (1.0 - alpha_s) / denom;
    let fresh = (1.0 - alpha_ts) * (1.0 - alpha_s) / denom;
    Ok((unmask, keep, fresh))
}

fn exact_targets<T: TokenPredictor>(
    teacher: &T,
    z_t: &LatentSequence,
    noise: &NoiseAssignment,
    knots: &[f64],
    n_eps_quad: usize,
    schedule: &Schedule,
    rng: &Rng,
) -> Result<Vec<Categorical>> {
    let l = teacher.seq_len();
    let n = teacher.n_tokens();
    let imdm = teacher.kind() == ModelKind::Imdm;

    // Noise registry: id -> vector. Initial masks take ids 0..l.
    let mut registry: Vec<Vec<f64>> = Vec::new();
    let mut init = Vec::with_capacity(l);
    for pos in 0..l {
        match z_t.states[pos] {
            LatentToken::Data(v) => init.push(PosKey::Tok(v)),
            LatentToken::Masked => {
                let id = registry.len() as u32;
                if imdm {
                    registry.push(
                        noise.eps[pos]
                            .clone()
                            .ok_or_else(|| invalid("masked position without noise"))?,
                    );
                } else {
                    registry.push(Vec::new());
                }
                init.push(PosKey::Mask(id));
            }
        }
    }

    let mut frontier: BTreeMap<Vec<PosKey>, f64> = BTreeMap::new();
    frontier.insert(init, 1.0);

    for step in 0..knots.len() - 1 {
        let (unmask, keep, fresh) = branch_weights(schedule, knots[step], knots[step + 1])?;
        // Shared quadrature nodes per (step, position).
        let mut fresh_ids = vec![Vec::new(); l];
        if imdm {
            for (pos, slots) in fresh_ids.iter_mut().enumerate() {
                let mut node_rng = rng.split((step * l + pos) as u64);
                for _ in 0..n_eps_quad {
                    let id = registry.len() as u32;
                    registry.push(teacher.noise_spec().sample(&mut node_rng));
                    slots.push(id);
                }
            }
        }

        let mut next: BTreeMap<Vec<PosKey>, f64> = BTreeMap::new();
        for (state, prob) in &frontier {
            let masked: Vec<usize> = state
                .iter()
                .enumerate()
                .filter(|(_, k)| matches!(k, PosKey::Mask(_)))
                .map(|(i, _)| i)
                .collect();
            if masked.is_empty() {
                *next.entry(state.clone()).or_insert(0.0) += prob;
                continue;
            }
            let per_pos_branches = if imdm { n + 1 + n_eps_quad } else { n + 1 };
            let mut expansion = 1usize;
            for _ in &masked {
                expansion = expansion.saturating_mul(per_pos_branches);
            }
            if next.len().saturating_add(expansion) > DEFAULT_CAPACITY {
                return Err(Error::Capacity {
                    requested: next.len().saturating_add(expansion),
                    limit: DEFAULT_CAPACITY,
                });
            }

            let (z, nz) = realize_state(state, &registry, imdm);
            let preds = teacher.predict(&z, &nz, knots[step])?;

            // Per masked position: (replacement key, branch probability).
            let mut options: Vec<Vec<(PosKey, f64)>> = Vec::with_capacity(masked.len());
            for &pos in &masked {
                let mut opts = Vec::with_capacity(per_pos_branches);
                for v in 0..n {
                    let p = unmask * preds[pos].prob(v);
                    if p > 0.0 {
                        opts.push((PosKey::Tok(v as u32), p));
                    }
                }
                if imdm {
                    if keep > 0.0 {
                        opts.push((state[pos].clone(), keep));
                    }
                    let w = fresh / n_eps_quad as f64;
                    if w > 0.0 {
                        for &id in &fresh_ids[pos] {
                            opts.push((PosKey::Mask(id), w));
                        }
                    }
                } else {
                    let stay = keep + fresh;
                    if stay > 0.0 {
                        opts.push((state[pos].clone(), stay));
                    }
                }
                options.push(opts);
            }

            // Cartesian product over masked positions.
            let mut stack: Vec<(usize, Vec<PosKey>, f64)> = vec![(0, state.clone(), *prob)];
            while let Some((depth, cur, p)) = stack.pop() {
                if depth == masked.len() {
                    *next.entry(cur).or_insert(0.0) += p;
                    continue;
                }
                let pos = masked[depth];
                for (key, bp) in &options[depth] {
                    let mut child = cur.clone();
                    child[pos] = key.clone();
                    stack.push((depth + 1, child, p * bp));
                }
            }
        }
        frontier = next;
    }

    let mut rows = vec![vec![0.0; n + 1]; l];
    for (state, prob) in &frontier {
        for pos in 0..l {
            match &state[pos] {
                PosKey::Tok(v) => rows[pos][*v as usize] += prob,
                PosKey::Mask(_) => rows[pos][n] += prob,
            }
        }
    }
    rows.into_iter().map(Categorical::new).collect()
}

fn realize_state(
    state: &[PosKey],
    registry: &[Vec<f64>],
    imdm: bool,
) -> (LatentSequence, NoiseAssignment) {
    let states = state
        .iter()
        .map(|k| match k {
            PosKey::Tok(v) => LatentToken::Data(*v),
            PosKey::Mask(_) => LatentToken::Masked,
        })
        .collect();
    let eps = state
        .iter()
        .map(|k| match k {
            PosKey::Mask(id) if imdm => Some(registry[*id as usize].clone()),
            _ => None,
        })
        .collect();
    (LatentSequence { states }, NoiseAssignment { eps })
}

fn mc_targets<T: TokenPredictor>(
    teacher: &T,
    z_t: &LatentSequence,
    noise: &NoiseAssignment,
    knots: &[f64],
    rollouts: usize,
    schedule: &Schedule,
    rng: &Rng,
) -> Result<Vec<Categorical>> {
    let l = teacher.seq_len();
    let n = teacher.n_tokens();
    let imdm = teacher.kind() == ModelKind::Imdm;
    let mut rows = vec![vec![0.0; n + 1]; l];
    let inv = 1.0 / rollouts as f64;
    for m in 0..rollouts {
        let mut roll_rng = rng.split(m as u64);
        let mut z = z_t.clone();
        let mut nz = noise.clone();
        for step in 0..knots.len() - 1 {
            let (unmask, keep, fresh) = branch_weights(schedule, knots[step], knots[step + 1])?;
            let last = step + 1 == knots.len() - 1;
            let preds = teacher.predict(&z, &nz, knots[step])?;
            for pos in 0..l {
                if !z.states[pos].is_masked() {
                    continue;
                }
                if last {
                    // Final inner step contributes its exact one-position
                    // row instead of a sampled point, cutting MC variance.
                    for v in 0..n {
                        rows[pos][v] += inv * unmask * preds[pos].prob(v);
                    }
                    rows[pos][n] += inv * (keep + fresh);
                    continue;
                }
                let u = roll_rng.uniform();
                if u < unmask {
                    let tok = preds[pos].sample(&mut roll_rng) as u32;
                    z.states[pos] = LatentToken::Data(tok);
                    nz.eps[pos] = None;
                } else if imdm {
                    let v = roll_rng.uniform();
                    if v >= keep / (keep + fresh) {
                        nz.eps[pos] = Some(teacher.noise_spec().sample(&mut roll_rng));
                    }
                }
            }
        }
        for pos in 0..l {
            if let LatentToken::Data(v) = z.states[pos] {
                rows[pos][v as usize] += inv;
            }
        }
    }
    rows.into_iter().map(Categorical::new).collect()
}

/// One round of step compression: train `student` to match `teacher`'s
/// `inner_steps`-step predictions in a single step. Returns the loss trace.
/// Callers implement step-doubling by swapping the returned student in as
/// the next round's teacher.
pub fn sdtt_round(
    student: &mut Denoiser,
    teacher: &Denoiser,
    cfg: &DistillConfig,
    dataset: &DatasetSpec,
    schedule: &Schedule,
    round_seed: u64,
) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    if student.dims != teacher.dims {
        return Err(invalid("student and teacher must share one architecture family"));
    }
    let grid = make_grid(cfg.teacher_steps)?;
    let n = student.dims.n_tokens;
    let root = Rng::new(round_seed, 0);
    let mut adam = Adam::new(student.params.n_params(), &cfg.train);
    let mut flat = student.params.to_flat();
    let mut trace = Vec::new();
    let mut initial_loss = f64::NAN;
    let mut high_loss_streak = 0usize;

    for iter in 0..cfg.iterations_per_round {
        let iter_rng = root.split(iter as u64);
        let mut grads = crate::denoiser::DenoiserParams::zeros(&student.dims);
        let mut loss = 0.0;
        let mut n_masked_total = 0usize;

        let mut items = Vec::with_capacity(cfg.train.batch_size);
        for b in 0..cfg.train.batch_size {
            let mut item_rng = iter_rng.split(b as u64);
            let x = dataset.sample(&mut item_rng);
            let k = item_rng.below(cfg.teacher_steps - cfg.inner_steps + 1);
            let t = grid.knots()[k];
            let s = grid.knots()[k + cfg.inner_steps];
            let (z, nz) = crate::training::forward_noise(
                &x,
                t,
                schedule,
                student.kind,
                &student.noise,
                &mut item_rng,
            )?;
            n_masked_total += z.masked_positions().count();
            items.push((z, nz, t, s, item_rng));
        }
        if n_masked_total == 0 {
            continue;
        }
        let inv = 1.0 / n_masked_total as f64;

        for (z, nz, t, s, item_rng) in &items {
            let targets = sdtt_targets(
                teacher,
                z,
                nz,
                *t,
                *s,
                cfg.inner_steps,
                TargetMode::MonteCarlo {
                    rollouts: cfg.mc_rollouts,
                },
                schedule,
                item_rng,
            )?;
            let fwd = student.forward_item(z, nz, *t)?;
            let (alpha_t, _) = schedule.alpha_at(*t)?;
            let (alpha_s, _) = schedule.alpha_at(*s)?;
            let unmask = (alpha_s - alpha_t) / (1.0 - alpha_t);
            let mask_mass = (1.0 - alpha_s) / (1.0 - alpha_t);
            let mut dlogits = vec![0.0; student.dims.seq_len * n];
            for pos in z.masked_positions() {
                let target = &targets[pos];
                let sigma = &fwd.probs[pos];
                // KL(target || student one-step row); the mask slot is a
                // schedule constant on both sides.
                let t_data: f64 = (0..n).map(|v| target.prob(v)).sum();
                for v in 0..n {
                    let tv = target.prob(v);
                    if tv > 0.0 {
                        loss += inv * tv * crate::math::ln(tv / (unmask * sigma[v]));
                    }
                }
                let tm = target.prob(n);
                if tm > 0.0 && mask_mass > 0.0 {
                    loss += inv * tm * crate::math::ln(tm / mask_mass);
                }
                let dl = &mut dlogits[pos * n..(pos + 1) * n];
                for (v, slot) in dl.iter_mut().enumerate() {
                    *slot += inv * (sigma[v] * t_data - target.prob(v));
                }
            }
            student.backward_item(z, *t, &fwd, &dlogits, &mut grads);
        }

        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite distillation loss at iteration {iter}"
            )));
        }
        if initial_loss.is_nan() {
            initial_loss = loss.max(1e-9);
        }
        if loss > 10.0 * initial_loss {
            high_loss_streak += 1;
            if high_loss_streak >= 1000 {
                return Err(Error::Training(format!(
                    "divergence: loss {loss} above 10x initial {initial_loss} for 1000 iterations"
                )));
            }
        } else {
            high_loss_streak = 0;
        }

        adam.step(&mut flat, &grads.to_flat());
        student.params.from_flat(&flat);
        if cfg.train.should_trace(iter, cfg.iterations_per_round) {
            trace.push(TracePoint {
                iteration: iter,
                loss,
            });
        }
    }
    Ok(trace)
}

/// Run `cfg.rounds` rounds of step compression with step-doubling: each
/// round's student becomes the next round's teacher.
pub fn sdtt_rounds(
    base: &Denoiser,
    cfg: &DistillConfig,
    dataset: &DatasetSpec,
    schedule: &Schedule,
) -> Result<(Denoiser, Vec<Vec<TracePoint>>)> {
    cfg.validate()?;
    let mut teacher = base.clone();
    let mut student = base.clone();
    let mut traces = Vec::new();
    for round in 0..cfg.rounds {
        let seed = cfg.train.seed ^ (0x5D77 + round as u64);
        let trace = sdtt_round(&mut student, &teacher, cfg, dataset, schedule, seed)?;
        traces.push(trace);
        teacher = student.clone();
    }
    Ok((student, traces))
}

/// One (noise assignment, generated sequence) pair of a rectified coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPair {
    /// Noise each position held when it unmasked; `None` for MDM teachers.
    pub eps: Vec<Option<Vec<f64>>>,
    pub tokens: Sequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProvenance {
    pub teacher_kind: ModelKind,
    pub steps: usize,
    pub seed: u64,
}

/// Teacher-generated rectified coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    pub pairs: Vec<CouplingPair>,
    pub provenance: CouplingProvenance,
}

impl CouplingSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Build a rectified coupling: decode `n_pairs` sequences with the teacher
/// at `steps` steps, recording for each position the last noise vector it
/// held at the moment it unmasked.
pub fn redi_build_coupling(
    teacher: &Denoiser,
    schedule: &Schedule,
    steps: usize,
    n_pairs: usize,
    seed: u64,
) -> Result<CouplingSet> {
    let cfg = DecodeConfig {
        steps,
        mode: teacher.kind,
        length: teacher.dims.seq_len,
        conditioning: Vec::new(),
        seed,
        log_trajectory: true,
    };
    let root = Rng::new(seed, 0);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs {
        let mut rng = root.split(i as u64);
        let (seq, log) = decode(teacher, &cfg, schedule, &mut rng)?;
        let log = log.expect("trajectory logging enabled");
        pairs.push(CouplingPair {
            eps: log.final_eps,
            tokens: seq,
        });
    }
    Ok(CouplingSet {
        pairs,
        provenance: CouplingProvenance {
            teacher_kind: teacher.kind,
            steps,
            seed,
        },
    })
}

/// Sample a rectified training batch: forward-noise a coupled sequence but
/// reuse its stored noise at positions that become masked.
pub fn make_redi_batch(
    coupling: &CouplingSet,
    schedule: &Schedule,
    kind: ModelKind,
    noise_spec: &NoiseSpec,
    batch_size: usize,
    rng: &Rng,
) -> Result<Vec<BatchItem>> {
    if coupling.is_empty() {
        return Err(invalid("coupling is empty"));
    }
    let mut batch = Vec::with_capacity(batch_size);
    for b in 0..batch_size {
        let mut item_rng = rng.split(b as u64);
        let pair = &coupling.pairs[item_rng.below(coupling.len())];
        let t = item_rng.uniform();
        let alpha = schedule.alpha(t)?;
        let l = pair.tokens.len();
        let mut states = Vec::with_capacity(l);
        let mut eps = Vec::with_capacity(l);
        for pos in 0..l {
            if item_rng.uniform() < 1.0 - alpha {
                states.push(LatentToken::Masked);
                eps.push(match kind {
                    ModelKind::Imdm => Some(match &pair.eps[pos] {
                        Some(stored) => stored.clone(),
                        // Coupling built by an MDM teacher carries no noise.
                        None => noise_spec.sample(&mut item_rng),
                    }),
                    ModelKind::Mdm => None,
                });
            } else {
                states.push(LatentToken::Data(pair.tokens.tokens[pos]));
                eps.push(None);
            }
        }
        batch.push(BatchItem {
            z: LatentSequence { states },
            noise: NoiseAssignment { eps },
            t,
            x_true: pair.tokens.clone(),
        });
    }
    Ok(batch)
}

/// Train the student on the rectified coupling with the standard NELBO.
pub fn redi_train(
    student: &mut Denoiser,
    coupling: &CouplingSet,
    cfg: &TrainConfig,
    schedule: &Schedule,
) -> Result<Vec<TracePoint>> {
    cfg.validate()?;
    if coupling.is_empty() {
        return Err(invalid("coupling is empty"));
    }
    let root = Rng::new(cfg.seed, 1);
    let mut adam = Adam::new(student.params.n_params(), cfg);
    let mut flat = student.params.to_flat();
    let mut trace = Vec::new();
    for iter in 0..cfg.iterations {
        let batch_rng = root.split(iter as u64);
        let batch = make_redi_batch(
            coupling,
            schedule,
            student.kind,
            &student.noise,
            cfg.batch_size,
            &batch_rng,
        )?;
        let (loss, grads) = student.loss_and_grads(&batch, schedule, cfg.log_prob_floor)?;
        if !loss.is_finite() {
            return Err(Error::Training(format!(
                "non-finite rectified loss at iteration {iter}"
            )));
        }
        adam.step(&mut flat, &grads.to_flat());
        student.params.from_flat(&flat);
        if cfg.should_trace(iter, cfg.iterations) {
            trace.push(TracePoint {
                iteration: iter,
                loss,
            });
        }
    }
    Ok(trace)
}

/// Rectified-coupling pipeline: `rounds` iterations of (build coupling from
/// the current model, retrain on it).
pub fn redi_pipeline(
    base: &Denoiser,
    cfg: &DistillConfig,
    schedule: &Schedule,
) -> Result<(Denoiser, Vec<CouplingSet>)> {
    cfg.validate()?;
    let mut model = base.clone();
    let mut couplings = Vec::new();
    for round in 0..cfg.rounds {
        let seed = cfg.train.seed ^ (0xC0_0B + round as u64);
        let coupling =
            redi_build_coupling(&model, schedule, cfg.coupling_steps, cfg.coupling_size, seed)?;
        let mut round_cfg = cfg.train.clone();
        round_cfg.iterations = cfg.iterations_per_round;
        round_cfg.seed = seed;
        redi_train(&mut model, &coupling, &round_cfg, schedule)?;
        couplings.push(coupling);
    }
    Ok((model, couplings))
}

/// Everything the combined pipeline produced.
pub struct PipelineResult {
    pub after_sdtt: Denoiser,
    pub student: Denoiser,
    pub couplings: Vec<CouplingSet>,
}

/// Step compression first, then rectified coupling on the pre-distilled
/// student. Zero-round configs skip their stage, so two identity configs
/// return the base unchanged.
pub fn combined_pipeline(
    base: &Denoiser,
    sdtt_cfg: &DistillConfig,
    redi_cfg: &DistillConfig,
    dataset: &DatasetSpec,
    schedule: &Schedule,
) -> Result<PipelineResult> {
    let (after_sdtt, _) = if sdtt_cfg.rounds > 0 {
        sdtt_rounds(base, sdtt_cfg, dataset, schedule)?
    } else {
        (base.clone(), Vec::new())
    };
    let (student, couplings) = if redi_cfg.rounds > 0 && redi_cfg.coupling_size > 0 {
        redi_pipeline(&after_sdtt, redi_cfg, schedule)?
    } else {
        (after_sdtt.clone(), Vec::new())
    };
    Ok(PipelineResult {
        after_sdtt,
        student,
        couplings,
    })
}
