//! Metrics and exact-enumeration oracles: factorization error, the
//! event-weighted mutual-information lower bound, the conditional-MI lemma,
//! the partition-and-map witness, validity, and the per-token probe.
//!
//! All divergences use natural log with `0 ln 0 = 0`. Enumerations are
//! capped (default 10^6 states) and error out rather than truncate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::categorical::Categorical;
use crate::denoiser::{Denoiser, ModelKind};
use crate::error::{invalid, Error, Result};
use crate::math;
use crate::rng::Rng;
use crate::sequence::{NoiseAssignment, Sequence};
use crate::stats;

pub const DEFAULT_CAPACITY: usize = 1_000_000;

/// Explicit probability table over `n_tokens^n_vars` outcomes, indexed
/// lexicographically (first variable most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct JointDist {
    n_tokens: usize,
    n_vars: usize,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(n_tokens: usize, n_vars: usize, probs: Vec<f64>) -> Result<Self> {
        Self::with_capacity_limit(n_tokens, n_vars, probs, DEFAULT_CAPACITY)
    }

    pub fn with_capacity_limit(
        n_tokens: usize,
        n_vars: usize,
        probs: Vec<f64>,
        limit: usize,
    ) -> Result<Self> {
        let size = n_tokens
            .checked_pow(n_vars as u32)
            .ok_or(Error::Capacity {
                requested: usize::MAX,
                limit,
            })?;
        if size > limit {
            return Err(Error::Capacity {
                requested: size,
                limit,
            });
        }
        if probs.len() != size {
            return Err(invalid(format!(
                "table has {} entries, support needs {size}",
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for &p in &probs {
            if !(p >= 0.0) {
                return Err(invalid(format!("negative probability {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("joint sums to {sum}, expected 1")));
        }
        Ok(JointDist {
            n_tokens,
            n_vars,
            probs,
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index_of(&self, tokens: &[u32]) -> usize {
        debug_assert_eq!(tokens.len(), self.n_vars);
        tokens
            .iter()
            .fold(0usize, |acc, &t| acc * self.n_tokens + t as usize)
    }

    pub fn tokens_of(&self, mut index: usize) -> Vec<u32> {
        let mut out = vec![0u32; self.n_vars];
        for slot in out.iter_mut().rev() {
            *slot = (index % self.n_tokens) as u32;
            index /= self.n_tokens;
        }
        out
    }

    pub fn marginal(&self, var: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.n_tokens];
        for (idx, &p) in self.probs.iter().enumerate() {
            m[self.tokens_of(idx)[var] as usize] += p;
        }
        m
    }

    /// Pairwise marginal as a row-major `n_tokens x n_tokens` table.
    pub fn pair_marginal(&self, i: usize, j: usize) -> Vec<f64> {
        let n = self.n_tokens;
        let mut m = vec![0.0; n * n];
        for (idx, &p) in self.probs.iter().enumerate() {
            let toks = self.tokens_of(idx);
            m[toks[i] as usize * n + toks[j] as usize] += p;
        }
        m
    }
}

/// Fraction of samples satisfying the predicate.
pub fn validity(samples: &[Sequence], predicate: impl Fn(&Sequence) -> bool) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("validity needs samples"));
    }
    let ok = samples.iter().filter(|s| predicate(s)).count();
    Ok(ok as f64 / samples.len() as f64)
}

/// The built-in validity predicate of the synthetic task.
pub fn all_tokens_equal(s: &Sequence) -> bool {
    s.tokens.windows(2).all(|w| w[0] == w[1])
}

/// Shannon entropy (nats) of the pooled single-token marginal.
pub fn token_entropy(samples: &[Sequence], n_tokens: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("token entropy needs samples"));
    }
    let mut counts = vec![0.0; n_tokens];
    let mut total = 0.0;
    for s in samples {
        for &t in &s.tokens {
            counts[t as usize] += 1.0;
            total += 1.0;
        }
    }
    for c in counts.iter_mut() {
        *c /= total;
    }
    Ok(stats::entropy(&counts))
}

/// One-step model joint from the fully-masked state: the product of
/// per-position predictions, averaged over `n_eps` noise draws (a single
/// pass when the model has no noise dependence).
pub fn onestep_model_joint(model: &Denoiser, n_eps: usize, rng: &Rng) -> Result<JointDist> {
    if n_eps == 0 {
        return Err(invalid("need at least one noise draw"));
    }
    let l = model.dims.seq_len;
    let n = model.dims.n_tokens;
    let size = n.checked_pow(l as u32).ok_or(Error::Capacity {
        requested: usize::MAX,
        limit: DEFAULT_CAPACITY,
    })?;
    if size > DEFAULT_CAPACITY {
        return Err(Error::Capacity {
            requested: size,
            limit: DEFAULT_CAPACITY,
        });
    }
    let eps_free = model.kind == ModelKind::Mdm || model.noise_path_is_zero();
    let passes = if eps_free { 1 } else { n_eps };
    let mut acc = vec![0.0; size];
    let z = crate::sequence::LatentSequence::fully_masked(l);
    for e in 0..passes {
        let mut draw_rng = rng.split(e as u64);
        let noise = match model.kind {
            ModelKind::Mdm => NoiseAssignment::none(l),
            ModelKind::Imdm => NoiseAssignment {
                eps: (0..l)
                    .map(|_| Some(model.noise.sample(&mut draw_rng)))
                    .collect(),
            },
        };
        let preds = model.predict(&z, &noise, 1.0)?;
        for (idx, slot) in acc.iter_mut().enumerate() {
            let mut prod = 1.0;
            let mut rem = idx;
            for pos in (0..l).rev() {
                prod *= preds[pos].prob(rem % n);
                rem /= n;
            }
            *slot += prod;
        }
    }
    if passes > 1 {
        let inv = 1.0 / passes as f64;
        for v in acc.iter_mut() {
            *v *= inv;
        }
    }
    JointDist::new(n, l, acc)
}

/// One-step model joint averaged over an explicit list of noise
/// assignments instead of fresh draws (sensitivity analysis with reused
/// coupling noise).
pub fn onestep_model_joint_from_draws(
    model: &Denoiser,
    draws: &[NoiseAssignment],
) -> Result<JointDist> {
    if draws.is_empty() {
        return Err(invalid("need at least one noise assignment"));
    }
    let l = model.dims.seq_len;
    let n = model.dims.n_tokens;
    let size = n.pow(l as u32);
    let mut acc = vec![0.0; size];
    let z = crate::sequence::LatentSequence::fully_masked(l);
    for noise in draws {
        let preds = model.predict(&z, noise, 1.0)?;
        for (idx, slot) in acc.iter_mut().enumerate() {
            let mut prod = 1.0;
            let mut rem = idx;
            for pos in (0..l).rev() {
                prod *= preds[pos].prob(rem % n);
                rem /= n;
            }
            *slot += prod;
        }
    }
    let inv = 1.0 / draws.len() as f64;
    for v in acc.iter_mut() {
        *v *= inv;
    }
    JointDist::new(n, l, acc)
}

/// Factorization error at full masking: `KL(data || model one-step joint)`
/// with the model joint formed by [`onestep_model_joint`]. Returns the
/// `+inf` sentinel when the model joint has a zero where data has mass.
pub fn factorization_error(
    model: &Denoiser,
    data_joint: &JointDist,
    n_eps: usize,
    rng: &Rng,
) -> Result<f64> {
    let model_joint = onestep_model_joint(model, n_eps, rng)?;
    fact_error_of(data_joint, &model_joint)
}

/// Factorization error with an explicit set of noise assignments.
pub fn factorization_error_from_draws(
    model: &Denoiser,
    data_joint: &JointDist,
    draws: &[NoiseAssignment],
) -> Result<f64> {
    let model_joint = onestep_model_joint_from_draws(model, draws)?;
    fact_error_of(data_joint, &model_joint)
}

fn fact_error_of(data_joint: &JointDist, model_joint: &JointDist) -> Result<f64> {
    if model_joint.n_tokens != data_joint.n_tokens || model_joint.n_vars != data_joint.n_vars {
        return Err(invalid("data and model supports do not match"));
    }
    Ok(stats::kl_divergence(&data_joint.probs, &model_joint.probs))
}

/// One enumerable context for [`tc_exact`]: the context weight, the true
/// conditional joint, and the model's per-position marginals there.
#[derive(Debug, Clone)]
pub struct TcContext {
    pub weight: f64,
    pub conditional: JointDist,
    pub model_marginals: Vec<Vec<f64>>,
}

/// Conditional total correlation by full enumeration:
/// `sum_ctx p(ctx) KL(p(z|ctx) || prod_l q_l(z_l|ctx))`.
pub fn tc_exact(contexts: &[TcContext]) -> Result<f64> {
    if contexts.is_empty() {
        return Err(invalid("tc_exact needs at least one context"));
    }
    let mut total = 0.0;
    for ctx in contexts {
        let joint = &ctx.conditional;
        if ctx.model_marginals.len() != joint.n_vars {
            return Err(invalid("marginal count does not match variable count"));
        }
        let mut kl = 0.0;
        for (idx, &p) in joint.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let toks = joint.tokens_of(idx);
            let mut q = 1.0;
            for (var, &t) in toks.iter().enumerate() {
                q *= ctx.model_marginals[var][t as usize];
            }
            if q == 0.0 {
                return Ok(f64::INFINITY);
            }
            kl += p * math::ln(p / q);
        }
        total += ctx.weight * kl;
    }
    Ok(total)
}

/// Event-weighted pairwise mutual-information lower bound on the one-step
/// factorization error of any mask-absorbing model, enumerated exactly.
///
/// For each pair `(i, j)`: the event that both positions are masked at `t`
/// and decode between `t` and `s` has probability `(alpha_s - alpha_t)^2`
/// (a position is masked by time `u` with probability `1 - alpha_u`,
/// independently across positions). Conditioned on that event, each other
/// position is visible with probability `alpha_t`; the bound is the
/// context-averaged conditional MI of the data pair, weighted by the event
/// probability and maximized over pairs.
///
/// Endpoints `alpha_t = 0` and `alpha_s = 1` are valid: the enumeration
/// never divides by a clipped quantity.
pub fn thm1_lower_bound(
    data: &JointDist,
    alpha_s: f64,
    alpha_t: f64,
) -> Result<(f64, (usize, usize))> {
    if !(0.0..=1.0).contains(&alpha_s) || !(0.0..=1.0).contains(&alpha_t) || alpha_t > alpha_s {
        return Err(invalid(format!(
            "need 0 <= alpha_t <= alpha_s <= 1, got alpha_s={alpha_s} alpha_t={alpha_t}"
        )));
    }
    let l = data.n_vars;
    if l < 2 {
        return Err(invalid("bound needs at least two positions"));
    }
    let p_event = (alpha_s - alpha_t) * (alpha_s - alpha_t);
    let mut best = (0.0f64, (0usize, 1usize));
    for i in 0..l {
        for j in (i + 1)..l {
            let mi = context_averaged_pair_mi(data, i, j, alpha_t)?;
            let bound = p_event * mi;
            if bound > best.0 {
                best = (bound, (i, j));
            }
        }
    }
    Ok(best)
}

/// `E_ctx [ I(x_i; x_j | revealed others) ]` where every other position is
/// revealed independently with probability `alpha_t`.
fn context_averaged_pair_mi(data: &JointDist, i: usize, j: usize, alpha_t: f64) -> Result<f64> {
    let l = data.n_vars;
    let n = data.n_tokens;
    let others: Vec<usize> = (0..l).filter(|&p| p != i && p != j).collect();
    let n_subsets = 1usize << others.len();
    let mut total = 0.0;
    for subset in 0..n_subsets {
        let revealed: Vec<usize> = others
            .iter()
            .enumerate()
            .filter(|(b, _)| subset >> b & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        let w_subset = libm::pow(alpha_t, revealed.len() as f64)
            * libm::pow(1.0 - alpha_t, (others.len() - revealed.len()) as f64);
        if w_subset == 0.0 {
            continue;
        }
        // Enumerate revealed values; condition the pair joint on them.
        let n_vals = n.pow(revealed.len() as u32);
        for val_idx in 0..n_vals {
            let mut vals = vec![0u32; revealed.len()];
            let mut rem = val_idx;
            for slot in vals.iter_mut().rev() {
                *slot = (rem % n) as u32;
                rem /= n;
            }
            let mut pair = vec![0.0; n * n];
            let mut mass = 0.0;
            for (idx, &p) in data.probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let toks = data.tokens_of(idx);
                if revealed
                    .iter()
                    .zip(vals.iter())
                    .all(|(&pos, &v)| toks[pos] == v)
                {
                    pair[toks[i] as usize * n + toks[j] as usize] += p;
                    mass += p;
                }
            }
            if mass == 0.0 {
                continue;
            }
            for v in pair.iter_mut() {
                *v /= mass;
            }
            total += w_subset * mass * pair_mutual_information(&pair, n);
        }
    }
    Ok(total)
}

/// Mutual information of a square row-major pair table.
pub fn pair_mutual_information(pair: &[f64], n: usize) -> f64 {
    rect_mutual_information(pair, n, n)
}

/// Mutual information of a rectangular `da x db` table.
fn rect_mutual_information(pair: &[f64], da: usize, db: usize) -> f64 {
    let mut ma = vec![0.0; da];
    let mut mb = vec![0.0; db];
    for a in 0..da {
        for b in 0..db {
            ma[a] += pair[a * db + b];
            mb[b] += pair[a * db + b];
        }
    }
    let mut acc = 0.0;
    for a in 0..da {
        for b in 0..db {
            let p = pair[a * db + b];
            if p > 0.0 {
                acc += p * math::ln(p / (ma[a] * mb[b]));
            }
        }
    }
    acc
}

/// Slack of the conditional mutual information bound:
/// `I(A;B|C) - (I(A;B) - H(C))`, which is non-negative for every joint.
/// `joint` is indexed `a * (db * dc) + b * dc + c`.
pub fn lemma_cmi_check(joint: &[f64], dims: (usize, usize, usize)) -> Result<f64> {
    let (da, db, dc) = dims;
    if joint.len() != da * db * dc {
        return Err(invalid("joint table does not match dims"));
    }
    let sum: f64 = joint.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || joint.iter().any(|&p| p < 0.0) {
        return Err(invalid("joint must be a probability table"));
    }
    let p = |a: usize, b: usize, c: usize| joint[a * db * dc + b * dc + c];

    let mut pc = vec![0.0; dc];
    let mut pab = vec![0.0; da * db];
    for a in 0..da {
        for b in 0..db {
            for c in 0..dc {
                pc[c] += p(a, b, c);
                pab[a * db + b] += p(a, b, c);
            }
        }
    }
    let h_c = stats::entropy(&pc);
    let i_ab = rect_mutual_information(&pab, da, db);

    // I(A;B|C) = sum_c p(c) I(A;B | C=c).
    let mut i_ab_c = 0.0;
    for c in 0..dc {
        if pc[c] == 0.0 {
            continue;
        }
        let mut cond = vec![0.0; da * db];
        for a in 0..da {
            for b in 0..db {
                cond[a * db + b] = p(a, b, c) / pc[c];
            }
        }
        i_ab_c += pc[c] * rect_mutual_information(&cond, da, db);
    }
    Ok(i_ab_c - (i_ab - h_c))
}

/// Partition of `[0, 1)` whose interval lengths are the target outcome
/// probabilities, plus the induced deterministic map from a noise scalar to
/// an outcome. Zero-probability outcomes get no interval, keeping the cut
/// points strictly increasing.
#[derive(Debug, Clone)]
pub struct PartitionMap {
    n_tokens: usize,
    n_vars: usize,
    /// Outcome index (into the target's lexicographic order) per interval.
    outcome_indices: Vec<usize>,
    probs: Vec<f64>,
    /// `cuts[k] .. cuts[k+1]` is interval `k`; `cuts[0] = 0`, last = 1.
    cuts: Vec<f64>,
}

impl PartitionMap {
    pub fn intervals(&self) -> usize {
        self.outcome_indices.len()
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn interval_prob(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn outcome_tokens(&self, k: usize) -> Vec<u32> {
        let mut index = self.outcome_indices[k];
        let mut out = vec![0u32; self.n_vars];
        for slot in out.iter_mut().rev() {
            *slot = (index % self.n_tokens) as u32;
            index /= self.n_tokens;
        }
        out
    }

    /// Map a unit-interval scalar to its outcome.
    pub fn map_scalar(&self, u: f64) -> Vec<u32> {
        let u = u.clamp(0.0, 1.0 - f64::EPSILON);
        let mut lo = 0usize;
        let mut hi = self.intervals();
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if u < self.cuts[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.outcome_tokens(lo)
    }

    /// Rescale the first noise coordinate to `[0, 1)` and map it.
    pub fn map_eps(&self, eps: &[f64], dist: crate::denoiser::NoiseDistribution) -> Vec<u32> {
        let u = match dist {
            crate::denoiser::NoiseDistribution::Uniform => (eps[0] + 1.0) / 2.0,
            crate::denoiser::NoiseDistribution::Gaussian => math::norm_cdf(eps[0]),
        };
        self.map_scalar(u)
    }

    /// Worst absolute gap between interval lengths and target probabilities.
    pub fn pushforward_gap(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.intervals() {
            let len = self.cuts[k + 1] - self.cuts[k];
            worst = worst.max((len - self.probs[k]).abs());
        }
        worst
    }
}

/// Order outcomes lexicographically and cut the unit interval at the
/// cumulative probabilities (compensated summation keeps every cut within
/// one ulp of the exact partial sum).
pub fn build_partition_map(target: &JointDist) -> PartitionMap {
    let mut outcome_indices = Vec::new();
    let mut probs = Vec::new();
    let mut cuts = vec![0.0];
    let mut sum = 0.0;
    let mut comp = 0.0;
    for (idx, &p) in target.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        outcome_indices.push(idx);
        probs.push(p);
        // Neumaier compensated add.
        let t = sum + p;
        comp += if sum.abs() >= p.abs() {
            (sum - t) + p
        } else {
            (p - t) + sum
        };
        sum = t;
        cuts.push(sum + comp);
    }
    if let Some(last) = cuts.last_mut() {
        *last = 1.0;
    }
    PartitionMap {
        n_tokens: target.n_tokens,
        n_vars: target.n_vars,
        outcome_indices,
        probs,
        cuts,
    }
}

/// Per-token probe table: for each noise assignment, predict from the fully
/// masked state and report `P(token = 0)` at every position.
pub fn per_token_probe(model: &Denoiser, draws: &[NoiseAssignment]) -> Result<Vec<Vec<f64>>> {
    let z = crate::sequence::LatentSequence::fully_masked(model.dims.seq_len);
    let mut rows = Vec::with_capacity(draws.len());
    for noise in draws {
        let preds = model.predict(&z, noise, 1.0)?;
        rows.push(preds.iter().map(|c| c.prob(0)).collect());
    }
    Ok(rows)
}

/// Convenience: n full-mask noise assignments on split streams.
pub fn probe_draws(model: &Denoiser, n: usize, rng: &Rng) -> Vec<NoiseAssignment> {
    let l = model.dims.seq_len;
    (0..n)
        .map(|i| match model.kind {
            ModelKind::Mdm => NoiseAssignment::none(l),
            ModelKind::Imdm => {
                let mut r = rng.split(i as u64);
                NoiseAssignment {
                    eps: (0..l).map(|_| Some(model.noise.sample(&mut r))).collect(),
                }
            }
        })
        .collect()
}

/// Per-position one-step rows over `V + mask` for a single (state, noise)
/// pair: the model's factorized reverse transition from t to s.
pub fn onestep_position_rows(
    model: &Denoiser,
    z: &crate::sequence::LatentSequence,
    noise: &NoiseAssignment,
    t: f64,
    s: f64,
    schedule: &crate::schedule::Schedule,
) -> Result<Vec<Categorical>> {
    let (alpha_t, _) = schedule.alpha_at(t)?;
    let (alpha_s, _) = schedule.alpha_at(s)?;
    let preds = model.predict(z, noise, t)?;
    let mut rows = Vec::with_capacity(z.len());
    for (pos, state) in z.states.iter().enumerate() {
        let row = crate::kernels::posterior_mdm(*state, &preds[pos], alpha_s, alpha_t)?;
        rows.push(row);
    }
    Ok(rows)
}
