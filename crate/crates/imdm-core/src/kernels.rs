//! Closed-form forward marginals, posteriors, and Rao-Blackwellized NELBO
//! terms for the interpolation family of discrete diffusions.
//!
//! Three priors are covered: the single absorbing mask token (MDM), the
//! uniform prior over K states, and the infinite-mask limit where the mask
//! side is represented as one aggregated "masked" symbol plus a continuous
//! noise attribute handled by the caller. Keep-vs-fresh mask transitions in
//! the limit operate on noise identity, never on explicit mask indices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::categorical::Categorical;
use crate::error::{domain, invalid, Error, Result};
use crate::math;
use crate::schedule::Schedule;
use crate::sequence::LatentToken;

/// Prior of the forward interpolation `q(z_t|x) = alpha_t x + (1-alpha_t) pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorSpec {
    /// All prior mass on the single mask token at index `n_data`.
    MaskAbsorbing { n_data: usize },
    /// Uniform over `k` states; the first `n_data` indices are the data side.
    UniformK { n_data: usize, k: usize },
    /// Uniform over an infinite latent mask set; data tokens carry zero prior
    /// mass. Represented over `n_data + 1` slots with the mask aggregated at
    /// index `n_data`; a masked draw additionally carries fresh noise.
    LatentMaskLimit { n_data: usize },
}

impl PriorSpec {
    pub fn n_data(&self) -> usize {
        match *self {
            PriorSpec::MaskAbsorbing { n_data }
            | PriorSpec::UniformK { n_data, .. }
            | PriorSpec::LatentMaskLimit { n_data } => n_data,
        }
    }

    /// Size of the explicit support the kernels operate on.
    pub fn support_size(&self) -> usize {
        match *self {
            PriorSpec::MaskAbsorbing { n_data } => n_data + 1,
            PriorSpec::UniformK { k, .. } => k,
            PriorSpec::LatentMaskLimit { n_data } => n_data + 1,
        }
    }

    /// Prior mass on slot `j`.
    pub fn prior_prob(&self, j: usize) -> f64 {
        match *self {
            PriorSpec::MaskAbsorbing { n_data } => {
                if j == n_data {
                    1.0
                } else {
                    0.0
                }
            }
            PriorSpec::UniformK { k, .. } => 1.0 / k as f64,
            PriorSpec::LatentMaskLimit { n_data } => {
                if j == n_data {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::MaskAbsorbing { n_data } | PriorSpec::LatentMaskLimit { n_data } => {
                if n_data < 2 {
                    return Err(invalid("prior needs >= 2 data tokens"));
                }
            }
            PriorSpec::UniformK { n_data, k } => {
                if n_data < 2 || k < n_data {
                    return Err(invalid(format!(
                        "uniform prior needs 2 <= n_data <= k, got n_data={n_data} k={k}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64, name: &str) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("{name} must be in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_alpha_pair(alpha_s: f64, alpha_t: f64) -> Result<()> {
    check_alpha(alpha_s, "alpha_s")?;
    check_alpha(alpha_t, "alpha_t")?;
    if alpha_t > alpha_s {
        return Err(domain(format!(
            "need alpha_t <= alpha_s (s earlier than t), got alpha_s={alpha_s} alpha_t={alpha_t}"
        )));
    }
    Ok(())
}

/// Forward marginal `q(z_t|x)` over the prior's support.
///
/// For [`PriorSpec::LatentMaskLimit`] the mask side appears as a single
/// aggregated slot of mass `1 - alpha_t`; a masked draw is completed by
/// sampling fresh noise per the caller's noise spec.
pub fn forward_marginal(x: usize, alpha_t: f64, prior: &PriorSpec) -> Result<Categorical> {
    prior.validate()?;
    check_alpha(alpha_t, "alpha_t")?;
    if x >= prior.n_data() {
        return Err(invalid(format!("data token {x} outside prior data side")));
    }
    let size = prior.support_size();
    let mut probs = vec![0.0; size];
    for (j, p) in probs.iter_mut().enumerate() {
        *p = (1.0 - alpha_t) * prior.prior_prob(j);
    }
    probs[x] += alpha_t;
    Categorical::new(probs)
}

/// One-step transition `q(z_t|z_s)` of the interpolation process, where
/// `alpha_ratio = alpha_t / alpha_s`.
pub fn step_kernel(state: usize, alpha_ratio: f64, prior: &PriorSpec) -> Result<Categorical> {
    prior.validate()?;
    if !(0.0..=1.0).contains(&alpha_ratio) {
        return Err(domain(format!("alpha ratio must be in [0, 1], got {alpha_ratio}")));
    }
    let size = prior.support_size();
    if state >= size {
        return Err(invalid(format!("state {state} outside support {size}")));
    }
    let mut probs = vec![0.0; size];
    for (j, p) in probs.iter_mut().enumerate() {
        *p = (1.0 - alpha_ratio) * prior.prior_prob(j);
    }
    probs[state] += alpha_ratio;
    Categorical::new(probs)
}

/// General-prior posterior `q(z_s|z_t, x)` for finite priors.
pub fn posterior_general(
    z_t: usize,
    x: usize,
    alpha_s: f64,
    alpha_t: f64,
    prior: &PriorSpec,
) -> Result<Categorical> {
    if x >= prior.n_data() {
        return Err(invalid(format!("data token {x} outside prior data side")));
    }
    let size = prior.support_size();
    let mut x_weights = vec![0.0; size];
    x_weights[x] = 1.0;
    posterior_general_soft(z_t, &x_weights, alpha_s, alpha_t, prior)
}

/// General-prior posterior with a soft data vector substituted for `x`.
///
/// Substituting the model prediction here yields the model's reverse
/// transition `p(z_s|z_t) = q(z_s|z_t, x = x_pred)`.
pub fn posterior_general_soft(
    z_t: usize,
    x_weights: &[f64],
    alpha_s: f64,
    alpha_t: f64,
    prior: &PriorSpec,
) -> Result<Categorical> {
    prior.validate()?;
    if matches!(prior, PriorSpec::LatentMaskLimit { .. }) {
        return Err(invalid(
            "latent mask limit has no finite posterior row; use posterior_imdm",
        ));
    }
    check_alpha_pair(alpha_s, alpha_t)?;
    let size = prior.support_size();
    if z_t >= size {
        return Err(invalid(format!("state {z_t} outside support {size}")));
    }
    if x_weights.len() != size {
        return Err(invalid(format!(
            "x weights length {} does not match support {size}",
            x_weights.len()
        )));
    }
    let alpha_ts = alpha_t / alpha_s;
    let pi_zt = prior.prior_prob(z_t);
    let denom = alpha_t * x_weights[z_t] + (1.0 - alpha_t) * pi_zt;
    if denom <= 0.0 {
        return Err(Error::Infeasible(format!(
            "state {z_t} has zero forward probability under this prior"
        )));
    }
    let mut probs = vec![0.0; size];
    for (j, p) in probs.iter_mut().enumerate() {
        let carry = if j == z_t { alpha_ts } else { 0.0 } + (1.0 - alpha_ts) * pi_zt;
        let fwd_s = alpha_s * x_weights[j] + (1.0 - alpha_s) * prior.prior_prob(j);
        *p = carry * fwd_s / denom;
    }
    Categorical::new(probs)
}

/// MDM posterior row over the extended support `V + mask` (mask last).
/// Unmasked states carry over; a masked state keeps mask mass
/// `(1-alpha_s)/(1-alpha_t)` and unmasks per `x_pred` otherwise.
pub fn posterior_mdm(
    z_t: LatentToken,
    x_pred: &Categorical,
    alpha_s: f64,
    alpha_t: f64,
) -> Result<Categorical> {
    check_alpha_pair(alpha_s, alpha_t)?;
    let n = x_pred.len();
    match z_t {
        LatentToken::Data(v) => {
            let v = v as usize;
            if v >= n {
                return Err(invalid(format!("carried token {v} outside vocabulary {n}")));
            }
            Categorical::delta(n + 1, v)
        }
        LatentToken::Masked => {
            let denom = 1.0 - alpha_t;
            let unmask = (alpha_s - alpha_t) / denom;
            let mut probs = Vec::with_capacity(n + 1);
            for &p in x_pred.probs() {
                probs.push(unmask * p);
            }
            probs.push((1.0 - alpha_s) / denom);
            Categorical::new(probs)
        }
    }
}

/// IMDM posterior for one position, with the mask side factored into
/// keep-same-noise and fresh-noise branches.
#[derive(Debug, Clone, PartialEq)]
pub struct ImdmPosterior {
    /// Mass routed to each data token; sums to the total unmask mass.
    pub unmask_probs: Vec<f64>,
    /// Stay masked and keep the current noise vector.
    pub keep_mask_prob: f64,
    /// Stay masked and redraw the noise vector.
    pub fresh_mask_prob: f64,
}

impl ImdmPosterior {
    pub fn unmask_total(&self) -> f64 {
        self.unmask_probs.iter().sum()
    }

    pub fn mask_total(&self) -> f64 {
        self.keep_mask_prob + self.fresh_mask_prob
    }

    pub fn total(&self) -> f64 {
        self.unmask_total() + self.mask_total()
    }

    /// Collapse keep/fresh into one mask slot, giving the MDM-shaped row.
    pub fn collapse_mask(&self) -> Result<Categorical> {
        let mut probs = self.unmask_probs.clone();
        probs.push(self.mask_total());
        Categorical::new(probs)
    }
}

/// IMDM posterior (the infinite-mask analogue of [`posterior_mdm`]).
///
/// For a masked state the three branch weights are
/// `(alpha_s - alpha_t, alpha_ts (1-alpha_s), (1-alpha_ts)(1-alpha_s)) / (1-alpha_t)`
/// for unmask / keep-noise / fresh-noise, with `alpha_ts = alpha_t/alpha_s`.
pub fn posterior_imdm(
    z_t: LatentToken,
    x_pred: &Categorical,
    alpha_s: f64,
    alpha_t: f64,
) -> Result<ImdmPosterior> {
    check_alpha_pair(alpha_s, alpha_t)?;
    let n = x_pred.len();
    match z_t {
        LatentToken::Data(v) => {
            let v = v as usize;
            if v >= n {
                return Err(invalid(format!("carried token {v} outside vocabulary {n}")));
            }
            let mut unmask = vec![0.0; n];
            unmask[v] = 1.0;
            Ok(ImdmPosterior {
                unmask_probs: unmask,
                keep_mask_prob: 0.0,
                fresh_mask_prob: 0.0,
            })
        }
        LatentToken::Masked => {
            let denom = 1.0 - alpha_t;
            let alpha_ts = alpha_t / alpha_s;
            let unmask_total = (alpha_s - alpha_t) / denom;
            let mask_total = (1.0 - alpha_s) / denom;
            Ok(ImdmPosterior {
                unmask_probs: x_pred.probs().iter().map(|&p| unmask_total * p).collect(),
                keep_mask_prob: alpha_ts * mask_total,
                fresh_mask_prob: (1.0 - alpha_ts) * mask_total,
            })
        }
    }
}

/// Signed NELBO weight `alpha'_t / (1 - alpha_t)`; non-positive.
pub fn nelbo_weight(t: f64, schedule: &Schedule) -> Result<f64> {
    let (alpha, alpha_prime) = schedule.alpha_at(t)?;
    Ok(alpha_prime / (1.0 - alpha))
}

fn masked_token_nelbo(x_pred: &Categorical, x_true: usize, t: f64, schedule: &Schedule) -> Result<f64> {
    if x_true >= x_pred.len() {
        return Err(invalid(format!(
            "true token {x_true} outside prediction support {}",
            x_pred.len()
        )));
    }
    let p = x_pred.prob(x_true);
    if p == 0.0 {
        // Documented sentinel: callers clip at their configured floor.
        return Ok(f64::INFINITY);
    }
    Ok(nelbo_weight(t, schedule)? * math::ln(p))
}

/// Rao-Blackwellized MDM NELBO term for one masked position:
/// `(alpha'_t / (1-alpha_t)) ln <x_pred, x_true>`, non-negative.
/// Zero predicted mass on the truth returns the `+inf` sentinel.
pub fn mdm_nelbo_term(x_pred: &Categorical, x_true: usize, t: f64, schedule: &Schedule) -> Result<f64> {
    masked_token_nelbo(x_pred, x_true, t, schedule)
}

/// IMDM NELBO term; coincides with [`mdm_nelbo_term`] bit for bit.
pub fn imdm_nelbo_term(x_pred: &Categorical, x_true: usize, t: f64, schedule: &Schedule) -> Result<f64> {
    masked_token_nelbo(x_pred, x_true, t, schedule)
}

/// Rao-Blackwellized NELBO term of uniform discrete diffusion over `k`
/// states whose first `x_pred.len()` indices are the data side.
///
/// This is the exact KL rate of the reverse process at `z_t`, written with
/// `xbar = k alpha_t x + (1-alpha_t) 1` and the model counterpart
/// `xbar_pred = k alpha_t x_pred + (1-alpha_t) 1`:
///
/// ```text
/// f = -(alpha'/alpha) [ 1/xbar_pred[i] - 1/xbar[i]
///       + (1/k) sum_{j != i} (xbar[j]/xbar[i])
///                ln( xbar[j] xbar_pred[i] / (xbar_pred[j] xbar[i]) ) ]
/// ```
///
/// where `i = z_t`. The case `z_t = x_true` returns exactly 0. As
/// `k -> inf` with `z_t` on the mask side this converges to
/// [`imdm_nelbo_term`]; only the data-side entries of the sum survive, so
/// evaluation is O(n_data) for any `k`.
pub fn uniform_nelbo_term(
    k: usize,
    x_pred: &Categorical,
    x_true: usize,
    z_t: usize,
    t: f64,
    schedule: &Schedule,
) -> Result<f64> {
    let n = x_pred.len();
    if k < 2 || k < n {
        return Err(invalid(format!("need k >= max(2, n_data), got k={k} n_data={n}")));
    }
    if x_true >= n {
        return Err(invalid(format!("true token {x_true} outside data side {n}")));
    }
    if z_t >= k {
        return Err(invalid(format!("state {z_t} outside support {k}")));
    }
    if z_t == x_true {
        return Ok(0.0);
    }
    let (alpha, alpha_prime) = schedule.alpha_at(t)?;
    let kf = k as f64;
    let b = 1.0 - alpha;
    let xbar = |j: usize| -> f64 {
        if j == x_true {
            kf * alpha + b
        } else {
            b
        }
    };
    let xbar_pred = |j: usize| -> f64 {
        if j < n {
            kf * alpha * x_pred.prob(j) + b
        } else {
            b
        }
    };
    let xb_i = xbar(z_t);
    let xo_i = xbar_pred(z_t);
    let mut sum = 0.0;
    for j in 0..n {
        if j == z_t {
            continue;
        }
        let xb_j = xbar(j);
        let xo_j = xbar_pred(j);
        sum += (xb_j / xb_i) * math::ln(xb_j * xo_i / (xo_j * xb_i));
    }
    // Mask-side terms share xbar[j] = xbar_pred[j] = b, so they aggregate.
    let mask_count = (k - n - usize::from(z_t >= n)) as f64;
    if mask_count > 0.0 {
        let ratio = xo_i / xb_i;
        if ratio != 1.0 {
            sum += mask_count * (b / xb_i) * math::ln(ratio);
        }
    }
    Ok(-(alpha_prime / alpha) * (1.0 / xo_i - 1.0 / xb_i + sum / kf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Schedule;

    const MASK2: PriorSpec = PriorSpec::MaskAbsorbing { n_data: 2 };

    #[test]
    fn forward_marginal_endpoints() {
        let clip = 1e-4;
        let near_one = forward_marginal(1, 1.0 - clip, &MASK2).unwrap();
        assert!((near_one.prob(1) - (1.0 - clip)).abs() < 1e-15);
        let near_zero = forward_marginal(1, clip, &MASK2).unwrap();
        assert!((near_zero.prob(2) - (1.0 - clip)).abs() < 1e-15);
    }

    #[test]
    fn forward_marginal_uniform_prior() {
        let prior = PriorSpec::UniformK { n_data: 2, k: 2 };
        let m = forward_marginal(0, 0.3, &prior).unwrap();
        assert!((m.prob(0) - 0.65).abs() < 1e-15);
        assert!((m.prob(1) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn forward_marginal_latent_limit_aggregates_mask_mass() {
        // The infinite-mask limit reports one aggregated masked slot whose
        // mass matches the absorbing prior; the noise attribute is drawn by
        // the caller when the slot is hit.
        let prior = PriorSpec::LatentMaskLimit { n_data: 3 };
        let m = forward_marginal(1, 0.3, &prior).unwrap();
        assert!((m.prob(1) - 0.3).abs() < 1e-15);
        assert!((m.prob(3) - 0.7).abs() < 1e-15);
        assert_eq!(m.prob(0), 0.0);
        // And the finite posterior is refused for this prior.
        assert!(posterior_general(3, 1, 0.6, 0.2, &prior).is_err());
    }

    #[test]
    fn posterior_mdm_matches_hand_substitution() {
        // Masked state, alpha_s = 0.6, alpha_t = 0.2, uniform prediction.
        let pred = Categorical::uniform(2).unwrap();
        let row = posterior_mdm(LatentToken::Masked, &pred, 0.6, 0.2).unwrap();
        assert!((row.prob(0) - 0.25).abs() < 1e-15);
        assert!((row.prob(1) - 0.25).abs() < 1e-15);
        assert!((row.prob(2) - 0.5).abs() < 1e-15);

        // Carry-over.
        let carry = posterior_mdm(LatentToken::Data(1), &pred, 0.6, 0.2).unwrap();
        assert_eq!(carry.prob(1), 1.0);
    }

    #[test]
    fn posterior_general_mask_prior_matches_eq4() {
        // z_t = mask, alpha_s = 0.6, alpha_t = 0.2 -> 0.5 mask, 0.5 on x.
        let row = posterior_general(2, 0, 0.6, 0.2, &MASK2).unwrap();
        assert!((row.prob(2) - 0.5).abs() < 1e-15);
        assert!((row.prob(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn posterior_identity_step() {
        let prior = PriorSpec::UniformK { n_data: 3, k: 5 };
        let row = posterior_general(4, 1, 0.4, 0.4, &prior).unwrap();
        assert_eq!(row.prob(4), 1.0);

        let pred = Categorical::uniform(2).unwrap();
        let p = posterior_imdm(LatentToken::Masked, &pred, 0.4, 0.4).unwrap();
        assert_eq!(p.keep_mask_prob, 1.0);
        assert_eq!(p.fresh_mask_prob, 0.0);
        assert_eq!(p.unmask_total(), 0.0);
    }

    #[test]
    fn posterior_general_infeasible_state() {
        // Data token inconsistent with x under the absorbing prior.
        assert!(matches!(
            posterior_general(1, 0, 0.6, 0.2, &MASK2),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn imdm_branch_weights() {
        // alpha_s = 0.6, alpha_t = 0.2: unmask 1/2, keep 1/6, fresh 1/3.
        let pred = Categorical::uniform(2).unwrap();
        let p = posterior_imdm(LatentToken::Masked, &pred, 0.6, 0.2).unwrap();
        assert!((p.unmask_total() - 0.5).abs() < 1e-12);
        assert!((p.keep_mask_prob - 1.0 / 6.0).abs() < 1e-12);
        assert!((p.fresh_mask_prob - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nelbo_trivial_values() {
        let sched = Schedule::default();
        let perfect = Categorical::delta(2, 1).unwrap();
        assert_eq!(mdm_nelbo_term(&perfect, 1, 0.5, &sched).unwrap(), 0.0);

        let half = Categorical::uniform(2).unwrap();
        let v = mdm_nelbo_term(&half, 0, 0.5, &sched).unwrap();
        assert!((v - 2.0 * math::LN_2).abs() < 1e-12);

        // Zero mass on the truth -> +inf sentinel, not NaN.
        let zero = Categorical::delta(2, 0).unwrap();
        let s = mdm_nelbo_term(&zero, 1, 0.5, &sched).unwrap();
        assert!(s.is_infinite() && s > 0.0);
    }

    #[test]
    fn imdm_term_equals_mdm_term() {
        let sched = Schedule::default();
        let mut rng = crate::rng::Rng::from_seed(21);
        for _ in 0..200 {
            let p0 = rng.uniform();
            let pred = Categorical::new(vec![p0, 1.0 - p0]).unwrap();
            let t = 0.05 + 0.9 * rng.uniform();
            let a = mdm_nelbo_term(&pred, 0, t, &sched).unwrap();
            let b = imdm_nelbo_term(&pred, 0, t, &sched).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn uniform_nelbo_case_zt_equals_x() {
        let sched = Schedule::default();
        let pred = Categorical::uniform(2).unwrap();
        assert_eq!(uniform_nelbo_term(10, &pred, 1, 1, 0.5, &sched).unwrap(), 0.0);
    }
}
