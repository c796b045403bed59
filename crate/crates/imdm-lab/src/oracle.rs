//! Property suites behind `imdm oracle`: kernel identities, the NELBO
//! limit, gradient checks, both theorem oracles, the conditional-MI lemma,
//! and the partition-map witness. Each suite reports pass/fail plus its
//! worst-case slack.

use serde::Serialize;

use imdm_core::analysis::{
    build_partition_map, lemma_cmi_check, thm1_lower_bound, JointDist,
};
use imdm_core::denoiser::{Denoiser, ModelDims, ModelKind, NoiseSpec};
use imdm_core::kernels::{
    imdm_nelbo_term, posterior_general_soft, posterior_imdm, posterior_mdm, step_kernel,
    uniform_nelbo_term, ImdmPosterior, PriorSpec,
};
use imdm_core::sequence::LatentToken;
use imdm_core::training::{make_batch, DatasetSpec};
use imdm_core::{Categorical, Rng, Schedule};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed slack/error, in the suite's own units.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl SuiteResult {
    fn from_worst(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        SuiteResult {
            name: name.to_string(),
            passed: worst <= tolerance,
            worst,
            tolerance,
            detail,
        }
    }
}

fn random_simplex(n: usize, floor: f64, rng: &mut Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.uniform() + floor).collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Reference branch weights of the infinite-mask posterior, written from
/// the two-case reverse-kernel derivation. The mutation fixture in the test
/// suite feeds this checker a deliberately broken kernel to prove the suite
/// detects sign errors.
pub fn imdm_weights_gap(
    posterior: impl Fn(LatentToken, &Categorical, f64, f64) -> imdm_core::Result<ImdmPosterior>,
    samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = Rng::from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let n = 2 + rng.below(3);
        let alpha_t = 0.05 + 0.9 * rng.uniform();
        let alpha_s = alpha_t + (0.99 - alpha_t) * rng.uniform();
        let pred = Categorical::new(random_simplex(n, 1e-3, &mut rng)).unwrap();
        let post = match posterior(LatentToken::Masked, &pred, alpha_s, alpha_t) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let alpha_ts = alpha_t / alpha_s;
        let denom = 1.0 - alpha_t;
        worst = worst.max((post.keep_mask_prob - alpha_ts * (1.0 - alpha_s) / denom).abs());
        worst = worst.max(
            (post.fresh_mask_prob - (1.0 - alpha_ts) * (1.0 - alpha_s) / denom).abs(),
        );
        for (j, &u) in post.unmask_probs.iter().enumerate() {
            worst = worst.max((u - (alpha_s - alpha_t) / denom * pred.prob(j)).abs());
        }
        worst = worst.max((post.total() - 1.0).abs());
    }
    worst
}

pub fn suite_kernel_identities(seed: u64) -> SuiteResult {
    let mut rng = Rng::from_seed(seed ^ 0xA1);
    let mut worst = 0.0f64;

    // Normalization + MDM specialization over 1000 fuzzed inputs.
    for _ in 0..1000 {
        let n = 2 + rng.below(3);
        let prior = PriorSpec::MaskAbsorbing { n_data: n };
        let alpha_t = 0.05 + 0.9 * rng.uniform();
        let alpha_s = alpha_t + (0.99 - alpha_t) * rng.uniform();
        let w = random_simplex(n, 1e-3, &mut rng);
        let pred = Categorical::new(w.clone()).unwrap();
        let mut soft = w.clone();
        soft.push(0.0);
        let general = posterior_general_soft(n, &soft, alpha_s, alpha_t, &prior).unwrap();
        let mdm = posterior_mdm(LatentToken::Masked, &pred, alpha_s, alpha_t).unwrap();
        let sum: f64 = general.probs().iter().sum();
        worst = worst.max((sum - 1.0).abs());
        for j in 0..=n {
            worst = worst.max((general.prob(j) - mdm.prob(j)).abs());
        }
    }

    // IMDM branch weights against the two-case derivation.
    worst = worst.max(imdm_weights_gap(posterior_imdm, 1000, seed ^ 0xA2));

    // Chapman-Kolmogorov on finite uniform priors.
    let mut rng = Rng::from_seed(seed ^ 0xA3);
    for _ in 0..100 {
        let n = 2 + rng.below(2);
        let k = n + rng.below(4);
        let prior = PriorSpec::UniformK { n_data: n, k };
        let x = rng.below(n);
        let alpha_t = 0.05 + 0.9 * rng.uniform();
        let alpha_s = alpha_t + (0.99 - alpha_t) * rng.uniform();
        let at_s = imdm_core::kernels::forward_marginal(x, alpha_s, &prior).unwrap();
        let at_t = imdm_core::kernels::forward_marginal(x, alpha_t, &prior).unwrap();
        for zt in 0..k {
            let mut total = 0.0;
            for zs in 0..k {
                let kern = step_kernel(zs, alpha_t / alpha_s, &prior).unwrap();
                total += kern.prob(zt) * at_s.prob(zs);
            }
            worst = worst.max((total - at_t.prob(zt)).abs());
        }
    }

    SuiteResult::from_worst(
        "kernel_identities",
        worst,
        1e-12,
        "normalization, absorbing-prior specialization, infinite-mask weights, Chapman-Kolmogorov"
            .into(),
    )
}

pub fn suite_nelbo_limit(seed: u64) -> SuiteResult {
    let sched = Schedule::linear(1e-9).unwrap();
    let mut rng = Rng::from_seed(seed ^ 0xB1);
    let k = 1_000_000;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = 2 + rng.below(2);
        let x_true = rng.below(n);
        let z_t = n + rng.below(k - n);
        let pred = Categorical::new(random_simplex(n, 0.25, &mut rng)).unwrap();
        let alpha_t = 0.5 + 0.4 * rng.uniform();
        let t = 1.0 - alpha_t;
        let finite = uniform_nelbo_term(k, &pred, x_true, z_t, t, &sched).unwrap();
        let limit = imdm_nelbo_term(&pred, x_true, t, &sched).unwrap();
        worst = worst.max((finite - limit).abs());
        // Case z_t = x must be exactly zero.
        let zero = uniform_nelbo_term(k, &pred, x_true, x_true, t, &sched).unwrap();
        worst = worst.max(zero.abs());
    }
    SuiteResult::from_worst(
        "nelbo_limit",
        worst,
        1e-4,
        "finite-K uniform NELBO vs infinite-mask term at K = 1e6; clean-state case exactly 0".into(),
    )
}

pub fn suite_gradient_check(seed: u64) -> SuiteResult {
    let sched = Schedule::default();
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let mut rng = Rng::from_seed(seed ^ (0xC0 + i));
        let kind = if i % 3 == 0 {
            ModelKind::Mdm
        } else {
            ModelKind::Imdm
        };
        let dims = ModelDims::synthetic();
        let noise = NoiseSpec {
            dim: dims.noise_dim,
            ..NoiseSpec::default()
        };
        let mut model = Denoiser::init(kind, dims, noise, &mut rng).unwrap();
        if kind == ModelKind::Imdm && i % 2 == 0 {
            for v in model.params.noise_w2.data.iter_mut() {
                *v = rng.uniform_signed() * 0.2;
            }
        }
        let batch_rng = Rng::from_seed(seed ^ (0xD0 + i));
        let batch = make_batch(
            &DatasetSpec::SyntheticPair,
            &sched,
            kind,
            &model.noise,
            8,
            &batch_rng,
        )
        .unwrap();
        let mut coord_rng = Rng::from_seed(seed ^ (0xE0 + i));
        let err = model
            .grad_check(&batch, &sched, -30.0, 1e-5, 220, &mut coord_rng)
            .unwrap();
        worst = worst.max(err);
    }
    SuiteResult::from_worst(
        "gradient_check",
        worst,
        1e-4,
        "analytic vs central differences, 220 coordinates x 10 configurations".into(),
    )
}

pub fn suite_thm1(seed: u64) -> SuiteResult {
    let mut rng = Rng::from_seed(seed ^ 0xF1);
    let mut worst_violation = 0.0f64;

    for _ in 0..200 {
        let n = 2 + rng.below(2);
        let l = 2 + rng.below(2);
        let size = n.pow(l as u32);
        let data = JointDist::new(n, l, random_simplex(size, 0.01, &mut rng)).unwrap();
        let (bound, _) = thm1_lower_bound(&data, 1.0, 0.0).unwrap();

        // Exact one-step factorization error of factorized models at the
        // full-mask instance: KL(data || product of per-position marginals).
        // Checked for the true-marginal model and three random models.
        let mut models: Vec<Vec<Vec<f64>>> =
            vec![(0..l).map(|v| data.marginal(v)).collect::<Vec<_>>()];
        for _ in 0..3 {
            models.push((0..l).map(|_| random_simplex(n, 0.02, &mut rng)).collect());
        }
        for marginals in &models {
            let mut err = 0.0;
            for (idx, &p) in data.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let toks = data.tokens_of(idx);
                let mut q = 1.0;
                for (v, &tok) in toks.iter().enumerate() {
                    q *= marginals[v][tok as usize];
                }
                err += p * (p / q).ln();
            }
            worst_violation = worst_violation.max(bound - err);
        }
    }

    // Synthetic task at the full step: the bound is ln 2 to 1e-12.
    let synthetic = JointDist::new(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
    let (bound, _) = thm1_lower_bound(&synthetic, 1.0, 0.0).unwrap();
    let ln2_gap = (bound - core::f64::consts::LN_2).abs();

    SuiteResult {
        name: "thm1_lower_bound".into(),
        passed: worst_violation <= 1e-9 && ln2_gap <= 1e-12,
        worst: worst_violation,
        tolerance: 1e-9,
        detail: format!(
            "200 random processes: error >= bound; synthetic full-step bound ln2 gap {ln2_gap:.2e} (tol 1e-12)"
        ),
    }
}

pub fn suite_lemma_cmi(seed: u64) -> SuiteResult {
    let mut rng = Rng::from_seed(seed ^ 0x11);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let da = 2 + rng.below(2);
        let db = 2 + rng.below(2);
        let dc = 2 + rng.below(2);
        let joint = random_simplex(da * db * dc, 1e-4, &mut rng);
        let slack = lemma_cmi_check(&joint, (da, db, dc)).unwrap();
        worst = worst.max(-slack);
    }
    SuiteResult::from_worst(
        "lemma_conditional_mi",
        worst,
        1e-12,
        "I(A;B|C) >= I(A;B) - H(C) on 500 fuzzed joints".into(),
    )
}

pub fn suite_partition_map(seed: u64) -> SuiteResult {
    let mut rng = Rng::from_seed(seed ^ 0x21);
    let mut worst_analytic = 0.0f64;
    let mut worst_tv = 0.0f64;
    for case in 0..100 {
        let n = 2 + rng.below(3);
        let target = JointDist::new(n, 2, random_simplex(n * n, 0.01, &mut rng)).unwrap();
        let map = build_partition_map(&target);
        worst_analytic = worst_analytic.max(map.pushforward_gap());

        // Monte Carlo pushforward at 1e6 draws on the first ten targets.
        if case >= 10 {
            continue;
        }
        let mut counts = vec![0usize; map.intervals()];
        let mut mc = Rng::new(seed ^ 0x22, case);
        for _ in 0..1_000_000 {
            let u = mc.uniform();
            // map_scalar returns tokens; count intervals directly instead.
            let mut lo = 0usize;
            let mut hi = map.intervals();
            while lo + 1 < hi {
                let mid = (lo + hi) / 2;
                if u < map.cuts()[mid] {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            counts[lo] += 1;
        }
        let mut tv = 0.0;
        for (k, &c) in counts.iter().enumerate() {
            tv += (c as f64 / 1e6 - map.interval_prob(k)).abs();
        }
        worst_tv = worst_tv.max(tv / 2.0);
    }
    SuiteResult {
        name: "partition_map".into(),
        passed: worst_analytic <= 1e-15 && worst_tv <= 2e-3,
        worst: worst_analytic,
        tolerance: 1e-15,
        detail: format!(
            "analytic pushforward gap {worst_analytic:.2e}; worst MC total variation {worst_tv:.2e} (tol 2e-3)"
        ),
    }
}

/// Run every suite.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![
        suite_kernel_identities(seed),
        suite_nelbo_limit(seed),
        suite_gradient_check(seed),
        suite_thm1(seed),
        suite_lemma_cmi(seed),
        suite_partition_map(seed),
    ]
}
