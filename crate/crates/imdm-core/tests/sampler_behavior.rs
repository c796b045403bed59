//! Statistical contracts of the few-step sampler: unmask-time uniformity,
//! keep/fresh branching frequencies, pairwise decode-event scaling, and the
//! zero-init MDM/IMDM sampling equivalence.

use imdm_core::denoiser::{Denoiser, ModelDims, ModelKind, NoiseSpec};
use imdm_core::sampler::{decode_batch, decode_batch_logged, DecodeConfig};
use imdm_core::stats;
use imdm_core::{Rng, Schedule};

fn toy(kind: ModelKind, seed: u64) -> Denoiser {
    let mut rng = Rng::from_seed(seed);
    let dims = ModelDims::synthetic();
    let noise = NoiseSpec {
        dim: dims.noise_dim,
        ..NoiseSpec::default()
    };
    Denoiser::init(kind, dims, noise, &mut rng).unwrap()
}

#[test]
fn unmask_times_are_uniform_over_steps() {
    // Linear schedule + uniform grid: each position unmasks at a uniform
    // step index. Chi-square over 1e4 trajectories must not reject.
    let model = toy(ModelKind::Mdm, 1);
    let steps = 8;
    let cfg = DecodeConfig {
        steps,
        mode: ModelKind::Mdm,
        seed: 123,
        ..DecodeConfig::default()
    };
    let logs = decode_batch_logged(&model, &cfg, &Schedule::default(), 10_000).unwrap();
    let mut counts = vec![0usize; steps];
    for (_, log) in &logs {
        for &s in &log.unmask_step {
            counts[s] += 1;
        }
    }
    let expected = vec![1.0 / steps as f64; steps];
    let p = stats::chi_square_gof(&counts, &expected);
    assert!(p > 0.01, "chi-square p = {p}, counts {counts:?}");
}

#[test]
fn keep_fresh_branching_matches_alpha_ratio() {
    // Aggregate keep/fresh decisions across a grid where the ratio is the
    // same at every interior step never happens (it varies); so check one
    // step pair explicitly: T = 2, first step from t = 1 to t = 0.5.
    let model = toy(ModelKind::Imdm, 2);
    let sched = Schedule::default();
    let cfg = DecodeConfig {
        steps: 2,
        mode: ModelKind::Imdm,
        seed: 77,
        ..DecodeConfig::default()
    };
    let logs = decode_batch_logged(&model, &cfg, &sched, 20_000).unwrap();
    let mut keep = 0usize;
    let mut fresh = 0usize;
    for (_, log) in &logs {
        keep += log.keep_events;
        fresh += log.fresh_events;
    }
    // Branch decisions only happen at the non-final step (t=1 -> s=0.5):
    // alpha_ts = alpha(1)/alpha(0.5) = 1e-4 / 0.5.
    let alpha_ts = sched.alpha(1.0).unwrap() / sched.alpha(0.5).unwrap();
    let total = keep + fresh;
    assert!(total > 1000, "no mask-branch events recorded");
    assert!(
        stats::binomial_within(keep, total, alpha_ts, 3.5),
        "keep {keep} of {total}, expected rate {alpha_ts}"
    );
}

#[test]
fn pairwise_decode_event_scales_with_square() {
    // Empirical frequency of both positions decoding in the same step,
    // given both masked, matches ((alpha_s - alpha_t)/(1 - alpha_t))^2 at
    // three (s, t) settings on the grid.
    let model = toy(ModelKind::Mdm, 3);
    let sched = Schedule::default();
    for &steps in &[2usize, 4, 8] {
        let cfg = DecodeConfig {
            steps,
            mode: ModelKind::Mdm,
            seed: 1000 + steps as u64,
            ..DecodeConfig::default()
        };
        let logs = decode_batch_logged(&model, &cfg, &sched, 10_000).unwrap();
        // First step: both positions are always masked at t = 1.
        let grid = imdm_core::make_grid(steps).unwrap();
        let (t, s) = grid.step(0);
        let (alpha_t, _) = sched.alpha_at(t).unwrap();
        let (alpha_s, _) = sched.alpha_at(s).unwrap();
        let p1 = (alpha_s - alpha_t) / (1.0 - alpha_t);
        let expect = p1 * p1;
        let both = logs
            .iter()
            .filter(|(_, log)| log.unmask_step[0] == 0 && log.unmask_step[1] == 0)
            .count();
        assert!(
            stats::binomial_within(both, logs.len(), expect, 2.807),
            "steps {steps}: both-decode {both}/{} vs p^2 = {expect}",
            logs.len()
        );
    }
}

#[test]
fn zero_init_mdm_and_imdm_sample_the_same_distribution() {
    // Same weights, two modes: masked decode distributions agree (KS).
    let mdm = toy(ModelKind::Mdm, 4);
    let imdm = mdm.with_kind(ModelKind::Imdm);
    let sched = Schedule::default();
    let n = 10_000;
    let mdm_cfg = DecodeConfig {
        steps: 4,
        mode: ModelKind::Mdm,
        seed: 900,
        ..DecodeConfig::default()
    };
    let imdm_cfg = DecodeConfig {
        steps: 4,
        mode: ModelKind::Imdm,
        seed: 901,
        ..DecodeConfig::default()
    };
    let a = decode_batch(&mdm, &mdm_cfg, &sched, n).unwrap();
    let b = decode_batch(&imdm, &imdm_cfg, &sched, n).unwrap();
    let code = |s: &imdm_core::Sequence| (s.tokens[0] * 2 + s.tokens[1]) as usize;
    let xa: Vec<usize> = a.iter().map(code).collect();
    let xb: Vec<usize> = b.iter().map(code).collect();
    let p = stats::ks_two_sample_pvalue(&xa, &xb, 4);
    assert!(p > 0.01, "KS p = {p}");
}

#[test]
fn trajectories_record_final_noise_for_imdm() {
    let model = toy(ModelKind::Imdm, 5);
    let cfg = DecodeConfig {
        steps: 8,
        mode: ModelKind::Imdm,
        seed: 55,
        ..DecodeConfig::default()
    };
    let logs = decode_batch_logged(&model, &cfg, &Schedule::default(), 50).unwrap();
    for (_, log) in &logs {
        for eps in &log.final_eps {
            let eps = eps.as_ref().expect("every position unmasked with noise");
            assert_eq!(eps.len(), model.noise.dim);
        }
    }
}
