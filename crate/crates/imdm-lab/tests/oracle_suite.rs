//! The oracle suites must pass on a fresh checkout, and the kernel checker
//! must catch a deliberately broken posterior (mutation fixture).

use imdm_core::kernels::{posterior_imdm, ImdmPosterior};
use imdm_core::sequence::LatentToken;
use imdm_core::Categorical;
use imdm_lab::oracle;

#[test]
fn all_suites_pass_from_fresh_state() {
    let results = oracle::run_all(0);
    for r in &results {
        assert!(
            r.passed,
            "suite {} failed: worst {} vs tol {} ({})",
            r.name, r.worst, r.tolerance, r.detail
        );
    }
}

#[test]
fn kernel_checker_catches_swapped_branch_weights() {
    // Mutation fixture: swap the keep/fresh factors of the mask branch.
    let mutated = |z_t: LatentToken,
                   pred: &Categorical,
                   alpha_s: f64,
                   alpha_t: f64|
     -> imdm_core::Result<ImdmPosterior> {
        let mut p = posterior_imdm(z_t, pred, alpha_s, alpha_t)?;
        core::mem::swap(&mut p.keep_mask_prob, &mut p.fresh_mask_prob);
        Ok(p)
    };
    let gap = oracle::imdm_weights_gap(mutated, 200, 7);
    assert!(gap > 1e-3, "mutated kernel slipped through: gap {gap}");

    // Sign-style mutation: negate the unmask branch direction by moving
    // all unmask mass onto token 0.
    let sign_broken = |z_t: LatentToken,
                       pred: &Categorical,
                       alpha_s: f64,
                       alpha_t: f64|
     -> imdm_core::Result<ImdmPosterior> {
        let mut p = posterior_imdm(z_t, pred, alpha_s, alpha_t)?;
        let total = p.unmask_total();
        for v in p.unmask_probs.iter_mut() {
            *v = 0.0;
        }
        p.unmask_probs[0] = total;
        Ok(p)
    };
    let gap = oracle::imdm_weights_gap(sign_broken, 200, 8);
    assert!(gap > 1e-3, "broken unmask distribution slipped through");

    // The genuine kernel sits far inside tolerance.
    let gap = oracle::imdm_weights_gap(posterior_imdm, 200, 9);
    assert!(gap <= 1e-12);
}
