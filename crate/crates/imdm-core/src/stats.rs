//! Small statistical test helpers used by the property suites.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Two-sided binomial check via the normal approximation: is the observed
/// count within `z` standard deviations of `n * p` (plus a continuity term)?
pub fn binomial_within(observed: usize, n: usize, p: f64, z: f64) -> bool {
    let nf = n as f64;
    let mean = nf * p;
    let sd = math::sqrt(nf * p * (1.0 - p)).max(1e-12);
    (observed as f64 - mean).abs() <= z * sd + 0.5
}

/// Regularized upper incomplete gamma `Q(a, x)`; series for `x < a + 1`,
/// continued fraction otherwise.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    let ln_gamma_a = libm::lgamma(a);
    if x < a + 1.0 {
        // P(a, x) by series, return 1 - P.
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        1.0 - sum * math::exp(-x + a * math::ln(x) - ln_gamma_a)
    } else {
        // Q(a, x) by Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        math::exp(-x + a * math::ln(x) - ln_gamma_a) * h
    }
}

/// Chi-square upper-tail p-value with `dof` degrees of freedom.
pub fn chi_square_pvalue(statistic: f64, dof: usize) -> f64 {
    gamma_q(dof as f64 / 2.0, statistic / 2.0)
}

/// Chi-square goodness-of-fit p-value for observed counts against expected
/// probabilities (dof = bins - 1).
pub fn chi_square_gof(observed: &[usize], expected_probs: &[f64]) -> f64 {
    let n: usize = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs.iter()) {
        let e = n as f64 * p;
        if e > 0.0 {
            let d = o as f64 - e;
            stat += d * d / e;
        }
    }
    chi_square_pvalue(stat, observed.len() - 1)
}

/// Kolmogorov survival function `Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * math::exp(-2.0 * kf * kf * lambda * lambda);
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample KS p-value on integer-coded samples (asymptotic; conservative
/// on discrete support, which only makes the test stricter to pass).
pub fn ks_two_sample_pvalue(a: &[usize], b: &[usize], support: usize) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut ca = vec![0.0; support];
    let mut cb = vec![0.0; support];
    for &x in a {
        ca[x] += 1.0;
    }
    for &x in b {
        cb[x] += 1.0;
    }
    let mut d: f64 = 0.0;
    let (mut fa, mut fb) = (0.0, 0.0);
    for i in 0..support {
        fa += ca[i] / na;
        fb += cb[i] / nb;
        d = d.max((fa - fb).abs());
    }
    let ne = math::sqrt(na * nb / (na + nb));
    kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)
}

/// Shannon entropy in nats of a probability vector (`0 ln 0 = 0`).
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().map(|&p| math::xlnx(p)).sum::<f64>()
}

/// KL divergence in nats; `+inf` when `p` has mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        acc += pi * math::ln(pi / qi);
    }
    acc
}

/// Histogram of integer-coded samples normalized to frequencies.
pub fn frequencies(samples: &[usize], support: usize) -> Vec<f64> {
    let mut f = vec![0.0; support];
    for &s in samples {
        f[s] += 1.0;
    }
    let n = samples.len() as f64;
    for v in f.iter_mut() {
        *v /= n;
    }
    f
}
