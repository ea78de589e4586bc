//! Small numeric helpers shared across modules.

pub use statrs::function::gamma::{digamma, ln_gamma};

/// Trigamma function psi'(x) for x > 0.
///
/// Recurrence psi'(x) = psi'(x+1) + 1/x^2 lifts the argument above 6, then
/// the standard asymptotic series applies. Accurate to ~1e-12 relative,
/// which is ample for observed-information standard errors.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma requires x > 0, got {x}");
    let mut x = x;
    let mut acc = 0.0;
    while x < 8.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9) + 5/(66x^11)
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0
            + inv
                * (0.5
                    + inv
                        * (1.0 / 6.0
                            + inv2
                                * (-1.0 / 30.0
                                    + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * 5.0 / 66.0))))));
    acc + series
}

/// log(sum(exp(v))) without overflow; returns -inf for an empty slice.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Upper tail probability of a chi-squared distribution with `df` degrees of
/// freedom. `df` may be fractional; df <= 0 yields p = 1.
pub fn chi2_sf(stat: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    if stat <= 0.0 {
        return 1.0;
    }
    // Regularized upper incomplete gamma Q(df/2, stat/2).
    statrs::function::gamma::gamma_ur(df / 2.0, stat / 2.0)
}

/// Sample mean; 0 for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Unbiased sample variance; 0 for fewer than two points.
pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Linear-interpolation quantile (type 7) of an unsorted slice.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    assert!(!v.is_empty(), "quantile of empty slice");
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Median via [`quantile`].
pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}
