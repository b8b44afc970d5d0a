//! Binomial confidence helpers used by the auditor and the acceptance checks.

use statrs::function::beta::beta_reg;

/// Two-sided Clopper-Pearson interval for `successes` out of `trials` at the
/// given confidence level (e.g. 0.95).
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0 && successes <= trials, "need 0 <= successes <= trials, trials > 0");
    let alpha = 1.0 - confidence;
    let (x, n) = (successes as f64, trials as f64);
    let lower = if successes == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, x, n - x + 1.0)
    };
    let upper = if successes == trials {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, x + 1.0, n - x)
    };
    (lower, upper)
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Standard deviation of an empirical frequency: `√(p(1−p)/n)`.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_cases_have_closed_forms() {
        // x = 0: upper = 1 − (α/2)^{1/n}; x = n: lower = (α/2)^{1/n}
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9, "{hi}");
        let (lo, hi) = clopper_pearson(50, 50, 0.95);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(1.0 / 50.0)).abs() < 1e-9, "{lo}");
    }

    #[test]
    fn known_interior_value() {
        // 5 of 10 at 95%: (0.187086, 0.812914)
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert!((lo - 0.187086).abs() < 1e-5, "{lo}");
        assert!((hi - 0.812914).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn interval_contains_estimate() {
        for n in [1u64, 7, 100, 10_000] {
            for x in [0, n / 3, n / 2, n] {
                let (lo, hi) = clopper_pearson(x, n, 0.95);
                let p = x as f64 / n as f64;
                assert!(lo <= p && p <= hi);
            }
        }
    }

    #[test]
    fn sigma() {
        assert_eq!(binomial_sigma(0.5, 100), 0.05);
        assert_eq!(binomial_sigma(0.0, 100), 0.0);
    }
}
