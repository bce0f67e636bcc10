//! Small statistics helpers shared by the census estimator and the
//! experiment harness.

use statrs::distribution::{Beta, ContinuousCDF};

/// Two-sided Clopper-Pearson interval for `successes` out of `trials` at the
/// given confidence level.
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    assert!(trials > 0, "interval requires at least one trial");
    assert!(successes <= trials);
    assert!((0.0..1.0).contains(&(1.0 - confidence)));
    let alpha = 1.0 - confidence;
    let k = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(alpha / 2.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - alpha / 2.0)
    };
    (lo, hi)
}
