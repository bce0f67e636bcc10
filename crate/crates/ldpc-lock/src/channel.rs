//! Binary symmetric channel and syndrome-statistics calculations.
//!
//! Sign convention: the per-bit LLR is the log-ratio of P(bit = 1) over
//! P(bit = 0), so a positive value votes for 1. Most coding texts use the
//! opposite orientation; everything downstream of here (decoder hard
//! decisions included) assumes this one.
//!
//! The LLR magnitude defaults to 1.0. Under min-sum, scaling every input by
//! a positive constant leaves the hard-decision trajectory unchanged, so the
//! true BSC magnitude ln((1-p)/p) buys nothing; a flag exists for
//! experimentation anyway.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::BitVec;

#[derive(Clone, Copy, Debug)]
pub struct BscChannel {
    p: f64,
    llr_magnitude: f64,
}

impl BscChannel {
    pub fn new(p: f64) -> Result<Self> {
        Self::with_magnitude(p, 1.0)
    }

    pub fn with_magnitude(p: f64, llr_magnitude: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "crossover probability must be in [0, 0.5], got {p}"
            )));
        }
        if !(llr_magnitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "LLR magnitude must be positive, got {llr_magnitude}"
            )));
        }
        Ok(BscChannel { p, llr_magnitude })
    }

    pub fn crossover(&self) -> f64 {
        self.p
    }

    pub fn llr_magnitude(&self) -> f64 {
        self.llr_magnitude
    }
}

/// Sends `codeword` through the channel: each bit flips independently with
/// probability `p`. Returns the received hard bits and the per-bit LLRs
/// (positive iff the received bit is 1).
pub fn transmit<R: Rng + ?Sized>(
    codeword: &BitVec,
    channel: &BscChannel,
    rng: &mut R,
) -> (BitVec, Vec<f64>) {
    let n = codeword.len();
    let mut received = codeword.clone();
    if channel.p > 0.0 {
        for i in 0..n {
            if rng.random::<f64>() < channel.p {
                received.flip(i);
            }
        }
    }
    let llrs = (0..n)
        .map(|i| {
            if received.get(i) {
                channel.llr_magnitude
            } else {
                -channel.llr_magnitude
            }
        })
        .collect();
    (received, llrs)
}

/// Sum of the binomial(n, p) mass over odd counts, i.e. the probability that
/// an XOR of n independent Bernoulli(p) bits is 1.
///
/// Evaluated by direct term summation; the closed form (1 - (1-2p)^n) / 2 is
/// kept as an internal cross-check.
fn odd_binomial_sum(n: usize, p: f64) -> f64 {
    debug_assert!(n >= 1);
    let q = 1.0 - p;
    // term_i = C(n, i) p^i q^(n-i), built by the usual ratio recurrence.
    // Falls back to log-space terms when the start underflows.
    let mut sum = 0.0;
    let t0 = q.powi(n as i32);
    if t0 > 0.0 || p == 1.0 {
        let mut term = t0;
        for i in 1..=n {
            if term == 0.0 && p == 1.0 {
                // q = 0: only the i = n term is nonzero.
                term = if i == n { 1.0 } else { 0.0 };
            } else {
                term *= (n - i + 1) as f64 / i as f64 * (p / q);
            }
            if i % 2 == 1 {
                sum += term;
            }
        }
    } else {
        use statrs::function::gamma::ln_gamma;
        let lg_n = ln_gamma(n as f64 + 1.0);
        for i in (1..=n).step_by(2) {
            let ln_term = lg_n - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0)
                + i as f64 * p.ln()
                + (n - i) as f64 * q.ln();
            sum += ln_term.exp();
        }
    }
    let closed = (1.0 - (1.0 - 2.0 * p).powi(n as i32)) / 2.0;
    debug_assert!(
        (sum - closed).abs() < 1e-9,
        "odd-sum {sum} vs closed form {closed} for n={n}, p={p}"
    );
    sum
}

/// Closed-form odd-weight probability, used as the independent cross-check
/// of the term summation and for large-argument scans.
pub fn odd_sum_closed_form(n: usize, p: f64) -> f64 {
    (1.0 - (1.0 - 2.0 * p).powi(n as i32)) / 2.0
}

/// Probability that one syndrome bit is 1 when each of the `d_c` codeword
/// bits entering the check flips independently with probability `p`.
pub fn prob_t_bit_one(d_c: usize, p: f64) -> Result<f64> {
    if d_c < 1 {
        return Err(Error::InvalidParameter("d_c must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "probability must be in [0, 1], got {p}"
        )));
    }
    Ok(odd_binomial_sum(d_c, p))
}

/// Probability that one folded bit is 1, where the fold XORs `g` syndrome
/// bits each of which is 1 with probability `q1`.
pub fn prob_r_bit_one(g: usize, q1: f64) -> Result<f64> {
    if g < 1 {
        return Err(Error::InvalidParameter("g must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&q1) {
        return Err(Error::InvalidParameter(format!(
            "probability must be in [0, 1], got {q1}"
        )));
    }
    Ok(odd_binomial_sum(g, q1))
}

/// Smallest fold width `g` that brings the folded-bit probability within
/// `tolerance` of 1/2 at the given row weight and channel error rate.
///
/// The scan uses the closed form; the returned value is re-checked against
/// the term summation.
pub fn select_g(d_c: usize, p: f64, tolerance: f64) -> Result<usize> {
    if !(tolerance > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let q1 = prob_t_bit_one(d_c, p)?;
    if q1 == 0.0 {
        return Err(Error::InvalidParameter(
            "syndrome bits are never 1 at p = 0; no fold width exists".into(),
        ));
    }
    const MAX_G: usize = 1 << 20;
    for g in 1..=MAX_G {
        if (odd_sum_closed_form(g, q1) - 0.5).abs() < tolerance {
            if g <= 4096 {
                debug_assert!((prob_r_bit_one(g, q1)? - 0.5).abs() < tolerance);
            }
            return Ok(g);
        }
    }
    Err(Error::InvalidParameter(format!(
        "no fold width below {MAX_G} meets tolerance {tolerance}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qc::QcParityMatrix;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_transmit_preserves_bits() {
        let ch = BscChannel::new(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = BitVec::random(64, &mut rng);
        let (rx, llrs) = transmit(&c, &ch, &mut rng);
        assert_eq!(rx, c);
        for i in 0..64 {
            assert_eq!(llrs[i] > 0.0, c.get(i));
            assert_eq!(llrs[i].abs(), 1.0);
        }
    }

    #[test]
    fn half_crossover_flips_about_half() {
        let ch = BscChannel::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = BitVec::zeros(1000);
        let mut total = 0usize;
        let trials = 200;
        for _ in 0..trials {
            let (rx, _) = transmit(&c, &ch, &mut rng);
            total += rx.weight();
        }
        let mean = total as f64 / trials as f64;
        // Binomial(1000, 0.5): sd of the per-trial count is ~15.8, of the
        // mean ~1.1; allow 5 sigma.
        assert!((mean - 500.0).abs() < 6.0, "mean flips {mean}");
    }

    #[test]
    fn flip_count_matches_binomial_mean() {
        let ch = BscChannel::new(0.025).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = BitVec::zeros(1270);
        let trials = 10_000usize;
        let mut total = 0usize;
        for _ in 0..trials {
            let (rx, _) = transmit(&c, &ch, &mut rng);
            total += rx.weight();
        }
        let mean = total as f64 / trials as f64;
        let expect = 1270.0 * 0.025; // 31.75
        let sd_of_mean = (1270.0 * 0.025 * 0.975 / trials as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * sd_of_mean,
            "mean {mean} vs {expect} +- {sd_of_mean}"
        );
    }

    #[test]
    fn syndrome_bit_probability_reference_point() {
        let v = prob_t_bit_one(10, 0.025).unwrap();
        assert!((0.200..=0.202).contains(&v), "got {v}");
    }

    #[test]
    fn syndrome_bit_probability_endpoints() {
        assert_eq!(prob_t_bit_one(7, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(prob_t_bit_one(9, 0.5).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn folded_bit_probability_reference_point() {
        let q1 = prob_t_bit_one(10, 0.025).unwrap();
        let r = prob_r_bit_one(15, q1).unwrap();
        assert!((0.495..=0.505).contains(&r), "got {r}");
    }

    #[test]
    fn fold_width_one_is_identity() {
        assert_abs_diff_eq!(prob_r_bit_one(1, 0.321).unwrap(), 0.321, epsilon = 1e-15);
    }

    #[test]
    fn fold_width_two_by_enumeration() {
        // Two bits at 0.25: odd parity = 2 * 0.25 * 0.75.
        assert_abs_diff_eq!(prob_r_bit_one(2, 0.25).unwrap(), 0.375, epsilon = 1e-15);
    }

    #[test]
    fn term_sum_matches_closed_form_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let n = rng.random_range(1..64usize);
            let p: f64 = rng.random();
            let a = odd_binomial_sum(n, p);
            let b = odd_sum_closed_form(n, p);
            assert!((a - b).abs() < 1e-12, "n={n} p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn syndrome_probability_monotone_in_p() {
        // Monotone up to summation noise, which sits at the 1e-16 level.
        let mut prev = 0.0;
        for i in 0..=100 {
            let p = 0.005 * i as f64;
            let v = prob_t_bit_one(11, p).unwrap();
            assert!(v >= prev - 1e-12, "not monotone at p={p}");
            prev = prev.max(v);
        }
    }

    #[test]
    fn select_g_accepts_reference_width() {
        let g = select_g(10, 0.025, 0.005).unwrap();
        assert!(g <= 15, "got {g}");
        // The reference width itself satisfies the tolerance.
        let q1 = prob_t_bit_one(10, 0.025).unwrap();
        assert!((prob_r_bit_one(15, q1).unwrap() - 0.5).abs() < 0.005);
        // Minimality: g - 1 must fail.
        assert!((odd_sum_closed_form(g - 1, q1) - 0.5).abs() >= 0.005);
    }

    #[test]
    fn select_g_degenerate_and_error_cases() {
        // q1 = 0.5 at p = 0.5 makes a single bit already uniform.
        assert_eq!(select_g(10, 0.5, 0.01).unwrap(), 1);
        assert!(select_g(10, 0.0, 0.01).is_err());
        // Scan case away from the reference point.
        let g = select_g(10, 0.01, 0.01).unwrap();
        let q1 = prob_t_bit_one(10, 0.01).unwrap();
        assert!((prob_r_bit_one(g, q1).unwrap() - 0.5).abs() < 0.01);
        assert!(g > 1 && (odd_sum_closed_form(g - 1, q1) - 0.5).abs() >= 0.01);
    }

    #[test]
    fn empirical_syndrome_frequency_matches_analytic() {
        // Zero codeword + BSC noise on a toy code; every syndrome bit should
        // be 1 with the analytic probability.
        let code = QcParityMatrix::profile("toy-56").unwrap();
        let d_c = code.row_weight().unwrap();
        let p = 0.06;
        let expect = prob_t_bit_one(d_c, p).unwrap();
        let ch = BscChannel::new(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let zero = BitVec::zeros(code.n());
        let trials = 100_000usize;
        let mut ones = 0usize;
        for _ in 0..trials {
            let (rx, _) = transmit(&zero, &ch, &mut rng);
            let t = code.syndrome(&rx).unwrap();
            ones += t.weight();
        }
        let samples = (trials * code.h()) as f64;
        let freq = ones as f64 / samples;
        // Syndrome bits within a trial are correlated, so take the standard
        // error per trial, not per bit.
        let per_trial_sd = {
            let mean_w = expect * code.h() as f64;
            // crude bound: treat the row weight as the worst-case correlation
            // factor on the variance of the per-trial syndrome weight
            (mean_w * (1.0 - expect) * d_c as f64).sqrt()
        };
        let se = per_trial_sd / (trials as f64).sqrt() / code.h() as f64;
        assert!(
            (freq - expect).abs() < 3.0 * se.max(1e-4),
            "freq {freq} vs {expect} (se {se})"
        );
    }
}
