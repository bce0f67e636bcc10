//! Monte-Carlo experiment engine: frame-error-rate and iteration-count
//! sweeps with reproducible parallel execution.
//!
//! Reproducibility contract: every trial draws from its own counter-derived
//! random stream, seeded from the master seed and the BER point and indexed
//! by the trial number. Trials are dispatched in fixed-size batches and the
//! stop rule is evaluated only at batch boundaries, so the set of executed
//! trials — and therefore the emitted CSV, byte for byte — does not depend
//! on the worker count.
//!
//! Transmission uses the all-zero codeword by default. That is sound for
//! the plain decoder by channel symmetry, and for the locked experiments
//! because the stop tests only see the syndrome, which depends on the error
//! pattern alone. A random-codeword mode exists for checks where data
//! interacts with the offset vector.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{transmit, BscChannel};
use crate::decoder::{decode_minsum, decode_modified, DecoderConfig};
use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::locking::{Key, KeyClass, StopCondition};
use crate::qc::{NullSpace, QcParityMatrix};
use crate::stats::clopper_pearson;

const BATCH: u64 = 256;

#[derive(Clone, Copy, Debug)]
pub struct StopRule {
    /// Keep sampling until this many frame errors have been seen.
    pub min_frame_errors: u64,
    /// Hard trial cap; hitting it first marks the record as censored.
    pub max_trials: u64,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            min_frame_errors: 10,
            max_trials: 1_000_000,
        }
    }
}

#[derive(Clone)]
pub struct ExperimentConfig {
    pub code: Arc<QcParityMatrix>,
    pub decoder: DecoderConfig,
    /// Secret offset vector; all-zero selects the standard decoder when the
    /// stop condition is plain.
    pub v: BitVec,
    pub llr_magnitude: f64,
    /// Draw a fresh random codeword per trial instead of the all-zero one.
    pub random_codewords: bool,
    pub ber_grid: Vec<f64>,
    pub stop_rule: StopRule,
    pub master_seed: u64,
    /// 0 uses the global thread pool.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn new(code: Arc<QcParityMatrix>) -> Self {
        let v = BitVec::zeros(code.n());
        ExperimentConfig {
            code,
            decoder: DecoderConfig::default(),
            v,
            llr_magnitude: 1.0,
            random_codewords: false,
            ber_grid: Vec::new(),
            stop_rule: StopRule::default(),
            master_seed: 1,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.decoder.validate(&self.code)?;
        if self.v.len() != self.code.n() {
            return Err(Error::LengthMismatch {
                what: "offset vector",
                expected: self.code.n(),
                actual: self.v.len(),
            });
        }
        if self.stop_rule.min_frame_errors < 1 {
            return Err(Error::InvalidParameter("min_frame_errors must be at least 1".into()));
        }
        if self.stop_rule.max_trials < 1 {
            return Err(Error::InvalidParameter("max_trials must be at least 1".into()));
        }
        for &b in &self.ber_grid {
            if !(b > 0.0 && b <= 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "grid BER values must lie in (0, 0.5], got {b}"
                )));
            }
        }
        Ok(())
    }
}

/// One measured (BER, FER) point.
#[derive(Clone, Debug, PartialEq)]
pub struct FerRecord {
    pub ber: f64,
    pub trials: u64,
    pub frame_errors: u64,
    pub fer: f64,
    /// 95% Clopper-Pearson interval on the FER.
    pub fer_ci95: (f64, f64),
    pub avg_iterations: f64,
    /// Convergences whose output is not a codeword (the stop condition
    /// fired on a wrong syndrome).
    pub premature_stops: u64,
    /// The trial cap was hit before enough frame errors accumulated.
    pub censored: bool,
}

struct TrialOutcome {
    frame_error: bool,
    iterations: usize,
    premature: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn point_seed(master_seed: u64, ber: f64) -> u64 {
    splitmix64(master_seed ^ splitmix64(ber.to_bits()))
}

fn run_trial(
    cfg: &ExperimentConfig,
    null_space: Option<&NullSpace>,
    channel: &BscChannel,
    seed: u64,
    trial: u64,
) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let codeword = match null_space {
        Some(ns) => ns.sample(&mut rng),
        None => BitVec::zeros(cfg.code.n()),
    };
    let (_, llrs) = transmit(&codeword, channel, &mut rng);
    let plain_path = cfg.v.is_zero() && matches!(cfg.decoder.stop, StopCondition::Plain);
    let out = if plain_path {
        decode_minsum(&llrs, &cfg.code, &cfg.decoder, &mut rng)?
    } else {
        decode_modified(&llrs, &cfg.code, &cfg.v, &cfg.decoder, &mut rng)?
    };
    let premature = out.converged && !cfg.code.syndrome(&out.bits)?.is_zero();
    Ok(TrialOutcome {
        frame_error: out.bits != codeword,
        iterations: out.iterations,
        premature,
    })
}

fn run_point_inner(cfg: &ExperimentConfig, ber: f64) -> Result<FerRecord> {
    if !(0.0..=0.5).contains(&ber) {
        return Err(Error::InvalidParameter(format!(
            "BER must lie in [0, 0.5], got {ber}"
        )));
    }
    let channel = BscChannel::with_magnitude(ber, cfg.llr_magnitude)?;
    let null_space = if cfg.random_codewords {
        Some(NullSpace::of(&cfg.code)?)
    } else {
        None
    };
    let seed = point_seed(cfg.master_seed, ber);

    let mut trials = 0u64;
    let mut frame_errors = 0u64;
    let mut premature_stops = 0u64;
    let mut iteration_sum = 0u64;
    while trials < cfg.stop_rule.max_trials && frame_errors < cfg.stop_rule.min_frame_errors {
        let batch = BATCH.min(cfg.stop_rule.max_trials - trials);
        let outcomes: Result<Vec<TrialOutcome>> = (trials..trials + batch)
            .into_par_iter()
            .map(|i| run_trial(cfg, null_space.as_ref(), &channel, seed, i))
            .collect();
        for o in outcomes? {
            frame_errors += o.frame_error as u64;
            premature_stops += o.premature as u64;
            iteration_sum += o.iterations as u64;
        }
        trials += batch;
    }

    Ok(FerRecord {
        ber,
        trials,
        frame_errors,
        fer: frame_errors as f64 / trials as f64,
        fer_ci95: clopper_pearson(frame_errors, trials, 0.95),
        avg_iterations: iteration_sum as f64 / trials as f64,
        premature_stops,
        censored: frame_errors < cfg.stop_rule.min_frame_errors,
    })
}

fn install_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("worker pool construction");
        pool.install(f)
    }
}

/// Collects one (BER, FER) record, honoring the stop rule. Deterministic in
/// `(cfg.master_seed, ber)` regardless of worker count.
pub fn run_point(cfg: &ExperimentConfig, ber: f64) -> Result<FerRecord> {
    cfg.validate()?;
    install_pool(cfg.workers, || run_point_inner(cfg, ber))
}

/// Runs every grid point in order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<FerRecord>> {
    cfg.validate()?;
    if cfg.ber_grid.is_empty() {
        return Err(Error::InvalidParameter("the BER grid is empty".into()));
    }
    install_pool(cfg.workers, || {
        cfg.ber_grid.iter().map(|&b| run_point_inner(cfg, b)).collect()
    })
}

pub const SWEEP_CSV_HEADER: &str =
    "ber,trials,frame_errors,fer,fer_ci95_lo,fer_ci95_hi,avg_iterations,premature_stops,censored";

/// Fixed-layout CSV for a sweep (format v1).
pub fn sweep_csv(records: &[FerRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{SWEEP_CSV_HEADER}").unwrap();
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.ber,
            r.trials,
            r.frame_errors,
            r.fer,
            r.fer_ci95.0,
            r.fer_ci95.1,
            r.avg_iterations,
            r.premature_stops,
            r.censored
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Debug)]
pub struct WrongKeyRow {
    pub key_hex: String,
    pub class: KeyClass,
    pub record: FerRecord,
}

/// Measures each key at one BER point under the configured lock. The config
/// must carry a locked stop condition; each row records the key's census
/// classification next to its FER and iteration statistics.
pub fn wrong_key_report(cfg: &ExperimentConfig, keys: &[Key], ber: f64) -> Result<Vec<WrongKeyRow>> {
    let lock = cfg
        .decoder
        .stop
        .lock()
        .ok_or_else(|| Error::InvalidParameter("wrong-key report needs a locked stop condition".into()))?
        .clone();
    let mut rows = Vec::with_capacity(keys.len());
    for key in keys {
        let mut key_cfg = cfg.clone();
        key_cfg.decoder.stop = cfg.decoder.stop.with_key(key.clone())?;
        let record = run_point(&key_cfg, ber)?;
        rows.push(WrongKeyRow {
            key_hex: key.to_hex(),
            class: lock.classify(key)?,
            record,
        });
    }
    Ok(rows)
}

pub const WRONGKEY_CSV_HEADER: &str = "key,class,ber,trials,frame_errors,fer,avg_iterations,premature_stops";

pub fn wrong_key_csv(rows: &[WrongKeyRow]) -> String {
    let mut s = String::new();
    writeln!(s, "{WRONGKEY_CSV_HEADER}").unwrap();
    for row in rows {
        let r = &row.record;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            row.key_hex, row.class, r.ber, r.trials, r.frame_errors, r.fer, r.avg_iterations, r.premature_stops
        )
        .unwrap();
    }
    s
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EquivalenceReport {
    pub trials: u64,
    pub output_mismatches: u64,
    pub iteration_mismatches: u64,
    pub trace_mismatches: u64,
}

impl EquivalenceReport {
    pub fn clean(&self) -> bool {
        self.output_mismatches == 0 && self.iteration_mismatches == 0 && self.trace_mismatches == 0
    }
}

/// Lock-step comparison of the standard and offset decoders: random
/// codewords, random noise, and a fresh offset vector per trial (alternating
/// unstructured vectors and repeated block patterns). Every working-domain
/// hard-decision snapshot must differ from the standard one by exactly `v`.
pub fn check_equivalence(
    code: &QcParityMatrix,
    bers: &[f64],
    trials_per_ber: u64,
    seed: u64,
) -> Result<EquivalenceReport> {
    let ns = NullSpace::of(code)?;
    let cfg = DecoderConfig {
        trace: true,
        ..DecoderConfig::default()
    };
    let mut report = EquivalenceReport::default();
    for (bi, &ber) in bers.iter().enumerate() {
        let channel = BscChannel::new(ber)?;
        for trial in 0..trials_per_ber {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ bi as u64));
            rng.set_stream(trial);
            let v = if trial % 2 == 0 {
                BitVec::random(code.n(), &mut rng)
            } else {
                let pattern = BitVec::random(code.q(), &mut rng);
                BitVec::repeat_pattern(&pattern, code.n())
            };
            let c = ns.sample(&mut rng);
            let (_, llrs) = transmit(&c, &channel, &mut rng);
            let mut ra = ChaCha8Rng::seed_from_u64(0);
            let mut rb = ChaCha8Rng::seed_from_u64(0);
            let plain = decode_minsum(&llrs, code, &cfg, &mut ra)?;
            let offset = decode_modified(&llrs, code, &v, &cfg, &mut rb)?;
            report.trials += 1;
            if plain.bits != offset.bits || plain.converged != offset.converged {
                report.output_mismatches += 1;
            }
            if plain.iterations != offset.iterations {
                report.iteration_mismatches += 1;
            }
            let pt = plain.decision_trace.as_ref().unwrap();
            let ot = offset.decision_trace.as_ref().unwrap();
            if pt.len() != ot.len()
                || pt.iter().zip(ot.iter()).any(|(zp, zo)| zo.xor(&v) != *zp)
            {
                report.trace_mismatches += 1;
            }
        }
    }
    Ok(report)
}

/// Parses `key = value` configuration text: one pair per line, `#` comments,
/// blank lines ignored.
pub fn parse_kv_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidParameter(format!(
                "config line {}: expected 'key = value', got '{raw}'",
                lineno + 1
            )));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Resolves a `--v` argument: `zero`, `seed:<u64>` (random vector),
/// `pattern:<hex>` (a q-bit pattern repeated across the block columns), or
/// a full-length hex vector.
pub fn parse_v_spec(spec: &str, code: &QcParityMatrix) -> Result<BitVec> {
    if spec == "zero" {
        return Ok(BitVec::zeros(code.n()));
    }
    if let Some(seed) = spec.strip_prefix("seed:") {
        let seed: u64 = seed
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad seed in v spec '{spec}'")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5ec7));
        return Ok(BitVec::random(code.n(), &mut rng));
    }
    if let Some(hex) = spec.strip_prefix("pattern:") {
        let pattern = BitVec::from_hex(code.q(), hex)?;
        return Ok(BitVec::repeat_pattern(&pattern, code.n()));
    }
    BitVec::from_hex(code.n(), spec)
}
