//! Scaled min-sum decoding with a pluggable stop condition.
//!
//! Two entry points are provided. [`decode_minsum`] is the standard
//! algorithm: messages start from the channel LLRs and the plain stop test
//! compares the syndrome against zero. [`decode_modified`] carries a secret
//! offset vector `v` through the whole decode: input signs are flipped where
//! `v` is set, check nodes fold the per-row parity of `v` into their sign
//! products, the stop test compares against `p = v H^T`, and the output is
//! de-offset at the end. The two functions are deliberately independent
//! implementations; their iteration-by-iteration agreement (modulo the `v`
//! offset) is asserted by tests rather than shared code.
//!
//! Conventions fixed here because the algebra does not fix them:
//! a hard decision is 1 iff the posterior is strictly positive; the sign of
//! a message is +1 for values >= 0; ties for the smallest check-node input
//! go to the lowest position. The pre-loop convergence check counts as
//! iteration 0, and frames that never converge report `i_max` iterations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::locking::StopCondition;
use crate::qc::QcParityMatrix;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum FaultMode {
    #[default]
    None,
    /// Negate the sign product of one random check node per iteration.
    FlipSignProduct,
    /// Replace min1 of one random check node per iteration with its
    /// reflection off the largest message magnitude seen that iteration
    /// (clamped at zero). This stands in for flipping the top bit of a
    /// fixed-point min1; floating-point messages have no such bit.
    FlipMin1Msb,
}

#[derive(Clone, Debug)]
pub struct DecoderConfig {
    /// Check-to-variable scaling factor, in (0, 1).
    pub alpha: f64,
    /// Maximum number of decoding iterations.
    pub i_max: usize,
    pub stop: StopCondition,
    pub fault: FaultMode,
    /// Record per-iteration hard decisions and syndromes.
    pub trace: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            alpha: 0.75,
            i_max: 15,
            stop: StopCondition::Plain,
            fault: FaultMode::None,
            trace: false,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self, code: &QcParityMatrix) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.i_max < 1 {
            return Err(Error::InvalidParameter("i_max must be at least 1".into()));
        }
        if let Some(h) = self.stop.h() {
            if h != code.h() {
                return Err(Error::LengthMismatch {
                    what: "stop-condition syndrome",
                    expected: code.h(),
                    actual: h,
                });
            }
        }
        for m in 0..code.h() {
            if code.row_cols(m).len() < 2 {
                return Err(Error::InvalidParameter(format!(
                    "check node {m} has fewer than 2 neighbors"
                )));
            }
        }
        Ok(())
    }
}

/// Result of one check node's minimum search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckNodeSummary {
    /// Smallest input magnitude.
    pub min1: f64,
    /// Second-smallest input magnitude (ties with min1 allowed).
    pub min2: f64,
    /// Position of min1 among the inputs; ties break to the lowest index.
    pub idx: usize,
    /// Product of input signs, +1.0 or -1.0, with sign(x) = +1 for x >= 0.
    pub sign: f64,
}

/// Scans one check node's incoming messages.
pub fn check_node_process(u_values: &[f64]) -> Result<CheckNodeSummary> {
    if u_values.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "check node processing needs at least 2 inputs, got {}",
            u_values.len()
        )));
    }
    let mut min1 = f64::INFINITY;
    let mut min2 = f64::INFINITY;
    let mut idx = 0usize;
    let mut sign = 1.0f64;
    for (i, &u) in u_values.iter().enumerate() {
        let mag = u.abs();
        if mag < min1 {
            min2 = min1;
            min1 = mag;
            idx = i;
        } else if mag < min2 {
            min2 = mag;
        }
        if u < 0.0 {
            sign = -sign;
        }
    }
    Ok(CheckNodeSummary { min1, min2, idx, sign })
}

/// Check-to-variable messages for one node: magnitude `alpha * min1`
/// everywhere except `alpha * min2` at the min1 position, sign
/// `(-1)^parity_flip * s * sign(u)`. `parity_flip = false` is the standard
/// rule; the offset variant raises it on rows where `v` has odd parity.
pub fn c2v_messages(
    summary: &CheckNodeSummary,
    u_values: &[f64],
    alpha: f64,
    parity_flip: bool,
) -> Vec<f64> {
    let mut out = vec![0.0; u_values.len()];
    c2v_into(summary, u_values, alpha, parity_flip, &mut out);
    out
}

#[inline]
fn c2v_into(
    summary: &CheckNodeSummary,
    u_values: &[f64],
    alpha: f64,
    parity_flip: bool,
    out: &mut [f64],
) {
    let base = if parity_flip { -summary.sign } else { summary.sign };
    let m1 = alpha * summary.min1;
    let m2 = alpha * summary.min2;
    for (i, &u) in u_values.iter().enumerate() {
        let mag = if i == summary.idx { m2 } else { m1 };
        let s = if u < 0.0 { -base } else { base };
        out[i] = s * mag;
    }
}

#[derive(Clone, Debug)]
pub struct DecodeResult {
    /// Hard-decision output. For the offset variant this is already
    /// de-offset (`z' XOR v`).
    pub bits: BitVec,
    /// 0 means the pre-loop check fired; unconverged frames report `i_max`.
    pub iterations: usize,
    /// Whether the stop condition fired.
    pub converged: bool,
    /// Working-domain syndrome at each stop check (pre-loop first), when
    /// tracing is on.
    pub syndrome_trace: Option<Vec<BitVec>>,
    /// Working-domain hard decisions at each stop check, when tracing is on.
    /// For the offset variant these are the raw pre-de-offset decisions.
    pub decision_trace: Option<Vec<BitVec>>,
}

struct Workspace {
    /// Variable-to-check messages, edge-indexed (row-major).
    u: Vec<f64>,
    /// Check-to-variable messages, edge-indexed.
    v: Vec<f64>,
}

impl Workspace {
    fn new(code: &QcParityMatrix) -> Self {
        Workspace {
            u: vec![0.0; code.edge_count()],
            v: vec![0.0; code.edge_count()],
        }
    }
}

fn hard_decisions_from_llrs(llrs: &[f64]) -> BitVec {
    let mut z = BitVec::zeros(llrs.len());
    for (i, &g) in llrs.iter().enumerate() {
        if g > 0.0 {
            z.set(i, true);
        }
    }
    z
}

/// Standard scaled min-sum decoding.
pub fn decode_minsum<R: Rng + ?Sized>(
    llrs: &[f64],
    code: &QcParityMatrix,
    cfg: &DecoderConfig,
    rng: &mut R,
) -> Result<DecodeResult> {
    if llrs.len() != code.n() {
        return Err(Error::LengthMismatch {
            what: "channel LLRs",
            expected: code.n(),
            actual: llrs.len(),
        });
    }
    cfg.validate(code)?;
    let reference = BitVec::zeros(code.h());

    let mut syndrome_trace = cfg.trace.then(Vec::new);
    let mut decision_trace = cfg.trace.then(Vec::new);

    let mut z = hard_decisions_from_llrs(llrs);
    let mut t = code.syndrome(&z)?;
    record_trace(&mut syndrome_trace, &mut decision_trace, &t, &z);
    if cfg.stop.fires(&t, &reference) {
        return Ok(DecodeResult {
            bits: z,
            iterations: 0,
            converged: true,
            syndrome_trace,
            decision_trace,
        });
    }

    let mut ws = Workspace::new(code);
    for m in 0..code.h() {
        let range = code.row_edge_range(m);
        for (e, &c) in range.zip(code.row_cols(m)) {
            ws.u[e] = llrs[c as usize];
        }
    }

    for iter in 1..=cfg.i_max {
        let fault_row = pick_fault_row(cfg.fault, code.h(), rng);
        let max_mag = fault_scale(cfg.fault, &ws.u);
        for m in 0..code.h() {
            let range = code.row_edge_range(m);
            let us = &ws.u[range.clone()];
            let mut summary = check_node_process(us)?;
            let mut flip = false;
            if fault_row == Some(m) {
                apply_fault(cfg.fault, &mut summary, &mut flip, max_mag);
            }
            c2v_into(&summary, us, cfg.alpha, flip, &mut ws.v[range]);
        }

        for n in 0..code.n() {
            let mut total = llrs[n];
            for &e in code.col_edge_ids(n) {
                total += ws.v[e as usize];
            }
            for &e in code.col_edge_ids(n) {
                ws.u[e as usize] = total - ws.v[e as usize];
            }
            z.set(n, total > 0.0);
        }

        t = code.syndrome(&z)?;
        record_trace(&mut syndrome_trace, &mut decision_trace, &t, &z);
        if cfg.stop.fires(&t, &reference) {
            return Ok(DecodeResult {
                bits: z,
                iterations: iter,
                converged: true,
                syndrome_trace,
                decision_trace,
            });
        }
    }

    Ok(DecodeResult {
        bits: z,
        iterations: cfg.i_max,
        converged: false,
        syndrome_trace,
        decision_trace,
    })
}

/// Min-sum with a secret offset vector `v` folded through the decode.
///
/// The channel magnitudes are kept and the signs flipped where `v` is set,
/// every check node multiplies its sign product by `(-1)` raised to the
/// parity of `v` on that row, and the stop test compares the working
/// syndrome against `p = v H^T`. The returned bits have `v` removed again.
pub fn decode_modified<R: Rng + ?Sized>(
    llrs: &[f64],
    code: &QcParityMatrix,
    v: &BitVec,
    cfg: &DecoderConfig,
    rng: &mut R,
) -> Result<DecodeResult> {
    if llrs.len() != code.n() {
        return Err(Error::LengthMismatch {
            what: "channel LLRs",
            expected: code.n(),
            actual: llrs.len(),
        });
    }
    if v.len() != code.n() {
        return Err(Error::LengthMismatch {
            what: "offset vector",
            expected: code.n(),
            actual: v.len(),
        });
    }
    cfg.validate(code)?;
    let p = code.syndrome(v)?;

    let offset_llrs: Vec<f64> = (0..code.n())
        .map(|n| if v.get(n) { -llrs[n] } else { llrs[n] })
        .collect();

    let mut syndrome_trace = cfg.trace.then(Vec::new);
    let mut decision_trace = cfg.trace.then(Vec::new);

    let mut z = hard_decisions_from_llrs(&offset_llrs);
    let mut t = code.syndrome(&z)?;
    record_trace(&mut syndrome_trace, &mut decision_trace, &t, &z);
    if cfg.stop.fires(&t, &p) {
        return Ok(DecodeResult {
            bits: z.xor(v),
            iterations: 0,
            converged: true,
            syndrome_trace,
            decision_trace,
        });
    }

    let mut ws = Workspace::new(code);
    for m in 0..code.h() {
        let range = code.row_edge_range(m);
        for (e, &c) in range.zip(code.row_cols(m)) {
            ws.u[e] = offset_llrs[c as usize];
        }
    }

    for iter in 1..=cfg.i_max {
        let fault_row = pick_fault_row(cfg.fault, code.h(), rng);
        let max_mag = fault_scale(cfg.fault, &ws.u);
        for m in 0..code.h() {
            let range = code.row_edge_range(m);
            let us = &ws.u[range.clone()];
            let mut summary = check_node_process(us)?;
            let mut flip = p.get(m);
            if fault_row == Some(m) {
                apply_fault(cfg.fault, &mut summary, &mut flip, max_mag);
            }
            c2v_into(&summary, us, cfg.alpha, flip, &mut ws.v[range]);
        }

        for n in 0..code.n() {
            let mut total = offset_llrs[n];
            for &e in code.col_edge_ids(n) {
                total += ws.v[e as usize];
            }
            for &e in code.col_edge_ids(n) {
                ws.u[e as usize] = total - ws.v[e as usize];
            }
            z.set(n, total > 0.0);
        }

        t = code.syndrome(&z)?;
        record_trace(&mut syndrome_trace, &mut decision_trace, &t, &z);
        if cfg.stop.fires(&t, &p) {
            return Ok(DecodeResult {
                bits: z.xor(v),
                iterations: iter,
                converged: true,
                syndrome_trace,
                decision_trace,
            });
        }
    }

    Ok(DecodeResult {
        bits: z.xor(v),
        iterations: cfg.i_max,
        converged: false,
        syndrome_trace,
        decision_trace,
    })
}

fn record_trace(
    syndromes: &mut Option<Vec<BitVec>>,
    decisions: &mut Option<Vec<BitVec>>,
    t: &BitVec,
    z: &BitVec,
) {
    if let Some(s) = syndromes {
        s.push(t.clone());
    }
    if let Some(d) = decisions {
        d.push(z.clone());
    }
}

fn pick_fault_row<R: Rng + ?Sized>(fault: FaultMode, h: usize, rng: &mut R) -> Option<usize> {
    match fault {
        FaultMode::None => None,
        _ => Some(rng.random_range(0..h)),
    }
}

fn fault_scale(fault: FaultMode, u: &[f64]) -> f64 {
    if fault == FaultMode::FlipMin1Msb {
        u.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    } else {
        0.0
    }
}

fn apply_fault(fault: FaultMode, summary: &mut CheckNodeSummary, flip: &mut bool, max_mag: f64) {
    match fault {
        FaultMode::None => {}
        FaultMode::FlipSignProduct => *flip = !*flip,
        FaultMode::FlipMin1Msb => summary.min1 = (max_mag - summary.min1).max(0.0),
    }
}
