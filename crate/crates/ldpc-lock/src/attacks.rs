//! Functional models of oracle-guided key-recovery attacks on the locked
//! stop condition.
//!
//! The attacks work at the boolean level: the circuit under attack is the
//! stop test `f(t, key)` on syndrome inputs, and the oracle is the same
//! function evaluated at the installed key. No CNF encoding or external
//! solver is involved; the iteration counts follow from the key-space
//! structure alone, which is what these models are for.
//!
//! One modelling point deserves a note. An input syndrome distinguishes two
//! keys only if stopping versus not stopping changes the decoder output. At
//! the reference syndrome `v H^T` the hard-decision state is already a
//! fixed point of the update, so letting the decoder run another iteration
//! returns the same output and the difference is invisible. The search
//! therefore draws candidate inputs from the accepting syndromes of
//! surviving keys, excluding the reference syndrome. One consequence:
//! querying a wrong key's accepting syndrome always gets "did not stop"
//! from the oracle, and each such query removes every surviving key that
//! accepts it.
//!
//! Candidate inputs are visited in ascending numeric order, which makes the
//! whole loop deterministic and seed-independent for the exact attack.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::locking::{map_r_u64, Key, KeyClass, Lock, LockSpec};

/// Exhaustive key enumeration is refused beyond this many key bits.
pub const MAX_KEY_BITS: usize = 22;

#[derive(Clone, Debug)]
pub struct AttackResult {
    /// Search rounds, including the final round that finds no more
    /// distinguishing input.
    pub iterations: usize,
    /// Total oracle queries (one per search round, plus sampling queries
    /// for the approximate attack).
    pub queries: usize,
    /// Keys never excluded.
    pub surviving: usize,
    /// The surviving keys themselves, when few enough to list.
    pub survivors: Option<Vec<Key>>,
    /// Key the attack hands back (smallest survivor).
    pub returned_key: Option<Key>,
    pub returned_key_class: Option<KeyClass>,
    /// Sampling bookkeeping; present for the approximate attack only.
    pub sampling: Option<SamplingStats>,
    /// Inputs queried during sampling checkpoints, for auditing; present
    /// for the approximate attack only.
    pub queried_inputs: Option<Vec<BitVec>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SamplingStats {
    pub sampling_queries: usize,
    pub excluded_low: usize,
    pub excluded_high: usize,
    pub checkpoints: usize,
    pub final_error_estimate: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct AppSatParams {
    /// Search rounds between sampling checkpoints.
    pub check_period: usize,
    /// Random oracle queries per checkpoint.
    pub samples_per_check: usize,
    /// Error-rate estimate below which a checkpoint counts as quiet.
    pub threshold: f64,
    /// Consecutive quiet checkpoints required to stop early.
    pub max_rounds: usize,
}

impl Default for AppSatParams {
    fn default() -> Self {
        AppSatParams {
            check_period: 10,
            samples_per_check: 50,
            threshold: 0.01,
            max_rounds: 1,
        }
    }
}

/// Survivor bookkeeping for one attack run.
struct Search<'a> {
    lock: &'a Lock,
    installed: &'a Key,
    space: Space,
    /// Keys whose only accepting syndrome is the reference one; no
    /// observable input can separate them from the installed key unless the
    /// oracle accepts elsewhere.
    equivalents: Vec<u64>,
    iterations: usize,
    queries: usize,
}

enum Space {
    Scheme1 {
        h_k: usize,
        /// Surviving wrong keys, ascending; order equals accepting-syndrome
        /// order because the syndrome is the key spliced onto a fixed tail.
        wrong: BTreeSet<u64>,
    },
    Scheme2 {
        g: usize,
        l_r: usize,
        /// Surviving keys whose `ka` fold matches `kb` (single accepting
        /// syndrome each), stored by `ka` value.
        points: BTreeSet<u64>,
        /// Surviving fold classes: `kb` value -> member count. Every member
        /// accepts the whole fold preimage of `kb`.
        classes: std::collections::BTreeMap<u64, u64>,
        /// Candidate order for the classes: smallest observable syndrome.
        class_min: std::collections::BTreeMap<BitVec, u64>,
    },
}

impl<'a> Search<'a> {
    fn build(lock: &'a Lock, installed: &'a Key) -> Result<Self> {
        let bits = lock.key_len();
        if bits > MAX_KEY_BITS {
            return Err(Error::KeySpaceTooLarge {
                bits,
                max: MAX_KEY_BITS,
            });
        }
        if installed.len() != bits {
            return Err(Error::LengthMismatch {
                what: "installed key",
                expected: bits,
                actual: installed.len(),
            });
        }
        let correct = lock.correct_key().bits().to_u64();
        let mut equivalents = Vec::new();
        let space = match lock.spec() {
            LockSpec::Scheme1 { h_k } => {
                let mut wrong = BTreeSet::new();
                for k in 0..(1u64 << h_k) {
                    if k == correct {
                        equivalents.push(k);
                    } else {
                        wrong.insert(k);
                    }
                }
                Space::Scheme1 { h_k, wrong }
            }
            LockSpec::Scheme2 { g, l_r } => {
                let mut points = BTreeSet::new();
                let mut classes = std::collections::BTreeMap::new();
                let mut class_min = std::collections::BTreeMap::new();
                let ka_space = 1u64 << (g * l_r);
                // The group-parity fold is balanced, so each kb has exactly
                // ka_space >> l_r matching ka values; the rest are the
                // fold-class members.
                let members = ka_space - (ka_space >> l_r);
                for kb in 0..(1u64 << l_r) {
                    if members == 0 {
                        continue;
                    }
                    if let Some(min_t) = class_min_syndrome(lock, g, l_r, kb) {
                        classes.insert(kb, members);
                        class_min.insert(min_t, kb);
                    } else {
                        // Accepting set collapses onto the reference
                        // syndrome; no observable input separates these
                        // keys from the correct one.
                        for ka in 0..ka_space {
                            if fold_of(ka, g, l_r) != kb {
                                equivalents.push(kb | (ka << l_r));
                            }
                        }
                    }
                }
                // Keys whose ka fold matches kb accept one syndrome each.
                let correct_ka = correct >> l_r;
                for ka in 0..ka_space {
                    if ka == correct_ka {
                        equivalents.push(correct);
                    } else {
                        points.insert(ka);
                    }
                }
                Space::Scheme2 {
                    g,
                    l_r,
                    points,
                    classes,
                    class_min,
                }
            }
        };
        Ok(Search {
            lock,
            installed,
            space,
            equivalents,
            iterations: 0,
            queries: 0,
        })
    }

    fn surviving(&self) -> u64 {
        let base = self.equivalents.len() as u64;
        match &self.space {
            Space::Scheme1 { wrong, .. } => base + wrong.len() as u64,
            Space::Scheme2 {
                points, classes, ..
            } => base + points.len() as u64 + classes.values().sum::<u64>(),
        }
    }

    /// Up to `limit` smallest observable candidate syndromes.
    fn candidates(&self, limit: usize) -> Vec<BitVec> {
        match &self.space {
            Space::Scheme1 { h_k, wrong } => wrong
                .iter()
                .take(limit)
                .map(|&k| splice_prefix(self.lock.vht(), k, *h_k))
                .collect(),
            Space::Scheme2 {
                g,
                l_r,
                points,
                class_min,
                ..
            } => {
                let mut point_iter = points
                    .iter()
                    .map(|&ka| splice_prefix(self.lock.vht(), ka, g * l_r))
                    .peekable();
                let mut class_iter = class_min.keys().cloned().peekable();
                let mut out = Vec::with_capacity(limit);
                while out.len() < limit {
                    match (point_iter.peek(), class_iter.peek()) {
                        (Some(p), Some(c)) => {
                            if p <= c {
                                out.push(point_iter.next().unwrap());
                            } else {
                                out.push(class_iter.next().unwrap());
                            }
                        }
                        (Some(_), None) => out.push(point_iter.next().unwrap()),
                        (None, Some(_)) => out.push(class_iter.next().unwrap()),
                        (None, None) => break,
                    }
                }
                out
            }
        }
    }

    /// Removes every surviving key that accepts `t`. Returns
    /// (low-corruptibility removals, high-corruptibility removals).
    fn eliminate_accepting(&mut self, t: &BitVec) -> (u64, u64) {
        let vht = self.lock.vht();
        match &mut self.space {
            Space::Scheme1 { h_k, wrong } => {
                let tail = t.range_eq(*h_k, vht, *h_k, vht.len() - *h_k);
                if tail {
                    let k = t.extract_u64(0, *h_k);
                    if wrong.remove(&k) {
                        return (1, 0);
                    }
                }
                (0, 0)
            }
            Space::Scheme2 {
                g,
                l_r,
                points,
                classes,
                class_min,
            } => {
                let mut low = 0;
                let mut high = 0;
                let prefix_len = *g * *l_r;
                if t.range_eq(prefix_len, vht, prefix_len, vht.len() - prefix_len) {
                    let ka = t.extract_u64(0, prefix_len);
                    if points.remove(&ka) {
                        low += 1;
                    }
                }
                let rho = fold_bitvec(t, *g, *l_r);
                if let Some(members) = classes.remove(&rho) {
                    high += members;
                    if let Some(min_t) = class_min_syndrome(self.lock, *g, *l_r, rho) {
                        class_min.remove(&min_t);
                    }
                }
                (low, high)
            }
        }
    }

    /// Keeps only keys that accept `t` (the oracle stopped there).
    fn retain_accepting(&mut self, t: &BitVec) -> (u64, u64) {
        let vht = self.lock.vht();
        let mut low = 0;
        let mut high = 0;
        // Keys accepting only the reference syndrome disagree everywhere
        // else.
        if t != vht {
            low += self.equivalents.len() as u64;
            self.equivalents.clear();
        }
        match &mut self.space {
            Space::Scheme1 { h_k, wrong } => {
                let keep = t
                    .range_eq(*h_k, vht, *h_k, vht.len() - *h_k)
                    .then(|| t.extract_u64(0, *h_k));
                low += wrong.len() as u64;
                let kept = keep.filter(|k| wrong.contains(k));
                wrong.clear();
                if let Some(k) = kept {
                    wrong.insert(k);
                    low -= 1;
                }
            }
            Space::Scheme2 {
                g,
                l_r,
                points,
                classes,
                class_min,
            } => {
                let prefix_len = *g * *l_r;
                let keep_point = t
                    .range_eq(prefix_len, vht, prefix_len, vht.len() - prefix_len)
                    .then(|| t.extract_u64(0, prefix_len));
                low += points.len() as u64;
                let kept = keep_point.filter(|ka| points.contains(ka));
                points.clear();
                if let Some(ka) = kept {
                    points.insert(ka);
                    low -= 1;
                }
                let rho = fold_bitvec(t, *g, *l_r);
                let kept_class = classes.get(&rho).copied();
                high += classes.values().sum::<u64>();
                classes.clear();
                class_min.clear();
                if let Some(members) = kept_class {
                    classes.insert(rho, members);
                    high -= members;
                    if let Some(min_t) = class_min_syndrome(self.lock, *g, *l_r, rho) {
                        class_min.insert(min_t, rho);
                    }
                }
            }
        }
        (low, high)
    }

    /// One search round: pick up to `unroll` candidate inputs, query the
    /// oracle once, exclude disagreeing keys. Returns false when no
    /// distinguishing input remains.
    fn round(&mut self, unroll: usize) -> Result<bool> {
        self.iterations += 1;
        let trace = self.candidates(unroll);
        if trace.is_empty() {
            return Ok(false);
        }
        self.queries += 1;
        // The oracle reports where along the trace the decoder stopped;
        // keys are kept consistent with that observation per input.
        for t in &trace {
            if self.lock.accepts(t, self.installed)? {
                self.retain_accepting(t);
            } else {
                self.eliminate_accepting(t);
            }
        }
        Ok(true)
    }

    fn smallest_survivor(&self) -> Option<u64> {
        let mut best: Option<u64> = None;
        let mut consider = |k: u64| match best {
            Some(b) if b <= k => {}
            _ => best = Some(k),
        };
        for &k in &self.equivalents {
            consider(k);
        }
        match &self.space {
            Space::Scheme1 { wrong, .. } => {
                if let Some(&k) = wrong.first() {
                    consider(k);
                }
            }
            Space::Scheme2 {
                g,
                l_r,
                points,
                classes,
                ..
            } => {
                // Point key value is kb || ka with kb = fold(ka); ka
                // occupies the high bits, so the smallest point key is the
                // one with the smallest ka.
                if let Some(&ka) = points.first() {
                    consider(fold_of(ka, *g, *l_r) | (ka << l_r));
                }
                // Smallest member of class kb: ka = 0 folds to 0, so it is
                // a member whenever kb != 0 (value kb); for kb = 0 the
                // smallest non-matching ka is 1 (value 1 << l_r).
                for (&kb, _) in classes {
                    consider(if kb != 0 { kb } else { 1u64 << l_r });
                }
            }
        }
        best
    }

    fn survivor_list(&self) -> Option<Vec<u64>> {
        const LIST_CAP: u64 = 4096;
        if self.surviving() > LIST_CAP {
            return None;
        }
        let mut out: Vec<u64> = self.equivalents.clone();
        match &self.space {
            Space::Scheme1 { wrong, .. } => out.extend(wrong.iter().copied()),
            Space::Scheme2 {
                g,
                l_r,
                points,
                classes,
                ..
            } => {
                out.extend(points.iter().map(|&ka| fold_of(ka, *g, *l_r) | (ka << l_r)));
                for (&kb, _) in classes {
                    for ka in 0..(1u64 << (g * l_r)) {
                        if fold_of(ka, *g, *l_r) != kb {
                            out.push(kb | (ka << l_r));
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        Some(out)
    }

    fn key_from_value(&self, value: u64) -> Key {
        Key::new(BitVec::from_u64(self.lock.key_len(), value))
    }
}

fn fold_of(ka: u64, g: usize, l_r: usize) -> u64 {
    map_r_u64(ka, g as u32, l_r as u32)
}

/// Reference-syndrome copy with the low `len` bits replaced by `value`.
fn splice_prefix(vht: &BitVec, value: u64, len: usize) -> BitVec {
    let mut t = vht.clone();
    t.copy_range_from(0, &BitVec::from_u64(len.max(1), value), 0, len);
    t
}

fn fold_bitvec(t: &BitVec, g: usize, l_r: usize) -> u64 {
    let mut r = 0u64;
    for i in 0..l_r {
        let mut acc = false;
        for j in 0..g {
            acc ^= t.get(i * g + j);
        }
        r |= (acc as u64) << i;
    }
    r
}

/// Smallest syndrome in the fold preimage of `kb` other than the reference
/// syndrome, or None when the preimage is exactly the reference syndrome.
fn class_min_syndrome(lock: &Lock, g: usize, l_r: usize, kb: u64) -> Option<BitVec> {
    let h = lock.h();
    let mut base = BitVec::zeros(h);
    for i in 0..l_r {
        if (kb >> i) & 1 == 1 {
            base.set(i * g, true);
        }
    }
    if base != *lock.vht() {
        return Some(base);
    }
    if h > g * l_r {
        let mut alt = base;
        alt.set(g * l_r, true);
        return Some(alt);
    }
    if g >= 2 {
        let mut alt = base;
        if kb == 0 {
            alt.set(0, true);
            alt.set(1, true);
        } else {
            let i = (0..l_r).find(|i| (kb >> i) & 1 == 1).unwrap();
            alt.set(i * g, false);
            alt.set(i * g + 1, true);
        }
        return Some(alt);
    }
    None
}

fn finish(search: Search<'_>, sampling: Option<SamplingStats>, queried: Option<Vec<BitVec>>) -> AttackResult {
    let returned = search.smallest_survivor().map(|v| search.key_from_value(v));
    let class = returned
        .as_ref()
        .map(|k| search.lock.classify(k).expect("key length fixed"));
    AttackResult {
        iterations: search.iterations,
        queries: search.queries,
        surviving: search.surviving() as usize,
        survivors: search
            .survivor_list()
            .map(|vs| vs.into_iter().map(|v| search.key_from_value(v)).collect()),
        returned_key: returned,
        returned_key_class: class,
        sampling,
        queried_inputs: queried,
    }
}

/// Exact key-recovery loop against the locked stop test. `unroll_imax`
/// models how many stop checks one oracle query can expose; with 1, every
/// query resolves a single accepting syndrome.
pub fn sat_attack_sim(lock: &Lock, installed_key: &Key, unroll_imax: usize) -> Result<AttackResult> {
    if unroll_imax < 1 {
        return Err(Error::InvalidParameter("unroll_imax must be at least 1".into()));
    }
    let mut search = Search::build(lock, installed_key)?;
    while search.round(unroll_imax)? {}
    Ok(finish(search, None, None))
}

/// Approximate attack: the exact loop interleaved with random-sampling
/// checkpoints that estimate the error rate of a candidate survivor and
/// exclude keys contradicted by the sampled oracle answers. Stops early
/// after `max_rounds` consecutive quiet checkpoints and returns the
/// smallest surviving key.
pub fn appsat_sim<R: Rng + ?Sized>(
    lock: &Lock,
    installed_key: &Key,
    params: &AppSatParams,
    rng: &mut R,
) -> Result<AttackResult> {
    if params.check_period < 1 || params.samples_per_check < 1 || params.max_rounds < 1 {
        return Err(Error::InvalidParameter(
            "check_period, samples_per_check and max_rounds must be at least 1".into(),
        ));
    }
    let mut search = Search::build(lock, installed_key)?;
    let mut stats = SamplingStats::default();
    let mut queried = Vec::new();
    let mut quiet = 0usize;
    loop {
        let mut exhausted = false;
        for _ in 0..params.check_period {
            if !search.round(1)? {
                exhausted = true;
                break;
            }
        }
        if exhausted {
            return Ok(finish(search, Some(stats), Some(queried)));
        }

        stats.checkpoints += 1;
        let candidate = search
            .smallest_survivor()
            .map(|v| search.key_from_value(v))
            .expect("candidates remain while the search is not exhausted");
        let mut wrong = 0usize;
        for _ in 0..params.samples_per_check {
            let t = BitVec::random(lock.h(), rng);
            let oracle = lock.accepts(&t, installed_key)?;
            search.queries += 1;
            stats.sampling_queries += 1;
            if lock.accepts(&t, &candidate)? != oracle {
                wrong += 1;
            }
            let (low, high) = if oracle {
                search.retain_accepting(&t)
            } else {
                search.eliminate_accepting(&t)
            };
            stats.excluded_low += low as usize;
            stats.excluded_high += high as usize;
            queried.push(t);
        }
        let estimate = wrong as f64 / params.samples_per_check as f64;
        stats.final_error_estimate = estimate;
        if estimate < params.threshold {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= params.max_rounds {
            return Ok(finish(search, Some(stats), Some(queried)));
        }
    }
}
