//! Key-controlled stop-condition functions and their analysis.
//!
//! The decoder normally stops when the syndrome is all-zero. The locked
//! variants replace that test with a boolean function of the syndrome `t`
//! and a key:
//!
//! * scheme 1 compares the first `h_k` bits of `t` against the key and the
//!   remaining bits against the designer's reference syndrome `vht`;
//! * scheme 2 first folds `t` down to `l_r` bits by XORing groups of `g`
//!   bits, compares the fold against the `kb` part of the key, and gates a
//!   scheme-1-style test of `ka` on top.
//!
//! With the derived correct key both accept exactly one syndrome, `vht`.
//! Wrong keys split into two classes: those whose accepting set is a single
//! syndrome (low corruptibility) and, under scheme 2, those accepting a
//! whole fold-preimage of 2^(h - l_r) syndromes (high corruptibility). The
//! census routines measure those sets by brute force at toy sizes.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gf2::BitVec;
use crate::qc::QcParityMatrix;
use crate::stats::clopper_pearson;

/// Exhaustive censuses walk all 2^h syndromes; refuse beyond this.
pub const MAX_CENSUS_H: usize = 24;

/// Key material for a locked stop condition. For scheme 2 the bits are the
/// concatenation `kb || ka` with `kb` first.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Key(BitVec);

impl Key {
    pub fn new(bits: BitVec) -> Self {
        Key(bits)
    }

    /// Builds a scheme-2 key from its parts.
    pub fn scheme2(kb: &BitVec, ka: &BitVec) -> Self {
        let mut bits = BitVec::zeros(kb.len() + ka.len());
        bits.copy_range_from(0, kb, 0, kb.len());
        bits.copy_range_from(kb.len(), ka, 0, ka.len());
        Key(bits)
    }

    pub fn bits(&self) -> &BitVec {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Splits a scheme-2 key into `(kb, ka)` given the fold length.
    pub fn split_scheme2(&self, l_r: usize) -> (BitVec, BitVec) {
        let kb = self.0.slice(0, l_r);
        let ka = self.0.slice(l_r, self.0.len() - l_r);
        (kb, ka)
    }

    pub fn to_hex(&self) -> String {
        self.0.to_hex()
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        Ok(Key(BitVec::from_hex(len, hex)?))
    }
}

/// Plain stop test: 1 iff `t` is all-zero.
pub fn f_plain(t: &BitVec) -> bool {
    t.is_zero()
}

/// Scheme-1 stop test: 1 iff the first `k.len()` bits of `t` equal the key
/// and every later bit matches `vht`. With a key as long as `t` this
/// degenerates to a full equality test against the key.
pub fn f2(t: &BitVec, k: &BitVec, vht: &BitVec) -> Result<bool> {
    let h = vht.len();
    if t.len() != h {
        return Err(Error::LengthMismatch {
            what: "syndrome",
            expected: h,
            actual: t.len(),
        });
    }
    let h_k = k.len();
    if h_k > h {
        return Err(Error::LengthMismatch {
            what: "scheme-1 key",
            expected: h,
            actual: h_k,
        });
    }
    Ok(t.range_eq(0, k, 0, h_k) && t.range_eq(h_k, vht, h_k, h - h_k))
}

/// XOR parity of `len` bits of `v` starting at `start`.
fn parity_range(v: &BitVec, start: usize, len: usize) -> bool {
    let mut acc = 0u32;
    let mut off = 0;
    while off < len {
        let chunk = (len - off).min(64);
        acc ^= v.extract_u64(start + off, chunk).count_ones() & 1;
        off += chunk;
    }
    acc == 1
}

/// Folds the first `g * l_r` bits of `t` into `l_r` bits: bit `i` of the
/// result is the XOR of `t[i*g .. i*g + g)`. Bits of `t` beyond `g * l_r`
/// are ignored.
pub fn map_r(t: &BitVec, g: usize, l_r: usize) -> Result<BitVec> {
    if g < 1 || l_r < 1 {
        return Err(Error::InvalidParameter("fold parameters must be at least 1".into()));
    }
    if g * l_r > t.len() {
        return Err(Error::LengthMismatch {
            what: "fold input",
            expected: g * l_r,
            actual: t.len(),
        });
    }
    let mut r = BitVec::zeros(l_r);
    for i in 0..l_r {
        if parity_range(t, i * g, g) {
            r.set(i, true);
        }
    }
    Ok(r)
}

/// Fold-equality test: 1 iff `r == kb`.
pub fn f3(r: &BitVec, kb: &BitVec) -> bool {
    assert_eq!(r.len(), kb.len(), "fold and kb must have equal length");
    r == kb
}

/// Disagreement test between the fold of the syndrome and the fold of `ka`:
/// 1 iff `r` differs from the group-parity fold of `ka` in some position.
pub fn f_h(r: &BitVec, ka: &BitVec, g: usize) -> Result<bool> {
    let l_r = r.len();
    if ka.len() != g * l_r {
        return Err(Error::LengthMismatch {
            what: "ka",
            expected: g * l_r,
            actual: ka.len(),
        });
    }
    let folded = map_r(ka, g, l_r)?;
    Ok(*r != folded)
}

/// Scheme-2 stop test on the full key `kb || ka`.
pub fn f4(t: &BitVec, key: &Key, g: usize, l_r: usize, vht: &BitVec) -> Result<bool> {
    if key.len() != l_r + g * l_r {
        return Err(Error::LengthMismatch {
            what: "scheme-2 key",
            expected: l_r + g * l_r,
            actual: key.len(),
        });
    }
    let (kb, ka) = key.split_scheme2(l_r);
    let r = map_r(t, g, l_r)?;
    Ok(f3(&r, &kb) && (f2(t, &ka, vht)? || f_h(&r, &ka, g)?))
}

/// Which locking function guards the stop condition.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LockSpec {
    /// Key of `h_k` bits compared directly against the syndrome prefix.
    Scheme1 { h_k: usize },
    /// Fold of width `g` down to `l_r` bits; key is `kb || ka`.
    Scheme2 { g: usize, l_r: usize },
}

/// A concrete locked stop condition: the scheme parameters plus the
/// designer's reference syndrome `vht = v H^T`.
#[derive(Clone, Debug)]
pub struct Lock {
    spec: LockSpec,
    vht: BitVec,
}

impl Lock {
    pub fn new(spec: LockSpec, vht: BitVec) -> Result<Self> {
        let h = vht.len();
        match spec {
            LockSpec::Scheme1 { h_k } => {
                if h_k < 1 || h_k > h {
                    return Err(Error::InvalidParameter(format!(
                        "scheme-1 key length must be in 1..={h}, got {h_k}"
                    )));
                }
            }
            LockSpec::Scheme2 { g, l_r } => {
                if g < 1 || l_r < 1 || g * l_r > h {
                    return Err(Error::InvalidParameter(format!(
                        "scheme-2 needs g, l_r >= 1 and g*l_r <= {h}, got g={g}, l_r={l_r}"
                    )));
                }
            }
        }
        Ok(Lock { spec, vht })
    }

    /// Builds the lock for a secret offset vector `v` on a given code:
    /// `vht = v H^T`.
    pub fn for_secret(spec: LockSpec, v: &BitVec, code: &QcParityMatrix) -> Result<Self> {
        Lock::new(spec, code.syndrome(v)?)
    }

    pub fn spec(&self) -> LockSpec {
        self.spec
    }

    pub fn vht(&self) -> &BitVec {
        &self.vht
    }

    /// Syndrome length.
    pub fn h(&self) -> usize {
        self.vht.len()
    }

    pub fn key_len(&self) -> usize {
        match self.spec {
            LockSpec::Scheme1 { h_k } => h_k,
            LockSpec::Scheme2 { g, l_r } => l_r + g * l_r,
        }
    }

    /// Evaluates the locking function at `(t, key)`.
    pub fn accepts(&self, t: &BitVec, key: &Key) -> Result<bool> {
        match self.spec {
            LockSpec::Scheme1 { h_k } => {
                if key.len() != h_k {
                    return Err(Error::LengthMismatch {
                        what: "scheme-1 key",
                        expected: h_k,
                        actual: key.len(),
                    });
                }
                f2(t, key.bits(), &self.vht)
            }
            LockSpec::Scheme2 { g, l_r } => f4(t, key, g, l_r, &self.vht),
        }
    }

    /// The key that makes the lock accept exactly the reference syndrome.
    pub fn correct_key(&self) -> Key {
        match self.spec {
            LockSpec::Scheme1 { h_k } => Key(self.vht.slice(0, h_k)),
            LockSpec::Scheme2 { g, l_r } => {
                let ka = self.vht.slice(0, g * l_r);
                let kb = map_r(&self.vht, g, l_r).expect("fold bounds checked at construction");
                Key::scheme2(&kb, &ka)
            }
        }
    }

    /// The single syndrome accepted through the equality branch: the key
    /// prefix spliced onto the `vht` tail.
    pub(crate) fn point_syndrome(&self, key: &Key) -> BitVec {
        let mut t = self.vht.clone();
        match self.spec {
            LockSpec::Scheme1 { h_k } => t.copy_range_from(0, key.bits(), 0, h_k),
            LockSpec::Scheme2 { g, l_r } => {
                let (_, ka) = key.split_scheme2(l_r);
                t.copy_range_from(0, &ka, 0, g * l_r);
            }
        }
        t
    }

    /// Classifies a key without enumeration. Exactness of this rule is
    /// checked against the brute-force census in the tests.
    pub fn classify(&self, key: &Key) -> Result<KeyClass> {
        if key.len() != self.key_len() {
            return Err(Error::LengthMismatch {
                what: "key",
                expected: self.key_len(),
                actual: key.len(),
            });
        }
        if *key == self.correct_key() {
            return Ok(KeyClass::Correct);
        }
        match self.spec {
            LockSpec::Scheme1 { .. } => Ok(KeyClass::LowCorruptibility),
            LockSpec::Scheme2 { g, l_r } => {
                let (kb, ka) = key.split_scheme2(l_r);
                if map_r(&ka, g, l_r)? == kb {
                    Ok(KeyClass::LowCorruptibility)
                } else {
                    Ok(KeyClass::HighCorruptibility)
                }
            }
        }
    }

    /// Exhaustive stop-set census: counts every syndrome the lock accepts
    /// under `key`. Refuses when 2^h enumeration is not desk-scale.
    pub fn census(&self, key: &Key) -> Result<Census> {
        let h = self.h();
        if h > MAX_CENSUS_H {
            return Err(Error::CensusTooLarge { h, max: MAX_CENSUS_H });
        }
        let packed = PackedLock::build(self, key)?;
        let total = 1u64 << h;
        const CHUNK: u64 = 1 << 16;
        let chunks = total.div_ceil(CHUNK);
        let size: u64 = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(total);
                let mut n = 0u64;
                for t in start..end {
                    if packed.accepts(t) {
                        n += 1;
                    }
                }
                n
            })
            .sum();
        Ok(Census {
            size,
            class: self.census_class(key, size)?,
        })
    }

    /// Monte-Carlo stop-set estimate for syndromes too long to enumerate.
    pub fn census_estimate<R: Rng + ?Sized>(
        &self,
        key: &Key,
        samples: u64,
        rng: &mut R,
    ) -> Result<CensusEstimate> {
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        let mut hits = 0u64;
        for _ in 0..samples {
            let t = BitVec::random(self.h(), rng);
            if self.accepts(&t, key)? {
                hits += 1;
            }
        }
        let space = 2f64.powi(self.h() as i32);
        let (lo, hi) = clopper_pearson(hits, samples, 0.95);
        Ok(CensusEstimate {
            samples,
            hits,
            est_size: hits as f64 / samples as f64 * space,
            ci95_size: (lo * space, hi * space),
        })
    }

    fn census_class(&self, key: &Key, size: u64) -> Result<KeyClass> {
        if *key == self.correct_key() {
            Ok(KeyClass::Correct)
        } else if size == 1 {
            Ok(KeyClass::LowCorruptibility)
        } else {
            Ok(KeyClass::HighCorruptibility)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KeyClass {
    Correct,
    LowCorruptibility,
    HighCorruptibility,
}

impl std::fmt::Display for KeyClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            KeyClass::Correct => "correct",
            KeyClass::LowCorruptibility => "low-corruptibility",
            KeyClass::HighCorruptibility => "high-corruptibility",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Census {
    pub size: u64,
    pub class: KeyClass,
}

#[derive(Clone, Copy, Debug)]
pub struct CensusEstimate {
    pub samples: u64,
    pub hits: u64,
    pub est_size: f64,
    pub ci95_size: (f64, f64),
}

/// Word-packed evaluator for exhaustive enumeration (h <= 64). Kept
/// structurally parallel to the `BitVec` path; the two are cross-checked by
/// property tests.
pub(crate) enum PackedLock {
    Scheme1 {
        expected: u64,
    },
    Scheme2 {
        g: u32,
        l_r: u32,
        kb: u64,
        fh_fires: bool,
        expected_point: u64,
    },
}

pub(crate) fn map_r_u64(t: u64, g: u32, l_r: u32) -> u64 {
    let mask = if g == 64 { u64::MAX } else { (1u64 << g) - 1 };
    let mut r = 0u64;
    for i in 0..l_r {
        let group = (t >> (i * g)) & mask;
        r |= ((group.count_ones() & 1) as u64) << i;
    }
    r
}

impl PackedLock {
    pub(crate) fn build(lock: &Lock, key: &Key) -> Result<Self> {
        let h = lock.h();
        if h > 64 {
            return Err(Error::CensusTooLarge { h, max: 64 });
        }
        if key.len() != lock.key_len() {
            return Err(Error::LengthMismatch {
                what: "key",
                expected: lock.key_len(),
                actual: key.len(),
            });
        }
        Ok(match lock.spec {
            LockSpec::Scheme1 { .. } => PackedLock::Scheme1 {
                expected: lock.point_syndrome(key).to_u64(),
            },
            LockSpec::Scheme2 { g, l_r } => {
                let (kb, ka) = key.split_scheme2(l_r);
                let fh_fires = map_r(&ka, g, l_r)? != kb;
                PackedLock::Scheme2 {
                    g: g as u32,
                    l_r: l_r as u32,
                    kb: kb.to_u64(),
                    fh_fires,
                    expected_point: lock.point_syndrome(key).to_u64(),
                }
            }
        })
    }

    #[inline]
    pub(crate) fn accepts(&self, t: u64) -> bool {
        match *self {
            PackedLock::Scheme1 { expected } => t == expected,
            PackedLock::Scheme2 {
                g,
                l_r,
                kb,
                fh_fires,
                expected_point,
            } => map_r_u64(t, g, l_r) == kb && (fh_fires || t == expected_point),
        }
    }
}

/// The stop-condition plugin evaluated by the decoder each iteration.
#[derive(Clone, Debug)]
pub enum StopCondition {
    /// Compare the syndrome against the decoder's reference (all-zero for
    /// the unmodified algorithm, `v H^T` for the offset variant).
    Plain,
    Locked(LockedStop),
}

#[derive(Clone, Debug)]
pub struct LockedStop {
    lock: Lock,
    key: Key,
    accept: AcceptSet,
}

/// Precomputed acceptance structure; equivalent to evaluating the locking
/// function directly, but cheap inside the decoding loop.
#[derive(Clone, Debug)]
enum AcceptSet {
    Point {
        expected: BitVec,
    },
    FoldClass {
        g: usize,
        l_r: usize,
        kb: BitVec,
        fh_fires: bool,
        expected_point: BitVec,
    },
}

impl StopCondition {
    pub fn plain() -> Self {
        StopCondition::Plain
    }

    pub fn locked(lock: Lock, key: Key) -> Result<Self> {
        if key.len() != lock.key_len() {
            return Err(Error::LengthMismatch {
                what: "key",
                expected: lock.key_len(),
                actual: key.len(),
            });
        }
        let accept = match lock.spec {
            LockSpec::Scheme1 { .. } => AcceptSet::Point {
                expected: lock.point_syndrome(&key),
            },
            LockSpec::Scheme2 { g, l_r } => {
                let (kb, ka) = key.split_scheme2(l_r);
                AcceptSet::FoldClass {
                    g,
                    l_r,
                    kb: kb.clone(),
                    fh_fires: map_r(&ka, g, l_r)? != kb,
                    expected_point: lock.point_syndrome(&key),
                }
            }
        };
        Ok(StopCondition::Locked(LockedStop { lock, key, accept }))
    }

    /// Syndrome length this condition expects, if it carries one.
    pub fn h(&self) -> Option<usize> {
        match self {
            StopCondition::Plain => None,
            StopCondition::Locked(l) => Some(l.lock.h()),
        }
    }

    pub fn lock(&self) -> Option<&Lock> {
        match self {
            StopCondition::Plain => None,
            StopCondition::Locked(l) => Some(&l.lock),
        }
    }

    pub fn key(&self) -> Option<&Key> {
        match self {
            StopCondition::Plain => None,
            StopCondition::Locked(l) => Some(&l.key),
        }
    }

    /// Replaces the key, keeping the lock. Used by wrong-key sweeps.
    pub fn with_key(&self, key: Key) -> Result<Self> {
        match self {
            StopCondition::Plain => Err(Error::InvalidParameter(
                "the plain stop condition takes no key".into(),
            )),
            StopCondition::Locked(l) => StopCondition::locked(l.lock.clone(), key),
        }
    }

    /// Evaluates the stop test on syndrome `t`. `reference` is the syndrome
    /// the plain condition compares against.
    pub fn fires(&self, t: &BitVec, reference: &BitVec) -> bool {
        let out = match self {
            StopCondition::Plain => t == reference,
            StopCondition::Locked(l) => match &l.accept {
                AcceptSet::Point { expected } => t == expected,
                AcceptSet::FoldClass {
                    g,
                    l_r,
                    kb,
                    fh_fires,
                    expected_point,
                } => {
                    map_r(t, *g, *l_r).map(|r| r == *kb).unwrap_or(false)
                        && (*fh_fires || t == expected_point)
                }
            },
        };
        #[cfg(debug_assertions)]
        if let StopCondition::Locked(l) = self {
            debug_assert_eq!(
                out,
                l.lock.accepts(t, &l.key).unwrap(),
                "cached acceptance diverged from the locking function"
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_lock1(h: usize, h_k: usize, seed: u64) -> Lock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Lock::new(LockSpec::Scheme1 { h_k }, BitVec::random(h, &mut rng)).unwrap()
    }

    fn random_lock2(h: usize, g: usize, l_r: usize, seed: u64) -> Lock {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Lock::new(LockSpec::Scheme2 { g, l_r }, BitVec::random(h, &mut rng)).unwrap()
    }

    #[test]
    fn plain_accepts_only_zero() {
        let z = BitVec::zeros(16);
        assert!(f_plain(&z));
        let mut one = z.clone();
        one.set(5, true);
        assert!(!f_plain(&one));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let t = BitVec::random(16, &mut rng);
            assert_eq!(f_plain(&t), t.is_zero());
        }
    }

    #[test]
    fn scheme1_accepts_exactly_the_spliced_syndrome() {
        let lock = random_lock1(12, 5, 2);
        let k_star = lock.correct_key();
        assert!(lock.accepts(lock.vht(), &k_star).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let k = Key::new(BitVec::random(5, &mut rng));
            if k == k_star {
                continue;
            }
            assert!(!lock.accepts(lock.vht(), &k).unwrap());
        }
    }

    #[test]
    fn scheme1_census_every_key_accepts_one_syndrome() {
        let lock = random_lock1(12, 5, 4);
        for key in 0u64..32 {
            let key = Key::new(BitVec::from_u64(5, key));
            let census = lock.census(&key).unwrap();
            assert_eq!(census.size, 1, "key {}", key.to_hex());
            let expected = if key == lock.correct_key() {
                KeyClass::Correct
            } else {
                KeyClass::LowCorruptibility
            };
            assert_eq!(census.class, expected);
            assert_eq!(lock.classify(&key).unwrap(), expected);
        }
    }

    #[test]
    fn f2_with_full_length_key_is_equality() {
        let lock = random_lock1(10, 10, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let t = BitVec::random(10, &mut rng);
            let k = BitVec::random(10, &mut rng);
            assert_eq!(f2(&t, &k, lock.vht()).unwrap(), t == k);
        }
    }

    #[test]
    fn fold_basics() {
        let t = BitVec::zeros(12);
        assert!(map_r(&t, 2, 3).unwrap().is_zero());
        // A single set bit in group i folds to the unit vector at i.
        for i in 0..3 {
            for j in 0..2 {
                let mut t = BitVec::zeros(12);
                t.set(i * 2 + j, true);
                let r = map_r(&t, 2, 3).unwrap();
                assert_eq!(r.weight(), 1);
                assert!(r.get(i));
            }
        }
        // Bits beyond g * l_r are ignored.
        let mut t = BitVec::zeros(12);
        t.set(10, true);
        assert!(map_r(&t, 2, 3).unwrap().is_zero());
    }

    #[test]
    fn fold_matches_per_bit_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g = rng.random_range(1..9usize);
            let l_r = rng.random_range(1..7usize);
            let h = g * l_r + rng.random_range(0..5usize);
            let t = BitVec::random(h, &mut rng);
            let r = map_r(&t, g, l_r).unwrap();
            for i in 0..l_r {
                let mut acc = false;
                for j in 0..g {
                    acc ^= t.get(i * g + j);
                }
                assert_eq!(r.get(i), acc);
            }
        }
    }

    #[test]
    fn f3_and_fh_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for a in 0u64..16 {
            for b in 0u64..16 {
                let r = BitVec::from_u64(4, a);
                let kb = BitVec::from_u64(4, b);
                assert_eq!(f3(&r, &kb), a == b);
            }
        }
        for _ in 0..200 {
            let g = 3;
            let r = BitVec::random(4, &mut rng);
            let ka = BitVec::random(12, &mut rng);
            let folded = map_r(&ka, g, 4).unwrap();
            assert_eq!(f_h(&r, &ka, g).unwrap(), r != folded);
        }
    }

    #[test]
    fn scheme2_correct_key_accepts_only_vht() {
        let lock = random_lock2(14, 2, 3, 9);
        let k_star = lock.correct_key();
        assert!(lock.accepts(lock.vht(), &k_star).unwrap());
        let census = lock.census(&k_star).unwrap();
        assert_eq!(census.size, 1);
        assert_eq!(census.class, KeyClass::Correct);
    }

    #[test]
    fn scheme2_fold_mismatch_branch_fires() {
        let lock = random_lock2(14, 2, 3, 10);
        let k_star = lock.correct_key();
        let (kb_star, ka_star) = k_star.split_scheme2(3);
        // Perturb ka so its fold no longer matches kb: high corruptibility.
        let mut ka = ka_star.clone();
        ka.flip(0);
        let key = Key::scheme2(&kb_star, &ka);
        // Any syndrome whose fold equals kb is accepted.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..50 {
            let t = BitVec::random(14, &mut rng);
            if map_r(&t, 2, 3).unwrap() == kb_star {
                assert!(lock.accepts(&t, &key).unwrap());
                hits += 1;
            } else {
                assert!(!lock.accepts(&t, &key).unwrap());
            }
        }
        assert!(hits > 0);
    }

    #[test]
    fn scheme2_census_structure() {
        // Small enough to enumerate every key.
        let lock = random_lock2(14, 2, 3, 12);
        let k_star = lock.correct_key();
        let mut low = 0u64;
        let mut high = 0u64;
        for bits in 0u64..(1 << 9) {
            let key = Key::new(BitVec::from_u64(9, bits));
            let census = lock.census(&key).unwrap();
            assert_eq!(lock.classify(&key).unwrap(), census.class);
            match census.class {
                KeyClass::Correct => {
                    assert_eq!(census.size, 1);
                    assert_eq!(key, k_star);
                }
                KeyClass::LowCorruptibility => {
                    assert_eq!(census.size, 1);
                    low += 1;
                }
                KeyClass::HighCorruptibility => {
                    assert_eq!(census.size, 1 << (14 - 3));
                    high += 1;
                }
            }
        }
        assert_eq!(low, (1 << 6) - 1);
        assert_eq!(high, (1 << 6) * ((1 << 3) - 1));
    }

    #[test]
    fn high_corruptibility_stop_set_is_a_fold_preimage() {
        let lock = random_lock2(12, 2, 3, 13);
        let (kb_star, ka_star) = lock.correct_key().split_scheme2(3);
        let mut ka = ka_star.clone();
        ka.flip(1);
        let key = Key::scheme2(&kb_star, &ka);
        assert_eq!(lock.classify(&key).unwrap(), KeyClass::HighCorruptibility);
        for t in 0u64..(1 << 12) {
            let t = BitVec::from_u64(12, t);
            let in_class = map_r(&t, 2, 3).unwrap() == kb_star;
            assert_eq!(lock.accepts(&t, &key).unwrap(), in_class);
        }
    }

    #[test]
    fn census_refuses_large_h() {
        let lock = random_lock1(40, 8, 14);
        let key = Key::new(BitVec::zeros(8));
        assert!(matches!(
            lock.census(&key),
            Err(Error::CensusTooLarge { h: 40, .. })
        ));
    }

    #[test]
    fn census_estimate_brackets_exact_size() {
        let lock = random_lock2(16, 2, 4, 15);
        let (kb, ka) = lock.correct_key().split_scheme2(4);
        let mut ka = ka;
        ka.flip(2);
        let key = Key::scheme2(&kb, &ka);
        let exact = lock.census(&key).unwrap().size as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let est = lock.census_estimate(&key, 20_000, &mut rng).unwrap();
        assert!(
            est.ci95_size.0 <= exact && exact <= est.ci95_size.1,
            "exact {exact} outside [{}, {}]",
            est.ci95_size.0,
            est.ci95_size.1
        );
    }

    #[test]
    fn derive_zero_secret_gives_zero_keys() {
        let vht = BitVec::zeros(12);
        let l1 = Lock::new(LockSpec::Scheme1 { h_k: 5 }, vht.clone()).unwrap();
        assert!(l1.correct_key().bits().is_zero());
        let l2 = Lock::new(LockSpec::Scheme2 { g: 2, l_r: 3 }, vht).unwrap();
        assert!(l2.correct_key().bits().is_zero());
    }

    #[test]
    fn derived_key_census_accepts_exactly_vht() {
        // Via a real code and secret vector.
        let code = QcParityMatrix::profile("toy-30").unwrap();
        // h = 15 so censuses stay instant.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v = BitVec::random(code.n(), &mut rng);
        for spec in [LockSpec::Scheme1 { h_k: 6 }, LockSpec::Scheme2 { g: 3, l_r: 4 }] {
            let lock = Lock::for_secret(spec, &v, &code).unwrap();
            let key = lock.correct_key();
            let census = lock.census(&key).unwrap();
            assert_eq!(census.size, 1);
            assert!(lock.accepts(lock.vht(), &key).unwrap());
        }
    }

    #[test]
    fn packed_agrees_with_bitvec_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for trial in 0..40 {
            let h = rng.random_range(6..20usize);
            let lock = if trial % 2 == 0 {
                let h_k = rng.random_range(1..=h);
                Lock::new(LockSpec::Scheme1 { h_k }, BitVec::random(h, &mut rng)).unwrap()
            } else {
                let g = rng.random_range(1..4usize);
                let l_r = rng.random_range(1..=(h / g).min(5));
                Lock::new(LockSpec::Scheme2 { g, l_r }, BitVec::random(h, &mut rng)).unwrap()
            };
            let key = Key::new(BitVec::random(lock.key_len(), &mut rng));
            let packed = PackedLock::build(&lock, &key).unwrap();
            for _ in 0..200 {
                let t = rng.random_range(0..(1u64 << h));
                let tv = BitVec::from_u64(h, t);
                assert_eq!(
                    packed.accepts(t),
                    lock.accepts(&tv, &key).unwrap(),
                    "h={h} t={t}"
                );
            }
        }
    }

    #[test]
    fn stop_condition_cache_matches_lock() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let lock = random_lock2(18, 3, 4, 20);
        let key = Key::new(BitVec::random(lock.key_len(), &mut rng));
        let stop = StopCondition::locked(lock.clone(), key.clone()).unwrap();
        let reference = BitVec::zeros(18);
        for _ in 0..500 {
            let t = BitVec::random(18, &mut rng);
            assert_eq!(stop.fires(&t, &reference), lock.accepts(&t, &key).unwrap());
        }
    }

    #[test]
    fn wrong_key_rejects_reference_syndrome() {
        let lock = random_lock1(16, 8, 21);
        let k_star = lock.correct_key();
        let mut wrong = k_star.bits().clone();
        wrong.flip(3);
        assert!(!lock.accepts(lock.vht(), &Key::new(wrong)).unwrap());
    }
}
