//! Aggregation algebra.
//!
//! A [`Monoid`] is an identity element plus an associative binary operator.
//! The tree never assumes commutativity or invertibility.

use std::fmt;

/// Identity plus an associative combine.
pub trait Monoid {
    type Value: Clone;

    fn identity(&self) -> Self::Value;

    fn combine(&self, a: &Self::Value, b: &Self::Value) -> Self::Value;

    /// Left fold in sequence order; identity for an empty sequence.
    fn fold<'a, I>(&self, values: I) -> Self::Value
    where
        I: IntoIterator<Item = &'a Self::Value>,
        Self::Value: 'a,
    {
        let mut iter = values.into_iter();
        let Some(first) = iter.next() else {
            return self.identity();
        };
        let mut acc = first.clone();
        for v in iter {
            acc = self.combine(&acc, v);
        }
        acc
    }
}

/// Integer addition. Overflow panics when debug assertions are on and wraps otherwise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Sum;

impl Monoid for Sum {
    type Value = i64;

    fn identity(&self) -> i64 {
        0
    }

    #[inline]
    fn combine(&self, a: &i64, b: &i64) -> i64 {
        match a.checked_add(*b) {
            Some(s) => s,
            None => {
                debug_assert!(false, "Sum overflow: {a} + {b}");
                a.wrapping_add(*b)
            }
        }
    }
}

/// Maximum over `i64`, identity `i64::MIN`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Max;

impl Monoid for Max {
    type Value = i64;

    fn identity(&self) -> i64 {
        i64::MIN
    }

    #[inline]
    fn combine(&self, a: &i64, b: &i64) -> i64 {
        (*a).max(*b)
    }
}

/// Lifted geometric mean: log-sum and count, combined componentwise.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeoMean;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LogSum {
    pub log_sum: f64,
    pub count: u64,
}

impl GeoMean {
    pub fn lift(x: f64) -> LogSum {
        LogSum {
            log_sum: x.ln(),
            count: 1,
        }
    }

    /// `None` for the identity.
    pub fn lower(acc: &LogSum) -> Option<f64> {
        (acc.count > 0).then(|| (acc.log_sum / acc.count as f64).exp())
    }
}

impl Monoid for GeoMean {
    type Value = LogSum;

    fn identity(&self) -> LogSum {
        LogSum::default()
    }

    #[inline]
    fn combine(&self, a: &LogSum, b: &LogSum) -> LogSum {
        LogSum {
            log_sum: a.log_sum + b.log_sum,
            count: a.count + b.count,
        }
    }
}

pub const BLOOM_BITS: usize = 8192;
pub const BLOOM_HASHES: u64 = 7;
const BLOOM_WORDS: usize = BLOOM_BITS / 64;

/// Bloom filter over 64-bit keys; combine is bitwise OR.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Bloom;

#[derive(Clone, PartialEq, Eq)]
pub struct BloomBits(Box<[u64; BLOOM_WORDS]>);

impl BloomBits {
    pub fn empty() -> Self {
        BloomBits(Box::new([0; BLOOM_WORDS]))
    }

    pub fn contains(&self, key: u64) -> bool {
        bloom_positions(key).all(|bit| self.0[bit / 64] & (1 << (bit % 64)) != 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

impl fmt::Debug for BloomBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BloomBits({} set)", self.count_ones())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn bloom_positions(key: u64) -> impl Iterator<Item = usize> {
    let h1 = splitmix64(key);
    let h2 = splitmix64(h1) | 1;
    (0..BLOOM_HASHES).map(move |i| (h1.wrapping_add(i.wrapping_mul(h2)) % BLOOM_BITS as u64) as usize)
}

impl Bloom {
    pub fn lift(key: u64) -> BloomBits {
        let mut bits = BloomBits::empty();
        for bit in bloom_positions(key) {
            bits.0[bit / 64] |= 1 << (bit % 64);
        }
        bits
    }
}

impl Monoid for Bloom {
    type Value = BloomBits;

    fn identity(&self) -> BloomBits {
        BloomBits::empty()
    }

    fn combine(&self, a: &BloomBits, b: &BloomBits) -> BloomBits {
        let mut out = a.clone();
        for (o, w) in out.0.iter_mut().zip(b.0.iter()) {
            *o |= w;
        }
        out
    }
}

/// Byte-string concatenation. Not commutative, so it exposes ordering bugs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Concat;

impl Concat {
    /// Longest single value produced by [`Concat::lift`].
    pub const MAX_LIFT: usize = 8;

    pub fn lift(bytes: &[u8]) -> Vec<u8> {
        bytes[..bytes.len().min(Self::MAX_LIFT)].to_vec()
    }
}

impl Monoid for Concat {
    type Value = Vec<u8>;

    fn identity(&self) -> Vec<u8> {
        Vec::new()
    }

    fn combine(&self, a: &Vec<u8>, b: &Vec<u8>) -> Vec<u8> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        out.extend_from_slice(a);
        out.extend_from_slice(b);
        out
    }
}
