use std::hash::{DefaultHasher, Hash, Hasher};

use fiba::{Bloom, Concat, GeoMean, Max, Monoid, Sum};

/// Aggregators selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum AggName {
    Sum,
    Max,
    Geomean,
    Bloom,
    Concat,
}

/// Turns raw workload data into monoid values.
pub trait Lift: Monoid {
    /// Value for a synthetic entry at `ts`; `r` is a fresh random word.
    fn synth(&self, ts: u64, r: u64) -> Self::Value;

    /// Value for a CSV field. `None` marks the row malformed.
    fn parse(&self, field: &str) -> Option<Self::Value>;
}

fn number(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

impl Lift for Sum {
    fn synth(&self, _ts: u64, r: u64) -> i64 {
        (r % 1000) as i64
    }

    fn parse(&self, field: &str) -> Option<i64> {
        number(field).map(|x| x.round() as i64)
    }
}

impl Lift for Max {
    fn synth(&self, _ts: u64, r: u64) -> i64 {
        (r % 1_000_000) as i64
    }

    fn parse(&self, field: &str) -> Option<i64> {
        number(field).map(|x| x.round() as i64)
    }
}

impl Lift for GeoMean {
    fn synth(&self, _ts: u64, r: u64) -> fiba::LogSum {
        GeoMean::lift(1.0 + (r % 1000) as f64)
    }

    fn parse(&self, field: &str) -> Option<fiba::LogSum> {
        number(field).filter(|&x| x > 0.0).map(GeoMean::lift)
    }
}

impl Lift for Bloom {
    fn synth(&self, _ts: u64, r: u64) -> fiba::BloomBits {
        Bloom::lift(r)
    }

    fn parse(&self, field: &str) -> Option<fiba::BloomBits> {
        let mut h = DefaultHasher::new();
        field.hash(&mut h);
        Some(Bloom::lift(h.finish()))
    }
}

impl Lift for Concat {
    fn synth(&self, ts: u64, r: u64) -> Vec<u8> {
        Concat::lift(&ts.to_le_bytes()[..1 + (r % 8) as usize])
    }

    fn parse(&self, field: &str) -> Option<Vec<u8>> {
        Some(Concat::lift(field.as_bytes()))
    }
}

/// Runs `$body` with `$m` bound to the monoid named by `$name`.
#[macro_export]
macro_rules! with_agg {
    ($name:expr, $m:ident => $body:expr) => {
        match $name {
            $crate::AggName::Sum => {
                let $m = fiba::Sum;
                $body
            }
            $crate::AggName::Max => {
                let $m = fiba::Max;
                $body
            }
            $crate::AggName::Geomean => {
                let $m = fiba::GeoMean;
                $body
            }
            $crate::AggName::Bloom => {
                let $m = fiba::Bloom;
                $body
            }
            $crate::AggName::Concat => {
                let $m = fiba::Concat;
                $body
            }
        }
    };
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_numbers_and_reject_garbage() {
        assert_eq!(Sum.parse(" 12 "), Some(12));
        assert_eq!(Max.parse("2.6"), Some(3));
        assert_eq!(Sum.parse("x"), None);
        assert!(GeoMean.parse("-1").is_none());
        assert!(Bloom.parse("anything").is_some());
    }

    #[test]
    fn bloom_field_hash_is_stable() {
        assert_eq!(Bloom.parse("abc"), Bloom.parse("abc"));
    }
}
