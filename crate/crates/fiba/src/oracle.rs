//! Reference window for differential testing. Simple and slow on purpose.

use std::fmt::{Debug, Write as _};

use crate::monoid::Monoid;
use crate::Timestamp;

/// Sorted vector of entries with the same semantics as [`crate::Fiba`].
#[derive(Clone, Debug)]
pub struct OracleWindow<M: Monoid> {
    monoid: M,
    entries: Vec<(Timestamp, M::Value)>,
}

impl<M: Monoid> OracleWindow<M> {
    pub fn new(monoid: M) -> Self {
        OracleWindow {
            monoid,
            entries: Vec::new(),
        }
    }

    pub fn query(&self) -> M::Value {
        self.monoid.fold(self.entries.iter().map(|e| &e.1))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Timestamp, M::Value)] {
        &self.entries
    }

    pub fn oldest_time(&self) -> Option<Timestamp> {
        self.entries.first().map(|e| e.0)
    }

    pub fn youngest_time(&self) -> Option<Timestamp> {
        self.entries.last().map(|e| e.0)
    }

    /// Number of entries with a time greater than `t`.
    pub fn distance(&self, t: Timestamp) -> usize {
        self.entries.len() - self.entries.partition_point(|e| e.0 <= t)
    }

    pub fn bulk_evict(&mut self, t: Timestamp) {
        self.entries.retain(|e| e.0 > t);
    }

    /// `bulk` must be strictly increasing.
    pub fn bulk_insert(&mut self, bulk: &[(Timestamp, M::Value)]) {
        assert!(bulk.windows(2).all(|w| w[0].0 < w[1].0), "bulk not strictly increasing");
        let mut out = Vec::with_capacity(self.entries.len() + bulk.len());
        for (t, v) in &self.entries {
            match bulk.binary_search_by_key(t, |e| e.0) {
                Ok(i) => out.push((*t, self.monoid.combine(v, &bulk[i].1))),
                Err(_) => out.push((*t, v.clone())),
            }
        }
        for (t, v) in bulk {
            if self.entries.binary_search_by_key(t, |e| e.0).is_err() {
                out.push((*t, v.clone()));
            }
        }
        out.sort_by_key(|e| e.0);
        self.entries = out;
    }

    /// One `time\tvalue` line per entry, oldest first.
    pub fn dump(&self) -> String
    where
        M::Value: Debug,
    {
        let mut s = String::new();
        for (t, v) in &self.entries {
            let _ = writeln!(s, "{t}\t{v:?}");
        }
        s
    }
}
