//! Sliding-window aggregation over a finger B-tree.
//!
//! [`Fiba`] keeps timestamped values under an arbitrary [`Monoid`] and answers
//! the ordered aggregate of the whole window in constant time. Entries may
//! arrive out of order, and both insertion and eviction work on whole bulks:
//! [`Fiba::bulk_evict`] removes every entry up to a timestamp and
//! [`Fiba::bulk_insert`] merges a sorted batch into the window.
//!
//! ```
//! use fiba::{Bulk, Fiba, Sum};
//!
//! let mut w = Fiba::new(Sum, 2).unwrap();
//! w.bulk_insert(Bulk::new(vec![(1, 10), (2, 20), (5, 50)]).unwrap());
//! w.insert(3, 30);
//! assert_eq!(w.query(), 110);
//! w.bulk_evict(2);
//! assert_eq!(w.query(), 80);
//! assert_eq!(w.oldest_time(), Some(3));
//! ```

mod error;
mod evict;
mod insert;
pub mod monoid;
pub mod oracle;
mod pool;
mod tree;
mod validate;

pub use error::FibaError;
pub use evict::BoundaryTriple;
pub use insert::{interleave, Bulk, Interleave, SplitPlan, Slot};
pub use monoid::{Bloom, BloomBits, Concat, GeoMean, LogSum, Max, Monoid, Sum};
pub use oracle::OracleWindow;
pub use pool::{NodeId, PoolStats};
pub use tree::{AggKind, Fiba, NodeView, OpCounters};
pub use validate::Violation;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/monoids.md")]
    mod monoids {}
    #[doc = include_str!("../../../book/src/aggregates.md")]
    mod aggregates {}
    #[doc = include_str!("../../../book/src/bulk-evict.md")]
    mod bulk_evict {}
    #[doc = include_str!("../../../book/src/bulk-insert.md")]
    mod bulk_insert {}
    #[doc = include_str!("../../../book/src/memory.md")]
    mod memory {}
    #[doc = include_str!("../../../book/src/testing.md")]
    mod testing {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
}

/// Logical time of an entry.
pub type Timestamp = u64;

