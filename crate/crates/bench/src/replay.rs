use std::hint::black_box;
use std::io::Read;
use std::time::Instant;

use fiba::{Fiba, Timestamp};

use crate::agg::Lift;
use crate::stats::{summarize_nanos, StatsSummary};
use crate::BenchError;

/// Unit of the timestamp column. Ticks are microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum TsUnit {
    S,
    Ms,
    #[default]
    Us,
}

impl TsUnit {
    fn ticks(self) -> u64 {
        match self {
            TsUnit::S => 1_000_000,
            TsUnit::Ms => 1_000,
            TsUnit::Us => 1,
        }
    }

    /// Parses a timestamp field into ticks.
    pub fn parse(self, field: &str) -> Option<Timestamp> {
        let field = field.trim();
        if let Ok(x) = field.parse::<u64>() {
            return x.checked_mul(self.ticks());
        }
        let x = field.parse::<f64>().ok()?;
        let t = (x * self.ticks() as f64).round();
        (t.is_finite() && t >= 0.0 && t < u64::MAX as f64).then_some(t as u64)
    }
}

#[derive(Clone, Debug)]
pub struct ReplayConfig {
    pub window_duration: u64,
    pub ts_col: String,
    pub val_col: String,
    pub ts_unit: TsUnit,
    pub min_arity: usize,
}

impl ReplayConfig {
    pub fn new(window_duration: u64) -> Self {
        ReplayConfig {
            window_duration,
            ts_col: "timestamp".into(),
            val_col: "value".into(),
            ts_unit: TsUnit::Us,
            min_arity: 4,
        }
    }
}

/// Power-of-two histogram. Bin 0 holds zero; bin `b > 0` holds `[2^(b-1), 2^b)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Log2Histogram {
    counts: Vec<u64>,
}

impl Log2Histogram {
    pub fn bin_of(x: u64) -> usize {
        (64 - x.leading_zeros()) as usize
    }

    pub fn bin_range(b: usize) -> (u64, u64) {
        match b {
            0 => (0, 1),
            64 => (1 << 63, u64::MAX),
            _ => (1 << (b - 1), 1 << b),
        }
    }

    pub fn add(&mut self, x: u64) {
        let b = Self::bin_of(x);
        if self.counts.len() <= b {
            self.counts.resize(b + 1, 0);
        }
        self.counts[b] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Samples at or above `x`, which must be a bin boundary.
    pub fn mass_from(&self, x: u64) -> u64 {
        self.counts.iter().skip(Self::bin_of(x)).sum()
    }

    /// `bin_lo,bin_hi,count` rows for every bin up to the last nonempty one.
    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (b, c) in self.counts.iter().enumerate() {
            let (lo, hi) = Self::bin_range(b);
            w.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub rows: u64,
    pub skipped: u64,
    pub summary: StatsSummary,
    pub window: Log2Histogram,
    pub bulk: Log2Histogram,
    pub distance: Log2Histogram,
}

/// Fenwick tree of live distinct timestamps, indexed by rank among all input timestamps.
struct LiveSet {
    tree: Vec<u32>,
    live: Vec<bool>,
    count: u64,
}

impl LiveSet {
    fn new(n: usize) -> Self {
        LiveSet {
            tree: vec![0; n + 1],
            live: vec![false; n],
            count: 0,
        }
    }

    fn update(&mut self, i: usize, delta: i32) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] = self.tree[k].wrapping_add_signed(delta);
            k += k & k.wrapping_neg();
        }
    }

    /// Live entries at ranks `<= i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut k = i + 1;
        let mut s = 0u64;
        while k > 0 {
            s += self.tree[k] as u64;
            k -= k & k.wrapping_neg();
        }
        s
    }

    fn insert(&mut self, i: usize) {
        if !self.live[i] {
            self.live[i] = true;
            self.count += 1;
            self.update(i, 1);
        }
    }

    fn remove(&mut self, i: usize) {
        if self.live[i] {
            self.live[i] = false;
            self.count -= 1;
            self.update(i, -1);
        }
    }
}

/// Parses every row up front. Rows with an unreadable timestamp or value are skipped.
pub fn read_rows<M: Lift, R: Read>(monoid: &M, input: R, cfg: &ReplayConfig) -> Result<(Vec<(Timestamp, M::Value)>, u64), BenchError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| BenchError::Spec(format!("no column named {name:?}")))
    };
    let (ti, vi) = (col(&cfg.ts_col)?, col(&cfg.val_col)?);
    let mut rows = Vec::new();
    let mut skipped = 0;
    for rec in rdr.records() {
        let parsed = rec.ok().and_then(|r| {
            let t = cfg.ts_unit.parse(r.get(ti)?)?;
            Some((t, monoid.parse(r.get(vi)?)?))
        });
        match parsed {
            Some(row) => rows.push(row),
            None => skipped += 1,
        }
    }
    Ok((rows, skipped))
}

/// Replays `input` through a time-based window of `cfg.window_duration` ticks.
pub fn run_replay<M: Lift, R: Read>(monoid: M, input: R, cfg: &ReplayConfig) -> Result<ReplayReport, BenchError> {
    let (rows, skipped) = read_rows(&monoid, input, cfg)?;
    let mut uniq: Vec<Timestamp> = rows.iter().map(|r| r.0).collect();
    uniq.sort_unstable();
    uniq.dedup();
    let mut live = LiveSet::new(uniq.len());
    // ranks below this have been evicted
    let mut expired = 0usize;
    let mut tree = Fiba::new(monoid, cfg.min_arity)?;
    let mut newest: Option<Timestamp> = None;
    let mut window = Log2Histogram::default();
    let mut bulk = Log2Histogram::default();
    let mut distance = Log2Histogram::default();
    let mut nanos = Vec::with_capacity(rows.len());
    let row_count = rows.len() as u64;
    for (t, v) in rows {
        let rank = uniq.binary_search(&t).expect("timestamp was indexed");
        let d = live.count - live.prefix(rank);
        distance.add(d);
        let top = newest.map_or(t, |n| n.max(t));
        newest = Some(top);
        // entries at or before the cut leave the window
        let cut = top.checked_sub(cfg.window_duration);

        let start = Instant::now();
        tree.insert(t, v);
        let before = tree.size();
        if let Some(c) = cut {
            tree.bulk_evict(c);
        }
        let after = tree.size();
        black_box(tree.query());
        nanos.push(start.elapsed().as_nanos() as u64);

        live.insert(rank);
        let bound = cut.map_or(0, |c| uniq.partition_point(|&u| u <= c));
        while expired < bound {
            live.remove(expired);
            expired += 1;
        }
        if rank < expired {
            live.remove(rank);
        }
        debug_assert_eq!(live.count as usize, after);
        bulk.add((before - after) as u64);
        window.add(after as u64);
    }
    Ok(ReplayReport {
        rows: row_count,
        skipped,
        summary: summarize_nanos(nanos, row_count),
        window,
        bulk,
        distance,
    })
}
