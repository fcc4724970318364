use std::collections::VecDeque;
use std::hint::black_box;
use std::sync::atomic::{compiler_fence, Ordering};
use std::time::Instant;

use fiba::{Bulk, Fiba, Timestamp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agg::{AggName, Lift};
use crate::stats::{summarize, LatencyRecord, OpKind, StatsSummary};
use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    /// Time bulk evictions.
    Evict,
    /// Time out-of-order bulk insertions.
    Insert,
    /// Time both.
    Both,
    /// Time both with bulks of one entry.
    Single,
}

/// Parameters of a synthetic run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkloadSpec {
    /// Entries in the window between iterations. Default 2^20.
    pub window_size: usize,
    /// Entries per bulk. Default 2^10. Forced to 1 in single mode.
    pub bulk_size: usize,
    /// Entries younger than each inserted bulk. Default 0.
    pub ooo_distance: usize,
    /// Default sum.
    pub agg: AggName,
    /// Default evict.
    pub mode: Mode,
    /// Default 4.
    pub min_arity: usize,
    /// Timed iterations. Default 1000.
    pub iters: usize,
    /// Default 42.
    pub seed: u64,
    /// Replace every bulk with a loop of single-entry calls. Default off.
    pub emulate: bool,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            window_size: 1 << 20,
            bulk_size: 1 << 10,
            ooo_distance: 0,
            agg: AggName::Sum,
            mode: Mode::Evict,
            min_arity: 4,
            iters: 1000,
            seed: 42,
            emulate: false,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.bulk_size == 0 {
            return Err(BenchError::Spec("bulk size must be at least 1".into()));
        }
        if self.ooo_distance > self.window_size {
            return Err(BenchError::Spec(format!(
                "out-of-order distance {} exceeds window size {}",
                self.ooo_distance, self.window_size
            )));
        }
        if self.min_arity < 2 {
            return Err(BenchError::Spec("min arity must be at least 2".into()));
        }
        Ok(())
    }

    /// Bulk size after the single-mode override.
    pub fn effective_bulk(&self) -> usize {
        if self.mode == Mode::Single {
            1
        } else {
            self.bulk_size
        }
    }
}

/// Timestamps touched by one iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    /// Appended at the young end, untimed.
    pub append: Vec<Timestamp>,
    /// The out-of-order bulk: exactly `d` entries are younger than its first entry.
    pub fill: Vec<Timestamp>,
    /// Two eviction cuts of `m` entries each; only the second may be timed.
    pub cuts: [Timestamp; 2],
}

/// Deterministic timestamp schedule.
///
/// Block `k` spans `[2mk, 2mk + 2m)`. It is appended with a hole of `m`
/// slots placed `q = d mod m` slots before its end, and the hole is filled
/// `j = d / m` iterations later. Every block appended since then still has
/// its hole open, so exactly `jm + q = d` entries sit above the filled bulk.
#[derive(Clone, Debug)]
pub struct Plan {
    m: u64,
    j: u64,
    q: u64,
    next_block: u64,
    mirror: VecDeque<Timestamp>,
}

impl Plan {
    pub fn new(spec: &WorkloadSpec) -> Result<Self, BenchError> {
        spec.validate()?;
        let m = spec.effective_bulk() as u64;
        let d = spec.ooo_distance as u64;
        let n = spec.window_size as u64;
        let (j, q) = (d / m, d % m);
        let blocks = j.max((n + m * j).div_ceil(2 * m));
        let mut plan = Plan {
            m,
            j,
            q,
            next_block: 0,
            mirror: VecDeque::new(),
        };
        for k in 0..blocks {
            if k + j < blocks {
                plan.mirror.extend(2 * m * k..2 * m * (k + 1));
            } else {
                plan.mirror.extend(plan.present(k));
            }
        }
        plan.next_block = blocks;
        let extra = plan.mirror.len() - n as usize;
        plan.mirror.drain(..extra);
        Ok(plan)
    }

    fn present(&self, k: u64) -> impl Iterator<Item = Timestamp> {
        let base = 2 * self.m * k;
        let (m, q) = (self.m, self.q);
        (base..base + m - q).chain(base + 2 * m - q..base + 2 * m)
    }

    fn hole(&self, k: u64) -> std::ops::Range<Timestamp> {
        let base = 2 * self.m * k;
        base + self.m - self.q..base + 2 * self.m - self.q
    }

    /// Window contents before the first iteration, oldest first.
    pub fn prefill(&self) -> Vec<Timestamp> {
        self.mirror.iter().copied().collect()
    }

    pub fn window(&self) -> &VecDeque<Timestamp> {
        &self.mirror
    }

    pub fn next_step(&mut self) -> Step {
        let k = self.next_block;
        self.next_block += 1;
        let append: Vec<_> = self.present(k).collect();
        self.mirror.extend(append.iter().copied());
        let fill: Vec<_> = self.hole(k - self.j).collect();
        let d = (self.j * self.m + self.q) as usize;
        let mut tail = self.mirror.split_off(self.mirror.len() - d);
        debug_assert!(self.mirror.back().map_or(true, |&b| b < fill[0]));
        debug_assert!(tail.front().map_or(true, |&f| f > fill[fill.len() - 1]));
        self.mirror.extend(fill.iter().copied());
        self.mirror.append(&mut tail);
        let m = self.m as usize;
        let cuts = [self.mirror[m - 1], self.mirror[2 * m - 1]];
        self.mirror.drain(..2 * m);
        Step { append, fill, cuts }
    }
}

/// Output of a synthetic run.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub records: Vec<LatencyRecord>,
    pub summaries: Vec<(OpKind, StatsSummary)>,
}

struct Runner<M: Lift> {
    tree: Fiba<M>,
    rng: ChaCha8Rng,
    emulate: bool,
    records: Vec<LatencyRecord>,
}

impl<M: Lift> Runner<M> {
    fn values(&mut self, ts: &[Timestamp]) -> Vec<(Timestamp, M::Value)> {
        ts.iter()
            .map(|&t| {
                let r = self.rng.random::<u64>();
                (t, self.tree.monoid().synth(t, r))
            })
            .collect()
    }

    fn insert(&mut self, items: Vec<(Timestamp, M::Value)>, single: bool) {
        if single {
            for (t, v) in items {
                self.tree.insert(t, v);
            }
        } else {
            self.tree.bulk_insert(Bulk::new(items).expect("plan emits increasing bulks"));
        }
    }

    fn evict(&mut self, cut: Timestamp, count: usize) {
        if self.emulate {
            for _ in 0..count {
                self.tree.evict();
            }
        } else {
            self.tree.bulk_evict(cut);
        }
    }

    fn timed(&mut self, kind: OpKind, f: impl FnOnce(&mut Self)) {
        self.tree.reset_counters();
        compiler_fence(Ordering::SeqCst);
        let start = Instant::now();
        f(self);
        let nanos = start.elapsed().as_nanos() as u64;
        compiler_fence(Ordering::SeqCst);
        let c = self.tree.counters();
        self.records.push(LatencyRecord {
            op_index: self.records.len() as u64,
            op_kind: kind,
            nanos,
            nodes_visited: c.nodes_visited,
            combines: c.combines,
        });
    }
}

/// Runs `spec` with the monoid `monoid`, which must match `spec.agg`.
pub fn run_with<M: Lift>(spec: &WorkloadSpec, monoid: M) -> Result<RunResult, BenchError> {
    let mut plan = Plan::new(spec)?;
    let m = spec.effective_bulk();
    let tree = Fiba::new(monoid, spec.min_arity)?;
    let mut run = Runner {
        tree,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        emulate: spec.emulate,
        records: Vec::with_capacity(2 * spec.iters),
    };
    let pre = plan.prefill();
    for chunk in pre.chunks(1 << 16) {
        let items = run.values(chunk);
        run.insert(items, false);
    }
    let time_insert = matches!(spec.mode, Mode::Insert | Mode::Both | Mode::Single);
    let time_evict = matches!(spec.mode, Mode::Evict | Mode::Both | Mode::Single);
    for _ in 0..spec.iters {
        let step = plan.next_step();
        let append = run.values(&step.append);
        run.insert(append, spec.mode == Mode::Evict);
        let fill = run.values(&step.fill);
        if time_insert {
            let single = spec.emulate;
            run.timed(OpKind::Insert, |r| r.insert(fill, single));
        } else {
            run.insert(fill, true);
        }
        run.tree.bulk_evict(step.cuts[0]);
        if time_evict {
            run.timed(OpKind::Evict, |r| r.evict(step.cuts[1], m));
        } else {
            run.tree.bulk_evict(step.cuts[1]);
        }
        black_box(run.tree.query());
        debug_assert_eq!(run.tree.size(), spec.window_size);
    }
    let mut summaries = Vec::new();
    for kind in [OpKind::Insert, OpKind::Evict] {
        let recs: Vec<_> = run.records.iter().filter(|r| r.op_kind == kind).copied().collect();
        if !recs.is_empty() {
            let items = (recs.len() * m) as u64;
            summaries.push((kind, summarize(&recs, items)));
        }
    }
    Ok(RunResult {
        records: run.records,
        summaries,
    })
}

/// Runs `spec` with the monoid it names.
pub fn run_synthetic(spec: &WorkloadSpec) -> Result<RunResult, BenchError> {
    crate::with_agg!(spec.agg, m => run_with(spec, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, m: usize, d: usize) -> WorkloadSpec {
        WorkloadSpec {
            window_size: n,
            bulk_size: m,
            ooo_distance: d,
            mode: Mode::Insert,
            iters: 20,
            ..WorkloadSpec::default()
        }
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(spec(10, 2, 11).validate().is_err());
        assert!(spec(10, 0, 0).validate().is_err());
        assert!(spec(10, 2, 10).validate().is_ok());
    }

    #[test]
    fn fill_lands_exactly_d_from_young_end() {
        for (n, m, d) in [(64, 4, 0), (64, 4, 9), (64, 4, 64), (100, 7, 23), (50, 1, 13), (40, 8, 8)] {
            let mut plan = Plan::new(&spec(n, m, d)).unwrap();
            assert_eq!(plan.window().len(), n);
            for _ in 0..30 {
                let before: Vec<_> = plan.window().iter().copied().collect();
                let step = plan.next_step();
                assert_eq!(step.append.len(), m);
                assert_eq!(step.fill.len(), m);
                let mut live: Vec<_> = before.iter().chain(&step.append).copied().collect();
                assert!(step.fill.iter().all(|t| !live.contains(t)));
                let above = live.iter().filter(|&&t| t > step.fill[0]).count();
                assert_eq!(above, d, "n={n} m={m} d={d}");
                assert!(live.iter().all(|&t| t < step.fill[0] || t > *step.fill.last().unwrap()));
                live.extend(&step.fill);
                live.sort_unstable();
                assert_eq!(step.cuts, [live[m - 1], live[2 * m - 1]]);
                assert_eq!(plan.window().len(), n);
                assert_eq!(plan.window().iter().copied().collect::<Vec<_>>(), live[2 * m..]);
            }
        }
    }

    #[test]
    fn every_mode_keeps_window_size() {
        for mode in [Mode::Evict, Mode::Insert, Mode::Both, Mode::Single] {
            for emulate in [false, true] {
                let s = WorkloadSpec {
                    mode,
                    emulate,
                    ..spec(300, 16, 40)
                };
                let out = run_synthetic(&s).unwrap();
                let per_iter = if mode == Mode::Both || mode == Mode::Single { 2 } else { 1 };
                assert_eq!(out.records.len(), per_iter * s.iters);
            }
        }
    }

    #[test]
    fn deterministic_counters() {
        let s = WorkloadSpec {
            mode: Mode::Both,
            agg: AggName::Concat,
            ..spec(500, 8, 30)
        };
        let strip = |r: RunResult| r.records.iter().map(|x| (x.op_kind, x.nodes_visited, x.combines)).collect::<Vec<_>>();
        assert_eq!(strip(run_synthetic(&s).unwrap()), strip(run_synthetic(&s).unwrap()));
    }
}
