//! Bulk insertion.
//!
//! Step one finds the insertion site of every bulk entry, resolving
//! timestamp collisions on the spot. Step two walks up level by level,
//! merging each node with the slots destined for it and splitting overfull
//! results. Step three repairs the spines top-down.

use std::iter::Peekable;
use std::mem;

use crate::monoid::Monoid;
use crate::pool::NodeId;
use crate::tree::Fiba;
use crate::{FibaError, Timestamp};

/// Strictly increasing sequence of entries to insert.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bulk<V> {
    items: Vec<(Timestamp, V)>,
}

impl<V> Bulk<V> {
    pub fn new(items: Vec<(Timestamp, V)>) -> Result<Self, FibaError> {
        if let Some(w) = items.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(FibaError::NotIncreasing {
                prev: w[0].0,
                next: w[1].0,
            });
        }
        Ok(Bulk { items })
    }

    pub fn single(t: Timestamp, v: V) -> Self {
        Bulk { items: vec![(t, v)] }
    }

    /// Stable sort by time; entries sharing a time are combined in input order.
    pub fn sort_and_combine<M>(mut raw: Vec<(Timestamp, V)>, monoid: &M) -> Self
    where
        M: Monoid<Value = V>,
    {
        raw.sort_by_key(|e| e.0);
        let mut items: Vec<(Timestamp, V)> = Vec::with_capacity(raw.len());
        for (t, v) in raw {
            match items.last_mut() {
                Some(last) if last.0 == t => last.1 = monoid.combine(&last.1, &v),
                _ => items.push((t, v)),
            }
        }
        Bulk { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn as_slice(&self) -> &[(Timestamp, V)] {
        &self.items
    }

    pub fn into_vec(self) -> Vec<(Timestamp, V)> {
        self.items
    }
}

/// An entry on its way into a node, with the child to its right for internal nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot<V> {
    pub time: Timestamp,
    pub value: V,
    pub child: Option<NodeId>,
}

/// Merge step of merge sort over two sorted slot streams.
pub struct Interleave<A: Iterator, B: Iterator> {
    a: Peekable<A>,
    b: Peekable<B>,
}

pub fn interleave<V, A, B>(a: A, b: B) -> Interleave<A::IntoIter, B::IntoIter>
where
    A: IntoIterator<Item = Slot<V>>,
    B: IntoIterator<Item = Slot<V>>,
{
    Interleave {
        a: a.into_iter().peekable(),
        b: b.into_iter().peekable(),
    }
}

impl<V, A, B> Iterator for Interleave<A, B>
where
    A: Iterator<Item = Slot<V>>,
    B: Iterator<Item = Slot<V>>,
{
    type Item = Slot<V>;

    fn next(&mut self) -> Option<Slot<V>> {
        match (self.a.peek(), self.b.peek()) {
            (Some(x), Some(y)) => {
                debug_assert_ne!(x.time, y.time);
                if x.time < y.time {
                    self.a.next()
                } else {
                    self.b.next()
                }
            }
            (Some(_), None) => self.a.next(),
            _ => self.b.next(),
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let (la, ha) = self.a.size_hint();
        let (lb, hb) = self.b.size_hint();
        (la + lb, ha.zip(hb).map(|(x, y)| x + y))
    }
}

/// How an overfull node of arity `p` is cut into parts.
///
/// All parts but the last have arity `min_arity + 1`; the last lies in
/// `min_arity..=2 * min_arity`. One separator entry sits between neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitPlan {
    min_arity: usize,
    full: usize,
    last: usize,
}

impl SplitPlan {
    pub fn new(arity: usize, min_arity: usize) -> Result<Self, FibaError> {
        if arity <= 2 * min_arity {
            return Err(FibaError::NoOverflow {
                arity,
                max: 2 * min_arity,
            });
        }
        let k = arity / (min_arity + 1);
        let r = arity % (min_arity + 1);
        let (full, last) = if r == min_arity {
            (k, min_arity)
        } else {
            (k - 1, min_arity + 1 + r)
        };
        Ok(SplitPlan {
            min_arity,
            full,
            last,
        })
    }

    pub fn parts(&self) -> usize {
        self.full + 1
    }

    pub fn separators(&self) -> usize {
        self.full
    }

    pub fn arities(&self) -> impl Iterator<Item = usize> {
        std::iter::repeat_n(self.min_arity + 1, self.full).chain(std::iter::once(self.last))
    }
}

/// Consecutive slots bound for one node, or a bare request to recompute it.
#[derive(Clone, Copy, Debug)]
struct Group {
    target: NodeId,
    level: u32,
    key: Timestamp,
    start: usize,
    len: usize,
}

#[derive(Debug)]
pub(crate) struct Treelets<V> {
    groups: Vec<Group>,
    items: Vec<Slot<V>>,
}

impl<V> Default for Treelets<V> {
    fn default() -> Self {
        Treelets {
            groups: Vec::new(),
            items: Vec::new(),
        }
    }
}

impl<V> Treelets<V> {
    fn clear(&mut self) {
        self.groups.clear();
        self.items.clear();
    }

    fn reserve(&mut self, m: usize, min_arity: usize) {
        let want = m + m.div_ceil(min_arity);
        self.groups.reserve(want.saturating_sub(self.groups.len()));
        self.items.reserve(want.saturating_sub(self.items.len()));
    }

    fn open(&mut self, target: NodeId, level: u32, key: Timestamp) -> &mut Group {
        let fresh = match self.groups.last() {
            Some(g) => g.target != target || g.start + g.len != self.items.len(),
            None => true,
        };
        if fresh {
            self.groups.push(Group {
                target,
                level,
                key,
                start: self.items.len(),
                len: 0,
            });
        }
        self.groups.last_mut().unwrap()
    }

    fn push_slot(&mut self, target: NodeId, level: u32, slot: Slot<V>) {
        self.open(target, level, slot.time).len += 1;
        self.items.push(slot);
    }

    fn push_recompute(&mut self, target: NodeId, level: u32, key: Timestamp) {
        self.open(target, level, key);
    }

    fn is_sorted(&self) -> bool {
        self.groups.windows(2).all(|w| w[0].key < w[1].key)
            && self.items.windows(2).all(|w| w[0].time < w[1].time)
    }
}

#[derive(Debug)]
pub(crate) struct InsertScratch<V> {
    times: Vec<Timestamp>,
    values: Vec<V>,
    children: Vec<NodeId>,
    parts: Vec<NodeId>,
    bufs: [Treelets<V>; 2],
}

impl<V> InsertScratch<V> {
    pub(crate) fn new(max_arity: usize) -> Self {
        InsertScratch {
            times: Vec::with_capacity(max_arity - 1),
            values: Vec::with_capacity(max_arity - 1),
            children: Vec::with_capacity(max_arity),
            parts: Vec::new(),
            bufs: [Treelets::default(), Treelets::default()],
        }
    }
}

/// Highest modified node per spine, by level.
#[derive(Default)]
struct SpineTops {
    left: Option<(u32, NodeId)>,
    right: Option<(u32, NodeId)>,
}

impl SpineTops {
    fn mark(slot: &mut Option<(u32, NodeId)>, level: u32, id: NodeId) {
        if slot.is_none_or(|(l, _)| level >= l) {
            *slot = Some((level, id));
        }
    }
}

impl<M: Monoid> Fiba<M> {
    /// Merges a sorted bulk into the window. Colliding timestamps combine as `old ⊗ new`.
    pub fn bulk_insert(&mut self, bulk: Bulk<M::Value>) {
        if bulk.is_empty() {
            return;
        }
        let [mut cur, mut next] = mem::take(&mut self.scratch.bufs);
        cur.clear();
        next.clear();
        cur.reserve(bulk.len(), self.min_arity);
        next.reserve(bulk.len(), self.min_arity);

        self.search_sites(bulk, &mut cur);
        let mut tops = SpineTops::default();
        let mut level = 0;
        while !cur.groups.is_empty() {
            debug_assert!(cur.is_sorted(), "treelets out of order at level {level}");
            next.clear();
            self.level_step(level, &mut cur, &mut next, &mut tops);
            mem::swap(&mut cur, &mut next);
            level += 1;
        }
        self.scratch.bufs = [cur, next];

        if let Some((_, id)) = tops.left {
            self.repair_spine(id, true);
        }
        if let Some((_, id)) = tops.right {
            self.repair_spine(id, false);
        }
    }

    /// Like [`Fiba::bulk_insert`] but validates the order first.
    pub fn try_bulk_insert(&mut self, items: Vec<(Timestamp, M::Value)>) -> Result<(), FibaError> {
        self.bulk_insert(Bulk::new(items)?);
        Ok(())
    }

    /// Step one: leaf-level slots plus recompute requests for collisions.
    fn search_sites(&mut self, bulk: Bulk<M::Value>, out: &mut Treelets<M::Value>) {
        let mut cursor: Option<(NodeId, u32)> = None;
        for (t, v) in bulk.items {
            let (mut x, mut level) = match cursor {
                None => {
                    let mut x = self.right_finger;
                    let mut level = 0;
                    self.visit(1);
                    while x != self.root {
                        let p = self.pool[x].parent.unwrap();
                        self.visit(1);
                        if t > *self.pool[p].times.last().unwrap() {
                            break;
                        }
                        x = p;
                        level += 1;
                    }
                    (x, level)
                }
                Some((mut x, mut level)) => {
                    while x != self.root && !self.pool[x].right_spine {
                        let p = self.pool[x].parent.unwrap();
                        self.visit(1);
                        let pn = &self.pool[p];
                        let i = pn.child_index(x);
                        if i < pn.times.len() && t < pn.times[i] {
                            break;
                        }
                        x = p;
                        level += 1;
                    }
                    (x, level)
                }
            };
            loop {
                self.visit(1);
                let n = &self.pool[x];
                let i = n.times.partition_point(|&u| u < t);
                if n.times.get(i) == Some(&t) {
                    let merged = self.op(&n.values[i], &v);
                    self.pool[x].values[i] = merged;
                    out.push_recompute(x, level, t);
                    break;
                }
                if n.is_leaf() {
                    out.push_slot(
                        x,
                        level,
                        Slot {
                            time: t,
                            value: v,
                            child: None,
                        },
                    );
                    break;
                }
                x = n.children[i];
                level -= 1;
            }
            cursor = Some((x, level));
        }
    }

    /// Step two for one level: apply every group at `level`, forward the rest.
    fn level_step(
        &mut self,
        level: u32,
        input: &mut Treelets<M::Value>,
        out: &mut Treelets<M::Value>,
        tops: &mut SpineTops,
    ) {
        let groups = mem::take(&mut input.groups);
        let mut items = input.items.drain(..);
        for g in &groups {
            if g.level > level {
                out.push_recompute(g.target, g.level, g.key);
                for s in items.by_ref().take(g.len) {
                    out.push_slot(g.target, g.level, s);
                }
                continue;
            }
            debug_assert_eq!(g.level, level);
            let x = g.target;
            let arity = self.pool[x].arity();
            if arity + g.len <= self.max_arity() {
                self.insert_small(x, items.by_ref().take(g.len));
                self.after_modify(x, g.key, level, out, tops);
            } else {
                self.split(x, items.by_ref().take(g.len), arity + g.len, level, out, tops);
            }
        }
        drop(items);
        input.groups = groups;
        input.groups.clear();
    }

    fn insert_small(&mut self, x: NodeId, slots: impl Iterator<Item = Slot<M::Value>>) {
        let mut pos = 0;
        for s in slots {
            let n = &mut self.pool[x];
            pos += n.times[pos..].partition_point(|&u| u < s.time);
            n.times.insert(pos, s.time);
            n.values.insert(pos, s.value);
            if let Some(c) = s.child {
                n.children.insert(pos + 1, c);
                self.pool[c].parent = Some(x);
            }
            pos += 1;
        }
    }

    /// Aggregate upkeep for a node that changed in place.
    fn after_modify(
        &mut self,
        x: NodeId,
        key: Timestamp,
        level: u32,
        out: &mut Treelets<M::Value>,
        tops: &mut SpineTops,
    ) {
        let n = &self.pool[x];
        if x == self.root {
            self.recompute(x);
        } else if n.left_spine || n.right_spine {
            self.visit(1);
            if n.left_spine {
                SpineTops::mark(&mut tops.left, level, x);
            }
            if n.right_spine {
                SpineTops::mark(&mut tops.right, level, x);
            }
        } else {
            let p = n.parent.unwrap();
            self.recompute(x);
            out.push_recompute(p, level + 1, key);
        }
    }

    /// Streams the node merged with `slots` into fresh parts and promotes the separators.
    fn split(
        &mut self,
        x: NodeId,
        slots: impl Iterator<Item = Slot<M::Value>>,
        arity: usize,
        level: u32,
        out: &mut Treelets<M::Value>,
        tops: &mut SpineTops,
    ) {
        let plan = SplitPlan::new(arity, self.min_arity).expect("split only on overflow");
        if x == self.root {
            let r = self.pool.alloc(self.monoid.identity());
            self.pool[r].children.push(x);
            self.pool[x].parent = Some(r);
            self.set_root(r);
            SpineTops::mark(&mut tops.left, level + 1, r);
            SpineTops::mark(&mut tops.right, level + 1, r);
        }
        let parent = self.pool[x].parent.unwrap();
        let was_right = self.pool[x].right_spine;
        let identity = self.monoid.identity();

        let pool = &mut self.pool;
        let sc = &mut self.scratch;
        {
            let n = &mut pool[x];
            mem::swap(&mut n.times, &mut sc.times);
            mem::swap(&mut n.values, &mut sc.values);
            mem::swap(&mut n.children, &mut sc.children);
        }
        let mut kids = sc.children.drain(..);
        let first_child = kids.next();
        let old = sc
            .times
            .drain(..)
            .zip(sc.values.drain(..))
            .map(move |(time, value)| Slot {
                time,
                value,
                child: kids.next(),
            });
        let mut stream = interleave(old, slots);

        let fill = |pool: &mut crate::pool::NodePool<M::Value>,
                    id: NodeId,
                    first: Option<NodeId>,
                    entries: usize,
                    stream: &mut dyn Iterator<Item = Slot<M::Value>>| {
            if let Some(c) = first {
                pool[id].children.push(c);
                pool[c].parent = Some(id);
            }
            for _ in 0..entries {
                let s = stream.next().expect("split stream ended early");
                let n = &mut pool[id];
                n.times.push(s.time);
                n.values.push(s.value);
                if let Some(c) = s.child {
                    n.children.push(c);
                    pool[c].parent = Some(id);
                }
            }
        };

        sc.parts.clear();
        sc.parts.push(x);
        let mut arities = plan.arities();
        fill(pool, x, first_child, arities.next().unwrap() - 1, &mut stream);
        for b in arities {
            let sep = stream.next().expect("split stream ended early");
            let part = pool.alloc(identity.clone());
            pool[part].parent = Some(parent);
            fill(pool, part, sep.child, b - 1, &mut stream);
            out.push_slot(
                parent,
                level + 1,
                Slot {
                    time: sep.time,
                    value: sep.value,
                    child: Some(part),
                },
            );
            sc.parts.push(part);
        }
        debug_assert!(stream.next().is_none());
        drop(stream);

        let last = *sc.parts.last().unwrap();
        if was_right {
            self.pool[x].right_spine = false;
            self.pool[last].right_spine = true;
            if self.right_finger == x {
                self.right_finger = last;
            }
        }
        let parts = mem::take(&mut self.scratch.parts);
        for &p in &parts {
            let n = &self.pool[p];
            if n.left_spine || n.right_spine {
                self.visit(1);
                if n.left_spine {
                    SpineTops::mark(&mut tops.left, level, p);
                }
                if n.right_spine {
                    SpineTops::mark(&mut tops.right, level, p);
                }
            } else {
                self.recompute(p);
            }
        }
        self.scratch.parts = parts;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::fixture::{build, Shape};
    use crate::{Concat, Sum};

    fn slot(t: Timestamp) -> Slot<()> {
        Slot {
            time: t,
            value: (),
            child: None,
        }
    }

    fn times(it: impl Iterator<Item = Slot<()>>) -> Vec<Timestamp> {
        it.map(|s| s.time).collect()
    }

    #[test]
    fn interleave_merges() {
        let a = vec![slot(10), slot(20)];
        assert_eq!(times(interleave(a.clone(), vec![slot(15)])), [10, 15, 20]);
        assert_eq!(times(interleave(a, Vec::new())), [10, 20]);
    }

    #[test]
    fn split_worked_examples() {
        let p = SplitPlan::new(11, 4).unwrap();
        assert_eq!(p.arities().collect::<Vec<_>>(), [5, 6]);
        assert_eq!(p.separators(), 1);
        let p = SplitPlan::new(16, 2).unwrap();
        assert_eq!(p.arities().collect::<Vec<_>>(), [3, 3, 3, 3, 4]);
        assert_eq!(p.separators(), 4);
        assert_eq!(
            SplitPlan::new(8, 4),
            Err(FibaError::NoOverflow { arity: 8, max: 8 })
        );
    }

    #[test]
    fn sort_and_combine_keeps_input_order() {
        let raw = vec![(3, b"a".to_vec()), (1, b"b".to_vec()), (3, b"c".to_vec())];
        let bulk = Bulk::sort_and_combine(raw, &Concat);
        assert_eq!(bulk.as_slice(), &[(1, b"b".to_vec()), (3, b"ac".to_vec())]);
        assert!(Bulk::<i64>::sort_and_combine(vec![], &Sum).is_empty());
        let sorted = vec![(1, 1), (2, 2)];
        assert_eq!(Bulk::sort_and_combine(sorted.clone(), &Sum).into_vec(), sorted);
    }

    #[test]
    fn bulk_rejects_disorder() {
        assert_eq!(
            Bulk::new(vec![(1, 0), (1, 0)]),
            Err(FibaError::NotIncreasing { prev: 1, next: 1 })
        );
        let mut t = Fiba::new(Sum, 2).unwrap();
        assert!(t.try_bulk_insert(vec![(5, 1), (4, 1)]).is_err());
        assert!(t.is_empty());
    }

    fn leaf_tree() -> Fiba<Sum> {
        use Shape::*;
        build(
            Sum,
            2,
            Inner(vec![10], vec![Leaf(vec![1, 2]), Leaf(vec![11, 12, 13])]),
            |t| t as i64,
        )
    }

    #[test]
    fn small_insertion_in_place() {
        let mut t = leaf_tree();
        let lf = t.left_finger();
        t.insert(0, 0);
        assert_eq!(t.node(lf).times(), [0, 1, 2]);
        assert_eq!(t.height(), 1);
        assert_eq!(t.validate(), vec![]);
    }

    #[test]
    fn overflow_splits_full_leaf() {
        let mut t = leaf_tree();
        t.insert(0, 0);
        // full leaf of arity 4 receives mu + 2 = 4 more entries
        t.bulk_insert(Bulk::new(vec![(4, 4), (5, 5), (6, 6), (7, 7)]).unwrap());
        assert_eq!(t.validate(), vec![]);
        assert_eq!(t.size(), 11);
        assert_eq!(t.height(), 1);
        assert_eq!(t.query(), [0, 1, 2, 4, 5, 6, 7, 10, 11, 12, 13].iter().sum::<i64>());
    }

    #[test]
    fn full_collision_keeps_shape() {
        let mut t = leaf_tree();
        let before = t.live_nodes();
        t.bulk_insert(Bulk::new(vec![(2, 100), (10, 100), (13, 100)]).unwrap());
        assert_eq!(t.live_nodes(), before);
        assert_eq!(t.size(), 6);
        assert_eq!(t.validate(), vec![]);
        assert_eq!(t.query(), 1 + 2 + 10 + 11 + 12 + 13 + 300);
    }

    #[test]
    fn in_order_bulk_targets_right_finger() {
        let mut t = leaf_tree();
        let rf = t.right_finger();
        let mut buf = Treelets::default();
        t.search_sites(Bulk::new(vec![(20, 0), (21, 0), (22, 0)]).unwrap(), &mut buf);
        assert_eq!(buf.groups.len(), 1);
        assert_eq!(buf.groups[0].target, rf);
        assert_eq!(buf.groups[0].len, 3);
    }

    #[test]
    fn growth_from_empty() {
        let mut t = Fiba::new(Sum, 2).unwrap();
        let m = 1 << 16;
        t.bulk_insert(Bulk::new((0..m).map(|i| (i, 1)).collect()).unwrap());
        assert_eq!(t.validate(), vec![]);
        assert_eq!(t.query(), m as i64);
        // every node has at least mu children, so height is logarithmic
        assert!(t.height() <= 16);
        assert!(t.height() >= 8);
    }

    #[test]
    fn root_leaf_without_overflow_does_not_grow() {
        let mut t = Fiba::new(Sum, 4).unwrap();
        t.bulk_insert(Bulk::new((0..7).map(|i| (i, 1)).collect()).unwrap());
        assert_eq!(t.height(), 0);
        t.insert(7, 1);
        assert_eq!(t.height(), 1);
        assert_eq!(t.node(t.root()).arity(), 2);
        assert_eq!(t.validate(), vec![]);
    }

    #[test]
    fn groups_for_distinct_targets_stay_ordered() {
        use Shape::*;
        let t = build(
            Sum,
            2,
            Inner(
                vec![10, 20],
                vec![Leaf(vec![1, 2]), Leaf(vec![11, 12]), Leaf(vec![21, 22])],
            ),
            |t| t as i64,
        );
        let mut t = t;
        let mut buf = Treelets::default();
        t.search_sites(Bulk::new(vec![(0, 0), (3, 0), (10, 5), (13, 0), (25, 0)]).unwrap(), &mut buf);
        assert!(buf.is_sorted());
        let targets: Vec<_> = buf.groups.iter().map(|g| (g.level, g.len)).collect();
        assert_eq!(targets, [(0, 2), (1, 0), (0, 1), (0, 1)]);
    }
}
