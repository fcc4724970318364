use std::cell::Cell;
use std::fmt::{Debug, Write as _};

use crate::insert::InsertScratch;
use crate::monoid::Monoid;
use crate::pool::{Node, NodeId, NodePool, PoolStats};
use crate::{Bulk, FibaError, Timestamp};

/// Which partial aggregate a node stores, decided by its position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggKind {
    /// Whole subtree. Nodes off both spines.
    Up,
    /// Own values and all children except the outermost two. The root.
    Inner,
    /// Everything right of the left spine below this node's parent, inclusive.
    Left,
    /// Mirror of `Left` for the right spine.
    Right,
}

/// Work counters since the last [`Fiba::reset_counters`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub nodes_visited: u64,
    pub combines: u64,
    pub free_pushes: u64,
}

/// Finger B-tree aggregator.
pub struct Fiba<M: Monoid> {
    pub(crate) monoid: M,
    pub(crate) pool: NodePool<M::Value>,
    pub(crate) root: NodeId,
    pub(crate) left_finger: NodeId,
    pub(crate) right_finger: NodeId,
    pub(crate) min_arity: usize,
    visits: Cell<u64>,
    combines: Cell<u64>,
    push_base: u64,
    pub(crate) scratch: InsertScratch<M::Value>,
}

/// Read-only view of one node.
pub struct NodeView<'a, V> {
    node: &'a Node<V>,
}

impl<'a, V> NodeView<'a, V> {
    pub fn times(&self) -> &'a [Timestamp] {
        &self.node.times
    }
    pub fn values(&self) -> &'a [V] {
        &self.node.values
    }
    pub fn children(&self) -> &'a [NodeId] {
        &self.node.children
    }
    pub fn parent(&self) -> Option<NodeId> {
        self.node.parent
    }
    pub fn is_leaf(&self) -> bool {
        self.node.is_leaf()
    }
    pub fn arity(&self) -> usize {
        self.node.arity()
    }
    pub fn agg(&self) -> &'a V {
        &self.node.agg
    }
    pub fn left_spine(&self) -> bool {
        self.node.left_spine
    }
    pub fn right_spine(&self) -> bool {
        self.node.right_spine
    }
}

/// Left-to-right accumulator for recomputing one node.
struct Acc<'a, M: Monoid> {
    monoid: &'a M,
    combines: &'a Cell<u64>,
    agg: Option<M::Value>,
    count: u64,
}

impl<'a, M: Monoid> Acc<'a, M> {
    fn push(&mut self, v: &M::Value, count: u64) {
        self.count += count;
        self.agg = Some(match self.agg.take() {
            None => v.clone(),
            Some(a) => {
                self.combines.set(self.combines.get() + 1);
                self.monoid.combine(&a, v)
            }
        });
    }

    fn finish(self) -> (M::Value, u64) {
        (self.agg.unwrap_or_else(|| self.monoid.identity()), self.count)
    }
}

impl<M: Monoid> Fiba<M> {
    /// Empty window. `min_arity` must be at least 2; nodes hold up to `2 * min_arity` children.
    pub fn new(monoid: M, min_arity: usize) -> Result<Self, FibaError> {
        if min_arity < 2 {
            return Err(FibaError::MinArity(min_arity));
        }
        let mut pool = NodePool::new(2 * min_arity);
        let root = pool.alloc(monoid.identity());
        pool[root].left_spine = true;
        pool[root].right_spine = true;
        Ok(Fiba {
            monoid,
            pool,
            root,
            left_finger: root,
            right_finger: root,
            min_arity,
            visits: Cell::new(0),
            combines: Cell::new(0),
            push_base: 0,
            scratch: InsertScratch::new(2 * min_arity),
        })
    }

    pub fn monoid(&self) -> &M {
        &self.monoid
    }

    pub fn min_arity(&self) -> usize {
        self.min_arity
    }

    pub fn max_arity(&self) -> usize {
        2 * self.min_arity
    }

    /// Ordered aggregate of the whole window.
    pub fn query(&self) -> M::Value {
        self.visit(1);
        let root = &self.pool[self.root];
        if root.is_leaf() {
            return root.agg.clone();
        }
        self.visit(2);
        let lf = &self.pool[self.left_finger].agg;
        let rf = &self.pool[self.right_finger].agg;
        let head = self.op(lf, &root.agg);
        self.op(&head, rf)
    }

    pub fn size(&self) -> usize {
        let root = &self.pool[self.root];
        if root.is_leaf() {
            return root.count as usize;
        }
        (self.pool[self.left_finger].count + root.count + self.pool[self.right_finger].count) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.pool[self.root].times.is_empty()
    }

    pub fn oldest_time(&self) -> Option<Timestamp> {
        self.pool[self.left_finger].times.first().copied()
    }

    pub fn youngest_time(&self) -> Option<Timestamp> {
        self.pool[self.right_finger].times.last().copied()
    }

    /// Inserts one entry, combining with an existing entry at the same time.
    pub fn insert(&mut self, t: Timestamp, v: M::Value) {
        self.bulk_insert(Bulk::single(t, v));
    }

    /// Evicts the oldest entry. No-op on an empty window.
    pub fn evict(&mut self) {
        if let Some(t) = self.oldest_time() {
            self.bulk_evict(t);
        }
    }

    pub fn counters(&self) -> OpCounters {
        OpCounters {
            nodes_visited: self.visits.get(),
            combines: self.combines.get(),
            free_pushes: self.pool.stats().pushes - self.push_base,
        }
    }

    pub fn reset_counters(&mut self) {
        self.visits.set(0);
        self.combines.set(0);
        self.push_base = self.pool.stats().pushes;
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn left_finger(&self) -> NodeId {
        self.left_finger
    }

    pub fn right_finger(&self) -> NodeId {
        self.right_finger
    }

    pub fn node(&self, id: NodeId) -> NodeView<'_, M::Value> {
        NodeView { node: &self.pool[id] }
    }

    /// Number of edges from the root to any leaf.
    pub fn height(&self) -> usize {
        let mut h = 0;
        let mut id = self.root;
        while let Some(&c) = self.pool[id].children.first() {
            id = c;
            h += 1;
        }
        h
    }

    pub fn agg_kind(&self, id: NodeId) -> AggKind {
        let n = &self.pool[id];
        if id == self.root {
            AggKind::Inner
        } else if n.left_spine {
            AggKind::Left
        } else if n.right_spine {
            AggKind::Right
        } else {
            AggKind::Up
        }
    }

    /// Entries in timestamp order.
    pub fn entries(&self) -> Vec<(Timestamp, M::Value)> {
        let mut out = Vec::with_capacity(self.size());
        self.collect(self.root, &mut out);
        out
    }

    fn collect(&self, id: NodeId, out: &mut Vec<(Timestamp, M::Value)>) {
        let n = &self.pool[id];
        for i in 0..n.arity() {
            if let Some(&c) = n.children.get(i) {
                self.collect(c, out);
            }
            if i < n.times.len() {
                out.push((n.times[i], n.values[i].clone()));
            }
        }
    }

    /// One `time\tvalue` line per entry, oldest first.
    pub fn dump(&self) -> String
    where
        M::Value: Debug,
    {
        let mut s = String::new();
        for (t, v) in self.entries() {
            let _ = writeln!(s, "{t}\t{v:?}");
        }
        s
    }

    pub fn pool_stats(&self) -> PoolStats {
        self.pool.stats()
    }

    pub fn free_list_len(&self) -> usize {
        self.pool.deferred_len()
    }

    /// Nodes parked on the free list, including their not yet released descendants.
    pub fn free_list_reachable(&self) -> usize {
        self.pool.deferred_reachable()
    }

    /// Releases every parked node now.
    pub fn drain_free_list(&mut self) {
        self.pool.drain();
    }

    /// Nodes reachable from the root.
    pub fn live_nodes(&self) -> usize {
        let mut stack = vec![self.root];
        let mut n = 0;
        while let Some(id) = stack.pop() {
            n += 1;
            stack.extend_from_slice(&self.pool[id].children);
        }
        n
    }

    #[inline]
    pub(crate) fn visit(&self, n: u64) {
        self.visits.set(self.visits.get() + n);
    }

    #[inline]
    pub(crate) fn op(&self, a: &M::Value, b: &M::Value) -> M::Value {
        self.combines.set(self.combines.get() + 1);
        self.monoid.combine(a, b)
    }

    /// Recomputes `agg` and `count` of `id` for its current kind.
    ///
    /// Up and Inner read the children; Left and Right also read the parent.
    pub(crate) fn recompute(&mut self, id: NodeId) {
        self.visit(1);
        let kind = self.agg_kind(id);
        let (agg, count) = {
            let n = &self.pool[id];
            let mut acc = Acc {
                monoid: &self.monoid,
                combines: &self.combines,
                agg: None,
                count: 0,
            };
            match kind {
                AggKind::Up => self.push_up(n, &mut acc),
                AggKind::Inner => self.push_inner(n, &mut acc),
                AggKind::Left => {
                    self.push_inner(n, &mut acc);
                    if let Some(&c) = n.children.last() {
                        let c = &self.pool[c];
                        acc.push(&c.agg, c.count);
                    }
                    self.push_parent(n, &mut acc);
                }
                AggKind::Right => {
                    self.push_parent(n, &mut acc);
                    if let Some(&c) = n.children.first() {
                        let c = &self.pool[c];
                        acc.push(&c.agg, c.count);
                    }
                    self.push_inner(n, &mut acc);
                }
            }
            acc.finish()
        };
        let n = &mut self.pool[id];
        n.agg = agg;
        n.count = count;
    }

    fn push_up(&self, n: &Node<M::Value>, acc: &mut Acc<'_, M>) {
        for i in 0..n.arity() {
            if let Some(&c) = n.children.get(i) {
                let c = &self.pool[c];
                acc.push(&c.agg, c.count);
            }
            if let Some(v) = n.values.get(i) {
                acc.push(v, 1);
            }
        }
    }

    fn push_inner(&self, n: &Node<M::Value>, acc: &mut Acc<'_, M>) {
        let leaf = n.is_leaf();
        for (i, v) in n.values.iter().enumerate() {
            if i > 0 && !leaf {
                let c = &self.pool[n.children[i]];
                acc.push(&c.agg, c.count);
            }
            acc.push(v, 1);
        }
    }

    fn push_parent(&self, n: &Node<M::Value>, acc: &mut Acc<'_, M>) {
        let p = n.parent.expect("spine node below the root has a parent");
        if p != self.root {
            let p = &self.pool[p];
            acc.push(&p.agg, p.count);
        }
    }

    /// Resets spine flags and aggregates from `top` down one spine.
    ///
    /// `top`'s parent must already be current. Also moves the finger.
    pub(crate) fn repair_spine(&mut self, top: NodeId, left: bool) {
        let mut id = top;
        loop {
            {
                let n = &mut self.pool[id];
                if left {
                    n.left_spine = true;
                } else {
                    n.right_spine = true;
                }
            }
            self.recompute(id);
            let n = &self.pool[id];
            let next = if left {
                n.children.first()
            } else {
                n.children.last()
            };
            match next {
                Some(&c) => id = c,
                None => break,
            }
        }
        if left {
            self.left_finger = id;
        } else {
            self.right_finger = id;
        }
    }

    /// Replaces the root with `id`, detached from any parent.
    pub(crate) fn set_root(&mut self, id: NodeId) {
        let n = &mut self.pool[id];
        n.parent = None;
        n.left_spine = true;
        n.right_spine = true;
        self.root = id;
    }

    /// Recomputes every flag, finger and aggregate from scratch.
    #[cfg(test)]
    pub(crate) fn rebuild_all(&mut self) {
        fn up<M: Monoid>(t: &mut Fiba<M>, id: NodeId) {
            let children = t.pool[id].children.clone();
            for &c in &children {
                t.pool[c].parent = Some(id);
                t.pool[c].left_spine = false;
                t.pool[c].right_spine = false;
                up(t, c);
            }
            t.recompute(id);
        }
        let root = self.root;
        self.set_root(root);
        up(self, root);
        self.repair_spine(root, true);
        self.repair_spine(root, false);
    }
}

impl<M: Monoid> Debug for Fiba<M>
where
    M::Value: Debug,
{
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn rec<M: Monoid>(
            t: &Fiba<M>,
            id: NodeId,
            depth: usize,
            f: &mut std::fmt::Formatter<'_>,
        ) -> std::fmt::Result
        where
            M::Value: Debug,
        {
            let n = &t.pool[id];
            writeln!(
                f,
                "{:indent$}{id:?} {:?} {:?} agg={:?}",
                "",
                t.agg_kind(id),
                n.times,
                n.agg,
                indent = depth * 2
            )?;
            for &c in &n.children {
                rec(t, c, depth + 1, f)?;
            }
            Ok(())
        }
        rec(self, self.root, 0, f)
    }
}


#[cfg(test)]
mod tests {
    use super::fixture::{build, Shape};
    use super::*;
    use crate::{Concat, Max, Sum};

    #[test]
    fn rejects_small_arity() {
        assert_eq!(Fiba::new(Sum, 1).err(), Some(FibaError::MinArity(1)));
        assert_eq!(Fiba::new(Sum, 2).unwrap().max_arity(), 4);
    }

    #[test]
    fn empty_window() {
        let t = Fiba::new(Sum, 4).unwrap();
        assert_eq!(t.query(), 0);
        assert_eq!(t.size(), 0);
        assert_eq!(t.oldest_time(), None);
        assert!(t.is_empty());
    }

    #[test]
    fn max_over_three() {
        let mut t = Fiba::new(Max, 2).unwrap();
        t.insert(1, 4);
        t.insert(2, 2);
        t.insert(3, 5);
        assert_eq!(t.query(), 5);
    }

    #[test]
    fn out_of_order_extremes() {
        let mut t = Fiba::new(Sum, 2).unwrap();
        for ts in [5, 3, 9] {
            t.insert(ts, 1);
        }
        assert_eq!((t.oldest_time(), t.youngest_time()), (Some(3), Some(9)));
        t.bulk_evict(5);
        assert_eq!((t.oldest_time(), t.size()), (Some(9), 1));
    }

    #[test]
    fn collision_combines_in_arrival_order() {
        let mut t = Fiba::new(Concat, 2).unwrap();
        t.insert(7, b"a".to_vec());
        t.insert(7, b"b".to_vec());
        assert_eq!(t.entries(), vec![(7, b"ab".to_vec())]);
    }

    fn letters(ts: Timestamp) -> Vec<u8> {
        vec![b'a' + (ts % 26) as u8]
    }

    /// Three levels, shaped like the classic illustration with letters `a..`.
    fn sample() -> Fiba<Concat> {
        use Shape::*;
        build(
            Concat,
            2,
            Inner(
                vec![6, 14],
                vec![
                    Inner(vec![2], vec![Leaf(vec![0, 1]), Leaf(vec![3, 4, 5])]),
                    Inner(vec![9, 11], vec![Leaf(vec![7, 8]), Leaf(vec![10]), Leaf(vec![12, 13])]),
                    Inner(vec![17], vec![Leaf(vec![15, 16]), Leaf(vec![18, 19, 20])]),
                ],
            ),
            letters,
        )
    }

    #[test]
    fn location_sensitive_kinds_and_aggregates() {
        let t = sample();
        assert!(t.validate().is_empty());
        let root = t.root();
        assert_eq!(t.agg_kind(root), AggKind::Inner);
        assert_eq!(t.agg_kind(t.left_finger()), AggKind::Left);
        assert_eq!(t.agg_kind(t.right_finger()), AggKind::Right);
        let middle = t.node(root).children()[1];
        assert_eq!(t.agg_kind(middle), AggKind::Up);
        // root: own values plus the middle child only
        assert_eq!(t.node(root).agg(), b"ghijklmno");
        // left finger: own values, then everything up to the root's first value
        assert_eq!(t.node(t.left_finger()).agg(), b"abcdef");
        assert_eq!(t.node(t.right_finger()).agg(), b"pqrstu");
        assert_eq!(t.query(), b"abcdefghijklmnopqrstu");
    }

    #[test]
    fn query_visits_three_nodes() {
        let t = sample();
        let mut t = t;
        t.reset_counters();
        t.query();
        let c = t.counters();
        assert_eq!(c.nodes_visited, 3);
        assert!(c.combines <= 2);
    }

    #[test]
    fn size_counts_entries() {
        let t = sample();
        assert_eq!(t.size(), 21);
        assert_eq!(t.height(), 2);
    }
}
