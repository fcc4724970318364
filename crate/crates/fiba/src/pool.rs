//! Node arena with a deferred free list.
//!
//! Dead subtrees are never freed recursively. Evicting code parks the roots
//! of dead subtrees on the free list; each later allocation pops one node,
//! parks that node's children in turn and reuses its storage.

use std::ops::{Index, IndexMut};

use crate::Timestamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug)]
pub(crate) struct Node<V> {
    pub times: Vec<Timestamp>,
    pub values: Vec<V>,
    pub children: Vec<NodeId>,
    pub parent: Option<NodeId>,
    pub left_spine: bool,
    pub right_spine: bool,
    pub agg: V,
    /// Entry count with the same location-sensitive shape as `agg`.
    pub count: u64,
}

impl<V> Node<V> {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    #[inline]
    pub fn arity(&self) -> usize {
        self.times.len() + 1
    }

    pub fn child_index(&self, child: NodeId) -> usize {
        self.children
            .iter()
            .position(|&c| c == child)
            .expect("child not linked under its parent")
    }
}

/// Lifetime counters for a pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PoolStats {
    /// Nodes handed out, fresh or recycled.
    pub allocations: u64,
    /// Nodes whose storage returned to the pool, either reused or drained.
    pub releases: u64,
    /// Pushes onto the deferred free list.
    pub pushes: u64,
    /// Slots ever created.
    pub fresh: u64,
}

#[derive(Debug)]
pub(crate) struct NodePool<V> {
    nodes: Vec<Node<V>>,
    deferred: Vec<NodeId>,
    vacant: Vec<NodeId>,
    max_arity: usize,
    stats: PoolStats,
}

impl<V> NodePool<V> {
    pub(crate) fn new(max_arity: usize) -> Self {
        NodePool {
            nodes: Vec::new(),
            deferred: Vec::new(),
            vacant: Vec::new(),
            max_arity,
            stats: PoolStats::default(),
        }
    }

    pub(crate) fn stats(&self) -> PoolStats {
        self.stats
    }

    pub(crate) fn deferred_len(&self) -> usize {
        self.deferred.len()
    }

    /// Hands out a reset node. Pops at most one deferred node and pushes its children.
    pub(crate) fn alloc(&mut self, agg: V) -> NodeId {
        self.stats.allocations += 1;
        if let Some(id) = self.deferred.pop() {
            self.stats.releases += 1;
            let node = &mut self.nodes[id.idx()];
            self.stats.pushes += node.children.len() as u64;
            self.deferred.extend(node.children.drain(..));
            node.times.clear();
            node.values.clear();
            node.parent = None;
            node.left_spine = false;
            node.right_spine = false;
            node.agg = agg;
            node.count = 0;
            return id;
        }
        if let Some(id) = self.vacant.pop() {
            let node = &mut self.nodes[id.idx()];
            node.agg = agg;
            return id;
        }
        self.stats.fresh += 1;
        let id = NodeId(u32::try_from(self.nodes.len()).expect("node arena exhausted"));
        self.nodes.push(Node {
            times: Vec::with_capacity(self.max_arity - 1),
            values: Vec::with_capacity(self.max_arity - 1),
            children: Vec::with_capacity(self.max_arity),
            parent: None,
            left_spine: false,
            right_spine: false,
            agg,
            count: 0,
        });
        id
    }

    /// Parks a dead subtree root. Its descendants are not touched.
    pub(crate) fn defer_free(&mut self, id: NodeId) {
        debug_assert!(
            self.deferred.len() > 64 || !self.deferred.contains(&id),
            "node {id:?} deferred twice"
        );
        self.stats.pushes += 1;
        self.deferred.push(id);
    }

    /// Removes the first `k` children of `id` and parks them.
    pub(crate) fn defer_children_prefix(&mut self, id: NodeId, k: usize) {
        self.stats.pushes += k as u64;
        let node = &mut self.nodes[id.idx()];
        self.deferred.extend(node.children.drain(..k));
    }

    /// Releases everything reachable from the free list.
    pub(crate) fn drain(&mut self) {
        while let Some(id) = self.deferred.pop() {
            self.stats.releases += 1;
            let node = &mut self.nodes[id.idx()];
            self.stats.pushes += node.children.len() as u64;
            self.deferred.extend(node.children.drain(..));
            node.times.clear();
            node.values.clear();
            node.parent = None;
            node.left_spine = false;
            node.right_spine = false;
            node.count = 0;
            self.vacant.push(id);
        }
    }

    /// Counts nodes reachable from the free list without releasing them.
    pub(crate) fn deferred_reachable(&self) -> usize {
        let mut stack = self.deferred.clone();
        let mut n = 0;
        while let Some(id) = stack.pop() {
            n += 1;
            stack.extend_from_slice(&self.nodes[id.idx()].children);
        }
        n
    }

    pub(crate) fn get3(&mut self, a: NodeId, b: NodeId, c: NodeId) -> [&mut Node<V>; 3] {
        self.nodes
            .get_disjoint_mut([a.idx(), b.idx(), c.idx()])
            .expect("distinct nodes")
    }

    pub(crate) fn set_parent_all(&mut self, children: std::ops::Range<usize>, of: NodeId) {
        for i in children {
            let c = self.nodes[of.idx()].children[i];
            self.nodes[c.idx()].parent = Some(of);
        }
    }
}

impl<V> Index<NodeId> for NodePool<V> {
    type Output = Node<V>;

    #[inline]
    fn index(&self, id: NodeId) -> &Node<V> {
        &self.nodes[id.idx()]
    }
}

impl<V> IndexMut<NodeId> for NodePool<V> {
    #[inline]
    fn index_mut(&mut self, id: NodeId) -> &mut Node<V> {
        &mut self.nodes[id.idx()]
    }
}
