use std::collections::HashMap;
use std::fmt::Debug;

use crate::monoid::Monoid;
use crate::pool::NodeId;
use crate::tree::{AggKind, Fiba};
use crate::Timestamp;

/// One broken invariant found by [`Fiba::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// Leaf at a different depth than the left finger.
    Height { node: NodeId, depth: usize, expected: usize },
    /// Timestamps out of order within a node or against the bounds set by ancestors.
    Order { node: NodeId },
    Arity { node: NodeId, arity: usize },
    /// Child and value sequences disagree with the entry count.
    Shape { node: NodeId },
    Parent { node: NodeId },
    SpineFlag { node: NodeId, left: bool },
    Finger { left: bool },
    Aggregate { node: NodeId, kind: AggKind },
    Count { node: NodeId },
}

struct Walk<'a, M: Monoid> {
    tree: &'a Fiba<M>,
    out: Vec<Violation>,
    leaf_depth: usize,
    up: HashMap<NodeId, (M::Value, u64)>,
}

impl<M: Monoid> Fiba<M>
where
    M::Value: PartialEq + Debug,
{
    /// Checks every structural and aggregate invariant from scratch. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut leaf_depth = 0;
        let mut id = self.root;
        while let Some(&c) = self.pool[id].children.first() {
            id = c;
            leaf_depth += 1;
        }
        let mut w = Walk {
            tree: self,
            out: Vec::new(),
            leaf_depth,
            up: HashMap::new(),
        };
        w.memo_up(self.root);
        if self.pool[self.root].parent.is_some() {
            w.out.push(Violation::Parent { node: self.root });
        }
        let id = self.root;
        let identity = self.monoid.identity();
        w.check(id, 0, None, None, (true, true), (&identity, 0), (&identity, 0));
        for left in [true, false] {
            let mut id = self.root;
            loop {
                let n = &self.pool[id];
                let next = if left { n.children.first() } else { n.children.last() };
                match next {
                    Some(&c) => id = c,
                    None => break,
                }
            }
            let finger = if left { self.left_finger } else { self.right_finger };
            if finger != id {
                w.out.push(Violation::Finger { left });
            }
        }
        w.out
    }
}

impl<M: Monoid> Walk<'_, M>
where
    M::Value: PartialEq + Debug,
{
    /// Up aggregate and entry count of every subtree, bottom-up.
    fn memo_up(&mut self, id: NodeId) {
        let t = self.tree;
        let n = &t.pool[id];
        let mut parts = Vec::new();
        let mut count = n.times.len() as u64;
        for i in 0..n.arity() {
            if let Some(&c) = n.children.get(i) {
                self.memo_up(c);
                let (a, k) = self.fold_up(c);
                parts.push(a);
                count += k;
            }
            if let Some(v) = n.values.get(i) {
                parts.push(v.clone());
            }
        }
        self.up.insert(id, (t.monoid.fold(&parts), count));
    }

    fn fold_up(&self, id: NodeId) -> (M::Value, u64) {
        self.up[&id].clone()
    }

    fn fold_inner(&self, id: NodeId) -> (M::Value, u64) {
        let t = self.tree;
        let n = &t.pool[id];
        let mut parts = Vec::new();
        let mut count = n.times.len() as u64;
        for (i, v) in n.values.iter().enumerate() {
            if i > 0 && !n.is_leaf() {
                let (a, k) = self.fold_up(n.children[i]);
                parts.push(a);
                count += k;
            }
            parts.push(v.clone());
        }
        (t.monoid.fold(&parts), count)
    }

    /// `left_ctx`/`right_ctx` carry the parent's expected Left/Right aggregate,
    /// already replaced by the identity when the parent is the root.
    #[allow(clippy::too_many_arguments)]
    fn check(
        &mut self,
        id: NodeId,
        depth: usize,
        lo: Option<Timestamp>,
        hi: Option<Timestamp>,
        spine: (bool, bool),
        left_ctx: (&M::Value, u64),
        right_ctx: (&M::Value, u64),
    ) {
        let t = self.tree;
        let n = &t.pool[id];
        let is_root = id == t.root;
        let mu = t.min_arity;

        if n.values.len() != n.times.len() || (!n.is_leaf() && n.children.len() != n.arity()) {
            self.out.push(Violation::Shape { node: id });
            return;
        }
        let arity = n.arity();
        let arity_ok = if is_root {
            arity <= 2 * mu && (n.is_leaf() || arity >= 2)
        } else {
            (mu..=2 * mu).contains(&arity)
        };
        if !arity_ok {
            self.out.push(Violation::Arity { node: id, arity });
        }
        let sorted = n.times.windows(2).all(|w| w[0] < w[1]);
        let bounded = n.times.iter().all(|&x| lo.is_none_or(|l| x > l) && hi.is_none_or(|h| x < h));
        if !sorted || !bounded {
            self.out.push(Violation::Order { node: id });
        }
        if n.is_leaf() && depth != self.leaf_depth {
            self.out.push(Violation::Height {
                node: id,
                depth,
                expected: self.leaf_depth,
            });
        }
        if n.left_spine != spine.0 {
            self.out.push(Violation::SpineFlag { node: id, left: true });
        }
        if n.right_spine != spine.1 {
            self.out.push(Violation::SpineFlag { node: id, left: false });
        }

        let kind = if is_root {
            AggKind::Inner
        } else if spine.0 {
            AggKind::Left
        } else if spine.1 {
            AggKind::Right
        } else {
            AggKind::Up
        };
        let (expected, count) = match kind {
            AggKind::Up => self.fold_up(id),
            AggKind::Inner => self.fold_inner(id),
            AggKind::Left => {
                let (inner, mut k) = self.fold_inner(id);
                let mut parts = vec![inner];
                if let Some(&c) = n.children.last() {
                    let (a, kc) = self.fold_up(c);
                    parts.push(a);
                    k += kc;
                }
                parts.push(left_ctx.0.clone());
                (t.monoid.fold(&parts), k + left_ctx.1)
            }
            AggKind::Right => {
                let mut parts = vec![right_ctx.0.clone()];
                let mut k = right_ctx.1;
                if let Some(&c) = n.children.first() {
                    let (a, kc) = self.fold_up(c);
                    parts.push(a);
                    k += kc;
                }
                let (inner, ki) = self.fold_inner(id);
                parts.push(inner);
                (t.monoid.fold(&parts), k + ki)
            }
        };
        if n.agg != expected {
            self.out.push(Violation::Aggregate { node: id, kind });
        }
        if n.count != count {
            self.out.push(Violation::Count { node: id });
        }

        let identity = t.monoid.identity();
        let (lc, rc) = if is_root {
            ((&identity, 0), (&identity, 0))
        } else {
            ((&expected, count), (&expected, count))
        };
        let last = n.children.len().saturating_sub(1);
        for (i, &c) in n.children.iter().enumerate() {
            if t.pool[c].parent != Some(id) {
                self.out.push(Violation::Parent { node: c });
            }
            let clo = if i == 0 { lo } else { Some(n.times[i - 1]) };
            let chi = if i == last { hi } else { Some(n.times[i]) };
            let cs = (spine.0 && i == 0, spine.1 && i == last);
            self.check(
                c,
                depth + 1,
                clo,
                chi,
                cs,
                if cs.0 { lc } else { (&identity, 0) },
                if cs.1 { rc } else { (&identity, 0) },
            );
        }
    }
}
