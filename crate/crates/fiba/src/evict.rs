//! Bulk eviction.
//!
//! Step one walks up from the left finger and back down to find the
//! boundary. Step two evicts level by level from the bottom, fixing
//! underflow with a batch move or a merge into the neighbour, then keeps
//! repairing underflow above the boundary. Step three repairs the spines.

use crate::monoid::Monoid;
use crate::pool::NodeId;
use crate::tree::Fiba;
use crate::Timestamp;

/// One level of the eviction boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryTriple {
    /// Node straddling the boundary at this level.
    pub node: NodeId,
    /// Least common ancestor of `node` and `neighbor`.
    pub ancestor: Option<NodeId>,
    /// Next node to the right on the same level; `None` on the right spine.
    pub neighbor: Option<NodeId>,
    /// Index of `ancestor` in the boundary list; `None` when it sits above the top.
    ancestor_at: Option<usize>,
}

impl<M: Monoid> Fiba<M> {
    /// Removes every entry with time `<= t`.
    pub fn bulk_evict(&mut self, t: Timestamp) {
        self.visit(1);
        let Some(oldest) = self.oldest_time() else {
            return;
        };
        if t < oldest {
            return;
        }
        self.visit(1);
        if t >= self.youngest_time().unwrap() {
            self.pool.defer_free(self.root);
            let root = self.pool.alloc(self.monoid.identity());
            self.set_root(root);
            self.left_finger = root;
            self.right_finger = root;
            return;
        }

        let boundary = self.search_boundary(t);
        let mu = self.min_arity;
        let top_level = boundary.len();
        let mut left_top = (0, boundary[0].node);
        let mut right_top = None;
        let mut dirty: Option<NodeId> = None;
        let mut repair_from = None;
        let mut shrunk = false;

        let mut i = 0;
        while i < boundary.len() {
            let tri = boundary[i];
            let x = tri.node;
            self.local_evict(x, t);
            let Some(nb) = tri.neighbor else {
                self.shrink_root(x);
                shrunk = true;
                break;
            };
            let anc = tri.ancestor.unwrap();
            let anc_level = tri.ancestor_at.unwrap_or(top_level);
            let mut nb_changed = dirty.is_some_and(|d| self.pool[d].parent == Some(nb));
            let arity = self.pool[x].arity();
            if arity < mu {
                let deficit = mu - arity;
                let surplus = self.pool[nb].arity() - mu;
                if deficit <= surplus {
                    self.move_batch(x, nb, anc, deficit);
                    nb_changed = true;
                    left_top = left_top.max((anc_level, anc));
                } else {
                    self.merge_not_sibling(x, nb, anc);
                    left_top = left_top.max((anc_level, anc));
                    dirty = None;
                    if anc_level == top_level {
                        repair_from = Some(anc);
                        break;
                    }
                    i = anc_level;
                    continue;
                }
            } else {
                left_top = left_top.max((i, x));
            }
            dirty = None;
            if nb_changed {
                if self.pool[nb].right_spine {
                    right_top = Some(nb);
                } else {
                    self.recompute(nb);
                    dirty = Some(nb);
                }
            }
            i += 1;
        }

        let left_top = if shrunk {
            right_top = Some(self.root);
            self.root
        } else if let Some(cur) = repair_from {
            let (top, rt) = self.repair_above(cur);
            right_top = rt.or(right_top);
            top
        } else {
            left_top.1
        };
        self.repair_spine(left_top, true);
        if let Some(rt) = right_top {
            self.repair_spine(rt, false);
        }
    }

    /// Boundary triples from the lowest level upward.
    ///
    /// The window must be nonempty and `t` at least the oldest time.
    pub fn search_boundary(&self, t: Timestamp) -> Vec<BoundaryTriple> {
        let mut top = self.left_finger;
        self.visit(1);
        while top != self.root && t >= *self.pool[top].times.last().unwrap() {
            top = self.pool[top].parent.unwrap();
            self.visit(1);
        }
        let (anc, nb) = match self.pool[top].parent {
            Some(p) => {
                self.visit(1);
                (Some(p), Some(self.pool[p].children[1]))
            }
            None => (None, None),
        };
        let mut list = vec![BoundaryTriple {
            node: top,
            ancestor: anc,
            neighbor: nb,
            ancestor_at: None,
        }];
        let mut x = top;
        loop {
            let n = &self.pool[x];
            let j = n.times.partition_point(|&u| u <= t);
            if (j > 0 && n.times[j - 1] == t) || n.is_leaf() {
                break;
            }
            let last = *list.last().unwrap();
            let next = if j < n.times.len() {
                BoundaryTriple {
                    node: n.children[j],
                    ancestor: Some(x),
                    neighbor: Some(n.children[j + 1]),
                    ancestor_at: Some(list.len() - 1),
                }
            } else {
                BoundaryTriple {
                    node: n.children[j],
                    ancestor: last.ancestor,
                    neighbor: last.neighbor.map(|b| {
                        self.visit(1);
                        self.pool[b].children[0]
                    }),
                    ancestor_at: last.ancestor_at,
                }
            };
            self.visit(1);
            list.push(next);
            x = next.node;
        }
        let len = list.len();
        list.reverse();
        for tri in &mut list {
            tri.ancestor_at = tri.ancestor_at.map(|a| len - 1 - a);
        }
        list
    }

    /// Drops the prefix of entries `<= t` and, for internal nodes, the children left of each.
    pub(crate) fn local_evict(&mut self, x: NodeId, t: Timestamp) {
        self.visit(1);
        let n = &mut self.pool[x];
        let k = n.times.partition_point(|&u| u <= t);
        if k == 0 {
            return;
        }
        n.times.drain(..k);
        n.values.drain(..k);
        if !n.is_leaf() {
            self.pool.defer_children_prefix(x, k);
        }
    }

    /// Refills an underflowing node from its neighbour through the ancestor.
    pub(crate) fn move_batch(&mut self, x: NodeId, nb: NodeId, anc: NodeId, k: usize) {
        self.visit(3);
        debug_assert!(k >= 1 && self.pool[nb].arity() - self.min_arity >= k);
        let [n, b, a] = self.pool.get3(x, nb, anc);
        let ai = a.times.iter().rposition(|&u| u < b.times[0]).unwrap();
        std::mem::swap(&mut a.times[ai], &mut b.times[k - 1]);
        std::mem::swap(&mut a.values[ai], &mut b.values[k - 1]);
        b.times[..k].rotate_right(1);
        b.values[..k].rotate_right(1);
        n.times.extend(b.times.drain(..k));
        n.values.extend(b.values.drain(..k));
        if !n.is_leaf() {
            let start = n.children.len();
            n.children.extend(b.children.drain(..k));
            let end = n.children.len();
            self.pool.set_parent_all(start..end, x);
        }
    }

    /// Prepends what is left of `x` plus the ancestor's separator to the neighbour.
    pub(crate) fn merge_not_sibling(&mut self, x: NodeId, nb: NodeId, anc: NodeId) {
        self.visit(3);
        let [n, b, a] = self.pool.get3(x, nb, anc);
        let ai = a.times.iter().rposition(|&u| u < b.times[0]).unwrap();
        let sep_t = a.times[ai];
        let sep_v = a.values.drain(..=ai).next_back().unwrap();
        a.times.drain(..=ai);
        n.times.push(sep_t);
        n.values.push(sep_v);
        n.times.append(&mut b.times);
        n.values.append(&mut b.values);
        std::mem::swap(&mut n.times, &mut b.times);
        std::mem::swap(&mut n.values, &mut b.values);
        let moved = n.children.len();
        n.children.append(&mut b.children);
        std::mem::swap(&mut n.children, &mut b.children);
        debug_assert!(b.arity() <= 2 * self.min_arity);
        self.pool.set_parent_all(0..moved, nb);
        self.pool.defer_children_prefix(anc, ai + 1);
    }

    /// Makes `x` (or its only child) the root once nothing to its right remains at its level.
    pub(crate) fn shrink_root(&mut self, x: NodeId) {
        let old = self.root;
        let n = &self.pool[x];
        let new_root = if !n.is_leaf() && n.arity() == 1 {
            let c = n.children[0];
            self.pool[x].children.clear();
            if x == old {
                self.pool.defer_free(old);
            }
            c
        } else {
            if x != old {
                let p = n.parent.unwrap();
                let popped = self.pool[p].children.pop();
                debug_assert_eq!(popped, Some(x));
            }
            x
        };
        if x != old {
            self.pool.defer_free(old);
        }
        self.set_root(new_root);
    }

    /// Fixes underflow on the left spine above the boundary.
    ///
    /// Returns the highest modified left-spine node and, if the root changed, the new root
    /// as the right-spine repair start.
    fn repair_above(&mut self, mut cur: NodeId) -> (NodeId, Option<NodeId>) {
        let mu = self.min_arity;
        loop {
            self.visit(1);
            let n = &self.pool[cur];
            if cur == self.root {
                if !n.is_leaf() && n.arity() == 1 {
                    let c = n.children[0];
                    self.pool[cur].children.clear();
                    self.pool.defer_free(cur);
                    self.set_root(c);
                    return (c, Some(c));
                }
                return (cur, None);
            }
            if n.arity() >= mu {
                return (cur, None);
            }
            let p = n.parent.unwrap();
            let nb = self.pool[p].children[1];
            let deficit = mu - n.arity();
            let surplus = self.pool[nb].arity() - mu;
            if deficit <= surplus {
                self.move_batch(cur, nb, p, deficit);
                if self.pool[nb].right_spine {
                    return (p, Some(nb));
                }
                self.recompute(nb);
                return (p, None);
            }
            self.merge_not_sibling(cur, nb, p);
            cur = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::fixture::{build, Shape};
    use crate::{Bulk, Sum};

    fn ident(t: Timestamp) -> i64 {
        t as i64
    }

    #[test]
    fn local_evict_leaf_prefix() {
        use Shape::*;
        let mut t = build(Sum, 2, Leaf(vec![22, 23, 26]), ident);
        let r = t.root();
        t.local_evict(r, 24);
        assert_eq!(t.node(r).times(), [26]);
        t.local_evict(r, 10);
        assert_eq!(t.node(r).times(), [26]);
    }

    #[test]
    fn evict_prefix_of_small_window() {
        let mut t = Fiba::new(Sum, 2).unwrap();
        let ts = [1, 2, 3, 4, 5, 100, 200, 300, 400, 500, 600];
        t.bulk_insert(Bulk::new(ts.iter().map(|&x| (x, x as i64)).collect()).unwrap());
        t.bulk_evict(10);
        assert_eq!(t.size(), 6);
        assert_eq!(t.query(), 2100);
        assert_eq!(t.validate(), vec![]);
    }

    #[test]
    fn evict_below_and_above_window() {
        let mut t = Fiba::new(Sum, 2).unwrap();
        t.bulk_insert(Bulk::new((10..50).map(|x| (x, 1)).collect()).unwrap());
        t.reset_counters();
        t.bulk_evict(5);
        assert_eq!(t.size(), 40);
        assert_eq!(t.counters().free_pushes, 0);
        t.bulk_evict(49);
        assert!(t.is_empty());
        assert_eq!(t.query(), 0);
        assert_eq!(t.validate(), vec![]);
        t.evict();
        assert!(t.is_empty());
    }

    /// Batch move one level above the leaves: separator 26 drops in, 29 rotates up.
    #[test]
    fn batch_move_through_ancestor() {
        use Shape::*;
        let mut t = build(
            Sum,
            2,
            Inner(
                vec![26],
                vec![
                    Inner(vec![20, 23], vec![Leaf(vec![18, 19]), Leaf(vec![21, 22]), Leaf(vec![24, 25])]),
                    Inner(
                        vec![29, 32, 35],
                        vec![Leaf(vec![27, 28]), Leaf(vec![30, 31]), Leaf(vec![33, 34]), Leaf(vec![36, 37])],
                    ),
                ],
            ),
            ident,
        );
        let node = t.node(t.root()).children()[0];
        let bnd = t.search_boundary(24);
        assert_eq!(bnd.len(), 3);
        assert_eq!(bnd[1].node, node);
        assert_eq!(bnd[1].ancestor, Some(t.root()));
        assert_eq!(bnd[0].ancestor, Some(t.root()));
        t.bulk_evict(24);
        assert_eq!(t.validate(), vec![]);
        assert_eq!(t.node(node).times(), [26]);
        assert_eq!(t.node(t.root()).times(), [29]);
        assert_eq!(t.entries().first().unwrap().0, 25);
    }

    /// Neighbour has no surplus, so the remnant merges into it and the root collapses.
    #[test]
    fn merge_into_neighbour() {
        use Shape::*;
        let mut t = build(
            Sum,
            2,
            Inner(
                vec![28],
                vec![
                    Inner(vec![20, 23], vec![Leaf(vec![18, 19]), Leaf(vec![21, 22]), Leaf(vec![24, 25, 26])]),
                    Inner(vec![31], vec![Leaf(vec![29, 30]), Leaf(vec![32, 33])]),
                ],
            ),
            ident,
        );
        let nb = t.node(t.root()).children()[1];
        t.bulk_evict(25);
        assert_eq!(t.validate(), vec![]);
        assert_eq!(t.root(), nb);
        assert_eq!(t.node(nb).times(), [28, 31]);
        assert_eq!(t.node(nb).arity(), 3);
    }

    /// Exact match three levels up leaves an entry-less root with one child, which takes over.
    #[test]
    fn single_child_becomes_root() {
        use Shape::*;
        let left = Inner(
            vec![50],
            vec![
                Inner(vec![20], vec![Leaf(vec![10, 11]), Leaf(vec![30, 31])]),
                Inner(vec![70], vec![Leaf(vec![60, 61]), Leaf(vec![80, 81])]),
            ],
        );
        let right = Inner(
            vec![150],
            vec![
                Inner(vec![120], vec![Leaf(vec![110, 111]), Leaf(vec![130, 131])]),
                Inner(vec![170], vec![Leaf(vec![160, 161]), Leaf(vec![180, 181])]),
            ],
        );
        let mut t = build(Sum, 2, Inner(vec![107], vec![left, right]), ident);
        let survivor = t.node(t.root()).children()[1];
        assert_eq!(t.height(), 3);
        let bnd = t.search_boundary(107);
        assert_eq!(bnd.len(), 1);
        t.bulk_evict(107);
        assert_eq!(t.root(), survivor);
        assert_eq!(t.height(), 2);
        assert_eq!(t.validate(), vec![]);
    }

    #[test]
    fn right_spine_node_becomes_root() {
        use Shape::*;
        let mut t = build(
            Sum,
            2,
            Inner(
                vec![10],
                vec![Leaf(vec![1, 2]), Leaf(vec![11, 12, 13, 14])],
            ),
            ident,
        );
        let rf = t.right_finger();
        t.bulk_evict(11);
        assert_eq!(t.root(), rf);
        assert_eq!(t.node(rf).times(), [12, 13, 14]);
        assert_eq!(t.validate(), vec![]);
    }

    #[test]
    fn boundary_at_youngest_has_no_neighbours() {
        let mut t = Fiba::new(Sum, 2).unwrap();
        t.bulk_insert(Bulk::new((0..200).map(|x| (x, 1)).collect()).unwrap());
        let bnd = t.search_boundary(199);
        assert!(bnd.iter().all(|b| b.neighbor.is_none()));
    }

    #[test]
    fn move_for_every_deficit() {
        // leaf-level neighbour with arity 2*mu gives surplus mu; evicting j entries
        // from a minimal left leaf produces deficit j - ... up to mu
        for mu in 2..=5usize {
            for evicted in 1..mu {
                use Shape::*;
                let left: Vec<u64> = (0..mu as u64 - 1).collect();
                let right: Vec<u64> = (101..100 + 2 * mu as u64).collect();
                let mut t = build(Sum, mu, Inner(vec![50], vec![Leaf(left.clone()), Leaf(right)]), ident);
                t.bulk_evict(left[evicted - 1]);
                assert_eq!(t.validate(), vec![], "mu={mu} evicted={evicted}");
                let lf = t.left_finger();
                assert_eq!(t.node(lf).arity(), mu);
            }
        }
    }
}
