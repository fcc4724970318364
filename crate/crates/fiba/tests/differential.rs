use fiba::{Bulk, Concat, Fiba, Max, Monoid, OracleWindow, Sum};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
enum Op {
    /// Bulk of `len` entries starting behind `back` existing entries, gaps drawn from `gaps`.
    Insert { back: usize, gaps: Vec<u8>, tags: Vec<u8> },
    /// Evict up to the entry at this rank; past the end empties the window.
    Evict { rank: usize, below: bool },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (0usize..400, prop::collection::vec(0u8..4, 1..80), prop::collection::vec(any::<u8>(), 80))
            .prop_map(|(back, gaps, tags)| Op::Insert { back, gaps, tags }),
        1 => (0usize..300, any::<bool>()).prop_map(|(rank, below)| Op::Evict { rank, below }),
    ]
}

fn bulk_for(o: &OracleWindow<Concat>, back: usize, gaps: &[u8], tags: &[u8]) -> Vec<(u64, Vec<u8>)> {
    let n = o.len();
    let back = back.min(n);
    let mut t = if back == n {
        o.oldest_time().map_or(1000, |x| x.saturating_sub(5))
    } else {
        o.entries()[n - back - 1].0
    };
    let mut out = Vec::new();
    for (i, &g) in gaps.iter().enumerate() {
        t += 1 + g as u64;
        let len = 1 + (tags[i] % 8) as usize;
        out.push((t, vec![b'a' + tags[i] % 26; len]));
    }
    out
}

fn evict_time(o: &OracleWindow<Concat>, rank: usize, below: bool) -> u64 {
    if below {
        return o.oldest_time().map_or(0, |t| t.saturating_sub(1));
    }
    match o.entries().get(rank) {
        Some(e) => e.0,
        None => u64::MAX,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matches_oracle(mu in 2usize..6, ops in prop::collection::vec(op(), 1..60)) {
        let mut tree = Fiba::new(Concat, mu).unwrap();
        let mut oracle = OracleWindow::new(Concat);
        for op in &ops {
            match op {
                Op::Insert { back, gaps, tags } => {
                    let bulk = bulk_for(&oracle, *back, gaps, tags);
                    oracle.bulk_insert(&bulk);
                    tree.bulk_insert(Bulk::new(bulk).unwrap());
                }
                Op::Evict { rank, below } => {
                    let t = evict_time(&oracle, *rank, *below);
                    oracle.bulk_evict(t);
                    tree.bulk_evict(t);
                }
            }
            prop_assert_eq!(tree.validate(), vec![]);
            prop_assert_eq!(tree.query(), oracle.query());
            prop_assert_eq!(tree.size(), oracle.len());
        }
        prop_assert_eq!(tree.dump(), oracle.dump());
    }

    #[test]
    fn singleton_bulk_equals_insert(mu in 2usize..5, times in prop::collection::vec(0u64..500, 1..200)) {
        let mut a = Fiba::new(Sum, mu).unwrap();
        let mut b = Fiba::new(Sum, mu).unwrap();
        for &t in &times {
            a.insert(t, t as i64);
            b.bulk_insert(Bulk::single(t, t as i64));
        }
        prop_assert_eq!(a.entries(), b.entries());
        prop_assert_eq!(a.validate(), vec![]);
        prop_assert_eq!(b.validate(), vec![]);
    }

    #[test]
    fn spine_flags_follow_paths(mu in 2usize..5, times in prop::collection::vec(0u64..10_000, 1..400), cut in 0u64..10_000) {
        let mut t = Fiba::new(Max, mu).unwrap();
        t.bulk_insert(Bulk::sort_and_combine(times.iter().map(|&x| (x, x as i64)).collect(), &Max));
        t.bulk_evict(cut);
        let mut on_left = vec![t.root()];
        while let Some(&c) = t.node(*on_left.last().unwrap()).children().first() {
            on_left.push(c);
        }
        prop_assert_eq!(*on_left.last().unwrap(), t.left_finger());
        for id in on_left {
            prop_assert!(t.node(id).left_spine());
        }
        prop_assert_eq!(t.validate(), vec![]);
    }
}

#[test]
fn random_single_inserts_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut t = Fiba::new(Concat, 3).unwrap();
    let mut o = OracleWindow::new(Concat);
    for _ in 0..10_000 {
        let ts = rng.random_range(0..50_000);
        let v = vec![rng.random_range(b'a'..=b'z')];
        t.insert(ts, v.clone());
        o.bulk_insert(&[(ts, v)]);
    }
    assert_eq!(t.validate(), vec![]);
    assert_eq!(t.query(), o.query());
}

#[test]
fn inserts_then_evicts_drain_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut t = Fiba::new(Sum, 2).unwrap();
    for _ in 0..1000 {
        t.insert(rng.random_range(0..1_000_000), 1);
    }
    while !t.is_empty() {
        t.evict();
        assert_eq!(t.validate(), vec![]);
    }
    assert_eq!(t.query(), Sum.identity());
}

#[test]
fn evict_all_but_youngest() {
    let mut t = Fiba::new(Sum, 2).unwrap();
    t.bulk_insert(Bulk::new((0..5000).map(|x| (x, 1)).collect()).unwrap());
    t.bulk_evict(4998);
    assert_eq!(t.height(), 0);
    assert_eq!(t.size(), 1);
    assert_eq!(t.validate(), vec![]);
}

#[test]
fn boundary_ancestors_are_true_lcas() {
    let mut t = Fiba::new(Sum, 2).unwrap();
    t.bulk_insert(Bulk::new((0..10_000).map(|x| (x * 2, 1)).collect()).unwrap());
    let path = |t: &Fiba<Sum>, mut id| {
        let mut p = vec![id];
        while let Some(q) = t.node(id).parent() {
            p.push(q);
            id = q;
        }
        p
    };
    for cut in [1, 333, 5000, 9999, 15_001, 19_996] {
        for tri in t.search_boundary(cut) {
            let (Some(anc), Some(nb)) = (tri.ancestor, tri.neighbor) else {
                assert!(tri.neighbor.is_none());
                continue;
            };
            let a = path(&t, tri.node);
            let b = path(&t, nb);
            let lca = a.iter().find(|x| b.contains(x)).copied();
            assert_eq!(lca, Some(anc));
            // the neighbour is the next node to the right on the same level
            let nb_first = t.node(nb).times()[0];
            assert!(nb_first > cut);
        }
    }
}
