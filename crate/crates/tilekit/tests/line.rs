use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use proptest::prelude::*;
use tilekit::grid::SolveMode;
use tilekit::line::*;

fn graph(m: usize, edges: &[Option<i64>], node: &[i64]) -> TileGraph {
    let e = edges[..m * m].chunks(m).map(<[Option<i64>]>::to_vec).collect();
    TileGraph::new(node[..m].to_vec(), e)
}

fn edge_multiset(walk: &[usize]) -> BTreeMap<(usize, usize), usize> {
    let mut out = BTreeMap::new();
    for w in walk.windows(2) {
        *out.entry((w[0], w[1])).or_insert(0) += 1;
    }
    out
}

/// Every walk of exactly `len` tiles from `start` to `end`.
fn walks(g: &TileGraph, start: usize, end: usize, len: usize) -> Vec<Vec<usize>> {
    fn go(g: &TileGraph, end: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            if *cur.last().unwrap() == end {
                out.push(cur.clone());
            }
            return;
        }
        for b in 0..g.len() {
            if g.edge(*cur.last().unwrap(), b).is_some() {
                cur.push(b);
                go(g, end, len, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, end, len, &mut vec![start], &mut out);
    out
}

fn coin_reachable(lengths: &[u64], max: usize) -> Vec<bool> {
    let mut reach = vec![false; max + 1];
    reach[0] = true;
    for x in 1..=max {
        reach[x] = lengths.iter().any(|&a| a as usize <= x && reach[x - a as usize]);
    }
    reach
}

#[test]
fn knapsack_matches_coin_dp_to_ten_thousand() {
    let sets: [&[u64]; 7] = [&[1], &[2], &[3, 5], &[4, 6], &[6, 10, 15], &[7, 9, 12], &[8, 12, 20, 30]];
    for lengths in sets {
        let dp = coin_reachable(lengths, 10_000);
        let g = lengths.iter().fold(0u64, |g, &x| g.gcd(&x));
        let frobenius_safe = lengths.iter().max().unwrap().pow(2);
        for (t, &want) in dp.iter().enumerate() {
            assert_eq!(knapsack_reachable(lengths, &BigUint::from(t)), want, "{lengths:?} at {t}");
            if t as u64 >= frobenius_safe {
                assert_eq!(want, t as u64 % g == 0, "{lengths:?} at {t}");
            }
        }
    }
    let huge = BigUint::from(10u32).pow(30);
    assert!(knapsack_reachable(&[4, 6], &huge));
    assert!(!knapsack_reachable(&[4, 6], &(huge + 1u32)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn allowed_sets_match_walk_realizability(
        m in 2usize..=4,
        bits in proptest::collection::vec(any::<bool>(), 16),
        start in 0usize..4,
        end in 0usize..4,
        pick in proptest::collection::vec(any::<bool>(), 8),
    ) {
        let edges: Vec<Option<i64>> = bits.iter().map(|&b| b.then_some(0)).collect();
        let g = graph(m, &edges, &[0; 4]);
        let (start, end) = (start % m, end % m);
        let catalog = simple_cycles(&g, start, end);
        let unrooted = catalog.unrooted();
        let chosen: Vec<SimpleCycle> = unrooted.iter().zip(&pick).filter(|(_, &p)| p).map(|(c, _)| c.clone()).take(3).collect();
        for path in catalog.paths.iter().take(3) {
            let mut target = edge_multiset(&path.nodes);
            for c in &chosen {
                let closed: Vec<usize> = c.nodes.iter().chain(std::iter::once(&c.nodes[0])).copied().collect();
                for (k, v) in edge_multiset(&closed) {
                    *target.entry(k).or_insert(0) += v;
                }
            }
            let len = path.len() + chosen.iter().map(SimpleCycle::len).sum::<usize>();
            prop_assume!(len <= 11);
            let exhaustive = walks(&g, start, end, len).iter().any(|w| edge_multiset(w) == target);
            prop_assert_eq!(is_allowed_set(path, &chosen), exhaustive);
            if exhaustive {
                let ones = vec![1u64; chosen.len()];
                let w = realize_walk(path, &chosen, &ones).unwrap();
                prop_assert_eq!(edge_multiset(&w), target);
                let twice = realize_walk(path, &chosen, &vec![2u64; chosen.len()]).unwrap();
                prop_assert_eq!(twice.len(), len + chosen.iter().map(SimpleCycle::len).sum::<usize>());
            }
        }
    }

    #[test]
    fn weighted_lines_match_enumeration(
        m in 1usize..=3,
        edges in proptest::collection::vec(prop_oneof![1 => Just(None), 3 => (-3i64..=3).prop_map(Some)], 9),
        node in proptest::collection::vec(-2i64..=2, 3),
        start in 0usize..3,
        end in 0usize..3,
        n in 1usize..=9,
    ) {
        let g = graph(m, &edges, &node);
        let (start, end) = (start % m, end % m);
        let best = walks(&g, start, end, n).iter().map(|w| g.walk_cost(w).unwrap()).min();
        for method in [LineMethod::Auto, LineMethod::MatrixPower] {
            let r = solve_graph_line(&g, start, end, &BigUint::from(n), SolveMode::MinCost, method).unwrap();
            prop_assert_eq!(r.exists, best.is_some());
            prop_assert_eq!(r.min_cost.clone(), best.map(BigInt::from));
            if let Some(w) = r.witness {
                prop_assert_eq!(g.walk_cost(w.row(0)), best);
            }
        }
        prop_assert_eq!(brute_force_line(&g, start, end, n)[n - 1], best);
    }

    #[test]
    fn huge_lengths_follow_the_eventual_period(
        m in 1usize..=3,
        edges in proptest::collection::vec(prop_oneof![Just(None), (0i64..=3).prop_map(Some)], 9),
        start in 0usize..3,
        end in 0usize..3,
        k in 0u64..1000,
    ) {
        let g = graph(m, &edges, &[0; 3]);
        let (start, end) = (start % m, end % m);
        let small = brute_force_line(&g, start, end, 400);
        let n = BigUint::from(10u64).pow(15) + BigUint::from(k);
        let r = solve_graph_line(&g, start, end, &n, SolveMode::MinCost, LineMethod::Auto).unwrap();
        // feasibility has period dividing lcm(1..=3) = 6 after a short prefix
        let probe = 300 + ((10u64.pow(15) + k - 300) % 6) as usize;
        prop_assert_eq!(r.exists, small[probe - 1].is_some());
        // min cost grows by the cheapest mean cycle per step, so it is affine along the period
        if let (Some(a), Some(b)) = (small[probe - 1], small[probe + 5]) {
            let slope = b - a;
            let steps = (BigInt::from(n) - BigInt::from(probe)) / 6;
            prop_assert_eq!(r.min_cost, Some(BigInt::from(a) + steps * BigInt::from(slope)));
        }
    }
}

#[test]
fn generalized_ends_and_errors() {
    let g = graph(2, &[None, Some(0), Some(0), None], &[0, 0]);
    let n = BigUint::from(7u32);
    assert!(solve_graph_line(&g, 0, 0, &n, SolveMode::Exists, LineMethod::Auto).unwrap().exists);
    assert!(!solve_graph_line(&g, 0, 0, &BigUint::from(8u32), SolveMode::Exists, LineMethod::Auto).unwrap().exists);
    assert!(solve_graph_line(&g, 0, 1, &BigUint::from(8u32), SolveMode::Exists, LineMethod::Auto).unwrap().exists);
    assert!(solve_graph_line(&g, 0, 2, &n, SolveMode::Exists, LineMethod::Auto).is_err());
    assert!(solve_graph_line(&g, 0, 0, &BigUint::from(0u32), SolveMode::Exists, LineMethod::Auto).is_err());
    assert!(solve_graph_line(&g, 0, 0, &n, SolveMode::Count, LineMethod::Auto).is_err());
}

#[test]
fn catalog_lists_every_simple_cycle_once() {
    let all = graph(3, &[Some(0); 9], &[0; 3]);
    let c = simple_cycles(&all, 0, 2);
    // three loops, three 2-cycles, two directed triangles
    assert_eq!(c.unrooted().len(), 8);
    assert_eq!(c.paths.len(), 2);
    for cyc in c.unrooted() {
        assert_eq!(cyc.canonical(), cyc);
    }
}
