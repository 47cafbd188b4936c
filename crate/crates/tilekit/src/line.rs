//! One-dimensional tiling of a line of N tiles between fixed end tiles.
//!
//! A walk decomposes into a simple path plus a multiset of simple cycles.
//! The catalog method enumerates (path, allowed cycle set) options once and
//! answers each N with a knapsack lookup, so the per-N work is arithmetic on
//! the digits of N. A min-plus matrix power serves as cross-check and as the
//! fallback when the catalog is too large.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};

use crate::grid::{SolveError, SolveMode, SolveResult};
use crate::tiling::{RuleSet, Tiling};

/// Directed graph on tiles; a walk's cost is the sum of its node and edge costs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileGraph {
    node_cost: Vec<i64>,
    /// `edges[i][j]`: cost of `j` directly after `i`, `None` if forbidden.
    edges: Vec<Vec<Option<i64>>>,
}

impl TileGraph {
    pub fn new(node_cost: Vec<i64>, edges: Vec<Vec<Option<i64>>>) -> Self {
        assert!(edges.len() == node_cost.len() && edges.iter().all(|r| r.len() == node_cost.len()));
        TileGraph { node_cost, edges }
    }

    /// Horizontal adjacency of a rule set, zero node costs.
    pub fn from_rules(rules: &RuleSet) -> Self {
        let m = rules.len();
        let edges = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| rules.h_allowed(i, j).then(|| rules.h(i, j)))
                    .collect()
            })
            .collect();
        TileGraph {
            node_cost: vec![0; m],
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.node_cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_cost.is_empty()
    }

    pub fn node_cost(&self, v: usize) -> i64 {
        self.node_cost[v]
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<i64> {
        self.edges[from][to]
    }

    /// Cost of a walk given as a node sequence, `None` if it uses a missing edge.
    pub fn walk_cost(&self, walk: &[usize]) -> Option<i128> {
        let mut c: i128 = walk.iter().map(|&v| self.node_cost[v] as i128).sum();
        for w in walk.windows(2) {
            c += self.edges[w[0]][w[1]]? as i128;
        }
        Some(c)
    }
}

/// Simple path: distinct nodes from the start tile to the end tile.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimplePath {
    pub nodes: Vec<usize>,
    pub cost: i128,
}

impl SimplePath {
    /// Number of tiles the path occupies (L + 1).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Simple cycle `v0 -> v1 -> ... -> v(l-1) -> v0`, stored without the repeated root.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimpleCycle {
    pub nodes: Vec<usize>,
    /// Cost added by inserting the cycle: l node costs plus l edge costs.
    pub cost: i128,
}

impl SimpleCycle {
    /// Number of tiles inserted, equal to the number of edges.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.nodes[0]
    }

    /// Rotation starting at the least node; identifies the unrooted cycle.
    pub fn canonical(&self) -> SimpleCycle {
        let k = (0..self.nodes.len()).min_by_key(|&i| self.nodes[i]).unwrap();
        let mut nodes = self.nodes[k..].to_vec();
        nodes.extend_from_slice(&self.nodes[..k]);
        SimpleCycle { nodes, cost: self.cost }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleCatalog {
    pub start: usize,
    pub end: usize,
    pub paths: Vec<SimplePath>,
    /// Every rooted simple cycle, ordered by (root, length, nodes).
    pub cycles: Vec<SimpleCycle>,
}

impl CycleCatalog {
    /// Unrooted cycles in canonical form, deduplicated, in catalog order.
    pub fn unrooted(&self) -> Vec<SimpleCycle> {
        let mut seen = BTreeSet::new();
        self.cycles
            .iter()
            .filter(|c| c.root() == *c.nodes.iter().min().unwrap())
            .filter(|c| seen.insert(c.nodes.clone()))
            .cloned()
            .collect()
    }
}

/// Exhaustive catalog of simple paths `start -> end` and rooted simple cycles.
pub fn simple_cycles(g: &TileGraph, start: usize, end: usize) -> CycleCatalog {
    let m = g.len();
    let mut paths = Vec::new();
    let mut stack = vec![start];
    let mut on = vec![false; m];
    on[start] = true;
    collect_paths(g, end, &mut stack, &mut on, &mut paths);
    paths.sort_by(|a, b| (a.nodes.len(), &a.nodes).cmp(&(b.nodes.len(), &b.nodes)));
    let mut cycles = Vec::new();
    for root in 0..m {
        let mut found = Vec::new();
        let mut stack = vec![root];
        let mut on = vec![false; m];
        on[root] = true;
        collect_cycles(g, root, &mut stack, &mut on, &mut found);
        found.sort_by(|a: &SimpleCycle, b| (a.nodes.len(), &a.nodes).cmp(&(b.nodes.len(), &b.nodes)));
        cycles.extend(found);
    }
    CycleCatalog {
        start,
        end,
        paths,
        cycles,
    }
}

fn collect_paths(g: &TileGraph, end: usize, stack: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<SimplePath>) {
    let last = *stack.last().unwrap();
    if last == end {
        out.push(SimplePath {
            nodes: stack.clone(),
            cost: g.walk_cost(stack).unwrap(),
        });
        return;
    }
    for next in 0..g.len() {
        if !on[next] && g.edge(last, next).is_some() {
            on[next] = true;
            stack.push(next);
            collect_paths(g, end, stack, on, out);
            stack.pop();
            on[next] = false;
        }
    }
}

fn collect_cycles(g: &TileGraph, root: usize, stack: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<SimpleCycle>) {
    let last = *stack.last().unwrap();
    if let Some(close) = g.edge(last, root) {
        let inner = g.walk_cost(stack).unwrap();
        out.push(SimpleCycle {
            nodes: stack.clone(),
            cost: inner + close as i128,
        });
    }
    for next in 0..g.len() {
        if !on[next] && g.edge(last, next).is_some() {
            on[next] = true;
            stack.push(next);
            collect_cycles(g, root, stack, on, out);
            stack.pop();
            on[next] = false;
        }
    }
}

/// True iff the cycles can be admitted one at a time, each sharing a node
/// with the path or with a previously admitted cycle.
pub fn is_allowed_set(path: &SimplePath, set: &[SimpleCycle]) -> bool {
    admission_order(path, set).is_some()
}

fn admission_order(path: &SimplePath, set: &[SimpleCycle]) -> Option<Vec<usize>> {
    let mut covered: BTreeSet<usize> = path.nodes.iter().copied().collect();
    let mut admitted = vec![false; set.len()];
    let mut order = Vec::with_capacity(set.len());
    loop {
        let next = (0..set.len()).find(|&i| !admitted[i] && set[i].nodes.iter().any(|v| covered.contains(v)));
        match next {
            Some(i) => {
                admitted[i] = true;
                order.push(i);
                covered.extend(set[i].nodes.iter().copied());
            }
            None => break,
        }
    }
    (order.len() == set.len()).then_some(order)
}

/// Walk realizing a path with each cycle inserted `mult[i] >= 1` times.
pub fn realize_walk(path: &SimplePath, set: &[SimpleCycle], mult: &[u64]) -> Option<Vec<usize>> {
    let order = admission_order(path, set)?;
    let mut walk = path.nodes.clone();
    for i in order {
        let c = &set[i];
        // splice at the first occurrence of any cycle node, rotating the cycle to it
        let (pos, k) = walk
            .iter()
            .enumerate()
            .find_map(|(pos, v)| c.nodes.iter().position(|x| x == v).map(|k| (pos, k)))?;
        let rotated: Vec<usize> = (1..=c.nodes.len()).map(|s| c.nodes[(k + s) % c.nodes.len()]).collect();
        let mut insert = Vec::with_capacity(rotated.len() * mult[i] as usize);
        for _ in 0..mult[i] {
            insert.extend_from_slice(&rotated);
        }
        walk.splice(pos + 1..pos + 1, insert);
    }
    Some(walk)
}

/// Splits a walk into a simple path and the cycles removed from it, always
/// cutting at the earliest repeated node.
pub fn decompose_walk(walk: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut w = walk.to_vec();
    let mut cycles = Vec::new();
    'outer: loop {
        for j in 0..w.len() {
            if let Some(i) = w[..j].iter().position(|&x| x == w[j]) {
                cycles.push(w[i..j].to_vec());
                w.drain(i + 1..=j);
                continue 'outer;
            }
        }
        return (w, cycles);
    }
}

fn gcd_all(xs: &[u64]) -> u64 {
    xs.iter().fold(0, |g, &x| g.gcd(&x))
}

fn lcm_all(xs: &[u64]) -> u64 {
    xs.iter().fold(1, |l, &x| l.lcm(&x))
}

/// Whether `target` is a non-negative integer combination of `lengths`.
pub fn knapsack_reachable(lengths: &[u64], target: &BigUint) -> bool {
    assert!(!lengths.is_empty() && lengths.iter().all(|&a| a > 0));
    let distinct: BTreeSet<u64> = lengths.iter().copied().collect();
    let lens: Vec<u64> = distinct.into_iter().collect();
    let g = lcm_all(&lens);
    let threshold = lens.len() as u64 * g;
    match target.to_u64() {
        Some(t) if t < threshold => {
            let mut reach = vec![false; t as usize + 1];
            reach[0] = true;
            for x in 1..=t as usize {
                reach[x] = lens.iter().any(|&a| a as usize <= x && reach[x - a as usize]);
            }
            reach[t as usize]
        }
        _ => (target % BigUint::from(gcd_all(&lens))).is_zero(),
    }
}

/// One (path, allowed cycle set) choice reduced to its length/cost data.
#[derive(Clone, Debug)]
struct LineOption {
    base_len: u64,
    base_cost: i128,
    /// Distinct cycle lengths with the cheapest cost per length.
    lengths: Vec<(u64, i128)>,
    g: u64,
    /// Min extra cost for each residual `0..lengths.len() * g`.
    table: Vec<Option<i128>>,
    /// Length and cost of a best-ratio cycle.
    best_ratio: (u64, i128),
    path: usize,
    set: Vec<usize>,
}

impl LineOption {
    fn new(base_len: u64, base_cost: i128, lengths: Vec<(u64, i128)>, path: usize, set: Vec<usize>) -> Self {
        let lens: Vec<u64> = lengths.iter().map(|x| x.0).collect();
        let g = lcm_all(&lens);
        let size = (lengths.len() as u64 * g) as usize;
        let mut table = vec![None; size.max(1)];
        table[0] = Some(0);
        for x in 1..size {
            table[x] = lengths
                .iter()
                .filter(|&&(a, _)| a as usize <= x)
                .filter_map(|&(a, c)| table[x - a as usize].map(|t| t + c))
                .min();
        }
        // least c/a, ties to the shorter cycle
        let best_ratio = lengths
            .iter()
            .copied()
            .min_by(|&(a1, c1), &(a2, c2)| (c1 * a2 as i128).cmp(&(c2 * a1 as i128)).then(a1.cmp(&a2)))
            .unwrap_or((1, 0));
        LineOption {
            base_len,
            base_cost,
            lengths,
            g,
            table,
            best_ratio,
            path,
            set,
        }
    }

    /// Min cost for a line of `n` tiles under this option.
    fn min_cost(&self, n: &BigUint) -> Option<BigInt> {
        let base = BigUint::from(self.base_len);
        if *n < base {
            return None;
        }
        let residual = n - &base;
        if self.lengths.is_empty() {
            return residual.is_zero().then(|| BigInt::from(self.base_cost));
        }
        let k = self.lengths.len() as u64;
        let span = k * self.g;
        if let Some(r) = residual.to_u64().filter(|&r| r < span) {
            return self.table[r as usize].map(|c| BigInt::from(self.base_cost + c));
        }
        // residual >= k*g: strip whole blocks of g filled by the best-ratio cycle
        let g = BigUint::from(self.g);
        let floor = BigUint::from((k - 1) * self.g);
        let blocks = (&residual - &floor) / &g;
        let rest = (&residual - &blocks * &g).to_u64().expect("rest below span");
        let (a, c) = self.best_ratio;
        let per_block = BigInt::from(c) * BigInt::from(self.g / a);
        self.table[rest as usize].map(|t| BigInt::from(self.base_cost + t) + BigInt::from(blocks) * per_block)
    }
}

/// Precomputed answer structure for fixed ends.
#[derive(Clone, Debug)]
pub struct LinePlan {
    catalog: CycleCatalog,
    unrooted: Vec<SimpleCycle>,
    options: Vec<LineOption>,
}

/// Upper bound on unrooted cycles for the subset enumeration.
pub const MAX_CATALOG_CYCLES: usize = 16;
/// Upper bound on a knapsack table (entries).
pub const MAX_TABLE: u64 = 1 << 22;

impl LinePlan {
    /// `None` when the catalog or a knapsack table exceeds its bound.
    pub fn build(g: &TileGraph, start: usize, end: usize) -> Option<Self> {
        if g.len() > 8 {
            return None;
        }
        let catalog = simple_cycles(g, start, end);
        let unrooted = catalog.unrooted();
        if unrooted.len() > MAX_CATALOG_CYCLES {
            return None;
        }
        let mut dedup: BTreeMap<(u64, Vec<(u64, i128)>), (i128, usize, Vec<usize>)> = BTreeMap::new();
        for (pi, p) in catalog.paths.iter().enumerate() {
            for mask in 0u32..(1 << unrooted.len()) {
                let set_idx: Vec<usize> = (0..unrooted.len()).filter(|&i| mask >> i & 1 == 1).collect();
                let set: Vec<SimpleCycle> = set_idx.iter().map(|&i| unrooted[i].clone()).collect();
                if !is_allowed_set(p, &set) {
                    continue;
                }
                let base_len = p.len() as u64 + set.iter().map(|c| c.len() as u64).sum::<u64>();
                let base_cost = p.cost + set.iter().map(|c| c.cost).sum::<i128>();
                let mut per_len: BTreeMap<u64, i128> = BTreeMap::new();
                for c in &set {
                    let e = per_len.entry(c.len() as u64).or_insert(c.cost);
                    *e = (*e).min(c.cost);
                }
                let lengths: Vec<(u64, i128)> = per_len.into_iter().collect();
                if lengths.len() as u64 * lcm_all(&lengths.iter().map(|x| x.0).collect::<Vec<_>>()) > MAX_TABLE {
                    return None;
                }
                let e = dedup.entry((base_len, lengths)).or_insert((base_cost, pi, set_idx.clone()));
                if base_cost < e.0 {
                    *e = (base_cost, pi, set_idx);
                }
            }
        }
        let options = dedup
            .into_iter()
            .map(|((bl, lens), (bc, pi, set))| LineOption::new(bl, bc, lens, pi, set))
            .collect();
        Some(LinePlan {
            catalog,
            unrooted,
            options,
        })
    }

    pub fn catalog(&self) -> &CycleCatalog {
        &self.catalog
    }

    pub fn unrooted(&self) -> &[SimpleCycle] {
        &self.unrooted
    }

    pub fn exists(&self, n: &BigUint) -> bool {
        self.options.iter().any(|o| {
            let base = BigUint::from(o.base_len);
            if *n < base {
                return false;
            }
            let residual = n - &base;
            if o.lengths.is_empty() {
                residual.is_zero()
            } else {
                knapsack_reachable(&o.lengths.iter().map(|x| x.0).collect::<Vec<_>>(), &residual)
            }
        })
    }

    pub fn min_cost(&self, n: &BigUint) -> Option<BigInt> {
        self.options.iter().filter_map(|o| o.min_cost(n)).min()
    }

    /// Realized walk of `n` tiles from the cheapest option (small `n` only).
    pub fn realize(&self, n: u64) -> Option<Vec<usize>> {
        let target = BigUint::from(n);
        let best = self.min_cost(&target)?;
        let o = self.options.iter().find(|o| o.min_cost(&target).as_ref() == Some(&best))?;
        let mut residual = n - o.base_len;
        let mut extra: BTreeMap<u64, u64> = BTreeMap::new();
        // unwind the table greedily along optimal predecessors
        let (ra, _) = o.best_ratio;
        let span = o.lengths.len() as u64 * o.g;
        if !o.lengths.is_empty() && residual >= span {
            let blocks = (residual - (o.lengths.len() as u64 - 1) * o.g) / o.g;
            *extra.entry(ra).or_default() += blocks * (o.g / ra);
            residual -= blocks * o.g;
        }
        while residual > 0 {
            let cur = o.table[residual as usize]?;
            let &(a, _) = o
                .lengths
                .iter()
                .find(|&&(a, c)| a <= residual && o.table[(residual - a) as usize].map(|t| t + c) == Some(cur))?;
            *extra.entry(a).or_default() += 1;
            residual -= a;
        }
        let set: Vec<SimpleCycle> = o.set.iter().map(|&i| self.unrooted[i].clone()).collect();
        let mut mult = vec![1u64; set.len()];
        for (len, count) in extra {
            let cheapest = o.lengths.iter().find(|x| x.0 == len).unwrap().1;
            let idx = (0..set.len())
                .find(|&i| set[i].len() as u64 == len && set[i].cost == cheapest)
                .unwrap();
            mult[idx] += count;
        }
        realize_walk(&self.catalog.paths[o.path], &set, &mult)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LineMethod {
    /// Catalog when within bounds, matrix power otherwise.
    #[default]
    Auto,
    Catalog,
    MatrixPower,
}

/// Largest N for which a witness line is materialized.
pub const WITNESS_CAP: u64 = 100_000;

/// Solves a line of `n` tiles from `start` to `end` over the horizontal rules.
pub fn solve_line(rules: &RuleSet, start: usize, end: usize, n: &BigUint, mode: SolveMode) -> Result<SolveResult, SolveError> {
    solve_graph_line(&TileGraph::from_rules(rules), start, end, n, mode, LineMethod::Auto)
}

pub fn solve_graph_line(
    g: &TileGraph,
    start: usize,
    end: usize,
    n: &BigUint,
    mode: SolveMode,
    method: LineMethod,
) -> Result<SolveResult, SolveError> {
    if start >= g.len() || end >= g.len() {
        return Err(SolveError::Invalid("end tile out of range".into()));
    }
    if n.is_zero() {
        return Err(SolveError::Invalid("N must be at least 1".into()));
    }
    if mode == SolveMode::Count {
        return Err(SolveError::Invalid("counting is not supported for lines".into()));
    }
    let plan = match method {
        LineMethod::MatrixPower => None,
        LineMethod::Auto => LinePlan::build(g, start, end),
        LineMethod::Catalog => Some(
            LinePlan::build(g, start, end)
                .ok_or_else(|| SolveError::Resource("cycle catalog exceeds its bound".into()))?,
        ),
    };
    let (exists, min_cost) = match &plan {
        Some(plan) => match mode {
            SolveMode::Exists => (plan.exists(n), None),
            _ => {
                let c = plan.min_cost(n);
                (c.is_some(), c)
            }
        },
        None => {
            let c = min_plus_line(g, &[start], &[end], n);
            (c.is_some(), if mode == SolveMode::MinCost { c } else { None })
        }
    };
    let witness = match n.to_u64() {
        Some(len) if exists && len <= WITNESS_CAP => {
            let walk = layered_witness(g, start, end, len as usize, mode == SolveMode::MinCost)
                .expect("feasible line has a witness");
            Some(Tiling::new(len as usize, 1, walk).expect("line witness"))
        }
        _ => None,
    };
    Ok(SolveResult {
        exists,
        count: None,
        min_cost,
        witness,
    })
}

/// Min cost over walks of `n` tiles starting in `starts` and ending in `ends`,
/// by repeated squaring in the (min, +) semiring.
pub fn min_plus_line(g: &TileGraph, starts: &[usize], ends: &[usize], n: &BigUint) -> Option<BigInt> {
    let m = g.len();
    type Mat = Vec<Vec<Option<BigInt>>>;
    let mul = |a: &Mat, b: &Mat| -> Mat {
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        (0..m)
                            .filter_map(|k| match (&a[i][k], &b[k][j]) {
                                (Some(x), Some(y)) => Some(x + y),
                                _ => None,
                            })
                            .min()
                    })
                    .collect()
            })
            .collect()
    };
    // step[i][j]: cost of appending j after i
    let step: Mat = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| g.edge(i, j).map(|e| BigInt::from(e as i128 + g.node_cost(j) as i128)))
                .collect()
        })
        .collect();
    let mut vec: Vec<Option<BigInt>> = (0..m)
        .map(|v| starts.contains(&v).then(|| BigInt::from(g.node_cost(v))))
        .collect();
    let mut e: BigUint = n - 1u32;
    let mut base = step;
    while !e.is_zero() {
        if e.bit(0) {
            vec = (0..m)
                .map(|j| {
                    (0..m)
                        .filter_map(|i| match (&vec[i], &base[i][j]) {
                            (Some(x), Some(y)) => Some(x + y),
                            _ => None,
                        })
                        .min()
                })
                .collect();
        }
        e >>= 1;
        if !e.is_zero() {
            base = mul(&base, &base);
        }
    }
    ends.iter().filter_map(|&v| vec[v].clone()).min()
}

/// Lexicographically least walk of `n` tiles; with `minimize`, least among
/// the cheapest walks.
fn layered_witness(g: &TileGraph, start: usize, end: usize, n: usize, minimize: bool) -> Option<Vec<usize>> {
    let m = g.len();
    // to_go[k][v]: best cost of positions k.. given tile v at k
    let mut to_go = vec![vec![None::<i128>; m]; n];
    to_go[n - 1][end] = Some(g.node_cost(end) as i128);
    for k in (0..n - 1).rev() {
        for v in 0..m {
            to_go[k][v] = (0..m)
                .filter_map(|w| Some(g.edge(v, w)? as i128 + to_go[k + 1][w]?))
                .min()
                .map(|c| c + g.node_cost(v) as i128);
        }
    }
    let total = to_go[0][start]?;
    let mut walk = vec![start];
    let mut spent = g.node_cost(start) as i128;
    for k in 1..n {
        let v = *walk.last().unwrap();
        let w = (0..m).find(|&w| match (g.edge(v, w), to_go[k][w]) {
            (Some(e), Some(rest)) => !minimize || spent + e as i128 + rest == total,
            _ => false,
        })?;
        spent += g.edge(v, w).unwrap() as i128 + g.node_cost(w) as i128;
        walk.push(w);
    }
    Some(walk)
}

/// Cheapest walk of `n` tiles from any of `starts` to any of `ends`, with
/// ties broken toward the lexicographically least walk.
pub fn cheapest_walk(g: &TileGraph, starts: &[usize], ends: &[usize], n: usize) -> Option<(i128, Vec<usize>)> {
    if n == 0 {
        return None;
    }
    let m = g.len();
    let mut to_go = vec![vec![None::<i128>; m]; n];
    for &e in ends {
        to_go[n - 1][e] = Some(g.node_cost(e) as i128);
    }
    for k in (0..n - 1).rev() {
        for v in 0..m {
            to_go[k][v] = (0..m)
                .filter_map(|w| Some(g.edge(v, w)? as i128 + to_go[k + 1][w]?))
                .min()
                .map(|c| c + g.node_cost(v) as i128);
        }
    }
    let total = starts.iter().filter_map(|&s| to_go[0][s]).min()?;
    let mut sorted = starts.to_vec();
    sorted.sort_unstable();
    let first = *sorted.iter().find(|&&s| to_go[0][s] == Some(total))?;
    let mut walk = vec![first];
    let mut spent = g.node_cost(first) as i128;
    for k in 1..n {
        let v = *walk.last().unwrap();
        let w = (0..m).find(|&w| match (g.edge(v, w), to_go[k][w]) {
            (Some(e), Some(rest)) => spent + e as i128 + rest == total,
            _ => false,
        })?;
        spent += g.edge(v, w).unwrap() as i128 + g.node_cost(w) as i128;
        walk.push(w);
    }
    Some((total, walk))
}

/// Exact oracle by position-layered dynamic programming: feasibility and min
/// cost for every length `1..=max_n`.
pub fn brute_force_line(g: &TileGraph, start: usize, end: usize, max_n: usize) -> Vec<Option<i128>> {
    let m = g.len();
    let mut cur: Vec<Option<i128>> = (0..m).map(|v| (v == start).then(|| g.node_cost(v) as i128)).collect();
    let mut out = Vec::with_capacity(max_n);
    for len in 1..=max_n {
        if len > 1 {
            cur = (0..m)
                .map(|w| {
                    (0..m)
                        .filter_map(|v| Some(cur[v]? + g.edge(v, w)? as i128))
                        .min()
                        .map(|c| c + g.node_cost(w) as i128)
                })
                .collect();
        }
        out.push(cur[end]);
    }
    out
}

/// Every walk of exactly `n` tiles from `start` to `end` (small inputs only).
pub fn enumerate_walks(g: &TileGraph, start: usize, end: usize, n: usize) -> Vec<Vec<usize>> {
    fn go(g: &TileGraph, end: usize, n: usize, walk: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if walk.len() == n {
            if *walk.last().unwrap() == end {
                out.push(walk.clone());
            }
            return;
        }
        let last = *walk.last().unwrap();
        for w in 0..g.len() {
            if g.edge(last, w).is_some() {
                walk.push(w);
                go(g, end, n, walk, out);
                walk.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(g, end, n, &mut vec![start], &mut out);
    out
}
