//! Exact N x N solvers: existence, counting, and minimum cost under every
//! boundary condition, plus an exhaustive oracle.
//!
//! Feasible tilings are sentinel-free, satisfy the boundary demands, and
//! (for existence and counting) have total cost at most p(N). Minimum cost
//! ignores p(N). Witnesses are the lexicographically least qualifying tiling
//! in row-major tile-index order.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tiling::{validate_tiling, RuleSet, Tiling, TilingInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveMode {
    Exists,
    Count,
    MinCost,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SolveResult {
    pub exists: bool,
    pub count: Option<BigUint>,
    /// `None` means infeasible (or not computed in this mode).
    pub min_cost: Option<BigInt>,
    pub witness: Option<Tiling>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("enumeration cap exceeded: {0}")]
    Cap(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Environment variable holding the solver memory budget in bytes.
pub const MEM_BUDGET_ENV: &str = "TILEKIT_MEM_BUDGET";
const DEFAULT_MEM_BUDGET: usize = 1 << 30;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub mem_budget: usize,
    /// Upper bound on search nodes for the backtracking engine.
    pub node_cap: u64,
    /// Forces the backtracking engine even when rows fit the budget.
    pub force_backtracking: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mem_budget: DEFAULT_MEM_BUDGET,
            node_cap: 200_000_000,
            force_backtracking: false,
        }
    }
}

impl SolverConfig {
    /// Default configuration with the budget taken from `TILEKIT_MEM_BUDGET`.
    pub fn from_env() -> Result<Self, SolveError> {
        let mut cfg = SolverConfig::default();
        if let Ok(raw) = std::env::var(MEM_BUDGET_ENV) {
            cfg.mem_budget = raw.trim().parse().map_err(|_| {
                SolveError::Invalid(format!("{MEM_BUDGET_ENV} must be a byte count, got {raw:?}"))
            })?;
        }
        Ok(cfg)
    }
}

/// Solves with the configuration from the environment.
pub fn solve_grid(inst: &TilingInstance, n: usize, mode: SolveMode) -> Result<SolveResult, SolveError> {
    solve_grid_with(inst, n, mode, &SolverConfig::from_env()?)
}

pub fn solve_grid_with(
    inst: &TilingInstance,
    n: usize,
    mode: SolveMode,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    check_input(inst, n)?;
    let Some(demands) = inst.bc.demand_grid(n, n) else {
        return Ok(infeasible(mode));
    };
    if !cfg.force_backtracking {
        let row_bytes = 16 * n + 64;
        let rows = count_rows(&inst.rules, n, inst.bc.is_periodic());
        if rows.saturating_mul(row_bytes as u128) <= cfg.mem_budget as u128 {
            if let Some(res) = RowDp::build(inst, n, &demands, cfg.mem_budget)?.map(|dp| dp.solve(mode)) {
                return Ok(res);
            }
        }
    }
    Search::new(inst, n, &demands, cfg)?.solve(mode)
}

fn check_input(inst: &TilingInstance, n: usize) -> Result<(), SolveError> {
    if n == 0 {
        return Err(SolveError::Invalid("N must be at least 1".into()));
    }
    if let Some(t) = inst.bc.tile() {
        if t >= inst.rules.len() {
            return Err(SolveError::Invalid(format!("boundary tile {t} out of range")));
        }
    }
    Ok(())
}

fn infeasible(mode: SolveMode) -> SolveResult {
    SolveResult {
        exists: false,
        count: (mode == SolveMode::Count).then(BigUint::zero),
        min_cost: None,
        witness: None,
    }
}

/// Number of horizontally consistent rows of width `n` (saturating).
pub fn count_rows(rules: &RuleSet, n: usize, periodic: bool) -> u128 {
    let m = rules.len();
    let walks = |start: Option<usize>| -> u128 {
        let mut cur: Vec<u128> = (0..m)
            .map(|t| u128::from(start.is_none_or(|s| s == t)))
            .collect();
        for _ in 1..n {
            let mut next = vec![0u128; m];
            for a in 0..m {
                if cur[a] == 0 {
                    continue;
                }
                for (b, slot) in next.iter_mut().enumerate() {
                    if rules.h_allowed(a, b) {
                        *slot = slot.saturating_add(cur[a]);
                    }
                }
            }
            cur = next;
        }
        match start {
            Some(s) => (0..m)
                .filter(|&b| rules.h_allowed(b, s))
                .fold(0u128, |acc, b| acc.saturating_add(cur[b])),
            None => cur.iter().fold(0u128, |acc, &x| acc.saturating_add(x)),
        }
    };
    if periodic {
        (0..m).fold(0u128, |acc, s| acc.saturating_add(walks(Some(s))))
    } else {
        walks(None)
    }
}

struct RowDp {
    n: usize,
    periodic: bool,
    rows: Vec<Vec<usize>>,
    row_cost: Vec<i64>,
    /// `succ[s]`: rows that may sit directly below row `s`, with vertical cost.
    succ: Vec<Vec<(u32, i64)>>,
    /// `level_ok[k][s]`: row `s` satisfies the demands of level `k`.
    level_ok: Vec<Vec<bool>>,
    cost_bound: BigInt,
}

type Hist = BTreeMap<i64, BigUint>;

impl RowDp {
    /// Returns `Ok(None)` when the transition table would exceed the budget.
    fn build(
        inst: &TilingInstance,
        n: usize,
        demands: &[Option<usize>],
        budget: usize,
    ) -> Result<Option<Self>, SolveError> {
        let rules = &inst.rules;
        let periodic = inst.bc.is_periodic();
        let m = rules.len();
        let mut rows = Vec::new();
        let mut cur = Vec::with_capacity(n);
        enumerate_rows(rules, n, periodic, &mut cur, &mut rows);
        let row_cost: Vec<i64> = rows
            .iter()
            .map(|r| {
                let mut c: i64 = r.windows(2).map(|w| rules.h(w[0], w[1])).sum();
                if periodic {
                    c += rules.h(r[n - 1], r[0]);
                }
                c
            })
            .collect();
        // rows are in lex order; index lookup by mixed-radix key
        let key = |r: &[usize]| r.iter().fold(0u128, |acc, &t| acc * m as u128 + t as u128);
        let lookup: std::collections::HashMap<u128, u32> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (key(r), i as u32))
            .collect();
        let mut succ = Vec::with_capacity(rows.len());
        let mut edges = 0usize;
        let budget_edges = budget / 16;
        for above in &rows {
            let mut list = Vec::new();
            let mut partial = Vec::with_capacity(n);
            below_rows(rules, above, periodic, &mut partial, &mut |below| {
                if let Some(&idx) = lookup.get(&key(below)) {
                    let vc: i64 = (0..n).map(|c| rules.v(below[c], above[c])).sum();
                    list.push((idx, vc));
                }
            });
            list.sort_unstable();
            edges += list.len();
            if edges > budget_edges {
                return Ok(None);
            }
            succ.push(list);
        }
        let level_ok = (0..n)
            .map(|k| {
                rows.iter()
                    .map(|r| (0..n).all(|c| demands[k * n + c].is_none_or(|t| t == r[c])))
                    .collect()
            })
            .collect();
        Ok(Some(RowDp {
            n,
            periodic,
            rows,
            row_cost,
            succ,
            level_ok,
            cost_bound: inst.cost_bound.eval(n as u64),
        }))
    }

    fn vertical_cost(&self, above: usize, below: usize) -> Option<i64> {
        self.succ[above]
            .binary_search_by_key(&(below as u32), |&(i, _)| i)
            .ok()
            .map(|pos| self.succ[above][pos].1)
    }

    /// Suffix minima for levels `from..n`; with `first`, the last level wraps
    /// onto that row.
    fn min_suffix(&self, from: usize, first: Option<usize>) -> Vec<Vec<Option<i64>>> {
        let r = self.rows.len();
        let n = self.n;
        let mut val = vec![vec![None; r]; n];
        for s in 0..r {
            if !self.level_ok[n - 1][s] {
                continue;
            }
            val[n - 1][s] = match first {
                Some(f) => self.vertical_cost(s, f).map(|vc| self.row_cost[s] + vc),
                None => Some(self.row_cost[s]),
            };
        }
        for k in (from..n - 1).rev() {
            for s in 0..r {
                if !self.level_ok[k][s] {
                    continue;
                }
                let best = self.succ[s]
                    .iter()
                    .filter_map(|&(t, vc)| val[k + 1][t as usize].map(|x| x + vc))
                    .min();
                val[k][s] = best.map(|b| b + self.row_cost[s]);
            }
        }
        val
    }

    fn hist_suffix(&self, from: usize, first: Option<usize>) -> Vec<Vec<Hist>> {
        let r = self.rows.len();
        let n = self.n;
        let mut val: Vec<Vec<Hist>> = vec![vec![Hist::new(); r]; n];
        for s in 0..r {
            if !self.level_ok[n - 1][s] {
                continue;
            }
            let c = match first {
                Some(f) => self.vertical_cost(s, f).map(|vc| self.row_cost[s] + vc),
                None => Some(self.row_cost[s]),
            };
            if let Some(c) = c {
                val[n - 1][s].insert(c, BigUint::one());
            }
        }
        for k in (from..n - 1).rev() {
            for s in 0..r {
                if !self.level_ok[k][s] {
                    continue;
                }
                let mut h = Hist::new();
                for &(t, vc) in &self.succ[s] {
                    for (&c, cnt) in &val[k + 1][t as usize] {
                        *h.entry(c + vc + self.row_cost[s]).or_insert_with(BigUint::zero) += cnt;
                    }
                }
                val[k][s] = h;
            }
        }
        val
    }

    /// Candidate first rows in lex order with their best total cost.
    fn first_row_minima(&self) -> Vec<(usize, Option<i64>, Option<Vec<Vec<Option<i64>>>>)> {
        let r = self.rows.len();
        if self.periodic {
            (0..r)
                .filter(|&f| self.level_ok[0][f])
                .map(|f| {
                    if self.n == 1 {
                        let c = self.vertical_cost(f, f).map(|vc| self.row_cost[f] + vc);
                        (f, c, None)
                    } else {
                        let val = self.min_suffix(1, Some(f));
                        let c = self.succ[f]
                            .iter()
                            .filter_map(|&(t, vc)| val[1][t as usize].map(|x| x + vc))
                            .min()
                            .map(|b| b + self.row_cost[f]);
                        (f, c, Some(val))
                    }
                })
                .collect()
        } else {
            let val = self.min_suffix(0, None);
            (0..r)
                .filter(|&f| self.level_ok[0][f])
                .map(|f| (f, val[0][f], None))
                .collect()
        }
    }

    fn solve(&self, mode: SolveMode) -> SolveResult {
        match mode {
            SolveMode::Count => {
                let count = self.count();
                SolveResult {
                    exists: !count.is_zero(),
                    count: Some(count),
                    min_cost: None,
                    witness: None,
                }
            }
            SolveMode::Exists | SolveMode::MinCost => {
                let firsts = self.first_row_minima();
                let min = firsts.iter().filter_map(|x| x.1).min();
                let bound = match mode {
                    SolveMode::Exists => match min {
                        Some(mc) if BigInt::from(mc) <= self.cost_bound => {
                            i64::try_from(&self.cost_bound).unwrap_or(i64::MAX)
                        }
                        _ => return infeasible(mode),
                    },
                    _ => match min {
                        Some(mc) => mc,
                        None => return infeasible(mode),
                    },
                };
                let witness = self.witness(&firsts, bound);
                SolveResult {
                    exists: true,
                    count: None,
                    min_cost: (mode == SolveMode::MinCost).then(|| BigInt::from(bound)),
                    witness: Some(witness),
                }
            }
        }
    }

    fn witness(
        &self,
        firsts: &[(usize, Option<i64>, Option<Vec<Vec<Option<i64>>>>)],
        bound: i64,
    ) -> Tiling {
        let n = self.n;
        let (f, _, wrap_val) = firsts
            .iter()
            .find(|x| x.1.is_some_and(|c| c <= bound))
            .expect("feasible first row");
        let owned;
        let val = match wrap_val {
            Some(v) => v,
            None if self.periodic => {
                return Tiling::new(n, n, self.rows[*f].clone()).expect("1x1 witness");
            }
            None => {
                owned = self.min_suffix(0, None);
                &owned
            }
        };
        let mut chosen = vec![*f];
        let mut prefix = self.row_cost[*f];
        for k in 1..n {
            let s = *chosen.last().unwrap();
            let (t, vc) = self.succ[s]
                .iter()
                .find(|&&(t, vc)| val[k][t as usize].is_some_and(|x| prefix + vc + x <= bound))
                .copied()
                .expect("suffix table admits a continuation");
            prefix += vc + self.row_cost[t as usize];
            chosen.push(t as usize);
        }
        let cells = chosen.iter().flat_map(|&r| self.rows[r].iter().copied()).collect();
        Tiling::new(n, n, cells).expect("square witness")
    }

    fn count(&self) -> BigUint {
        let bound = &self.cost_bound;
        let within = |h: &Hist| -> BigUint {
            h.iter()
                .filter(|(&c, _)| BigInt::from(c) <= *bound)
                .fold(BigUint::zero(), |acc, (_, x)| acc + x)
        };
        if self.periodic {
            let mut total = BigUint::zero();
            for f in (0..self.rows.len()).filter(|&f| self.level_ok[0][f]) {
                if self.n == 1 {
                    if let Some(vc) = self.vertical_cost(f, f) {
                        if BigInt::from(self.row_cost[f] + vc) <= *bound {
                            total += 1u32;
                        }
                    }
                    continue;
                }
                let val = self.hist_suffix(1, Some(f));
                let mut h = Hist::new();
                for &(t, vc) in &self.succ[f] {
                    for (&c, cnt) in &val[1][t as usize] {
                        *h.entry(c + vc + self.row_cost[f]).or_insert_with(BigUint::zero) += cnt;
                    }
                }
                total += within(&h);
            }
            total
        } else {
            let val = self.hist_suffix(0, None);
            (0..self.rows.len())
                .filter(|&f| self.level_ok[0][f])
                .fold(BigUint::zero(), |acc, f| acc + within(&val[0][f]))
        }
    }
}

fn enumerate_rows(rules: &RuleSet, n: usize, periodic: bool, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == n {
        if !periodic || rules.h_allowed(cur[n - 1], cur[0]) {
            out.push(cur.clone());
        }
        return;
    }
    for t in 0..rules.len() {
        if cur.last().is_none_or(|&p| rules.h_allowed(p, t)) {
            cur.push(t);
            enumerate_rows(rules, n, periodic, cur, out);
            cur.pop();
        }
    }
}

fn below_rows(
    rules: &RuleSet,
    above: &[usize],
    periodic: bool,
    cur: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize]),
) {
    let n = above.len();
    if cur.len() == n {
        if !periodic || rules.h_allowed(cur[n - 1], cur[0]) {
            emit(cur);
        }
        return;
    }
    let c = cur.len();
    for t in 0..rules.len() {
        if rules.v_allowed(t, above[c]) && cur.last().is_none_or(|&p| rules.h_allowed(p, t)) {
            cur.push(t);
            below_rows(rules, above, periodic, cur, emit);
            cur.pop();
        }
    }
}

/// Cell-by-cell search in row-major order with arc-consistency propagation
/// over bitset domains.
struct Search<'a> {
    inst: &'a TilingInstance,
    n: usize,
    words: usize,
    /// `compat[d][t]`: tiles allowed as the neighbour of `t` in direction d
    /// (0 right, 1 left, 2 above, 3 below).
    compat: [Vec<Vec<u64>>; 4],
    init: Vec<u64>,
    node_cap: u64,
    nodes: u64,
    cost_bound: BigInt,
    min_h: i64,
    min_v: i64,
}

const DIRS: [(isize, isize); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Goal {
    First,
    All,
    Min,
}

impl<'a> Search<'a> {
    fn new(
        inst: &'a TilingInstance,
        n: usize,
        demands: &[Option<usize>],
        cfg: &SolverConfig,
    ) -> Result<Self, SolveError> {
        let rules = &inst.rules;
        let m = rules.len();
        let words = m.div_ceil(64);
        let cells = n * n;
        let compat_bytes = 4 * m * words * 8;
        let frame_bytes = cells * words * 8;
        if compat_bytes.saturating_add(frame_bytes.saturating_mul(cells + 1)) > cfg.mem_budget {
            return Err(SolveError::Resource(format!(
                "search state for N={n} with {m} tiles exceeds the memory budget of {} bytes",
                cfg.mem_budget
            )));
        }
        let mk = |pred: &dyn Fn(usize, usize) -> bool| -> Vec<Vec<u64>> {
            (0..m)
                .map(|t| {
                    let mut bits = vec![0u64; words];
                    for u in 0..m {
                        if pred(t, u) {
                            bits[u / 64] |= 1 << (u % 64);
                        }
                    }
                    bits
                })
                .collect()
        };
        let compat = [
            mk(&|t, u| rules.h_allowed(t, u)),
            mk(&|t, u| rules.h_allowed(u, t)),
            mk(&|t, u| rules.v_allowed(t, u)),
            mk(&|t, u| rules.v_allowed(u, t)),
        ];
        let mut init = vec![0u64; cells * words];
        for (i, d) in demands.iter().enumerate() {
            let dom = &mut init[i * words..(i + 1) * words];
            match d {
                Some(t) => dom[t / 64] |= 1 << (t % 64),
                None => {
                    for u in 0..m {
                        dom[u / 64] |= 1 << (u % 64);
                    }
                }
            }
        }
        let allowed_min = |f: &dyn Fn(usize, usize) -> i64| {
            (0..m)
                .flat_map(|a| (0..m).map(move |b| (a, b)))
                .map(|(a, b)| f(a, b))
                .filter(|&w| w != rules.sentinel())
                .min()
                .unwrap_or(0)
        };
        Ok(Search {
            inst,
            n,
            words,
            min_h: allowed_min(&|a, b| rules.h(a, b)),
            min_v: allowed_min(&|a, b| rules.v(a, b)),
            compat,
            init,
            node_cap: cfg.node_cap,
            nodes: 0,
            cost_bound: inst.cost_bound.eval(n as u64),
        })
    }

    fn neighbour(&self, cell: usize, d: usize) -> Option<usize> {
        let n = self.n as isize;
        let (r, c) = ((cell / self.n) as isize, (cell % self.n) as isize);
        let (dr, dc) = DIRS[d];
        let (mut r2, mut c2) = (r + dr, c + dc);
        if self.inst.bc.is_periodic() {
            r2 = r2.rem_euclid(n);
            c2 = c2.rem_euclid(n);
        } else if r2 < 0 || c2 < 0 || r2 >= n || c2 >= n {
            return None;
        }
        Some((r2 * n + c2) as usize)
    }

    /// Arc consistency from a queue of changed cells; false on a wipe-out.
    fn propagate(&self, dom: &mut [u64], mut queue: Vec<usize>) -> bool {
        let w = self.words;
        let mut queued = vec![false; self.n * self.n];
        for &c in &queue {
            queued[c] = true;
        }
        let mut support = vec![0u64; w];
        while let Some(y) = queue.pop() {
            queued[y] = false;
            for d in 0..4 {
                let Some(x) = self.neighbour(y, d) else { continue };
                // y is the neighbour of x in the opposite direction
                let back = d ^ 1;
                // union of tiles of x that have support in y
                support.iter_mut().for_each(|s| *s = 0);
                let dy = dom[y * w..(y + 1) * w].to_vec();
                let mut changed = false;
                for word in 0..w {
                    let mut bits = dom[x * w + word];
                    while bits != 0 {
                        let b = bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        let t = word * 64 + b;
                        let comp = &self.compat[back][t];
                        if !comp.iter().zip(&dy).any(|(a, b)| a & b != 0) {
                            dom[x * w + word] &= !(1u64 << b);
                            changed = true;
                        }
                    }
                }
                if changed {
                    if dom[x * w..(x + 1) * w].iter().all(|&b| b == 0) {
                        return false;
                    }
                    if !queued[x] {
                        queued[x] = true;
                        queue.push(x);
                    }
                }
            }
        }
        true
    }

    fn solve(mut self, mode: SolveMode) -> Result<SolveResult, SolveError> {
        let mut dom = self.init.clone();
        let all: Vec<usize> = (0..self.n * self.n).collect();
        if !self.propagate(&mut dom, all) {
            return Ok(infeasible(mode));
        }
        let goal = match mode {
            SolveMode::Exists => Goal::First,
            SolveMode::Count => Goal::All,
            SolveMode::MinCost => Goal::Min,
        };
        let mut state = SearchState {
            goal,
            bound: match goal {
                Goal::Min => None,
                _ => Some(self.cost_bound.clone()),
            },
            best: None,
            count: BigUint::zero(),
            done: false,
        };
        let mut assign = vec![usize::MAX; self.n * self.n];
        self.dfs(0, &mut dom, &mut assign, 0, &mut state)?;
        Ok(match mode {
            SolveMode::Count => SolveResult {
                exists: !state.count.is_zero(),
                count: Some(state.count),
                min_cost: None,
                witness: None,
            },
            _ => match state.best {
                Some((cost, t)) => SolveResult {
                    exists: true,
                    count: None,
                    min_cost: (mode == SolveMode::MinCost).then(|| BigInt::from(cost)),
                    witness: Some(t),
                },
                None => infeasible(mode),
            },
        })
    }

    /// Cost of pairs whose later cell (in row-major order) is `cell`.
    fn closing_cost(&self, cell: usize, assign: &[usize]) -> i64 {
        let rules = &self.inst.rules;
        let n = self.n;
        let (r, c) = (cell / n, cell % n);
        let t = assign[cell];
        let mut cost = 0;
        if c > 0 {
            cost += rules.h(assign[cell - 1], t);
        }
        if r > 0 {
            cost += rules.v(t, assign[cell - n]);
        }
        if self.inst.bc.is_periodic() {
            if c == n - 1 {
                cost += rules.h(t, assign[r * n]);
            }
            if r == n - 1 {
                cost += rules.v(assign[c], t);
            }
        }
        cost
    }

    /// Lower bound on the cost of pairs not yet closed after `cell`.
    fn remaining_floor(&self, cell: usize) -> i64 {
        let n = self.n as i64;
        let periodic = self.inst.bc.is_periodic();
        let (hp, vp) = if periodic { (n * n, n * n) } else { (n * (n - 1), n * (n - 1)) };
        // pairs closed so far, counted exactly
        let mut closed_h = 0;
        let mut closed_v = 0;
        for i in 0..=cell as i64 {
            let (r, c) = (i / n, i % n);
            if c > 0 {
                closed_h += 1;
            }
            if r > 0 {
                closed_v += 1;
            }
            if periodic {
                if c == n - 1 {
                    closed_h += 1;
                }
                if r == n - 1 {
                    closed_v += 1;
                }
            }
        }
        (hp - closed_h) * self.min_h + (vp - closed_v) * self.min_v
    }

    fn dfs(
        &mut self,
        cell: usize,
        dom: &mut [u64],
        assign: &mut [usize],
        cost: i64,
        st: &mut SearchState,
    ) -> Result<(), SolveError> {
        if st.done {
            return Ok(());
        }
        let n2 = self.n * self.n;
        if cell == n2 {
            self.record(assign, cost, st);
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.node_cap {
            return Err(SolveError::Resource(format!(
                "search exceeded {} nodes at N={}",
                self.node_cap, self.n
            )));
        }
        let w = self.words;
        let tiles: Vec<usize> = (0..w)
            .flat_map(|word| {
                let bits = dom[cell * w + word];
                (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| word * 64 + b)
            })
            .collect();
        for t in tiles {
            assign[cell] = t;
            let c = cost + self.closing_cost(cell, assign);
            let floor = c + self.remaining_floor(cell);
            let prune = match (&st.goal, &st.bound) {
                (Goal::Min, _) => st.best.as_ref().is_some_and(|(b, _)| floor >= *b),
                (_, Some(bound)) => BigInt::from(floor) > *bound,
                _ => false,
            };
            if prune {
                continue;
            }
            let mut child = dom.to_vec();
            let slot = &mut child[cell * w..(cell + 1) * w];
            slot.iter_mut().for_each(|b| *b = 0);
            slot[t / 64] |= 1 << (t % 64);
            if self.propagate(&mut child, vec![cell]) {
                self.dfs(cell + 1, &mut child, assign, c, st)?;
                if st.done {
                    return Ok(());
                }
            }
        }
        assign[cell] = usize::MAX;
        Ok(())
    }

    fn record(&self, assign: &[usize], cost: i64, st: &mut SearchState) {
        match st.goal {
            Goal::First => {
                if st.bound.as_ref().is_none_or(|b| BigInt::from(cost) <= *b) {
                    st.best = Some((cost, Tiling::new(self.n, self.n, assign.to_vec()).unwrap()));
                    st.done = true;
                }
            }
            Goal::All => {
                if st.bound.as_ref().is_none_or(|b| BigInt::from(cost) <= *b) {
                    st.count += 1u32;
                }
            }
            Goal::Min => {
                if st.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    st.best = Some((cost, Tiling::new(self.n, self.n, assign.to_vec()).unwrap()));
                }
            }
        }
    }
}

struct SearchState {
    goal: Goal,
    bound: Option<BigInt>,
    best: Option<(i64, Tiling)>,
    count: BigUint,
    done: bool,
}

/// Default cap on `m^(N^2)` for [`brute_force_grid`].
pub const BRUTE_FORCE_CAP: u128 = 1 << 34;

/// Exhaustive oracle over all assignments; fills every field of the result.
pub fn brute_force_grid(inst: &TilingInstance, n: usize) -> Result<SolveResult, SolveError> {
    brute_force_grid_capped(inst, n, BRUTE_FORCE_CAP)
}

pub fn brute_force_grid_capped(inst: &TilingInstance, n: usize, cap: u128) -> Result<SolveResult, SolveError> {
    check_input(inst, n)?;
    let m = inst.rules.len() as u128;
    let space = (0..n * n).try_fold(1u128, |acc, _| acc.checked_mul(m));
    if space.is_none_or(|s| s > cap) {
        return Err(SolveError::Cap(format!(
            "{m}^{} assignments exceed the cap {cap}",
            n * n
        )));
    }
    let bound = inst.cost_bound.eval(n as u64);
    let mut oracle = Oracle {
        inst,
        n,
        demands: inst.bc.demand_grid(n, n),
        bound,
        cells: vec![0; n * n],
        count: BigUint::zero(),
        first_ok: None,
        best: None,
    };
    if oracle.demands.is_some() {
        oracle.walk(0);
    }
    let Oracle {
        count, first_ok, best, ..
    } = oracle;
    Ok(SolveResult {
        exists: first_ok.is_some(),
        count: Some(count),
        min_cost: best.as_ref().map(|(c, _)| BigInt::from(*c)),
        witness: first_ok,
    })
}

/// Minimum-cost witness of the oracle (lex least among optimal tilings).
pub fn brute_force_min_witness(inst: &TilingInstance, n: usize) -> Result<Option<Tiling>, SolveError> {
    check_input(inst, n)?;
    let mut oracle = Oracle {
        inst,
        n,
        demands: inst.bc.demand_grid(n, n),
        bound: inst.cost_bound.eval(n as u64),
        cells: vec![0; n * n],
        count: BigUint::zero(),
        first_ok: None,
        best: None,
    };
    if oracle.demands.is_some() {
        oracle.walk(0);
    }
    Ok(oracle.best.map(|(_, t)| t))
}

struct Oracle<'a> {
    inst: &'a TilingInstance,
    n: usize,
    demands: Option<Vec<Option<usize>>>,
    bound: BigInt,
    cells: Vec<usize>,
    count: BigUint,
    first_ok: Option<Tiling>,
    best: Option<(i64, Tiling)>,
}

impl Oracle<'_> {
    /// Enumerates assignments in lex order; an assignment is skipped as soon
    /// as a completed pair is forbidden.
    fn walk(&mut self, i: usize) {
        let n = self.n;
        if i == n * n {
            let t = Tiling::new(n, n, self.cells.clone()).unwrap();
            let rep = validate_tiling(self.inst, &t).expect("well-formed");
            debug_assert!(rep.is_valid());
            let c = rep.total_cost;
            if BigInt::from(c) <= self.bound {
                self.count += 1u32;
                if self.first_ok.is_none() {
                    self.first_ok = Some(t.clone());
                }
            }
            if self.best.as_ref().is_none_or(|(b, _)| c < *b) {
                self.best = Some((c, t));
            }
            return;
        }
        let rules = &self.inst.rules;
        let periodic = self.inst.bc.is_periodic();
        let (r, c) = (i / n, i % n);
        for t in 0..rules.len() {
            if let Some(d) = self.demands.as_ref().unwrap()[i] {
                if d != t {
                    continue;
                }
            }
            self.cells[i] = t;
            let mut ok = true;
            if c > 0 && !rules.h_allowed(self.cells[i - 1], t) {
                ok = false;
            }
            if r > 0 && !rules.v_allowed(t, self.cells[i - n]) {
                ok = false;
            }
            if periodic && c == n - 1 && !rules.h_allowed(t, self.cells[r * n]) {
                ok = false;
            }
            if periodic && r == n - 1 && !rules.v_allowed(self.cells[c], t) {
                ok = false;
            }
            if ok {
                self.walk(i + 1);
            }
        }
    }
}
