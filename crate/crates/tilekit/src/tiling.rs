//! Tiles, weighted adjacency rules, boundary conditions, layered products,
//! symmetry predicates, and tiling validation.
//!
//! Orientation: row 0 of a [`Tiling`] is the top row. `RuleSet::h(l, r)` is
//! the weight of tile `l` directly left of tile `r`; `RuleSet::v(b, t)` is the
//! weight of tile `b` directly below tile `t`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weight that marks a forbidden adjacent pair.
pub const DEFAULT_SENTINEL: i64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TilingError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("unknown tile index {index} (rule set has {count} tiles)")]
    UnknownTile { index: usize, count: usize },
    #[error("unknown tile name {0:?}")]
    UnknownTileName(String),
    #[error("empty rule set")]
    Empty,
    #[error("layer error: {0}")]
    Layer(String),
}

/// Tile set with horizontal and vertical weight matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    tiles: Vec<String>,
    horizontal: Vec<i64>,
    vertical: Vec<i64>,
    sentinel: i64,
}

/// Result of [`RuleSet::symmetry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    None,
    Reflection,
    Rotation,
}

impl RuleSet {
    /// Builds a rule set from square weight matrices.
    pub fn new(
        tiles: Vec<String>,
        horizontal: Vec<Vec<i64>>,
        vertical: Vec<Vec<i64>>,
        sentinel: i64,
    ) -> Result<Self, TilingError> {
        let m = tiles.len();
        if m == 0 {
            return Err(TilingError::Empty);
        }
        let flatten = |name: &str, mat: Vec<Vec<i64>>| -> Result<Vec<i64>, TilingError> {
            if mat.len() != m || mat.iter().any(|r| r.len() != m) {
                return Err(TilingError::Dimension(format!(
                    "{name} matrix must be {m}x{m}"
                )));
            }
            Ok(mat.into_iter().flatten().collect())
        };
        Ok(RuleSet {
            horizontal: flatten("horizontal", horizontal)?,
            vertical: flatten("vertical", vertical)?,
            tiles,
            sentinel,
        })
    }

    /// Builds an unweighted rule set from allowance predicates.
    pub fn from_allowed(
        tiles: Vec<String>,
        h_allowed: impl Fn(usize, usize) -> bool,
        v_allowed: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let m = tiles.len();
        let mut horizontal = vec![DEFAULT_SENTINEL; m * m];
        let mut vertical = vec![DEFAULT_SENTINEL; m * m];
        for a in 0..m {
            for b in 0..m {
                if h_allowed(a, b) {
                    horizontal[a * m + b] = 0;
                }
                if v_allowed(a, b) {
                    vertical[a * m + b] = 0;
                }
            }
        }
        RuleSet {
            tiles,
            horizontal,
            vertical,
            sentinel: DEFAULT_SENTINEL,
        }
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tiles(&self) -> &[String] {
        &self.tiles
    }

    pub fn tile_name(&self, i: usize) -> &str {
        &self.tiles[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tiles.iter().position(|t| t == name)
    }

    pub fn sentinel(&self) -> i64 {
        self.sentinel
    }

    /// Weight of `left` placed directly left of `right`.
    #[inline]
    pub fn h(&self, left: usize, right: usize) -> i64 {
        self.horizontal[left * self.tiles.len() + right]
    }

    /// Weight of `below` placed directly below `above`.
    #[inline]
    pub fn v(&self, below: usize, above: usize) -> i64 {
        self.vertical[below * self.tiles.len() + above]
    }

    #[inline]
    pub fn h_allowed(&self, left: usize, right: usize) -> bool {
        self.h(left, right) != self.sentinel
    }

    #[inline]
    pub fn v_allowed(&self, below: usize, above: usize) -> bool {
        self.v(below, above) != self.sentinel
    }

    pub fn set_h(&mut self, left: usize, right: usize, w: i64) {
        let m = self.tiles.len();
        self.horizontal[left * m + right] = w;
    }

    pub fn set_v(&mut self, below: usize, above: usize, w: i64) {
        let m = self.tiles.len();
        self.vertical[below * m + above] = w;
    }

    pub fn horizontal_matrix(&self) -> Vec<Vec<i64>> {
        self.horizontal
            .chunks(self.tiles.len())
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn vertical_matrix(&self) -> Vec<Vec<i64>> {
        self.vertical
            .chunks(self.tiles.len())
            .map(|r| r.to_vec())
            .collect()
    }

    /// True iff every entry is 0 or the sentinel.
    pub fn is_unweighted(&self) -> bool {
        self.horizontal
            .iter()
            .chain(self.vertical.iter())
            .all(|&w| w == 0 || w == self.sentinel)
    }

    pub fn symmetry(&self) -> Symmetry {
        let m = self.tiles.len();
        let symmetric = |mat: &[i64]| (0..m).all(|a| (0..a).all(|b| mat[a * m + b] == mat[b * m + a]));
        if !(symmetric(&self.horizontal) && symmetric(&self.vertical)) {
            Symmetry::None
        } else if self.horizontal == self.vertical {
            Symmetry::Rotation
        } else {
            Symmetry::Reflection
        }
    }
}

/// Checks the reflection/rotation predicates of a rule set.
pub fn check_symmetry(rules: &RuleSet) -> Symmetry {
    rules.symmetry()
}

/// Grid corner; `TopLeft` is (row 1, col 1) in rendered coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub const ALL: [Corner; 4] = [
        Corner::TopLeft,
        Corner::TopRight,
        Corner::BottomLeft,
        Corner::BottomRight,
    ];

    /// Zero-based (row, col) of this corner in a `height x width` grid.
    pub fn cell(self, height: usize, width: usize) -> (usize, usize) {
        match self {
            Corner::TopLeft => (0, 0),
            Corner::TopRight => (0, width - 1),
            Corner::BottomLeft => (height - 1, 0),
            Corner::BottomRight => (height - 1, width - 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    FourCorners(usize),
    OneCorner(usize, Corner),
    TwoCorners(usize, [Corner; 2]),
    Open,
    Periodic,
}

impl BoundaryCondition {
    pub fn is_periodic(&self) -> bool {
        matches!(self, BoundaryCondition::Periodic)
    }

    /// Tiles forced at specific cells, as ((row, col), tile).
    pub fn demands(&self, height: usize, width: usize) -> Vec<((usize, usize), usize)> {
        let mut out: Vec<((usize, usize), usize)> = match self {
            BoundaryCondition::FourCorners(t) => Corner::ALL
                .iter()
                .map(|c| (c.cell(height, width), *t))
                .collect(),
            BoundaryCondition::OneCorner(t, c) => vec![(c.cell(height, width), *t)],
            BoundaryCondition::TwoCorners(t, cs) => {
                cs.iter().map(|c| (c.cell(height, width), *t)).collect()
            }
            BoundaryCondition::Open | BoundaryCondition::Periodic => Vec::new(),
        };
        out.sort();
        out.dedup();
        out
    }

    /// Per-cell forced tile (row-major), `None` where unconstrained.
    /// Returns `None` overall if two demands conflict on one cell.
    pub fn demand_grid(&self, height: usize, width: usize) -> Option<Vec<Option<usize>>> {
        let mut grid = vec![None; height * width];
        for ((r, c), t) in self.demands(height, width) {
            let slot = &mut grid[r * width + c];
            match slot {
                Some(existing) if *existing != t => return None,
                _ => *slot = Some(t),
            }
        }
        Some(grid)
    }

    pub fn tile(&self) -> Option<usize> {
        match self {
            BoundaryCondition::FourCorners(t)
            | BoundaryCondition::OneCorner(t, _)
            | BoundaryCondition::TwoCorners(t, _) => Some(*t),
            _ => None,
        }
    }
}

/// Integer polynomial `c0 + c1 N + c2 N^2 + ...`, evaluated exactly.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CostBound(pub Vec<i64>);

impl CostBound {
    pub fn zero() -> Self {
        CostBound(Vec::new())
    }

    pub fn eval(&self, n: u64) -> BigInt {
        let x = BigInt::from(n);
        self.0
            .iter()
            .rev()
            .fold(BigInt::from(0), |acc, &c| acc * &x + BigInt::from(c))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingInstance {
    pub rules: RuleSet,
    pub bc: BoundaryCondition,
    pub cost_bound: CostBound,
}

impl TilingInstance {
    pub fn new(rules: RuleSet, bc: BoundaryCondition) -> Self {
        TilingInstance {
            rules,
            bc,
            cost_bound: CostBound::zero(),
        }
    }

    pub fn with_cost_bound(mut self, cost_bound: CostBound) -> Self {
        self.cost_bound = cost_bound;
        self
    }
}

/// Row-major grid of tile indices; row 0 is the top.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tiling {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<usize>,
}

impl Tiling {
    pub fn new(width: usize, height: usize, cells: Vec<usize>) -> Result<Self, TilingError> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(TilingError::Dimension(format!(
                "{} cells for a {height}x{width} grid",
                cells.len()
            )));
        }
        Ok(Tiling {
            width,
            height,
            cells,
        })
    }

    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self, TilingError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != width) {
            return Err(TilingError::Dimension("ragged rows".into()));
        }
        Tiling::new(width, height, rows.into_iter().flatten().collect())
    }

    pub fn uniform(n: usize, tile: usize) -> Self {
        Tiling {
            width: n,
            height: n,
            cells: vec![tile; n * n],
        }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, tile: usize) {
        self.cells[row * self.width + col] = tile;
    }

    pub fn row(&self, row: usize) -> &[usize] {
        &self.cells[row * self.width..(row + 1) * self.width]
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.width).map(|r| r.to_vec()).collect()
    }

    /// Mirror image across the vertical axis.
    pub fn reflect_horizontal(&self) -> Tiling {
        let mut out = self.clone();
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(r, c, self.get(r, self.width - 1 - c));
            }
        }
        out
    }

    /// Mirror image across the horizontal axis.
    pub fn reflect_vertical(&self) -> Tiling {
        let mut out = self.clone();
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(r, c, self.get(self.height - 1 - r, c));
            }
        }
        out
    }

    /// Quarter turn clockwise.
    pub fn rotate_clockwise(&self) -> Tiling {
        let (h, w) = (self.height, self.width);
        let mut cells = vec![0; h * w];
        for r in 0..h {
            for c in 0..w {
                // new grid is w rows by h cols; (r, c) -> (c, h-1-r)
                cells[c * h + (h - 1 - r)] = self.get(r, c);
            }
        }
        Tiling {
            width: h,
            height: w,
            cells,
        }
    }

    /// Cyclic shift by `dr` rows down and `dc` columns right.
    pub fn shift(&self, dr: usize, dc: usize) -> Tiling {
        let mut out = self.clone();
        for r in 0..self.height {
            for c in 0..self.width {
                out.set(
                    (r + dr) % self.height,
                    (c + dc) % self.width,
                    self.get(r, c),
                );
            }
        }
        out
    }

    /// ASCII rendering with tile names padded to a common width.
    pub fn render(&self, rules: &RuleSet) -> String {
        let pad = self
            .cells
            .iter()
            .map(|&t| rules.tile_name(t).chars().count())
            .max()
            .unwrap_or(1);
        let mut s = String::new();
        for r in 0..self.height {
            let line: Vec<String> = self
                .row(r)
                .iter()
                .map(|&t| format!("{:<pad$}", rules.tile_name(t)))
                .collect();
            s.push_str(line.join(" ").trim_end());
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Two adjacent cells: `first` is left of / below `second`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SitePair {
    pub axis: Axis,
    pub first: (usize, usize),
    pub second: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryMismatch {
    pub cell: (usize, usize),
    pub expected: usize,
    pub found: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub total_cost: i64,
    pub violations: Vec<(SitePair, i64)>,
    pub boundary_mismatches: Vec<BoundaryMismatch>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty() && self.boundary_mismatches.is_empty()
    }
}

/// Calls `f(pair, first_tile, second_tile)` for every adjacent pair, wrapping
/// both axes iff `periodic`.
pub fn for_each_pair(t: &Tiling, periodic: bool, mut f: impl FnMut(SitePair, usize, usize)) {
    let (h, w) = (t.height, t.width);
    for r in 0..h {
        for c in 0..w {
            if c + 1 < w || periodic {
                let c2 = (c + 1) % w;
                f(
                    SitePair {
                        axis: Axis::Horizontal,
                        first: (r, c),
                        second: (r, c2),
                    },
                    t.get(r, c),
                    t.get(r, c2),
                );
            }
            // (r, c) is above (r + 1, c)
            if r + 1 < h || periodic {
                let r2 = (r + 1) % h;
                f(
                    SitePair {
                        axis: Axis::Vertical,
                        first: (r2, c),
                        second: (r, c),
                    },
                    t.get(r2, c),
                    t.get(r, c),
                );
            }
        }
    }
}

/// Total cost, sentinel violations, and boundary mismatches of a tiling.
pub fn validate_tiling(
    instance: &TilingInstance,
    t: &Tiling,
) -> Result<ValidationReport, TilingError> {
    let rules = &instance.rules;
    if t.width == 0 || t.height == 0 || t.cells.len() != t.width * t.height {
        return Err(TilingError::Dimension(format!(
            "{} cells for a {}x{} grid",
            t.cells.len(),
            t.height,
            t.width
        )));
    }
    if let Some(&bad) = t.cells.iter().find(|&&x| x >= rules.len()) {
        return Err(TilingError::UnknownTile {
            index: bad,
            count: rules.len(),
        });
    }
    if let Some(bt) = instance.bc.tile() {
        if bt >= rules.len() {
            return Err(TilingError::UnknownTile {
                index: bt,
                count: rules.len(),
            });
        }
    }
    let mut total_cost = 0i64;
    let mut violations = Vec::new();
    for_each_pair(t, instance.bc.is_periodic(), |pair, a, b| {
        let w = match pair.axis {
            Axis::Horizontal => rules.h(a, b),
            Axis::Vertical => rules.v(a, b),
        };
        total_cost += w;
        if w == rules.sentinel() {
            violations.push((pair, w));
        }
    });
    let boundary_mismatches = instance
        .bc
        .demands(t.height, t.width)
        .into_iter()
        .filter(|&((r, c), tile)| t.get(r, c) != tile)
        .map(|((r, c), tile)| BoundaryMismatch {
            cell: (r, c),
            expected: tile,
            found: t.get(r, c),
        })
        .collect();
    Ok(ValidationReport {
        total_cost,
        violations,
        boundary_mismatches,
    })
}

/// Same-site compatibility between two layers: `allowed[a][b]` for tile `a`
/// of layer `layers.0` and tile `b` of layer `layers.1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossLayerRule {
    pub layers: (usize, usize),
    pub allowed: Vec<Vec<bool>>,
}

/// Extra weight on a pair of full tuples (`first` left of / below `second`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionalTerm {
    pub axis: Axis,
    pub first: Vec<usize>,
    pub second: Vec<usize>,
    pub weight: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LayerSpec {
    pub layers: Vec<RuleSet>,
    pub cross_layer: Vec<CrossLayerRule>,
    pub conditional: Vec<ConditionalTerm>,
}

/// Product rule set plus the tuple behind each product tile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredRuleSet {
    pub rules: RuleSet,
    pub tuples: Vec<Vec<usize>>,
}

impl LayeredRuleSet {
    pub fn index_of_tuple(&self, tuple: &[usize]) -> Option<usize> {
        self.tuples.iter().position(|t| t == tuple)
    }

    /// Projects a product tiling onto one layer.
    pub fn project(&self, t: &Tiling, layer: usize) -> Tiling {
        Tiling {
            width: t.width,
            height: t.height,
            cells: t.cells.iter().map(|&x| self.tuples[x][layer]).collect(),
        }
    }
}

/// Builds the product rule set of a layer specification.
///
/// A product weight is the sentinel if any layer weight or conditional term
/// is the sentinel, otherwise the sum of layer weights plus conditional terms.
pub fn build_layered_rule_set(spec: &LayerSpec) -> Result<LayeredRuleSet, TilingError> {
    if spec.layers.is_empty() || spec.layers.iter().any(|l| l.is_empty()) {
        return Err(TilingError::Layer("empty layer".into()));
    }
    let sentinel = spec.layers[0].sentinel();
    if spec.layers.iter().any(|l| l.sentinel() != sentinel) {
        return Err(TilingError::Layer("layers disagree on the sentinel".into()));
    }
    let k = spec.layers.len();
    for rule in &spec.cross_layer {
        let (a, b) = rule.layers;
        if a >= k || b >= k || a == b {
            return Err(TilingError::Layer(format!("bad cross-layer pair {a},{b}")));
        }
        if rule.allowed.len() != spec.layers[a].len()
            || rule.allowed.iter().any(|r| r.len() != spec.layers[b].len())
        {
            return Err(TilingError::Layer("cross-layer matrix shape".into()));
        }
    }
    let mut tuples = Vec::new();
    let mut cur = vec![0usize; k];
    'outer: loop {
        let ok = spec
            .cross_layer
            .iter()
            .all(|r| r.allowed[cur[r.layers.0]][cur[r.layers.1]]);
        if ok {
            tuples.push(cur.clone());
        }
        for i in (0..k).rev() {
            cur[i] += 1;
            if cur[i] < spec.layers[i].len() {
                continue 'outer;
            }
            cur[i] = 0;
        }
        break;
    }
    let index: HashMap<&[usize], usize> = tuples
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_slice(), i))
        .collect();
    let mut extra: HashMap<(Axis, usize, usize), i64> = HashMap::new();
    for term in &spec.conditional {
        if term.first.len() != k || term.second.len() != k {
            return Err(TilingError::Layer("conditional term arity".into()));
        }
        for (i, (&a, &b)) in term.first.iter().zip(&term.second).enumerate() {
            if a >= spec.layers[i].len() || b >= spec.layers[i].len() {
                return Err(TilingError::Layer("conditional term tile out of range".into()));
            }
        }
        if let (Some(&a), Some(&b)) = (
            index.get(term.first.as_slice()),
            index.get(term.second.as_slice()),
        ) {
            let slot = extra.entry((term.axis, a, b)).or_insert(0);
            *slot = combine(*slot, term.weight, sentinel);
        }
    }
    let m = tuples.len();
    let mut horizontal = vec![vec![0i64; m]; m];
    let mut vertical = vec![vec![0i64; m]; m];
    for a in 0..m {
        for b in 0..m {
            let mut hw = 0i64;
            let mut vw = 0i64;
            for (layer, rules) in spec.layers.iter().enumerate() {
                hw = combine(hw, rules.h(tuples[a][layer], tuples[b][layer]), sentinel);
                vw = combine(vw, rules.v(tuples[a][layer], tuples[b][layer]), sentinel);
            }
            if let Some(&w) = extra.get(&(Axis::Horizontal, a, b)) {
                hw = combine(hw, w, sentinel);
            }
            if let Some(&w) = extra.get(&(Axis::Vertical, a, b)) {
                vw = combine(vw, w, sentinel);
            }
            horizontal[a][b] = hw;
            vertical[a][b] = vw;
        }
    }
    let names = tuples
        .iter()
        .map(|t| {
            t.iter()
                .enumerate()
                .map(|(l, &x)| spec.layers[l].tile_name(x).to_string())
                .collect::<Vec<_>>()
                .join("|")
        })
        .collect();
    Ok(LayeredRuleSet {
        rules: RuleSet::new(names, horizontal, vertical, sentinel)?,
        tuples,
    })
}

#[inline]
fn combine(acc: i64, w: i64, sentinel: i64) -> i64 {
    if acc == sentinel || w == sentinel {
        sentinel
    } else {
        acc + w
    }
}

impl fmt::Display for Symmetry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symmetry::None => "none",
            Symmetry::Reflection => "reflection",
            Symmetry::Rotation => "rotation",
        })
    }
}
