//! Rule-set fixtures for the boundary, weighted and symmetric variants, golden
//! golden tilings, row-pair analyzers, and symmetry constructions.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::grid::{count_rows, solve_grid, solve_grid_with, SolveError, SolveMode, SolveResult, SolverConfig};
use crate::line::{cheapest_walk, min_plus_line, TileGraph};
use crate::tiling::{
    build_layered_rule_set, validate_tiling, Axis, BoundaryCondition, ConditionalTerm, CostBound,
    CrossLayerRule, LayerSpec, LayeredRuleSet, RuleSet, Symmetry, Tiling, TilingError, TilingInstance,
    DEFAULT_SENTINEL,
};

/// Weight standing for a "forbidden" pair inside weighted fixtures.
pub const FORBIDDEN: i64 = 30;

#[derive(Debug, Error)]
pub enum VariantError {
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("checksum mismatch for {name}: expected {expected}, found {found}")]
    Checksum {
        name: String,
        expected: String,
        found: String,
    },
    #[error("unknown tile {tile:?} in {name}")]
    UnknownTile { name: String, tile: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Tiling(#[from] TilingError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

// ---------------------------------------------------------------------------
// Rule-set fixtures

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FixtureId {
    PeriodicUnweighted,
    WeightedOpen,
    WeightedPeriodic,
    ReflectionWeightedL1,
    ReflectionWeightedL2L3,
    PeriodicReflectionWeighted,
}

impl FixtureId {
    pub const ALL: [FixtureId; 6] = [
        FixtureId::PeriodicUnweighted,
        FixtureId::WeightedOpen,
        FixtureId::WeightedPeriodic,
        FixtureId::ReflectionWeightedL1,
        FixtureId::ReflectionWeightedL2L3,
        FixtureId::PeriodicReflectionWeighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixtureId::PeriodicUnweighted => "periodic-unweighted",
            FixtureId::WeightedOpen => "weighted-open",
            FixtureId::WeightedPeriodic => "weighted-periodic",
            FixtureId::ReflectionWeightedL1 => "reflection-weighted-L1",
            FixtureId::ReflectionWeightedL2L3 => "reflection-weighted-L2L3",
            FixtureId::PeriodicReflectionWeighted => "periodic-reflection-weighted",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == name)
    }

    /// Frozen SHA-256 of the canonical transcription.
    fn checksum(self) -> &'static str {
        match self {
            FixtureId::PeriodicUnweighted => "104556a8b6c69ee87ba4361a38668fce3af206b922f27ad7a9390a8447506318",
            FixtureId::WeightedOpen => "fe0b34c8de5d8b86c0d6bb814596dc2b88434f0c91aae4dbab5732814ce3c55f",
            FixtureId::WeightedPeriodic => "27c5c8a63bab3fa0d2f6635f4c260629eb266c3f0d5958f48132b79464b9a901",
            FixtureId::ReflectionWeightedL1 => "fed995d9be1b5d598e80870bcffc87495d8aacde237b8412b903932d1cdbf9fc",
            FixtureId::ReflectionWeightedL2L3 => "d3e8c997b5aee95d02176b98d95abac60f87468ecba988e9788cd93af097c208",
            FixtureId::PeriodicReflectionWeighted => "1b0941af102fe69b8ad161d814d85d90953a00ee1bdcb04d6b5a8520dad6c576",
        }
    }
}

/// Transcribed tables of one variant.
///
/// The first `product_layers` layers combine into [`Fixture::instance`]; any
/// further layer has weights stated for one fixed orientation and is kept
/// alongside for inspection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub id: FixtureId,
    pub spec: LayerSpec,
    pub product_layers: usize,
    pub bc: BoundaryCondition,
    pub cost_bound: CostBound,
}

impl Fixture {
    pub fn layers(&self) -> &[RuleSet] {
        &self.spec.layers
    }

    /// Product over the first `product_layers` layers.
    pub fn layered(&self) -> Result<LayeredRuleSet, TilingError> {
        let k = self.product_layers;
        let spec = LayerSpec {
            layers: self.spec.layers[..k].to_vec(),
            cross_layer: self
                .spec
                .cross_layer
                .iter()
                .filter(|r| r.layers.0 < k && r.layers.1 < k)
                .cloned()
                .collect(),
            conditional: self.spec.conditional.clone(),
        };
        build_layered_rule_set(&spec)
    }

    pub fn instance(&self) -> Result<TilingInstance, TilingError> {
        let rules = if self.product_layers == 1 {
            self.spec.layers[0].clone()
        } else {
            self.layered()?.rules
        };
        Ok(TilingInstance::new(rules, self.bc.clone()).with_cost_bound(self.cost_bound.clone()))
    }

    /// SHA-256 over a canonical JSON rendering of every table.
    pub fn checksum(&self) -> String {
        let layers: Vec<Value> = self
            .spec
            .layers
            .iter()
            .map(|l| {
                json!({
                    "tiles": l.tiles(),
                    "horizontal": l.horizontal_matrix(),
                    "vertical": l.vertical_matrix(),
                    "sentinel": l.sentinel(),
                })
            })
            .collect();
        let cross: Vec<Value> = self
            .spec
            .cross_layer
            .iter()
            .map(|r| json!({"layers": [r.layers.0, r.layers.1], "allowed": r.allowed}))
            .collect();
        let cond: Vec<Value> = self
            .spec
            .conditional
            .iter()
            .map(|t| {
                let axis = match t.axis {
                    Axis::Horizontal => "h",
                    Axis::Vertical => "v",
                };
                json!([axis, t.first, t.second, t.weight])
            })
            .collect();
        let doc = json!({
            "id": self.id.name(),
            "layers": layers,
            "cross": cross,
            "conditional": cond,
            "productLayers": self.product_layers,
            "bc": format!("{:?}", self.bc),
            "costBound": self.cost_bound.0,
        });
        sha256_hex(doc.to_string().as_bytes())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn yes_no(rows: &[&str]) -> Vec<Vec<bool>> {
    rows.iter()
        .map(|r| r.split_whitespace().map(|c| c == "Y").collect())
        .collect()
}

fn allowed_rules(tiles: &[&str], h: &[&str], v: &[&str]) -> RuleSet {
    let (h, v) = (yes_no(h), yes_no(v));
    RuleSet::from_allowed(names(tiles), |a, b| h[a][b], |a, b| v[a][b])
}

fn weighted_rules(tiles: &[&str], h: &[&[i64]], v: &[&[i64]]) -> RuleSet {
    let mat = |m: &[&[i64]]| m.iter().map(|r| r.to_vec()).collect::<Vec<_>>();
    RuleSet::new(names(tiles), mat(h), mat(v), DEFAULT_SENTINEL).expect("fixture table is square")
}

const PERIODIC_L1: [&str; 7] = ["H", "V", "C", "White", "WhiteU", "Black", "BlackD"];
const PERIODIC_L2: [&str; 10] = ["N", "S", "E", "W", "NW", "NE", "SW", "SE", "Light", "Dark"];

fn periodic_unweighted() -> Fixture {
    let l1 = allowed_rules(
        &PERIODIC_L1,
        &[
            "Y N Y N N N N",
            "N N N Y N Y Y",
            "Y N N N N N N",
            "N Y N N N Y Y",
            "N Y N N N Y N",
            "N Y N Y N N N",
            "N Y N N Y N N",
        ],
        &[
            "N N N Y N Y Y",
            "N Y Y N N N N",
            "N Y N N N N N",
            "Y N N N N Y Y",
            "Y N N N N Y N",
            "Y N N Y N N N",
            "Y N N N Y N N",
        ],
    );
    let l2 = allowed_rules(
        &PERIODIC_L2,
        &[
            "Y N N N N Y N N N N",
            "N Y N N N N N Y N N",
            "N N N N N N N N N Y",
            "N N N N N N N N Y N",
            "Y N N N N N N N N N",
            "N N N N N N N N N Y",
            "N Y N N N N N N N N",
            "N N N N N N N N N Y",
            "N N Y N N N N N Y N",
            "N N N Y Y N Y N N Y",
        ],
        &[
            "N N N N N N N N N Y",
            "N N N N N N N N Y N",
            "N N Y N N Y N N N N",
            "N N N Y Y N N N N N",
            "N N N N N N N N N Y",
            "N N N N N N N N N Y",
            "N N N Y N N N N N N",
            "N N Y N N N N N N N",
            "Y N N N N N N N Y N",
            "N Y N N N N Y Y N Y",
        ],
    );
    let compat = yes_no(&[
        "N N N N N N N N N Y",
        "N N N N N N N N N Y",
        "N N N N N N N N N Y",
        "Y Y Y Y N Y Y N Y N",
        "Y Y Y Y N Y Y N Y N",
        "Y Y Y Y N Y Y N Y N",
        "N N N N Y N N Y Y N",
    ]);
    Fixture {
        id: FixtureId::PeriodicUnweighted,
        spec: LayerSpec {
            layers: vec![l1, l2],
            cross_layer: vec![CrossLayerRule {
                layers: (0, 1),
                allowed: compat,
            }],
            conditional: Vec::new(),
        },
        product_layers: 2,
        bc: BoundaryCondition::Periodic,
        cost_bound: CostBound::zero(),
    }
}

fn weighted_open() -> Fixture {
    let rules = weighted_rules(
        &["NW", "NE", "SW", "SE", "White"],
        &[
            &[4, 4, 4, 4, -1],
            &[4, 4, 4, 4, 2],
            &[4, 4, 4, 4, -1],
            &[4, 4, 4, 4, 2],
            &[2, -1, 2, -1, 0],
        ],
        &[
            &[4, 4, 4, 4, 2],
            &[4, 4, 4, 4, 2],
            &[4, 4, 4, 4, 0],
            &[4, 4, 4, 4, 0],
            &[0, 0, 2, 2, 0],
        ],
    );
    single_layer(FixtureId::WeightedOpen, rules, BoundaryCondition::Open, CostBound(vec![-4]))
}

fn weighted_periodic() -> Fixture {
    let rules = weighted_rules(
        &["White", "Black", "H", "V", "C"],
        &[
            &[3, 0, 3, 0, 3],
            &[0, 3, 3, 0, 3],
            &[3, 3, 0, 3, 1],
            &[0, 0, 3, 3, 3],
            &[3, 3, 1, 3, 3],
        ],
        &[
            &[3, 0, 0, 3, 3],
            &[0, 3, 0, 3, 3],
            &[0, 0, 3, 3, 3],
            &[3, 3, 3, 0, 0],
            &[3, 3, 3, 0, 3],
        ],
    );
    single_layer(FixtureId::WeightedPeriodic, rules, BoundaryCondition::Periodic, CostBound(vec![2]))
}

const REFLECTION_L1: [&str; 9] = ["V", "H", "C", "Black", "White", "Dark", "Light", "Ring", "Circ"];
const REFLECTION_L2: [&str; 3] = ["HH", "HHV", "Cross"];
const REFLECTION_L3: [&str; 3] = ["VV", "HVV", "CrossRev"];

fn reflection_l1_rules() -> RuleSet {
    const F: i64 = FORBIDDEN;
    weighted_rules(
        &REFLECTION_L1,
        &[
            &[F, F, F, F, 6, 6, F, F, 7],
            &[F, -11, 0, F, F, F, F, F, F],
            &[F, 0, F, F, F, F, F, F, F],
            &[F, F, F, F, 0, F, F, 1, F],
            &[6, F, F, 0, F, F, F, 1, 1],
            &[6, F, F, F, F, F, 0, 1, 1],
            &[F, F, F, F, F, 0, F, 1, F],
            &[F, F, F, 1, 1, 1, 1, F, F],
            &[7, F, F, F, 1, 1, F, F, F],
        ],
        &[
            &[-11, F, 0, F, F, F, F, F, F],
            &[F, F, F, 6, 6, 6, 6, F, 7],
            &[0, F, F, F, F, F, F, F, F],
            &[F, 6, F, F, F, F, 0, 1, F],
            &[F, 6, F, F, F, 0, F, 1, 1],
            &[F, 6, F, F, 0, F, F, 1, 1],
            &[F, 6, F, 0, F, F, F, 1, F],
            &[F, F, F, 1, 1, 1, 1, F, F],
            &[F, 7, F, F, 1, 1, F, F, F],
        ],
    )
}

fn reflection_l1() -> Fixture {
    single_layer(
        FixtureId::ReflectionWeightedL1,
        reflection_l1_rules(),
        BoundaryCondition::Open,
        CostBound(vec![76, -16]),
    )
}

/// Direction layer: `along` is the axis on which equal tiles are forbidden,
/// the other axis only admits equal tiles.
fn direction_layer(tiles: &[&str], along: Axis) -> RuleSet {
    let m = tiles.len();
    let same = |a: usize, b: usize| if a == b { 0 } else { FORBIDDEN };
    let diff = |a: usize, b: usize| if a == b { FORBIDDEN } else { 0 };
    let build = |f: &dyn Fn(usize, usize) -> i64| -> Vec<Vec<i64>> {
        (0..m).map(|a| (0..m).map(|b| f(a, b)).collect()).collect()
    };
    let (h, v) = match along {
        Axis::Horizontal => (build(&diff), build(&same)),
        Axis::Vertical => (build(&same), build(&diff)),
    };
    RuleSet::new(names(tiles), h, v, DEFAULT_SENTINEL).expect("square")
}

/// Penalty for a pair of (marker-layer tile, direction tile) sites under the
/// bracket rules, as an unordered pair. `None` means the pair is unrestricted.
///
/// A marker (`Ring`/`Circ`) next to `Y` in {White, Black, Dark, Light}: when
/// the direction tile steps forward from the marker to `Y`, `Y` must be White
/// or Light; when it steps forward from `Y` to the marker, `Y` must be Black
/// or Dark.
fn bracket_penalty(l1: &RuleSet, (a, x): (usize, usize), (b, y): (usize, usize)) -> Option<i64> {
    let name = |t: usize| l1.tile_name(t);
    let marker = |t: usize| matches!(name(t), "Ring" | "Circ");
    let plain = |t: usize| matches!(name(t), "White" | "Black" | "Dark" | "Light");
    if x == y {
        return None;
    }
    let (mark_dir, other, other_dir) = if marker(a) && plain(b) {
        (x, b, y)
    } else if marker(b) && plain(a) {
        (y, a, x)
    } else {
        return None;
    };
    let forward = (mark_dir + 1) % 3 == other_dir;
    let ok = if forward {
        matches!(name(other), "White" | "Light")
    } else {
        matches!(name(other), "Black" | "Dark")
    };
    (!ok).then_some(FORBIDDEN)
}

fn reflection_l2l3() -> Fixture {
    let l1 = reflection_l1_rules();
    let l2 = direction_layer(&REFLECTION_L2, Axis::Horizontal);
    let l3 = direction_layer(&REFLECTION_L3, Axis::Vertical);
    let idx = |n: &str| l1.index_of(n).unwrap();
    let (v, c, h) = (idx("V"), idx("C"), idx("H"));
    let l2_compat: Vec<Vec<bool>> = (0..l1.len())
        .map(|a| (0..3).map(|x| !(a == v || a == c) || x == 0).collect())
        .collect();
    let l3_compat: Vec<Vec<bool>> = (0..l1.len())
        .map(|a| (0..3).map(|x| a != h || x == 0).collect())
        .collect();
    let mut conditional = Vec::new();
    for a in 0..l1.len() {
        for b in 0..l1.len() {
            for x in 0..3 {
                for y in 0..3 {
                    let Some(w) = bracket_penalty(&l1, (a, x), (b, y)) else {
                        continue;
                    };
                    for z in 0..3 {
                        // horizontal: layer 2 carries the direction, layer 3 is free
                        conditional.push(ConditionalTerm {
                            axis: Axis::Horizontal,
                            first: vec![a, x, z],
                            second: vec![b, y, z],
                            weight: w,
                        });
                    }
                    for z in 0..3 {
                        // vertical: layer 3 carries the direction, layer 2 is free
                        conditional.push(ConditionalTerm {
                            axis: Axis::Vertical,
                            first: vec![a, z, x],
                            second: vec![b, z, y],
                            weight: w,
                        });
                    }
                }
            }
        }
    }
    Fixture {
        id: FixtureId::ReflectionWeightedL2L3,
        spec: LayerSpec {
            layers: vec![l1, l2, l3],
            cross_layer: vec![
                CrossLayerRule {
                    layers: (0, 1),
                    allowed: l2_compat,
                },
                CrossLayerRule {
                    layers: (0, 2),
                    allowed: l3_compat,
                },
            ],
            conditional,
        },
        product_layers: 3,
        bc: BoundaryCondition::Open,
        cost_bound: CostBound(vec![76, -16]),
    }
}

const PERIODIC_REFLECTION_L1: [&str; 7] = ["H", "Hrev", "Black", "White", "Dark", "Light", "Ring"];
const PERIODIC_REFLECTION_L4: [&str; 12] = ["N", "S", "E", "W", "NW", "NE", "SW", "SE", "White", "H", "V", "C"];

fn periodic_reflection_l1_rules() -> RuleSet {
    const F: i64 = FORBIDDEN;
    weighted_rules(
        &PERIODIC_REFLECTION_L1,
        &[
            &[F, 0, F, F, F, F, 1],
            &[0, F, F, F, F, F, 1],
            &[F, F, F, 0, F, F, 1],
            &[F, F, 0, F, F, F, 1],
            &[F, F, F, F, F, 0, 1],
            &[F, F, F, F, 0, F, 1],
            &[1, 1, 1, 1, 1, 1, F],
        ],
        &[
            &[F, F, 1, F, 1, F, 2],
            &[F, F, F, 1, F, 1, 2],
            &[1, F, F, F, F, 0, 1],
            &[F, 1, F, F, 0, F, 1],
            &[1, F, F, 0, F, F, 1],
            &[F, 1, 0, F, F, F, 1],
            &[2, 2, 1, 1, 1, 1, F],
        ],
    )
}

/// Layer 4 weights in the orientation where "left" and "below" are read off
/// the direction layers.
fn periodic_reflection_l4_rules() -> RuleSet {
    const F: i64 = FORBIDDEN;
    weighted_rules(
        &PERIODIC_REFLECTION_L4,
        &[
            &[0, F, F, F, F, 0, F, F, F, F, F, F],
            &[F, 0, F, F, F, F, F, 0, F, F, F, F],
            &[F, F, F, F, F, F, F, F, F, F, 0, F],
            &[F, F, F, F, F, F, F, F, 0, F, F, F],
            &[0, F, F, F, F, 0, F, F, F, F, F, F],
            &[F, F, F, F, F, F, F, F, F, F, 0, F],
            &[F, 0, F, F, F, F, F, 0, F, F, F, F],
            &[F, F, F, F, F, F, F, F, F, F, 0, F],
            &[F, F, 0, F, F, F, F, F, 0, F, F, F],
            &[F, F, F, F, F, F, F, F, F, 0, F, 0],
            &[F, F, F, 0, 0, F, 0, F, F, F, F, F],
            &[F, F, F, F, F, F, F, F, F, 0, F, F],
        ],
        &[
            &[F, F, F, F, F, F, F, F, F, 0, F, F],
            &[F, F, F, F, F, F, F, F, 0, F, F, F],
            &[F, F, 0, F, F, 0, F, F, F, F, F, F],
            &[F, F, F, 0, 0, F, F, F, F, F, F, F],
            &[F, F, F, F, F, F, F, F, F, 0, F, F],
            &[F, F, F, F, F, F, F, F, F, 0, F, F],
            &[F, F, F, 0, 0, F, F, F, F, F, F, F],
            &[F, F, 0, F, F, 0, F, F, F, F, F, F],
            &[0, F, F, F, F, F, F, F, 0, F, F, F],
            &[F, 0, F, F, F, F, 0, 0, F, F, F, F],
            &[F, F, F, F, F, F, F, F, F, F, 0, 0],
            &[F, F, F, F, F, F, F, F, F, F, 0, F],
        ],
    )
}

fn periodic_reflection() -> Fixture {
    let compat = yes_no(&[
        "N N N N N N N N N Y N N",
        "N N N N N N N N N Y N N",
        "Y Y Y Y Y Y Y Y Y N Y N",
        "Y Y Y Y Y Y Y Y Y N Y N",
        "Y Y Y Y Y Y Y Y Y N Y N",
        "Y Y Y Y Y Y Y Y Y N Y N",
        "Y Y Y Y Y Y Y Y Y N Y Y",
    ]);
    Fixture {
        id: FixtureId::PeriodicReflectionWeighted,
        spec: LayerSpec {
            layers: vec![periodic_reflection_l1_rules(), periodic_reflection_l4_rules()],
            cross_layer: vec![CrossLayerRule {
                layers: (0, 1),
                allowed: compat,
            }],
            conditional: Vec::new(),
        },
        product_layers: 1,
        bc: BoundaryCondition::Periodic,
        cost_bound: CostBound(vec![-2, 6]),
    }
}

fn single_layer(id: FixtureId, rules: RuleSet, bc: BoundaryCondition, cost_bound: CostBound) -> Fixture {
    Fixture {
        id,
        spec: LayerSpec {
            layers: vec![rules],
            cross_layer: Vec::new(),
            conditional: Vec::new(),
        },
        product_layers: 1,
        bc,
        cost_bound,
    }
}

/// Builds a fixture without checking its frozen checksum.
pub fn build_fixture(id: FixtureId) -> Fixture {
    match id {
        FixtureId::PeriodicUnweighted => periodic_unweighted(),
        FixtureId::WeightedOpen => weighted_open(),
        FixtureId::WeightedPeriodic => weighted_periodic(),
        FixtureId::ReflectionWeightedL1 => reflection_l1(),
        FixtureId::ReflectionWeightedL2L3 => reflection_l2l3(),
        FixtureId::PeriodicReflectionWeighted => periodic_reflection(),
    }
}

/// Builds a fixture and checks it against its frozen checksum.
pub fn load_fixture(id: FixtureId) -> Result<Fixture, VariantError> {
    let f = build_fixture(id);
    let found = f.checksum();
    if found != id.checksum() {
        return Err(VariantError::Checksum {
            name: id.name().into(),
            expected: id.checksum().into(),
            found,
        });
    }
    Ok(f)
}

// ---------------------------------------------------------------------------
// Golden tilings

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GoldenId {
    PeriodicLayered,
    WeightedOpen,
    ReflectionL1,
    ReflectionLayered,
    ExtensionBase,
    ExtensionGrown,
    RotationFill,
    PeriodicReflection,
    PeriodicReflectionLayer2,
}

impl GoldenId {
    pub const ALL: [GoldenId; 9] = [
        GoldenId::PeriodicLayered,
        GoldenId::WeightedOpen,
        GoldenId::ReflectionL1,
        GoldenId::ReflectionLayered,
        GoldenId::ExtensionBase,
        GoldenId::ExtensionGrown,
        GoldenId::RotationFill,
        GoldenId::PeriodicReflection,
        GoldenId::PeriodicReflectionLayer2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GoldenId::PeriodicLayered => "periodic-layered",
            GoldenId::WeightedOpen => "weighted-open",
            GoldenId::ReflectionL1 => "reflection-l1",
            GoldenId::ReflectionLayered => "reflection-layered",
            GoldenId::ExtensionBase => "extension-base",
            GoldenId::ExtensionGrown => "extension-grown",
            GoldenId::RotationFill => "rotation-fill",
            GoldenId::PeriodicReflection => "periodic-reflection",
            GoldenId::PeriodicReflectionLayer2 => "periodic-reflection-layer2",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == name)
    }
}

/// Golden data files with their frozen SHA-256.
const GOLDEN_FILES: [(&str, &str, &str); 10] = [
    (
        "periodic-layer1",
        include_str!("../data/goldens/periodic-layer1.txt"),
        "2ec00eb778daf8899346097334b1e1abd47b4821fe67065968c22f650914ae1c",
    ),
    (
        "periodic-layer2",
        include_str!("../data/goldens/periodic-layer2.txt"),
        "f089a04aca0d8dae58576f16abe16b5e05ec5d1d1dfac8412712e72aa042bb82",
    ),
    (
        "weighted-open",
        include_str!("../data/goldens/weighted-open.txt"),
        "f869a48aeef6559793173a613cfbc2f72f57dca36143e131d0b9ff46393cc3af",
    ),
    (
        "reflection-l1",
        include_str!("../data/goldens/reflection-l1.txt"),
        "4cc2b6c22e6616fb973d2311412badf2134bb2e1ca19b9b553c37e098d7ec9c1",
    ),
    (
        "reflection-layer2",
        include_str!("../data/goldens/reflection-layer2.txt"),
        "83ae712246194ca4eb7a9e248c7f0d17bec1ee4d697f666099efb646d8eec0a3",
    ),
    (
        "extension-base",
        include_str!("../data/goldens/extension-base.txt"),
        "9ac1204ca747107ec16b3087b9ca42b364117bdf490a20e6a1fff191ba4a6344",
    ),
    (
        "extension-grown",
        include_str!("../data/goldens/extension-grown.txt"),
        "ccfacc2f51902406880ddaaf9cb6162f3a85f8f963bb4c9b13fba3bc07be5539",
    ),
    (
        "rotation-fill",
        include_str!("../data/goldens/rotation-fill.txt"),
        "73fbe81888fdf85152558086edcf232c063fd0d5866aa1a8e617e90995153d27",
    ),
    (
        "periodic-reflection",
        include_str!("../data/goldens/periodic-reflection.txt"),
        "f568b3ab3b11061f64e55235a3b8918db853f66084ad8c01dfb46ab05cc4b588",
    ),
    (
        "periodic-reflection-layer2",
        include_str!("../data/goldens/periodic-reflection-layer2.txt"),
        "80010a0a0e904161ea4640ec215f68ac5b644df1b40a398cba3381b794a0ab2f",
    ),
];

/// Verified grid of tile names from a golden data file.
pub fn golden_names(file: &str) -> Result<Vec<Vec<String>>, VariantError> {
    let (_, data, sha) = GOLDEN_FILES
        .iter()
        .find(|f| f.0 == file)
        .ok_or_else(|| VariantError::UnknownFixture(file.into()))?;
    let found = sha256_hex(data.as_bytes());
    if found != *sha {
        return Err(VariantError::Checksum {
            name: file.into(),
            expected: sha.to_string(),
            found,
        });
    }
    Ok(data
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn golden_indices(file: &str, rules: &RuleSet) -> Result<Vec<Vec<usize>>, VariantError> {
    golden_names(file)?
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|t| {
                    rules.index_of(&t).ok_or_else(|| VariantError::UnknownTile {
                        name: file.into(),
                        tile: t,
                    })
                })
                .collect()
        })
        .collect()
}

/// A transcribed tiling together with the instance it is checked against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Golden {
    pub id: GoldenId,
    pub instance: TilingInstance,
    pub tiling: Tiling,
    /// Total cost the tiling must have (all sentinel-free).
    pub expected_cost: i64,
}

impl Golden {
    pub fn render(&self) -> String {
        self.tiling.render(&self.instance.rules)
    }
}

/// Rule set whose allowed pairs are exactly the adjacent pairs of `rows`,
/// closed under reflection; with `rotation`, horizontal and vertical merge.
pub fn rules_from_adjacency(rows: &[Vec<String>], rotation: bool) -> RuleSet {
    let mut tiles: Vec<String> = Vec::new();
    for r in rows {
        for t in r {
            if !tiles.contains(t) {
                tiles.push(t.clone());
            }
        }
    }
    let idx = |t: &String| tiles.iter().position(|x| x == t).unwrap();
    let m = tiles.len();
    let mut h = vec![vec![false; m]; m];
    let mut v = vec![vec![false; m]; m];
    for (r, row) in rows.iter().enumerate() {
        for (c, t) in row.iter().enumerate() {
            if c + 1 < row.len() {
                let (a, b) = (idx(t), idx(&row[c + 1]));
                h[a][b] = true;
                h[b][a] = true;
            }
            if r + 1 < rows.len() {
                let (a, b) = (idx(t), idx(&rows[r + 1][c]));
                v[a][b] = true;
                v[b][a] = true;
            }
        }
    }
    if rotation {
        for a in 0..m {
            for b in 0..m {
                let any = h[a][b] || v[a][b];
                h[a][b] = any;
                v[a][b] = any;
            }
        }
    }
    RuleSet::from_allowed(tiles.clone(), |a, b| h[a][b], |a, b| v[a][b])
}

/// Side sequence of the rotation golden, read along its top row.
pub fn rotation_side() -> Result<Vec<String>, VariantError> {
    Ok(golden_names("rotation-fill")?.remove(0))
}

pub fn golden(id: GoldenId) -> Result<Golden, VariantError> {
    let from_fixture = |fid: FixtureId, file: &str| -> Result<(TilingInstance, Tiling), VariantError> {
        let inst = load_fixture(fid)?.instance()?;
        let t = Tiling::from_rows(golden_indices(file, &inst.rules)?)?;
        Ok((inst, t))
    };
    let at = |inst: &TilingInstance, t: &Tiling| {
        inst.cost_bound
            .eval(t.width as u64)
            .to_i64()
            .expect("small bound")
    };
    let (instance, tiling, expected_cost) = match id {
        GoldenId::PeriodicLayered => {
            let f = load_fixture(FixtureId::PeriodicUnweighted)?;
            let layered = f.layered()?;
            let a = golden_indices("periodic-layer1", &f.layers()[0])?;
            let b = golden_indices("periodic-layer2", &f.layers()[1])?;
            let t = combine_layers(&layered, &[a, b], "periodic-layered")?;
            (f.instance()?, t, 0)
        }
        GoldenId::WeightedOpen => {
            let (inst, t) = from_fixture(FixtureId::WeightedOpen, "weighted-open")?;
            let c = at(&inst, &t);
            (inst, t, c)
        }
        GoldenId::ReflectionL1 => {
            let (inst, t) = from_fixture(FixtureId::ReflectionWeightedL1, "reflection-l1")?;
            let c = at(&inst, &t);
            (inst, t, c)
        }
        GoldenId::ReflectionLayered => {
            let f = load_fixture(FixtureId::ReflectionWeightedL2L3)?;
            let layered = f.layered()?;
            let a = golden_indices("reflection-l1", &f.layers()[0])?;
            let b = golden_indices("reflection-layer2", &f.layers()[1])?;
            // rows of the vertical direction layer cycle from the top
            let c: Vec<Vec<usize>> = (0..a.len()).map(|r| vec![r % 3; a[0].len()]).collect();
            let t = combine_layers(&layered, &[a, b, c], "reflection-layered")?;
            let inst = f.instance()?;
            let cost = at(&inst, &t);
            (inst, t, cost)
        }
        GoldenId::ExtensionBase | GoldenId::ExtensionGrown => {
            let rules = rules_from_adjacency(&golden_names("extension-base")?, false);
            let file = if id == GoldenId::ExtensionBase {
                "extension-base"
            } else {
                "extension-grown"
            };
            let t = Tiling::from_rows(golden_indices(file, &rules)?)?;
            (TilingInstance::new(rules, BoundaryCondition::Open), t, 0)
        }
        GoldenId::RotationFill => {
            let side = rotation_side()?;
            let rules = rules_from_adjacency(&[side.clone()], true);
            let corner = rules.index_of(&side[0]).unwrap();
            let t = Tiling::from_rows(golden_indices("rotation-fill", &rules)?)?;
            (TilingInstance::new(rules, BoundaryCondition::FourCorners(corner)), t, 0)
        }
        GoldenId::PeriodicReflection => {
            let (inst, t) = from_fixture(FixtureId::PeriodicReflectionWeighted, "periodic-reflection")?;
            let c = at(&inst, &t);
            (inst, t, c)
        }
        GoldenId::PeriodicReflectionLayer2 => {
            let f = load_fixture(FixtureId::PeriodicReflectionWeighted)?;
            let rules = f.layers()[1].clone();
            let t = Tiling::from_rows(golden_indices("periodic-reflection-layer2", &rules)?)?;
            (TilingInstance::new(rules, BoundaryCondition::Periodic), t, 0)
        }
    };
    Ok(Golden {
        id,
        instance,
        tiling,
        expected_cost,
    })
}

fn combine_layers(layered: &LayeredRuleSet, layers: &[Vec<Vec<usize>>], name: &str) -> Result<Tiling, VariantError> {
    let rows = layers[0].len();
    let cols = layers[0][0].len();
    let mut out = vec![vec![0usize; cols]; rows];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let tuple: Vec<usize> = layers.iter().map(|l| l[r][c]).collect();
            *cell = layered.index_of_tuple(&tuple).ok_or_else(|| {
                VariantError::Precondition(format!("{name}: cell ({r},{c}) pairs excluded layer tiles"))
            })?;
        }
    }
    Ok(Tiling::from_rows(out)?)
}

/// Any fixture by name: a rule-set fixture or a golden tiling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FixtureItem {
    Rules(Fixture),
    Golden(Golden),
}

pub fn fixture(name: &str) -> Result<FixtureItem, VariantError> {
    if let Some(id) = FixtureId::parse(name) {
        return Ok(FixtureItem::Rules(load_fixture(id)?));
    }
    if let Some(id) = GoldenId::parse(name) {
        return Ok(FixtureItem::Golden(golden(id)?));
    }
    Err(VariantError::UnknownFixture(name.into()))
}

pub fn fixture_names() -> Vec<&'static str> {
    FixtureId::ALL
        .iter()
        .map(|f| f.name())
        .chain(GoldenId::ALL.iter().map(|g| g.name()))
        .collect()
}

// ---------------------------------------------------------------------------
// Row-pair analysis

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowPairMode {
    /// Both rows once, vertical pairs twice.
    WPrime,
    /// Top row twice, bottom row once, vertical pairs twice.
    WDoublePrime,
}

/// End constraints; "blocked" ends hold no `V` in either row, "corner" ends
/// hold `C` in the top row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowPairEnds {
    Free,
    OneBlocked,
    BothBlocked,
    OneCorner,
    Corners,
}

/// Line problem over vertical tile pairs. Node `top * m + bottom` costs twice
/// the vertical weight; an edge costs the weighted sum of the two horizontal
/// weights.
#[derive(Clone, Debug)]
pub struct RowPairProblem {
    pub rules: RuleSet,
    pub mode: RowPairMode,
    pub ends: RowPairEnds,
    pub graph: TileGraph,
    pub starts: Vec<usize>,
    pub finals: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowPairSolution {
    pub min: BigInt,
    /// Argmin rows (top, bottom) when the width is small enough to materialize.
    pub rows: Option<(Vec<usize>, Vec<usize>)>,
}

/// Largest width for which the argmin row pair is materialized.
pub const ROW_PAIR_WITNESS_CAP: u64 = 10_000;

impl RowPairProblem {
    pub fn new(rules: &RuleSet, mode: RowPairMode, ends: RowPairEnds) -> Result<Self, VariantError> {
        let m = rules.len();
        let sentinel = rules.sentinel();
        let top_weight = match mode {
            RowPairMode::WPrime => 1,
            RowPairMode::WDoublePrime => 2,
        };
        let node_ok = |p: usize| rules.v(p % m, p / m) != sentinel;
        let node_cost: Vec<i64> = (0..m * m)
            .map(|p| if node_ok(p) { 2 * rules.v(p % m, p / m) } else { 0 })
            .collect();
        let edges: Vec<Vec<Option<i64>>> = (0..m * m)
            .map(|p| {
                (0..m * m)
                    .map(|q| {
                        if !node_ok(p) || !node_ok(q) {
                            return None;
                        }
                        let (ht, hb) = (rules.h(p / m, q / m), rules.h(p % m, q % m));
                        (ht != sentinel && hb != sentinel).then_some(top_weight * ht + hb)
                    })
                    .collect()
            })
            .collect();
        let tile = |name: &str| {
            rules.index_of(name).ok_or_else(|| {
                VariantError::Precondition(format!("end constraint needs a tile named {name}"))
            })
        };
        let all: Vec<usize> = (0..m * m).filter(|&p| node_ok(p)).collect();
        let unblocked = |v: usize| -> Vec<usize> {
            all.iter().copied().filter(|&p| p / m != v && p % m != v).collect()
        };
        let corner = |c: usize| -> Vec<usize> { all.iter().copied().filter(|&p| p / m == c).collect() };
        let (starts, finals) = match ends {
            RowPairEnds::Free => (all.clone(), all.clone()),
            RowPairEnds::OneBlocked => (all.clone(), unblocked(tile("V")?)),
            RowPairEnds::BothBlocked => {
                let u = unblocked(tile("V")?);
                (u.clone(), u)
            }
            RowPairEnds::OneCorner => (corner(tile("C")?), all.clone()),
            RowPairEnds::Corners => {
                let c = corner(tile("C")?);
                (c.clone(), c)
            }
        };
        Ok(RowPairProblem {
            rules: rules.clone(),
            mode,
            ends,
            graph: TileGraph::new(node_cost, edges),
            starts,
            finals,
        })
    }

    /// Direct evaluation of the row-pair formula on explicit rows.
    pub fn cost(&self, top: &[usize], bottom: &[usize]) -> i64 {
        row_pair_cost(&self.rules, self.mode, top, bottom)
    }
}

/// `w(top)·k + w(bottom) + 2·Σ v(bottom_a, top_a)` with `k` = 1 or 2.
pub fn row_pair_cost(rules: &RuleSet, mode: RowPairMode, top: &[usize], bottom: &[usize]) -> i64 {
    let row = |r: &[usize]| r.windows(2).map(|w| rules.h(w[0], w[1])).sum::<i64>();
    let k = match mode {
        RowPairMode::WPrime => 1,
        RowPairMode::WDoublePrime => 2,
    };
    k * row(top) + row(bottom) + 2 * top.iter().zip(bottom).map(|(&t, &b)| rules.v(b, t)).sum::<i64>()
}

/// Exact minimum of the row-pair cost over all row pairs of width `n`.
pub fn row_pair_minimum(prob: &RowPairProblem, n: &BigUint) -> Option<RowPairSolution> {
    let m = prob.rules.len();
    match n.to_u64() {
        Some(len) if len >= 1 && len <= ROW_PAIR_WITNESS_CAP => {
            let (min, walk) = cheapest_walk(&prob.graph, &prob.starts, &prob.finals, len as usize)?;
            let top = walk.iter().map(|p| p / m).collect();
            let bottom = walk.iter().map(|p| p % m).collect();
            Some(RowPairSolution {
                min: BigInt::from(min),
                rows: Some((top, bottom)),
            })
        }
        _ => min_plus_line(&prob.graph, &prob.starts, &prob.finals, n).map(|min| RowPairSolution { min, rows: None }),
    }
}

/// Structural classes of optimal middle row pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LemmaClass {
    /// A `Circ` at an end; the tile sharing its column equals the tile
    /// sharing the other marker's column.
    CircSame,
    /// A `Circ` at an end; those two tiles differ.
    CircDifferent,
    /// Two `Ring`s; the tiles sharing their columns are equal.
    RingSame,
    /// Two `Ring`s; those tiles differ.
    RingDifferent,
}

/// Classifies a row pair: both rows framed by `V`, one marker per row, the
/// markers diagonal neighbours. `None` if the structure does not hold.
pub fn lemma_class(rules: &RuleSet, top: &[usize], bottom: &[usize]) -> Option<LemmaClass> {
    let name = |t: usize| rules.tile_name(t);
    let n = top.len();
    if n < 3 || bottom.len() != n {
        return None;
    }
    for row in [top, bottom] {
        if name(row[0]) != "V" || name(row[n - 1]) != "V" {
            return None;
        }
        if row[1..n - 1].iter().any(|&t| matches!(name(t), "V" | "H" | "C")) {
            return None;
        }
    }
    let marker = |row: &[usize]| -> Option<usize> {
        let pos: Vec<usize> = (0..n).filter(|&i| matches!(name(row[i]), "Ring" | "Circ")).collect();
        (pos.len() == 1).then(|| pos[0])
    };
    let (mt, mb) = (marker(top)?, marker(bottom)?);
    if mt.abs_diff(mb) != 1 {
        return None;
    }
    let circ = name(top[mt]) == "Circ" || name(bottom[mb]) == "Circ";
    let same = if name(top[mt]) == "Circ" {
        bottom[mt] == top[mb]
    } else if name(bottom[mb]) == "Circ" {
        top[mb] == bottom[mt]
    } else {
        top[mb] == bottom[mt]
    };
    Some(match (circ, same) {
        (true, true) => LemmaClass::CircSame,
        (true, false) => LemmaClass::CircDifferent,
        (false, true) => LemmaClass::RingSame,
        (false, false) => LemmaClass::RingDifferent,
    })
}

// ---------------------------------------------------------------------------
// Symmetry constructions

fn require_symmetry(rules: &RuleSet, need: Symmetry) -> Result<(), VariantError> {
    let have = rules.symmetry();
    let ok = match need {
        Symmetry::None => true,
        Symmetry::Reflection => have != Symmetry::None,
        Symmetry::Rotation => have == Symmetry::Rotation,
    };
    if ok {
        Ok(())
    } else {
        Err(VariantError::Precondition(format!("rules have {have} symmetry, need {need}")))
    }
}

/// Extends a valid `N x N` tiling to `(N+2) x (N+2)` by repeating columns
/// 1..=2 and rows N-3..=N-2. Requires reflection symmetry and `N >= 4`.
pub fn extend_reflection(inst: &TilingInstance, t: &Tiling) -> Result<Tiling, VariantError> {
    require_symmetry(&inst.rules, Symmetry::Reflection)?;
    let n = t.width;
    if t.height != n || n < 4 {
        return Err(VariantError::Precondition(format!(
            "need a square tiling with N >= 4, got {}x{}",
            t.height, t.width
        )));
    }
    if !validate_tiling(inst, t)?.is_valid() {
        return Err(VariantError::Precondition("input tiling is not valid".into()));
    }
    let col = |j: usize| if j < 3 { j } else { j - 2 };
    let row = |i: usize| if i + 1 < n { i } else { i - 2 };
    let rows: Vec<Vec<usize>> = (0..n + 2)
        .map(|i| (0..n + 2).map(|j| t.get(row(i), col(j))).collect())
        .collect();
    Ok(Tiling::from_rows(rows)?)
}

/// Fills an `N x N` grid whose four sides all read `side` by constant
/// anti-diagonals. Requires rotation symmetry, allowed consecutive pairs, and
/// equal end tiles.
pub fn rotation_fill(rules: &RuleSet, side: &[usize]) -> Result<Tiling, VariantError> {
    require_symmetry(rules, Symmetry::Rotation)?;
    let n = side.len();
    if n == 0 || side[0] != side[n - 1] {
        return Err(VariantError::Precondition("side must start and end on the same tile".into()));
    }
    if side.iter().any(|&t| t >= rules.len()) {
        return Err(VariantError::Precondition("side tile out of range".into()));
    }
    if side.windows(2).any(|w| !rules.h_allowed(w[0], w[1])) {
        return Err(VariantError::Precondition("side is not a valid line".into()));
    }
    // diag[k] for k = i + j; the second half repeats the side from index 1
    let diag: Vec<usize> = side.iter().chain(side[1..].iter()).copied().collect();
    let rows = (0..n).map(|i| (0..n).map(|j| diag[i + j]).collect()).collect();
    Ok(Tiling::from_rows(rows)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Threshold {
    Finite(u64),
    Infinite,
}

impl std::fmt::Display for Threshold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Threshold::Finite(n) => write!(f, "{n}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

/// Least even and odd side lengths from which every longer side of the same
/// parity starts and ends on `tile`. The odd threshold is 1 whenever every
/// odd length >= 3 works; a parity with no side of length >= 2 is infinite.
pub fn rotation_thresholds(rules: &RuleSet, tile: usize) -> Result<(Threshold, Threshold), VariantError> {
    require_symmetry(rules, Symmetry::Rotation)?;
    let m = rules.len();
    if tile >= m {
        return Err(VariantError::Precondition("tile out of range".into()));
    }
    // BFS over (tile, parity of steps taken)
    let mut dist = vec![[None::<u64>; 2]; m];
    dist[tile][0] = Some(0);
    let mut queue = std::collections::VecDeque::from([(tile, 0usize)]);
    while let Some((v, p)) = queue.pop_front() {
        let d = dist[v][p].unwrap();
        for w in 0..m {
            if rules.h_allowed(v, w) && dist[w][1 - p].is_none() {
                dist[w][1 - p] = Some(d + 1);
                queue.push_back((w, 1 - p));
            }
        }
    }
    let even = match dist[tile][1] {
        Some(steps) => Threshold::Finite(steps + 1),
        None => Threshold::Infinite,
    };
    let odd = if (0..m).any(|w| rules.h_allowed(tile, w)) {
        Threshold::Finite(1)
    } else {
        Threshold::Infinite
    };
    Ok((even, odd))
}

/// Exhaustive side search: for each `N` in `1..=max_n`, whether a line of `N`
/// tiles starts and ends on `tile`.
pub fn brute_force_sides(rules: &RuleSet, tile: usize, max_n: usize) -> Vec<bool> {
    let m = rules.len();
    let mut reach = vec![false; m];
    reach[tile] = true;
    let mut out = vec![true];
    for _ in 1..max_n {
        let next: Vec<bool> = (0..m)
            .map(|w| (0..m).any(|v| reach[v] && rules.h_allowed(v, w)))
            .collect();
        reach = next;
        out.push(reach[tile]);
    }
    out
}

/// Largest cost bound and tile count handled by the corner procedure.
pub const CORNER_MAX_COST: i64 = 6;
pub const CORNER_MAX_TILES: usize = 6;
/// Row count above which the exact fallback switches to bounded backtracking.
const EXACT_ROW_LIMIT: u128 = 4096;
/// Upper bound on candidate rows in the corner-square search.
pub const CORNER_ROW_CAP: usize = 4096;

/// Decides weighted tiling under rotation symmetry.
///
/// Open: checkerboard of the cheapest pair. Periodic: every row and column is
/// a cheapest closed line of length `N`. Four corners: corner squares when the
/// cheapest pair costs 0 and `N` is past [`corner_threshold`], the exact grid
/// solver otherwise.
pub fn weighted_rotation_decide(inst: &TilingInstance, n: usize) -> Result<SolveResult, VariantError> {
    let rules = &inst.rules;
    require_symmetry(rules, Symmetry::Rotation)?;
    if n == 0 {
        return Err(VariantError::Precondition("N must be at least 1".into()));
    }
    let bound = inst.cost_bound.eval(n as u64);
    let finish = |min: Option<BigInt>, witness: Option<Tiling>| SolveResult {
        exists: min.as_ref().is_some_and(|c| *c <= bound),
        count: None,
        min_cost: min,
        witness,
    };
    match inst.bc {
        BoundaryCondition::Open => {
            let Some((w, a, b)) = cheapest_pair(rules) else {
                return Ok(if n == 1 {
                    finish(Some(BigInt::from(0)), Some(Tiling::uniform(1, 0)))
                } else {
                    finish(None, None)
                });
            };
            let rows = (0..n)
                .map(|i| (0..n).map(|j| if (i + j) % 2 == 0 { a } else { b }).collect())
                .collect();
            let min = BigInt::from(2 * n as i64 * (n as i64 - 1)) * BigInt::from(w);
            Ok(finish(Some(min), Some(Tiling::from_rows(rows)?)))
        }
        BoundaryCondition::Periodic => {
            let g = TileGraph::from_rules(rules);
            let len = BigUint::from(n as u64 + 1);
            let best = (0..rules.len())
                .filter_map(|v| min_plus_line(&g, &[v], &[v], &len).map(|c| (c, v)))
                .min();
            let Some((w, v)) = best else {
                return Ok(finish(None, None));
            };
            let witness = if n as u64 <= ROW_PAIR_WITNESS_CAP {
                cheapest_walk(&g, &[v], &[v], n + 1).map(|(_, walk)| {
                    let rows = (0..n)
                        .map(|i| (0..n).map(|j| walk[(i + j) % n]).collect())
                        .collect();
                    Tiling::from_rows(rows).expect("square")
                })
            } else {
                None
            };
            Ok(finish(Some(BigInt::from(2 * n as u64) * w), witness))
        }
        BoundaryCondition::FourCorners(corner) => four_corners_decide(inst, corner, n),
        _ => Err(VariantError::Unsupported(
            "rotation procedure covers open, periodic and four-corner boundaries".into(),
        )),
    }
}

fn cheapest_pair(rules: &RuleSet) -> Option<(i64, usize, usize)> {
    let m = rules.len();
    (0..m)
        .flat_map(|a| (0..m).map(move |b| (a, b)))
        .filter(|&(a, b)| rules.h_allowed(a, b))
        .map(|(a, b)| (rules.h(a, b), a, b))
        .min()
}

/// Side length from which the corner procedure applies: four corner
/// triangles of side about twice the square size plus zero-cost connecting
/// paths of length up to twice the tile count.
pub fn corner_threshold(cost: i64, tiles: usize) -> usize {
    4 * corner_square_size(cost) + 2 * tiles
}

fn corner_square_size(cost: i64) -> usize {
    (2 * cost).max(1) as usize
}

fn constant_bound(inst: &TilingInstance) -> Option<i64> {
    let c = &inst.cost_bound.0;
    if c.iter().skip(1).any(|&x| x != 0) {
        return None;
    }
    Some(c.first().copied().unwrap_or(0))
}

fn four_corners_decide(inst: &TilingInstance, corner: usize, n: usize) -> Result<SolveResult, VariantError> {
    let rules = &inst.rules;
    let c = constant_bound(inst).ok_or_else(|| {
        VariantError::Unsupported("four-corner rotation procedure needs a constant cost bound".into())
    })?;
    let exact = || -> Result<SolveResult, VariantError> {
        let small = count_rows(rules, n, false) <= EXACT_ROW_LIMIT;
        if small {
            let res = solve_grid(inst, n, SolveMode::MinCost)?;
            let exists = res.min_cost.as_ref().is_some_and(|m| *m <= BigInt::from(c));
            return Ok(SolveResult { exists, ..res });
        }
        let cfg = SolverConfig {
            force_backtracking: true,
            ..SolverConfig::from_env()?
        };
        Ok(solve_grid_with(inst, n, SolveMode::Exists, &cfg)?)
    };
    let Some((w, _, _)) = cheapest_pair(rules) else {
        return exact();
    };
    if w != 0 || n < corner_threshold(c, rules.len()) {
        return exact();
    }
    if c < 0 {
        return Ok(SolveResult::default());
    }
    if c > CORNER_MAX_COST || rules.len() > CORNER_MAX_TILES {
        return Err(VariantError::Solve(SolveError::Resource(format!(
            "corner procedure is capped at cost {CORNER_MAX_COST} and {CORNER_MAX_TILES} tiles"
        ))));
    }
    let total = corner_minimum(rules, corner, c, n)?;
    Ok(SolveResult {
        exists: total.is_some(),
        count: None,
        min_cost: total.map(BigInt::from),
        witness: None,
    })
}

/// Runs the corner-square procedure regardless of the size threshold and
/// returns the minimum corner total when it is within the constant bound.
/// Exact only for `N >= corner_threshold`.
pub fn corner_square_total(inst: &TilingInstance, n: usize) -> Result<Option<i64>, VariantError> {
    require_symmetry(&inst.rules, Symmetry::Rotation)?;
    let BoundaryCondition::FourCorners(corner) = inst.bc else {
        return Err(VariantError::Precondition("corner procedure needs four-corner boundaries".into()));
    };
    let c = constant_bound(inst)
        .ok_or_else(|| VariantError::Unsupported("corner procedure needs a constant cost bound".into()))?;
    if c < 0 {
        return Ok(None);
    }
    corner_minimum(&inst.rules, corner, c, n)
}

/// Zero-cost components with a bipartition where one exists.
struct ZeroComponents {
    /// Component of each tile, `None` for tiles without a zero-cost pair.
    comp: Vec<Option<usize>>,
    /// Colour of each tile within its component when it is bipartite.
    colour: Vec<u8>,
    bipartite: Vec<bool>,
}

fn zero_components(rules: &RuleSet) -> ZeroComponents {
    let m = rules.len();
    let zero = |a: usize, b: usize| rules.h(a, b) == 0;
    let mut comp = vec![None; m];
    let mut colour = vec![0u8; m];
    let mut bipartite = Vec::new();
    for s in 0..m {
        if comp[s].is_some() || !(0..m).any(|b| zero(s, b)) {
            continue;
        }
        let id = bipartite.len();
        let mut ok = true;
        comp[s] = Some(id);
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for u in 0..m {
                if !zero(v, u) {
                    continue;
                }
                match comp[u] {
                    None => {
                        comp[u] = Some(id);
                        colour[u] = 1 - colour[v];
                        stack.push(u);
                    }
                    Some(_) => {
                        if colour[u] == colour[v] {
                            ok = false;
                        }
                    }
                }
            }
        }
        bipartite.push(ok);
    }
    ZeroComponents {
        comp,
        colour,
        bipartite,
    }
}

/// Minimum total over four compatible corner squares, `None` above `c`.
fn corner_minimum(rules: &RuleSet, corner: usize, c: i64, n: usize) -> Result<Option<i64>, VariantError> {
    let z = zero_components(rules);
    let k = corner_square_size(c);
    let mut best: Option<i64> = None;
    for alpha in 0..z.bipartite.len() {
        let f = corner_square_minima(rules, corner, c, k, &z, alpha)?;
        // global class = relative class xor corner parity; the corners at
        // (0, N-1) and (N-1, 0) have parity N-1
        let flip = (n - 1) % 2;
        let candidates: Vec<Option<i64>> = if z.bipartite[alpha] {
            (0..2)
                .map(|x| {
                    let a = f[x]?;
                    let b = f[x ^ flip]?;
                    Some(2 * a + 2 * b)
                })
                .collect()
        } else {
            vec![f[0].map(|a| 4 * a)]
        };
        for t in candidates.into_iter().flatten() {
            if t <= c && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        }
    }
    Ok(best)
}

/// Cheapest valid `k x k` upper-left square per class: corner tile at (0,0),
/// last row and last column in component `alpha` joined by zero-cost pairs.
fn corner_square_minima(
    rules: &RuleSet,
    corner: usize,
    c: i64,
    k: usize,
    z: &ZeroComponents,
    alpha: usize,
) -> Result<[Option<i64>; 2], VariantError> {
    let in_alpha = |t: usize| z.comp[t] == Some(alpha);
    // candidate rows with horizontal cost <= c
    let mut rows: Vec<(Vec<usize>, i64)> = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn grow(
        rules: &RuleSet,
        k: usize,
        c: i64,
        cur: &mut Vec<usize>,
        cost: i64,
        out: &mut Vec<(Vec<usize>, i64)>,
        cap: usize,
    ) -> bool {
        if cur.len() == k {
            out.push((cur.clone(), cost));
            return out.len() <= cap;
        }
        for t in 0..rules.len() {
            let add = match cur.last() {
                Some(&p) if !rules.h_allowed(p, t) => continue,
                Some(&p) => rules.h(p, t),
                None => 0,
            };
            if cost + add > c {
                continue;
            }
            cur.push(t);
            let ok = grow(rules, k, c, cur, cost + add, out, cap);
            cur.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    if !grow(rules, k, c, &mut cur, 0, &mut rows, CORNER_ROW_CAP) {
        return Err(VariantError::Solve(SolveError::Resource(format!(
            "more than {CORNER_ROW_CAP} candidate corner rows"
        ))));
    }
    let last_row_ok = |r: &[usize]| r.iter().all(|&t| in_alpha(t)) && r.windows(2).all(|w| rules.h(w[0], w[1]) == 0);
    // best[i]: min cost of rows 0..=level ending in candidate row i
    let mut best: Vec<Option<i64>> = rows
        .iter()
        .map(|(r, cost)| (r[0] == corner && in_alpha(r[k - 1])).then_some(*cost))
        .collect();
    if k == 1 {
        best = rows
            .iter()
            .map(|(r, cost)| (r[0] == corner && last_row_ok(r)).then_some(*cost))
            .collect();
    }
    for level in 1..k {
        let mut next = vec![None::<i64>; rows.len()];
        for (j, (below, bc)) in rows.iter().enumerate() {
            if !in_alpha(below[k - 1]) || (level == k - 1 && !last_row_ok(below)) {
                continue;
            }
            for (i, (above, _)) in rows.iter().enumerate() {
                let Some(prev) = best[i] else { continue };
                if rules.v(below[k - 1], above[k - 1]) != 0 {
                    continue;
                }
                let mut vc = 0i64;
                let mut ok = true;
                for col in 0..k {
                    if !rules.v_allowed(below[col], above[col]) {
                        ok = false;
                        break;
                    }
                    vc += rules.v(below[col], above[col]);
                }
                let total = prev + bc + vc;
                if ok && total <= c && next[j].is_none_or(|x| total < x) {
                    next[j] = Some(total);
                }
            }
        }
        best = next;
    }
    let mut out = [None::<i64>; 2];
    for (i, (r, _)) in rows.iter().enumerate() {
        let Some(cost) = best[i] else { continue };
        let class = if z.bipartite[alpha] {
            z.colour[r[k - 1]] as usize
        } else {
            0
        };
        if out[class].is_none_or(|x| cost < x) {
            out[class] = Some(cost);
        }
    }
    Ok(out)
}

/// Sorted multiset of tile names, for reports.
pub fn tile_histogram(t: &Tiling, rules: &RuleSet) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for r in 0..t.height {
        for &x in t.row(r) {
            *h.entry(rules.tile_name(x).to_string()).or_insert(0) += 1;
        }
    }
    h
}
