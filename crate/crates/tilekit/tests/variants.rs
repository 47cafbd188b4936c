use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;
use tilekit::grid::{
    brute_force_grid, brute_force_min_witness, solve_grid, solve_grid_with, SolveMode, SolverConfig,
};
use tilekit::tiling::{
    validate_tiling, BoundaryCondition, CostBound, RuleSet, Symmetry, Tiling, TilingInstance, DEFAULT_SENTINEL,
};
use tilekit::variants::*;

const F: i64 = DEFAULT_SENTINEL;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("t{i}")).collect()
}

/// Symmetric weight matrix from the upper triangle, `None` = forbidden.
fn sym(m: usize, upper: &[Option<i64>]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![F; m]; m];
    let mut k = 0;
    for a in 0..m {
        for b in a..m {
            let w = upper[k].unwrap_or(F);
            out[a][b] = w;
            out[b][a] = w;
            k += 1;
        }
    }
    out
}

fn rotation_rules(m: usize, upper: &[Option<i64>]) -> RuleSet {
    let w = sym(m, upper);
    RuleSet::new(names(m), w.clone(), w, F).unwrap()
}

fn reflection_rules(m: usize, hu: &[Option<i64>], vu: &[Option<i64>]) -> RuleSet {
    RuleSet::new(names(m), sym(m, hu), sym(m, vu), F).unwrap()
}

fn weight() -> impl Strategy<Value = Option<i64>> {
    prop_oneof![Just(None), (-2i64..=3).prop_map(Some)]
}

fn allowed_bit() -> impl Strategy<Value = Option<i64>> {
    prop_oneof![Just(None), Just(Some(0))]
}

fn tri(m: usize) -> usize {
    m * (m + 1) / 2
}

// -- fixtures and golden tilings ------------------------------------------

#[test]
fn fixtures_load_with_checksums() {
    for id in FixtureId::ALL {
        let f = load_fixture(id).unwrap();
        assert_eq!(FixtureId::parse(id.name()), Some(id));
        f.instance().unwrap();
    }
    let f = load_fixture(FixtureId::PeriodicUnweighted).unwrap();
    assert_eq!(f.layers()[0].len(), 7);
    assert_eq!(f.layers()[1].len(), 10);
    assert_eq!(load_fixture(FixtureId::ReflectionWeightedL1).unwrap().layers()[0].len(), 9);
    assert_eq!(load_fixture(FixtureId::PeriodicReflectionWeighted).unwrap().layers()[1].len(), 12);
}

#[test]
fn checksum_detects_retranscription() {
    let mut f = build_fixture(FixtureId::WeightedOpen);
    let before = f.checksum();
    f.spec.layers[0].set_h(0, 4, 0);
    assert_ne!(before, f.checksum());
}

#[test]
fn unknown_fixture_is_an_error() {
    assert!(matches!(fixture("table-99"), Err(VariantError::UnknownFixture(_))));
    assert_eq!(fixture_names().len(), FixtureId::ALL.len() + GoldenId::ALL.len());
}

#[test]
fn golden_tilings_validate_at_stated_costs() {
    for id in GoldenId::ALL {
        let g = golden(id).unwrap();
        let report = validate_tiling(&g.instance, &g.tiling).unwrap();
        assert!(report.is_valid(), "{}: {:?}", id.name(), report.violations);
        assert_eq!(report.total_cost, g.expected_cost, "{}", id.name());
    }
}

#[test]
fn golden_costs_match_closed_forms() {
    let refl = golden(GoldenId::ReflectionL1).unwrap();
    assert_eq!(refl.tiling.width, 10);
    assert_eq!(validate_tiling(&refl.instance, &refl.tiling).unwrap().total_cost, 76 - 16 * 10);
    let layered = golden(GoldenId::ReflectionLayered).unwrap();
    assert_eq!(validate_tiling(&layered.instance, &layered.tiling).unwrap().total_cost, -84);
    let periodic = golden(GoldenId::PeriodicReflection).unwrap();
    assert_eq!(periodic.tiling.width, 9);
    assert_eq!(validate_tiling(&periodic.instance, &periodic.tiling).unwrap().total_cost, 6 * 9 - 2);
    let open = golden(GoldenId::WeightedOpen).unwrap();
    assert_eq!(validate_tiling(&open.instance, &open.tiling).unwrap().total_cost, -4);
}

#[test]
fn periodic_layered_projections_are_valid_layer_tilings() {
    let f = load_fixture(FixtureId::PeriodicUnweighted).unwrap();
    let layered = f.layered().unwrap();
    let g = golden(GoldenId::PeriodicLayered).unwrap();
    for (k, layer) in f.layers().iter().enumerate() {
        let inst = TilingInstance::new(layer.clone(), BoundaryCondition::Periodic);
        let proj = layered.project(&g.tiling, k);
        assert!(validate_tiling(&inst, &proj).unwrap().is_valid(), "layer {k}");
    }
}

#[test]
fn table7_open_min_cost() {
    let inst = load_fixture(FixtureId::WeightedOpen).unwrap().instance().unwrap();
    let r = solve_grid(&inst, 5, SolveMode::MinCost).unwrap();
    assert_eq!(r.min_cost, Some(BigInt::from(-4)));
    assert!(r.exists);
    for n in 2..=3 {
        let got = solve_grid(&inst, n, SolveMode::MinCost).unwrap();
        assert_eq!(got.min_cost, brute_force_grid(&inst, n).unwrap().min_cost, "N={n}");
    }
}

#[test]
fn table8_periodic_matches_oracle() {
    let inst = load_fixture(FixtureId::WeightedPeriodic).unwrap().instance().unwrap();
    for n in 2..=3 {
        let got = solve_grid(&inst, n, SolveMode::MinCost).unwrap();
        let want = brute_force_grid(&inst, n).unwrap();
        assert_eq!(got.min_cost, want.min_cost, "N={n}");
        let got = solve_grid(&inst, n, SolveMode::Exists).unwrap();
        assert_eq!(got.exists, want.exists, "N={n}");
    }
}

// -- row pairs -------------------------------------------------------------

fn table9() -> RuleSet {
    load_fixture(FixtureId::ReflectionWeightedL1).unwrap().layers()[0].clone()
}

fn rp_min(rules: &RuleSet, mode: RowPairMode, ends: RowPairEnds, n: u64) -> i64 {
    let p = RowPairProblem::new(rules, mode, ends).unwrap();
    i64::try_from(row_pair_minimum(&p, &BigUint::from(n)).unwrap().min).unwrap()
}

#[test]
fn row_pair_minima_at_ten() {
    let r = table9();
    assert_eq!(rp_min(&r, RowPairMode::WPrime, RowPairEnds::Free, 10), -12);
    assert_eq!(rp_min(&r, RowPairMode::WPrime, RowPairEnds::OneBlocked, 10), -10);
    assert_eq!(rp_min(&r, RowPairMode::WPrime, RowPairEnds::BothBlocked, 10), 0);
    assert_eq!(rp_min(&r, RowPairMode::WDoublePrime, RowPairEnds::Corners, 10), 58 - 100);
}

#[test]
fn row_pair_affine_forms() {
    let r = table9();
    for n in 4..=16u64 {
        let n_i = n as i64;
        assert_eq!(rp_min(&r, RowPairMode::WDoublePrime, RowPairEnds::Free, n), 22 - 10 * n_i);
        assert_eq!(rp_min(&r, RowPairMode::WDoublePrime, RowPairEnds::OneCorner, n), 38 - 10 * n_i);
        let corners = rp_min(&r, RowPairMode::WDoublePrime, RowPairEnds::Corners, n);
        if n % 2 == 0 {
            assert_eq!(corners, 58 - 10 * n_i);
        } else if n >= 5 {
            assert_eq!(corners, 54 - 10 * n_i);
        }
        if n % 2 == 0 {
            assert_eq!(rp_min(&r, RowPairMode::WPrime, RowPairEnds::Free, n), -12);
        }
    }
}

#[test]
fn row_pair_huge_width_uses_line_solver() {
    let r = table9();
    let p = RowPairProblem::new(&r, RowPairMode::WDoublePrime, RowPairEnds::Free).unwrap();
    let n = BigUint::from(1_000_000_000_000u64);
    let s = row_pair_minimum(&p, &n).unwrap();
    assert!(s.rows.is_none());
    assert_eq!(s.min, BigInt::from(22) - BigInt::from(10) * BigInt::from(n));
}

#[test]
fn row_pair_argmin_matches_structure() {
    let r = table9();
    let p = RowPairProblem::new(&r, RowPairMode::WPrime, RowPairEnds::Free).unwrap();
    let s = row_pair_minimum(&p, &BigUint::from(10u32)).unwrap();
    let (top, bottom) = s.rows.unwrap();
    assert_eq!(p.cost(&top, &bottom), -12);
    assert!(lemma_class(&r, &top, &bottom).is_some());
}

/// Exhaustive minimum over row pairs, independent of the graph encoding.
fn brute_row_pair(rules: &RuleSet, mode: RowPairMode, n: usize) -> Option<i64> {
    let m = rules.len();
    let total = m.pow(2 * n as u32);
    let mut best = None::<i64>;
    let mut cells = vec![0usize; 2 * n];
    for code in 0..total {
        let mut c = code;
        for x in cells.iter_mut() {
            *x = c % m;
            c /= m;
        }
        let (top, bottom) = cells.split_at(n);
        let legal = top.windows(2).all(|w| rules.h_allowed(w[0], w[1]))
            && bottom.windows(2).all(|w| rules.h_allowed(w[0], w[1]))
            && top.iter().zip(bottom).all(|(&t, &b)| rules.v_allowed(b, t));
        if legal {
            let cost = row_pair_cost(rules, mode, top, bottom);
            best = Some(best.map_or(cost, |b| b.min(cost)));
        }
    }
    best
}

#[test]
fn row_pair_minimum_matches_exhaustive() {
    let r = table9();
    for mode in [RowPairMode::WPrime, RowPairMode::WDoublePrime] {
        for n in 1..=3usize {
            let p = RowPairProblem::new(&r, mode, RowPairEnds::Free).unwrap();
            let got = row_pair_minimum(&p, &BigUint::from(n)).map(|s| i64::try_from(s.min).unwrap());
            assert_eq!(got, brute_row_pair(&r, mode, n), "{mode:?} N={n}");
        }
    }
}

#[test]
fn row_pairs_decompose_reflection_golden() {
    let g = golden(GoldenId::ReflectionL1).unwrap();
    let r = &g.instance.rules;
    let rows = g.tiling.rows();
    let n = rows.len();
    let mut twice = row_pair_cost(r, RowPairMode::WDoublePrime, &rows[0], &rows[1]);
    for b in 1..n - 2 {
        twice += row_pair_cost(r, RowPairMode::WPrime, &rows[b], &rows[b + 1]);
    }
    twice += row_pair_cost(r, RowPairMode::WDoublePrime, &rows[n - 1], &rows[n - 2]);
    assert_eq!(twice, 2 * g.expected_cost);
}

#[test]
fn row_pair_ends_need_named_tiles() {
    let rules = RuleSet::from_allowed(names(2), |_, _| true, |_, _| true);
    assert!(RowPairProblem::new(&rules, RowPairMode::WPrime, RowPairEnds::Corners).is_err());
    assert!(RowPairProblem::new(&rules, RowPairMode::WPrime, RowPairEnds::Free).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_pair_graph_reproduces_formula(
        cols in proptest::collection::vec((0usize..9, 0usize..9), 2..8),
        doubled in any::<bool>(),
    ) {
        let r = table9();
        let mode = if doubled { RowPairMode::WDoublePrime } else { RowPairMode::WPrime };
        let p = RowPairProblem::new(&r, mode, RowPairEnds::Free).unwrap();
        let top: Vec<usize> = cols.iter().map(|c| c.0).collect();
        let bottom: Vec<usize> = cols.iter().map(|c| c.1).collect();
        let walk: Vec<usize> = cols.iter().map(|&(t, b)| t * r.len() + b).collect();
        let sentinel_free = top.windows(2).all(|w| r.h_allowed(w[0], w[1]))
            && bottom.windows(2).all(|w| r.h_allowed(w[0], w[1]))
            && top.iter().zip(&bottom).all(|(&t, &b)| r.v_allowed(b, t));
        let via_graph = p.graph.walk_cost(&walk);
        if sentinel_free {
            prop_assert_eq!(via_graph, Some(p.cost(&top, &bottom) as i128));
        } else {
            prop_assert_eq!(via_graph, None);
        }
    }
}

// -- symmetry constructions --------------------------------------------------

#[test]
fn extension_golden_is_cell_exact() {
    let left = golden(GoldenId::ExtensionBase).unwrap();
    let right = golden(GoldenId::ExtensionGrown).unwrap();
    let ext = extend_reflection(&left.instance, &left.tiling).unwrap();
    assert_eq!(ext, right.tiling);
}

#[test]
fn uniform_extension() {
    let rules = RuleSet::from_allowed(names(1), |_, _| true, |_, _| true);
    let inst = TilingInstance::new(rules, BoundaryCondition::Open);
    let ext = extend_reflection(&inst, &Tiling::uniform(4, 0)).unwrap();
    assert_eq!(ext, Tiling::uniform(6, 0));
}

#[test]
fn extension_preconditions() {
    let rules = RuleSet::from_allowed(names(2), |a, b| a <= b, |_, _| true);
    assert_eq!(rules.symmetry(), Symmetry::None);
    let inst = TilingInstance::new(rules, BoundaryCondition::Open);
    assert!(matches!(
        extend_reflection(&inst, &Tiling::uniform(4, 0)),
        Err(VariantError::Precondition(_))
    ));
    let rules = RuleSet::from_allowed(names(1), |_, _| true, |_, _| true);
    let inst = TilingInstance::new(rules, BoundaryCondition::Open);
    assert!(extend_reflection(&inst, &Tiling::uniform(3, 0)).is_err());
}

#[test]
fn rotation_fill_is_cell_exact() {
    let g = golden(GoldenId::RotationFill).unwrap();
    let side: Vec<usize> = g.tiling.row(0).to_vec();
    assert_eq!(side.len(), 6);
    let filled = rotation_fill(&g.instance.rules, &side).unwrap();
    assert_eq!(filled, g.tiling);
}

#[test]
fn single_tile_fill_is_uniform() {
    let rules = RuleSet::from_allowed(names(1), |_, _| true, |_, _| true);
    assert_eq!(rotation_fill(&rules, &[0; 5]).unwrap(), Tiling::uniform(5, 0));
}

/// Lex-first side of length `n` from `tile` back to `tile`, by DFS.
fn find_side(rules: &RuleSet, tile: usize, n: usize) -> Option<Vec<usize>> {
    fn go(rules: &RuleSet, tile: usize, n: usize, cur: &mut Vec<usize>) -> bool {
        if cur.len() == n {
            return *cur.last().unwrap() == tile;
        }
        for t in 0..rules.len() {
            if rules.h_allowed(*cur.last().unwrap(), t) {
                cur.push(t);
                if go(rules, tile, n, cur) {
                    return true;
                }
                cur.pop();
            }
        }
        false
    }
    let mut cur = vec![tile];
    go(rules, tile, n, &mut cur).then_some(cur)
}

#[test]
fn threshold_examples() {
    let loop_only = RuleSet::from_allowed(names(1), |_, _| true, |_, _| true);
    assert_eq!(
        rotation_thresholds(&loop_only, 0).unwrap(),
        (Threshold::Finite(2), Threshold::Finite(1))
    );
    let edge = RuleSet::from_allowed(names(2), |a, b| a != b, |a, b| a != b);
    assert_eq!(
        rotation_thresholds(&edge, 0).unwrap(),
        (Threshold::Infinite, Threshold::Finite(1))
    );
    let empty = RuleSet::from_allowed(names(2), |_, _| false, |_, _| false);
    assert_eq!(
        rotation_thresholds(&empty, 0).unwrap(),
        (Threshold::Infinite, Threshold::Infinite)
    );
    let triangle = RuleSet::from_allowed(names(3), |a, b| a != b, |a, b| a != b);
    assert_eq!(rotation_thresholds(&triangle, 0).unwrap().0, Threshold::Finite(4));
}

fn side_exists_by_threshold(th: (Threshold, Threshold), n: u64) -> bool {
    let at_least = |t: Threshold| matches!(t, Threshold::Finite(k) if n >= k);
    if n == 1 {
        true
    } else if n % 2 == 0 {
        at_least(th.0)
    } else {
        at_least(th.1)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn extension_revalidates(
        m in 1usize..=3,
        hu in proptest::collection::vec(weight(), 6),
        vu in proptest::collection::vec(weight(), 6),
        periodic in any::<bool>(),
    ) {
        let rules = reflection_rules(m, &hu[..tri(m)], &vu[..tri(m)]);
        let bc = if periodic { BoundaryCondition::Periodic } else { BoundaryCondition::Open };
        let inst = TilingInstance::new(rules, bc).with_cost_bound(CostBound(vec![1000]));
        let witness = if m <= 2 {
            brute_force_min_witness(&inst, 4).unwrap()
        } else {
            solve_grid(&inst, 4, SolveMode::MinCost).unwrap().witness
        };
        if let Some(t) = witness {
            let ext = extend_reflection(&inst, &t).unwrap();
            prop_assert_eq!(ext.width, 6);
            prop_assert!(validate_tiling(&inst, &ext).unwrap().is_valid());
            let twice = extend_reflection(&inst, &ext).unwrap();
            prop_assert!(validate_tiling(&inst, &twice).unwrap().is_valid());
        }
    }

    #[test]
    fn fill_revalidates(
        m in 1usize..=4,
        upper in proptest::collection::vec(allowed_bit(), 10),
        n in 1usize..=7,
    ) {
        let rules = rotation_rules(m, &upper[..tri(m)]);
        for tile in 0..m {
            if let Some(side) = find_side(&rules, tile, n) {
                let t = rotation_fill(&rules, &side).unwrap();
                let inst = TilingInstance::new(rules.clone(), BoundaryCondition::FourCorners(tile));
                prop_assert!(validate_tiling(&inst, &t).unwrap().is_valid());
                prop_assert_eq!(t.row(0), &side[..]);
                prop_assert_eq!(t.row(n - 1), &side[..]);
            }
        }
    }

    #[test]
    fn thresholds_match_side_search(
        m in 1usize..=4,
        upper in proptest::collection::vec(allowed_bit(), 10),
    ) {
        let rules = rotation_rules(m, &upper[..tri(m)]);
        for tile in 0..m {
            let th = rotation_thresholds(&rules, tile).unwrap();
            let brute = brute_force_sides(&rules, tile, 8);
            for n in 1..=8usize {
                let searched = find_side(&rules, tile, n).is_some();
                prop_assert_eq!(brute[n - 1], searched);
                prop_assert_eq!(side_exists_by_threshold(th, n as u64), searched, "tile {} N {}", tile, n);
            }
        }
    }
}

// -- weighted rotation -------------------------------------------------------

#[test]
fn open_rotation_formula() {
    let rules = rotation_rules(2, &[Some(0), Some(-1), Some(2)]);
    let inst = TilingInstance::new(rules, BoundaryCondition::Open).with_cost_bound(CostBound(vec![-24]));
    let r = weighted_rotation_decide(&inst, 4).unwrap();
    assert_eq!(r.min_cost, Some(BigInt::from(-24)));
    assert!(r.exists);
    let t = r.witness.unwrap();
    assert_eq!(validate_tiling(&inst, &t).unwrap().total_cost, -24);
}

#[test]
fn four_corners_needs_constant_bound() {
    let rules = rotation_rules(2, &[Some(0), Some(1), Some(0)]);
    let inst = TilingInstance::new(rules, BoundaryCondition::FourCorners(0)).with_cost_bound(CostBound(vec![0, 1]));
    assert!(matches!(weighted_rotation_decide(&inst, 4), Err(VariantError::Unsupported(_))));
}

/// Three tiles, one zero-cost component {t0, t1}; t2 is reachable only at a cost.
fn corner_instance(corner: usize, c: i64) -> TilingInstance {
    let rules = rotation_rules(3, &[Some(1), Some(0), Some(1), Some(2), None, Some(1)]);
    TilingInstance::new(rules, BoundaryCondition::FourCorners(corner)).with_cost_bound(CostBound(vec![c]))
}

#[test]
fn four_corners_small_n_matches_oracle() {
    for corner in 0..3 {
        for c in 0..=3 {
            let inst = corner_instance(corner, c);
            let got = weighted_rotation_decide(&inst, 4).unwrap();
            assert_eq!(got.exists, brute_force_grid(&inst, 4).unwrap().exists, "corner {corner} c {c}");
            for n in 5..=7 {
                let got = weighted_rotation_decide(&inst, n).unwrap();
                let want = solve_grid(&inst, n, SolveMode::Exists).unwrap();
                assert_eq!(got.exists, want.exists, "corner {corner} c {c} N {n}");
            }
        }
    }
}

#[test]
fn corner_procedure_matches_exact_past_threshold() {
    let cfg = SolverConfig {
        force_backtracking: true,
        ..SolverConfig::default()
    };
    for corner in 0..3 {
        for c in 0..=1 {
            let inst = corner_instance(corner, c);
            let from = corner_threshold(c, 3);
            for n in from..from + 2 {
                let procedure = corner_square_total(&inst, n).unwrap().is_some();
                let exact = solve_grid_with(&inst, n, SolveMode::Exists, &cfg).unwrap().exists;
                assert_eq!(procedure, exact, "corner {corner} c {c} N {n}");
                assert_eq!(weighted_rotation_decide(&inst, n).unwrap().exists, exact);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn open_and_periodic_match_oracle(
        m in 1usize..=3,
        upper in proptest::collection::vec(weight(), 6),
        bound in -6i64..=6,
        n in 1usize..=3,
        periodic in any::<bool>(),
    ) {
        let rules = rotation_rules(m, &upper[..tri(m)]);
        let bc = if periodic { BoundaryCondition::Periodic } else { BoundaryCondition::Open };
        let inst = TilingInstance::new(rules, bc).with_cost_bound(CostBound(vec![bound]));
        let got = weighted_rotation_decide(&inst, n).unwrap();
        let want = brute_force_grid(&inst, n).unwrap();
        prop_assert_eq!(&got.min_cost, &want.min_cost);
        prop_assert_eq!(got.exists, want.exists);
        if let Some(t) = got.witness {
            let report = validate_tiling(&inst, &t).unwrap();
            prop_assert!(report.is_valid());
            prop_assert_eq!(Some(BigInt::from(report.total_cost)), got.min_cost);
        }
    }

    #[test]
    fn four_corners_match_oracle(
        upper in proptest::collection::vec(prop_oneof![Just(None), (0i64..=2).prop_map(Some)], 6),
        corner in 0usize..3,
        c in 0i64..=2,
        n in 2usize..=4,
    ) {
        let rules = rotation_rules(3, &upper);
        let inst = TilingInstance::new(rules, BoundaryCondition::FourCorners(corner))
            .with_cost_bound(CostBound(vec![c]));
        let got = weighted_rotation_decide(&inst, n).unwrap();
        prop_assert_eq!(got.exists, brute_force_grid(&inst, n).unwrap().exists);
    }
}
