use proptest::prelude::*;
use tilekit::tiling::*;

const F: i64 = DEFAULT_SENTINEL;

fn names(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("t{i}")).collect()
}

fn matrix(m: usize, flat: &[i64]) -> Vec<Vec<i64>> {
    flat[..m * m].chunks(m).map(<[i64]>::to_vec).collect()
}

fn symmetrize(mut w: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    for a in 0..w.len() {
        for b in 0..a {
            w[a][b] = w[b][a];
        }
    }
    w
}

fn weight() -> impl Strategy<Value = i64> {
    prop_oneof![1 => Just(F), 4 => -3i64..=3]
}

fn cost(inst: &TilingInstance, t: &Tiling) -> i64 {
    validate_tiling(inst, t).unwrap().total_cost
}

fn tiling(n: usize, m: usize, cells: &[usize]) -> Tiling {
    Tiling::new(n, n, cells[..n * n].iter().map(|c| c % m).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reflection_symmetric_rules_give_reflection_invariant_costs(
        m in 1usize..=3,
        h in proptest::collection::vec(weight(), 9),
        v in proptest::collection::vec(weight(), 9),
        n in 1usize..=4,
        cells in proptest::collection::vec(0usize..3, 16),
        periodic in any::<bool>(),
    ) {
        let rules = RuleSet::new(names(m), symmetrize(matrix(m, &h)), symmetrize(matrix(m, &v)), F).unwrap();
        prop_assert_ne!(check_symmetry(&rules), Symmetry::None);
        let bc = if periodic { BoundaryCondition::Periodic } else { BoundaryCondition::Open };
        let inst = TilingInstance::new(rules, bc);
        let t = tiling(n, m, &cells);
        let base = cost(&inst, &t);
        prop_assert_eq!(cost(&inst, &t.reflect_horizontal()), base);
        prop_assert_eq!(cost(&inst, &t.reflect_vertical()), base);
    }

    #[test]
    fn rotation_symmetric_rules_give_rotation_invariant_costs(
        m in 1usize..=3,
        w in proptest::collection::vec(weight(), 9),
        n in 1usize..=4,
        cells in proptest::collection::vec(0usize..3, 16),
        periodic in any::<bool>(),
    ) {
        let w = symmetrize(matrix(m, &w));
        let rules = RuleSet::new(names(m), w.clone(), w, F).unwrap();
        prop_assert_eq!(check_symmetry(&rules), Symmetry::Rotation);
        let bc = if periodic { BoundaryCondition::Periodic } else { BoundaryCondition::Open };
        let inst = TilingInstance::new(rules, bc);
        let t = tiling(n, m, &cells);
        let base = cost(&inst, &t);
        let mut r = t.clone();
        for _ in 0..4 {
            r = r.rotate_clockwise();
            prop_assert_eq!(cost(&inst, &r), base);
        }
        prop_assert_eq!(r, t);
    }

    #[test]
    fn periodic_cost_is_shift_invariant(
        m in 1usize..=3,
        h in proptest::collection::vec(weight(), 9),
        v in proptest::collection::vec(weight(), 9),
        n in 1usize..=4,
        cells in proptest::collection::vec(0usize..3, 16),
        dr in 0usize..4,
        dc in 0usize..4,
    ) {
        let rules = RuleSet::new(names(m), matrix(m, &h), matrix(m, &v), F).unwrap();
        let inst = TilingInstance::new(rules, BoundaryCondition::Periodic);
        let t = tiling(n, m, &cells);
        prop_assert_eq!(cost(&inst, &t.shift(dr % n, dc % n)), cost(&inst, &t));
    }

    #[test]
    fn layered_cost_is_sum_of_layers_plus_terms(
        h1 in proptest::collection::vec(-3i64..=3, 4),
        v1 in proptest::collection::vec(-3i64..=3, 4),
        h2 in proptest::collection::vec(-3i64..=3, 9),
        v2 in proptest::collection::vec(-3i64..=3, 9),
        cross in proptest::collection::vec(any::<bool>(), 6),
        terms in proptest::collection::vec((any::<bool>(), 0usize..2, 0usize..3, 0usize..2, 0usize..3, -4i64..=4), 0..4),
        cells in proptest::collection::vec(0usize..64, 9),
    ) {
        let l1 = RuleSet::new(names(2), matrix(2, &h1), matrix(2, &v1), F).unwrap();
        let l2 = RuleSet::new(names(3), matrix(3, &h2), matrix(3, &v2), F).unwrap();
        let mut allowed: Vec<Vec<bool>> = cross.chunks(3).map(<[bool]>::to_vec).collect();
        allowed[0][0] = true;
        let conditional: Vec<ConditionalTerm> = terms
            .iter()
            .map(|&(vertical, a1, a2, b1, b2, weight)| ConditionalTerm {
                axis: if vertical { Axis::Vertical } else { Axis::Horizontal },
                first: vec![a1, a2],
                second: vec![b1, b2],
                weight,
            })
            .collect();
        let spec = LayerSpec {
            layers: vec![l1.clone(), l2.clone()],
            cross_layer: vec![CrossLayerRule { layers: (0, 1), allowed: allowed.clone() }],
            conditional: conditional.clone(),
        };
        let layered = build_layered_rule_set(&spec).unwrap();
        let count = allowed.iter().flatten().filter(|&&b| b).count();
        prop_assert_eq!(layered.tuples.len(), count);
        let t = Tiling::new(3, 3, cells.iter().map(|c| c % count).collect()).unwrap();
        let inst = TilingInstance::new(layered.rules.clone(), BoundaryCondition::Open);
        let mut want = 0i64;
        for (k, layer) in [l1, l2].into_iter().enumerate() {
            let proj = layered.project(&t, k);
            want += cost(&TilingInstance::new(layer, BoundaryCondition::Open), &proj);
        }
        for_each_pair(&t, false, |pair, a, b| {
            for term in &conditional {
                let axis_matches = term.axis == pair.axis;
                if axis_matches && term.first == layered.tuples[a] && term.second == layered.tuples[b] {
                    want += term.weight;
                }
            }
        });
        prop_assert_eq!(cost(&inst, &t), want);
    }
}

#[test]
fn sentinel_pairs_invalidate_regardless_of_bound() {
    let rules = RuleSet::from_allowed(names(2), |a, b| a != b, |_, _| true);
    let inst = TilingInstance::new(rules, BoundaryCondition::Open).with_cost_bound(CostBound(vec![i64::MAX / 2]));
    let report = validate_tiling(&inst, &Tiling::uniform(2, 0)).unwrap();
    assert!(!report.is_valid());
    assert_eq!(report.violations.len(), 2);
}

#[test]
fn corners_are_reported_as_mismatches() {
    let rules = RuleSet::from_allowed(names(2), |_, _| true, |_, _| true);
    let inst = TilingInstance::new(rules, BoundaryCondition::OneCorner(1, Corner::BottomRight));
    let report = validate_tiling(&inst, &Tiling::uniform(3, 0)).unwrap();
    assert_eq!(report.boundary_mismatches.len(), 1);
    assert_eq!(report.boundary_mismatches[0].cell, (2, 2));
    assert!(!report.is_valid());
}

#[test]
fn cost_bound_is_exact_for_large_n() {
    let p = CostBound(vec![-2, 0, 3]);
    assert_eq!(p.eval(10).to_string(), "298");
    assert_eq!(
        CostBound(vec![0, 0, 0, i64::MAX]).eval(1 << 20).to_string(),
        (num_bigint::BigInt::from(i64::MAX) * num_bigint::BigInt::from(1u64 << 60)).to_string()
    );
}
