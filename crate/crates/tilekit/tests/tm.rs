use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilekit::grid::{solve_grid, SolveMode};
use tilekit::tm::*;

#[test]
fn trivial_machines() {
    let idle = TuringMachine::build(&["#"], &["q0"], None, &[], true).unwrap();
    let r = run_tm(&idle, &[], 3).unwrap();
    assert_eq!(r.halted_at, Some(0));
    assert_eq!(r.frontier, vec![Config::initial(&idle, &[])]);

    let wa = write_and_accept();
    let accepted_by = (1..=3).find(|&k| run_tm(&wa, &[], k).unwrap().accepted);
    assert_eq!(accepted_by, Some(1));
    assert!(!run_tm(&wa, &[], 0).unwrap().accepted);
}

#[test]
fn spec_files_round_trip() {
    for (_, counter, verifier) in fixture_pairs() {
        for tm in [counter, verifier] {
            let spec = tm.to_spec();
            let text = serde_json::to_string(&spec).unwrap();
            let back: TmSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(TuringMachine::from_spec(&back).unwrap(), tm);
        }
    }
}

#[test]
fn nondeterministic_runs_explore_every_branch() {
    let v = parity_verifier();
    let ones = |k: usize| {
        let mut t = vec![v.symbol("x").unwrap()];
        t.extend(std::iter::repeat_n(v.symbol("1").unwrap(), k));
        t
    };
    for k in 1..12 {
        let r = run_tm(&v, &ones(k), k).unwrap();
        assert_eq!(r.accepted, k % 2 == 0, "K={k}");
    }
    assert!(matches!(run_tm(&v, &[], STEP_CAP + 1), Err(TmError::Cap(_))));
}

#[test]
fn counter_output_round_trips_through_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7117);
    let mut ks: Vec<BigUint> = (0u32..300).map(BigUint::from).collect();
    for bits in [20u64, 40, 64, 100] {
        for _ in 0..10 {
            let bytes: Vec<u8> = (0..bits / 8 + 1).map(|_| rng.gen()).collect();
            ks.push(BigUint::from_bytes_le(&bytes) % (BigUint::from(1u32) << bits));
        }
    }
    for k in ks {
        let x = f_bc(&k);
        assert_eq!(reduce_to_n(&x).unwrap(), &k + STEP_OFFSET, "K={k}");
    }
    let tm = binary_counter();
    let bogus = vec![tm.symbol("1").unwrap()];
    assert!(matches!(reduce_to_n(&bogus), Err(TmError::NotInImage(_))));
}

#[test]
fn parity_constrained_reduction() {
    let slow = slow_machine(&binary_counter(), 3);
    let steps = trace(&slow, &[], 3000).unwrap();
    for k in [5u32, 17, 60, 123, 400] {
        let x = f_bc(&BigUint::from(k));
        for odd in [true, false] {
            let n = reduce_to_n_with_parity(&x, odd).unwrap();
            assert_eq!(n.is_odd(), odd);
            let run = (n - STEP_OFFSET).to_usize().unwrap();
            assert_eq!(steps[run].tape, x, "K={k} odd={odd}");
        }
    }
}

#[test]
fn recorded_growth_constants_hold() {
    for n in COUNTER_N0..=10_000 {
        let len = f_bc(&BigUint::from(n)).len() as f64;
        let n = n as f64;
        assert!(2f64.powf(COUNTER_C1 * len) <= n, "N={n} |x|={len}");
        assert!(n <= 2f64.powf(COUNTER_C2 * len), "N={n} |x|={len}");
    }
}

#[test]
fn prime_reduction_examples() {
    let r = prime_reduce(&BigUint::from(5u32), 1).unwrap();
    assert_eq!(r.lower, BigUint::from(320u32));
    assert!(r.prime >= BigUint::from(320u32) && r.prime < BigUint::from(367u32));
    assert_eq!(&r.prime >> r.shift, BigUint::from(5u32));
    let r = prime_reduce(&BigUint::from(2u32), 1).unwrap();
    assert_eq!(r.lower, BigUint::from(32u32));
    assert!(r.prime < BigUint::from(43u32));
    assert!(prime_reduce(&BigUint::from(1u32), 1).is_err());
    // the seed changes the sample, never the certificate
    for seed in 0..8 {
        let r = prime_reduce(&BigUint::from(97u32), seed).unwrap();
        assert!(is_prime(&r.prime) && r.prime >= r.lower && r.prime < r.upper);
    }
}

#[test]
fn compile_rejects_collisions() {
    assert!(matches!(compile_tm(&unary_counter(), &all_ones_verifier()), Err(TmError::Collision(_))));
    assert!(matches!(compile_tm(&parity_verifier(), &parity_verifier()), Err(TmError::Spec(_))));
}

#[test]
fn witness_rows_hold_exactly_one_head_per_layer() {
    for (name, counter, verifier) in fixture_pairs() {
        let compiled = compile_tm(&counter, &verifier).unwrap();
        for n in 5..=9 {
            let Some(w) = solve_grid(&compiled.instance, n, SolveMode::Exists).unwrap().witness else {
                continue;
            };
            for layer in 0..2 {
                let tiles = if layer == 0 { &compiled.counter_tiles } else { &compiled.verifier_tiles };
                for row in 1..n - 1 {
                    let heads = (1..n - 1)
                        .filter(|&col| {
                            let t = tiles[compiled.layered.tuples[w.get(row, col)][layer]];
                            matches!(t, LayerTile::Interior(Interior::Arrived { .. }))
                        })
                        .count();
                    assert_eq!(heads, 1, "{name} N={n} layer {layer} row {row}");
                }
            }
            // border: corners C, sides W/E/N/S
            let boundary = |r: usize, c: usize| compiled.counter_tiles[compiled.layered.tuples[w.get(r, c)][0]];
            for i in 1..n - 1 {
                assert_eq!(boundary(0, i), LayerTile::N);
                assert_eq!(boundary(n - 1, i), LayerTile::S);
                assert_eq!(boundary(i, 0), LayerTile::W);
                assert_eq!(boundary(i, n - 1), LayerTile::E);
            }
            for (r, c) in [(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)] {
                assert_eq!(boundary(r, c), LayerTile::C);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deterministic_run_matches_trace(steps in 0usize..200, input_len in 0usize..6) {
        let tm = small_binary_counter();
        let input = vec![tm.symbol("#").unwrap(); input_len];
        let t = trace(&tm, &input, steps).unwrap();
        let r = run_tm(&tm, &input, steps).unwrap();
        prop_assert_eq!(r.frontier, vec![t[steps].clone()]);
    }

    #[test]
    fn f_bc_is_the_simulated_tape(k in 0usize..4000) {
        let t = trace(&binary_counter(), &[], k).unwrap();
        prop_assert_eq!(f_bc(&BigUint::from(k)), t[k].tape.clone());
    }
}
