use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tilekit::clock::*;
use tilekit::tm;

const EIG_TOL: f64 = 1e-10;
const AMPLITUDE_TOL: f64 = 1e-8;

fn dense_lowest(m: &DMatrix<f64>, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.truncate(k);
    v
}

#[test]
fn schedule_length_and_endpoints() {
    for n in 4..=9 {
        let seq = clock_sequence(n).unwrap();
        assert_eq!(seq.len(), 4 * (n - 2) * (n - 2));
        assert_eq!(seq.len(), schedule_len(n));
        assert_eq!(seq[0], initial_state(n).unwrap());
        assert_eq!(*seq.last().unwrap(), final_state(n).unwrap());
        assert!(seq.iter().all(|s| s.is_well_formed()));
        for w in seq.windows(2) {
            assert_eq!(transition(&w[0], Direction::Forward).unwrap().as_ref(), Some(&w[1]));
            assert_eq!(transition(&w[1], Direction::Backward).unwrap().as_ref(), Some(&w[0]));
        }
    }
    assert_eq!(clock_sequence(6).unwrap().len(), 64);
    assert!(matches!(clock_sequence(3), Err(ClockError::TooShort(3))));
}

#[test]
fn schedule_panels_are_contiguous_runs() {
    let seq = clock_sequence(6).unwrap();
    let expected = [("panel-t0", 0), ("panel-t8", 8), ("panel-t28", 28), ("panel-t36", 36), ("panel-t56", 56)];
    for (name, at) in expected {
        let panel = schedule_panel(name).unwrap();
        assert_eq!(locate_panel(&seq, &panel), Some(at), "{name}");
    }
    let last = schedule_panel("panel-t56").unwrap();
    assert_eq!(last.last(), seq.last());
    let first = schedule_panel("panel-t0").unwrap();
    assert_eq!(transition(&first[0], Direction::Forward).unwrap(), Some(first[1].clone()));
}

#[test]
fn rendering_round_trips() {
    for s in clock_sequence(5).unwrap() {
        assert_eq!(ChainState::parse_line(&s.render_line()).unwrap(), s);
    }
    assert!(ChainState::parse_line("|- R9:0 -|").is_err());
    assert_eq!(
        initial_state(4).unwrap().render_frame(),
        "|- R0 _r -|\n|- 0B 0  -|"
    );
}

#[test]
fn transition_endpoints_and_errors() {
    let s0 = initial_state(6).unwrap();
    assert_eq!(transition(&s0, Direction::Backward).unwrap(), None);
    assert_eq!(transition(&final_state(6).unwrap(), Direction::Forward).unwrap(), None);
    let mut bad = s0.clone();
    bad.sites[2] = SiteState::Cell(Track1::R1, Track2::Zero);
    assert!(matches!(transition(&bad, Direction::Forward), Err(ClockError::NotWellFormed(_))));
}

#[test]
fn forward_backward_identity_on_random_mid_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let seqs: Vec<Vec<ChainState>> = (4..=12).map(|n| clock_sequence(n).unwrap()).collect();
    for _ in 0..500 {
        let seq = &seqs[rng.gen_range(0..seqs.len())];
        let s = &seq[rng.gen_range(1..seq.len() - 1)];
        let back = transition(s, Direction::Backward).unwrap().unwrap();
        assert_eq!(transition(&back, Direction::Forward).unwrap().as_ref(), Some(s));
    }
}

#[test]
fn illegal_pattern_contents() {
    let set = illegal_pattern_set();
    let site = |a, b| SiteState::Cell(a, b);
    let has_site = |s: SiteState| set.iter().any(|p| matches!(p, IllegalPattern::Site(x, _) if *x == s));
    let has_pair = |a: SiteState, b: SiteState| {
        set.iter().any(|p| matches!(p, IllegalPattern::Pair(x, y, _) if *x == a && *y == b))
    };
    assert!(has_site(site(Track1::L1, Track2::ZeroB)));
    assert!(has_site(site(Track1::R2, Track2::OneB)));
    assert!(has_pair(site(Track1::R2, Track2::One), site(Track1::BlankR, Track2::ZeroB)));
    for t in [Track2::Zero, Track2::ZeroB] {
        assert!(has_site(site(Track1::R2, t)) && has_site(site(Track1::L2, t)));
    }
    for t in [Track2::Two, Track2::OneB] {
        assert!(has_site(site(Track1::R1, t)) && has_site(site(Track1::L1, t)));
    }
    for t in [Track2::One, Track2::Two, Track2::OneB] {
        assert!(has_site(site(Track1::R0, t)) && has_site(site(Track1::L0, t)));
    }
    // end markers only at the extremes
    let cell = site(Track1::BlankL, Track2::One);
    assert!(has_pair(cell, SiteState::LeftEnd));
    assert!(has_pair(SiteState::RightEnd, cell));
    assert!(has_pair(SiteState::LeftEnd, SiteState::RightEnd));
    // frozen after auditing the assembled list
    assert_eq!(set.len(), 1634);
    assert_eq!(transition_rules().len(), 117);
    let table = IllegalTable::new();
    for n in 4..=8 {
        assert!(clock_sequence(n).unwrap().iter().all(|s| table.violations(&s.codes()) == 0));
    }
}

#[test]
fn rule_table_is_injective_both_ways() {
    // panics on a repeated left or right side
    let t = RuleTable::new();
    assert_eq!(t.rules.len(), 117);
}

#[test]
fn structure_exhaustive_small_chains() {
    for (n, max_steps) in [(4, 2), (5, 4), (6, 6)] {
        let r = check_structure(n).unwrap();
        assert_eq!(r.well_formed, 12 * (n - 2) * (n - 2));
        assert_eq!(r.ambiguous, 0, "N={n}");
        assert_eq!(r.escapes, 0, "N={n}");
        assert_eq!(r.unpenalized, 0, "N={n}");
        assert!(r.max_steps_to_illegal <= 2 * n);
        assert_eq!(r.max_steps_to_illegal, max_steps);
    }
}

#[test]
fn distance_to_illegal_separates_schedule() {
    let seq = clock_sequence(4).unwrap();
    for s in well_formed_states(4).unwrap() {
        let d = distance_to_illegal(&s, 8);
        if seq.contains(&s) {
            assert_eq!(d, None);
        } else {
            assert!(d.unwrap() <= 8);
        }
    }
}

#[test]
fn sector_dimensions() {
    assert_eq!(Basis::new(4, Sector::BracketedAll).unwrap().dim(), 1600);
    assert_eq!(Basis::new(5, Sector::BracketedAll).unwrap().dim(), 64000);
    assert_eq!(Basis::new(6, Sector::WellFormed).unwrap().dim(), 192);
    assert_eq!(Basis::new(4, Sector::Full).unwrap().dim(), 42usize.pow(4));
    let b = Basis::new(5, Sector::BracketedAll).unwrap();
    for i in [0, 17, 63999] {
        assert_eq!(b.index(&b.state(i)), Some(i));
    }
}

#[test]
fn legal_path_matches_displayed_matrix() {
    let h = build_hamiltonian(4, Sector::LegalPath, false).unwrap();
    assert_eq!(h.to_dense(), path_matrix(16));
    assert!(h.is_symmetric(0.0));
}

#[test]
fn path_spectrum_lanczos_and_dense() {
    let h = build_hamiltonian(4, Sector::LegalPath, false).unwrap();
    let e = lowest_eigenpairs(&h, 2, &LanczosOptions::default()).unwrap();
    let dense = dense_lowest(&path_matrix(16), 2);
    let exact = 1.0 - (std::f64::consts::PI / 16.0).cos();
    assert!(e[0].value.abs() < EIG_TOL);
    assert!((e[1].value - exact).abs() < EIG_TOL);
    assert!((dense[1] - exact).abs() < EIG_TOL);
    assert!((e[1].value - 0.019214).abs() < 1e-6);
    assert!(e.iter().all(|p| p.residual <= EIG_TOL));
}

#[test]
fn bracketed_ground_state_is_uniform_clock() {
    for n in [4, 5] {
        let h = build_hamiltonian(n, Sector::BracketedAll, false).unwrap();
        assert!(h.is_symmetric(0.0));
        let e = lowest_eigenpairs(&h, 2, &LanczosOptions::default()).unwrap();
        assert!(e[0].value.abs() < EIG_TOL, "N={n}: {}", e[0].value);
        assert!(e.iter().all(|p| p.residual <= EIG_TOL));
        assert!(schedule_uniformity_error(&h, &e[0].vector).unwrap() < AMPLITUDE_TOL);
        let t = schedule_len(n) as f64;
        let gap = e[1].value;
        assert!(gap >= 0.4 / (t * t), "N={n}: gap {gap}");
        // the gap is that of the clock path
        assert!((gap - (1.0 - (std::f64::consts::PI / t).cos())).abs() < 1e-9);
        let blocks = block_eigenpairs(&h, 2).unwrap();
        assert!((blocks[0].value - e[0].value).abs() < EIG_TOL);
        assert!((blocks[1].value - gap).abs() < EIG_TOL);
    }
}

#[test]
fn operators_are_psd() {
    for n in 4..=6 {
        let h = build_hamiltonian(n, Sector::WellFormed, false).unwrap();
        assert!(h.is_symmetric(0.0));
        let lowest = dense_lowest(&h.to_dense(), 1)[0];
        assert!(lowest >= -EIG_TOL, "N={n}: {lowest}");
    }
    let h = build_hamiltonian(4, Sector::BracketedAll, false).unwrap();
    assert!(block_eigenpairs(&h, 1).unwrap()[0].value >= -EIG_TOL);
}

#[test]
fn full_chain_with_boundary_term() {
    let h = build_hamiltonian(4, Sector::Full, true).unwrap();
    let e = block_eigenpairs(&h, 2).unwrap();
    assert!((e[0].value - 2.0).abs() < EIG_TOL, "{}", e[0].value);
    assert!(e[1].value > e[0].value + 1e-3);
    assert!(max_non_bracketed_amplitude(&h, &e[0].vector) < 1e-6);
    assert_eq!(non_bracketed_weight(&h, &e[0].vector), 0.0);
    assert!(schedule_uniformity_error(&h, &e[0].vector).unwrap() < AMPLITUDE_TOL);
}

#[test]
fn boundary_term_shifts_bracketed_sector() {
    let h = build_hamiltonian(4, Sector::BracketedAll, true).unwrap();
    let e = lowest_eigenpairs(&h, 1, &LanczosOptions::default()).unwrap();
    assert!((e[0].value - 2.0).abs() < EIG_TOL);
}

#[test]
fn lanczos_is_deterministic_and_reports_failure() {
    let h = build_hamiltonian(5, Sector::WellFormed, false).unwrap();
    let opts = LanczosOptions::default();
    let a = lowest_eigenpairs(&h, 3, &opts).unwrap();
    let b = lowest_eigenpairs(&h, 3, &opts).unwrap();
    assert_eq!(a, b);
    let dense = dense_lowest(&h.to_dense(), 3);
    for (p, d) in a.iter().zip(&dense) {
        assert!((p.value - d).abs() < EIG_TOL);
    }
    let tight = LanczosOptions {
        max_iter: 5,
        check_every: 5,
        ..opts
    };
    assert!(matches!(
        lowest_eigenpairs(&h, 2, &tight),
        Err(ClockError::NoConvergence { .. })
    ));
}

#[test]
fn budget_is_enforced() {
    assert!(matches!(
        build_hamiltonian(8, Sector::BracketedAll, false),
        Err(ClockError::Budget(_))
    ));
    assert!(matches!(build_hamiltonian(9, Sector::Full, false), Err(ClockError::Budget(_))));
}

fn construction() -> Construction {
    Construction::new(&zigzag_counter(), &home_verifier()).unwrap()
}

#[test]
fn simulator_counts_machine_steps() {
    let c = construction();
    for n in 4..=10 {
        let r = simulate_construction(&c, n, &[], false).unwrap();
        assert_eq!(r.clock_steps + 1, schedule_len(n));
        assert_eq!(r.counter_steps, n - 2, "N={n}");
        assert_eq!(r.verifier_steps + r.verifier_idle, n - 3, "N={n}");
        assert_eq!(r.tape_after_counting, counter_tape(&c.counter, n - 2, n - 2).unwrap());
        assert_eq!(r.violation, None, "N={n}");
        assert_eq!(r.backward_ambiguities, 0);
    }
    let r = simulate_construction(&c, 8, &[], false).unwrap();
    assert_eq!(r.counter_steps, 6);
}

#[test]
fn simulator_verdicts() {
    let c = construction();
    // cell 2 holds B' once the counter has made four steps
    let verdicts: Vec<bool> = (4..=9)
        .map(|n| simulate_construction(&c, n, &[], false).unwrap().accepted)
        .collect();
    assert_eq!(verdicts, [false, false, true, true, true, true]);
}

#[test]
fn simulator_detects_corruption() {
    let c = construction();
    let n = 7;
    let clean = c.initial_tracks(n, &[]).unwrap();
    // wrong start state on site 1: caught by the initialization sweep
    let mut work = clean.clone();
    work.counter[0] = HeadMark::State(c.counter.state("p").unwrap());
    let r = simulate_from(&c, initial_state(n).unwrap(), work, false).unwrap();
    let v = r.violation.unwrap();
    assert!(v.step <= 2 * n && v.reason.contains("counter"), "{v:?}");
    // every single-cell corruption of the counter track is caught within 2N steps
    for j in 0..n - 2 {
        for mark in [HeadMark::Left, HeadMark::Primed(c.counter.start), HeadMark::State(c.counter.start)] {
            if clean.counter[j] == mark {
                continue;
            }
            let mut work = clean.clone();
            work.counter[j] = mark;
            let r = simulate_from(&c, initial_state(n).unwrap(), work, false).unwrap();
            assert!(r.violation.is_some_and(|v| v.step <= 2 * n), "cell {j} {mark:?}");
        }
    }
    // a non-blank tape cell is met by the R0 sweep
    for j in 0..n - 2 {
        let mut work = clean.clone();
        work.tape[j] = 1;
        let r = simulate_from(&c, initial_state(n).unwrap(), work, false).unwrap();
        let v = r.violation.unwrap();
        assert_eq!((v.step, v.reason.as_str()), (j, "tape not blank"));
    }
}

#[test]
fn simulator_preconditions_and_overflow() {
    assert!(matches!(
        Construction::new(&zigzag_counter(), &tm::parity_verifier()),
        Err(ClockError::Precondition(_))
    ));
    // a head that only moves right leaves the chain
    let c = Construction::new(&tm::unary_counter(), &home_verifier()).unwrap();
    assert!(matches!(
        simulate_construction(&c, 6, &[], false),
        Err(ClockError::TapeOverflow { .. })
    ));
}

#[test]
fn simulator_frames_render() {
    let c = construction();
    let r = simulate_construction(&c, 6, &[true, false], true).unwrap();
    assert_eq!(r.frames.len(), 64);
    let first = render_sim_frame(&r.frames[0]);
    assert_eq!(first.lines().count(), 5);
    assert!(first.starts_with("|- R0"));
}

proptest! {
    #[test]
    fn well_formed_transitions_invert(n in 4usize..=12, pick in any::<prop::sample::Index>()) {
        let states = well_formed_states(n).unwrap();
        let s = pick.get(&states);
        for (dir, back) in [(Direction::Forward, Direction::Backward), (Direction::Backward, Direction::Forward)] {
            if let Some(t) = transition(s, dir).unwrap() {
                prop_assert!(t.is_well_formed());
                let round = transition(&t, back).unwrap();
                prop_assert_eq!(round.as_ref(), Some(s));
            }
        }
    }

    #[test]
    fn energy_counts_violations(idx in 0usize..1600) {
        // diagonal of a transition-free state equals its violation count
        let h = build_hamiltonian(4, Sector::BracketedAll, false).unwrap();
        let i = idx;
        let codes = h.basis.state(i);
        let rules = RuleTable::new();
        if rules.applicable(&codes, Direction::Forward).is_empty()
            && rules.applicable(&codes, Direction::Backward).is_empty()
        {
            prop_assert_eq!(h.get(i, i), IllegalTable::new().violations(&codes) as f64);
        }
    }
}
