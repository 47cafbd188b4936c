//! Clock chain: two-track site states, illegal patterns, clock transition
//! rules, Hamiltonian assembly over several sectors, eigensolvers, and a
//! classical simulator of the full construction for reversible machines.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::tm::{run_blank, Move, TmError, TuringMachine};

#[derive(Debug, Error)]
pub enum ClockError {
    #[error("chain length must be at least 4, got {0}")]
    TooShort(usize),
    #[error("state is not well formed: {0}")]
    NotWellFormed(String),
    #[error("memory budget exceeded: {0}")]
    Budget(String),
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("transition ambiguity at step {step}: {detail}")]
    Ambiguity { step: usize, detail: String },
    #[error("machine head left the chain at step {step}: {detail}")]
    TapeOverflow { step: usize, detail: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Tm(#[from] TmError),
}

// ---------------------------------------------------------------------------
// Site states

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Track1 {
    BlankL,
    BlankR,
    R0,
    R1,
    R2,
    L0,
    L1,
    L2,
}

impl Track1 {
    pub const ALL: [Track1; 8] = [
        Track1::BlankL,
        Track1::BlankR,
        Track1::R0,
        Track1::R1,
        Track1::R2,
        Track1::L0,
        Track1::L1,
        Track1::L2,
    ];

    pub fn is_arrow(self) -> bool {
        !matches!(self, Track1::BlankL | Track1::BlankR)
    }

    pub fn is_right(self) -> bool {
        matches!(self, Track1::R0 | Track1::R1 | Track1::R2)
    }

    pub fn token(self) -> &'static str {
        match self {
            Track1::BlankL => "_l",
            Track1::BlankR => "_r",
            Track1::R0 => "R0",
            Track1::R1 => "R1",
            Track1::R2 => "R2",
            Track1::L0 => "L0",
            Track1::L1 => "L1",
            Track1::L2 => "L2",
        }
    }

    /// Phase of an arrow: 0 initialization, 1 counting, 2 computation.
    pub fn phase(self) -> Option<u8> {
        match self {
            Track1::R0 | Track1::L0 => Some(0),
            Track1::R1 | Track1::L1 => Some(1),
            Track1::R2 | Track1::L2 => Some(2),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Track2 {
    Zero,
    One,
    Two,
    ZeroB,
    OneB,
}

impl Track2 {
    pub const ALL: [Track2; 5] = [Track2::Zero, Track2::One, Track2::Two, Track2::ZeroB, Track2::OneB];

    pub fn token(self) -> &'static str {
        match self {
            Track2::Zero => "0",
            Track2::One => "1",
            Track2::Two => "2",
            Track2::ZeroB => "0B",
            Track2::OneB => "1B",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SiteState {
    LeftEnd,
    RightEnd,
    Cell(Track1, Track2),
}

/// Number of distinct site states: 40 two-track cells plus two ends.
pub const SITE_STATES: usize = 42;
const CELLS: usize = 40;
const LEFT_END: u8 = 40;
const RIGHT_END: u8 = 41;

impl SiteState {
    pub fn code(self) -> u8 {
        match self {
            SiteState::Cell(a, b) => (a as u8) * 5 + b as u8,
            SiteState::LeftEnd => LEFT_END,
            SiteState::RightEnd => RIGHT_END,
        }
    }

    pub fn from_code(code: u8) -> SiteState {
        match code {
            LEFT_END => SiteState::LeftEnd,
            RIGHT_END => SiteState::RightEnd,
            c => SiteState::Cell(Track1::ALL[(c / 5) as usize], Track2::ALL[(c % 5) as usize]),
        }
    }

    pub fn all() -> impl Iterator<Item = SiteState> {
        (0..SITE_STATES as u8).map(SiteState::from_code)
    }

    pub fn is_end(self) -> bool {
        !matches!(self, SiteState::Cell(..))
    }

    pub fn token(self) -> String {
        match self {
            SiteState::LeftEnd => "|-".into(),
            SiteState::RightEnd => "-|".into(),
            SiteState::Cell(a, b) => format!("{}:{}", a.token(), b.token()),
        }
    }

    pub fn parse(token: &str) -> Result<SiteState, ClockError> {
        match token {
            "|-" => return Ok(SiteState::LeftEnd),
            "-|" => return Ok(SiteState::RightEnd),
            _ => {}
        }
        let (a, b) = token
            .split_once(':')
            .ok_or_else(|| ClockError::Parse(format!("bad site token {token:?}")))?;
        let t1 = Track1::ALL
            .into_iter()
            .find(|t| t.token() == a)
            .ok_or_else(|| ClockError::Parse(format!("bad track-1 token {a:?}")))?;
        let t2 = Track2::ALL
            .into_iter()
            .find(|t| t.token() == b)
            .ok_or_else(|| ClockError::Parse(format!("bad track-2 token {b:?}")))?;
        Ok(SiteState::Cell(t1, t2))
    }
}

fn cell(a: Track1, b: Track2) -> SiteState {
    SiteState::Cell(a, b)
}

/// Standard basis state of the whole chain, ends included.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainState {
    pub sites: Vec<SiteState>,
}

impl ChainState {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn codes(&self) -> Vec<u8> {
        self.sites.iter().map(|s| s.code()).collect()
    }

    pub fn from_codes(codes: &[u8]) -> ChainState {
        ChainState {
            sites: codes.iter().map(|&c| SiteState::from_code(c)).collect(),
        }
    }

    /// Ends at both extremes and nowhere else.
    pub fn is_bracketed(&self) -> bool {
        let n = self.sites.len();
        n >= 2
            && self.sites[0] == SiteState::LeftEnd
            && self.sites[n - 1] == SiteState::RightEnd
            && self.sites[1..n - 1].iter().all(|s| !s.is_end())
    }

    /// Track 1 reads `|- _l* arrow _r* -|` and track 2 reads
    /// `|- 1* (0B 0* | 1B 2*) -|`.
    pub fn is_well_formed(&self) -> bool {
        if !self.is_bracketed() {
            return false;
        }
        let interior = &self.sites[1..self.sites.len() - 1];
        let (t1, t2): (Vec<Track1>, Vec<Track2>) = interior
            .iter()
            .map(|s| match s {
                SiteState::Cell(a, b) => (*a, *b),
                _ => unreachable!(),
            })
            .unzip();
        let Some(arrow) = t1.iter().position(|t| t.is_arrow()) else {
            return false;
        };
        let track1_ok = t1[..arrow].iter().all(|&t| t == Track1::BlankL)
            && t1[arrow + 1..].iter().all(|&t| t == Track1::BlankR);
        let Some(mark) = t2.iter().position(|&t| t != Track2::One) else {
            return false;
        };
        let track2_ok = match t2[mark] {
            Track2::ZeroB => t2[mark + 1..].iter().all(|&t| t == Track2::Zero),
            Track2::OneB => t2[mark + 1..].iter().all(|&t| t == Track2::Two),
            _ => false,
        };
        track1_ok && track2_ok
    }

    /// Arrow site and its track-1 state, for well-formed states.
    pub fn arrow(&self) -> Option<(usize, Track1)> {
        self.sites.iter().enumerate().find_map(|(i, s)| match s {
            SiteState::Cell(a, _) if a.is_arrow() => Some((i, *a)),
            _ => None,
        })
    }

    /// Single-line rendering, one token per site.
    pub fn render_line(&self) -> String {
        self.sites.iter().map(|s| s.token()).collect::<Vec<_>>().join(" ")
    }

    /// Two-line rendering with the tracks stacked.
    pub fn render_frame(&self) -> String {
        let cols: Vec<(String, String)> = self
            .sites
            .iter()
            .map(|s| match s {
                SiteState::Cell(a, b) => (a.token().to_string(), b.token().to_string()),
                e => (e.token(), e.token()),
            })
            .collect();
        let line = |pick: &dyn Fn(&(String, String)) -> String| {
            cols.iter()
                .map(|c| format!("{:<3}", pick(c)))
                .collect::<Vec<_>>()
                .join("")
                .trim_end()
                .to_string()
        };
        format!("{}\n{}", line(&|c| c.0.clone()), line(&|c| c.1.clone()))
    }

    pub fn parse_line(line: &str) -> Result<ChainState, ClockError> {
        let sites = line.split_whitespace().map(SiteState::parse).collect::<Result<Vec<_>, _>>()?;
        Ok(ChainState { sites })
    }
}

impl fmt::Display for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_line())
    }
}

// ---------------------------------------------------------------------------
// Illegal patterns

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IllegalReason {
    /// Track 1 pair outside `|- _l* arrow _r* -|`.
    Track1Shape,
    /// Track 2 pair outside `|- 1* (0B 0* | 1B 2*) -|`.
    Track2Shape,
    /// Arrow over a track-2 state of another phase.
    PhaseMismatch,
    /// Named single-site or pair prohibition.
    Named,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IllegalPattern {
    Site(SiteState, IllegalReason),
    Pair(SiteState, SiteState, IllegalReason),
}

/// Successors allowed by each regular expression (each symbol class occurs once).
fn track1_follows(a: Option<Track1>, b: Option<Track1>, a_left_end: bool, b_right_end: bool) -> bool {
    use Track1::*;
    match (a, b) {
        // |- followed by _l or an arrow
        (None, Some(t)) if a_left_end => t == BlankL || t.is_arrow(),
        (Some(BlankL), Some(t)) => t == BlankL || t.is_arrow(),
        (Some(t), Some(BlankR)) => t == BlankR || t.is_arrow(),
        (Some(_), Some(_)) => false,
        (Some(t), None) if b_right_end => t == BlankR || t.is_arrow(),
        _ => false,
    }
}

fn track2_follows(a: Option<Track2>, b: Option<Track2>, a_left_end: bool, b_right_end: bool) -> bool {
    use Track2::*;
    let start_of_word = |t: Track2| matches!(t, One | ZeroB | OneB);
    match (a, b) {
        (None, Some(t)) if a_left_end => start_of_word(t),
        (Some(One), Some(t)) => start_of_word(t),
        (Some(ZeroB | Zero), Some(t)) => t == Zero,
        (Some(OneB | Two), Some(t)) => t == Two,
        (Some(One), None) => false,
        (Some(_), None) if b_right_end => true,
        _ => false,
    }
}

fn split(s: SiteState) -> (Option<Track1>, Option<Track2>) {
    match s {
        SiteState::Cell(a, b) => (Some(a), Some(b)),
        _ => (None, None),
    }
}

fn regex_reason(a: SiteState, b: SiteState) -> Option<IllegalReason> {
    let a_left = a == SiteState::LeftEnd;
    let b_right = b == SiteState::RightEnd;
    // nothing precedes |- and nothing follows -|
    if a == SiteState::RightEnd || b == SiteState::LeftEnd {
        return Some(IllegalReason::Track1Shape);
    }
    let ((a1, a2), (b1, b2)) = (split(a), split(b));
    if !track1_follows(a1, b1, a_left, b_right) {
        return Some(IllegalReason::Track1Shape);
    }
    if !track2_follows(a2, b2, a_left, b_right) {
        return Some(IllegalReason::Track2Shape);
    }
    None
}

fn site_reason(s: SiteState) -> Option<IllegalReason> {
    use Track1::*;
    use Track2::*;
    let SiteState::Cell(a, b) = s else { return None };
    let phase_ok = match a.phase() {
        Some(0) => matches!(b, Zero | ZeroB),
        Some(1) => !matches!(b, Two | OneB),
        Some(2) => !matches!(b, Zero | ZeroB),
        _ => true,
    };
    if !phase_ok {
        return Some(IllegalReason::PhaseMismatch);
    }
    if (a, b) == (L1, ZeroB) || (a, b) == (R2, OneB) {
        return Some(IllegalReason::Named);
    }
    None
}

/// Every illegal site state and adjacent pair for the two-track model.
pub fn illegal_pattern_set() -> Vec<IllegalPattern> {
    let mut out = Vec::new();
    for s in SiteState::all() {
        if let Some(r) = site_reason(s) {
            out.push(IllegalPattern::Site(s, r));
        }
    }
    for a in SiteState::all() {
        for b in SiteState::all() {
            if let Some(r) = regex_reason(a, b) {
                out.push(IllegalPattern::Pair(a, b, r));
            }
        }
    }
    out.push(IllegalPattern::Pair(
        cell(Track1::R2, Track2::One),
        cell(Track1::BlankR, Track2::ZeroB),
        IllegalReason::Named,
    ));
    out
}

/// Lookup tables for [`illegal_pattern_set`].
#[derive(Clone, Debug)]
pub struct IllegalTable {
    site: [bool; SITE_STATES],
    pair: Vec<bool>,
}

impl IllegalTable {
    pub fn new() -> Self {
        let mut site = [false; SITE_STATES];
        let mut pair = vec![false; SITE_STATES * SITE_STATES];
        for p in illegal_pattern_set() {
            match p {
                IllegalPattern::Site(s, _) => site[s.code() as usize] = true,
                IllegalPattern::Pair(a, b, _) => pair[a.code() as usize * SITE_STATES + b.code() as usize] = true,
            }
        }
        IllegalTable { site, pair }
    }

    pub fn site(&self, code: u8) -> bool {
        self.site[code as usize]
    }

    pub fn pair(&self, a: u8, b: u8) -> bool {
        self.pair[a as usize * SITE_STATES + b as usize]
    }

    /// Number of violated patterns (site terms plus pair terms).
    pub fn violations(&self, codes: &[u8]) -> usize {
        codes.iter().filter(|&&c| self.site(c)).count()
            + codes.windows(2).filter(|w| self.pair(w[0], w[1])).count()
    }
}

impl Default for IllegalTable {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Transition rules

/// Concrete rule `ab -> cd` on an adjacent pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TransitionRule {
    pub from: (SiteState, SiteState),
    pub to: (SiteState, SiteState),
    pub family: &'static str,
}

/// All clock rules with track-2 wildcards expanded.
pub fn transition_rules() -> Vec<TransitionRule> {
    use Track1::*;
    use Track2::*;
    let (le, re) = (SiteState::LeftEnd, SiteState::RightEnd);
    let mut out = Vec::new();
    let mut push = |family, a, b, c, d| {
        out.push(TransitionRule {
            from: (a, b),
            to: (c, d),
            family,
        })
    };
    for x in Track2::ALL {
        push("R0 turn", cell(R0, x), re, cell(L0, x), re);
        for y in Track2::ALL {
            push("R0 move", cell(R0, x), cell(BlankR, y), cell(BlankL, x), cell(R0, y));
            push("R1 move", cell(R1, x), cell(BlankR, y), cell(BlankL, x), cell(R1, y));
            push("L0 move", cell(BlankL, x), cell(L0, y), cell(L0, x), cell(BlankR, y));
            push("L2 move", cell(BlankL, x), cell(L2, y), cell(L2, x), cell(BlankR, y));
        }
    }
    push("R1 turn", cell(R1, Zero), re, cell(L1, Zero), re);
    push("R1 to computation", cell(R1, ZeroB), re, cell(L2, OneB), re);
    push("R2 turn", cell(R2, Two), re, cell(L2, Two), re);
    push("R2 move", cell(R2, One), cell(BlankR, One), cell(BlankL, One), cell(R2, One));
    push("R2 move", cell(R2, Two), cell(BlankR, Two), cell(BlankL, Two), cell(R2, Two));
    push("R2 advance", cell(R2, One), cell(BlankR, OneB), cell(BlankL, OneB), cell(R2, Two));
    push("L0 to counting", le, cell(L0, ZeroB), le, cell(R1, ZeroB));
    push("L1 turn", le, cell(L1, One), le, cell(R1, One));
    push("L1 move", cell(BlankL, Zero), cell(L1, Zero), cell(L1, Zero), cell(BlankR, Zero));
    push("L1 move", cell(BlankL, One), cell(L1, One), cell(L1, One), cell(BlankR, One));
    push("L1 advance", cell(BlankL, ZeroB), cell(L1, Zero), cell(L1, One), cell(BlankR, ZeroB));
    push("L2 turn", le, cell(L2, One), le, cell(R2, One));
    out
}

/// Forward and backward lookup over pair codes.
#[derive(Clone, Debug)]
pub struct RuleTable {
    forward: Vec<Option<(u8, u8)>>,
    backward: Vec<Option<(u8, u8)>>,
    pub rules: Vec<TransitionRule>,
}

impl RuleTable {
    /// Panics if two rules share a left side or a right side.
    pub fn new() -> Self {
        let rules = transition_rules();
        let mut forward = vec![None; SITE_STATES * SITE_STATES];
        let mut backward = vec![None; SITE_STATES * SITE_STATES];
        let key = |p: (SiteState, SiteState)| p.0.code() as usize * SITE_STATES + p.1.code() as usize;
        let codes = |p: (SiteState, SiteState)| (p.0.code(), p.1.code());
        for r in &rules {
            assert!(forward[key(r.from)].replace(codes(r.to)).is_none(), "duplicate left side {r:?}");
            assert!(backward[key(r.to)].replace(codes(r.from)).is_none(), "duplicate right side {r:?}");
        }
        RuleTable {
            forward,
            backward,
            rules,
        }
    }

    pub fn forward(&self, a: u8, b: u8) -> Option<(u8, u8)> {
        self.forward[a as usize * SITE_STATES + b as usize]
    }

    pub fn backward(&self, a: u8, b: u8) -> Option<(u8, u8)> {
        self.backward[a as usize * SITE_STATES + b as usize]
    }

    /// Positions `i` at which a rule applies to `(codes[i], codes[i+1])`.
    pub fn applicable(&self, codes: &[u8], dir: Direction) -> Vec<usize> {
        (0..codes.len().saturating_sub(1))
            .filter(|&i| self.step_at(codes, i, dir).is_some())
            .collect()
    }

    fn step_at(&self, codes: &[u8], i: usize, dir: Direction) -> Option<(u8, u8)> {
        match dir {
            Direction::Forward => self.forward(codes[i], codes[i + 1]),
            Direction::Backward => self.backward(codes[i], codes[i + 1]),
        }
    }

    /// Applies the unique applicable rule; `Err` lists positions when several apply.
    pub fn step(&self, codes: &[u8], dir: Direction) -> Result<Option<Vec<u8>>, Vec<usize>> {
        let at = self.applicable(codes, dir);
        match at.as_slice() {
            [] => Ok(None),
            [i] => {
                let (c, d) = self.step_at(codes, *i, dir).unwrap();
                let mut out = codes.to_vec();
                out[*i] = c;
                out[*i + 1] = d;
                Ok(Some(out))
            }
            _ => Err(at),
        }
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    Forward,
    Backward,
}

/// Transcribed clock traces at `N = 6`, one state per line.
pub const FIGURE_PANELS: [(&str, &str); 5] = [
    ("panel-t0", include_str!("../data/clock/panel-t0.txt")),
    ("panel-t8", include_str!("../data/clock/panel-t8.txt")),
    ("panel-t28", include_str!("../data/clock/panel-t28.txt")),
    ("panel-t36", include_str!("../data/clock/panel-t36.txt")),
    ("panel-t56", include_str!("../data/clock/panel-t56.txt")),
];

pub fn schedule_panel(name: &str) -> Result<Vec<ChainState>, ClockError> {
    let (_, text) = FIGURE_PANELS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ClockError::Parse(format!("unknown panel {name:?}")))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(ChainState::parse_line).collect()
}

/// Start index of `panel` as a contiguous run inside `sequence`.
pub fn locate_panel(sequence: &[ChainState], panel: &[ChainState]) -> Option<usize> {
    if panel.is_empty() || panel.len() > sequence.len() {
        return None;
    }
    sequence.windows(panel.len()).position(|w| w == panel)
}

/// Unique successor or predecessor of a well-formed state.
pub fn transition(s: &ChainState, dir: Direction) -> Result<Option<ChainState>, ClockError> {
    if !s.is_well_formed() {
        return Err(ClockError::NotWellFormed(s.render_line()));
    }
    let table = RuleTable::new();
    match table.step(&s.codes(), dir) {
        Ok(next) => Ok(next.map(|c| ChainState::from_codes(&c))),
        Err(at) => Err(ClockError::Ambiguity {
            step: 0,
            detail: format!("rules apply at pairs {at:?} of {s}"),
        }),
    }
}

// ---------------------------------------------------------------------------
// Clock schedule

fn check_n(n: usize) -> Result<(), ClockError> {
    if n < 4 {
        return Err(ClockError::TooShort(n));
    }
    Ok(())
}

pub fn initial_state(n: usize) -> Result<ChainState, ClockError> {
    check_n(n)?;
    let mut sites = vec![SiteState::LeftEnd, cell(Track1::R0, Track2::ZeroB)];
    sites.extend(std::iter::repeat_n(cell(Track1::BlankR, Track2::Zero), n - 3));
    sites.push(SiteState::RightEnd);
    Ok(ChainState { sites })
}

pub fn final_state(n: usize) -> Result<ChainState, ClockError> {
    check_n(n)?;
    let mut sites = vec![SiteState::LeftEnd, cell(Track1::L2, Track2::OneB)];
    sites.extend(std::iter::repeat_n(cell(Track1::BlankR, Track2::Two), n - 3));
    sites.push(SiteState::RightEnd);
    Ok(ChainState { sites })
}

/// Number of clock states for a chain of `n` sites.
pub fn schedule_len(n: usize) -> usize {
    4 * (n - 2) * (n - 2)
}

/// Forward orbit of the initial state.
pub fn clock_sequence(n: usize) -> Result<Vec<ChainState>, ClockError> {
    let table = RuleTable::new();
    let mut cur = initial_state(n)?.codes();
    let mut out = vec![ChainState::from_codes(&cur)];
    loop {
        match table.step(&cur, Direction::Forward) {
            Ok(Some(next)) => {
                cur = next;
                out.push(ChainState::from_codes(&cur));
            }
            Ok(None) => break,
            Err(at) => {
                return Err(ClockError::Ambiguity {
                    step: out.len(),
                    detail: format!("rules apply at pairs {at:?}"),
                })
            }
        }
        if out.len() > schedule_len(n) + 1 {
            return Err(ClockError::Ambiguity {
                step: out.len(),
                detail: "schedule longer than expected".into(),
            });
        }
    }
    Ok(out)
}

/// All `12 (n-2)^2` well-formed states, in a fixed order.
pub fn well_formed_states(n: usize) -> Result<Vec<ChainState>, ClockError> {
    check_n(n)?;
    let inner = n - 2;
    let arrows = [Track1::R0, Track1::R1, Track1::R2, Track1::L0, Track1::L1, Track1::L2];
    let mut out = Vec::with_capacity(12 * inner * inner);
    for arrow in arrows {
        for pos in 0..inner {
            for (mark, tail) in [(Track2::ZeroB, Track2::Zero), (Track2::OneB, Track2::Two)] {
                for mpos in 0..inner {
                    let mut sites = vec![SiteState::LeftEnd];
                    for i in 0..inner {
                        let t1 = match i.cmp(&pos) {
                            std::cmp::Ordering::Less => Track1::BlankL,
                            std::cmp::Ordering::Equal => arrow,
                            std::cmp::Ordering::Greater => Track1::BlankR,
                        };
                        let t2 = match i.cmp(&mpos) {
                            std::cmp::Ordering::Less => Track2::One,
                            std::cmp::Ordering::Equal => mark,
                            std::cmp::Ordering::Greater => tail,
                        };
                        sites.push(cell(t1, t2));
                    }
                    sites.push(SiteState::RightEnd);
                    out.push(ChainState { sites });
                }
            }
        }
    }
    Ok(out)
}

/// Exhaustive structural checks over well-formed states.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    pub well_formed: usize,
    /// States with more than one forward or backward rule.
    pub ambiguous: usize,
    /// Transitions leaving the well-formed set.
    pub escapes: usize,
    /// Off-schedule states that never meet an illegal pattern within `2n` steps.
    pub unpenalized: usize,
    /// Largest number of steps needed to meet an illegal pattern.
    pub max_steps_to_illegal: usize,
}

pub fn check_structure(n: usize) -> Result<StructureReport, ClockError> {
    let table = RuleTable::new();
    let illegal = IllegalTable::new();
    let schedule: std::collections::HashSet<Vec<u8>> = clock_sequence(n)?.iter().map(|s| s.codes()).collect();
    let states = well_formed_states(n)?;
    let mut report = StructureReport {
        well_formed: states.len(),
        ..Default::default()
    };
    for s in &states {
        let codes = s.codes();
        for dir in [Direction::Forward, Direction::Backward] {
            match table.step(&codes, dir) {
                Err(_) => report.ambiguous += 1,
                Ok(Some(next)) if !ChainState::from_codes(&next).is_well_formed() => report.escapes += 1,
                _ => {}
            }
        }
        if schedule.contains(&codes) {
            continue;
        }
        let mut best = None::<usize>;
        for dir in [Direction::Forward, Direction::Backward] {
            let mut cur = codes.clone();
            for i in 0..=2 * n {
                if illegal.violations(&cur) > 0 {
                    best = Some(best.map_or(i, |b| b.min(i)));
                    break;
                }
                match table.step(&cur, dir) {
                    Ok(Some(next)) => cur = next,
                    _ => break,
                }
            }
        }
        match best {
            Some(i) => report.max_steps_to_illegal = report.max_steps_to_illegal.max(i),
            None => report.unpenalized += 1,
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Hamiltonians

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Sector {
    /// Every state with ends fixed at both extremes: 40^(n-2) states.
    BracketedAll,
    /// Well-formed states only.
    WellFormed,
    /// The clock schedule.
    LegalPath,
    /// Every state of the chain: 42^n states.
    Full,
}

impl Sector {
    pub fn parse(name: &str) -> Option<Sector> {
        match name {
            "bracketed" | "bracketed-all" => Some(Sector::BracketedAll),
            "wellformed" | "bracketed-wellformed" => Some(Sector::WellFormed),
            "path" | "legal-path" => Some(Sector::LegalPath),
            "full" => Some(Sector::Full),
            _ => None,
        }
    }
}

/// Basis of a sector, indexable both ways.
#[derive(Clone, Debug)]
pub enum Basis {
    Full { n: usize },
    BracketedAll { n: usize },
    Listed { states: Vec<Vec<u8>>, index: HashMap<Vec<u8>, u32> },
}

impl Basis {
    pub fn new(n: usize, sector: Sector) -> Result<Basis, ClockError> {
        check_n(n)?;
        Ok(match sector {
            Sector::Full => Basis::Full { n },
            Sector::BracketedAll => Basis::BracketedAll { n },
            Sector::WellFormed => Basis::listed(well_formed_states(n)?),
            Sector::LegalPath => Basis::listed(clock_sequence(n)?),
        })
    }

    fn listed(states: Vec<ChainState>) -> Basis {
        let states: Vec<Vec<u8>> = states.iter().map(|s| s.codes()).collect();
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect();
        Basis::Listed { states, index }
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Full { n } => SITE_STATES.pow(*n as u32),
            Basis::BracketedAll { n } => CELLS.pow(*n as u32 - 2),
            Basis::Listed { states, .. } => states.len(),
        }
    }

    pub fn chain_len(&self) -> usize {
        match self {
            Basis::Full { n } | Basis::BracketedAll { n } => *n,
            Basis::Listed { states, .. } => states[0].len(),
        }
    }

    pub fn state(&self, idx: usize) -> Vec<u8> {
        match self {
            Basis::Full { n } => {
                let mut x = idx;
                (0..*n)
                    .map(|_| {
                        let c = (x % SITE_STATES) as u8;
                        x /= SITE_STATES;
                        c
                    })
                    .collect()
            }
            Basis::BracketedAll { n } => {
                let mut x = idx;
                let mut out = vec![LEFT_END];
                for _ in 0..n - 2 {
                    out.push((x % CELLS) as u8);
                    x /= CELLS;
                }
                out.push(RIGHT_END);
                out
            }
            Basis::Listed { states, .. } => states[idx].clone(),
        }
    }

    pub fn index(&self, codes: &[u8]) -> Option<usize> {
        match self {
            Basis::Full { .. } => Some(codes.iter().rev().fold(0usize, |acc, &c| acc * SITE_STATES + c as usize)),
            Basis::BracketedAll { n } => {
                if codes.len() != *n || codes[0] != LEFT_END || codes[n - 1] != RIGHT_END {
                    return None;
                }
                let inner = &codes[1..n - 1];
                if inner.iter().any(|&c| c as usize >= CELLS) {
                    return None;
                }
                Some(inner.iter().rev().fold(0usize, |acc, &c| acc * CELLS + c as usize))
            }
            Basis::Listed { index, .. } => index.get(codes).map(|&i| i as usize),
        }
    }
}

/// Real symmetric sparse matrix in compressed-row form over a sector basis.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
    pub basis: Basis,
}

impl SparseOperator {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k] as usize, self.vals[k]))
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Rayleigh quotient `<x, H x> / <x, x>`.
    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.dim];
        self.apply(x, &mut y);
        dot(x, &y) / dot(x, x)
    }
}

/// Weight of clock terms when the boundary term is present.
pub const BOUNDARY_SCALE: f64 = 3.0;

/// Bytes allowed for operator and eigensolver storage.
pub fn mem_budget() -> usize {
    std::env::var(crate::grid::MEM_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(2usize << 30)
}

/// `sum illegal + sum type-II terms`, compressed to the sector; with
/// `boundary`, `3 H + sum_sites (1 - [end])`.
pub fn build_hamiltonian(n: usize, sector: Sector, boundary: bool) -> Result<SparseOperator, ClockError> {
    check_n(n)?;
    let dim = match sector {
        Sector::Full => SITE_STATES.checked_pow(n as u32),
        Sector::BracketedAll => CELLS.checked_pow(n as u32 - 2),
        _ => Some(12 * n * n),
    }
    .unwrap_or(usize::MAX);
    // row pointer + roughly (2 (n-1) + 1) entries of 12 bytes per row
    let estimate = dim.saturating_mul(8 + 12 * (2 * n + 1));
    if estimate > mem_budget() {
        return Err(ClockError::Budget(format!(
            "{sector:?} at N={n} needs about {estimate} bytes for {dim} states"
        )));
    }
    let basis = Basis::new(n, sector)?;
    let dim = basis.dim();
    let rules = RuleTable::new();
    let illegal = IllegalTable::new();
    let scale = if boundary { BOUNDARY_SCALE } else { 1.0 };
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for i in 0..dim {
        let codes = basis.state(i);
        let mut diag = scale * illegal.violations(&codes) as f64;
        if boundary {
            diag += codes.iter().filter(|&&c| c < LEFT_END).count() as f64;
        }
        entries.clear();
        for p in 0..codes.len() - 1 {
            for dir in [Direction::Forward, Direction::Backward] {
                let Some((c, d)) = rules.step_at(&codes, p, dir) else { continue };
                diag += scale * 0.5;
                let mut other = codes.clone();
                other[p] = c;
                other[p + 1] = d;
                if let Some(j) = basis.index(&other) {
                    entries.push((j as u32, -scale * 0.5));
                }
            }
        }
        entries.push((i as u32, diag));
        entries.sort_by_key(|e| e.0);
        for &(j, v) in entries.iter() {
            if let Some(last) = cols.last() {
                if *last == j && vals.len() > row_ptr[i] {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            cols.push(j);
            vals.push(v);
        }
        row_ptr.push(vals.len());
    }
    Ok(SparseOperator {
        dim,
        row_ptr,
        cols,
        vals,
        basis,
    })
}

/// The displayed path matrix: `1` on the diagonal, `1/2` at both ends,
/// `-1/2` off the diagonal.
pub fn path_matrix(len: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(len, len);
    for i in 0..len {
        m[(i, i)] = if i == 0 || i + 1 == len { 0.5 } else { 1.0 };
        if i + 1 < len {
            m[(i, i + 1)] = -0.5;
            m[(i + 1, i)] = -0.5;
        }
    }
    if len == 1 {
        m[(0, 0)] = 0.0;
    }
    m
}

// ---------------------------------------------------------------------------
// Eigensolvers

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// `|H x - value x|` for the unit vector `x`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Iterations between convergence checks.
    pub check_every: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_iter: 3000,
            tol: 1e-10,
            seed: 0x7117,
            check_every: 20,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Number of eigenvalues of the tridiagonal matrix below `x` (Sturm count).
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0f64;
    for i in 0..alpha.len() {
        let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - if i == 0 { 0.0 } else { b2 / d };
        if d == 0.0 {
            d = -f64::EPSILON * (alpha[i].abs() + 1.0);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) of the tridiagonal by bisection.
fn tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64], k: usize) -> f64 {
    let bound = alpha
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let l = if i > 0 { beta[i - 1].abs() } else { 0.0 };
            let r = if i < beta.len() { beta[i].abs() } else { 0.0 };
            (a - l - r, a + l + r)
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, (lo, hi)| (acc.0.min(lo), acc.1.max(hi)));
    let (mut lo, mut hi) = (bound.0 - 1e-12, bound.1 + 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unit eigenvector of the tridiagonal for `lambda` by inverse iteration,
/// orthogonalized against `previous`.
fn tridiagonal_vector(alpha: &[f64], beta: &[f64], lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
    let m = alpha.len();
    let scale = alpha.iter().chain(beta).fold(1.0f64, |a, &b| a.max(b.abs()));
    let shift = lambda + 1e-13 * scale;
    let mut y: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64 * 0.618).sin() * 0.5).collect();
    for _ in 0..4 {
        for p in previous {
            let c = dot(p, &y);
            axpy(-c, p, &mut y);
        }
        y = solve_tridiagonal(alpha, beta, shift, &y);
        let nrm = norm(&y);
        y.iter_mut().for_each(|v| *v /= nrm);
    }
    for p in previous {
        let c = dot(p, &y);
        axpy(-c, p, &mut y);
    }
    let nrm = norm(&y);
    y.iter_mut().for_each(|v| *v /= nrm);
    y
}

/// Solves `(T - shift) x = rhs` with partial pivoting.
fn solve_tridiagonal(alpha: &[f64], beta: &[f64], shift: f64, rhs: &[f64]) -> Vec<f64> {
    let m = alpha.len();
    if m == 1 {
        let d = alpha[0] - shift;
        let d = if d.abs() < 1e-300 { 1e-300 } else { d };
        return vec![rhs[0] / d];
    }
    // LU with partial pivoting on a tridiagonal: U has two superdiagonals
    let mut d: Vec<f64> = alpha.iter().map(|a| a - shift).collect();
    let mut up: Vec<f64> = beta.to_vec();
    up.push(0.0);
    let mut up2 = vec![0.0; m];
    let mut low: Vec<f64> = beta.to_vec();
    let mut b = rhs.to_vec();
    for i in 0..m - 1 {
        if low[i].abs() > d[i].abs() {
            std::mem::swap(&mut d[i], &mut low[i]);
            let (ui, di1) = (up[i], d[i + 1]);
            up[i] = di1;
            d[i + 1] = ui;
            let (u2, ui1) = (up2[i], up[i + 1]);
            up2[i] = ui1;
            up[i + 1] = u2;
            b.swap(i, i + 1);
        }
        let piv = if d[i].abs() < 1e-300 { 1e-300 } else { d[i] };
        d[i] = piv;
        let f = low[i] / piv;
        d[i + 1] -= f * up[i];
        up[i + 1] -= f * up2[i];
        b[i + 1] -= f * b[i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut s = b[i];
        if i + 1 < m {
            s -= up[i] * x[i + 1];
        }
        if i + 2 < m {
            s -= up2[i] * x[i + 2];
        }
        let piv = if d[i].abs() < 1e-300 { 1e-300 } else { d[i] };
        x[i] = s / piv;
    }
    x
}

/// `k` smallest eigenpairs by Lanczos with full reorthogonalization from a
/// seeded start vector.
pub fn lowest_eigenpairs(op: &SparseOperator, k: usize, opts: &LanczosOptions) -> Result<Vec<Eigenpair>, ClockError> {
    let dim = op.dim;
    if k == 0 {
        return Ok(Vec::new());
    }
    let k = k.min(dim);
    // the stored Krylov basis is capped by the memory budget
    let affordable = mem_budget() / dim.saturating_mul(8).max(1);
    if affordable < 2 * k + 2 {
        return Err(ClockError::Budget(format!("Lanczos vectors of length {dim} do not fit the budget")));
    }
    let max_iter = opts.max_iter.min(dim).min(affordable);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let mut last_residual = f64::INFINITY;
    for j in 0..max_iter {
        op.apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        // full reorthogonalization, applied twice
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        let exhausted = b < 1e-12 || j + 1 == max_iter;
        let check = exhausted || (j + 1 >= k && (j + 1) % opts.check_every == 0);
        if check {
            let pairs = ritz_pairs(op, &basis, &alpha, &beta, k);
            let worst = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
            last_residual = worst;
            if worst <= opts.tol || (exhausted && b < 1e-12) {
                return Ok(pairs);
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
    }
    Err(ClockError::NoConvergence {
        iterations: alpha.len(),
        residual: last_residual,
    })
}

fn ritz_pairs(op: &SparseOperator, basis: &[Vec<f64>], alpha: &[f64], beta: &[f64], k: usize) -> Vec<Eigenpair> {
    let m = alpha.len();
    let beta = &beta[..m - 1];
    let dim = op.dim;
    let mut ys: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for i in 0..k.min(m) {
        let lambda = tridiagonal_eigenvalue(alpha, beta, i);
        let y = tridiagonal_vector(alpha, beta, lambda, &ys);
        let mut x = vec![0.0; dim];
        for (q, &c) in basis.iter().zip(&y) {
            axpy(c, q, &mut x);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let value = op.rayleigh(&x);
        let mut hx = vec![0.0; dim];
        op.apply(&x, &mut hx);
        axpy(-value, &x, &mut hx);
        ys.push(y);
        out.push(Eigenpair {
            value,
            residual: norm(&hx),
            vector: x,
        });
    }
    out
}

/// Exact spectrum by connected components of the off-diagonal pattern, each
/// block diagonalized densely. Returns the `k` smallest eigenpairs.
pub fn block_eigenpairs(op: &SparseOperator, k: usize) -> Result<Vec<Eigenpair>, ClockError> {
    let dim = op.dim;
    let mut parent: Vec<u32> = (0..dim as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for i in 0..dim {
        for (j, v) in op.row(i) {
            if j != i && v != 0.0 {
                let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
            }
        }
    }
    let mut order: Vec<(u32, u32)> = (0..dim as u32).map(|i| (find(&mut parent, i), i)).collect();
    drop(parent);
    order.sort_unstable();
    let mut candidates: Vec<(f64, Vec<(u32, f64)>)> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let root = order[start].0;
        let end = start + order[start..].iter().take_while(|e| e.0 == root).count();
        let idx: Vec<u32> = order[start..end].iter().map(|e| e.1).collect();
        start = end;
        if idx.len() == 1 {
            let i = idx[0] as usize;
            candidates.push((op.get(i, i), vec![(idx[0], 1.0)]));
        } else {
            if idx.len() > 4000 {
                return Err(ClockError::Budget(format!("component of {} states is too large", idx.len())));
            }
            let local: HashMap<u32, usize> = idx.iter().enumerate().map(|(p, &g)| (g, p)).collect();
            let mut m = DMatrix::zeros(idx.len(), idx.len());
            for (p, &g) in idx.iter().enumerate() {
                for (j, v) in op.row(g as usize) {
                    m[(p, local[&(j as u32)])] += v;
                }
            }
            let eig = m.symmetric_eigen();
            for (c, &val) in eig.eigenvalues.iter().enumerate() {
                let vec = idx.iter().enumerate().map(|(p, &g)| (g, eig.eigenvectors[(p, c)])).collect();
                candidates.push((val, vec));
            }
        }
        if candidates.len() > 4 * k + 4096 {
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
            candidates.truncate(k);
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(k);
    Ok(candidates
        .into_iter()
        .map(|(value, sparse)| {
            let mut x = vec![0.0; dim];
            for (g, a) in sparse {
                x[g as usize] = a;
            }
            let mut hx = vec![0.0; dim];
            op.apply(&x, &mut hx);
            axpy(-value, &x, &mut hx);
            Eigenpair {
                value,
                residual: norm(&hx),
                vector: x,
            }
        })
        .collect())
}

/// Distance of a ground vector from the uniform superposition of the clock
/// schedule: the largest amplitude error over all basis states, after fixing
/// the global sign.
pub fn schedule_uniformity_error(op: &SparseOperator, vector: &[f64]) -> Result<f64, ClockError> {
    let n = op.basis.chain_len();
    let schedule = clock_sequence(n)?;
    let amp = 1.0 / (schedule.len() as f64).sqrt();
    let on: std::collections::HashSet<usize> = schedule.iter().filter_map(|s| op.basis.index(&s.codes())).collect();
    if on.len() != schedule.len() {
        return Err(ClockError::Precondition("sector does not contain the clock schedule".into()));
    }
    let sign = if on.iter().map(|&i| vector[i]).sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    Ok(vector
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let target = if on.contains(&i) { amp } else { 0.0 };
            (sign * x - target).abs()
        })
        .fold(0.0, f64::max))
}

/// Squared weight of a vector on non-bracketed basis states.
pub fn non_bracketed_weight(op: &SparseOperator, vector: &[f64]) -> f64 {
    vector
        .iter()
        .enumerate()
        .filter(|&(i, x)| *x != 0.0 && !ChainState::from_codes(&op.basis.state(i)).is_bracketed())
        .map(|(_, x)| x * x)
        .sum()
}

/// Largest single non-bracketed amplitude.
pub fn max_non_bracketed_amplitude(op: &SparseOperator, vector: &[f64]) -> f64 {
    vector
        .iter()
        .enumerate()
        .filter(|&(i, x)| *x != 0.0 && !ChainState::from_codes(&op.basis.state(i)).is_bracketed())
        .map(|(_, x)| x.abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Full-construction simulator

/// Head track content at one site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum HeadMark {
    /// Left of the head.
    Left,
    /// Right of the head.
    Right,
    State(usize),
    /// Right move executed, head shift pending.
    Primed(usize),
}

/// Sites of tracks 3 to 6, indexed by interior position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WorkTracks {
    /// Shared tape symbol, by index into [`Construction::alphabet`].
    pub tape: Vec<usize>,
    pub counter: Vec<HeadMark>,
    pub verifier: Vec<HeadMark>,
    pub witness: Vec<bool>,
}

/// Reversible machine pair sharing one tape.
#[derive(Clone, Debug)]
pub struct Construction {
    pub counter: TuringMachine,
    pub verifier: TuringMachine,
    /// Union alphabet; the counter's symbols come first.
    pub alphabet: Vec<String>,
    pub blank: usize,
}

/// Direction from which each state is entered; `None` if never entered.
fn entry_sides(tm: &TuringMachine) -> Result<Vec<Option<Move>>, ClockError> {
    let mut side = vec![None; tm.states.len()];
    for r in &tm.rules {
        match side[r.next] {
            None => side[r.next] = Some(r.mv),
            Some(m) if m != r.mv => {
                return Err(ClockError::Precondition(format!(
                    "state {} is entered moving both ways",
                    tm.states[r.next]
                )))
            }
            _ => {}
        }
    }
    Ok(side)
}

impl Construction {
    pub fn new(counter: &TuringMachine, verifier: &TuringMachine) -> Result<Self, ClockError> {
        for (name, tm) in [("counter", counter), ("verifier", verifier)] {
            if !tm.deterministic || !tm.is_locally_reversible() {
                return Err(ClockError::Precondition(format!("{name} must be deterministic and reversible")));
            }
            entry_sides(tm)?;
        }
        let mut alphabet = counter.alphabet.clone();
        for s in &verifier.alphabet {
            if !alphabet.contains(s) {
                alphabet.push(s.clone());
            }
        }
        if verifier.alphabet[verifier.blank] != counter.alphabet[counter.blank] {
            return Err(ClockError::Precondition("machines must share the blank symbol".into()));
        }
        Ok(Construction {
            counter: counter.clone(),
            verifier: verifier.clone(),
            blank: counter.blank,
            alphabet,
        })
    }

    pub fn initial_tracks(&self, n: usize, witness: &[bool]) -> Result<WorkTracks, ClockError> {
        check_n(n)?;
        let inner = n - 2;
        let mut w = witness.to_vec();
        w.resize(inner, false);
        let head = |tm: &TuringMachine| {
            let mut v = vec![HeadMark::Right; inner];
            v[0] = HeadMark::State(tm.start);
            v
        };
        Ok(WorkTracks {
            tape: vec![self.blank; inner],
            counter: head(&self.counter),
            verifier: head(&self.verifier),
            witness: w,
        })
    }
}

/// First prohibited pattern met by the simulator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub step: usize,
    /// Chain site (ends included) where the pattern sits.
    pub site: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimFrame {
    pub clock: String,
    pub tape: Vec<String>,
    pub counter: Vec<String>,
    pub verifier: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub n: usize,
    pub clock_steps: usize,
    pub counter_steps: usize,
    pub verifier_steps: usize,
    /// Verifier steps skipped because no rule applied (machine halted).
    pub verifier_idle: usize,
    pub tape_after_counting: Vec<String>,
    pub final_tape: Vec<String>,
    pub accepted: bool,
    pub violation: Option<Violation>,
    /// States where more than one backward rule applied.
    pub backward_ambiguities: usize,
    pub frames: Vec<SimFrame>,
}

fn mark_token(tm: &TuringMachine, m: HeadMark) -> String {
    match m {
        HeadMark::Left => "_l".into(),
        HeadMark::Right => "_r".into(),
        HeadMark::State(q) => tm.states[q].clone(),
        HeadMark::Primed(q) => format!("{}'", tm.states[q]),
    }
}

struct Simulator<'a> {
    c: &'a Construction,
    clock: Vec<u8>,
    work: WorkTracks,
    step: usize,
}

impl Simulator<'_> {
    fn arrow(&self) -> Option<(usize, Track1)> {
        ChainState::from_codes(&self.clock).arrow()
    }

    fn frame(&self) -> SimFrame {
        SimFrame {
            clock: ChainState::from_codes(&self.clock).render_line(),
            tape: self.work.tape.iter().map(|&s| self.c.alphabet[s].clone()).collect(),
            counter: self.work.counter.iter().map(|&m| mark_token(&self.c.counter, m)).collect(),
            verifier: self.work.verifier.iter().map(|&m| mark_token(&self.c.verifier, m)).collect(),
        }
    }

    /// First violated prohibition of the current configuration.
    fn check(&self, illegal: &IllegalTable) -> Option<Violation> {
        let at = |site: usize, reason: &str| Violation {
            step: self.step,
            site,
            reason: reason.to_string(),
        };
        for (i, &code) in self.clock.iter().enumerate() {
            if illegal.site(code) {
                return Some(at(i, "illegal clock site"));
            }
            if i + 1 < self.clock.len() && illegal.pair(code, self.clock[i + 1]) {
                return Some(at(i, "illegal clock pair"));
            }
        }
        let Some((arrow_site, arrow)) = self.arrow() else {
            return Some(at(0, "no arrow"));
        };
        let ai = arrow_site - 1;
        for (track, tm, marks) in [
            ("counter", &self.c.counter, &self.work.counter),
            ("verifier", &self.c.verifier, &self.work.verifier),
        ] {
            // |- _l* head _r* -|
            let heads: Vec<usize> = (0..marks.len())
                .filter(|&i| matches!(marks[i], HeadMark::State(_) | HeadMark::Primed(_)))
                .collect();
            if heads.len() != 1 {
                return Some(at(ai + 1, &format!("{track} track needs exactly one head")));
            }
            let h = heads[0];
            if marks[..h].iter().any(|&m| m != HeadMark::Left) || marks[h + 1..].iter().any(|&m| m != HeadMark::Right) {
                return Some(at(h + 1, &format!("{track} track shape")));
            }
            let sides = entry_sides(tm).expect("checked on construction");
            let active = match track {
                "counter" => Track1::R1,
                _ => Track1::R2,
            };
            if arrow == Track1::R0 {
                let want = if ai == 0 { HeadMark::State(tm.start) } else { HeadMark::Right };
                if marks[ai] != want {
                    return Some(at(arrow_site, &format!("{track} track not initialized")));
                }
            }
            if arrow == active {
                if let HeadMark::Primed(_) = marks[h] {
                    if h != ai {
                        return Some(at(h + 1, &format!("{track} primed state away from the arrow")));
                    }
                }
                if let HeadMark::State(q) = marks[ai] {
                    // a halted head idles; only a runnable one must have acted
                    let runnable = machine_rule(tm, q, &self.c.alphabet[self.work.tape[ai]]).is_some();
                    if sides[q] == Some(Move::L) && runnable {
                        return Some(at(arrow_site, &format!("{track} left-entered state under the arrow")));
                    }
                }
            } else if let HeadMark::Primed(_) = marks[h] {
                return Some(at(h + 1, &format!("{track} primed state without its arrow")));
            }
        }
        if arrow == Track1::R0 && self.work.tape[ai] != self.c.blank {
            return Some(at(arrow_site, "tape not blank"));
        }
        None
    }
}

/// Runs the clock forward from the initialization state with both machines
/// coupled to their sweeps: each `R1` sweep advances the counter one step,
/// each `R2` sweep the verifier. The step of a head on the first site runs
/// when the arrow turns at the left end.
pub fn simulate_construction(
    c: &Construction,
    n: usize,
    witness: &[bool],
    keep_frames: bool,
) -> Result<SimReport, ClockError> {
    let tracks = c.initial_tracks(n, witness)?;
    simulate_from(c, initial_state(n)?, tracks, keep_frames)
}

/// As [`simulate_construction`] from explicit initial contents.
pub fn simulate_from(
    c: &Construction,
    clock: ChainState,
    work: WorkTracks,
    keep_frames: bool,
) -> Result<SimReport, ClockError> {
    let n = clock.len();
    check_n(n)?;
    if work.tape.len() != n - 2 || work.counter.len() != n - 2 || work.verifier.len() != n - 2 {
        return Err(ClockError::Precondition("work tracks must cover the interior".into()));
    }
    let rules = RuleTable::new();
    let illegal = IllegalTable::new();
    let mut sim = Simulator {
        c,
        clock: clock.codes(),
        work,
        step: 0,
    };
    let mut report = SimReport {
        n,
        clock_steps: 0,
        counter_steps: 0,
        verifier_steps: 0,
        verifier_idle: 0,
        tape_after_counting: Vec::new(),
        final_tape: Vec::new(),
        accepted: false,
        violation: None,
        backward_ambiguities: 0,
        frames: Vec::new(),
    };
    loop {
        if keep_frames {
            report.frames.push(sim.frame());
        }
        if report.violation.is_none() {
            report.violation = sim.check(&illegal);
        }
        if rules.applicable(&sim.clock, Direction::Backward).len() > 1 {
            report.backward_ambiguities += 1;
        }
        let at = rules.applicable(&sim.clock, Direction::Forward);
        let p = match at.as_slice() {
            [] => break,
            [p] => *p,
            _ => {
                return Err(ClockError::Ambiguity {
                    step: sim.step,
                    detail: format!("clock rules apply at pairs {at:?}"),
                })
            }
        };
        let (a, b) = (SiteState::from_code(sim.clock[p]), SiteState::from_code(sim.clock[p + 1]));
        let (na, nb) = rules.forward(sim.clock[p], sim.clock[p + 1]).unwrap();
        let (na_s, nb_s) = (SiteState::from_code(na), SiteState::from_code(nb));
        // counting phase ends when the first R2/L2 appears
        let entering_computation = matches!((a, na_s), (SiteState::Cell(Track1::R1, _), SiteState::Cell(Track1::L2, _)));
        let coupled = match (a, b, na_s, nb_s) {
            // left-end turn into a right sweep: executes a head on site 1
            (SiteState::LeftEnd, _, _, SiteState::Cell(t, _)) if t == Track1::R1 || t == Track1::R2 => {
                couple_turn(&mut sim, t, &mut report)
            }
            // right sweep across sites p and p + 1 (interior indices p-1, p)
            (SiteState::Cell(t, _), SiteState::Cell(Track1::BlankR, _), _, _) if t == Track1::R1 || t == Track1::R2 => {
                couple_move(&mut sim, t, p - 1, &mut report)
            }
            (SiteState::Cell(t, _), SiteState::RightEnd, _, _) if t == Track1::R1 || t == Track1::R2 => {
                let marks = if t == Track1::R1 { &sim.work.counter } else { &sim.work.verifier };
                match marks[p - 1] {
                    HeadMark::Primed(_) => Err(ClockError::TapeOverflow {
                        step: sim.step,
                        detail: "head moved right past the last site".into(),
                    }),
                    _ => Ok(()),
                }
            }
            _ => Ok(()),
        };
        if let Err(e) = coupled {
            // machine failures after a violation are consequences of it
            if report.violation.is_some() {
                break;
            }
            return Err(e);
        }
        sim.clock[p] = na;
        sim.clock[p + 1] = nb;
        sim.step += 1;
        if entering_computation {
            report.tape_after_counting = sim.work.tape.iter().map(|&s| c.alphabet[s].clone()).collect();
        }
    }
    report.clock_steps = sim.step;
    report.final_tape = sim.work.tape.iter().map(|&s| c.alphabet[s].clone()).collect();
    let final_clock = ChainState::from_codes(&sim.clock);
    report.accepted = final_clock == final_state(n)?
        && matches!(sim.work.verifier[0], HeadMark::State(q) if Some(q) == c.verifier.accept);
    Ok(report)
}

/// Rule of a deterministic machine for a head state and a tape symbol name.
fn machine_rule(tm: &TuringMachine, state: usize, symbol: &str) -> Option<crate::tm::Rule> {
    let read = tm.symbol(symbol)?;
    let mut it = tm.moves(state, read);
    let r = it.next().copied();
    debug_assert!(it.next().is_none());
    r
}

fn tracks_mut<'a>(sim: &'a mut Simulator<'_>, t: Track1) -> (&'a TuringMachine, &'a mut Vec<HeadMark>, &'a mut Vec<usize>) {
    if t == Track1::R1 {
        (&sim.c.counter, &mut sim.work.counter, &mut sim.work.tape)
    } else {
        (&sim.c.verifier, &mut sim.work.verifier, &mut sim.work.tape)
    }
}

fn count_step(report: &mut SimReport, t: Track1, ran: bool) {
    match (t, ran) {
        (Track1::R1, true) => report.counter_steps += 1,
        (_, true) => report.verifier_steps += 1,
        (Track1::R2, false) => report.verifier_idle += 1,
        _ => {}
    }
}

fn couple_turn(sim: &mut Simulator<'_>, t: Track1, report: &mut SimReport) -> Result<(), ClockError> {
    let step = sim.step;
    let alphabet = sim.c.alphabet.clone();
    let (tm, marks, tape) = tracks_mut(sim, t);
    let HeadMark::State(q) = marks[0] else {
        return Ok(());
    };
    let Some(r) = machine_rule(tm, q, &alphabet[tape[0]]) else {
        count_step(report, t, false);
        return Ok(());
    };
    if r.mv == Move::L {
        return Err(ClockError::Tm(TmError::LeftOfTape { step }));
    }
    tape[0] = alphabet.iter().position(|s| *s == tm.alphabet[r.write]).unwrap();
    marks[0] = HeadMark::Primed(r.next);
    count_step(report, t, true);
    Ok(())
}

/// Arrow leaves interior site `i` for `i + 1`.
fn couple_move(sim: &mut Simulator<'_>, t: Track1, i: usize, report: &mut SimReport) -> Result<(), ClockError> {
    let alphabet = sim.c.alphabet.clone();
    let (tm, marks, tape) = tracks_mut(sim, t);
    match (marks[i], marks[i + 1]) {
        (HeadMark::Primed(q), HeadMark::Right) => {
            marks[i] = HeadMark::Left;
            marks[i + 1] = HeadMark::State(q);
        }
        (HeadMark::Left, HeadMark::State(q)) => {
            let Some(r) = machine_rule(tm, q, &alphabet[tape[i + 1]]) else {
                count_step(report, t, false);
                return Ok(());
            };
            tape[i + 1] = alphabet.iter().position(|s| *s == tm.alphabet[r.write]).unwrap();
            match r.mv {
                Move::L => {
                    marks[i] = HeadMark::State(r.next);
                    marks[i + 1] = HeadMark::Right;
                }
                Move::R => marks[i + 1] = HeadMark::Primed(r.next),
            }
            count_step(report, t, true);
        }
        _ => {}
    }
    Ok(())
}

/// Reversible counter for the simulator: zig-zags right one cell per three
/// steps, so its head stays within `n` cells for `n` steps.
pub fn zigzag_counter() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "A", "A'", "B", "B'"],
        &["q0", "p", "m", "p2"],
        None,
        &[
            ("q0", "#", "A", "p", R),
            ("p", "#", "B", "m", L),
            ("m", "A", "A'", "p2", R),
            ("m", "B'", "B'", "p2", R),
            ("p2", "B", "B'", "p", R),
        ],
        true,
    )
    .expect("zigzag counter is well formed")
}

/// Deterministic verifier: checks that cell 2 holds `B'` and returns to
/// cell 1, accepting or rejecting there.
pub fn home_verifier() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "A", "A'", "B", "B'"],
        &["q0", "g", "qA", "qR"],
        Some("qA"),
        &[
            ("q0", "A'", "A'", "g", R),
            ("g", "B'", "B'", "qA", L),
            ("g", "B", "B", "qR", L),
        ],
        true,
    )
    .expect("verifier is well formed")
}

/// Counter tape after `steps` steps, padded to `width` cells.
pub fn counter_tape(tm: &TuringMachine, steps: usize, width: usize) -> Result<Vec<String>, ClockError> {
    let cfg = run_blank(tm, steps)?;
    Ok(cfg
        .padded(tm.blank, width)
        .iter()
        .map(|&s| tm.alphabet[s].clone())
        .collect())
}

/// Panel-style rendering of a simulator frame.
pub fn render_sim_frame(f: &SimFrame) -> String {
    let clock: Vec<&str> = f.clock.split_whitespace().collect();
    let inner = &clock[1..clock.len() - 1];
    let width = inner
        .iter()
        .map(|s| s.len())
        .chain(f.tape.iter().chain(&f.counter).chain(&f.verifier).map(|s| s.len()))
        .max()
        .unwrap_or(1)
        + 1;
    let row = |cells: Vec<String>| {
        let body: String = cells.iter().map(|c| format!("{c:<width$}")).collect();
        format!("|- {} -|", body.trim_end())
    };
    let (t1, t2): (Vec<String>, Vec<String>) = inner
        .iter()
        .map(|s| {
            let (a, b) = s.split_once(':').unwrap_or((s, ""));
            (a.to_string(), b.to_string())
        })
        .unzip();
    [row(t1), row(t2), row(f.tape.clone()), row(f.counter.clone()), row(f.verifier.clone())].join("\n")
}

/// Breadth-first distance from `s` to any state with an illegal pattern,
/// following rules in both directions.
pub fn distance_to_illegal(s: &ChainState, limit: usize) -> Option<usize> {
    let rules = RuleTable::new();
    let illegal = IllegalTable::new();
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::from([(s.codes(), 0usize)]);
    while let Some((cur, d)) = queue.pop_front() {
        if illegal.violations(&cur) > 0 {
            return Some(d);
        }
        if d == limit || !seen.insert(cur.clone()) {
            continue;
        }
        for dir in [Direction::Forward, Direction::Backward] {
            for p in rules.applicable(&cur, dir) {
                let (a, b) = rules.step_at(&cur, p, dir).unwrap();
                let mut next = cur.clone();
                next[p] = a;
                next[p + 1] = b;
                queue.push_back((next, d + 1));
            }
        }
    }
    None
}
