//! Turing machines: specification, simulation, compilation to a two-layer
//! tile set with four-corner boundary conditions, the binary counter with
//! its inverse, and the prime-size reduction.

use std::collections::{BTreeSet, HashMap, HashSet};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tiling::{
    build_layered_rule_set, Axis, BoundaryCondition, ConditionalTerm, CrossLayerRule, LayerSpec,
    LayeredRuleSet, RuleSet, Tiling, TilingInstance, DEFAULT_SENTINEL,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TmError {
    #[error("invalid machine: {0}")]
    Spec(String),
    #[error("head moved left of cell 1 at step {step}")]
    LeftOfTape { step: usize },
    #[error("step cap exceeded: {0}")]
    Cap(String),
    #[error("alphabet collision: {0}")]
    Collision(String),
    #[error("string is not an output of the counter: {0}")]
    NotInImage(String),
    #[error("no prime found in [{lo}, {hi})")]
    NoPrime { lo: BigUint, hi: BigUint },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Move {
    L,
    R,
}

/// `(state, read) -> (write, next, move)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub state: usize,
    pub read: usize,
    pub write: usize,
    pub next: usize,
    pub mv: Move,
}

/// File form of a machine; symbols and states by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TmSpec {
    pub alphabet: Vec<String>,
    pub blank: String,
    pub states: Vec<String>,
    pub start: String,
    pub accept: Option<String>,
    pub delta: Vec<TransitionSpec>,
    #[serde(default)]
    pub deterministic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub q: String,
    pub a: String,
    pub b: String,
    pub q2: String,
    #[serde(rename = "move")]
    pub mv: Move,
}

/// Validated machine over one-way infinite tape; cell 1 is index 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TuringMachine {
    pub alphabet: Vec<String>,
    pub states: Vec<String>,
    pub blank: usize,
    pub start: usize,
    pub accept: Option<usize>,
    pub rules: Vec<Rule>,
    pub deterministic: bool,
}

impl TuringMachine {
    pub fn from_spec(spec: &TmSpec) -> Result<Self, TmError> {
        let sym = |s: &str| {
            spec.alphabet
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| TmError::Spec(format!("unknown symbol {s:?}")))
        };
        let st = |s: &str| {
            spec.states
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| TmError::Spec(format!("unknown state {s:?}")))
        };
        let dup = |xs: &[String], what: &str| {
            let set: HashSet<&String> = xs.iter().collect();
            if set.len() != xs.len() {
                Err(TmError::Spec(format!("duplicate {what}")))
            } else {
                Ok(())
            }
        };
        dup(&spec.alphabet, "symbol")?;
        dup(&spec.states, "state")?;
        let rules = spec
            .delta
            .iter()
            .map(|t| {
                Ok(Rule {
                    state: st(&t.q)?,
                    read: sym(&t.a)?,
                    write: sym(&t.b)?,
                    next: st(&t.q2)?,
                    mv: t.mv,
                })
            })
            .collect::<Result<Vec<_>, TmError>>()?;
        let tm = TuringMachine {
            alphabet: spec.alphabet.clone(),
            states: spec.states.clone(),
            blank: sym(&spec.blank)?,
            start: st(&spec.start)?,
            accept: spec.accept.as_deref().map(st).transpose()?,
            rules,
            deterministic: spec.deterministic,
        };
        tm.check()?;
        Ok(tm)
    }

    pub fn to_spec(&self) -> TmSpec {
        TmSpec {
            alphabet: self.alphabet.clone(),
            blank: self.alphabet[self.blank].clone(),
            states: self.states.clone(),
            start: self.states[self.start].clone(),
            accept: self.accept.map(|a| self.states[a].clone()),
            delta: self
                .rules
                .iter()
                .map(|r| TransitionSpec {
                    q: self.states[r.state].clone(),
                    a: self.alphabet[r.read].clone(),
                    b: self.alphabet[r.write].clone(),
                    q2: self.states[r.next].clone(),
                    mv: r.mv,
                })
                .collect(),
            deterministic: self.deterministic,
        }
    }

    /// Builds from `(state, read, write, next, move)` name tuples.
    pub fn build(
        alphabet: &[&str],
        states: &[&str],
        accept: Option<&str>,
        delta: &[(&str, &str, &str, &str, Move)],
        deterministic: bool,
    ) -> Result<Self, TmError> {
        let spec = TmSpec {
            alphabet: alphabet.iter().map(|s| s.to_string()).collect(),
            blank: alphabet[0].to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            start: states[0].to_string(),
            accept: accept.map(str::to_string),
            delta: delta
                .iter()
                .map(|&(q, a, b, q2, mv)| TransitionSpec {
                    q: q.into(),
                    a: a.into(),
                    b: b.into(),
                    q2: q2.into(),
                    mv,
                })
                .collect(),
            deterministic,
        };
        Self::from_spec(&spec)
    }

    fn check(&self) -> Result<(), TmError> {
        let mut seen = HashSet::new();
        for r in &self.rules {
            if Some(r.state) == self.accept {
                return Err(TmError::Spec("transition out of the accept state".into()));
            }
            if r.next == self.start {
                return Err(TmError::Spec("transition re-enters the start state".into()));
            }
            if !seen.insert((r.state, r.read)) && self.deterministic {
                return Err(TmError::Spec(format!(
                    "two transitions for ({}, {}) in a deterministic machine",
                    self.states[r.state], self.alphabet[r.read]
                )));
            }
        }
        if self.accept == Some(self.start) {
            return Err(TmError::Spec("start state equals accept state".into()));
        }
        Ok(())
    }

    pub fn symbol(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|x| x == name)
    }

    pub fn state(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|x| x == name)
    }

    pub fn moves(&self, state: usize, read: usize) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(move |r| r.state == state && r.read == read)
    }

    pub fn has_rule(&self, state: usize, read: usize, write: usize, next: usize, mv: Move) -> bool {
        self.rules.contains(&Rule {
            state,
            read,
            write,
            next,
            mv,
        })
    }

    /// Parses whitespace- or comma-separated symbol names.
    pub fn parse_tape(&self, text: &str) -> Result<Vec<usize>, TmError> {
        text.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| self.symbol(s).ok_or_else(|| TmError::Spec(format!("unknown symbol {s:?}"))))
            .collect()
    }

    pub fn format_tape(&self, tape: &[usize]) -> String {
        tape.iter().map(|&s| self.alphabet[s].as_str()).collect::<Vec<_>>().join(" ")
    }

    /// Distinct transitions into the same state never write the same symbol
    /// from the same direction (local reversibility for quintuple machines).
    pub fn is_locally_reversible(&self) -> bool {
        if !self.deterministic {
            return false;
        }
        for (i, a) in self.rules.iter().enumerate() {
            for b in &self.rules[i + 1..] {
                if a.next == b.next && (a.mv != b.mv || a.write == b.write) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Config {
    /// Tape from cell 1 with trailing blanks removed.
    pub tape: Vec<usize>,
    /// Zero-based head cell.
    pub head: usize,
    pub state: usize,
}

impl Config {
    pub fn initial(tm: &TuringMachine, input: &[usize]) -> Self {
        let mut c = Config {
            tape: input.to_vec(),
            head: 0,
            state: tm.start,
        };
        c.trim(tm.blank);
        c
    }

    fn trim(&mut self, blank: usize) {
        while self.tape.last() == Some(&blank) {
            self.tape.pop();
        }
    }

    pub fn read(&self, blank: usize) -> usize {
        self.tape.get(self.head).copied().unwrap_or(blank)
    }

    /// Tape padded with blanks to `width` cells.
    pub fn padded(&self, blank: usize, width: usize) -> Vec<usize> {
        let mut t = self.tape.clone();
        t.resize(width.max(t.len()), blank);
        t
    }

    fn apply(&self, tm: &TuringMachine, r: &Rule, step: usize) -> Result<Config, TmError> {
        let mut tape = self.tape.clone();
        if self.head >= tape.len() {
            tape.resize(self.head + 1, tm.blank);
        }
        tape[self.head] = r.write;
        let head = match r.mv {
            Move::R => self.head + 1,
            Move::L => self.head.checked_sub(1).ok_or(TmError::LeftOfTape { step })?,
        };
        let mut c = Config {
            tape,
            head,
            state: r.next,
        };
        c.trim(tm.blank);
        Ok(c)
    }

    pub fn successors(&self, tm: &TuringMachine, step: usize) -> Result<Vec<Config>, TmError> {
        tm.moves(self.state, self.read(tm.blank))
            .map(|r| self.apply(tm, r, step))
            .collect()
    }
}

/// Default cap on simulated steps.
pub const STEP_CAP: usize = 50_000_000;
/// Cap on the breadth-first frontier of a nondeterministic run.
pub const FRONTIER_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunReport {
    /// Configurations reached after exactly `steps` steps (one if deterministic).
    pub frontier: Vec<Config>,
    /// Some branch is in the accept state after exactly `steps` steps.
    pub accepted: bool,
    /// As `accepted`, with the head on cell 1.
    pub accepted_at_home: bool,
    /// Step at which a deterministic run stopped for lack of a transition.
    pub halted_at: Option<usize>,
}

/// Breadth-first simulation over all branches for exactly `steps` steps.
pub fn run_tm(tm: &TuringMachine, input: &[usize], steps: usize) -> Result<RunReport, TmError> {
    if steps > STEP_CAP {
        return Err(TmError::Cap(format!("{steps} steps exceed {STEP_CAP}")));
    }
    let mut frontier: Vec<Config> = vec![Config::initial(tm, input)];
    let mut halted_at = None;
    for step in 1..=steps {
        let mut next = BTreeSet::new();
        for c in &frontier {
            for s in c.successors(tm, step)? {
                next.insert(s);
            }
        }
        if next.len() > FRONTIER_CAP {
            return Err(TmError::Cap(format!("frontier exceeds {FRONTIER_CAP} at step {step}")));
        }
        if next.is_empty() {
            halted_at = Some(step - 1);
            if tm.deterministic {
                break;
            }
        }
        frontier = next.into_iter().collect();
        if frontier.is_empty() {
            break;
        }
    }
    let done = halted_at.is_none();
    let accepted = done && frontier.iter().any(|c| Some(c.state) == tm.accept);
    let accepted_at_home = done && frontier.iter().any(|c| Some(c.state) == tm.accept && c.head == 0);
    Ok(RunReport {
        frontier: if done || tm.deterministic { frontier } else { Vec::new() },
        accepted,
        accepted_at_home,
        halted_at,
    })
}

/// Every configuration of a deterministic run, index = step.
pub fn trace(tm: &TuringMachine, input: &[usize], steps: usize) -> Result<Vec<Config>, TmError> {
    if !tm.deterministic {
        return Err(TmError::Spec("trace needs a deterministic machine".into()));
    }
    if steps > STEP_CAP {
        return Err(TmError::Cap(format!("{steps} steps exceed {STEP_CAP}")));
    }
    let mut out = vec![Config::initial(tm, input)];
    for step in 1..=steps {
        let mut succ = out.last().unwrap().successors(tm, step)?;
        match succ.pop() {
            Some(c) => out.push(c),
            None => break,
        }
    }
    Ok(out)
}

/// Tape after `steps` steps from a blank tape.
pub fn run_blank(tm: &TuringMachine, steps: usize) -> Result<Config, TmError> {
    let t = trace(tm, &[], steps)?;
    if t.len() != steps + 1 {
        return Err(TmError::Spec(format!("machine halted after {} steps", t.len() - 1)));
    }
    Ok(t.into_iter().last().unwrap())
}

/// Whether a deterministic run from a blank tape never repeats a tape content.
pub fn tape_injective(tm: &TuringMachine, steps: usize) -> Result<bool, TmError> {
    let mut seen = HashSet::new();
    for c in trace(tm, &[], steps)? {
        if !seen.insert(c.tape) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Compilation

/// Interior tile of one machine layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Interior {
    /// Tape cell without the head.
    Plain(usize),
    /// Head has arrived, not yet acted; `from_left` is the arrival side.
    Arrived { sym: usize, state: usize, from_left: bool },
    /// Head has acted, leaving in direction `mv` in state `state`.
    Acted { sym: usize, state: usize, mv: Move },
}

impl Interior {
    pub fn symbol(self) -> usize {
        match self {
            Interior::Plain(a) | Interior::Arrived { sym: a, .. } | Interior::Acted { sym: a, .. } => a,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerTile {
    C,
    W,
    E,
    N,
    S,
    Interior(Interior),
}

pub const BOUNDARY_TILES: [LayerTile; 5] = [LayerTile::C, LayerTile::W, LayerTile::E, LayerTile::N, LayerTile::S];

fn boundary_name(t: LayerTile) -> &'static str {
    match t {
        LayerTile::C => "C",
        LayerTile::W => "W",
        LayerTile::E => "E",
        LayerTile::N => "N",
        LayerTile::S => "S",
        LayerTile::Interior(_) => unreachable!(),
    }
}

/// Tile list of one layer: five boundary tiles, then |Σ|(1 + 4|Q|) interior tiles.
pub fn layer_tiles(tm: &TuringMachine) -> Vec<LayerTile> {
    let mut out = BOUNDARY_TILES.to_vec();
    for a in 0..tm.alphabet.len() {
        out.push(LayerTile::Interior(Interior::Plain(a)));
    }
    for a in 0..tm.alphabet.len() {
        for q in 0..tm.states.len() {
            out.push(LayerTile::Interior(Interior::Arrived { sym: a, state: q, from_left: false }));
            out.push(LayerTile::Interior(Interior::Arrived { sym: a, state: q, from_left: true }));
            out.push(LayerTile::Interior(Interior::Acted { sym: a, state: q, mv: Move::R }));
            out.push(LayerTile::Interior(Interior::Acted { sym: a, state: q, mv: Move::L }));
        }
    }
    out
}

fn tile_name(tm: &TuringMachine, t: LayerTile) -> String {
    match t {
        LayerTile::Interior(i) => match i {
            Interior::Plain(a) => format!("[{}]", tm.alphabet[a]),
            Interior::Arrived { sym, state, from_left } => format!(
                "[{},{},{}]",
                tm.alphabet[sym],
                tm.states[state],
                if from_left { "l" } else { "r" }
            ),
            Interior::Acted { sym, state, mv } => format!(
                "[{},{},{}]",
                tm.alphabet[sym],
                tm.states[state],
                if mv == Move::R { "R" } else { "L" }
            ),
        },
        b => boundary_name(b).to_string(),
    }
}

/// Boundary-boundary horizontal rule (left, right).
fn boundary_h(l: LayerTile, r: LayerTile) -> bool {
    use LayerTile::*;
    matches!(
        (l, r),
        (C, N) | (C, S) | (W, E) | (N, C) | (N, N) | (S, C) | (S, S)
    )
}

/// Boundary-boundary vertical rule (below, above).
fn boundary_v(b: LayerTile, t: LayerTile) -> bool {
    use LayerTile::*;
    matches!(
        (b, t),
        (C, W) | (C, E) | (W, C) | (W, W) | (E, C) | (E, E) | (S, N)
    )
}

/// Interior horizontal rule between machine tiles (left, right).
fn machine_h(l: Interior, r: Interior) -> bool {
    use Interior::*;
    match (l, r) {
        (Plain(_), Plain(_)) => true,
        (Plain(_), Arrived { from_left, .. }) => !from_left,
        (Plain(_), Acted { mv, .. }) => mv == Move::R,
        (Arrived { state: q, from_left: false, .. }, Acted { state: q2, mv: Move::L, .. }) => q == q2,
        (Arrived { from_left: true, .. }, Plain(_)) => true,
        (Acted { state: q, mv: Move::R, .. }, Arrived { state: q2, from_left: true, .. }) => q == q2,
        (Acted { mv: Move::L, .. }, Plain(_)) => true,
        _ => false,
    }
}

/// Whether an interior tile may sit left of the E column.
fn left_of_e(t: Interior) -> bool {
    match t {
        Interior::Plain(_) => true,
        Interior::Arrived { from_left, .. } => from_left,
        Interior::Acted { mv, .. } => mv == Move::L,
    }
}

/// Time-ordered vertical rule: `earlier` precedes `later` by one step.
fn machine_step(tm: &TuringMachine, earlier: Interior, later: Interior) -> bool {
    use Interior::*;
    let passive = |a: usize| match later {
        Plain(b) | Arrived { sym: b, from_left: false, .. } => a == b,
        Arrived { sym: b, state, from_left: true } => a == b && state != tm.start,
        Acted { .. } => false,
    };
    match earlier {
        Plain(a) | Acted { sym: a, .. } => passive(a),
        Arrived { sym: a, state: q, .. } => match later {
            Acted { sym: b, state: q2, mv } => tm.has_rule(q, a, b, q2, mv),
            _ => false,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LayerRole {
    /// Runs downward from the top row.
    Counter,
    /// Runs upward from the copied bottom row; `counter_alphabet` marks symbols
    /// barred next to W.
    Verifier,
}

type It = Interior;

fn layer_rules(tm: &TuringMachine, role: LayerRole, counter_alphabet: &HashSet<String>) -> RuleSet {
    let tiles = layer_tiles(tm);
    let names = tiles.iter().map(|&t| tile_name(tm, t)).collect();
    let is_blank = |a: usize| a == tm.blank;
    let h = |i: usize, j: usize| -> bool {
        use LayerTile::*;
        match (tiles[i], tiles[j]) {
            (Interior(l), Interior(r)) => machine_h(l, r),
            (Interior(l), E) => left_of_e(l),
            (Interior(_), _) => false,
            (W, Interior(r)) => match r {
                It::Plain(a) => match role {
                    LayerRole::Counter => !is_blank(a),
                    LayerRole::Verifier => !counter_alphabet.contains(&tm.alphabet[a]),
                },
                It::Arrived { state, from_left, .. } => !from_left || state == tm.start,
                It::Acted { mv, .. } => mv == Move::R,
            },
            (_, Interior(_)) => false,
            (l, r) => boundary_h(l, r),
        }
    };
    let v = |i: usize, j: usize| -> bool {
        use LayerTile::*;
        match (tiles[i], tiles[j]) {
            (Interior(b), Interior(t)) => match role {
                LayerRole::Counter => machine_step(tm, t, b),
                LayerRole::Verifier => machine_step(tm, b, t),
            },
            (S, Interior(t)) => match (role, t) {
                (LayerRole::Counter, _) => true,
                (LayerRole::Verifier, It::Plain(_)) => true,
                (LayerRole::Verifier, It::Arrived { state, from_left: true, .. }) => state == tm.start,
                (LayerRole::Verifier, _) => false,
            },
            (Interior(b), N) => match (role, b) {
                (LayerRole::Counter, It::Plain(a)) => is_blank(a),
                (LayerRole::Counter, It::Arrived { sym, state, from_left: true }) => {
                    is_blank(sym) && state == tm.start
                }
                (LayerRole::Counter, _) => false,
                (LayerRole::Verifier, It::Arrived { state, .. }) => Some(state) == tm.accept,
                (LayerRole::Verifier, _) => true,
            },
            (Interior(_), _) | (_, Interior(_)) => false,
            (b, t) => boundary_v(b, t),
        }
    };
    RuleSet::from_allowed(names, h, v)
}

/// Compiled two-layer instance with decoders back to machine configurations.
#[derive(Clone, Debug)]
pub struct CompiledTm {
    pub instance: TilingInstance,
    pub layered: LayeredRuleSet,
    pub counter: TuringMachine,
    pub verifier: TuringMachine,
    pub counter_tiles: Vec<LayerTile>,
    pub verifier_tiles: Vec<LayerTile>,
}

/// Counter on layer 1 (time downward), verifier on layer 2 (time upward),
/// four corners fixed to C.
pub fn compile_tm(counter: &TuringMachine, verifier: &TuringMachine) -> Result<CompiledTm, TmError> {
    if !counter.deterministic {
        return Err(TmError::Spec("the counter must be deterministic".into()));
    }
    let counter_alphabet: HashSet<String> = counter.alphabet.iter().cloned().collect();
    for a in &counter.alphabet {
        if verifier.symbol(a).is_none() {
            return Err(TmError::Collision(format!("verifier lacks counter symbol {a:?}")));
        }
    }
    if counter.alphabet[counter.blank] != verifier.alphabet[verifier.blank] {
        return Err(TmError::Collision("machines disagree on the blank".into()));
    }
    let first_writes: Vec<&Rule> = verifier.rules.iter().filter(|r| r.state == verifier.start).collect();
    if let Some(r) = first_writes
        .iter()
        .find(|r| counter_alphabet.contains(&verifier.alphabet[r.write]))
    {
        return Err(TmError::Collision(format!(
            "verifier's first step writes counter symbol {:?} on cell 1",
            verifier.alphabet[r.write]
        )));
    }
    let l1 = layer_rules(counter, LayerRole::Counter, &counter_alphabet);
    let l2 = layer_rules(verifier, LayerRole::Verifier, &counter_alphabet);
    let t1 = layer_tiles(counter);
    let t2 = layer_tiles(verifier);
    let is_boundary = |t: LayerTile| !matches!(t, LayerTile::Interior(_));
    let allowed = t1
        .iter()
        .map(|&a| {
            t2.iter()
                .map(|&b| if is_boundary(a) || is_boundary(b) { a == b } else { true })
                .collect()
        })
        .collect();
    let s1 = t1.iter().position(|&t| t == LayerTile::S).unwrap();
    let s2 = t2.iter().position(|&t| t == LayerTile::S).unwrap();
    // copy rule: an interior tuple above S carries the same symbol on both layers
    let mut conditional = Vec::new();
    for (i, &a) in t1.iter().enumerate() {
        let LayerTile::Interior(ia) = a else { continue };
        for (j, &b) in t2.iter().enumerate() {
            let LayerTile::Interior(ib) = b else { continue };
            if counter.alphabet[ia.symbol()] != verifier.alphabet[ib.symbol()] {
                conditional.push(ConditionalTerm {
                    axis: Axis::Vertical,
                    first: vec![s1, s2],
                    second: vec![i, j],
                    weight: DEFAULT_SENTINEL,
                });
            }
        }
    }
    let spec = LayerSpec {
        layers: vec![l1, l2],
        cross_layer: vec![CrossLayerRule {
            layers: (0, 1),
            allowed,
        }],
        conditional,
    };
    let layered = build_layered_rule_set(&spec).map_err(|e| TmError::Spec(e.to_string()))?;
    let c = layered.index_of_tuple(&[0, 0]).expect("corner tuple");
    let instance = TilingInstance::new(layered.rules.clone(), BoundaryCondition::FourCorners(c));
    Ok(CompiledTm {
        instance,
        layered,
        counter: counter.clone(),
        verifier: verifier.clone(),
        counter_tiles: t1,
        verifier_tiles: t2,
    })
}

impl CompiledTm {
    pub fn tile_count(&self) -> usize {
        self.layered.rules.len()
    }

    /// Machine configuration encoded by interior row `row` (1-based grid row)
    /// of `layer` (0 counter, 1 verifier); `None` unless exactly one head.
    pub fn decode_row(&self, t: &Tiling, layer: usize, row: usize) -> Option<Config> {
        let (tm, tiles) = match layer {
            0 => (&self.counter, &self.counter_tiles),
            _ => (&self.verifier, &self.verifier_tiles),
        };
        let mut tape = Vec::new();
        let mut head = None;
        for col in 1..t.width - 1 {
            let tuple = &self.layered.tuples[t.get(row, col)];
            let LayerTile::Interior(i) = tiles[tuple[layer]] else {
                return None;
            };
            tape.push(i.symbol());
            if let Interior::Arrived { state, .. } = i {
                if head.replace((col - 1, state)).is_some() {
                    return None;
                }
            }
        }
        let (head, state) = head?;
        let mut c = Config { tape, head, state };
        c.trim(tm.blank);
        Some(c)
    }
}

/// Whether the compiled instance should tile at size `n`: the verifier
/// accepts the counter's output after `n - 3` steps in exactly `n - 3` steps.
pub fn compiled_oracle(counter: &TuringMachine, verifier: &TuringMachine, n: usize) -> Result<bool, TmError> {
    if n <= STEP_OFFSET {
        return Ok(false);
    }
    let k = n - STEP_OFFSET;
    let out = run_blank(counter, k)?;
    let input: Vec<usize> = out
        .tape
        .iter()
        .map(|&s| verifier.symbol(&counter.alphabet[s]).expect("shared alphabet"))
        .collect();
    Ok(run_tm(verifier, &input, k)?.accepted)
}

// ---------------------------------------------------------------------------
// The binary counter

/// Binary counter: cell 1 holds a sweep-parity marker, cells 2.. the value
/// least significant bit first, then an end marker. Each increment is one
/// right sweep (marking processed bits) and one left sweep (unmarking).
pub fn binary_counter() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "S0", "S1", "0", "1", "z", "o", "E0", "E1"],
        &["q0", "c", "n", "x0", "x1", "l"],
        None,
        &[
            ("q0", "#", "S1", "c", R),
            ("c", "1", "z", "c", R),
            ("c", "0", "o", "n", R),
            ("n", "0", "z", "n", R),
            ("n", "1", "o", "n", R),
            ("c", "E0", "o", "x0", R),
            ("c", "E1", "o", "x1", R),
            ("c", "#", "o", "x0", R),
            ("x0", "#", "E1", "l", L),
            ("x1", "#", "E0", "l", L),
            ("n", "E0", "E1", "l", L),
            ("n", "E1", "E0", "l", L),
            ("l", "z", "0", "l", L),
            ("l", "o", "1", "l", L),
            ("l", "S0", "S1", "c", R),
            ("l", "S1", "S0", "c", R),
        ],
        true,
    )
    .expect("counter is well formed")
}

fn bit_length(v: &BigUint) -> u64 {
    v.bits()
}

/// Steps of the sweep that increments `v`.
fn sweep_cost(v: &BigUint) -> u64 {
    let carry_out = (v + 1u32).count_ones() == 1;
    2 * bit_length(v) + 2 + if carry_out { 2 } else { 0 }
}

/// Step at which the counter holding `v` starts its increment sweep
/// (head on cell 2, state `c`).
pub fn counter_time(v: &BigUint) -> BigUint {
    // sum over j < v of 2 L(j) + 2, plus 2 per j < v with j + 1 a power of two
    let mut total = BigUint::one() + v * 2u32;
    let vl = bit_length(v);
    for l in 1..=vl {
        let lo = BigUint::one() << (l - 1);
        let hi = (BigUint::one() << l).min(v.clone());
        if hi > lo {
            total += (hi - lo) * (2 * l);
        }
    }
    // j = 2^k - 1 < v for k = 1.. (j + 1 = 2^k); j = 0 counts as 2^0 = 1
    let powers = bit_length(v);
    total += BigUint::from(2 * powers);
    total
}

/// Configuration at [`counter_time`]`(v)`.
pub fn counter_config(tm: &TuringMachine, v: &BigUint) -> Config {
    let s = |n: &str| tm.symbol(n).unwrap();
    let even = v.is_even();
    let mut tape = vec![if even { s("S1") } else { s("S0") }];
    if !v.is_zero() {
        for i in 0..bit_length(v) {
            tape.push(if v.bit(i) { s("1") } else { s("0") });
        }
        tape.push(if even { s("E0") } else { s("E1") });
    }
    Config {
        tape,
        head: 1,
        state: tm.state("c").unwrap(),
    }
}

/// Counter tape after `k` steps from a blank tape.
pub fn f_bc(k: &BigUint) -> Vec<usize> {
    let tm = binary_counter();
    if k.is_zero() {
        return Vec::new();
    }
    // largest v with counter_time(v) <= k, by doubling then bisection
    let mut hi = BigUint::one();
    while counter_time(&hi) <= *k {
        hi <<= 1;
    }
    let mut lo = BigUint::zero();
    while &hi - &lo > BigUint::one() {
        let mid = (&lo + &hi) >> 1;
        if counter_time(&mid) <= *k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rest = (k - counter_time(&lo)).to_usize().expect("within one sweep");
    let mut c = counter_config(&tm, &lo);
    for step in 0..rest {
        c = c.successors(&tm, step).unwrap().pop().expect("counter never halts");
    }
    c.tape
}

/// Step count `k` with `f_bc(k) == x`.
pub fn counter_preimage(x: &[usize]) -> Result<BigUint, TmError> {
    let tm = binary_counter();
    if x.is_empty() {
        return Ok(BigUint::zero());
    }
    let name = |s: usize| tm.alphabet[s].as_str();
    if !matches!(name(x[0]), "S0" | "S1") {
        return Err(TmError::NotInImage("cell 1 must hold S0 or S1".into()));
    }
    let mut bits = Vec::new();
    let mut marked_prefix = 0usize;
    let mut in_prefix = true;
    for &s in &x[1..] {
        match name(s) {
            "0" | "z" | "1" | "o" => {
                let marked = matches!(name(s), "z" | "o");
                if in_prefix && marked {
                    marked_prefix += 1;
                } else {
                    in_prefix = false;
                }
                bits.push(matches!(name(s), "1" | "o"));
            }
            "E0" | "E1" | "#" => break,
            _ => return Err(TmError::NotInImage(format!("unexpected symbol {}", name(s)))),
        }
    }
    let mut w = BigUint::zero();
    for (i, &b) in bits.iter().enumerate() {
        if b {
            w.set_bit(i as u64, true);
        }
    }
    let mut candidates: BTreeSet<BigUint> = BTreeSet::new();
    let carry = (BigUint::one() << marked_prefix) - 1u32;
    for base in [w.clone(), &w + &carry] {
        candidates.insert(base.clone());
        candidates.insert(&base + 1u32);
        if !base.is_zero() {
            candidates.insert(&base - 1u32);
        }
    }
    for v in candidates {
        let t0 = counter_time(&v);
        let mut c = counter_config(&tm, &v);
        for offset in 0..sweep_cost(&v) {
            if c.tape == x {
                return Ok(t0 + offset);
            }
            c = c.successors(&tm, 0).unwrap().pop().unwrap();
        }
    }
    Err(TmError::NotInImage(tm.format_tape(x)))
}

/// Grid rows not used by counter steps: the top boundary row, the row holding
/// the counter's initial configuration, and the bottom boundary row.
pub const STEP_OFFSET: usize = 3;

/// Grid size `N` with `f_bc(N - STEP_OFFSET) == x`.
pub fn reduce_to_n(x: &[usize]) -> Result<BigUint, TmError> {
    Ok(counter_preimage(x)? + STEP_OFFSET)
}

/// Copy of `tm` running `period` times slower: each step is preceded by a
/// right-left excursion that rewrites the cells it reads unchanged.
pub fn slow_machine(tm: &TuringMachine, period: usize) -> TuringMachine {
    assert!(period == 1 || period == 3, "only periods 1 and 3 are supported");
    if period == 1 {
        return tm.clone();
    }
    let nq = tm.states.len();
    let mut states = tm.states.clone();
    for q in &tm.states {
        states.push(format!("{q}>"));
    }
    for q in &tm.states {
        states.push(format!("{q}<"));
    }
    let away = |q: usize| nq + q;
    let ready = |q: usize| 2 * nq + q;
    let mut rules = Vec::new();
    let active: BTreeSet<usize> = tm.rules.iter().map(|r| r.state).collect();
    for &q in &active {
        for a in 0..tm.alphabet.len() {
            rules.push(Rule { state: q, read: a, write: a, next: away(q), mv: Move::R });
            rules.push(Rule { state: away(q), read: a, write: a, next: ready(q), mv: Move::L });
        }
    }
    for r in &tm.rules {
        rules.push(Rule {
            state: ready(r.state),
            ..*r
        });
    }
    TuringMachine {
        alphabet: tm.alphabet.clone(),
        states,
        blank: tm.blank,
        start: tm.start,
        accept: tm.accept,
        rules,
        deterministic: tm.deterministic,
    }
}

/// Grid size `N` with the slow counter's tape equal to `x` after `N - 3`
/// steps and `N` of the requested parity.
pub fn reduce_to_n_with_parity(x: &[usize], odd: bool) -> Result<BigUint, TmError> {
    let k = counter_preimage(x)?;
    let base = k * 3u32;
    (0..3u32)
        .map(|i| &base + i + STEP_OFFSET)
        .find(|n| n.is_odd() == odd)
        .ok_or_else(|| TmError::NotInImage("no size of the requested parity".into()))
}

/// Tape of the period-3 counter after `k` steps.
pub fn f_bc_slow(k: &BigUint) -> Vec<usize> {
    f_bc(&(k / 3u32))
}

/// Recorded growth constants: for N in [N0, 10^4] with n = |f_bc(N)|,
/// `2^(C1 n) <= N <= 2^(C2 n)`.
pub const COUNTER_N0: u64 = 16;
pub const COUNTER_C1: f64 = 0.85;
pub const COUNTER_C2: f64 = 1.25;

// ---------------------------------------------------------------------------
// Fixture machines

/// Unary counter: marks cell 1, then writes one `1` per step.
pub fn unary_counter() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "x", "1"],
        &["q0", "a"],
        None,
        &[("q0", "#", "x", "a", R), ("a", "#", "1", "a", R)],
        true,
    )
    .unwrap()
}

/// Small binary counter without marks: cell 1 holds `$`, bits follow LSB first.
pub fn small_binary_counter() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "$", "0", "1"],
        &["q0", "c", "l"],
        None,
        &[
            ("q0", "#", "$", "c", R),
            ("c", "1", "0", "c", R),
            ("c", "0", "1", "l", L),
            ("c", "#", "1", "l", L),
            ("l", "0", "0", "l", L),
            ("l", "$", "$", "c", R),
        ],
        true,
    )
    .unwrap()
}

/// Verifier for [`unary_counter`]: walks right over the ones and may accept
/// on a `1` read after an even number of ones, so it accepts in exactly K
/// steps iff K is even.
pub fn parity_verifier() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "x", "1", "x'"],
        &["q0", "e", "o", "qA"],
        Some("qA"),
        &[
            ("q0", "x", "x'", "e", R),
            ("e", "1", "1", "o", R),
            ("e", "1", "1", "qA", R),
            ("o", "1", "1", "e", R),
        ],
        false,
    )
    .unwrap()
}

/// Verifier for [`small_binary_counter`]: walks right over `1` and blank
/// cells and may accept on any of them; a `0` blocks, so it accepts in
/// exactly K steps iff no `0` lies in cells 2..=K.
pub fn all_ones_verifier() -> TuringMachine {
    use Move::*;
    TuringMachine::build(
        &["#", "$", "0", "1", "$'"],
        &["q0", "s", "qA"],
        Some("qA"),
        &[
            ("q0", "$", "$'", "s", R),
            ("s", "1", "1", "s", R),
            ("s", "1", "1", "qA", R),
            ("s", "#", "#", "s", R),
            ("s", "#", "#", "qA", R),
        ],
        false,
    )
    .unwrap()
}

/// Two-state machine that writes `1` and accepts.
pub fn write_and_accept() -> TuringMachine {
    TuringMachine::build(&["#", "1"], &["q0", "qA"], Some("qA"), &[("q0", "#", "1", "qA", Move::R)], true).unwrap()
}

/// Fixture (counter, verifier) pairs for compiled-instance checks.
pub fn fixture_pairs() -> Vec<(&'static str, TuringMachine, TuringMachine)> {
    vec![
        ("unary-parity", unary_counter(), parity_verifier()),
        ("binary-ones", small_binary_counter(), all_ones_verifier()),
    ]
}

// ---------------------------------------------------------------------------
// Prime-size reduction

/// Deterministic trial division.
pub fn is_prime(n: &BigUint) -> bool {
    if *n < BigUint::from(2u32) {
        return false;
    }
    for p in [2u32, 3, 5] {
        if (n % p).is_zero() {
            return *n == BigUint::from(p);
        }
    }
    let limit = n.sqrt();
    let mut d = BigUint::from(7u32);
    // wheel over residues coprime to 30
    const GAPS: [u32; 8] = [4, 2, 4, 2, 4, 6, 2, 6];
    let mut i = 0;
    while d <= limit {
        if (n % &d).is_zero() {
            return false;
        }
        d += GAPS[i];
        i = (i + 1) % 8;
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeReduction {
    pub x: BigUint,
    /// Shift `n0`: twice the bit length of `x`.
    pub shift: u64,
    pub lower: BigUint,
    /// Exclusive upper end of the search window.
    pub upper: BigUint,
    pub prime: BigUint,
}

/// Smallest `c` with `c^3 >= n^2`, i.e. `ceil(n^(2/3))`.
fn ceil_two_thirds(n: &BigUint) -> BigUint {
    let sq = n * n;
    let mut c = sq.cbrt();
    while &c * &c * &c < sq {
        c += 1u32;
    }
    c
}

/// Prime in `[N0, N0 + ceil(N0^(2/3)))` with `N0 = x * 2^n0`, sampled with
/// a seeded generator, then scanned exhaustively.
pub fn prime_reduce(x: &BigUint, seed: u64) -> Result<PrimeReduction, TmError> {
    if *x < BigUint::from(2u32) {
        return Err(TmError::Spec("x must be at least 2".into()));
    }
    let shift = 2 * x.bits();
    let lower = x << shift;
    let width = ceil_two_thirds(&lower);
    let upper = &lower + &width;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width_u64 = width.to_u64().unwrap_or(u64::MAX);
    let found = (0..64)
        .map(|_| &lower + rng.gen_range(0..width_u64))
        .find(is_prime)
        .or_else(|| {
            let mut n = lower.clone();
            while n < upper {
                if is_prime(&n) {
                    return Some(n);
                }
                n += 1u32;
            }
            None
        });
    match found {
        Some(prime) => Ok(PrimeReduction {
            x: x.clone(),
            shift,
            lower,
            upper,
            prime,
        }),
        None => Err(TmError::NoPrime { lo: lower, hi: upper }),
    }
}

/// Symbol index map from `from` to `to` by name.
pub fn translate(from: &TuringMachine, to: &TuringMachine, tape: &[usize]) -> Option<Vec<usize>> {
    let map: HashMap<usize, usize> = (0..from.alphabet.len())
        .filter_map(|i| to.symbol(&from.alphabet[i]).map(|j| (i, j)))
        .collect();
    tape.iter().map(|s| map.get(s).copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_machine_stays_in_start() {
        let tm = TuringMachine::build(&["#"], &["q0"], None, &[], true).unwrap();
        let r = run_tm(&tm, &[], 5).unwrap();
        assert_eq!(r.halted_at, Some(0));
        assert_eq!(r.frontier[0].state, tm.start);
    }

    #[test]
    fn write_and_accept_accepts() {
        let tm = write_and_accept();
        let r = run_tm(&tm, &[], 1).unwrap();
        assert!(r.accepted);
        assert_eq!(r.frontier[0].tape, vec![1]);
    }

    #[test]
    fn spec_checks() {
        use Move::*;
        assert!(TuringMachine::build(&["#"], &["q0", "a"], None, &[("a", "#", "#", "q0", R)], true).is_err());
        assert!(TuringMachine::build(&["#"], &["q0", "qA"], Some("qA"), &[("qA", "#", "#", "qA", R)], true).is_err());
        assert!(TuringMachine::build(&["#"], &["q0"], None, &[("q0", "y", "#", "q0", R)], true).is_err());
    }

    #[test]
    fn counter_time_matches_simulation() {
        let tm = binary_counter();
        let t = trace(&tm, &[], 5000).unwrap();
        let mut v = BigUint::zero();
        loop {
            let at = counter_time(&v).to_usize().unwrap();
            if at >= t.len() {
                break;
            }
            assert_eq!(t[at], counter_config(&tm, &v), "v = {v}");
            v += 1u32;
        }
        assert!(v > BigUint::from(100u32));
    }

    #[test]
    fn counter_preimage_roundtrip() {
        let tm = binary_counter();
        let t = trace(&tm, &[], 3000).unwrap();
        for (k, c) in t.iter().enumerate() {
            assert_eq!(f_bc(&BigUint::from(k)), c.tape);
            assert_eq!(counter_preimage(&c.tape).unwrap(), BigUint::from(k));
        }
    }

    #[test]
    fn slow_counter_lags_by_three() {
        let slow = slow_machine(&binary_counter(), 3);
        let t = trace(&slow, &[], 600).unwrap();
        for (k, c) in t.iter().enumerate() {
            assert_eq!(c.tape, f_bc_slow(&BigUint::from(k)), "k = {k}");
        }
    }

    #[test]
    fn prime_examples() {
        let r = prime_reduce(&BigUint::from(5u32), 7).unwrap();
        assert_eq!(r.lower, BigUint::from(320u32));
        assert_eq!(r.upper, BigUint::from(367u32));
        assert!(is_prime(&r.prime) && r.prime < r.upper);
        let r = prime_reduce(&BigUint::from(2u32), 7).unwrap();
        assert_eq!(r.lower, BigUint::from(32u32));
        assert!(r.prime >= BigUint::from(32u32) && r.prime < BigUint::from(43u32));
    }

    #[test]
    fn tile_counts() {
        let tm = TuringMachine::build(&["#", "a", "b"], &["q0", "q1"], None, &[], true).unwrap();
        assert_eq!(layer_tiles(&tm).len() - 5, 27);
        let c = compile_tm(&unary_counter(), &parity_verifier()).unwrap();
        assert_eq!(c.tile_count(), 5 + 27 * 68);
    }

    #[test]
    fn fixture_reversibility() {
        assert!(unary_counter().is_locally_reversible());
        assert!(!binary_counter().is_locally_reversible());
        assert!(tape_injective(&binary_counter(), 20_000).unwrap());
    }
}
