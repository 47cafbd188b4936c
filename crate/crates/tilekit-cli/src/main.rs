use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use tilekit::clock::{self, Construction, Sector};
use tilekit::grid::{self, SolveMode, SolveResult};
use tilekit::io;
use tilekit::line;
use tilekit::tiling::{validate_tiling, RuleSet, Tiling, TilingInstance};
use tilekit::tm::{self, TmSpec, TuringMachine};
use tilekit::variants::{self, FixtureItem, RowPairEnds, RowPairMode, RowPairProblem};

/// Weighted tiling solvers, Turing-machine compilation, variant fixtures and
/// clock-chain Hamiltonians.
#[derive(Parser, Debug)]
#[command(name = "tilekit", version)]
struct Cli {
    /// Emit one machine-readable JSON object on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0x7117)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide, count, or minimize N x N tilings.
    Solve(SolveArgs),
    /// Tile a line of N tiles between two end tiles.
    Line(LineArgs),
    /// Run, compile, and reduce Turing machines.
    #[command(subcommand)]
    Tm(TmCommand),
    /// Inspect variant fixtures and row-pair minima.
    #[command(subcommand)]
    Variant(VariantCommand),
    /// Clock schedule, spectra, and full-track traces.
    #[command(subcommand)]
    Clock(ClockCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Exists,
    Count,
    Mincost,
}

impl From<Mode> for SolveMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exists => SolveMode::Exists,
            Mode::Count => SolveMode::Count,
            Mode::Mincost => SolveMode::MinCost,
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Rule-set document (see docs/ruleset.schema.json).
    #[arg(long)]
    rules: PathBuf,
    /// Grid side, as a decimal string.
    #[arg(long, required_unless_present = "validate")]
    n: Option<String>,
    #[arg(long, value_enum, default_value = "exists")]
    mode: Mode,
    /// Use the exhaustive reference enumerator.
    #[arg(long)]
    oracle: bool,
    /// Write the witness tiling to this file.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Validate this tiling file instead of solving.
    #[arg(long, conflicts_with_all = ["oracle", "witness"])]
    validate: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LineMode {
    Exists,
    Mincost,
}

#[derive(Args, Debug)]
struct LineArgs {
    /// Rule-set document (see docs/ruleset.schema.json).
    #[arg(long)]
    rules: PathBuf,
    /// Line length, as a decimal string of any size.
    #[arg(long)]
    n: String,
    #[arg(long, value_enum, default_value = "exists")]
    mode: LineMode,
    /// End tiles `t0,t1`; defaults to the first tile at both ends.
    #[arg(long)]
    ends: Option<String>,
}

#[derive(Subcommand, Debug)]
enum TmCommand {
    /// Run a machine for a fixed number of steps.
    Run {
        /// Machine document (see docs/tm.schema.json).
        #[arg(long)]
        tm: PathBuf,
        /// Input symbols, whitespace or comma separated.
        #[arg(long, default_value = "")]
        input: String,
        /// Step budget for the run.
        #[arg(long)]
        steps: usize,
    },
    /// Compile a counter and a verifier into a tiling instance.
    Compile {
        /// Deterministic counter machine document.
        #[arg(long)]
        counter: PathBuf,
        /// Verifier machine document.
        #[arg(long)]
        verifier: PathBuf,
        /// Write the instance as a rule-set document.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also decide the compiled instance at this size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Grid size N whose counter output after N - 3 steps is the given tape.
    Reduce {
        /// Counter tape, symbols separated by whitespace or commas.
        #[arg(long)]
        x: String,
        /// Require odd N (slow counter); `--even` for even N.
        #[arg(long, conflicts_with = "even")]
        odd: bool,
        #[arg(long)]
        even: bool,
    },
    /// Prime N whose leading bits encode x.
    Prime {
        /// Integer x >= 2, as a decimal string.
        #[arg(long)]
        x: String,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairMode {
    Wprime,
    Wdprime,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PairEnds {
    Free,
    Oneblocked,
    Bothblocked,
    Onecorner,
    Corners,
}

#[derive(Subcommand, Debug)]
enum VariantCommand {
    /// Print a named fixture, or list names when none is given.
    Fixture { name: Option<String> },
    /// Minimum cost of a two-row strip of width N.
    Rowpair {
        /// Fixture name, as listed by `variant fixture`.
        #[arg(long, default_value = "reflection-weighted-L1")]
        fixture: String,
        /// Strip width, as a decimal string.
        #[arg(long)]
        n: String,
        #[arg(long, value_enum)]
        mode: PairMode,
        #[arg(long, value_enum, default_value = "free")]
        ends: PairEnds,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SectorArg {
    Bracketed,
    Wellformed,
    Path,
    Full,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EigenMethod {
    Lanczos,
    Blocks,
}

#[derive(Subcommand, Debug)]
enum ClockCommand {
    /// Clock schedule, one state per line.
    Sequence {
        /// Chain length.
        #[arg(long)]
        n: usize,
    },
    /// Lowest eigenvalues of the clock Hamiltonian on a sector.
    Spectrum {
        /// Chain length.
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "bracketed")]
        sector: SectorArg,
        /// Add the end-marker term.
        #[arg(long)]
        boundary: bool,
        /// Number of eigenpairs.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, value_enum, default_value = "lanczos")]
        method: EigenMethod,
    },
    /// Full-track simulation with a counter machine, as ASCII frames.
    Trace {
        /// Chain length.
        #[arg(long)]
        n: usize,
        /// Counter machine; a built-in reversible counter when omitted.
        #[arg(long)]
        tm: Option<PathBuf>,
        /// Verifier machine; a built-in verifier when omitted.
        #[arg(long)]
        verifier: Option<PathBuf>,
        /// Witness bits, e.g. `0110`.
        #[arg(long, default_value = "")]
        witness: String,
    },
}

/// Affirmative or negative answer of a command.
enum Verdict {
    Yes,
    No,
}

impl Verdict {
    fn from_bool(b: bool) -> Self {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

struct Ctx {
    json: bool,
    seed: u64,
}

impl Ctx {
    /// Writes to stdout; a closed pipe ends output silently.
    fn emit(&self, value: &Value, human: impl FnOnce() -> String) {
        let text = if self.json {
            serde_json::to_string_pretty(value).expect("serializable")
        } else {
            human().trim_end().to_string()
        };
        if !text.is_empty() {
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        json: cli.json,
        seed: cli.seed,
    };
    match run(&ctx, cli.command) {
        Ok(Verdict::Yes) => ExitCode::from(0),
        Ok(Verdict::No) => ExitCode::from(1),
        Err(e) => {
            if ctx.json {
                println!("{}", json!({ "error": format!("{e:#}") }));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(ctx: &Ctx, cmd: Command) -> Result<Verdict> {
    match cmd {
        Command::Solve(a) => solve(ctx, a),
        Command::Line(a) => line_cmd(ctx, a),
        Command::Tm(c) => tm_cmd(ctx, c),
        Command::Variant(c) => variant_cmd(ctx, c),
        Command::Clock(c) => clock_cmd(ctx, c),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_instance(path: &Path) -> Result<TilingInstance> {
    io::instance_from_json(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_tm(path: &Path) -> Result<TuringMachine> {
    let spec: TmSpec = serde_json::from_str(&read(path)?)
        .map_err(|e| anyhow!("line {}, column {}: {e}", e.line(), e.column()))
        .with_context(|| format!("in {}", path.display()))?;
    TuringMachine::from_spec(&spec).with_context(|| format!("in {}", path.display()))
}

fn parse_big(s: &str, what: &str) -> Result<BigUint> {
    s.trim()
        .parse::<BigUint>()
        .map_err(|_| anyhow!("{what} must be a non-negative decimal integer, got {s:?}"))
}

fn parse_small(s: &str, what: &str) -> Result<usize> {
    let v = parse_big(s, what)?;
    usize::try_from(&v).map_err(|_| anyhow!("{what} = {v} is too large for this operation"))
}

fn result_json(r: &SolveResult, rules: &RuleSet, mode: SolveMode) -> Value {
    json!({
        "exists": r.exists,
        "count": r.count.as_ref().map(|c| c.to_string()),
        "minCost": match (&r.min_cost, mode) {
            (Some(c), SolveMode::MinCost) => json!(c.to_string()),
            (None, SolveMode::MinCost) => json!("infeasible"),
            _ => Value::Null,
        },
        "witness": r.witness.as_ref().map(|t| io::tiling_to_value(t, rules)),
    })
}

fn solve(ctx: &Ctx, a: SolveArgs) -> Result<Verdict> {
    let inst = load_instance(&a.rules)?;
    if let Some(path) = &a.validate {
        let t = io::tiling_from_json(&read(path)?, &inst.rules).with_context(|| format!("in {}", path.display()))?;
        return validate(ctx, &inst, &t);
    }
    let n = parse_small(a.n.as_deref().unwrap_or_default(), "--n")?;
    let mode = SolveMode::from(a.mode);
    let mut r = if a.oracle {
        grid::brute_force_grid(&inst, n)?
    } else {
        grid::solve_grid(&inst, n, mode)?
    };
    if a.oracle && mode == SolveMode::MinCost {
        r.witness = grid::brute_force_min_witness(&inst, n)?;
    }
    if let (Some(path), Some(t)) = (&a.witness, &r.witness) {
        let doc = serde_json::to_string_pretty(&io::tiling_to_value(t, &inst.rules))?;
        fs::write(path, doc + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    let mut value = result_json(&r, &inst.rules, mode);
    value["n"] = json!(n);
    value["mode"] = json!(format!("{mode:?}").to_lowercase());
    let verdict = match mode {
        SolveMode::Exists => r.exists,
        SolveMode::Count => r.count.as_ref().is_some_and(|c| *c > BigUint::ZERO),
        SolveMode::MinCost => r.min_cost.is_some(),
    };
    ctx.emit(&value, || {
        let mut out = String::new();
        match mode {
            SolveMode::Exists => out += &format!("exists: {}\n", r.exists),
            SolveMode::Count => out += &format!("count: {}\n", r.count.as_ref().map_or("-".into(), |c| c.to_string())),
            SolveMode::MinCost => {
                out += &format!(
                    "min cost: {}\n",
                    r.min_cost.as_ref().map_or("infeasible".into(), |c| c.to_string())
                )
            }
        }
        if let Some(t) = &r.witness {
            out += &t.render(&inst.rules);
        }
        out
    });
    Ok(Verdict::from_bool(verdict))
}

fn validate(ctx: &Ctx, inst: &TilingInstance, t: &Tiling) -> Result<Verdict> {
    let report = validate_tiling(inst, t)?;
    let bound = inst.cost_bound.eval(t.height as u64);
    let within = report.is_valid() && num_bigint::BigInt::from(report.total_cost) <= bound;
    let value = json!({
        "valid": report.is_valid(),
        "totalCost": report.total_cost,
        "costBound": bound.to_string(),
        "withinBound": within,
        "violations": report.violations.len(),
        "boundaryMismatches": report.boundary_mismatches.len(),
    });
    ctx.emit(&value, || {
        format!(
            "valid: {}\ntotal cost: {}\ncost bound: {}\nviolations: {}\nboundary mismatches: {}",
            report.is_valid(),
            report.total_cost,
            bound,
            report.violations.len(),
            report.boundary_mismatches.len()
        )
    });
    Ok(Verdict::from_bool(within))
}

fn tile_index(rules: &RuleSet, name: &str) -> Result<usize> {
    rules.index_of(name.trim()).ok_or_else(|| anyhow!("unknown tile {name:?}"))
}

fn line_cmd(ctx: &Ctx, a: LineArgs) -> Result<Verdict> {
    let inst = load_instance(&a.rules)?;
    let rules = &inst.rules;
    let (start, end) = match &a.ends {
        None => (0, 0),
        Some(s) => {
            let (l, r) = s.split_once(',').ok_or_else(|| anyhow!("--ends expects t0,t1"))?;
            (tile_index(rules, l)?, tile_index(rules, r)?)
        }
    };
    let n = parse_big(&a.n, "--n")?;
    let mode = match a.mode {
        LineMode::Exists => SolveMode::Exists,
        LineMode::Mincost => SolveMode::MinCost,
    };
    let r = line::solve_line(rules, start, end, &n, mode)?;
    let mut value = result_json(&r, rules, mode);
    value["n"] = json!(n.to_string());
    value["ends"] = json!([rules.tile_name(start), rules.tile_name(end)]);
    let verdict = match mode {
        SolveMode::MinCost => r.min_cost.is_some(),
        _ => r.exists,
    };
    ctx.emit(&value, || {
        let mut out = format!("exists: {}\n", r.exists);
        if mode == SolveMode::MinCost {
            out += &format!(
                "min cost: {}\n",
                r.min_cost.as_ref().map_or("infeasible".into(), |c| c.to_string())
            );
        }
        if let Some(t) = r.witness.as_ref().filter(|t| t.width <= 200) {
            out += &t.render(rules);
        }
        out
    });
    Ok(Verdict::from_bool(verdict))
}

fn config_json(tm: &TuringMachine, c: &tm::Config) -> Value {
    json!({
        "tape": tm.format_tape(&c.tape),
        "head": c.head + 1,
        "state": tm.states[c.state],
    })
}

fn tm_cmd(ctx: &Ctx, cmd: TmCommand) -> Result<Verdict> {
    match cmd {
        TmCommand::Run { tm, input, steps } => {
            let m = load_tm(&tm)?;
            let input = m.parse_tape(&input)?;
            let r = tm::run_tm(&m, &input, steps)?;
            let value = json!({
                "steps": steps,
                "accepted": r.accepted,
                "acceptedAtHome": r.accepted_at_home,
                "haltedAt": r.halted_at,
                "frontier": r.frontier.iter().map(|c| config_json(&m, c)).collect::<Vec<_>>(),
            });
            ctx.emit(&value, || {
                let mut out = format!("accepted at cell 1: {}\n", r.accepted_at_home);
                if let Some(h) = r.halted_at {
                    out += &format!("halted at step {h}\n");
                }
                for c in r.frontier.iter().take(20) {
                    out += &format!("{} | head {} | {}\n", m.format_tape(&c.tape), c.head + 1, m.states[c.state]);
                }
                out
            });
            Ok(Verdict::from_bool(r.accepted_at_home))
        }
        TmCommand::Compile {
            counter,
            verifier,
            out,
            n,
        } => {
            let (c, v) = (load_tm(&counter)?, load_tm(&verifier)?);
            let compiled = tm::compile_tm(&c, &v)?;
            if let Some(path) = &out {
                let doc = serde_json::to_string_pretty(&io::instance_to_value(&compiled.instance))?;
                fs::write(path, doc + "\n").with_context(|| format!("cannot write {}", path.display()))?;
            }
            let decided = match n {
                Some(n) => Some((grid::solve_grid(&compiled.instance, n, SolveMode::Exists)?.exists, tm::compiled_oracle(&c, &v, n)?)),
                None => None,
            };
            let value = json!({
                "tiles": compiled.tile_count(),
                "counterTiles": compiled.counter_tiles.len(),
                "verifierTiles": compiled.verifier_tiles.len(),
                "n": n,
                "exists": decided.map(|d| d.0),
                "oracle": decided.map(|d| d.1),
            });
            ctx.emit(&value, || {
                let mut s = format!(
                    "tiles: {} (counter layer {}, verifier layer {})\n",
                    compiled.tile_count(),
                    compiled.counter_tiles.len(),
                    compiled.verifier_tiles.len()
                );
                if let (Some(n), Some((e, o))) = (n, decided) {
                    s += &format!("N = {n}: tiling exists {e}, machine oracle {o}\n");
                }
                s
            });
            Ok(Verdict::from_bool(decided.is_none_or(|d| d.0)))
        }
        TmCommand::Reduce { x, odd, even } => {
            let counter = tm::binary_counter();
            let tape = counter.parse_tape(&x)?;
            let n = if odd || even {
                tm::reduce_to_n_with_parity(&tape, odd)?
            } else {
                tm::reduce_to_n(&tape)?
            };
            let value = json!({ "x": counter.format_tape(&tape), "n": n.to_string() });
            ctx.emit(&value, || format!("N = {n}"));
            Ok(Verdict::Yes)
        }
        TmCommand::Prime { x } => {
            let x = parse_big(&x, "--x")?;
            let r = tm::prime_reduce(&x, ctx.seed)?;
            let value = json!({
                "x": r.x.to_string(),
                "shift": r.shift,
                "lower": r.lower.to_string(),
                "upper": r.upper.to_string(),
                "prime": r.prime.to_string(),
            });
            ctx.emit(&value, || {
                format!("N = {} in [{}, {}), shift {}", r.prime, r.lower, r.upper, r.shift)
            });
            Ok(Verdict::Yes)
        }
    }
}

fn variant_cmd(ctx: &Ctx, cmd: VariantCommand) -> Result<Verdict> {
    match cmd {
        VariantCommand::Fixture { name: None } => {
            let names = variants::fixture_names();
            ctx.emit(&json!({ "fixtures": names }), || names.join("\n"));
            Ok(Verdict::Yes)
        }
        VariantCommand::Fixture { name: Some(name) } => match variants::fixture(&name)? {
            FixtureItem::Rules(f) => {
                let inst = f.instance()?;
                let value = json!({
                    "name": name,
                    "checksum": f.checksum(),
                    "layers": f.layers().len(),
                    "productLayers": f.product_layers,
                    "instance": io::instance_to_value(&inst),
                });
                ctx.emit(&value, || {
                    let mut s = format!(
                        "{name}: {} layers, {} in the product, {} tiles\nsha256 {}\n",
                        f.layers().len(),
                        f.product_layers,
                        inst.rules.len(),
                        f.checksum()
                    );
                    for (i, layer) in f.layers().iter().enumerate() {
                        s += &format!("layer {}: {}\n", i + 1, layer.tiles().join(" "));
                    }
                    s
                });
                Ok(Verdict::Yes)
            }
            FixtureItem::Golden(g) => {
                let report = validate_tiling(&g.instance, &g.tiling)?;
                let ok = report.is_valid() && report.total_cost == g.expected_cost;
                let value = json!({
                    "name": name,
                    "expectedCost": g.expected_cost,
                    "totalCost": report.total_cost,
                    "valid": report.is_valid(),
                    "tiling": io::tiling_to_value(&g.tiling, &g.instance.rules),
                });
                ctx.emit(&value, || {
                    format!(
                        "{}\ntotal cost {} (expected {}), valid {}",
                        g.render(),
                        report.total_cost,
                        g.expected_cost,
                        report.is_valid()
                    )
                });
                Ok(Verdict::from_bool(ok))
            }
        },
        VariantCommand::Rowpair { fixture, n, mode, ends } => {
            let rules = match variants::fixture(&fixture)? {
                FixtureItem::Rules(f) => f.instance()?.rules,
                FixtureItem::Golden(g) => g.instance.rules,
            };
            let mode = match mode {
                PairMode::Wprime => RowPairMode::WPrime,
                PairMode::Wdprime => RowPairMode::WDoublePrime,
            };
            let ends = match ends {
                PairEnds::Free => RowPairEnds::Free,
                PairEnds::Oneblocked => RowPairEnds::OneBlocked,
                PairEnds::Bothblocked => RowPairEnds::BothBlocked,
                PairEnds::Onecorner => RowPairEnds::OneCorner,
                PairEnds::Corners => RowPairEnds::Corners,
            };
            let n = parse_big(&n, "--n")?;
            let prob = RowPairProblem::new(&rules, mode, ends)?;
            let sol = variants::row_pair_minimum(&prob, &n);
            let names = |row: &[usize]| row.iter().map(|&t| rules.tile_name(t).to_string()).collect::<Vec<_>>();
            let value = json!({
                "fixture": fixture,
                "n": n.to_string(),
                "mode": format!("{mode:?}"),
                "ends": format!("{ends:?}"),
                "min": sol.as_ref().map_or(json!("infeasible"), |s| json!(s.min.to_string())),
                "rows": sol.as_ref().and_then(|s| s.rows.as_ref()).map(|(t, b)| json!({"top": names(t), "bottom": names(b)})),
            });
            ctx.emit(&value, || match &sol {
                None => "infeasible".into(),
                Some(s) => {
                    let mut out = format!("min: {}\n", s.min);
                    if let Some((t, b)) = s.rows.as_ref().filter(|r| r.0.len() <= 200) {
                        out += &format!("{}\n{}\n", names(t).join(" "), names(b).join(" "));
                    }
                    out
                }
            });
            Ok(Verdict::from_bool(sol.is_some()))
        }
    }
}

fn clock_cmd(ctx: &Ctx, cmd: ClockCommand) -> Result<Verdict> {
    match cmd {
        ClockCommand::Sequence { n } => {
            let seq = clock::clock_sequence(n)?;
            let lines: Vec<String> = seq.iter().map(|s| s.render_line()).collect();
            ctx.emit(&json!({ "n": n, "length": seq.len(), "states": lines }), || lines.join("\n"));
            Ok(Verdict::Yes)
        }
        ClockCommand::Spectrum {
            n,
            sector,
            boundary,
            k,
            method,
        } => {
            let sector = match sector {
                SectorArg::Bracketed => Sector::BracketedAll,
                SectorArg::Wellformed => Sector::WellFormed,
                SectorArg::Path => Sector::LegalPath,
                SectorArg::Full => Sector::Full,
            };
            let h = clock::build_hamiltonian(n, sector, boundary)?;
            let pairs = match method {
                EigenMethod::Lanczos => {
                    let opts = clock::LanczosOptions {
                        seed: ctx.seed,
                        ..Default::default()
                    };
                    clock::lowest_eigenpairs(&h, k, &opts)?
                }
                EigenMethod::Blocks => clock::block_eigenpairs(&h, k)?,
            };
            let uniformity = pairs
                .first()
                .and_then(|p| clock::schedule_uniformity_error(&h, &p.vector).ok());
            let value = json!({
                "n": n,
                "sector": format!("{sector:?}"),
                "boundary": boundary,
                "dimension": h.dim,
                "eigenvalues": pairs.iter().map(|p| p.value).collect::<Vec<_>>(),
                "residuals": pairs.iter().map(|p| p.residual).collect::<Vec<_>>(),
                "gap": (pairs.len() >= 2).then(|| pairs[1].value - pairs[0].value),
                "groundUniformityError": uniformity,
            });
            ctx.emit(&value, || {
                let mut s = format!("dimension {}\n", h.dim);
                for (i, p) in pairs.iter().enumerate() {
                    s += &format!("lambda_{i} = {:.12} (residual {:.1e})\n", p.value, p.residual);
                }
                if let Some(u) = uniformity {
                    s += &format!("ground state distance from uniform clock superposition: {u:.1e}\n");
                }
                s
            });
            Ok(Verdict::Yes)
        }
        ClockCommand::Trace {
            n,
            tm,
            verifier,
            witness,
        } => {
            let counter = match &tm {
                Some(p) => load_tm(p)?,
                None => clock::zigzag_counter(),
            };
            let verifier = match &verifier {
                Some(p) => load_tm(p)?,
                None => clock::home_verifier(),
            };
            let bits = witness
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => bail!("--witness takes 0/1 characters, got {c:?}"),
                })
                .collect::<Result<Vec<_>>>()?;
            let c = Construction::new(&counter, &verifier)?;
            let r = clock::simulate_construction(&c, n, &bits, true)?;
            let value = json!({
                "n": n,
                "clockSteps": r.clock_steps,
                "counterSteps": r.counter_steps,
                "verifierSteps": r.verifier_steps,
                "verifierIdle": r.verifier_idle,
                "tapeAfterCounting": r.tape_after_counting,
                "finalTape": r.final_tape,
                "accepted": r.accepted,
                "violation": r.violation,
                "frames": r.frames,
            });
            ctx.emit(&value, || {
                let mut s = String::new();
                for (i, f) in r.frames.iter().enumerate() {
                    s += &format!("step {i}\n{}\n\n", clock::render_sim_frame(f));
                }
                s += &format!(
                    "counter steps {}, verifier steps {} (+{} idle), accepted {}\n",
                    r.counter_steps, r.verifier_steps, r.verifier_idle, r.accepted
                );
                if let Some(v) = &r.violation {
                    s += &format!("violation at step {} site {}: {}\n", v.step, v.site, v.reason);
                }
                s
            });
            Ok(Verdict::from_bool(r.accepted))
        }
    }
}
