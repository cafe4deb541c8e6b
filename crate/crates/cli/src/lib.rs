//! Command-line front end. `run` is the whole program minus process exit,
//! so it can be driven from tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use epec_core::catalog::{cournot, pang_fukushima, CournotParams, PfVariant};
use epec_core::certify::{
    check_nash_b_stationary, check_second_order_ss, check_shared_multiplier_form, check_strong_stationary,
    transfer_multipliers, verify_global, verify_local, Certificate, Claim, DEFAULT_EPS,
};
use epec_core::mpec::{
    build_ae, build_imp, build_quasi, expand_quasi, solve_global, solve_global_many, MpecInstance, SolveOptions,
    SolveResult, SolveStatus, DEFAULT_MAX_ITERS, DEFAULT_MULTISTART, TAU_STAT,
};
use epec_core::model::parse_point;
use epec_core::structure::{detect_implicit_potential, detect_potential, detect_quasi_potential, StructureReport};
use epec_core::{parse_game, serialize_game, Error, Formulation, Game, Point, VariableLayout};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_EXPECT: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

pub const SEED_VAR: &str = "EPEC_SEED";

#[derive(Debug, Parser)]
#[command(name = "epec", version, about = "Analyse, solve and certify multi-leader multi-follower games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a reference game file.
    Example {
        #[command(subcommand)]
        kind: ExampleKind,
    },
    /// Detect potential structure.
    Analyze { game: PathBuf },
    /// Solve the game's optimisation reformulation and verify the result.
    Solve {
        game: PathBuf,
        #[arg(long, value_enum)]
        formulation: SolveForm,
        #[command(flatten)]
        solver: SolverArgs,
        /// Best-response gap tolerance of the automatic verification.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
    },
    /// Certify a given point.
    Verify {
        game: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Global)]
        mode: Mode,
        /// Defaults to the formulation stored in the game file.
        #[arg(long, value_enum)]
        game_form: Option<GameForm>,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// Half-width of the box neighbourhood used by `--mode local`.
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        /// Exit with code 2 unless the certificate makes this claim.
        #[arg(long)]
        expect: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = DEFAULT_MULTISTART)]
    multistart: usize,
    #[arg(long, default_value_t = TAU_STAT)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Subcommand)]
enum ExampleKind {
    /// Hierarchical Cournot market with identical firms.
    Cournot {
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, allow_negative_numbers = true)]
        c: f64,
        #[arg(long)]
        leaders: usize,
        #[arg(long)]
        followers: usize,
        /// One LCP row per follower instead of one common conjecture.
        #[arg(long)]
        full_followers: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Two leaders, one follower with `y = max{0, 1 − x₁ − x₂}`.
    PangFukushima {
        #[arg(long, default_value = "original")]
        variant: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SolveForm {
    Quasi,
    Ae,
    Imp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Global,
    Local,
    Bstat,
    Strong,
    SecondOrder,
    Shared,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GameForm {
    Original,
    Ae,
}

/// Result of one invocation.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        let mut stderr = message.into();
        if !stderr.ends_with('\n') {
            stderr.push('\n');
        }
        Outcome { code, stdout: String::new(), stderr }
    }

    /// Machine-readable section of the report, if any.
    pub fn json(&self) -> Option<Value> {
        let start = self.stdout.find("```json\n")? + "```json\n".len();
        let end = start + self.stdout[start..].find("\n```")?;
        serde_json::from_str(&self.stdout[start..end]).ok()
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. } | Error::Semantic(_) | Error::Dimension { .. } => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn from_error(e: Error) -> Outcome {
    Outcome::fail(error_code(&e), format!("error: {e}"))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let echo: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome::fail(EXIT_USAGE, text)
            } else {
                Outcome { code: EXIT_OK, stdout: text, stderr: String::new() }
            };
        }
    };
    let seed = match std::env::var(SEED_VAR) {
        Ok(s) => match s.trim().parse::<u64>() {
            Ok(v) => v,
            Err(_) => return Outcome::fail(EXIT_USAGE, format!("error: {SEED_VAR} must be an unsigned integer, got '{s}'")),
        },
        Err(_) => 0,
    };
    match cli.command {
        Command::Example { kind } => cmd_example(kind),
        Command::Analyze { game } => cmd_analyze(&echo, &game),
        Command::Solve { game, formulation, solver, eps } => {
            let opts = solver.options(seed);
            cmd_solve(&echo, &game, formulation, &opts, eps)
        }
        Command::Verify { game, point, mode, game_form, eps, radius, expect, solver } => {
            let opts = solver.options(seed);
            let req = VerifyRequest { mode, game_form, eps, radius, expect, opts, seed };
            cmd_verify(&echo, &game, &point, &req)
        }
    }
}

impl SolverArgs {
    fn options(&self, seed: u64) -> SolveOptions {
        SolveOptions {
            multistart: self.multistart,
            tol: self.tol,
            max_iters: self.max_iters,
            threads: self.threads.max(1),
            seed,
        }
    }
}

// ---- example -----------------------------------------------------------------

fn cmd_example(kind: ExampleKind) -> Outcome {
    let (game, output) = match kind {
        ExampleKind::Cournot { a, b, c, leaders, followers, full_followers, output } => {
            let params = CournotParams { a, b, c, leaders, followers };
            match cournot(&params, full_followers) {
                Ok(g) => (g, output),
                Err(e) => return Outcome::fail(EXIT_USAGE, format!("error: {e}")),
            }
        }
        ExampleKind::PangFukushima { variant, output } => match variant.parse::<PfVariant>() {
            Ok(v) => (pang_fukushima(v), output),
            Err(_) => {
                let names: Vec<String> = PfVariant::ALL.iter().map(|v| v.to_string()).collect();
                return Outcome::fail(
                    EXIT_USAGE,
                    format!("error: unknown variant '{variant}'; expected one of {}", names.join(", ")),
                );
            }
        },
    };
    let text = serialize_game(&game);
    match output {
        Some(path) => match std::fs::write(&path, &text) {
            Ok(()) => Outcome {
                code: EXIT_OK,
                stdout: format!("wrote {} ({})\n", path.display(), game.digest()),
                stderr: String::new(),
            },
            Err(e) => Outcome::fail(EXIT_USAGE, format!("error: cannot write {}: {e}", path.display())),
        },
        None => Outcome { code: EXIT_OK, stdout: text, stderr: String::new() },
    }
}

// ---- report ------------------------------------------------------------------

struct Report {
    text: String,
    json: serde_json::Map<String, Value>,
    timings: Vec<(String, f64)>,
}

impl Report {
    fn new(echo: &[String], game: &Game) -> Self {
        let lay = game.layout();
        let mut json = serde_json::Map::new();
        json.insert("tool".into(), json!({"name": "epec", "version": env!("CARGO_PKG_VERSION")}));
        json.insert("command".into(), json!(echo));
        json.insert(
            "game".into(),
            json!({
                "leaders": game.num_leaders(),
                "m": lay.m(),
                "p": lay.p(),
                "formulation": game.formulation().to_string(),
            }),
        );
        let mut text = String::new();
        let _ = writeln!(text, "command: {}", echo.join(" "));
        let _ = writeln!(text, "game: {}", game.digest());
        Report { text, json, timings: Vec::new() }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn put(&mut self, key: &str, value: Value) {
        self.json.insert(key.into(), value);
    }

    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push((phase.into(), t.elapsed().as_secs_f64()));
        out
    }

    fn finish(mut self, code: i32) -> Outcome {
        let timings: serde_json::Map<String, Value> =
            self.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        for (k, v) in &self.timings {
            let _ = writeln!(self.text, "time {k}: {:.3} ms", v * 1e3);
        }
        self.json.insert("timings_s".into(), Value::Object(timings));
        let body = serde_json::to_string_pretty(&Value::Object(self.json)).expect("report serializes");
        let _ = write!(self.text, "\n```json\n{body}\n```\n");
        Outcome { code, stdout: self.text, stderr: String::new() }
    }
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

fn vec_str(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", "))
}

fn point_str(lay: &VariableLayout, z: &[f64]) -> String {
    let p = Point::from_flat(lay, z);
    let blocks = |b: &[Vec<f64>]| b.iter().map(|v| vec_str(v)).collect::<Vec<_>>().join(", ");
    format!("x = ({}), y = ({})", blocks(&p.x), blocks(&p.y))
}

fn load_game(path: &Path) -> std::result::Result<Game, Outcome> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: cannot read {}: {e}", path.display())))?;
    parse_game(&text).map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: {}: {e}", path.display())))
}

fn structure_json(r: &StructureReport, names: &[String]) -> Value {
    json!({
        "kind": r.kind,
        "pi": r.pi.as_ref().map(|p| p.display_with(names).to_string()),
        "h": r.h.as_ref().map(|p| p.display_with(names).to_string()),
        "witness": r.witness,
        "reason": r.reason,
        "pieces": r.pieces.len(),
        "sampled": r.sampled,
    })
}

fn structure_line(label: &str, r: &StructureReport, names: &[String]) -> String {
    let mut s = format!("{label}: ");
    if r.kind == epec_core::structure::StructureKind::None {
        s.push_str("no");
        if let Some(reason) = &r.reason {
            let _ = write!(s, " ({reason})");
        }
        if let Some(w) = &r.witness {
            let _ = write!(
                s,
                "\n  witness: leaders {} and {}, {} [difference {}]",
                w.leaders.0 + 1,
                w.leaders.1 + 1,
                w.detail,
                num(w.difference)
            );
        }
        return s;
    }
    s.push_str("yes");
    if let Some(pi) = &r.pi {
        let _ = write!(s, "\n  pi = {}", pi.display_with(names));
    }
    if let Some(h) = &r.h {
        let _ = write!(s, "\n  h = {}", h.display_with(names));
    }
    if !r.pieces.is_empty() {
        for (k, piece) in r.pieces.iter().enumerate() {
            let _ = write!(s, "\n  piece {} on {}: pi = {}", k + 1, piece.alpha, piece.pi.display_with(names));
        }
    }
    if r.sampled {
        s.push_str("\n  (piece boundaries checked by sampling)");
    }
    s
}

// ---- analyze -----------------------------------------------------------------

fn cmd_analyze(echo: &[String], path: &Path) -> Outcome {
    let game = match load_game(path) {
        Ok(g) => g,
        Err(o) => return o,
    };
    let lay = game.layout();
    let mut rep = Report::new(echo, &game);
    let names = lay.names();
    let quasi_names = VariableLayout::quasi(lay.m().to_vec(), lay.p()).names();
    let x_names = VariableLayout::new(lay.m().to_vec(), 0).names();

    let pot = rep.time("potential", || detect_potential(&game));
    rep.line(structure_line("potential", &pot, &names));
    rep.put("potential", structure_json(&pot, &names));

    let quasi = rep.time("quasi_potential", || detect_quasi_potential(&game));
    rep.line(structure_line("quasi-potential", &quasi, &quasi_names));
    rep.put("quasi_potential", structure_json(&quasi, &quasi_names));

    match rep.time("implicit_potential", || detect_implicit_potential(&game)) {
        Ok(imp) => {
            rep.line(structure_line("implicit potential", &imp, &x_names));
            rep.put("implicit_potential", structure_json(&imp, &x_names));
        }
        Err(e) => {
            rep.line(format!("implicit potential: not applicable ({e})"));
            rep.put("implicit_potential", json!({"kind": "not_applicable", "reason": e.to_string()}));
        }
    }
    rep.finish(EXIT_OK)
}

// ---- solve -------------------------------------------------------------------

fn solve_json(r: &SolveResult, names: &[String]) -> Value {
    let pieces_certified = r.log.iter().filter(|p| p.certified).count();
    json!({
        "status": r.status,
        "point": r.point,
        "variables": names,
        "value": r.value,
        "patterns": r.patterns,
        "stationarity_residual": r.stationarity_residual,
        "pieces": r.log.len(),
        "pieces_certified": pieces_certified,
        "log": r.log,
    })
}

fn certificate_lines(rep: &mut Report, lay: &VariableLayout, c: &Certificate) {
    rep.line(format!("claim: {}", c.claim));
    if !c.gaps.is_empty() {
        rep.line(format!("gaps: {}", vec_str(&c.gaps)));
    }
    for d in &c.deviations {
        rep.line(format!(
            "  leader {} deviates to {} with value {}",
            d.leader + 1,
            point_str(lay, &d.point),
            num(d.value)
        ));
    }
    if let Some(r) = c.residual {
        rep.line(format!("residual: {}", num(r)));
    }
    if let Some(d) = &c.direction {
        rep.line(format!("direction: {}", vec_str(d)));
    }
    if c.branches_checked > 0 {
        rep.line(format!("branches checked: {}", c.branches_checked));
    }
    if !c.flags.is_empty() {
        rep.line(format!("flags: {}", c.flags.join(", ")));
    }
    if !c.detail.is_empty() {
        rep.line(format!("detail: {}", c.detail));
    }
}

fn cmd_solve(echo: &[String], path: &Path, form: SolveForm, opts: &SolveOptions, eps: f64) -> Outcome {
    let game = match load_game(path) {
        Ok(g) => g,
        Err(o) => return o,
    };
    let mut rep = Report::new(echo, &game);
    rep.put("options", json!({"solver": opts, "eps": eps, "formulation": format!("{form:?}").to_lowercase()}));
    let lay = game.layout().clone();
    match solve_inner(&mut rep, &game, form, opts) {
        Ok(Some((verify_game, point))) => {
            rep.line(format!("point: {}", point_str(&lay, &point)));
            let cert = match rep.time("verify", || verify_global(&verify_game, &point, eps, opts)) {
                Ok(c) => c,
                Err(e) => return fail_with_report(rep, e),
            };
            rep.line(format!("verification on {}:", verify_game.formulation()));
            certificate_lines(&mut rep, &lay, &cert);
            rep.put("point", json!(Point::from_flat(&lay, &point)));
            rep.put("certificates", json!([cert]));
            rep.finish(EXIT_OK)
        }
        Ok(None) => rep.finish(EXIT_FAILURE),
        Err(e) => fail_with_report(rep, e),
    }
}

fn fail_with_report(mut rep: Report, e: Error) -> Outcome {
    rep.line(format!("error: {e}"));
    rep.put("error", json!(e.to_string()));
    let mut out = rep.finish(error_code(&e));
    out.stderr = format!("error: {e}\n");
    out
}

/// Solves and returns the game to verify against with the full point, or
/// `None` when the solver found no certified optimum.
fn solve_inner(
    rep: &mut Report,
    game: &Game,
    form: SolveForm,
    opts: &SolveOptions,
) -> Result<Option<(Game, Vec<f64>)>, Error> {
    let lay = game.layout().clone();
    match form {
        SolveForm::Ae => {
            let g = game.with_formulation(Formulation::Ae)?;
            let report = rep.time("structure", || detect_potential(&g));
            require_structure(&report, "potential detection")?;
            rep.put("structure", structure_json(&report, &lay.names()));
            let inst = build_ae(&g, &report)?;
            let res = rep.time("solve", || solve_global(&inst, opts))?;
            Ok(report_solve(rep, &inst, &res).then(|| (g, res.point.clone())))
        }
        SolveForm::Quasi => {
            let report = rep.time("structure", || detect_quasi_potential(game));
            require_structure(&report, "quasi-potential detection")?;
            let qnames = VariableLayout::quasi(lay.m().to_vec(), lay.p()).names();
            rep.put("structure", structure_json(&report, &qnames));
            let inst = build_quasi(game, &report)?;
            let res = rep.time("solve", || solve_global(&inst, opts))?;
            if !report_solve(rep, &inst, &res) {
                return Ok(None);
            }
            rep.line(format!("quasi point: ({}) = {}", qnames.join(", "), vec_str(&res.point)));
            Ok(Some((game.clone(), expand_quasi(game, &res.point))))
        }
        SolveForm::Imp => {
            let report = rep.time("structure", || detect_implicit_potential(game))?;
            require_structure(&report, "implicit-potential detection")?;
            let xnames = VariableLayout::new(lay.m().to_vec(), 0).names();
            rep.put("structure", structure_json(&report, &xnames));
            let insts = build_imp(game, &report)?;
            let res = rep.time("solve", || solve_global_many(&insts, opts))?;
            let first = insts.first().ok_or_else(|| Error::Internal("no implicit pieces".into()))?;
            if !report_solve(rep, first, &res) {
                return Ok(None);
            }
            let x = &res.point[..lay.x_dim()];
            let ys = game.follower_solutions(&DVector::from_column_slice(x))?;
            let y = ys.first().ok_or_else(|| Error::Internal("follower has no solution".into()))?;
            let mut z = vec![0.0; lay.n()];
            z[..lay.x_dim()].copy_from_slice(x);
            for i in 0..lay.num_leaders() {
                for (k, v) in lay.y_range(i).enumerate() {
                    z[v] = y[k];
                }
            }
            Ok(Some((game.clone(), z)))
        }
    }
}


fn require_structure(r: &StructureReport, what: &str) -> Result<(), Error> {
    if r.kind == epec_core::structure::StructureKind::None {
        let mut msg = format!("{what} failed");
        if let Some(reason) = &r.reason {
            let _ = write!(msg, ": {reason}");
        }
        if let Some(w) = &r.witness {
            let _ = write!(msg, " ({})", w.detail);
        }
        return Err(Error::Precondition(msg));
    }
    Ok(())
}

/// Prints the solve result; true iff a certified optimum was found.
fn report_solve(rep: &mut Report, inst: &MpecInstance, res: &SolveResult) -> bool {
    rep.line(format!("status: {:?}", res.status).to_lowercase());
    rep.line(format!("value: {}", num(res.value)));
    rep.line(format!(
        "pieces: {} ({} certified), stationarity residual {}",
        res.log.len(),
        res.log.iter().filter(|p| p.certified).count(),
        num(res.stationarity_residual)
    ));
    rep.put("solve", solve_json(res, &inst.names));
    res.status == SolveStatus::Optimal
}

// ---- verify ------------------------------------------------------------------

struct VerifyRequest {
    mode: Mode,
    game_form: Option<GameForm>,
    eps: f64,
    radius: f64,
    expect: Option<String>,
    opts: SolveOptions,
    seed: u64,
}

fn cmd_verify(echo: &[String], game_path: &Path, point_path: &Path, req: &VerifyRequest) -> Outcome {
    let expect = match req.expect.as_deref().map(str::parse::<Claim>).transpose() {
        Ok(e) => e,
        Err(e) => return Outcome::fail(EXIT_USAGE, format!("error: --expect: {e}")),
    };
    let game = match load_game(game_path) {
        Ok(g) => g,
        Err(o) => return o,
    };
    let game = match req.game_form {
        None => game,
        Some(GameForm::Original) => match game.with_formulation(Formulation::Original) {
            Ok(g) => g,
            Err(e) => return from_error(e),
        },
        Some(GameForm::Ae) => match game.with_formulation(Formulation::Ae) {
            Ok(g) => g,
            Err(e) => return from_error(e),
        },
    };
    let lay = game.layout().clone();
    let point = match std::fs::read_to_string(point_path)
        .map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: cannot read {}: {e}", point_path.display())))
        .and_then(|t| {
            parse_point(&t).map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: {}: {e}", point_path.display())))
        })
        .and_then(|p| p.to_flat(&lay).map_err(|e| Outcome::fail(EXIT_USAGE, format!("error: {e}"))))
    {
        Ok(z) => z,
        Err(o) => return o,
    };
    let mut rep = Report::new(echo, &game);
    rep.put(
        "options",
        json!({
            "mode": format!("{:?}", req.mode).to_lowercase(),
            "eps": req.eps,
            "radius": req.radius,
            "solver": req.opts,
            "expect": req.expect,
        }),
    );
    rep.line(format!("point: {}", point_str(&lay, &point)));
    rep.put("point", json!(Point::from_flat(&lay, &point)));
    let certs = match rep.time("verify", || verify_inner(&game, &point, req)) {
        Ok(c) => c,
        Err(e) => return fail_with_report(rep, e),
    };
    for (label, c) in &certs {
        rep.line(format!("{label}:"));
        certificate_lines(&mut rep, &lay, c);
        if let (Some(m), true) = (&c.multipliers, c.leader_multipliers.is_empty()) {
            rep.line(format!("  eta: {:?}", m.eta));
            rep.line(format!("  lambda: {:?}", m.lambda));
            rep.line(format!("  beta: {:?}", m.beta));
        }
        for (i, m) in c.leader_multipliers.iter().enumerate() {
            rep.line(format!("  leader {}: beta {:?}", i + 1, m.beta));
        }
    }
    let extra = equality_multipliers(&game, &point, &certs);
    if let Some(bar) = &extra {
        rep.line(format!("equality multipliers (lambda_bar): {bar:?}"));
        rep.line(format!("bound multipliers on the positive set (mu_bar): {:?}", zero_like(bar)));
        rep.put("equality_multipliers", json!({"lambda_bar": bar, "mu_bar": zero_like(bar)}));
    }
    let claim = certs[0].1.claim;
    rep.put("claim", json!(claim));
    rep.put("certificates", json!(certs.iter().map(|(_, c)| c).collect::<Vec<_>>()));
    let code = match expect {
        Some(want) if want != claim => {
            rep.line(format!("expectation failed: wanted {want}, got {claim}"));
            EXIT_EXPECT
        }
        _ => EXIT_OK,
    };
    let mut out = rep.finish(code);
    if code == EXIT_EXPECT {
        out.stderr = format!("expected {}, got {claim}\n", expect.expect("set"));
    }
    out
}

fn zero_like(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    v.iter().map(|b| vec![0.0; b.len()]).collect()
}

fn ae_instance(game: &Game) -> Result<(Game, MpecInstance), Error> {
    let g = game.with_formulation(Formulation::Ae)?;
    let report = detect_potential(&g);
    require_structure(&report, "potential detection")?;
    let inst = build_ae(&g, &report)?;
    Ok((g, inst))
}

fn equality_multipliers(game: &Game, point: &[f64], certs: &[(String, Certificate)]) -> Option<Vec<Vec<f64>>> {
    let c = certs.iter().find(|(_, c)| c.claim == Claim::StrongStationary)?;
    let (_, inst) = ae_instance(game).ok()?;
    Some(c.1.multipliers.as_ref()?.equality_form(&inst, point))
}

fn verify_inner(game: &Game, point: &[f64], req: &VerifyRequest) -> Result<Vec<(String, Certificate)>, Error> {
    Ok(match req.mode {
        Mode::Global => vec![("global equilibrium".into(), verify_global(game, point, req.eps, &req.opts)?)],
        Mode::Local => vec![("local equilibrium".into(), verify_local(game, point, req.radius, &req.opts)?)],
        Mode::Bstat => vec![("Nash B-stationarity".into(), check_nash_b_stationary(game, point)?)],
        Mode::Strong => {
            let (g, inst) = ae_instance(game)?;
            let ss = check_strong_stationary(&inst, point)?;
            let mut out = vec![("strong stationarity of the potential problem".to_string(), ss.clone())];
            if ss.claim == Claim::StrongStationary {
                out.push(("multiplier transfer".into(), transfer_multipliers(&g, &inst, point, &ss)?));
            }
            out
        }
        Mode::SecondOrder => {
            let (_, inst) = ae_instance(game)?;
            let ss = check_strong_stationary(&inst, point)?;
            match &ss.multipliers {
                Some(m) if ss.claim == Claim::StrongStationary => {
                    let so = check_second_order_ss(&inst, point, m, req.seed)?;
                    vec![("second-order strong stationarity".into(), so), ("strong stationarity".into(), ss)]
                }
                _ => vec![("strong stationarity".into(), ss)],
            }
        }
        Mode::Shared => vec![("shared multiplier form".into(), check_shared_multiplier_form(game, point)?)],
    })
}
