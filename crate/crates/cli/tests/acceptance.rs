//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use epec_cli::{run, Outcome, EXIT_OK};
use epec_core::catalog::{cournot, pang_fukushima, CournotParams, PfVariant};
use epec_core::certify::{check_b_stationary, check_strong_stationary, transfer_multipliers, Claim};
use epec_core::lcp::lcp_solve;
use epec_core::mpec::{build_ae, build_quasi, solve_global, MpecInstance, SolveOptions, SolveStatus};
use epec_core::structure::{detect_potential, detect_quasi_potential, StructureKind};
use epec_core::{Formulation, Game, LeaderProblem, ParametricLcp, Polyhedron, Polynomial, VariableLayout};

// ---- pinned tolerances --------------------------------------------------------

const C1_X_TOL: f64 = 1e-6;
const C1_Y_TOL: f64 = 1e-6;
const C1_TIME: Duration = Duration::from_secs(10);
const C2_POINT_TOL: f64 = 1e-6;
const C2_VALUE_TOL: f64 = 1e-6;
const C2_GAP_TOL: f64 = 1e-6;
const C2_TIME: Duration = Duration::from_secs(2);
const C3_POINT_TOL: f64 = 1e-6;
const C3_VALUE_TOL: f64 = 1e-6;
const C3_TIME: Duration = Duration::from_secs(2);
const C4_GAP: f64 = 1.0;
const C4_GAP_TOL: f64 = 1e-6;
const C4_TIME: Duration = Duration::from_secs(2);
const C5_SAMPLES: usize = 1000;
const C5_PF_TOL: f64 = 1e-10;
const C5_COURNOT_TOL: f64 = 1e-8;
const C6_GAMES: usize = 100;
const C6_PAIRS: usize = 200;
const C6_IDENTITY_TOL: f64 = 1e-8;
const C6_PERTURBATION: f64 = 1e-3;
const C6_TIME: Duration = Duration::from_secs(30);
const C7_POINTS: usize = 100;
const C7_DESCENT: f64 = -1e-4;
const C8_LAMBDA_TOL: f64 = 1e-6;
const C8_RESIDUAL_TOL: f64 = 1e-8;
const C9_GAMES: usize = 50;
const C9_STEP: f64 = 1e-3;
const C9_TOL: f64 = 5e-3;
const C9_TIME: Duration = Duration::from_secs(60);
const C10_POINTS: usize = 10_000;

const COURNOT: [(f64, f64, f64, usize, usize); 3] =
    [(10.0, 1.0, 1.0, 3, 2), (1.0, 1.0, 1.0, 2, 1), (5.0, 0.5, 2.0, 4, 3)];

type Verdict = Result<String, String>;

fn main() {
    let criteria: Vec<(&str, fn() -> Verdict)> = vec![
        ("Cournot closed form", c1),
        ("shared-constraint example", c2),
        ("quasi-potential example", c3),
        ("non-equilibrium gap", c4),
        ("LCP oracle", c5),
        ("potential detection", c6),
        ("B-stationarity", c7),
        ("multiplier transfer", c8),
        ("global solver vs grid", c9),
        ("membership agreement", c10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("criterion {:>2} PASS  {name} ({secs:.2} s): {d}", k + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.2} s): {d}", k + 1);
            }
        }
    }
    println!("acceptance: {} of 10 criteria pass", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---- helpers ------------------------------------------------------------------

fn epec(args: &[&str]) -> Outcome {
    run(std::iter::once("epec").chain(args.iter().copied()))
}

fn write_example(dir: &Path, name: &str, args: &[String]) -> PathBuf {
    let path = dir.join(name);
    let mut full: Vec<&str> = vec!["example"];
    full.extend(args.iter().map(String::as_str));
    full.extend(["-o", path.to_str().unwrap()]);
    let out = epec(&full);
    assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
    path
}

fn cournot_file(dir: &Path, (a, b, c, nl, nf): (f64, f64, f64, usize, usize)) -> PathBuf {
    let args: Vec<String> = [
        "cournot", "--a", &a.to_string(), "--b", &b.to_string(), "--c", &c.to_string(),
        "--leaders", &nl.to_string(), "--followers", &nf.to_string(),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    write_example(dir, &format!("cournot_{a}_{b}_{c}_{nl}_{nf}.json"), &args)
}

fn pf_file(dir: &Path, variant: &str) -> PathBuf {
    write_example(dir, &format!("pf_{variant}.json"), &["pang-fukushima".into(), "--variant".into(), variant.into()])
}

fn flat(point: &Value) -> Vec<f64> {
    let mut out = Vec::new();
    for key in ["x", "y"] {
        for block in point[key].as_array().expect("point blocks") {
            out.extend(block.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()));
        }
    }
    out
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().expect("array").iter().map(|x| x.as_f64().unwrap()).collect()
}

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Timed `solve`; returns the parsed report.
fn solve_cmd(game: &Path, form: &str) -> (Value, Duration) {
    let t = Instant::now();
    let out = epec(&["solve", game.to_str().unwrap(), "--formulation", form]);
    let dt = t.elapsed();
    assert_eq!(out.code, EXIT_OK, "solve failed: {}{}", out.stderr, out.stdout);
    (out.json().expect("report"), dt)
}

fn cournot_game(t: (f64, f64, f64, usize, usize)) -> Game {
    cournot(&CournotParams { a: t.0, b: t.1, c: t.2, leaders: t.3, followers: t.4 }, false).unwrap()
}

fn ae_instance(game: &Game) -> MpecInstance {
    let g = game.with_formulation(Formulation::Ae).unwrap();
    build_ae(&g, &detect_potential(&g)).unwrap()
}

/// Follower output for total leader output `s`.
fn cournot_follower(a: f64, b: f64, c: f64, n: usize, s: f64) -> f64 {
    ((a - b * s) / (b * (n as f64 + 1.0) + c)).max(0.0)
}

/// Brute-force LCP by pattern enumeration; `None` unless exactly one solution.
fn brute_lcp(m: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let p = r.len();
    let mut found: Vec<DVector<f64>> = Vec::new();
    for mask in 0..(1usize << p) {
        let alpha: Vec<usize> = (0..p).filter(|&j| mask >> j & 1 == 1).collect();
        let mut y = DVector::zeros(p);
        if !alpha.is_empty() {
            let maa = DMatrix::from_fn(alpha.len(), alpha.len(), |i, j| m[(alpha[i], alpha[j])]);
            let ra = DVector::from_fn(alpha.len(), |i, _| -r[alpha[i]]);
            let sol = maa.lu().solve(&ra)?;
            for (k, &j) in alpha.iter().enumerate() {
                y[j] = sol[k];
            }
        }
        let w = m * &y + r;
        if y.iter().all(|&v| v >= -1e-12) && w.iter().all(|&v| v >= -1e-12)
            && !found.iter().any(|f| (f - &y).amax() < 1e-9)
        {
            found.push(y);
        }
    }
    (found.len() == 1).then(|| found.remove(0))
}

// ---- criteria -----------------------------------------------------------------

fn c1() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for t in COURNOT {
        let (a, b, c, nl, nf) = t;
        let n = nf as f64;
        let xhat = a * (b + c) / (b * (b + c) * (nl as f64 + 1.0) + c * (b + c) + b * c * n);
        let (rep, dt) = solve_cmd(&cournot_file(dir.path(), t), "ae");
        let z = flat(&rep["point"]);
        let (x, y) = z.split_at(nl);
        let symmetric = max_dev(x, &vec![x[0]; nl]) <= C1_X_TOL;
        let xerr = x.iter().map(|v| (v - xhat).abs()).fold(0.0, f64::max);
        let s: f64 = x.iter().sum();
        let yerr = y.iter().map(|v| (v - cournot_follower(a, b, c, nf, s)).abs()).fold(0.0, f64::max);
        let pass = symmetric && xerr <= C1_X_TOL && yerr <= C1_Y_TOL && dt <= C1_TIME;
        ok &= pass;
        lines.push(format!(
            "({a},{b},{c},{nl},{nf}) x={:.6} vs {:.6} |dx|={xerr:.2e} |dy|={yerr:.2e} {:.3}s",
            x[0],
            xhat,
            dt.as_secs_f64()
        ));
    }
    let d = lines.join("; ");
    if ok { Ok(d) } else { Err(d) }
}

fn c2() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (rep, dt) = solve_cmd(&pf_file(dir.path(), "shared"), "ae");
    let z = flat(&rep["point"]);
    let perr = max_dev(&z, &[0.0, 1.0, 0.0, 0.0]);
    let value = rep["solve"]["value"].as_f64().unwrap();
    let cert = &rep["certificates"][0];
    let gaps = floats(&cert["gaps"]);
    let pass = perr <= C2_POINT_TOL
        && (value + 0.5).abs() <= C2_VALUE_TOL
        && cert["claim"] == "global_eq"
        && gaps.iter().all(|&g| g <= C2_GAP_TOL)
        && dt <= C2_TIME;
    let d = format!("point err {perr:.2e}, value {value}, claim {}, gaps {gaps:?}, {:.3}s", cert["claim"], dt.as_secs_f64());
    if pass { Ok(d) } else { Err(d) }
}

fn c3() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let (rep, dt) = solve_cmd(&pf_file(dir.path(), "quasi-minus"), "quasi");
    let q = floats(&rep["solve"]["point"]);
    let qerr = max_dev(&q, &[0.0, 0.0, 1.0]);
    let value = rep["solve"]["value"].as_f64().unwrap();
    let eerr = max_dev(&flat(&rep["point"]), &[0.0, 0.0, 1.0, 1.0]);
    let cert = &rep["certificates"][0];
    let pass = qerr <= C3_POINT_TOL
        && eerr <= C3_POINT_TOL
        && (value + 1.0).abs() <= C3_VALUE_TOL
        && cert["claim"] == "global_eq"
        && dt <= C3_TIME;
    let d = format!(
        "(x1,x2,w) err {qerr:.2e}, expanded err {eerr:.2e}, value {value}, claim {}, {:.3}s",
        cert["claim"],
        dt.as_secs_f64()
    );
    if pass { Ok(d) } else { Err(d) }
}

fn c4() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let game = pf_file(dir.path(), "original");
    let pt = dir.path().join("p.json");
    std::fs::write(&pt, r#"{"x": [[0], [1]], "y": [[0], [0]]}"#).unwrap();
    let t = Instant::now();
    let out = epec(&["verify", game.to_str().unwrap(), "--point", pt.to_str().unwrap(), "--mode", "global", "--game-form", "original"]);
    let dt = t.elapsed();
    let rep = out.json().ok_or_else(|| out.stderr.clone())?;
    let cert = &rep["certificates"][0];
    let gap = cert["gaps"][1].as_f64().unwrap();
    let dev = cert["deviations"][0]["value"].as_f64();
    let pass = cert["claim"] == "not_global_eq" && (gap - C4_GAP).abs() <= C4_GAP_TOL && dt <= C4_TIME;
    let d = format!(
        "claim {}, leader-2 gap {gap} (required {C4_GAP}), best response value {dev:?}, {:.3}s",
        cert["claim"],
        dt.as_secs_f64()
    );
    if pass { Ok(d) } else { Err(d) }
}

fn c5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pf = pang_fukushima(PfVariant::Original);
    let mut worst_pf = 0.0f64;
    for _ in 0..C5_SAMPLES {
        let x = DVector::from_fn(2, |_, _| rng.gen_range(0.0..2.0));
        let sol = lcp_solve(pf.follower(), &x).map_err(|e| e.to_string())?;
        if sol.points.len() != 1 {
            return Err(format!("{} solutions at {x:?}", sol.points.len()));
        }
        worst_pf = worst_pf.max((sol.points[0][0] - (1.0 - x[0] - x[1]).max(0.0)).abs());
    }
    let mut worst_c = 0.0f64;
    let games: Vec<(Game, (f64, f64, f64, usize, usize))> = COURNOT
        .iter()
        .flat_map(|&t| {
            [false, true].map(|full| {
                (cournot(&CournotParams { a: t.0, b: t.1, c: t.2, leaders: t.3, followers: t.4 }, full).unwrap(), t)
            })
        })
        .collect();
    for k in 0..C5_SAMPLES {
        let (g, (a, b, c, nl, nf)) = &games[k % games.len()];
        // total output uniform on [0, a/b], split at random
        let s = rng.gen_range(0.0..=a / b);
        let w: Vec<f64> = (0..*nl).map(|_| rng.gen_range(0.01..1.0)).collect();
        let tot: f64 = w.iter().sum();
        let x = DVector::from_fn(*nl, |i, _| s * w[i] / tot);
        let sol = lcp_solve(g.follower(), &x).map_err(|e| e.to_string())?;
        if sol.points.len() != 1 {
            return Err(format!("{} Cournot solutions", sol.points.len()));
        }
        let want = cournot_follower(*a, *b, *c, *nf, s);
        worst_c = worst_c.max(sol.points[0].iter().map(|v| (v - want).abs()).fold(0.0, f64::max));
    }
    let d = format!("max error PF {worst_pf:.2e}, Cournot {worst_c:.2e}");
    if worst_pf <= C5_PF_TOL && worst_c <= C5_COURNOT_TOL { Ok(d) } else { Err(d) }
}

/// Random quadratic in `n` variables with coefficients in [−1, 1] over the
/// monomials `keep` admits.
fn random_quadratic(rng: &mut ChaCha8Rng, n: usize, keep: impl Fn(usize, usize) -> bool) -> Polynomial {
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i..n {
            if !keep(i, j) || rng.gen_bool(0.3) {
                continue;
            }
            let mut e = vec![0u32; n];
            e[i] += 1;
            e[j] += 1;
            terms.push((e, rng.gen_range(-1.0..1.0)));
        }
        if keep(i, i) {
            let mut e = vec![0u32; n];
            e[i] = 1;
            terms.push((e, rng.gen_range(-1.0..1.0)));
        }
    }
    Polynomial::from_terms(n, terms).unwrap()
}

/// Leader owning follower slot `k`, if `k` is a y variable.
fn y_owner(lay: &VariableLayout, k: usize) -> Option<usize> {
    (0..lay.num_leaders()).find(|&i| lay.y_range(i).contains(&k))
}

fn block(lay: &VariableLayout, i: usize) -> Vec<usize> {
    lay.x_range(i).chain(lay.y_range(i)).collect()
}

/// A leader's objective sees every x but only its own y, so a potential
/// can couple `y_j` with leader j's own variables only.
fn random_potential(rng: &mut ChaCha8Rng, lay: &VariableLayout) -> Polynomial {
    let admissible = |u: usize, v: usize| {
        let ok = |a: usize, b: usize| y_owner(lay, a).map_or(true, |j| block(lay, j).contains(&b));
        ok(u, v) && ok(v, u)
    };
    random_quadratic(rng, lay.n(), admissible)
}

fn random_follower(rng: &mut ChaCha8Rng, p: usize, nx: usize) -> ParametricLcp {
    // strictly diagonally dominant with positive diagonal, hence a P-matrix
    let m = DMatrix::from_fn(p, p, |i, j| if i == j { rng.gen_range(1.5..3.0) } else { rng.gen_range(-0.5..0.5) });
    let n = DMatrix::from_fn(p, nx, |_, _| rng.gen_range(-1.0..1.0));
    let q = DVector::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
    ParametricLcp::new(m, n, q).unwrap()
}

/// Game whose leader objectives are `π` without rivals' y terms, plus a
/// random quadratic in rivals' x.
fn potential_game(rng: &mut ChaCha8Rng, lay: &VariableLayout, pi: &Polynomial, unit_box: bool, form: Formulation) -> Game {
    let n = lay.n();
    let leaders = (0..lay.num_leaders())
        .map(|i| {
            let own = block(lay, i);
            let visible = |k: usize| y_owner(lay, k).map_or(true, |j| j == i);
            let mine = Polynomial::from_terms(
                n,
                pi.terms()
                    .filter(|(e, _)| e.iter().enumerate().all(|(k, &d)| d == 0 || visible(k)))
                    .map(|(e, c)| (e.to_vec(), c)),
            )
            .unwrap();
            let rival_x = |k: usize| !own.contains(&k) && y_owner(lay, k).is_none();
            let mi = lay.x_range(i).len();
            LeaderProblem {
                objective: &mine + &random_quadratic(rng, n, |u, v| rival_x(u) && rival_x(v)),
                x_set: if unit_box {
                    Polyhedron::boxed(&vec![0.0; mi], &vec![1.0; mi])
                } else {
                    Polyhedron::whole_space(mi)
                },
                y_set: Polyhedron::whole_space(lay.p()),
            }
        })
        .collect();
    let follower = random_follower(rng, lay.p(), lay.x_dim());
    Game::new(leaders, follower, form, lay.clone()).unwrap()
}

fn c6() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for g_idx in 0..C6_GAMES {
        let nl = rng.gen_range(2..=3);
        let m: Vec<usize> = (0..nl).map(|_| rng.gen_range(1..=2)).collect();
        let p = rng.gen_range(1..=2);
        let lay = VariableLayout::new(m, p);
        let n = lay.n();
        let pi = random_potential(&mut rng, &lay);
        let game = potential_game(&mut rng, &lay, &pi, false, Formulation::Original);
        let rep = detect_potential(&game);
        if rep.kind != StructureKind::Potential {
            return Err(format!("game {g_idx}: detected {:?}", rep.kind));
        }
        let found = rep.pi.as_ref().unwrap();
        for _ in 0..C6_PAIRS {
            let i = rng.gen_range(0..nl);
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut w = z.clone();
            for k in lay.x_range(i).chain(lay.y_range(i)) {
                w[k] = rng.gen_range(-2.0..2.0);
            }
            let phi = &game.leader(i).objective;
            let lhs = phi.eval(&z).unwrap() - phi.eval(&w).unwrap();
            let rhs = found.eval(&z).unwrap() - found.eval(&w).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
        // one cross coefficient of one leader, between its own variable and a rival's x
        let i = rng.gen_range(0..nl);
        let j = (i + rng.gen_range(1..nl)) % nl;
        let own = block(&lay, i);
        let rival: Vec<usize> = lay.x_range(j).collect();
        let a = own[rng.gen_range(0..own.len())];
        let b = rival[rng.gen_range(0..rival.len())];
        let mut e = vec![0u32; n];
        e[a] += 1;
        e[b] += 1;
        let mut leaders = game.leaders().to_vec();
        leaders[i].objective = &leaders[i].objective + &Polynomial::monomial(n, e, C6_PERTURBATION).unwrap();
        let bent = Game::new(leaders, game.follower().clone(), Formulation::Original, lay.clone()).unwrap();
        let rep = detect_potential(&bent);
        if rep.kind != StructureKind::None {
            return Err(format!("game {g_idx}: perturbation not detected"));
        }
        let wit = rep.witness.ok_or("no witness")?;
        let pair: HashSet<usize> = [wit.leaders.0, wit.leaders.1].into();
        let vars: HashSet<usize> = [wit.vars.0, wit.vars.1].into();
        if pair != [i, j].into() || vars != [a, b].into() {
            return Err(format!(
                "game {g_idx}: witness leaders {:?} vars {:?}, perturbed leader {i} vars ({a},{b})",
                wit.leaders, wit.vars
            ));
        }
    }
    let dt = t.elapsed();
    let d = format!("{C6_GAMES} games, identity error {worst:.2e}, witnesses correct, {:.2}s", dt.as_secs_f64());
    if worst <= C6_IDENTITY_TOL && dt <= C6_TIME { Ok(d) } else { Err(d) }
}

/// Feasible points of the potential problem with `y_k = ŷ(x)` for every k.
fn ae_point(game: &Game, x: &[f64]) -> Vec<f64> {
    let lay = game.layout();
    let y = lcp_solve(game.follower(), &DVector::from_column_slice(x)).unwrap().points.remove(0);
    let mut z = x.to_vec();
    for _ in 0..lay.num_leaders() {
        z.extend(y.iter());
    }
    z
}

/// Steepest one-sided slope of `π(x, ŷ(x))` along ±coordinate directions
/// that keep `x` in `[lo, hi]`, by forward differences.
fn reduced_slope(inst: &MpecInstance, game: &Game, x: &[f64], lo: f64, hi: f64) -> f64 {
    let h = 1e-7;
    let f0 = inst.value(&ae_point(game, x));
    let mut best = f64::INFINITY;
    for k in 0..x.len() {
        for s in [1.0, -1.0] {
            let v = x[k] + s * h;
            if v < lo || v > hi {
                continue;
            }
            let mut y = x.to_vec();
            y[k] = v;
            best = best.min((inst.value(&ae_point(game, &y)) - f0) / h);
        }
    }
    best
}

fn c7() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    // solver outputs of the first three criteria
    for t in COURNOT {
        let game = cournot_game(t);
        let inst = ae_instance(&game);
        let (rep, _) = solve_cmd(&cournot_file(dir.path(), t), "ae");
        let c = check_b_stationary(&inst, &flat(&rep["point"])).map_err(|e| e.to_string())?;
        if c.claim != Claim::BStationary {
            return Err(format!("Cournot {t:?} solve output: {}", c.claim));
        }
    }
    let shared = pang_fukushima(PfVariant::Shared);
    let (rep, _) = solve_cmd(&pf_file(dir.path(), "shared"), "ae");
    let c = check_b_stationary(&ae_instance(&shared), &flat(&rep["point"])).map_err(|e| e.to_string())?;
    if c.claim != Claim::BStationary {
        return Err(format!("shared solve output: {}", c.claim));
    }
    let minus = pang_fukushima(PfVariant::QuasiMinus);
    let qinst = build_quasi(&minus, &detect_quasi_potential(&minus)).unwrap();
    let (rep, _) = solve_cmd(&pf_file(dir.path(), "quasi-minus"), "quasi");
    let c = check_b_stationary(&qinst, &floats(&rep["solve"]["point"])).map_err(|e| e.to_string())?;
    if c.claim != Claim::BStationary {
        return Err(format!("quasi solve output: {}", c.claim));
    }
    notes.push("5 solver outputs B-stationary".to_string());

    // random feasible points with a finite-difference descent certificate
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let games: Vec<(Game, f64, f64)> = COURNOT
        .iter()
        .map(|&t| (cournot_game(t), 0.0, t.0 / t.1 / t.3 as f64))
        .chain(std::iter::once((shared.clone(), 0.0, 1.0)))
        .collect();
    let mut tested = 0;
    let mut worst = f64::NEG_INFINITY;
    while tested < C7_POINTS {
        let (game, lo, hi) = &games[tested % games.len()];
        let inst = ae_instance(game);
        let nx = game.layout().x_dim();
        let x: Vec<f64> = (0..nx).map(|_| rng.gen_range(*lo..*hi)).collect();
        if reduced_slope(&inst, game, &x, *lo, *hi) > -1e-3 {
            continue;
        }
        let z = ae_point(game, &x);
        let c = check_b_stationary(&inst, &z).map_err(|e| e.to_string())?;
        let value = c.residual.unwrap_or(0.0);
        let d = c.direction.clone().unwrap_or_default();
        if c.claim != Claim::NotBStationary || value > C7_DESCENT || d.is_empty() {
            return Err(format!("point {z:?}: {} with branch value {value}", c.claim));
        }
        // the direction must be a feasible descent direction
        let step = 1e-6;
        let moved: Vec<f64> = z.iter().zip(&d).map(|(p, q)| p + step * q).collect();
        if !inst.is_feasible(&moved, 1e-9) || inst.value(&moved) >= inst.value(&z) {
            return Err(format!("direction {d:?} at {z:?} is not a feasible descent direction"));
        }
        worst = worst.max(value);
        tested += 1;
    }
    notes.push(format!("{C7_POINTS} random points rejected, largest branch value {worst:.3e}"));
    Ok(notes.join("; "))
}

fn c8() -> Verdict {
    let mut lines = Vec::new();
    let mut ok = true;
    for t in COURNOT {
        let (_, b, _, nl, nf) = t;
        let game = cournot_game(t);
        let inst = ae_instance(&game);
        let res = solve_global(&inst, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let z = &res.point;
        let ss = check_strong_stationary(&inst, z).map_err(|e| e.to_string())?;
        if ss.claim != Claim::StrongStationary {
            ok = false;
            lines.push(format!("{t:?}: {}", ss.claim));
            continue;
        }
        let m = ss.multipliers.as_ref().unwrap();
        let bar = m.equality_form(&inst, z);
        let lerr = (0..nl).map(|i| (bar[i][0] + nf as f64 * b * z[i]).abs()).fold(0.0, f64::max);
        // bound multipliers of y on the positive set
        let merr = (0..nl).map(|i| if z[nl + i] > 0.0 { m.lambda[i][0].abs() } else { 0.0 }).fold(0.0, f64::max);
        let tr = transfer_multipliers(&game, &inst, z, &ss).map_err(|e| e.to_string())?;
        let res31 = tr.residual.unwrap();
        let pass = lerr <= C8_LAMBDA_TOL && merr <= C8_LAMBDA_TOL && res31 <= C8_RESIDUAL_TOL;
        ok &= pass;
        // reported only: the closed-form point of the first criterion
        let (a, c) = (t.0, t.2);
        let xhat = a * (b + c) / (b * (b + c) * (nl as f64 + 1.0) + c * (b + c) + b * c * nf as f64);
        let mut zh = vec![xhat; nl];
        zh.extend(vec![cournot_follower(a, b, c, nf, nl as f64 * xhat); nl]);
        let at_hat = check_strong_stationary(&inst, &zh).map(|c| c.claim.to_string()).unwrap_or_else(|e| e.to_string());
        lines.push(format!(
            "{t:?}: x*={:.6} lambda_bar err {lerr:.1e}, mu_bar {merr:.1e}, transfer residual {res31:.1e} \
             (closed-form point: {at_hat})",
            z[0]
        ));
    }
    let d = lines.join("; ");
    if ok { Ok(d) } else { Err(d) }
}

/// Grid minimum of `π(x, ŷ(x), …, ŷ(x))` over the unit box.
fn grid_minimum(game: &Game, pi: &Polynomial) -> f64 {
    let lay = game.layout();
    let nx = lay.x_dim();
    let f = game.follower();
    let steps = (1.0 / C9_STEP).round() as usize;
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; nx];
    let mut z = vec![0.0; lay.n()];
    loop {
        let x = DVector::from_fn(nx, |i, _| idx[i] as f64 * C9_STEP);
        let r = f.n() * &x + f.q();
        let y = brute_lcp(f.m(), &r).expect("P-matrix follower");
        z[..nx].copy_from_slice(x.as_slice());
        for i in 0..lay.num_leaders() {
            for (k, v) in lay.y_range(i).enumerate() {
                z[v] = y[k];
            }
        }
        best = best.min(pi.eval(&z).unwrap());
        let mut k = 0;
        loop {
            if k == nx {
                return best;
            }
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn c9() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for g_idx in 0..C9_GAMES {
        // decision dimension x + N·p at most 4
        let (m, p) = match g_idx % 4 {
            0 => (vec![1], 1),
            1 => (vec![2], 2),
            2 => (vec![1, 1], 1),
            _ => (vec![1], 2),
        };
        let lay = VariableLayout::new(m, p);
        let pi = random_potential(&mut rng, &lay);
        let game = potential_game(&mut rng, &lay, &pi, true, Formulation::Ae);
        let rep = detect_potential(&game);
        let inst = build_ae(&game, &rep).map_err(|e| e.to_string())?;
        let res = solve_global(&inst, &SolveOptions::default()).map_err(|e| e.to_string())?;
        if res.status != SolveStatus::Optimal {
            return Err(format!("game {g_idx}: status {:?}", res.status));
        }
        // the detected potential may differ from π by a constant
        let found = rep.pi.as_ref().unwrap();
        let zero = vec![0.0; lay.n()];
        let shift = pi.eval(&zero).unwrap() - found.eval(&zero).unwrap();
        let grid = grid_minimum(&game, &pi);
        let err = (res.value + shift - grid).abs();
        if err > C9_TOL {
            return Err(format!("game {g_idx}: solver {} vs grid {grid}", res.value + shift));
        }
        worst = worst.max(err);
    }
    let dt = t.elapsed();
    let d = format!("{C9_GAMES} games, max |solver - grid| {worst:.2e}, {:.2}s", dt.as_secs_f64());
    if dt <= C9_TIME { Ok(d) } else { Err(d) }
}

fn c10() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut games: Vec<Game> = PfVariant::ALL.iter().map(|&v| pang_fukushima(v)).collect();
    for t in COURNOT {
        games.push(cournot_game(t));
        games.push(cournot(&CournotParams { a: t.0, b: t.1, c: t.2, leaders: t.3, followers: t.4 }, true).unwrap());
    }
    let mut disagree = 0;
    let mut members = 0;
    for k in 0..C10_POINTS {
        let game = &games[k % games.len()];
        let original = game.with_formulation(Formulation::Original).unwrap();
        let ae = game.with_formulation(Formulation::Ae).unwrap();
        let lay = game.layout();
        let x: Vec<f64> = (0..lay.x_dim()).map(|_| rng.gen_range(-0.2..2.0)).collect();
        let yhat = lcp_solve(game.follower(), &DVector::from_column_slice(&x)).unwrap().points.remove(0);
        let mut z = x.clone();
        z.resize(lay.n(), 0.0);
        for i in 0..lay.num_leaders() {
            // each block is the follower response or a perturbation of it
            let off = rng.gen_bool(0.3);
            for (j, v) in lay.y_range(i).enumerate() {
                z[v] = yhat[j] + if off { rng.gen_range(-0.5..0.5) } else { 0.0 };
            }
        }
        let a = original.membership_f(&z);
        members += usize::from(a);
        if a != ae.membership_f(&z) {
            disagree += 1;
        }
    }
    let d = format!("{C10_POINTS} points over {} games, {members} members, {disagree} disagreements", games.len());
    if disagree == 0 { Ok(d) } else { Err(d) }
}
