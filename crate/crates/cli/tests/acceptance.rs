//! End-to-end acceptance run. Prints one line per criterion and fails
//! if any hard criterion fails; the timing-slope criterion is reported
//! only.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{planted_model, q, random_tree, rng};
use nondim_core::expr::{evaluate, gradient, normalize, parse_expr, Assignment, ExprDag, Symbol};
use nondim_core::linalg::{in_span, same_span};
use nondim_core::num::Rational;
use nondim_core::odesys::{parse_model, Model};
use nondim_core::reduce::{reduce_system, ReduceConfig};
use nondim_core::series::variational_series;
use nondim_core::symfind::{condition_rows, find_symmetries, Backend, FindConfig, Kind};
use rand::Rng;

type Outcome = Result<String, String>;

/// Name, check, and whether a failure fails the run.
type Criterion = (&'static str, fn() -> Outcome, bool);

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn model(name: &str) -> Model {
    let text = std::fs::read_to_string(root().join("models").join(name)).unwrap();
    parse_model(&text).unwrap()
}

fn ints(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| q(x)).collect()
}

fn fr(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn point(pairs: &[(&str, Rational)]) -> Assignment {
    pairs.iter().map(|(s, v)| (*s, v.clone())).collect()
}

fn cfg(seed: u64) -> FindConfig {
    FindConfig { seed, ..FindConfig::default() }
}

fn span(m: &Model, kind: Kind, config: &FindConfig) -> Vec<Vec<Rational>> {
    find_symmetries(m, kind, config).unwrap().rational_rows()
}

fn normal_form(d: &ExprDag) -> String {
    normalize(d).unwrap().to_string()
}

fn normal_text(text: &str, vars: &[&str]) -> String {
    normal_form(&parse_expr(text, vars).unwrap())
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let r = f()?;
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(format!("{r} in {took:.2?}"))
}

fn verhulst() -> Outcome {
    let m = model("verhulst.ode");
    ensure!(same_span(m.dim(), &span(&m, Kind::Translation, &cfg(1)), &[ints(&[0, 0, 1, 0, 1])]), "translation span");
    let r = reduce_system(&m, &[], &ReduceConfig { find: cfg(1), ..ReduceConfig::default() }).map_err(|e| e.to_string())?;
    ensure!(r.total_m == 3, "total_m = {}", r.total_m);
    ensure!(r.reduced.params().is_empty(), "parameters left: {:?}", r.reduced.params());
    let g = normal_form(&r.reduced.rhs()[0]);
    ensure!(g == normal_text("v_x - v_x^2", &["v_x"]), "reduced rhs {g}");
    ensure!(r.assumptions.iter().any(|a| a == "a - c != 0"), "assumptions {:?}", r.assumptions);
    ensure!(r.check.passed(), "check {:?}", r.check);
    Ok(format!("d/dv_t v_x = {g}, total_m = 3"))
}

fn murray() -> Outcome {
    let m = model("murray.ode");
    // the group t -> t/λ, n -> μn, p -> μp/ν, r -> λr, s -> λs, e -> μe,
    // h -> νh, k1 -> μk1, k2 -> λνk2 over (t, n, p, r, s, e, h, k1, k2)
    let k = [
        ints(&[-1, 0, 0, 1, 1, 0, 0, 0, 1]),
        ints(&[0, 1, 1, 0, 0, 1, 0, 1, 0]),
        ints(&[0, 0, -1, 0, 0, 0, 1, 0, 1]),
    ];
    ensure!(same_span(m.dim(), &span(&m, Kind::Scale, &cfg(2)), &k), "scale span differs from K");
    ensure!(span(&m, Kind::Translation, &cfg(2)).is_empty(), "unexpected translations");
    let prefer: Vec<Symbol> = ["r", "k1", "k2"].into_iter().map(Symbol::new).collect();
    let r = reduce_system(&m, &prefer, &ReduceConfig { find: cfg(2), ..ReduceConfig::default() }).map_err(|e| e.to_string())?;
    ensure!(r.total_m == 3 && r.check.passed(), "total_m {} check {:?}", r.total_m, r.check);
    // invariants against the closed forms at an exact point
    let p = point(&[
        ("t", q(5)),
        ("n", q(-3)),
        ("p", q(7)),
        ("r", q(4)),
        ("s", q(-9)),
        ("e", q(11)),
        ("h", q(6)),
        ("k1", q(-2)),
        ("k2", q(13)),
    ]);
    let v = |s: &str| p.get(&Symbol::new(s)).unwrap().clone();
    let expected = [
        ("t", v("r") * v("t")),
        ("n", v("n") / v("k1")),
        ("p", v("k2") * v("p") / (v("k1") * v("r"))),
        ("s", v("s") / v("r")),
        ("e", v("e") / v("k1")),
        ("h", v("r") * v("h") / v("k2")),
    ];
    let inv = &r.stages[0].invariants;
    for (s, want) in &expected {
        let got = inv.image_of(&Symbol::new(s)).and_then(|im| im.evaluate(&p));
        ensure!(got.as_ref() == Some(want), "invariant of {s}: {got:?} vs {want}");
    }
    let vars = ["v_n", "v_p", "v_s", "v_e", "v_h"];
    let names: Vec<&str> = r.reduced.params().iter().map(Symbol::as_str).collect();
    ensure!(names == ["v_s", "v_e", "v_h"], "parameters {names:?}");
    ensure!(normal_form(&r.reduced.rhs()[0]) == normal_text("(1 - v_n - v_p/(v_n + v_e))*v_n", &vars), "first equation");
    ensure!(normal_form(&r.reduced.rhs()[1]) == normal_text("(1 - v_h*v_p/v_n)*v_p*v_s", &vars), "second equation");
    Ok("K span, 6 invariants, reduced equations".into())
}

fn michaelis_menten() -> Outcome {
    let m = model("mm.ode");
    // (a) four specializations
    let specs = [(-2, 10, -2), (-4, -7, 1), (2, 8, -1), (4, -2, 1)];
    let want = [
        vec![q(5), fr(-5, 2), q(5), fr(-5, 2)],
        vec![fr(-28, 3), fr(112, 9), fr(-28, 3), fr(-28, 9)],
        vec![q(16), q(-32), q(16), q(16)],
        vec![fr(-8, 5), fr(32, 25), fr(-8, 5), fr(8, 25)],
    ];
    let mut rows = Vec::new();
    for ((x, k1, k2), w) in specs.iter().zip(&want) {
        let p = point(&[("t", q(1)), ("x", q(*x)), ("k1", q(*k1)), ("k2", q(*k2))]);
        let r = condition_rows(&m, Kind::Scale, &p).unwrap();
        ensure!(&r[0] == w, "row at x={x}: {:?}", r[0]);
        rows.push(r[0].clone());
    }
    // (b) kernel
    let expected = [ints(&[1, 1, 0, 1]), ints(&[-1, 0, 1, 0])];
    let mat = nondim_core::linalg::Matrix::from_rows(4, rows);
    ensure!(same_span(4, &mat.kernel(), &expected), "kernel of the 4x4 matrix");
    let pts = span(&m, Kind::Scale, &cfg(3));
    ensure!(same_span(4, &pts, &expected), "point-based span");
    // (c) series through t^4
    let p = point(&[("t", q(0)), ("x", q(3)), ("k1", q(7)), ("k2", q(2))]);
    let s = variational_series(&m, &p, 4).map_err(|e| e.to_string())?;
    let series = [
        (s.xi[0].coeffs(), vec![q(3), fr(21, 5), fr(147, 125), fr(-1372, 3125), fr(2401, 31250)]),
        (s.dxi_dtheta[0][0].coeffs(), vec![q(0), fr(3, 5), fr(42, 125), fr(-588, 3125), fr(686, 15625)]),
        (s.dxi_dtheta[0][1].coeffs(), vec![q(0), fr(-21, 25), fr(-147, 1250), fr(1029, 3125), fr(-69629, 312500)]),
        (s.dxi_dx[0][0].coeffs(), vec![q(1), fr(14, 25), fr(-196, 625), fr(686, 9375), fr(16807, 234375)]),
    ];
    for (k, (got, want)) in series.iter().enumerate() {
        ensure!(*got == &want[..], "series {k}: {got:?}");
    }
    // (d) jets
    let jets = span(&m, Kind::Scale, &FindConfig { backend: Backend::Series, ..cfg(3) });
    ensure!(same_span(4, &jets, &pts), "jet span differs");
    // (e) reduction
    let r = reduce_system(&m, &[], &ReduceConfig { find: cfg(3), ..ReduceConfig::default() }).map_err(|e| e.to_string())?;
    ensure!(r.reduced.params().is_empty() && r.check.passed(), "reduction");
    let g = normal_form(&r.reduced.rhs()[0]);
    ensure!(g == normal_text("v_x/(1 + v_x)", &["v_x"]), "reduced rhs {g}");
    Ok("rows, kernel, series, jets, d/dv_t v_x = v_x/(1 + v_x)".into())
}

fn cli(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_nondim")).args(args).current_dir(root()).output().unwrap();
    (out.status.code(), out.stdout)
}

fn fitzhugh() -> Outcome {
    for kind in ["scale", "translation"] {
        let (code, _) = cli(&["symmetries", "models/fitzhugh.ode", "--kind", kind, "--seed", "4"]);
        ensure!(code == Some(3), "--kind {kind}: exit {code:?}");
    }
    Ok("exit 3 for both kinds".into())
}

fn gradient_bound() -> Outcome {
    const NAMES: [&str; 4] = ["x", "y", "z", "w"];
    let mut worst = 0i64;
    for f in ["verhulst.ode", "murray.ode", "mm.ode", "fitzhugh.ode"] {
        let m = model(f);
        let mut r = rng(5);
        for rhs in m.rhs() {
            for _ in 0..10 {
                let p: Assignment = m.coordinates().into_iter().map(|s| (s, q(r.random_range(1..=50)))).collect();
                let Ok(g) = gradient(rhs, &p) else { continue };
                ensure!(g.ops <= 5 * rhs.len() + 8, "{f}: {} ops for L = {}", g.ops, rhs.len());
                worst = worst.max(g.ops as i64 - 5 * rhs.len() as i64);
            }
        }
    }
    let mut r = rng(6);
    let mut pairs = 0;
    while pairs < 100 {
        let t = random_tree(&mut r, NAMES.len(), 6);
        let v: Vec<Rational> = (0..NAMES.len()).map(|_| q(r.random_range(-30..=30))).collect();
        let Some(value) = t.eval(&v) else { continue };
        let d = parse_expr(&t.text(&NAMES), &NAMES).unwrap();
        let p: Assignment = NAMES.iter().zip(&v).map(|(s, x)| (*s, x.clone())).collect();
        let g = gradient(&d, &p).map_err(|e| e.to_string())?;
        ensure!(g.value == value && evaluate(&d, &p).unwrap() == value, "value mismatch");
        ensure!(g.ops <= 5 * d.len() + 8, "{} ops for L = {}", g.ops, d.len());
        for (k, s) in NAMES.iter().enumerate() {
            ensure!(g.partial(&Symbol::new(s)) == t.diff(k).eval(&v).unwrap(), "d/d{s} of {}", t.text(&NAMES));
        }
        worst = worst.max(g.ops as i64 - 5 * d.len() as i64);
        pairs += 1;
    }
    Ok(format!("100 oracle pairs exact, max ops - 5L = {worst}"))
}

fn planted() -> Outcome {
    timed(Duration::from_secs(30), || {
        let mut r = rng(2024);
        let mut hits = 0;
        for case in 0..100u64 {
            let n = r.random_range(1..=3);
            let l = r.random_range(1..=5);
            let p = planted_model(&mut r, n, l);
            let m = parse_model(&p.text).unwrap();
            if in_span(m.dim(), &span(&m, Kind::Scale, &cfg(case)), &ints(&p.weights)) {
                hits += 1;
            }
            let red = reduce_system(&m, &[], &ReduceConfig { find: cfg(case), ..ReduceConfig::default() })
                .map_err(|e| format!("case {case}: {e}"))?;
            ensure!(red.check.passed(), "case {case}: check failed {:?}", red.check);
        }
        ensure!(hits >= 99, "planted generator found in {hits}/100");
        Ok(format!("{hits}/100 planted generators found, all checks pass"))
    })
}

/// k1*x/(k2 + x) times a sum of `terms` weight-zero factors.
fn ladder_model(terms: usize) -> Model {
    let sum: Vec<String> = (1..=terms).map(|i| format!("(x + {i}*k2)*(x - {i}*k2)/(k2*k2)")).collect();
    parse_model(&format!("state x; param k1, k2; d/dt x = k1*x/(k2 + x)*({});", sum.join(" + "))).unwrap()
}

fn complexity() -> Outcome {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for terms in [16, 32, 64, 128, 256] {
        let m = ladder_model(terms);
        let mut best = Duration::MAX;
        for rep in 0..3 {
            let start = Instant::now();
            let b = find_symmetries(&m, Kind::Scale, &cfg(rep)).map_err(|e| e.to_string())?;
            best = best.min(start.elapsed());
            ensure!(b.m() == 2, "ladder model lost its symmetries");
        }
        xs.push((m.length() as f64).ln());
        ys.push(best.as_secs_f64().ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let msg = format!("log-log slope {slope:.2} over L = {}..{}", ladder_model(16).length(), ladder_model(256).length());
    if (0.8..=1.3).contains(&slope) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Outcome {
    let mut runs = 0;
    for f in ["verhulst", "murray", "mm", "fitzhugh"] {
        let file = format!("models/{f}.ode");
        let cases: [Vec<&str>; 3] = [
            vec!["symmetries", &file, "--kind", "both", "--seed", "42"],
            vec!["reduce", &file, "--check", "--seed", "42"],
            vec!["reduce", &file, "--check", "--json", "--seed", "42"],
        ];
        for args in &cases {
            let a = cli(args);
            let b = cli(args);
            ensure!(a == b, "{} differs between runs", args.join(" "));
            runs += 1;
        }
    }
    Ok(format!("{runs} command lines byte-identical across two runs"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 verhulst", || timed(Duration::from_secs(1), verhulst), true),
        ("2 murray", || timed(Duration::from_secs(1), murray), true),
        ("3 michaelis-menten", || timed(Duration::from_secs(1), michaelis_menten), true),
        ("4 fitzhugh-nagumo negative control", fitzhugh, true),
        ("5 gradient bound and oracle", gradient_bound, true),
        ("6 planted symmetries", planted, true),
        ("7 complexity slope (reported)", complexity, false),
        ("8 determinism", determinism, true),
    ];
    let mut failed = 0;
    for (name, run, hard) in criteria {
        let (verdict, detail) = match run() {
            Ok(d) => ("PASS", d),
            Err(d) if hard => {
                failed += 1;
                ("FAIL", d)
            }
            Err(d) => ("OUT OF RANGE", d),
        };
        println!("criterion {name}: {verdict} ({detail})");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
