//! Translation-then-scale reduction of a model to invariant coordinates,
//! with an exact check of every stage.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::expr::{evaluate, normalize, substitute, Assignment, ExprDag, Symbol};
use crate::invar::{invariants, parameter_independent, Image, InvarError, InvariantSet};
use crate::num::Rational;
use crate::odesys::{Model, ModelError};
use crate::symfind::{find_symmetries, pole_free, FindConfig, Kind, Sampler, SymError, SymmetryBasis};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error(transparent)]
    Symmetry(#[from] SymError),
    #[error(transparent)]
    Invariants(#[from] InvarError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug)]
pub struct ReduceConfig {
    pub find: FindConfig,
    /// Prefix for renamed invariant coordinates.
    pub prefix: String,
    /// Points per check.
    pub trials: usize,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig { find: FindConfig::default(), prefix: "v_".into(), trials: 16 }
    }
}

#[derive(Clone, Debug)]
pub struct Stage {
    /// Everything find_symmetries returned.
    pub found: SymmetryBasis,
    /// Generators used for the normalization.
    pub basis: SymmetryBasis,
    pub invariants: InvariantSet,
    pub input: Model,
    pub output: Model,
    /// Input coordinate -> output symbol, for every coordinate that is not
    /// a pivot.
    pub renamed: Vec<(Symbol, Symbol)>,
    /// Each new coordinate written in the original coordinates.
    pub definitions: Vec<(Symbol, String)>,
}

impl Stage {
    pub fn kind(&self) -> Kind {
        self.basis.kind
    }

    pub fn m(&self) -> usize {
        self.basis.m()
    }

    fn new_name(&self, s: &Symbol) -> Option<&Symbol> {
        self.renamed.iter().find(|(a, _)| a == s).map(|(_, b)| b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckReport {
    pub chain_rule: bool,
    pub invariance: bool,
    pub trials: usize,
    pub witness: Option<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.chain_rule && self.invariance
    }
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub original: Model,
    pub stages: Vec<Stage>,
    pub reduced: Model,
    /// Normalized parameters, written in the original coordinates.
    pub eliminated: Vec<String>,
    pub assumptions: Vec<String>,
    pub total_m: usize,
    pub check: CheckReport,
}

/// Runs the translation stage, then the scale stage, and checks the
/// result.
pub fn reduce_system(model: &Model, prefer: &[Symbol], config: &ReduceConfig) -> Result<ReductionResult, ReduceError> {
    // what each current symbol stands for in the original coordinates
    let mut origin: BTreeMap<Symbol, String> = model.coordinates().into_iter().map(|s| (s.clone(), s.to_string())).collect();
    let mut root: BTreeMap<Symbol, Symbol> = model.coordinates().into_iter().map(|s| (s.clone(), s)).collect();
    let mut current = model.clone();
    let mut stages = Vec::new();
    let mut eliminated = Vec::new();
    let mut assumptions = Vec::new();

    for (k, kind) in [Kind::Translation, Kind::Scale].into_iter().enumerate() {
        let find = FindConfig { seed: config.find.seed.wrapping_add(k as u64), ..config.find.clone() };
        let found = find_symmetries(&current, kind, &find)?;
        if found.m() == 0 {
            continue;
        }
        let basis = parameter_independent(&current, &found);
        if basis.m() == 0 {
            continue;
        }
        let preferred: Vec<Symbol> = prefer
            .iter()
            .flat_map(|p| current.params().iter().filter(|s| root.get(*s) == Some(p)).cloned().collect::<Vec<_>>())
            .collect();
        let inv = invariants(&current, &basis, &preferred)?;
        let (output, renamed) = apply(&current, &inv, &config.prefix)?;

        for p in &inv.pivots {
            eliminated.push(origin[p].clone());
        }
        if kind == Kind::Scale {
            for p in &inv.pivots {
                assumptions.push(format!("{} != 0", origin[p]));
            }
            for (s, _) in inv.root_degrees() {
                if current.is_param(&s) {
                    assumptions.push(format!("{} > 0", origin[&s]));
                }
            }
        }
        let mut next_origin = BTreeMap::new();
        let mut next_root = BTreeMap::new();
        let mut definitions = Vec::new();
        for (old, new) in &renamed {
            let image = inv.image_of(old).expect("coordinate");
            let shown = if image.is_identity_of(old) { origin[old].clone() } else { in_original(image, &origin) };
            if !image.is_identity_of(old) {
                definitions.push((new.clone(), shown.clone()));
            }
            next_origin.insert(new.clone(), shown);
            next_root.insert(new.clone(), root[old].clone());
        }
        origin = next_origin;
        root = next_root;
        stages.push(Stage { found, basis, invariants: inv, input: current, output: output.clone(), renamed, definitions });
        current = output;
    }

    let total_m = stages.iter().map(Stage::m).sum();
    let mut result = ReductionResult {
        original: model.clone(),
        stages,
        reduced: current,
        eliminated,
        assumptions,
        total_m,
        check: CheckReport { chain_rule: true, invariance: true, trials: 0, witness: None },
    };
    let mut sampler = Sampler::new(config.find.seed ^ 0x9e37_79b9_7f4a_7c15, config.find.bound, config.find.retries);
    result.check = check_reduction(model, &result, &mut sampler, config.trials);
    Ok(result)
}

/// Rewrites a stage image with the original-coordinate meaning of each
/// symbol.
fn in_original(image: &Image, origin: &BTreeMap<Symbol, String>) -> String {
    let simple = image.terms().iter().all(|(s, _)| origin[s] == s.as_str());
    if simple {
        return image.to_string();
    }
    let wrap = |s: &Symbol| {
        let o = &origin[s];
        if o.chars().all(|c| c.is_alphanumeric() || c == '_') {
            o.clone()
        } else {
            format!("({o})")
        }
    };
    let placeholders: Vec<(Symbol, Rational)> =
        image.terms().iter().map(|(s, e)| (Symbol::new(&wrap(s)), e.clone())).collect();
    match image {
        Image::Monomial(_) => Image::Monomial(placeholders).to_string(),
        Image::Linear(_) => Image::Linear(placeholders).to_string(),
    }
}

fn fresh(prefix: &str, s: &Symbol, taken: &mut BTreeSet<Symbol>) -> Symbol {
    let mut name = format!("{prefix}{s}");
    while taken.contains(&Symbol::new(&name)) {
        name.push('_');
    }
    let sym = Symbol::new(&name);
    taken.insert(sym.clone());
    sym
}

/// Builds the stage output: pivots become 1 (scale) or 0 (translation)
/// and every other coordinate is replaced by its invariant. By the
/// symmetry identity this already carries the dt/d𝔱 rescaling.
fn apply(model: &Model, inv: &InvariantSet, prefix: &str) -> Result<(Model, Vec<(Symbol, Symbol)>), ModelError> {
    let mut taken: BTreeSet<Symbol> = model.coordinates().into_iter().collect();
    let mut renamed = Vec::new();
    let mut map: BTreeMap<Symbol, ExprDag> = BTreeMap::new();
    let unit = match inv.kind {
        Kind::Scale => ExprDag::constant(Rational::one()),
        Kind::Translation => ExprDag::constant(Rational::zero()),
    };
    for (y, image) in inv.coordinates.iter().zip(&inv.images) {
        if inv.pivots.contains(y) {
            map.insert(y.clone(), unit.clone());
            continue;
        }
        let new = if image.is_identity_of(y) { y.clone() } else { fresh(prefix, y, &mut taken) };
        map.insert(y.clone(), ExprDag::var(new.clone()));
        renamed.push((y.clone(), new));
    }
    let name_of = |s: &Symbol| renamed.iter().find(|(a, _)| a == s).map(|(_, b)| b.clone()).expect("non-pivot");
    let rhs = model
        .rhs()
        .iter()
        .map(|f| {
            let g = substitute(f, &map);
            match normalize(&g) {
                Ok(rf) => rf.to_dag(),
                Err(_) => g,
            }
        })
        .collect();
    let params = model.params().iter().filter(|p| !inv.pivots.contains(p)).map(&name_of).collect();
    let out = Model::new(
        model.name(),
        name_of(model.time()),
        model.states().iter().map(&name_of).collect(),
        params,
        rhs,
    )?;
    Ok((out, renamed))
}

/// d/dt of an image along the flow, with ṫ = 1, ẋ = F and constant
/// parameters.
fn flow_derivative(model: &Model, image: &Image, p: &Assignment, velocity: &BTreeMap<Symbol, Rational>) -> Option<Rational> {
    let rate = |s: &Symbol| -> Rational {
        if s == model.time() {
            Rational::one()
        } else {
            velocity.get(s).cloned().unwrap_or_else(Rational::zero)
        }
    };
    match image {
        Image::Monomial(t) => {
            let v = image.evaluate(p)?;
            let mut acc = Rational::zero();
            for (s, e) in t {
                acc += e * rate(s) / p.get(s)?;
            }
            Some(v * acc)
        }
        Image::Linear(t) => Some(t.iter().fold(Rational::zero(), |acc, (s, c)| acc + c * rate(s))),
    }
}

/// Moves `p` by a random element of the stage group.
fn move_point<R: Rng>(stage: &Stage, p: &Assignment, q: u32, rng: &mut R) -> Assignment {
    let coords = &stage.basis.coordinates;
    let lambdas: Vec<Rational> = stage
        .basis
        .generators
        .iter()
        .map(|_| match stage.kind() {
            Kind::Scale => Rational::from_integer(num_traits::pow(BigInt::from(rng.random_range(2u32..=3)), q as usize)),
            Kind::Translation => Rational::from_integer(BigInt::from(rng.random_range(-9i64..=9))),
        })
        .collect();
    coords
        .iter()
        .enumerate()
        .map(|(yi, y)| {
            let mut v = p.get(y).cloned().unwrap_or_else(Rational::zero);
            for (g, lam) in stage.basis.generators.iter().zip(&lambdas) {
                let a = g.alpha[yi].to_i32().expect("small exponent");
                match stage.kind() {
                    Kind::Scale => v *= num_traits::pow::Pow::pow(lam, a),
                    Kind::Translation => v += lam * Rational::from_integer(g.alpha[yi].clone()),
                }
            }
            (y.clone(), v)
        })
        .collect()
}

fn images_at(stage: &Stage, p: &Assignment) -> Option<Assignment> {
    let mut out = Assignment::new();
    for (old, new) in &stage.renamed {
        out.insert(new.clone(), stage.invariants.image_of(old)?.evaluate(p)?);
    }
    Some(out)
}

fn rhs_at(model: &Model, p: &Assignment) -> Option<Vec<Rational>> {
    model.rhs().iter().map(|f| evaluate(f, p).ok()).collect()
}

/// Exact per-stage checks: (a) d/dt of every state invariant equals the
/// time factor times the reduced right-hand side at the invariants;
/// (b) invariants and reduced right-hand sides do not change when the
/// point is moved along the group. The last stage is checked against
/// `result.reduced`.
pub fn check_reduction(original: &Model, result: &ReductionResult, sampler: &mut Sampler, trials: usize) -> CheckReport {
    let mut report = CheckReport { chain_rule: true, invariance: true, trials, witness: None };
    let last = result.stages.len().saturating_sub(1);
    for (si, stage) in result.stages.iter().enumerate() {
        let input = if si == 0 { original } else { &stage.input };
        let output = if si == last { &result.reduced } else { &stage.output };
        let degrees: BTreeMap<Symbol, u32> = stage.invariants.root_degrees().into_iter().collect();
        let q = degrees.values().copied().fold(1, num_integer::lcm);
        let coords = input.coordinates();
        for _ in 0..trials {
            let mut rng = sampler.next_rng();
            let accept = |p: &Assignment| {
                pole_free(input, p) && images_at(stage, p).is_some_and(|im| pole_free(output, &im))
            };
            let Ok(p) = sampler.point_where(&coords, &degrees, accept) else {
                report.chain_rule = false;
                report.witness = Some(format!("stage {} ({}): no admissible point found", si + 1, stage.kind()));
                return report;
            };
            let images = images_at(stage, &p).expect("accepted");
            let f = rhs_at(input, &p).expect("accepted");
            let g = rhs_at(output, &images).expect("accepted");
            let velocity: BTreeMap<Symbol, Rational> = input.states().iter().cloned().zip(f.iter().cloned()).collect();
            let t_image = stage.invariants.image_of(input.time()).expect("time");
            let pt = flow_derivative(input, t_image, &p, &velocity).expect("accepted");
            for x in input.states() {
                let lhs = flow_derivative(input, stage.invariants.image_of(x).expect("state"), &p, &velocity).expect("accepted");
                let out_index = output.states().iter().position(|s| Some(s) == stage.new_name(x)).expect("state kept");
                if lhs != &pt * &g[out_index] {
                    report.chain_rule = false;
                    report.witness = Some(format!(
                        "stage {} ({}), d/dt of {}: {} vs {} at {}",
                        si + 1,
                        stage.kind(),
                        x,
                        lhs,
                        &pt * &g[out_index],
                        p
                    ));
                    return report;
                }
            }
            // group motion; a moved point may hit a pole, then try another
            let moved = (0..8).map(|_| move_point(stage, &p, q, &mut rng)).find(|m| accept(m));
            if let Some(mp) = moved {
                let images2 = images_at(stage, &mp).expect("accepted");
                let g2 = rhs_at(output, &images2).expect("accepted");
                if images2 != images || g2 != g {
                    report.invariance = false;
                    report.witness = Some(format!("stage {} ({}): not invariant between {} and {}", si + 1, stage.kind(), p, mp));
                    return report;
                }
            }
        }
    }
    report
}

fn generator_json(a: &BigInt) -> Value {
    match a.to_i64() {
        Some(v) => json!(v),
        None => json!(a.to_string()),
    }
}

/// Machine-readable summary of a reduction.
pub fn report_json(result: &ReductionResult) -> Value {
    let verdict = |ok: bool| if ok { "pass" } else { "fail" };
    let stages: Vec<Value> = result
        .stages
        .iter()
        .map(|s| {
            let invariants: Vec<Value> = s
                .renamed
                .iter()
                .map(|(old, new)| {
                    let mut v = json!({"name": new.as_str(), "expr": s.invariants.image_of(old).expect("coordinate").to_string()});
                    if let Some((_, d)) = s.definitions.iter().find(|(n, _)| n == new) {
                        v["original"] = json!(d);
                    }
                    v
                })
                .collect();
            json!({
                "kind": s.kind().to_string(),
                "m": s.m(),
                "coordinates": s.basis.coordinates.iter().map(Symbol::as_str).collect::<Vec<_>>(),
                "generators": s.basis.generators.iter().map(|g| g.alpha.iter().map(generator_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "pivots": s.invariants.pivots.iter().map(Symbol::as_str).collect::<Vec<_>>(),
                "invariants": invariants,
            })
        })
        .collect();
    let mut checks = json!({
        "chain_rule": verdict(result.check.chain_rule),
        "invariance": verdict(result.check.invariance),
    });
    if let Some(w) = &result.check.witness {
        checks["witness"] = json!(w);
    }
    json!({
        "model": result.original.name(),
        "stages": stages,
        "reduced_model_text": result.reduced.render(),
        "eliminated": result.eliminated,
        "total_m": result.total_m,
        "assumptions": result.assumptions,
        "checks": checks,
    })
}

/// Replaces one right-hand side; used to build negative controls.
pub fn with_rhs(model: &Model, state: usize, f: ExprDag) -> Result<Model, ModelError> {
    let mut rhs = model.rhs().to_vec();
    rhs[state] = f;
    Model::new(model.name(), model.time().clone(), model.states().to_vec(), model.params().to_vec(), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::odesys::parse_model;

    fn syms(names: &[&str]) -> Vec<Symbol> {
        names.iter().map(|&s| Symbol::from(s)).collect()
    }

    fn normal(dag: &ExprDag) -> String {
        normalize(dag).unwrap().to_string()
    }

    fn normal_text(text: &str, vars: &[&str]) -> String {
        normal(&parse_expr(text, &syms(vars)).unwrap())
    }

    const VERHULST: &str = "model verhulst; state x; param a, b, c; d/dt x = x*(a - b*x) - c*x;";
    const MURRAY: &str = "model murray; state n, p; param r, s, e, h, k1, k2;
        d/dt n = ((1 - n/k1)*r - k2*p/(n + e))*n;
        d/dt p = (1 - h*p/n)*p*s;";

    #[test]
    fn verhulst() {
        let m = parse_model(VERHULST).unwrap();
        let r = reduce_system(&m, &[], &ReduceConfig::default()).unwrap();
        assert_eq!(r.total_m, 3);
        assert_eq!(r.stages.len(), 2);
        assert!(r.reduced.params().is_empty());
        assert_eq!(normal(&r.reduced.rhs()[0]), normal_text("v_x - v_x^2", &["v_x"]));
        assert!(r.assumptions.contains(&"a - c != 0".to_string()), "{:?}", r.assumptions);
        assert!(r.check.passed(), "{:?}", r.check);
    }

    #[test]
    fn murray_preferred() {
        let m = parse_model(MURRAY).unwrap();
        let r = reduce_system(&m, &syms(&["r", "k1", "k2"]), &ReduceConfig::default()).unwrap();
        assert_eq!(r.total_m, 3);
        assert_eq!(r.stages.len(), 1);
        let st = &r.stages[0];
        assert_eq!(st.invariants.pivots, syms(&["r", "k1", "k2"]));
        let shown: BTreeMap<String, String> = st
            .renamed
            .iter()
            .map(|(o, n)| (n.to_string(), st.invariants.image_of(o).unwrap().to_string()))
            .collect();
        assert_eq!(shown["v_t"], "t*r");
        assert_eq!(shown["v_n"], "n/k1");
        assert_eq!(shown["v_p"], "p*k2/(r*k1)");
        assert_eq!(shown["v_s"], "s/r");
        assert_eq!(shown["v_e"], "e/k1");
        assert_eq!(shown["v_h"], "r*h/k2");
        let vars = ["v_n", "v_p", "v_s", "v_e", "v_h"];
        assert_eq!(normal(&r.reduced.rhs()[0]), normal_text("(1 - v_n - v_p/(v_n + v_e))*v_n", &vars));
        assert_eq!(normal(&r.reduced.rhs()[1]), normal_text("(1 - v_h*v_p/v_n)*v_p*v_s", &vars));
        assert_eq!(r.reduced.params(), &syms(&["v_s", "v_e", "v_h"])[..]);
        assert!(r.check.passed());
    }

    #[test]
    fn michaelis_menten() {
        let m = parse_model("state x; param k1, k2; d/dt x = k1*x/(k2+x);").unwrap();
        let r = reduce_system(&m, &[], &ReduceConfig::default()).unwrap();
        assert!(r.reduced.params().is_empty());
        assert_eq!(normal(&r.reduced.rhs()[0]), normal_text("v_x/(1 + v_x)", &["v_x"]));
        assert!(r.check.passed());
    }

    #[test]
    fn corrupted_rhs_fails() {
        let m = parse_model(VERHULST).unwrap();
        let mut r = reduce_system(&m, &[], &ReduceConfig::default()).unwrap();
        let bad = parse_expr("v_x*(1 + v_x)", &syms(&["v_x"])).unwrap();
        r.reduced = with_rhs(&r.reduced, 0, bad).unwrap();
        let mut sampler = Sampler::new(5, 1000, 64);
        let rep = check_reduction(&m, &r, &mut sampler, 16);
        assert!(!rep.chain_rule);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn no_symmetry_leaves_model() {
        let m = parse_model("state x, y; param a, b, c, d;
            d/dt x = c*(x - x^3/3 - y + d); d/dt y = (x + a - b*y)/c;")
        .unwrap();
        let r = reduce_system(&m, &[], &ReduceConfig::default()).unwrap();
        assert_eq!(r.total_m, 0);
        assert_eq!(r.reduced, m);
        assert!(r.check.passed());
    }

    #[test]
    fn report_shape() {
        let m = parse_model(VERHULST).unwrap();
        let r = reduce_system(&m, &[], &ReduceConfig::default()).unwrap();
        let v = report_json(&r);
        assert_eq!(v["model"], "verhulst");
        assert_eq!(v["stages"][0]["kind"], "translation");
        assert_eq!(v["stages"][0]["generators"], json!([[0, 0, 1, 0, 1]]));
        assert_eq!(v["checks"]["chain_rule"], "pass");
    }
}
