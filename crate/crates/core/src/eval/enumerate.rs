//! Deterministic enumeration and random sampling of sort-correct formulas.

use std::collections::HashSet;
use std::rc::Rc;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::real::Rational;
use crate::sigform::formula::mentions;
use crate::sigform::{BinOp, Expr, Formula, Quantifier, Signature, SortId, Term};

type Vars = Rc<Vec<(String, SortId)>>;
type Exprs = Box<dyn Iterator<Item = Expr>>;

/// Terms of depth at most 1 over `vars`, with their sorts. Parametric families are skipped.
fn terms(sig: &Signature, vars: &[(String, SortId)]) -> Vec<(Term, SortId)> {
    let mut base: Vec<(Term, SortId)> = vars.iter().map(|(v, s)| (Term::var(v), *s)).collect();
    let mut seen = HashSet::new();
    for d in sig.symbols() {
        if d.args.is_empty() {
            if let Some(r) = d.result_sort() {
                base.push((Term::constant(&d.name), r));
            }
        }
    }
    let mut out = base.clone();
    for d in sig.symbols() {
        let Some(result) = d.result_sort() else { continue };
        if d.args.is_empty() {
            continue;
        }
        let choices: Vec<Vec<Term>> = d
            .args
            .iter()
            .map(|&s| base.iter().filter(|(_, bs)| *bs == s).map(|(t, _)| t.clone()).collect())
            .collect();
        for args in itertools::Itertools::multi_cartesian_product(choices.into_iter().map(Vec::into_iter)) {
            out.push((Term::app(&d.name, args), result));
        }
    }
    out.retain(|(t, s)| seen.insert((t.to_string(), *s)));
    out
}

fn atoms(sig: &Signature, vars: &[(String, SortId)]) -> Vec<Expr> {
    let ts = terms(sig, vars);
    let mut out = vec![Expr::int(0), Expr::int(1)];
    for (a, sa) in &ts {
        for (b, sb) in &ts {
            if sa == sb {
                out.push(Expr::dist(a.clone(), b.clone()));
            }
        }
    }
    for d in sig.symbols() {
        if d.is_function() {
            continue;
        }
        let choices: Vec<Vec<Term>> = d
            .args
            .iter()
            .map(|&s| ts.iter().filter(|(_, ts)| *ts == s).map(|(t, _)| t.clone()).collect())
            .collect();
        for args in itertools::Itertools::multi_cartesian_product(choices.into_iter().map(Vec::into_iter)) {
            out.push(Expr::atom(&d.name, args));
        }
        if d.args.is_empty() {
            out.push(Expr::atom(&d.name, Vec::new()));
        }
    }
    out
}

fn fresh(vars: &[(String, SortId)]) -> String {
    (0..)
        .map(|k| format!("z{k}"))
        .find(|z| vars.iter().all(|(v, _)| v != z))
        .expect("unbounded names")
}

/// Expressions of depth exactly `d`: quantifier forms, then unary, then binary.
fn level(sig: Rc<Signature>, d: usize, vars: Vars) -> Exprs {
    if d == 1 {
        return Box::new(atoms(&sig, &vars).into_iter());
    }
    let z = fresh(&vars);
    let quantified = {
        let sig = sig.clone();
        let vars = vars.clone();
        let z = z.clone();
        (0..sig.sorts().len()).flat_map(move |s| {
            let mut inner = (*vars).clone();
            inner.push((z.clone(), s));
            let sort_name = sig.sorts()[s].name.clone();
            let z = z.clone();
            let zf = z.clone();
            level(sig.clone(), d - 1, Rc::new(inner))
                .filter(move |body| mentions(body, &zf))
                .flat_map({
                    let z = z.clone();
                    move |body| {
                        [Quantifier::Sup, Quantifier::Inf].map(|q| Expr::Quant(q, z.clone(), sort_name.clone(), Box::new(body.clone())))
                    }
                })
        })
    };
    let unary = level(sig.clone(), d - 1, vars.clone()).flat_map(|e| [Expr::half(e.clone()), Expr::not(e)]);
    let binary = {
        let sig = sig.clone();
        let vars = vars.clone();
        BinOp::ALL.into_iter().flat_map(move |op| {
            // exactly one side reaches depth d-1 first, then both
            let (s1, v1, s2, v2) = (sig.clone(), vars.clone(), sig.clone(), vars.clone());
            let left_deep = level(sig.clone(), d - 1, vars.clone())
                .flat_map(move |a| upto(s1.clone(), d - 1, v1.clone()).map(move |b| Expr::bin(op, a.clone(), b)));
            let right_deep = upto(sig.clone(), d - 2, vars.clone())
                .flat_map(move |a| level(s2.clone(), d - 1, v2.clone()).map(move |b| Expr::bin(op, a.clone(), b)));
            left_deep.chain(right_deep)
        })
    };
    Box::new(quantified.chain(unary).chain(binary))
}

/// Expressions of depth `1..=d`.
fn upto(sig: Rc<Signature>, d: usize, vars: Vars) -> Exprs {
    Box::new((1..=d).flat_map(move |k| level(sig.clone(), k, vars.clone())))
}

/// Lazy, deterministic stream of sort-correct formulas of depth `1..=depth` whose free
/// variables are among `vars`, deduplicated by printed form.
pub struct FormulaStream {
    inner: Exprs,
    sig: Rc<Signature>,
    vars: Vars,
    seen: HashSet<String>,
}

impl Iterator for FormulaStream {
    type Item = Formula;

    fn next(&mut self) -> Option<Formula> {
        let declared: Vec<(&str, SortId)> = self.vars.iter().map(|(v, s)| (v.as_str(), *s)).collect();
        loop {
            let e = self.inner.next()?;
            let text = e.to_string();
            if !self.seen.insert(text) {
                continue;
            }
            if let Ok(f) = Formula::with_free(e, &self.sig, Rational::from_integer(1), &declared) {
                return Some(f);
            }
        }
    }
}

pub fn enum_formulas(sig: &Signature, depth: usize, vars: &[(String, SortId)]) -> FormulaStream {
    let sig = Rc::new(sig.clone());
    let vars: Vars = Rc::new(vars.to_vec());
    FormulaStream {
        inner: upto(sig.clone(), depth.min(4), vars.clone()),
        sig,
        vars,
        seen: HashSet::new(),
    }
}

/// Settings for [`random_formula`].
#[derive(Clone, Copy, Debug)]
pub struct RandomFormula {
    pub depth: usize,
    pub allow_half: bool,
    /// Probability of choosing a quantifier at an inner node.
    pub quantifier_weight: f64,
}

impl Default for RandomFormula {
    fn default() -> Self {
        RandomFormula {
            depth: 3,
            allow_half: true,
            quantifier_weight: 0.35,
        }
    }
}

fn random_expr(sig: &Signature, cfg: &RandomFormula, depth: usize, vars: &mut Vec<(String, SortId)>, rng: &mut impl Rng) -> Expr {
    if depth <= 1 {
        let pool = atoms(sig, vars);
        return pool.choose(rng).expect("constants are atoms").clone();
    }
    let r: f64 = rng.random();
    if r < cfg.quantifier_weight {
        let z = fresh(vars);
        let s = rng.random_range(0..sig.sorts().len());
        vars.push((z.clone(), s));
        let body = random_expr(sig, cfg, depth - 1, vars, rng);
        vars.pop();
        let q = if rng.random_bool(0.5) { Quantifier::Sup } else { Quantifier::Inf };
        return Expr::Quant(q, z, sig.sorts()[s].name.clone(), Box::new(body));
    }
    if r < cfg.quantifier_weight + 0.15 {
        let e = random_expr(sig, cfg, depth - 1, vars, rng);
        return if cfg.allow_half && rng.random_bool(0.5) {
            Expr::half(e)
        } else {
            Expr::not(e)
        };
    }
    let op = *BinOp::ALL.choose(rng).expect("nonempty");
    let a = random_expr(sig, cfg, depth - 1, vars, rng);
    let b = random_expr(sig, cfg, rng.random_range(1..depth), vars, rng);
    if rng.random_bool(0.5) {
        Expr::bin(op, a, b)
    } else {
        Expr::bin(op, b, a)
    }
}

/// A random sort-correct formula of depth at most `cfg.depth` with free variables among `vars`.
pub fn random_formula(sig: &Signature, vars: &[(String, SortId)], cfg: &RandomFormula, rng: &mut impl Rng) -> Formula {
    let declared: Vec<(&str, SortId)> = vars.iter().map(|(v, s)| (v.as_str(), *s)).collect();
    loop {
        let mut scope = vars.to_vec();
        let e = random_expr(sig, cfg, cfg.depth.max(1), &mut scope, rng);
        if let Ok(f) = Formula::with_free(e, sig, Rational::from_integer(1), &declared) {
            return f;
        }
    }
}
