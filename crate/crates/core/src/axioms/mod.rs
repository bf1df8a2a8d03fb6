//! Axiom schemes as continuous sentences, and group actions packaged as structures.
//!
//! Every scheme compiles to a list of sentences whose value is 0 exactly when the
//! axiom holds; [`scheme_defect`] evaluates them and reports the worst one.

pub mod action;
mod pq;
mod tree;

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

pub use action::{
    cayley_chain, check_nu_hilbert, rotation_action, wrap_action, wrap_tree_action, ActionSpec, HilbertAction, Nu, NuViolation, TreeAction,
};
pub use pq::{from_open_set, with_predicates, Normalization};
pub use tree::{tree_defect, tree_defect_parts, TreeDefect};

use crate::eval::{evaluate_with, evaluate_with_witness, EvalOptions, ValueBounds};
use crate::mstruct::MetricStructure;
use crate::real::{format_rational, Rational};
use crate::sigform::modulus::RationalText;
use crate::sigform::{BinOp, Expr, Field, Formula, Quantifier, Signature, SortId, Term};
use crate::Error;

/// Largest number of words a boundedness scheme may expand to.
pub const MAX_WORDS: usize = 4096;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scheme {
    Group,
    /// Group axioms plus the `P`, `Q` axioms; the last axiom is instantiated for each `ε` in `eps`
    /// (default `1/8, 2/8, ..., 1`).
    K0 {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        eps: Vec<RationalText>,
    },
    /// `(FV)^k` with `|F| = m`.
    Theta {
        m: usize,
        k: usize,
        eps: RationalText,
    },
    /// `F V^k`.
    Bounded {
        m: usize,
        k: usize,
        eps: RationalText,
    },
    /// `V^k F V^k`.
    RoelckeBounded {
        m: usize,
        k: usize,
        eps: RationalText,
    },
    /// `V F V`.
    RoelckePrecompact {
        m: usize,
        eps: RationalText,
    },
    /// `(FV)^k`, the same words as `theta`.
    Obk {
        m: usize,
        k: usize,
        eps: RationalText,
    },
    /// No `1/n`-almost invariant vector in `B_m` for `K_n`. With `unit`, `v` ranges over `S1`.
    Aiv {
        m: u32,
        n: u32,
        #[serde(default)]
        unit: bool,
    },
    /// `k ↦ (l, s)`: every vector of `B_k` is moved at least `1/s` by some element of `K_l`.
    Nfh {
        #[serde(deserialize_with = "eta_table")]
        eta: BTreeMap<u32, (u32, u32)>,
    },
    /// As `nfh`, for actions on trees.
    Nfr {
        #[serde(deserialize_with = "eta_table")]
        eta: BTreeMap<u32, (u32, u32)>,
    },
    Tree {
        #[serde(default = "default_tree_sort")]
        sort: String,
    },
    /// `k` approximately orthonormal vectors in `B1`.
    HilbertOnb {
        k: usize,
    },
}

// JSON object keys arrive as strings inside a tagged enum
fn eta_table<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, (u32, u32)>, D::Error> {
    let raw = BTreeMap::<String, (u32, u32)>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|k| (k, v))
                .map_err(|_| serde::de::Error::custom(format!("eta key `{k}` is not a natural number")))
        })
        .collect()
}

fn default_tree_sort() -> String {
    "T".into()
}

impl Scheme {
    pub fn label(&self) -> String {
        let r = |e: &RationalText| format_rational(&e.0);
        match self {
            Scheme::Group => "group".into(),
            Scheme::K0 { eps } if eps.is_empty() => "k0".into(),
            Scheme::K0 { eps } => format!("k0(eps={})", eps.iter().map(r).join(",")),
            Scheme::Theta { m, k, eps } => format!("theta(m={m},k={k},eps={})", r(eps)),
            Scheme::Bounded { m, k, eps } => format!("bounded(m={m},k={k},eps={})", r(eps)),
            Scheme::RoelckeBounded { m, k, eps } => format!("roelcke-bounded(m={m},k={k},eps={})", r(eps)),
            Scheme::RoelckePrecompact { m, eps } => format!("roelcke-precompact(m={m},eps={})", r(eps)),
            Scheme::Obk { m, k, eps } => format!("obk(m={m},k={k},eps={})", r(eps)),
            Scheme::Aiv { m, n, unit } => format!("aiv(m={m},n={n}{})", if *unit { ",unit" } else { "" }),
            Scheme::Nfh { eta } | Scheme::Nfr { eta } => {
                let name = if matches!(self, Scheme::Nfh { .. }) { "nfh" } else { "nfr" };
                let entries = eta.iter().map(|(k, (l, s))| format!("{k}:({l},{s})")).join(",");
                format!("{name}({entries})")
            }
            Scheme::Tree { sort } => format!("tree({sort})"),
            Scheme::HilbertOnb { k } => format!("hilbert-onb(k={k})"),
        }
    }
}

fn v(name: &str) -> Term {
    Term::var(name)
}

fn app(name: &str, args: &[Term]) -> Term {
    Term::app(name, args.to_vec())
}

fn c(q: Rational) -> Expr {
    Expr::constant(q)
}

fn fold(op: BinOp, items: Vec<Expr>) -> Expr {
    Expr::fold(op, items).expect("nonempty")
}

fn sups(vars: &[&str], sort: &str, body: Expr) -> Expr {
    let vs: Vec<(String, String)> = vars.iter().map(|x| (x.to_string(), sort.to_string())).collect();
    Expr::quantify(Quantifier::Sup, &vs, body)
}

fn need_sort(sig: &Signature, name: &str) -> Result<SortId, Error> {
    sig.sort_id(name)
        .ok_or_else(|| Error::Scheme(format!("signature has no sort `{name}`")))
}

fn need_symbol(sig: &Signature, name: &str, args: &[SortId]) -> Result<(), Error> {
    if sig.resolve(name, args).is_none() {
        let sorts = args.iter().map(|&s| sig.sort(s).name.as_str()).join(", ");
        return Err(Error::Scheme(format!("signature has no symbol `{name}` on ({sorts})")));
    }
    Ok(())
}

fn group_sort(sig: &Signature) -> Result<SortId, Error> {
    let g = need_sort(sig, "G")?;
    need_symbol(sig, "mul", &[g, g])?;
    need_symbol(sig, "inv", &[g])?;
    need_symbol(sig, "1", &[])?;
    Ok(g)
}

fn group_axioms() -> Vec<Expr> {
    let (x, y, z) = (v("x"), v("y"), v("z"));
    let one = Term::constant("1");
    vec![
        sups(
            &["x", "y", "z"],
            "G",
            Expr::dist(
                app("mul", &[app("mul", &[x.clone(), y.clone()]), z.clone()]),
                app("mul", &[x.clone(), app("mul", &[y, z])]),
            ),
        ),
        sups(&["x"], "G", Expr::dist(app("mul", &[x.clone(), one.clone()]), x.clone())),
        sups(&["x"], "G", Expr::dist(app("mul", &[x.clone(), app("inv", &[x])]), one)),
    ]
}

fn need_pq(sig: &Signature, g: SortId) -> Result<(), Error> {
    need_symbol(sig, "P", &[g])?;
    need_symbol(sig, "Q", &[g])
}

fn k0_axioms(grid: &[Rational], cap: Rational) -> Vec<Expr> {
    let (x, y) = (v("x"), v("y"));
    let p = |t: &Term| Expr::atom("P", vec![t.clone()]);
    let q = |t: &Term| Expr::atom("Q", vec![t.clone()]);
    let half = c(Rational::new(1, 2));
    let inv = |t: &Term| app("inv", std::slice::from_ref(t));
    let mut out = group_axioms();
    out.push(Expr::atom("Q", vec![Term::constant("1")]));
    out.push(sups(&["x"], "G", Expr::min(p(&x), q(&x))));
    out.push(sups(&["x"], "G", Expr::absdiff(p(&x), p(&inv(&x)))));
    out.push(Expr::inf("x", "G", Expr::absdiff(p(&x), half.clone())));
    out.push(sups(&["x"], "G", Expr::absdiff(q(&x), q(&inv(&x)))));
    out.push(Expr::inf("x", "G", Expr::absdiff(q(&x), half)));
    for &eps in grid {
        // d(x, y) never exceeds the cap, so clamping 2ε there changes nothing
        let two = (eps * Rational::from_integer(2)).min(cap);
        let inner = Expr::inf(
            "y",
            "G",
            Expr::max(Expr::sub(Expr::dist(x.clone(), y.clone()), c(two)), Expr::sub(c(eps), p(&y))),
        );
        out.push(sups(&["x"], "G", Expr::min(Expr::sub(c(eps), q(&x)), inner)));
    }
    out
}

/// Slot pattern of the words: `X` is some `x_i`, `Y(j)` is `y_j`.
#[derive(Clone, Copy)]
enum Slot {
    X,
    Y(usize),
}

/// `sup x1..xm. inf x. sup y1..yr. min(P(y1), ..., P(yr), ε ∸ min_w d(x, w))` over words
/// obtained by filling every `X` slot with one of `x1..xm`.
fn word_axiom(m: usize, layout: &[Slot], eps: Rational) -> Result<Expr, Error> {
    let xs = layout.iter().filter(|s| matches!(s, Slot::X)).count();
    let r = layout
        .iter()
        .filter_map(|s| if let Slot::Y(j) = s { Some(*j) } else { None })
        .max()
        .expect("some y");
    let count = m.checked_pow(xs as u32).filter(|&n| n <= MAX_WORDS);
    if count.is_none() {
        return Err(Error::Limit(format!("{m}^{xs} words exceed the limit of {MAX_WORDS}")));
    }
    let words: Vec<Expr> = (0..xs)
        .map(|_| 1..=m)
        .multi_cartesian_product()
        .map(|choice| {
            let mut xi = choice.into_iter();
            let terms: Vec<Term> = layout
                .iter()
                .map(|s| match s {
                    Slot::X => v(&format!("x{}", xi.next().expect("one choice per X"))),
                    Slot::Y(j) => v(&format!("y{j}")),
                })
                .collect();
            let w = terms.into_iter().reduce(|a, b| app("mul", &[a, b])).expect("nonempty word");
            Expr::dist(v("x"), w)
        })
        .collect();
    let mut parts: Vec<Expr> = (1..=r).map(|j| Expr::atom("P", vec![v(&format!("y{j}"))])).collect();
    parts.push(Expr::sub(c(eps), fold(BinOp::Min, words)));
    let ys: Vec<String> = (1..=r).map(|j| format!("y{j}")).collect();
    let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
    let body = Expr::inf("x", "G", sups(&ys, "G", fold(BinOp::Min, parts)));
    let outer: Vec<String> = (1..=m).map(|i| format!("x{i}")).collect();
    let outer: Vec<&str> = outer.iter().map(String::as_str).collect();
    Ok(sups(&outer, "G", body))
}

fn check_counts(m: usize, k: usize, eps: Rational) -> Result<(), Error> {
    if m == 0 || k == 0 {
        return Err(Error::Scheme("m and k must be positive".into()));
    }
    if eps <= Rational::from_integer(0) {
        return Err(Error::Scheme("eps must be positive".into()));
    }
    Ok(())
}

/// `v` as an element of `target`, through `inc` maps.
fn lift(sig: &Signature, t: Term, from: SortId, target: SortId) -> Result<Term, Error> {
    let (mut t, mut sort) = (t, from);
    while sort != target {
        let next = sig.resolve("inc", &[sort]).and_then(|d| d.result_sort()).ok_or_else(|| {
            Error::Scheme(format!(
                "no inclusion from {} towards {}",
                sig.sort(sort).name,
                sig.sort(target).name
            ))
        })?;
        t = app("inc", &[t]);
        sort = next;
    }
    Ok(t)
}

/// `d(act(x, v), v)` with `v` lifted to the sort of the image.
fn moved(sig: &Signature, k: SortId, b: SortId) -> Result<Expr, Error> {
    let result = sig.resolve("act", &[k, b]).and_then(|d| d.result_sort()).ok_or_else(|| {
        Error::Scheme(format!(
            "signature has no action `act` on ({}, {})",
            sig.sort(k).name,
            sig.sort(b).name
        ))
    })?;
    Ok(Expr::dist(app("act", &[v("x"), v("v")]), lift(sig, v("v"), b, result)?))
}

fn moved_axioms(sig: &Signature, eta: &BTreeMap<u32, (u32, u32)>) -> Result<Vec<Expr>, Error> {
    if eta.is_empty() {
        return Err(Error::Scheme("eta needs at least one entry".into()));
    }
    eta.iter()
        .map(|(&k, &(l, s))| {
            if s == 0 {
                return Err(Error::Scheme("eta entries need s > 0".into()));
            }
            let (bn, kn) = (format!("B{k}"), format!("K{l}"));
            let d = moved(sig, need_sort(sig, &kn)?, need_sort(sig, &bn)?)?;
            Ok(Expr::sup(
                "v",
                &bn,
                Expr::inf("x", &kn, Expr::sub(c(Rational::new(1, s as i64)), d)),
            ))
        })
        .collect()
}

fn onb_axiom(sig: &Signature, k: usize) -> Result<Expr, Error> {
    if k == 0 {
        return Err(Error::Scheme("k must be positive".into()));
    }
    let b1 = need_sort(sig, "B1")?;
    let field = sig
        .scalar_family()
        .map(|f| f.field)
        .ok_or_else(|| Error::Scheme("hilbert-onb needs a Hilbert signature".into()))?;
    let names: Vec<String> = (1..=k).map(|i| format!("v{i}")).collect();
    let one = c(Rational::from_integer(1));
    let zero = c(Rational::from_integer(0));
    let mut parts: Vec<Expr> = names
        .iter()
        .map(|n| Expr::absdiff(Expr::atom("norm", vec![v(n)]), one.clone()))
        .collect();
    let products: &[&str] = match field {
        Field::Real => &["ip"],
        Field::Complex => &["ip_re", "ip_im"],
    };
    for p in products {
        need_symbol(sig, p, &[b1, b1])?;
    }
    for (a, b) in names.iter().tuple_combinations() {
        for p in products {
            parts.push(Expr::absdiff(Expr::atom(p, vec![v(a), v(b)]), zero.clone()));
        }
    }
    let vars: Vec<(String, String)> = names.iter().map(|n| (n.clone(), "B1".into())).collect();
    Ok(Expr::quantify(Quantifier::Inf, &vars, fold(BinOp::Max, parts)))
}

fn tree_axioms(sort: &str) -> Vec<Expr> {
    let d = |a: &str, b: &str| Expr::dist(v(a), v(b));
    let hyper = Expr::sub(
        Expr::add(d("x", "y"), d("z", "w")),
        Expr::max(Expr::add(d("x", "z"), d("y", "w")), Expr::add(d("x", "w"), d("y", "z"))),
    );
    let mid = Expr::inf(
        "z",
        sort,
        Expr::max(
            Expr::absdiff(d("x", "z"), Expr::half(d("x", "y"))),
            Expr::absdiff(d("y", "z"), Expr::half(d("x", "y"))),
        ),
    );
    vec![sups(&["x", "y", "z", "w"], sort, hyper), sups(&["x", "y"], sort, mid)]
}

fn default_k0_grid() -> Vec<Rational> {
    (1..=8).map(|k| Rational::new(k, 8)).collect()
}

/// Compiles `s` against `sig`. The cap is the largest sort diameter (at least 1),
/// doubled for the tree scheme whose sums reach twice the diameter.
pub fn compile_scheme(s: &Scheme, sig: &Signature) -> Result<Vec<Formula>, Error> {
    let one = Rational::from_integer(1);
    let mut cap = sig.sorts().iter().map(|x| x.diameter).fold(one, Rational::max);
    let exprs = match s {
        Scheme::Group => {
            group_sort(sig)?;
            group_axioms()
        }
        Scheme::K0 { eps } => {
            let g = group_sort(sig)?;
            need_pq(sig, g)?;
            let grid: Vec<Rational> = if eps.is_empty() {
                default_k0_grid()
            } else {
                eps.iter().map(|e| e.0).collect()
            };
            if grid.iter().any(|e| *e < Rational::from_integer(0) || *e > one) {
                return Err(Error::Scheme("k0 eps values must lie in [0, 1]".into()));
            }
            k0_axioms(&grid, cap)
        }
        Scheme::Theta { m, k, eps } | Scheme::Obk { m, k, eps } | Scheme::Bounded { m, k, eps } | Scheme::RoelckeBounded { m, k, eps } => {
            let g = group_sort(sig)?;
            need_pq(sig, g)?;
            check_counts(*m, *k, eps.0)?;
            let layout: Vec<Slot> = match s {
                Scheme::Bounded { .. } => std::iter::once(Slot::X).chain((1..=*k).map(Slot::Y)).collect(),
                Scheme::RoelckeBounded { .. } => (1..=*k)
                    .map(Slot::Y)
                    .chain([Slot::X])
                    .chain((*k + 1..=2 * *k).map(Slot::Y))
                    .collect(),
                _ => (1..=*k).flat_map(|j| [Slot::X, Slot::Y(j)]).collect(),
            };
            cap = cap.max(eps.0);
            vec![word_axiom(*m, &layout, eps.0)?]
        }
        Scheme::RoelckePrecompact { m, eps } => {
            let g = group_sort(sig)?;
            need_pq(sig, g)?;
            check_counts(*m, 1, eps.0)?;
            cap = cap.max(eps.0);
            vec![word_axiom(*m, &[Slot::Y(1), Slot::X, Slot::Y(2)], eps.0)?]
        }
        Scheme::Aiv { m, n, unit } => {
            if *n == 0 {
                return Err(Error::Scheme("n must be positive".into()));
            }
            let kn = format!("K{n}");
            let k = need_sort(sig, &kn)?;
            let bn = if *unit { "S1".to_string() } else { format!("B{m}") };
            let b = need_sort(sig, &bn)?;
            let body = Expr::max(
                Expr::sub(moved(sig, k, b)?, c(Rational::new(1, *n as i64))),
                Expr::absdiff(c(one), Expr::atom("norm", vec![v("v")])),
            );
            vec![Expr::inf("v", &bn, Expr::sup("x", &kn, body))]
        }
        Scheme::Nfh { eta } | Scheme::Nfr { eta } => moved_axioms(sig, eta)?,
        Scheme::Tree { sort } => {
            let t = need_sort(sig, sort)?;
            cap = Rational::from_integer(2) * sig.sort(t).diameter.max(one);
            tree_axioms(sort)
        }
        Scheme::HilbertOnb { k } => vec![onb_axiom(sig, *k)?],
    };
    exprs.into_iter().map(|e| Formula::new(e, sig, cap)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomDefect {
    pub formula: String,
    pub bounds: ValueBounds,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessPoint {
    pub var: String,
    pub sort: String,
    pub point: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectReport {
    pub scheme: String,
    pub axioms: Vec<AxiomDefect>,
    /// Max of the per-axiom upper bounds.
    pub worst: f64,
    pub worst_index: Option<usize>,
    /// Points attaining the leading quantifiers of the worst axiom, when its defect exceeds `tol`.
    pub witness: Vec<WitnessPoint>,
}

impl DefectReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.worst <= tol
    }
}

pub fn scheme_defect(m: &MetricStructure, s: &Scheme, tol: f64) -> Result<DefectReport, Error> {
    scheme_defect_with(m, s, &EvalOptions::with_tol(tol))
}

pub fn scheme_defect_with(m: &MetricStructure, s: &Scheme, opts: &EvalOptions) -> Result<DefectReport, Error> {
    let formulas = compile_scheme(s, m.signature())?;
    let empty = crate::eval::Assignment::new();
    let mut axioms = Vec::with_capacity(formulas.len());
    let mut worst: Option<(f64, usize)> = None;
    for (i, f) in formulas.iter().enumerate() {
        let bounds = evaluate_with(m, f, &empty, opts)?;
        let hi = bounds.hi.to_f64();
        if worst.is_none_or(|(w, _)| hi > w) {
            worst = Some((hi, i));
        }
        axioms.push(AxiomDefect {
            formula: f.expr().to_string(),
            bounds,
        });
    }
    let (worst, worst_index) = match worst {
        Some((w, i)) => (w, Some(i)),
        None => (0.0, None),
    };
    let mut witness = Vec::new();
    if let Some(i) = worst_index.filter(|_| worst > opts.tol) {
        let (_, points) = evaluate_with_witness(m, &formulas[i], &empty, opts)?;
        witness = points
            .into_iter()
            .map(|w| WitnessPoint {
                sort: m.signature().sort(w.sort).name.clone(),
                point: m.label(w.sort, &w.point),
                var: w.var,
            })
            .collect();
    }
    Ok(DefectReport {
        scheme: s.label(),
        axioms,
        worst,
        worst_index,
        witness,
    })
}
