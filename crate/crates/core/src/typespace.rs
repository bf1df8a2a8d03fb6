//! Realized types over a finite formula family, the realized d-distance between them,
//! the formula pseudometric `d^T` and ε-nets of the realized type space.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::eval::{enum_formulas, evaluate, evaluate_with, Assignment, EvalOptions, ValueBounds};
use crate::mstruct::{MetricStructure, Point};
use crate::real::{Rational, Real};
use crate::sigform::{Expr, Formula, Quantifier, Signature, SortId};
use crate::Error;

/// Largest number of tuples scanned by [`realized_types`].
pub const MAX_TUPLES: usize = 200_000;

/// A finite list of formulas in the variables `vars`; types are value vectors over it.
#[derive(Clone, Debug)]
pub struct TypeFamily {
    pub vars: Vec<(String, SortId)>,
    pub depth: usize,
    pub formulas: Vec<Formula>,
    /// Whether the enumeration was cut at the formula limit.
    pub truncated: bool,
}

fn var_names(n: usize) -> Vec<String> {
    if n == 1 {
        vec!["x".into()]
    } else {
        (1..=n).map(|i| format!("x{i}")).collect()
    }
}

impl TypeFamily {
    /// The first `limit` formulas of depth at most `depth` in `x` (one variable) or `x1..xn`.
    pub fn enumerate(sig: &Signature, sorts: &[SortId], depth: usize, limit: usize) -> TypeFamily {
        let vars: Vec<(String, SortId)> = var_names(sorts.len()).into_iter().zip(sorts.iter().copied()).collect();
        let mut stream = enum_formulas(sig, depth, &vars);
        let formulas: Vec<Formula> = stream.by_ref().take(limit).collect();
        let truncated = formulas.len() == limit && stream.next().is_some();
        TypeFamily {
            vars,
            depth,
            formulas,
            truncated,
        }
    }

    pub fn from_formulas(vars: Vec<(String, SortId)>, formulas: Vec<Formula>) -> Result<TypeFamily, Error> {
        for f in &formulas {
            for (name, sort) in f.free_vars() {
                if !vars.iter().any(|(v, s)| v == name && s == sort) {
                    return Err(Error::Sort(format!("`{}` has free variable `{name}` outside the tuple", f.expr())));
                }
            }
        }
        let depth = formulas.iter().map(Formula::depth).max().unwrap_or(0);
        Ok(TypeFamily {
            vars,
            depth,
            formulas,
            truncated: false,
        })
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn describe(&self) -> String {
        let vars = self.vars.iter().map(|(v, _)| v.as_str()).join(", ");
        format!(
            "{} formulas of depth ≤ {} in ({vars}){}",
            self.formulas.len(),
            self.depth,
            if self.truncated { ", truncated" } else { "" }
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TypePoint {
    #[serde(skip)]
    pub tuple: Vec<Point>,
    pub labels: Vec<String>,
    pub values: Vec<Real>,
}

impl TypePoint {
    pub fn arity(&self) -> usize {
        self.tuple.len()
    }

    /// Largest coordinate difference.
    pub fn gap(&self, other: &TypePoint) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.abs_diff(*b).to_f64())
            .fold(0.0, f64::max)
    }

    pub fn agrees(&self, other: &TypePoint, tol: f64) -> bool {
        self.values.len() == other.values.len() && self.gap(other) <= tol
    }
}

/// Type of `tuple` over `family`: one value per formula.
pub fn tp(m: &MetricStructure, tuple: &[Point], family: &TypeFamily, tol: f64) -> Result<TypePoint, Error> {
    if tuple.len() != family.arity() {
        return Err(Error::Arity(format!(
            "tuple has {} entries, family has arity {}",
            tuple.len(),
            family.arity()
        )));
    }
    let mut a = Assignment::new();
    for ((v, s), p) in family.vars.iter().zip(tuple) {
        if !m.contains(*s, p, tol) {
            return Err(Error::Sort(format!(
                "`{}` is not in sort {}",
                m.label(*s, p),
                m.signature().sort(*s).name
            )));
        }
        a.set(v, p.clone());
    }
    let values = family
        .formulas
        .iter()
        .map(|f| evaluate(m, f, &a, tol).map(|b| b.value()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TypePoint {
        tuple: tuple.to_vec(),
        labels: tuple.iter().zip(&family.vars).map(|(p, (_, s))| m.label(*s, p)).collect(),
        values,
    })
}

/// Every tuple of the family's sorts with its type, grouped into classes of equal type.
#[derive(Clone, Debug, Serialize)]
pub struct TypeSpace {
    pub family: String,
    pub points: Vec<TypePoint>,
    /// Indices into `points`; the first entry represents the class.
    pub classes: Vec<Vec<usize>>,
    #[serde(skip)]
    sorts: Vec<SortId>,
}

pub fn realized_types(m: &MetricStructure, family: &TypeFamily, tol: f64) -> Result<TypeSpace, Error> {
    let sorts: Vec<SortId> = family.vars.iter().map(|v| v.1).collect();
    let members: Vec<&[usize]> = sorts
        .iter()
        .map(|&s| {
            m.member_indices(s)
                .ok_or_else(|| Error::Sort(format!("sort {} is not finite", m.signature().sort(s).name)))
        })
        .collect::<Result<_, _>>()?;
    let count = members.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()));
    if count.is_none_or(|c| c > MAX_TUPLES) {
        return Err(Error::Limit(format!("more than {MAX_TUPLES} tuples")));
    }
    let tuples: Vec<Vec<Point>> = members
        .iter()
        .map(|s| s.iter().map(|&i| Point::Elem(i)))
        .multi_cartesian_product()
        .collect();
    let tuples = if tuples.is_empty() && sorts.is_empty() {
        vec![Vec::new()]
    } else {
        tuples
    };
    let points = tuples.par_iter().map(|t| tp(m, t, family, tol)).collect::<Result<Vec<_>, _>>()?;
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match classes.iter_mut().find(|c| points[c[0]].agrees(p, tol)) {
            Some(c) => c.push(i),
            None => classes.push(vec![i]),
        }
    }
    Ok(TypeSpace {
        family: family.describe(),
        points,
        classes,
        sorts,
    })
}

impl TypeSpace {
    pub fn class_of(&self, p: &TypePoint, tol: f64) -> Option<usize> {
        self.classes.iter().position(|c| self.points[c[0]].agrees(p, tol))
    }

    fn tuple_distance(&self, m: &MetricStructure, a: usize, b: usize) -> Real {
        let (pa, pb) = (&self.points[a].tuple, &self.points[b].tuple);
        self.sorts
            .iter()
            .zip(pa.iter().zip(pb))
            .map(|(&s, (x, y))| m.dist(s, x, y))
            .fold(Real::zero(), Real::max)
    }

    /// Realized d-distance between two classes: the least `max_i d(c_i, b_i)` over realizations.
    pub fn class_distance(&self, m: &MetricStructure, a: usize, b: usize) -> Real {
        self.classes[a]
            .iter()
            .cartesian_product(&self.classes[b])
            .map(|(&i, &j)| self.tuple_distance(m, i, j))
            .reduce(Real::min)
            .expect("classes are nonempty")
    }

    pub fn distance_matrix(&self, m: &MetricStructure) -> Vec<Vec<Real>> {
        let k = self.classes.len();
        (0..k)
            .into_par_iter()
            .map(|a| {
                (0..k)
                    .map(|b| if a == b { Real::zero() } else { self.class_distance(m, a, b) })
                    .collect()
            })
            .collect()
    }
}

/// Realized d-distance: least `max_i d(c_i, b_i)` over tuples of `M` realizing `p` and `q`
/// (up to `tol` in every coordinate). An upper bound for the distance computed over all models.
pub fn type_distance(m: &MetricStructure, family: &TypeFamily, p: &TypePoint, q: &TypePoint, tol: f64) -> Result<Real, Error> {
    if p.arity() != q.arity() || p.arity() != family.arity() {
        return Err(Error::Arity("types of different arity".into()));
    }
    let space = realized_types(m, family, tol)?;
    let a = space
        .class_of(p, tol)
        .ok_or_else(|| Error::Eval("type is not realized in the structure".into()))?;
    let b = space
        .class_of(q, tol)
        .ok_or_else(|| Error::Eval("type is not realized in the structure".into()))?;
    Ok(if a == b { Real::zero() } else { space.class_distance(m, a, b) })
}

/// `d^T(φ, ψ)`: the supremum of `|φ − ψ|` over all assignments in all `structures`.
pub fn formula_pseudometric(
    structures: &[&MetricStructure],
    phi: &Formula,
    psi: &Formula,
    opts: &EvalOptions,
) -> Result<ValueBounds, Error> {
    let first = structures.first().ok_or_else(|| Error::Input("no structures given".into()))?;
    let sig = first.signature();
    if structures.iter().any(|m| m.signature() != sig) {
        return Err(Error::Structure("structures have different signatures".into()));
    }
    if phi.cap() != psi.cap() {
        return Err(Error::Sort("formulas have different caps".into()));
    }
    if phi.expr() == psi.expr() {
        return Ok(ValueBounds::exact(Real::zero()));
    }
    let mut free: Vec<(String, SortId)> = phi.free_vars().to_vec();
    for (v, s) in psi.free_vars() {
        match free.iter().find(|(w, _)| w == v) {
            Some((_, t)) if t != s => {
                return Err(Error::Sort(format!(
                    "`{v}` is in sort {} on one side and {} on the other",
                    sig.sort(*t).name,
                    sig.sort(*s).name
                )))
            }
            Some(_) => {}
            None => free.push((v.clone(), *s)),
        }
    }
    let prefix: Vec<(String, String)> = free.iter().map(|(v, s)| (v.clone(), sig.sort(*s).name.clone())).collect();
    let body = Expr::absdiff(phi.expr().clone(), psi.expr().clone());
    let sentence = Formula::new(Expr::quantify(Quantifier::Sup, &prefix, body), sig, phi.cap())?;
    let mut out: Option<ValueBounds> = None;
    for m in structures {
        let v = evaluate_with(m, &sentence, &Assignment::new(), opts)?;
        out = Some(match out {
            None => v,
            Some(w) => ValueBounds {
                lo: w.lo.max(v.lo),
                hi: w.hi.max(v.hi),
                lo_certified: w.lo_certified && v.lo_certified,
                hi_certified: w.hi_certified && v.hi_certified,
            },
        });
    }
    Ok(out.expect("at least one structure"))
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverEntry {
    pub class: usize,
    pub representative: Vec<String>,
    /// Position in [`EpsNet::net`] of the covering member.
    pub member: usize,
    pub distance: Real,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsNet {
    pub family: String,
    pub eps: f64,
    pub classes: usize,
    /// Class indices chosen as net members.
    pub net: Vec<usize>,
    pub net_labels: Vec<Vec<String>>,
    pub certificate: Vec<CoverEntry>,
}

impl EpsNet {
    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    /// Every class is listed once and lies within `eps` of its member.
    pub fn validate(&self, eps: Rational) -> bool {
        let mut seen = vec![false; self.classes];
        self.certificate.iter().all(|c| {
            let fresh = !std::mem::replace(&mut seen[c.class], true);
            fresh && c.member < self.net.len() && c.distance <= Real::Exact(eps)
        }) && seen.into_iter().all(|s| s)
    }
}

/// Greedy farthest-point net of the realized `n`-types: members are pairwise more than `eps` apart
/// in the realized d-distance, and every class lies within `eps` of some member.
pub fn eps_net(m: &MetricStructure, family: &TypeFamily, eps: Rational, tol: f64) -> Result<EpsNet, Error> {
    let space = realized_types(m, family, tol)?;
    let dist = space.distance_matrix(m);
    net_from_matrix(&space, &dist, eps, |c| space.points[space.classes[c][0]].labels.clone())
}

fn net_from_matrix(space: &TypeSpace, dist: &[Vec<Real>], eps: Rational, labels: impl Fn(usize) -> Vec<String>) -> Result<EpsNet, Error> {
    let k = dist.len();
    let limit = Real::Exact(eps);
    let mut net = Vec::new();
    let mut nearest: Vec<(Real, usize)> = Vec::new();
    if k > 0 {
        net.push(0);
        nearest = (0..k).map(|c| (dist[0][c], 0)).collect();
        loop {
            let (far, chosen) = (0..k)
                .map(|c| (nearest[c].0, c))
                .fold((Real::zero(), 0), |acc, x| if x.0 > acc.0 { x } else { acc });
            if far <= limit {
                break;
            }
            let pos = net.len();
            net.push(chosen);
            for c in 0..k {
                if dist[chosen][c] < nearest[c].0 {
                    nearest[c] = (dist[chosen][c], pos);
                }
            }
        }
    }
    let certificate = (0..k)
        .map(|c| CoverEntry {
            class: c,
            representative: labels(c),
            member: nearest[c].1,
            distance: nearest[c].0,
        })
        .collect();
    Ok(EpsNet {
        family: space.family.clone(),
        eps: crate::real::rational_to_f64(&eps),
        classes: k,
        net_labels: net.iter().map(|&c| labels(c)).collect(),
        net,
        certificate,
    })
}
