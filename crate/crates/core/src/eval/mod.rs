//! Formula evaluation: exact enumeration on finite sorts, multistart descent on Hilbert balls.

mod enumerate;
mod equiv;
mod modcheck;
pub mod optimize;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::mstruct::{scalar_apply, Carrier, Interp, MetricStructure, Point};
use crate::real::{rational_to_f64, Real};
use crate::sigform::signature::split_parametric;
use crate::sigform::{static_range, BinOp, Field, Formula, Quantifier, Scalar, SortId, TypedExpr, TypedTerm};
use crate::Error;
use optimize::{minimize, Block, OptimizerConfig};

pub use enumerate::{enum_formulas, random_formula, FormulaStream, RandomFormula};
pub use equiv::{elem_equiv_depth, EquivReport};
pub use modcheck::{check_modulus, ModulusReport, ModulusViolation};

/// Value of a formula as an interval. Finite quantification gives `lo == hi`, both certified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValueBounds {
    pub lo: Real,
    pub hi: Real,
    pub lo_certified: bool,
    pub hi_certified: bool,
}

impl ValueBounds {
    pub fn exact(v: Real) -> Self {
        ValueBounds {
            lo: v,
            hi: v,
            lo_certified: true,
            hi_certified: true,
        }
    }

    pub fn certified(&self) -> bool {
        self.lo_certified && self.hi_certified
    }

    pub fn is_exact(&self) -> bool {
        self.certified() && self.lo == self.hi
    }

    /// The exact value, or the midpoint of the interval.
    pub fn value(&self) -> Real {
        if self.lo == self.hi {
            self.lo
        } else {
            Real::Approx((self.lo.to_f64() + self.hi.to_f64()) / 2.0)
        }
    }

    fn map2(a: ValueBounds, b: ValueBounds, f: impl Fn(Real, Real) -> Real) -> ValueBounds {
        // monotone nondecreasing in both arguments
        ValueBounds {
            lo: f(a.lo, b.lo),
            hi: f(a.hi, b.hi),
            lo_certified: a.lo_certified && b.lo_certified,
            hi_certified: a.hi_certified && b.hi_certified,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assignment {
    values: HashMap<String, Point>,
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: &str, p: Point) -> Self {
        self.values.insert(var.to_string(), p);
        self
    }

    pub fn set(&mut self, var: &str, p: Point) {
        self.values.insert(var.to_string(), p);
    }

    pub fn get(&self, var: &str) -> Option<&Point> {
        self.values.get(var)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub tol: f64,
    pub seed: u64,
    /// Multistarts for the outermost Hilbert quantifier block.
    pub starts: usize,
    /// Multistarts for Hilbert quantifiers nested inside another one.
    pub inner_starts: usize,
    pub max_evals: usize,
    pub parallel: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tol: crate::DEFAULT_TOL,
            seed: 0,
            starts: 32,
            inner_starts: 4,
            max_evals: 40_000,
            parallel: true,
        }
    }
}

impl EvalOptions {
    pub fn with_tol(tol: f64) -> Self {
        EvalOptions { tol, ..Default::default() }
    }
}

/// Distance from the reported inf (sup) to the lower (upper) bound when descent stalls.
const STATIONARITY: f64 = 1e-6;
const PARALLEL_MIN: usize = 32;

enum CTerm<'m> {
    Var(usize),
    App(&'m Interp, Vec<CTerm<'m>>),
    Scalar(Field, Scalar, Box<CTerm<'m>>),
}

enum CExpr<'m> {
    Const(Real),
    Pred(&'m Interp, Vec<CTerm<'m>>),
    Dist(SortId, CTerm<'m>, CTerm<'m>),
    Half(Box<CExpr<'m>>),
    Not(Box<CExpr<'m>>),
    Bin(BinOp, Box<CExpr<'m>>, Box<CExpr<'m>>),
    Finite {
        q: Quantifier,
        slot: usize,
        members: &'m [usize],
        body: Box<CExpr<'m>>,
        range: (Real, Real),
    },
    Hilbert {
        q: Quantifier,
        slots: Vec<usize>,
        blocks: Vec<Block>,
        body: Box<CExpr<'m>>,
        range: (Real, Real),
        id: u64,
    },
}

struct Compiler<'m> {
    m: &'m MetricStructure,
    cap: crate::real::Rational,
    slots: Vec<String>,
    scope: Vec<(String, usize)>,
    next_id: u64,
}

impl<'m> Compiler<'m> {
    fn slot_of(&self, name: &str) -> Result<usize, Error> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| Error::Eval(format!("unbound variable `{name}`")))
    }

    fn fresh(&mut self, name: &str) -> usize {
        self.slots.push(name.to_string());
        self.slots.len() - 1
    }

    fn term(&mut self, t: &TypedTerm) -> Result<CTerm<'m>, Error> {
        match t {
            TypedTerm::Var { name, .. } => Ok(CTerm::Var(self.slot_of(name)?)),
            TypedTerm::App { decl, args } => {
                if let Some((_, payload)) = split_parametric(&decl.name) {
                    let field = self
                        .m
                        .field()
                        .ok_or_else(|| Error::Eval(format!("`{}` needs a Hilbert structure", decl.name)))?;
                    let c = Scalar::parse(payload).ok_or_else(|| Error::Eval(format!("bad scalar in `{}`", decl.name)))?;
                    return Ok(CTerm::Scalar(field, c, Box::new(self.term(&args[0])?)));
                }
                let interp = self
                    .m
                    .interp_of(decl)
                    .ok_or_else(|| Error::Eval(format!("`{}` is not interpreted", decl.name)))?;
                let args = args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?;
                Ok(CTerm::App(interp, args))
            }
        }
    }

    fn range(&self, e: &TypedExpr) -> (Real, Real) {
        let (lo, hi) = static_range(e, self.m.signature(), self.cap);
        (Real::Exact(lo), Real::Exact(hi))
    }

    fn expr(&mut self, e: &TypedExpr) -> Result<CExpr<'m>, Error> {
        Ok(match e {
            TypedExpr::Const(q) => CExpr::Const(Real::Exact(*q)),
            TypedExpr::Atom { decl, args } => {
                let interp = self
                    .m
                    .interp_of(decl)
                    .ok_or_else(|| Error::Eval(format!("`{}` is not interpreted", decl.name)))?;
                let args = args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?;
                CExpr::Pred(interp, args)
            }
            TypedExpr::Dist { sort, a, b } => CExpr::Dist(*sort, self.term(a)?, self.term(b)?),
            TypedExpr::Half(e) => CExpr::Half(Box::new(self.expr(e)?)),
            TypedExpr::Not(e) => CExpr::Not(Box::new(self.expr(e)?)),
            TypedExpr::Binary(op, a, b) => CExpr::Bin(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            TypedExpr::Quant { q, var, sort, body } => match self.m.carrier(*sort) {
                Carrier::Finite { members, .. } => {
                    if members.is_empty() {
                        return Err(Error::Eval(format!(
                            "quantifier over empty sort `{}`",
                            self.m.signature().sort(*sort).name
                        )));
                    }
                    let slot = self.fresh(var);
                    self.scope.push((var.clone(), slot));
                    let cbody = self.expr(body);
                    self.scope.pop();
                    CExpr::Finite {
                        q: *q,
                        slot,
                        members,
                        body: Box::new(cbody?),
                        range: self.range(body),
                    }
                }
                Carrier::Ball { .. } => {
                    // flatten a run of same-kind quantifiers over Hilbert sorts into one block
                    let mut slots = Vec::new();
                    let mut blocks = Vec::new();
                    let mut cur = e;
                    let pushed = self.scope.len();
                    while let TypedExpr::Quant { q: q2, var, sort, body } = cur {
                        let Carrier::Ball { dim, radius, sphere } = self.m.carrier(*sort) else {
                            break;
                        };
                        if q2 != q {
                            break;
                        }
                        let slot = self.fresh(var);
                        self.scope.push((var.clone(), slot));
                        slots.push(slot);
                        blocks.push(Block {
                            dim: *dim,
                            radius: *radius,
                            sphere: *sphere,
                        });
                        cur = body;
                    }
                    let cbody = self.expr(cur);
                    self.scope.truncate(pushed);
                    self.next_id += 1;
                    CExpr::Hilbert {
                        q: *q,
                        slots,
                        blocks,
                        body: Box::new(cbody?),
                        range: self.range(cur),
                        id: self.next_id,
                    }
                }
            },
        })
    }
}

struct Evaluator<'m> {
    m: &'m MetricStructure,
    cap: Real,
    opts: EvalOptions,
}

fn dist_of(m: &MetricStructure, sort: SortId, a: &Point, b: &Point) -> Real {
    m.dist(sort, a, b)
}

impl<'m> Evaluator<'m> {
    fn term(&self, t: &CTerm<'m>, env: &[Point]) -> Point {
        match t {
            CTerm::Var(s) => env[*s].clone(),
            CTerm::App(interp, args) => {
                let vals: Vec<Point> = args.iter().map(|a| self.term(a, env)).collect();
                interp.apply(&vals)
            }
            CTerm::Scalar(field, c, arg) => {
                let v = self.term(arg, env);
                Point::vector(scalar_apply(*field, c, v.coords().expect("Hilbert point")))
            }
        }
    }

    fn expr(&self, e: &CExpr<'m>, env: &mut Vec<Point>, nested: usize) -> ValueBounds {
        match e {
            CExpr::Const(v) => ValueBounds::exact(*v),
            CExpr::Pred(interp, args) => {
                let vals: Vec<Point> = args.iter().map(|a| self.term(a, env)).collect();
                ValueBounds::exact(interp.value(&vals))
            }
            CExpr::Dist(sort, a, b) => {
                let (x, y) = (self.term(a, env), self.term(b, env));
                ValueBounds::exact(dist_of(self.m, *sort, &x, &y))
            }
            CExpr::Half(e) => {
                let v = self.expr(e, env, nested);
                ValueBounds {
                    lo: v.lo.half(),
                    hi: v.hi.half(),
                    ..v
                }
            }
            CExpr::Not(e) => {
                let v = self.expr(e, env, nested);
                ValueBounds {
                    lo: self.cap.sub(v.hi),
                    hi: self.cap.sub(v.lo),
                    lo_certified: v.hi_certified,
                    hi_certified: v.lo_certified,
                }
            }
            CExpr::Bin(op, a, b) => {
                let a = self.expr(a, env, nested);
                let b = self.expr(b, env, nested);
                let cap = self.cap;
                match op {
                    BinOp::Min => ValueBounds::map2(a, b, Real::min),
                    BinOp::Max => ValueBounds::map2(a, b, Real::max),
                    BinOp::Add => ValueBounds::map2(a, b, |x, y| x.add(y).min(cap)),
                    BinOp::Sub => ValueBounds {
                        lo: a.lo.monus(b.hi),
                        hi: a.hi.monus(b.lo),
                        lo_certified: a.lo_certified && b.hi_certified,
                        hi_certified: a.hi_certified && b.lo_certified,
                    },
                    BinOp::AbsDiff => {
                        let all = a.certified() && b.certified();
                        let lo = a.lo.monus(b.hi).max(b.lo.monus(a.hi));
                        let hi = a.hi.monus(b.lo).max(b.hi.monus(a.lo));
                        ValueBounds {
                            lo,
                            hi,
                            lo_certified: all,
                            hi_certified: all,
                        }
                    }
                }
            }
            CExpr::Finite {
                q,
                slot,
                members,
                body,
                range,
            } => {
                if nested == 0 && self.opts.parallel && members.len() >= PARALLEL_MIN {
                    let vals: Vec<ValueBounds> = members
                        .par_iter()
                        .map(|&i| {
                            let mut local = env.clone();
                            local[*slot] = Point::Elem(i);
                            self.expr(body, &mut local, nested + 1)
                        })
                        .collect();
                    return fold_quant(*q, vals.into_iter());
                }
                let mut acc: Option<ValueBounds> = None;
                for &i in members.iter() {
                    env[*slot] = Point::Elem(i);
                    let v = self.expr(body, env, nested + 1);
                    let next = match acc {
                        None => v,
                        Some(a) => combine(*q, a, v),
                    };
                    acc = Some(next);
                    let done = match q {
                        Quantifier::Sup => next.lo_certified && next.lo >= range.1,
                        Quantifier::Inf => next.hi_certified && next.hi <= range.0,
                    };
                    if done {
                        break;
                    }
                }
                acc.expect("nonempty sort")
            }
            CExpr::Hilbert {
                q,
                slots,
                blocks,
                body,
                range,
                id,
            } => {
                let (best, x) = self.optimize(*q, slots, blocks, body, env, nested, *id);
                bind(slots, blocks, &x, env);
                match q {
                    Quantifier::Inf => {
                        let guess = best.lo.to_f64().min(best.hi.to_f64()) - STATIONARITY;
                        let floor = range.0.to_f64();
                        let (lo, cert) = if guess <= floor {
                            (range.0, true)
                        } else {
                            (Real::Approx(guess), false)
                        };
                        ValueBounds {
                            lo,
                            hi: best.hi,
                            lo_certified: cert,
                            hi_certified: best.hi_certified,
                        }
                    }
                    Quantifier::Sup => {
                        let guess = best.hi.to_f64().max(best.lo.to_f64()) + STATIONARITY;
                        let ceil = range.1.to_f64();
                        let (hi, cert) = if guess >= ceil {
                            (range.1, true)
                        } else {
                            (Real::Approx(guess), false)
                        };
                        ValueBounds {
                            lo: best.lo,
                            hi,
                            lo_certified: best.lo_certified,
                            hi_certified: cert,
                        }
                    }
                }
            }
        }
    }

    /// Best body bounds over the block and the point attaining them.
    #[allow(clippy::too_many_arguments)]
    fn optimize(
        &self,
        q: Quantifier,
        slots: &[usize],
        blocks: &[Block],
        body: &CExpr<'m>,
        env: &mut Vec<Point>,
        nested: usize,
        id: u64,
    ) -> (ValueBounds, Vec<f64>) {
        let starts = if nested == 0 { self.opts.starts } else { self.opts.inner_starts };
        let cfg = OptimizerConfig {
            starts,
            max_evals: if nested == 0 {
                self.opts.max_evals
            } else {
                self.opts.max_evals / 8
            },
            seed: self.opts.seed ^ id.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..Default::default()
        };
        let mut local = env.clone();
        let mut objective = |x: &[f64]| {
            bind(slots, blocks, x, &mut local);
            let v = self.expr(body, &mut local, nested + 1);
            match q {
                Quantifier::Inf => v.hi.to_f64(),
                Quantifier::Sup => -v.lo.to_f64(),
            }
        };
        let found = minimize(blocks, &mut objective, &cfg);
        bind(slots, blocks, &found.x, env);
        let v = self.expr(body, env, nested + 1);
        (v, found.x)
    }
}

fn bind(slots: &[usize], blocks: &[Block], x: &[f64], env: &mut [Point]) {
    let mut off = 0;
    for (s, b) in slots.iter().zip(blocks) {
        env[*s] = Point::vector(x[off..off + b.dim].to_vec());
        off += b.dim;
    }
}

fn combine(q: Quantifier, a: ValueBounds, b: ValueBounds) -> ValueBounds {
    match q {
        Quantifier::Sup => ValueBounds::map2(a, b, Real::max),
        Quantifier::Inf => ValueBounds::map2(a, b, Real::min),
    }
}

fn fold_quant(q: Quantifier, vals: impl Iterator<Item = ValueBounds>) -> ValueBounds {
    vals.reduce(|a, b| combine(q, a, b)).expect("nonempty sort")
}

struct Prepared<'m> {
    code: CExpr<'m>,
    env: Vec<Point>,
    eval: Evaluator<'m>,
}

fn prepare<'m>(m: &'m MetricStructure, f: &Formula, a: &Assignment, opts: &EvalOptions) -> Result<Prepared<'m>, Error> {
    let mut c = Compiler {
        m,
        cap: f.cap(),
        slots: Vec::new(),
        scope: Vec::new(),
        next_id: 0,
    };
    let mut initial = Vec::new();
    for (name, sort) in f.free_vars() {
        let p = a.get(name).ok_or_else(|| Error::Eval(format!("unbound variable `{name}`")))?;
        if !m.contains(*sort, p, 1e-9) {
            return Err(Error::Sort(format!(
                "value for `{name}` is not a point of sort `{}`",
                m.signature().sort(*sort).name
            )));
        }
        let slot = c.fresh(name);
        c.scope.push((name.clone(), slot));
        initial.push((slot, p.clone()));
    }
    let code = c.expr(f.typed())?;
    let mut env = vec![Point::Elem(0); c.slots.len()];
    for (s, p) in initial {
        env[s] = p;
    }
    Ok(Prepared {
        code,
        env,
        eval: Evaluator {
            m,
            cap: Real::Exact(f.cap()),
            opts: *opts,
        },
    })
}

/// Evaluates `f` on `m` under `a` with default options and tolerance `tol`.
pub fn evaluate(m: &MetricStructure, f: &Formula, a: &Assignment, tol: f64) -> Result<ValueBounds, Error> {
    evaluate_with(m, f, a, &EvalOptions::with_tol(tol))
}

pub fn evaluate_with(m: &MetricStructure, f: &Formula, a: &Assignment, opts: &EvalOptions) -> Result<ValueBounds, Error> {
    let mut p = prepare(m, f, a, opts)?;
    Ok(p.eval.expr(&p.code, &mut p.env, 0))
}

/// A binding of the formula's leading quantifier prefix at the optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub var: String,
    pub sort: SortId,
    pub point: Point,
}

/// Evaluates `f` and reports points attaining the leading `sup`/`inf` prefix
/// (first attaining member on finite sorts, best descent point on Hilbert sorts).
pub fn evaluate_with_witness(
    m: &MetricStructure,
    f: &Formula,
    a: &Assignment,
    opts: &EvalOptions,
) -> Result<(ValueBounds, Vec<Witness>), Error> {
    let mut p = prepare(m, f, a, opts)?;
    let value = p.eval.expr(&p.code, &mut p.env, 0);
    let mut witnesses = Vec::new();
    let mut typed = f.typed();
    let mut code = &p.code;
    let mut env = p.env.clone();
    loop {
        match code {
            CExpr::Finite {
                q, slot, members, body, ..
            } => {
                let TypedExpr::Quant {
                    var, sort, body: tbody, ..
                } = typed
                else {
                    unreachable!("compiled from a quantifier")
                };
                let mut best: Option<(Real, usize)> = None;
                for &i in members.iter() {
                    env[*slot] = Point::Elem(i);
                    let v = p.eval.expr(body, &mut env, 1);
                    let key = match q {
                        Quantifier::Sup => v.hi,
                        Quantifier::Inf => v.lo,
                    };
                    let better = match (&best, q) {
                        (None, _) => true,
                        (Some((b, _)), Quantifier::Sup) => key > *b,
                        (Some((b, _)), Quantifier::Inf) => key < *b,
                    };
                    if better {
                        best = Some((key, i));
                    }
                }
                let (_, i) = best.expect("nonempty sort");
                env[*slot] = Point::Elem(i);
                witnesses.push(Witness {
                    var: var.clone(),
                    sort: *sort,
                    point: Point::Elem(i),
                });
                typed = tbody;
                code = body;
            }
            CExpr::Hilbert {
                q,
                slots,
                blocks,
                body,
                id,
                ..
            } => {
                let (_, x) = p.eval.optimize(*q, slots, blocks, body, &mut env, 0, *id);
                bind(slots, blocks, &x, &mut env);
                for s in slots {
                    let TypedExpr::Quant {
                        var, sort, body: tbody, ..
                    } = typed
                    else {
                        unreachable!("compiled from a quantifier")
                    };
                    witnesses.push(Witness {
                        var: var.clone(),
                        sort: *sort,
                        point: env[*s].clone(),
                    });
                    typed = tbody;
                }
                code = body;
            }
            _ => break,
        }
    }
    Ok((value, witnesses))
}

/// Approximate `f64` view used in reports.
pub fn to_f64_pair(v: &ValueBounds) -> (f64, f64) {
    (v.lo.to_f64(), v.hi.to_f64())
}

#[allow(dead_code)]
fn rational_f64(r: &crate::real::Rational) -> f64 {
    rational_to_f64(r)
}

#[cfg(test)]
mod tests;
