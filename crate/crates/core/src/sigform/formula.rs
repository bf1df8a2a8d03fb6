use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use super::modulus::Modulus;
use super::signature::{Signature, SortId, SymbolDecl};
use crate::real::{format_rational, Rational};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    /// Function application; constants are applications with no arguments.
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(name: &str) -> Term {
        Term::App(name.into(), Vec::new())
    }

    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(name.into(), args)
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::App(_, args) if args.is_empty() => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::depth).max().unwrap_or(0),
        }
    }

    fn mentions(&self, var: &str) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::App(_, args) => args.iter().any(|a| a.mentions(var)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    /// `max(x - y, 0)`
    Sub,
    /// `min(x + y, C)`
    Add,
    Min,
    Max,
    AbsDiff,
}

impl BinOp {
    pub const ALL: [BinOp; 5] = [BinOp::Sub, BinOp::Add, BinOp::Min, BinOp::Max, BinOp::AbsDiff];

    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::Sub => "sub",
            BinOp::Add => "add",
            BinOp::Min => "min",
            BinOp::Max => "max",
            BinOp::AbsDiff => "absdiff",
        }
    }

    pub fn from_keyword(s: &str) -> Option<BinOp> {
        BinOp::ALL.into_iter().find(|op| op.keyword() == s)
    }

    pub fn is_commutative(self) -> bool {
        !matches!(self, BinOp::Sub)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Quantifier {
    Sup,
    Inf,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Sup => "sup",
            Quantifier::Inf => "inf",
        }
    }

    pub fn dual(self) -> Quantifier {
        match self {
            Quantifier::Sup => Quantifier::Inf,
            Quantifier::Inf => Quantifier::Sup,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Rational),
    Atom(String, Vec<Term>),
    Dist(Term, Term),
    Half(Box<Expr>),
    Not(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Quant(Quantifier, String, String, Box<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(q: Rational) -> Expr {
        Expr::Const(q)
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(Rational::from_integer(n))
    }

    pub fn dist(a: Term, b: Term) -> Expr {
        Expr::Dist(a, b)
    }

    pub fn atom(name: &str, args: Vec<Term>) -> Expr {
        Expr::Atom(name.into(), args)
    }

    pub fn half(e: Expr) -> Expr {
        Expr::Half(Box::new(e))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Sub, a, b)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn min(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Min, a, b)
    }

    pub fn max(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Max, a, b)
    }

    pub fn absdiff(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::AbsDiff, a, b)
    }

    pub fn sup(var: &str, sort: &str, body: Expr) -> Expr {
        Expr::Quant(Quantifier::Sup, var.into(), sort.into(), Box::new(body))
    }

    pub fn inf(var: &str, sort: &str, body: Expr) -> Expr {
        Expr::Quant(Quantifier::Inf, var.into(), sort.into(), Box::new(body))
    }

    /// Right-nested fold with `op`; `None` for an empty list.
    pub fn fold(op: BinOp, mut items: Vec<Expr>) -> Option<Expr> {
        let mut acc = items.pop()?;
        while let Some(e) = items.pop() {
            acc = Expr::bin(op, e, acc);
        }
        Some(acc)
    }

    /// Prefix of nested quantifiers over `vars`.
    pub fn quantify(q: Quantifier, vars: &[(String, String)], body: Expr) -> Expr {
        vars.iter()
            .rev()
            .fold(body, |acc, (v, s)| Expr::Quant(q, v.clone(), s.clone(), Box::new(acc)))
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Atom(..) | Expr::Dist(..) => 1,
            Expr::Half(e) | Expr::Not(e) | Expr::Quant(_, _, _, e) => 1 + e.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn contains_half(&self) -> bool {
        match self {
            Expr::Half(_) => true,
            Expr::Const(_) | Expr::Atom(..) | Expr::Dist(..) => false,
            Expr::Not(e) | Expr::Quant(_, _, _, e) => e.contains_half(),
            Expr::Binary(_, a, b) => a.contains_half() || b.contains_half(),
        }
    }

    /// Free variable names in first-occurrence order.
    pub fn free_var_names(&self) -> Vec<String> {
        fn term(t: &Term, bound: &[String], out: &mut Vec<String>) {
            match t {
                Term::Var(v) => {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Term::App(_, args) => args.iter().for_each(|a| term(a, bound, out)),
            }
        }
        fn go(e: &Expr, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match e {
                Expr::Const(_) => {}
                Expr::Atom(_, args) => args.iter().for_each(|a| term(a, bound, out)),
                Expr::Dist(a, b) => {
                    term(a, bound, out);
                    term(b, bound, out);
                }
                Expr::Half(e) | Expr::Not(e) => go(e, bound, out),
                Expr::Binary(_, a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Expr::Quant(_, v, _, body) => {
                    bound.push(v.clone());
                    go(body, bound, out);
                    bound.pop();
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

fn write_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(v) => f.write_str(v),
        Term::App(name, args) if args.is_empty() => f.write_str(name),
        Term::App(name, args) => {
            write!(f, "{name}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_term(a, f)?;
            }
            f.write_str(")")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(q) => f.write_str(&format_rational(q)),
            Expr::Atom(name, args) => write_term(&Term::App(name.clone(), args.clone()), f),
            Expr::Dist(a, b) => write!(f, "d({a}, {b})"),
            Expr::Half(e) => write!(f, "half({e})"),
            Expr::Not(e) => write!(f, "not({e})"),
            Expr::Binary(op, a, b) => write!(f, "{}({a}, {b})", op.keyword()),
            Expr::Quant(q, v, s, body) => write!(f, "{} {v}:{s}. {body}", q.keyword()),
        }
    }
}

/// A sort-resolved copy of the AST, produced by checking.
#[derive(Clone, Debug)]
pub enum TypedTerm {
    Var { name: String, sort: SortId },
    App { decl: Arc<SymbolDecl>, args: Vec<TypedTerm> },
}

impl TypedTerm {
    pub fn sort(&self) -> SortId {
        match self {
            TypedTerm::Var { sort, .. } => *sort,
            TypedTerm::App { decl, .. } => decl.result_sort().expect("function symbol"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum TypedExpr {
    Const(Rational),
    Atom {
        decl: Arc<SymbolDecl>,
        args: Vec<TypedTerm>,
    },
    Dist {
        sort: SortId,
        a: TypedTerm,
        b: TypedTerm,
    },
    Half(Box<TypedExpr>),
    Not(Box<TypedExpr>),
    Binary(BinOp, Box<TypedExpr>, Box<TypedExpr>),
    Quant {
        q: Quantifier,
        var: String,
        sort: SortId,
        body: Box<TypedExpr>,
    },
}

/// A sort-checked formula with its cap `C` for the clamped connectives.
#[derive(Clone, Debug)]
pub struct Formula {
    expr: Expr,
    typed: TypedExpr,
    cap: Rational,
    free: Vec<(String, SortId)>,
}

impl PartialEq for Formula {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr && self.cap == other.cap && self.free == other.free
    }
}

impl Formula {
    pub fn new(expr: Expr, sig: &Signature, cap: Rational) -> Result<Formula, Error> {
        Formula::with_free(expr, sig, cap, &[])
    }

    /// Checks `expr`; `declared` fixes sorts of free variables that cannot be inferred.
    pub fn with_free(expr: Expr, sig: &Signature, cap: Rational, declared: &[(&str, SortId)]) -> Result<Formula, Error> {
        if !cap.is_positive() {
            return Err(Error::Sort(format!("cap must be positive, got {}", format_rational(&cap))));
        }
        let mut checker = Checker {
            sig,
            cap,
            bound: Vec::new(),
            free: declared.iter().map(|(n, s)| (n.to_string(), *s)).collect(),
        };
        let typed = checker.expr(&expr)?;
        let sorts: HashMap<String, SortId> = checker.free.into_iter().collect();
        let free = expr
            .free_var_names()
            .into_iter()
            .map(|v| {
                let s = sorts[&v];
                (v, s)
            })
            .collect();
        Ok(Formula { expr, typed, cap, free })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn typed(&self) -> &TypedExpr {
        &self.typed
    }

    pub fn cap(&self) -> Rational {
        self.cap
    }

    pub fn free_vars(&self) -> &[(String, SortId)] {
        &self.free
    }

    pub fn is_sentence(&self) -> bool {
        self.free.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.expr.depth()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

/// Free variables of a checked formula, in first-occurrence order.
pub fn free_vars(f: &Formula) -> Vec<(String, SortId)> {
    f.free_vars().to_vec()
}

struct Checker<'a> {
    sig: &'a Signature,
    cap: Rational,
    bound: Vec<(String, SortId)>,
    free: Vec<(String, SortId)>,
}

impl Checker<'_> {
    fn lookup(&self, name: &str) -> Option<SortId> {
        self.bound
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .or_else(|| self.free.iter().find(|(n, _)| n == name))
            .map(|(_, s)| *s)
    }

    fn sort_name(&self, s: SortId) -> &str {
        &self.sig.sort(s).name
    }

    fn expr(&mut self, e: &Expr) -> Result<TypedExpr, Error> {
        Ok(match e {
            Expr::Const(q) => {
                if q.is_negative() || *q > self.cap {
                    return Err(Error::Sort(format!(
                        "constant {} outside [0, {}]",
                        format_rational(q),
                        format_rational(&self.cap)
                    )));
                }
                TypedExpr::Const(*q)
            }
            Expr::Atom(name, args) => {
                let (decl, args) = self.application(name, args, None, false)?;
                TypedExpr::Atom { decl, args }
            }
            Expr::Dist(a, b) => {
                let saved = self.free.clone();
                let (ta, tb) = match self.term(a, None) {
                    Ok(ta) => {
                        let tb = self.term(b, Some(ta.sort()))?;
                        (ta, tb)
                    }
                    Err(first) => {
                        self.free = saved;
                        let tb = self.term(b, None).map_err(|_| first)?;
                        let ta = self.term(a, Some(tb.sort()))?;
                        (ta, tb)
                    }
                };
                TypedExpr::Dist {
                    sort: ta.sort(),
                    a: ta,
                    b: tb,
                }
            }
            Expr::Half(e) => TypedExpr::Half(Box::new(self.expr(e)?)),
            Expr::Not(e) => TypedExpr::Not(Box::new(self.expr(e)?)),
            Expr::Binary(op, a, b) => TypedExpr::Binary(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Quant(q, var, sort_name, body) => {
                let sort = self
                    .sig
                    .sort_id(sort_name)
                    .ok_or_else(|| Error::Sort(format!("unknown sort `{sort_name}` in binder for `{var}`")))?;
                self.bound.push((var.clone(), sort));
                let body = self.expr(body);
                self.bound.pop();
                TypedExpr::Quant {
                    q: *q,
                    var: var.clone(),
                    sort,
                    body: Box::new(body?),
                }
            }
        })
    }

    fn term(&mut self, t: &Term, expected: Option<SortId>) -> Result<TypedTerm, Error> {
        match t {
            Term::Var(name) => {
                let sort = match self.lookup(name) {
                    Some(s) => s,
                    None => {
                        let s = match expected {
                            Some(s) => s,
                            None if self.sig.sorts().len() == 1 => 0,
                            None => return Err(Error::Sort(format!("cannot infer the sort of free variable `{name}`"))),
                        };
                        self.free.push((name.clone(), s));
                        s
                    }
                };
                if let Some(exp) = expected {
                    if exp != sort {
                        return Err(Error::Sort(format!(
                            "variable `{name}` has sort {} but {} is expected",
                            self.sort_name(sort),
                            self.sort_name(exp)
                        )));
                    }
                }
                Ok(TypedTerm::Var { name: name.clone(), sort })
            }
            Term::App(name, args) => {
                let (decl, args) = self.application(name, args, expected, true)?;
                Ok(TypedTerm::App { decl, args })
            }
        }
    }

    fn application(
        &mut self,
        name: &str,
        args: &[Term],
        expected: Option<SortId>,
        function: bool,
    ) -> Result<(Arc<SymbolDecl>, Vec<TypedTerm>), Error> {
        let all = self.sig.candidates(name);
        let kind = if function { "function" } else { "predicate" };
        let of_kind: Vec<_> = all.into_iter().filter(|d| d.is_function() == function).collect();
        if of_kind.is_empty() {
            return Err(Error::UnknownSymbol(format!("{kind} `{name}`")));
        }
        let arity_ok: Vec<_> = of_kind.iter().filter(|d| d.args.len() == args.len()).collect();
        if arity_ok.is_empty() {
            let expected_arities: Vec<String> = of_kind.iter().map(|d| d.args.len().to_string()).collect();
            return Err(Error::Arity(format!(
                "`{name}` takes {} argument(s), got {}",
                expected_arities.join(" or "),
                args.len()
            )));
        }
        let mut last_err = None;
        for decl in arity_ok {
            if let (Some(exp), Some(res)) = (expected, decl.result_sort()) {
                if exp != res {
                    last_err.get_or_insert_with(|| {
                        Error::Sort(format!(
                            "`{name}` returns {} but {} is expected",
                            self.sort_name(res),
                            self.sort_name(exp)
                        ))
                    });
                    continue;
                }
            }
            let saved = self.free.clone();
            let typed: Result<Vec<_>, _> = args.iter().zip(&decl.args).map(|(a, &s)| self.term(a, Some(s))).collect();
            match typed {
                Ok(typed) => return Ok((Arc::new(decl.clone()), typed)),
                Err(e) => {
                    self.free = saved;
                    last_err = Some(e);
                }
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Sort(format!("no declaration of `{name}` fits"))))
    }
}

/// Static value range of every node, used for cap checks and limit clamping.
pub fn static_range(e: &TypedExpr, sig: &Signature, cap: Rational) -> (Rational, Rational) {
    let zero = Rational::zero();
    match e {
        TypedExpr::Const(q) => (*q, *q),
        TypedExpr::Atom { decl, .. } => decl.range().expect("predicate"),
        TypedExpr::Dist { sort, .. } => (zero, sig.sort(*sort).diameter),
        TypedExpr::Half(e) => {
            let (lo, hi) = static_range(e, sig, cap);
            (lo / 2, hi / 2)
        }
        TypedExpr::Not(e) => {
            let (lo, hi) = static_range(e, sig, cap);
            (cap - hi, cap - lo)
        }
        TypedExpr::Binary(op, a, b) => {
            let (alo, ahi) = static_range(a, sig, cap);
            let (blo, bhi) = static_range(b, sig, cap);
            match op {
                BinOp::Sub => ((alo - bhi).max(zero), (ahi - blo).max(zero)),
                BinOp::Add => ((alo + blo).min(cap), (ahi + bhi).min(cap)),
                BinOp::Min => (alo.min(blo), ahi.min(bhi)),
                BinOp::Max => (alo.max(blo), ahi.max(bhi)),
                BinOp::AbsDiff => {
                    let lo = if ahi < blo {
                        blo - ahi
                    } else if bhi < alo {
                        alo - bhi
                    } else {
                        zero
                    };
                    (lo, (ahi - blo).max(bhi - alo).max(zero))
                }
            }
        }
        TypedExpr::Quant { body, .. } => static_range(body, sig, cap),
    }
}

/// Negations applied to subformulas whose range leaves `[0, C]`.
pub fn cap_warnings(f: &Formula, sig: &Signature) -> Vec<String> {
    fn go(e: &TypedExpr, sig: &Signature, cap: Rational, out: &mut Vec<String>) {
        match e {
            TypedExpr::Not(inner) => {
                let (lo, hi) = static_range(inner, sig, cap);
                if lo.is_negative() || hi > cap {
                    out.push(format!(
                        "not() applied to a subformula with range [{}, {}] outside [0, {}]",
                        format_rational(&lo),
                        format_rational(&hi),
                        format_rational(&cap)
                    ));
                }
                go(inner, sig, cap, out);
            }
            TypedExpr::Half(e) | TypedExpr::Quant { body: e, .. } => go(e, sig, cap, out),
            TypedExpr::Binary(_, a, b) => {
                go(a, sig, cap, out);
                go(b, sig, cap, out);
            }
            TypedExpr::Const(_) | TypedExpr::Atom { .. } | TypedExpr::Dist { .. } => {}
        }
    }
    let mut out = Vec::new();
    go(f.typed(), sig, f.cap(), &mut out);
    out
}

fn term_modulus(t: &TypedTerm, wrt: &dyn Fn(&str) -> bool) -> Option<Modulus> {
    match t {
        TypedTerm::Var { name, .. } => wrt(name).then(Modulus::id),
        TypedTerm::App { decl, args } => positional(&decl.moduli, args, wrt),
    }
}

/// Modulus of a symbol application: argument `j` may move by less than
/// `γ_j(ε/p)` when `p` argument positions depend on the variables.
fn positional(moduli: &[Modulus], args: &[TypedTerm], wrt: &dyn Fn(&str) -> bool) -> Option<Modulus> {
    let inner: Vec<(usize, Modulus)> = args
        .iter()
        .enumerate()
        .filter_map(|(j, a)| term_modulus(a, wrt).map(|m| (j, m)))
        .collect();
    let p = inner.len();
    inner
        .into_iter()
        .map(|(j, m)| m.compose(&moduli[j].split(p)))
        .reduce(|a, b| a.min(&b))
}

fn combine_split(a: Option<Modulus>, b: Option<Modulus>) -> Option<Modulus> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.split(2).min(&b.split(2))),
        (a, b) => a.or(b),
    }
}

fn expr_modulus(e: &TypedExpr, wrt: &dyn Fn(&str) -> bool) -> Option<Modulus> {
    match e {
        TypedExpr::Const(_) => None,
        TypedExpr::Atom { decl, args } => positional(&decl.moduli, args, wrt),
        TypedExpr::Dist { a, b, .. } => positional(&[Modulus::id(), Modulus::id()], &[a.clone(), b.clone()], wrt),
        TypedExpr::Half(e) => expr_modulus(e, wrt).map(|m| {
            let double = Modulus::scale(Rational::new(1, 2)).expect("positive");
            m.compose(&double)
        }),
        TypedExpr::Not(e) => expr_modulus(e, wrt),
        TypedExpr::Binary(op, a, b) => {
            let (ma, mb) = (expr_modulus(a, wrt), expr_modulus(b, wrt));
            match op {
                BinOp::Min | BinOp::Max => match (ma, mb) {
                    (Some(a), Some(b)) => Some(a.min(&b)),
                    (a, b) => a.or(b),
                },
                BinOp::Sub | BinOp::Add | BinOp::AbsDiff => combine_split(ma, mb),
            }
        }
        TypedExpr::Quant { var, body, .. } => {
            let var = var.clone();
            expr_modulus(body, &|n: &str| n != var && wrt(n))
        }
    }
}

/// Modulus of `f` in the single free variable `var`; `None` if `f` does not depend on it.
pub fn derived_modulus_in(f: &Formula, var: &str) -> Option<Modulus> {
    expr_modulus(f.typed(), &|n: &str| n == var)
}

/// A modulus valid in each free variable separately: the minimum over variables.
/// Closed formulas are constant and get `id`.
pub fn derived_modulus(f: &Formula) -> Modulus {
    f.free_vars()
        .iter()
        .filter_map(|(v, _)| derived_modulus_in(f, v))
        .reduce(|a, b| a.min(&b))
        .unwrap_or_else(Modulus::id)
}

/// Modulus for moving all free variables at once, measured in the max-metric on tuples.
pub fn joint_modulus(f: &Formula) -> Modulus {
    let vars: Vec<String> = f.free_vars().iter().map(|(v, _)| v.clone()).collect();
    expr_modulus(f.typed(), &|n: &str| vars.iter().any(|v| v == n)).unwrap_or_else(Modulus::id)
}

/// True when `var` occurs free somewhere in `e`.
pub fn mentions(e: &Expr, var: &str) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Atom(_, args) => args.iter().any(|a| a.mentions(var)),
        Expr::Dist(a, b) => a.mentions(var) || b.mentions(var),
        Expr::Half(e) | Expr::Not(e) => mentions(e, var),
        Expr::Binary(_, a, b) => mentions(a, var) || mentions(b, var),
        Expr::Quant(_, v, _, body) => v != var && mentions(body, var),
    }
}
