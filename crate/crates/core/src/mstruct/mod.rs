//! Metric structures: carriers, metrics and symbol interpretations.

mod file;
mod group;
mod hilbert;
mod tree;

use std::fmt;
use std::sync::Arc;

use crate::real::{Rational, Real};
use crate::sigform::{Field, Signature, SortId, SymbolDecl, SymbolKind};
use crate::Error;

pub use file::{load_structure, StructureSpec};
pub use group::{
    cyclic_table, discrete_wrap, gn_family, group_signature, group_structure, perm_label, sym_hamming, symmetric_table, FiniteGroup,
    GroupMul, DEFAULT_SYM_CAP,
};
pub use hilbert::{hilbert_signature, hilbert_tower, scalar_apply};
pub use tree::{tree_space, PointedTree};

/// A point of some sort: an element index of a finite universe, or a coordinate vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Elem(usize),
    Vector(Arc<[f64]>),
}

impl Point {
    pub fn vector(coords: Vec<f64>) -> Point {
        Point::Vector(coords.into())
    }

    pub fn elem(&self) -> Option<usize> {
        match self {
            Point::Elem(i) => Some(*i),
            Point::Vector(_) => None,
        }
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Vector(v) => Some(v),
            Point::Elem(_) => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Elem(i) => write!(f, "#{i}"),
            Point::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub enum Metric {
    /// Row-major `n x n` table.
    Table { n: usize, data: Vec<Rational> },
    /// Normalized Hamming distance between permutations.
    Hamming { perms: Arc<Vec<Vec<u8>>> },
    /// `d(x, y) = 1` iff `x != y`.
    Discrete,
}

impl Metric {
    pub fn dist(&self, a: usize, b: usize) -> Rational {
        match self {
            Metric::Table { n, data } => data[a * n + b],
            Metric::Hamming { perms } => {
                let (p, q) = (&perms[a], &perms[b]);
                let moved = p.iter().zip(q.iter()).filter(|(x, y)| x != y).count();
                Rational::new(moved as i64, p.len().max(1) as i64)
            }
            Metric::Discrete => {
                if a == b {
                    Rational::from_integer(0)
                } else {
                    Rational::from_integer(1)
                }
            }
        }
    }
}

/// A finite point set with a metric; several sorts may be subsets of one universe.
#[derive(Clone, Debug)]
pub struct Universe {
    pub name: String,
    pub size: usize,
    pub metric: Metric,
    pub labels: Vec<String>,
}

impl Universe {
    pub fn dist(&self, a: usize, b: usize) -> Rational {
        self.metric.dist(a, b)
    }

    pub fn find(&self, label: &str) -> Option<usize> {
        if let Some(i) = self.labels.iter().position(|l| l == label) {
            return Some(i);
        }
        let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>();
        let want = squash(label);
        self.labels.iter().position(|l| squash(l) == want)
    }

    pub fn label(&self, i: usize) -> String {
        self.labels.get(i).cloned().unwrap_or_else(|| i.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Carrier {
    Finite {
        universe: usize,
        members: Vec<usize>,
    },
    /// Closed ball (or its boundary sphere) in `R^dim`; complex towers use `2 * dim` real coordinates.
    Ball {
        dim: usize,
        radius: f64,
        sphere: bool,
    },
}

pub type NativeFn = Arc<dyn Fn(&[Point]) -> Point + Send + Sync>;
pub type NativePred = Arc<dyn Fn(&[Point]) -> Real + Send + Sync>;

#[derive(Clone)]
pub enum Interp {
    /// Function table over universe indices of the arguments, row-major.
    FnTable {
        sizes: Vec<usize>,
        data: Vec<u32>,
    },
    Fn(NativeFn),
    PredTable {
        sizes: Vec<usize>,
        data: Vec<Rational>,
    },
    Pred(NativePred),
}

impl fmt::Debug for Interp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interp::FnTable { sizes, .. } => write!(f, "FnTable{sizes:?}"),
            Interp::Fn(_) => f.write_str("Fn(native)"),
            Interp::PredTable { sizes, .. } => write!(f, "PredTable{sizes:?}"),
            Interp::Pred(_) => f.write_str("Pred(native)"),
        }
    }
}

fn table_index(sizes: &[usize], args: &[Point]) -> usize {
    let mut idx = 0;
    for (s, a) in sizes.iter().zip(args) {
        idx = idx * s + a.elem().expect("table interpretation over finite arguments");
    }
    idx
}

impl Interp {
    pub fn apply(&self, args: &[Point]) -> Point {
        match self {
            Interp::FnTable { sizes, data } => Point::Elem(data[table_index(sizes, args)] as usize),
            Interp::Fn(f) => f(args),
            _ => panic!("predicate interpretation used as a function"),
        }
    }

    pub fn value(&self, args: &[Point]) -> Real {
        match self {
            Interp::PredTable { sizes, data } => Real::Exact(data[table_index(sizes, args)]),
            Interp::Pred(p) => p(args),
            _ => panic!("function interpretation used as a predicate"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetricStructure {
    pub name: String,
    sig: Signature,
    universes: Vec<Universe>,
    carriers: Vec<Option<Carrier>>,
    interps: Vec<Option<Interp>>,
    field: Option<Field>,
    group: Option<Arc<FiniteGroup>>,
    tree: Option<Arc<PointedTree>>,
}

impl MetricStructure {
    pub fn new(name: &str, sig: Signature) -> Self {
        let carriers = vec![None; sig.sorts().len()];
        let interps = vec![None; sig.symbols().len()];
        MetricStructure {
            name: name.to_string(),
            sig,
            universes: Vec::new(),
            carriers,
            interps,
            field: None,
            group: None,
            tree: None,
        }
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn add_universe(&mut self, u: Universe) -> usize {
        self.universes.push(u);
        self.universes.len() - 1
    }

    pub fn universes(&self) -> &[Universe] {
        &self.universes
    }

    pub fn universe(&self, i: usize) -> &Universe {
        &self.universes[i]
    }

    pub fn set_carrier(&mut self, sort: SortId, c: Carrier) {
        self.carriers[sort] = Some(c);
    }

    pub fn carrier(&self, sort: SortId) -> &Carrier {
        self.carriers[sort].as_ref().expect("validated structure has every carrier")
    }

    pub fn set_field(&mut self, field: Field) {
        self.field = Some(field);
    }

    pub fn field(&self) -> Option<Field> {
        self.field
    }

    pub fn set_group(&mut self, g: Arc<FiniteGroup>) {
        self.group = Some(g);
    }

    /// The underlying finite group, for structures built from one.
    pub fn group(&self) -> Option<&Arc<FiniteGroup>> {
        self.group.as_ref()
    }

    pub fn set_tree(&mut self, t: Arc<PointedTree>) {
        self.tree = Some(t);
    }

    /// The underlying pointed tree, for structures built by [`tree_space`].
    pub fn tree(&self) -> Option<&Arc<PointedTree>> {
        self.tree.as_ref()
    }

    /// Copy whose signature is extended by `f`; existing sorts and symbols keep their ids.
    /// New sorts and symbols start without carriers or interpretations.
    pub fn extend(&self, name: &str, f: impl FnOnce(&mut Signature) -> Result<(), Error>) -> Result<MetricStructure, Error> {
        let mut out = self.clone();
        out.name = name.to_string();
        f(&mut out.sig)?;
        let (old_sorts, old_syms) = (self.sig.sorts().len(), self.sig.symbols().len());
        if out.sig.sorts()[..old_sorts] != self.sig.sorts()[..] || out.sig.symbols()[..old_syms] != self.sig.symbols()[..] {
            return Err(Error::Signature("an extension may only append sorts and symbols".into()));
        }
        out.carriers.resize(out.sig.sorts().len(), None);
        out.interps.resize(out.sig.symbols().len(), None);
        Ok(out)
    }

    /// Interprets every declaration of `name` with these argument sorts.
    pub fn interpret(&mut self, name: &str, args: &[SortId], interp: Interp) -> Result<(), Error> {
        let idxs: Vec<usize> = (0..self.sig.symbols().len())
            .filter(|&i| self.sig.symbols()[i].name == name && self.sig.symbols()[i].args == args)
            .collect();
        if idxs.is_empty() {
            return Err(Error::Structure(format!("no declaration of `{name}` with these argument sorts")));
        }
        for i in idxs {
            self.interps[i] = Some(interp.clone());
        }
        Ok(())
    }

    pub fn interpret_at(&mut self, idx: usize, interp: Interp) {
        self.interps[idx] = Some(interp);
    }

    pub fn interp_of(&self, decl: &SymbolDecl) -> Option<&Interp> {
        let idx = self.sig.decl_index(decl)?;
        self.interps[idx].as_ref()
    }

    pub fn interp_at(&self, idx: usize) -> Option<&Interp> {
        self.interps.get(idx).and_then(Option::as_ref)
    }

    pub fn sort_id(&self, name: &str) -> Result<SortId, Error> {
        self.sig.sort_id(name).ok_or_else(|| Error::Sort(format!("unknown sort `{name}`")))
    }

    /// Members of a finite sort, as points.
    pub fn members(&self, sort: SortId) -> Option<Vec<Point>> {
        match self.carrier(sort) {
            Carrier::Finite { members, .. } => Some(members.iter().map(|&i| Point::Elem(i)).collect()),
            Carrier::Ball { .. } => None,
        }
    }

    pub fn member_indices(&self, sort: SortId) -> Option<&[usize]> {
        match self.carrier(sort) {
            Carrier::Finite { members, .. } => Some(members),
            Carrier::Ball { .. } => None,
        }
    }

    pub fn is_finite(&self, sort: SortId) -> bool {
        matches!(self.carrier(sort), Carrier::Finite { .. })
    }

    pub fn universe_of(&self, sort: SortId) -> Option<&Universe> {
        match self.carrier(sort) {
            Carrier::Finite { universe, .. } => Some(&self.universes[*universe]),
            Carrier::Ball { .. } => None,
        }
    }

    /// A point of `sort` by label (finite sorts only).
    pub fn point(&self, sort: SortId, label: &str) -> Result<Point, Error> {
        let u = self
            .universe_of(sort)
            .ok_or_else(|| Error::Sort(format!("sort `{}` has no labelled points", self.sig.sort(sort).name)))?;
        let i = u
            .find(label)
            .ok_or_else(|| Error::Input(format!("no point labelled `{label}` in `{}`", u.name)))?;
        if !self.member_indices(sort).is_some_and(|m| m.contains(&i)) {
            return Err(Error::Input(format!("`{label}` is not in sort `{}`", self.sig.sort(sort).name)));
        }
        Ok(Point::Elem(i))
    }

    pub fn label(&self, sort: SortId, p: &Point) -> String {
        match (self.universe_of(sort), p) {
            (Some(u), Point::Elem(i)) => u.label(*i),
            _ => p.to_string(),
        }
    }

    pub fn dist(&self, sort: SortId, a: &Point, b: &Point) -> Real {
        match (self.carrier(sort), a, b) {
            (Carrier::Finite { universe, .. }, Point::Elem(x), Point::Elem(y)) => Real::Exact(self.universes[*universe].dist(*x, *y)),
            (_, Point::Vector(x), Point::Vector(y)) => Real::Approx(euclid(x, y)),
            _ => panic!("point kind does not match sort"),
        }
    }

    /// Whether `p` is a point of `sort` (within `tol` for balls).
    pub fn contains(&self, sort: SortId, p: &Point, tol: f64) -> bool {
        match (self.carrier(sort), p) {
            (Carrier::Finite { members, .. }, Point::Elem(i)) => members.contains(i),
            (Carrier::Ball { dim, radius, sphere }, Point::Vector(v)) => {
                let n = norm(v);
                v.len() == *dim && if *sphere { (n - radius).abs() <= tol } else { n <= radius + tol }
            }
            _ => false,
        }
    }

    /// Copy with `sort` restricted to a subset of its members.
    pub fn restrict(&self, sort: SortId, keep: &[usize]) -> Result<MetricStructure, Error> {
        let mut out = self.clone();
        match out.carriers[sort].as_mut() {
            Some(Carrier::Finite { members, .. }) => {
                if keep.is_empty() || keep.iter().any(|k| !members.contains(k)) {
                    return Err(Error::Structure("restriction must be a nonempty subset of the sort".into()));
                }
                *members = keep.to_vec();
                Ok(out)
            }
            _ => Err(Error::Structure("only finite sorts can be restricted".into())),
        }
    }

    /// Replaces one metric entry (both orders unless `one_sided`) in a table universe.
    pub fn corrupt_metric(&mut self, universe: usize, a: usize, b: usize, value: Rational, one_sided: bool) {
        let u = &mut self.universes[universe];
        let n = u.size;
        let mut data: Vec<Rational> = match &u.metric {
            Metric::Table { data, .. } => data.clone(),
            other => (0..n * n).map(|k| other.dist(k / n, k % n)).collect(),
        };
        data[a * n + b] = value;
        if !one_sided {
            data[b * n + a] = value;
        }
        u.metric = Metric::Table { n, data };
    }

    /// Checks carriers and interpretations are present and metrics are metrics.
    pub fn validate(&self) -> Result<(), Error> {
        for (id, s) in self.sig.sorts().iter().enumerate() {
            let c = self.carriers[id]
                .as_ref()
                .ok_or_else(|| Error::Structure(format!("sort `{}` has no carrier", s.name)))?;
            if let Carrier::Finite { universe, members } = c {
                let u = self
                    .universes
                    .get(*universe)
                    .ok_or_else(|| Error::Structure(format!("sort `{}` refers to a missing universe", s.name)))?;
                if members.is_empty() {
                    return Err(Error::Structure(format!("sort `{}` is empty", s.name)));
                }
                if members.iter().any(|&m| m >= u.size) {
                    return Err(Error::Structure(format!("sort `{}` has members outside its universe", s.name)));
                }
                if members.len() > 2000 {
                    continue;
                }
                for &a in members {
                    for &b in members {
                        if u.dist(a, b) > s.diameter {
                            return Err(Error::Structure(format!("sort `{}` exceeds its declared diameter", s.name)));
                        }
                    }
                }
            }
        }
        for u in &self.universes {
            if u.size <= 60 {
                if let Some(msg) = metric_violation(u) {
                    return Err(Error::Structure(format!("universe `{}`: {msg}", u.name)));
                }
            }
        }
        for (idx, d) in self.sig.symbols().iter().enumerate() {
            let Some(interp) = &self.interps[idx] else {
                return Err(Error::Structure(format!("symbol `{}` is not interpreted", d.name)));
            };
            let is_fn = matches!(interp, Interp::Fn(_) | Interp::FnTable { .. });
            if is_fn != matches!(d.kind, SymbolKind::Function { .. }) {
                return Err(Error::Structure(format!(
                    "symbol `{}` has the wrong kind of interpretation",
                    d.name
                )));
            }
        }
        Ok(())
    }
}

/// First violated metric axiom of a finite universe, checked exhaustively.
pub fn metric_violation(u: &Universe) -> Option<String> {
    let n = u.size;
    let zero = Rational::from_integer(0);
    for a in 0..n {
        if u.dist(a, a) != zero {
            return Some(format!("d({0},{0}) != 0", u.label(a)));
        }
        for b in 0..n {
            let dab = u.dist(a, b);
            if dab < zero || (a != b && dab == zero) {
                return Some(format!("d({},{}) is not positive", u.label(a), u.label(b)));
            }
            if dab != u.dist(b, a) {
                return Some(format!("d({},{}) is not symmetric", u.label(a), u.label(b)));
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let dab = u.dist(a, b);
            for c in 0..n {
                if dab > u.dist(a, c) + u.dist(c, b) {
                    return Some(format!(
                        "triangle inequality fails for {}, {}, {}",
                        u.label(a),
                        u.label(b),
                        u.label(c)
                    ));
                }
            }
        }
    }
    None
}

/// Table universe from a rational distance matrix.
pub fn table_universe(name: &str, rows: Vec<Vec<Rational>>, labels: Vec<String>) -> Result<Universe, Error> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Structure(format!("metric of `{name}` is not square")));
    }
    Ok(Universe {
        name: name.to_string(),
        size: n,
        metric: Metric::Table {
            n,
            data: rows.into_iter().flatten().collect(),
        },
        labels,
    })
}

/// Largest distance in a finite universe, used as the sort diameter.
pub fn diameter(u: &Universe, members: &[usize]) -> Rational {
    let mut best = Rational::from_integer(0);
    for &a in members {
        for &b in members {
            best = best.max(u.dist(a, b));
        }
    }
    best
}
