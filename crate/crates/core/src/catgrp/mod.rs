//! Automorphism groups of finite structures and the group-theoretic reports built on them.
//!
//! On finite carriers every subgroup is compact and clopen; the reports here check the
//! constructions and defect formulas, not any non-compactness hypothesis.

use std::collections::{HashSet, VecDeque};

use itertools::Itertools;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::mstruct::{MetricStructure, Point};
use crate::real::{format_rational, Rational, Real};
use crate::sigform::SortId;
use crate::typespace::{realized_types, TypeFamily};
use crate::Error;

mod groups;

pub use groups::{
    boundedness_battery, cayley_bound, chain_validate, definability_defect, g_rho, quotient_orbits, Attempt, BatteryReport, CayleyBound,
    ChainReport, ChainViolation, DefinabilityReport, FormResult, GRhoResult, GroupView, QuotientReport,
};

/// Header carried by every report of this module.
pub const FINITE_NOTE: &str = "finite carrier: every subgroup is compact and clopen";

pub const DEFAULT_AUT_CAP: usize = 5000;

/// Searches stop with [`Error::Limit`] past this many automorphisms.
pub const MAX_AUTOMORPHISMS: usize = 200_000;

/// Structure automorphisms of a one-sorted finite structure, as permutations of
/// the sort's member positions. Members are sorted lexicographically; `maps[0]` is the identity.
#[derive(Clone, Debug, Serialize)]
pub struct AutGroup {
    #[serde(skip)]
    pub sort: SortId,
    /// Universe indices of the sort's members.
    #[serde(skip)]
    pub points: Vec<usize>,
    pub labels: Vec<String>,
    pub maps: Vec<Vec<usize>>,
    /// Indices into `maps` generating the group.
    pub generators: Vec<usize>,
    /// Candidate maps examined by the search.
    pub candidates: usize,
}

impl AutGroup {
    pub fn order(&self) -> usize {
        self.maps.len()
    }

    pub fn contains(&self, map: &[usize]) -> bool {
        self.maps.binary_search_by(|m| m.as_slice().cmp(map)).is_ok()
    }

    /// `a ∘ b`.
    pub fn compose(&self, a: usize, b: usize) -> Vec<usize> {
        self.maps[b].iter().map(|&i| self.maps[a][i]).collect()
    }

    pub fn inverse(&self, a: usize) -> Vec<usize> {
        let mut out = vec![0; self.points.len()];
        for (i, &j) in self.maps[a].iter().enumerate() {
            out[j] = i;
        }
        out
    }

    /// Image of a universe index under `maps[a]`.
    pub fn apply(&self, a: usize, point: usize) -> usize {
        let i = self.points.iter().position(|&p| p == point).expect("point of the sort");
        self.points[self.maps[a][i]]
    }

    /// Orbits on member positions, each sorted, in order of least element.
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let n = self.points.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for i in 0..n {
            if seen[i] {
                continue;
            }
            let orbit: Vec<usize> = self.maps.iter().map(|m| m[i]).sorted().dedup().collect();
            for &j in &orbit {
                seen[j] = true;
            }
            out.push(orbit);
        }
        out
    }
}

/// The single finite sort of `m` with its member list.
fn only_sort(m: &MetricStructure) -> Result<(SortId, Vec<usize>), Error> {
    let sig = m.signature();
    if sig.sorts().len() != 1 {
        return Err(Error::Structure("automorphism search needs a one-sorted structure".into()));
    }
    let members = m
        .member_indices(0)
        .ok_or_else(|| Error::Structure("automorphism search needs a finite sort".into()))?;
    let mut members = members.to_vec();
    members.sort_unstable();
    Ok((0, members))
}

struct Carrier<'m> {
    m: &'m MetricStructure,
    points: Vec<usize>,
    dist: Vec<Rational>,
}

impl<'m> Carrier<'m> {
    fn new(m: &'m MetricStructure, points: Vec<usize>) -> Self {
        let u = m.universe_of(0).expect("finite sort");
        let n = points.len();
        let dist = (0..n * n).map(|k| u.dist(points[k / n], points[k % n])).collect();
        Carrier { m, points, dist }
    }

    fn n(&self) -> usize {
        self.points.len()
    }

    fn d(&self, a: usize, b: usize) -> Rational {
        self.dist[a * self.n() + b]
    }

    fn position(&self, universe: usize) -> usize {
        self.points.binary_search(&universe).expect("value in the carrier")
    }

    fn isometric(&self, map: &[usize]) -> bool {
        let n = self.n();
        (0..n).all(|a| (0..n).all(|b| self.d(a, b) == self.d(map[a], map[b])))
    }

    /// Every function commutes with `map`, every predicate is preserved within `tol`.
    fn preserves(&self, map: &[usize], tol: f64) -> bool {
        let sig = self.m.signature();
        let n = self.n();
        for (idx, decl) in sig.symbols().iter().enumerate() {
            let Some(interp) = self.m.interp_at(idx) else { continue };
            let tuples: Box<dyn Iterator<Item = Vec<usize>>> = if decl.args.is_empty() {
                Box::new(std::iter::once(Vec::new()))
            } else {
                Box::new((0..decl.args.len()).map(|_| 0..n).multi_cartesian_product())
            };
            for t in tuples {
                let here: Vec<Point> = t.iter().map(|&i| Point::Elem(self.points[i])).collect();
                let there: Vec<Point> = t.iter().map(|&i| Point::Elem(self.points[map[i]])).collect();
                if decl.is_function() {
                    let a = self.position(interp.apply(&here).elem().expect("finite value"));
                    let b = self.position(interp.apply(&there).elem().expect("finite value"));
                    if map[a] != b {
                        return false;
                    }
                } else if !interp.value(&here).approx_eq(interp.value(&there), tol) {
                    return false;
                }
            }
        }
        true
    }
}

fn op_table(m: &MetricStructure, c: &Carrier, name: &str, arity: usize) -> Option<Vec<usize>> {
    let decl = m
        .signature()
        .candidates(name)
        .into_iter()
        .find(|d| d.args.len() == arity && d.result_sort() == Some(0))?;
    let interp = m.interp_of(&decl)?;
    let n = c.n();
    let tuples: Vec<Vec<usize>> = if arity == 0 {
        vec![Vec::new()]
    } else {
        (0..arity).map(|_| 0..n).multi_cartesian_product().collect()
    };
    Some(
        tuples
            .iter()
            .map(|t| {
                let args: Vec<Point> = t.iter().map(|&i| Point::Elem(c.points[i])).collect();
                c.position(interp.apply(&args).elem().expect("finite value"))
            })
            .collect(),
    )
}

/// Smallest generating set found greedily in position order, from the multiplication table.
fn greedy_generators(n: usize, mul: &[usize], id: usize) -> Vec<usize> {
    let mut gens = Vec::new();
    let mut reached = closure(n, mul, id, &gens);
    for g in 0..n {
        if !reached[g] {
            gens.push(g);
            reached = closure(n, mul, id, &gens);
        }
    }
    gens
}

fn closure(n: usize, mul: &[usize], id: usize, gens: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[id] = true;
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for &s in gens {
            let y = mul[x * n + s];
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    seen
}

fn element_order(n: usize, mul: &[usize], id: usize, g: usize) -> usize {
    // 0 marks a non-group table where powers never return to 1
    let (mut x, mut k) = (g, 1);
    while x != id {
        if k > n {
            return 0;
        }
        x = mul[x * n + g];
        k += 1;
    }
    k
}

/// Group path: images of a generating set determine the map; pruned by distances to 1,
/// element orders and pairwise generator distances.
fn search_group(c: &Carrier, mul: &[usize], id: usize, tol: f64) -> Result<(Vec<Vec<usize>>, usize), Error> {
    let n = c.n();
    let gens = greedy_generators(n, mul, id);
    // spanning tree: element = parent · generator
    let mut tree: Vec<(usize, usize, usize)> = Vec::new();
    let mut seen = vec![false; n];
    seen[id] = true;
    let mut queue = VecDeque::from([id]);
    while let Some(x) = queue.pop_front() {
        for (k, &s) in gens.iter().enumerate() {
            let y = mul[x * n + s];
            if !seen[y] {
                seen[y] = true;
                tree.push((y, x, k));
                queue.push_back(y);
            }
        }
    }
    let orders: Vec<usize> = (0..n).map(|g| element_order(n, mul, id, g)).collect();
    let options: Vec<Vec<usize>> = gens
        .iter()
        .map(|&s| (0..n).filter(|&t| orders[t] == orders[s] && c.d(t, id) == c.d(s, id)).collect())
        .collect();
    let mut assignments: Vec<Vec<usize>> = Vec::new();
    let mut current = Vec::with_capacity(gens.len());
    fn extend(
        c: &Carrier,
        gens: &[usize],
        options: &[Vec<usize>],
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<(), Error> {
        let k = current.len();
        if k == gens.len() {
            if out.len() >= MAX_AUTOMORPHISMS * 4 {
                return Err(Error::Limit(format!("more than {} generator images", MAX_AUTOMORPHISMS * 4)));
            }
            out.push(current.clone());
            return Ok(());
        }
        for &t in &options[k] {
            if (0..k).all(|j| c.d(current[j], t) == c.d(gens[j], gens[k])) {
                current.push(t);
                extend(c, gens, options, current, out)?;
                current.pop();
            }
        }
        Ok(())
    }
    extend(c, &gens, &options, &mut current, &mut assignments)?;
    let tried = assignments.len();
    let mut maps: Vec<Vec<usize>> = assignments
        .par_iter()
        .filter_map(|images| {
            let mut map = vec![usize::MAX; n];
            map[id] = id;
            for &(y, x, k) in &tree {
                map[y] = mul[map[x] * n + images[k]];
            }
            let mut hit = vec![false; n];
            for &v in &map {
                if std::mem::replace(&mut hit[v], true) {
                    return None;
                }
            }
            (c.isometric(&map) && c.preserves(&map, tol)).then_some(map)
        })
        .collect();
    maps.sort_unstable();
    Ok((maps, tried))
}

/// Metric path: point-by-point backtracking preserving distances, unary predicates
/// and constants.
fn search_points(c: &Carrier, tol: f64) -> Result<(Vec<Vec<usize>>, usize), Error> {
    let n = c.n();
    let m = c.m;
    let sig = m.signature();
    let mut fixed = vec![false; n];
    let mut unary: Vec<Vec<Real>> = Vec::new();
    for (idx, decl) in sig.symbols().iter().enumerate() {
        let Some(interp) = m.interp_at(idx) else { continue };
        if decl.is_function() && decl.args.is_empty() {
            fixed[c.position(interp.apply(&[]).elem().expect("finite value"))] = true;
        } else if !decl.is_function() && decl.args.len() == 1 {
            unary.push((0..n).map(|i| interp.value(&[Point::Elem(c.points[i])])).collect());
        }
    }
    struct Search<'a, 'm> {
        c: &'a Carrier<'m>,
        fixed: Vec<bool>,
        unary: Vec<Vec<Real>>,
        tol: f64,
        map: Vec<usize>,
        used: Vec<bool>,
        out: Vec<Vec<usize>>,
        tried: usize,
    }
    impl Search<'_, '_> {
        fn go(&mut self, i: usize) -> Result<(), Error> {
            let n = self.c.n();
            if i == n {
                self.tried += 1;
                if self.c.preserves(&self.map, self.tol) {
                    if self.out.len() >= MAX_AUTOMORPHISMS {
                        return Err(Error::Limit(format!("more than {MAX_AUTOMORPHISMS} automorphisms")));
                    }
                    self.out.push(self.map.clone());
                }
                return Ok(());
            }
            for t in 0..n {
                if self.used[t] || (self.fixed[i] && t != i) {
                    continue;
                }
                let ok =
                    self.unary.iter().all(|p| p[i].approx_eq(p[t], self.tol)) && (0..i).all(|j| self.c.d(j, i) == self.c.d(self.map[j], t));
                if ok {
                    self.map[i] = t;
                    self.used[t] = true;
                    self.go(i + 1)?;
                    self.used[t] = false;
                }
            }
            Ok(())
        }
    }
    let mut s = Search {
        c,
        fixed,
        unary,
        tol,
        map: vec![0; n],
        used: vec![false; n],
        out: Vec::new(),
        tried: 0,
    };
    s.go(0)?;
    Ok((s.out, s.tried))
}

fn aut_generators(maps: &[Vec<usize>]) -> Vec<usize> {
    let mut gens: Vec<usize> = Vec::new();
    let mut reached: HashSet<Vec<usize>> = HashSet::from([maps[0].clone()]);
    for (k, m) in maps.iter().enumerate() {
        if reached.contains(m) {
            continue;
        }
        gens.push(k);
        let mut queue: VecDeque<Vec<usize>> = reached.iter().cloned().collect();
        while let Some(x) = queue.pop_front() {
            for &g in &gens {
                let y: Vec<usize> = maps[g].iter().map(|&i| x[i]).collect();
                if reached.insert(y.clone()) {
                    queue.push_back(y);
                }
            }
        }
    }
    gens
}

/// All automorphisms of a one-sorted finite structure with at most `cap` points.
/// Group structures (with `mul` and `1`) are searched through generator images,
/// others point by point.
pub fn automorphisms(m: &MetricStructure, cap: usize, tol: f64) -> Result<AutGroup, Error> {
    let (sort, points) = only_sort(m)?;
    if points.len() > cap {
        return Err(Error::Limit(format!("carrier has {} points, cap is {cap}", points.len())));
    }
    let c = Carrier::new(m, points);
    let group_ops = op_table(m, &c, "mul", 2).zip(op_table(m, &c, "1", 0));
    let (maps, candidates) = match group_ops {
        Some((mul, one)) => search_group(&c, &mul, one[0], tol)?,
        None => search_points(&c, tol)?,
    };
    if maps.len() > MAX_AUTOMORPHISMS {
        return Err(Error::Limit(format!("more than {MAX_AUTOMORPHISMS} automorphisms")));
    }
    let u = m.universe_of(sort).expect("finite sort");
    let generators = aut_generators(&maps);
    Ok(AutGroup {
        sort,
        labels: c.points.iter().map(|&p| u.label(p)).collect(),
        points: c.points,
        maps,
        generators,
        candidates,
    })
}

/// Which representative, automorphism and distance cover one tuple.
#[derive(Clone, Debug, Serialize)]
pub struct OligoCover {
    pub tuple: Vec<String>,
    pub rep: usize,
    pub aut: usize,
    pub distance: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct OligoReport {
    pub note: &'static str,
    pub n: usize,
    pub eps: String,
    pub aut_order: usize,
    pub reps: Vec<Vec<String>>,
    pub certificate: Vec<OligoCover>,
    #[serde(skip)]
    rep_tuples: Vec<Vec<usize>>,
    #[serde(skip)]
    covers: Vec<(usize, usize, Rational)>,
}

impl OligoReport {
    /// Recomputes every certificate entry: `d(α(rep), tuple) ≤ ε` in the max metric.
    pub fn validate(&self, m: &MetricStructure, aut: &AutGroup, eps: Rational) -> bool {
        let c = Carrier::new(m, aut.points.clone());
        let np = c.n();
        self.covers.iter().enumerate().all(|(code, &(rep, a, dist))| {
            let t = decode(code, np, self.n);
            let img: Vec<usize> = self.rep_tuples[rep].iter().map(|&i| aut.maps[a][i]).collect();
            let d = t.iter().zip(&img).map(|(&x, &y)| c.d(x, y)).max().unwrap_or_else(Rational::zero);
            d == dist && d <= eps
        })
    }
}

fn decode(mut code: usize, base: usize, n: usize) -> Vec<usize> {
    let mut t = vec![0; n];
    for slot in t.iter_mut().rev() {
        *slot = code % base;
        code /= base;
    }
    t
}

fn encode(t: &[usize], base: usize) -> usize {
    t.iter().fold(0, |acc, &x| acc * base + x)
}

/// Greedy `F ⊆ Mⁿ` with `Aut(M)·F` ε-dense in the max metric: the first uncovered tuple
/// in lexicographic order becomes a representative until every tuple is covered.
pub fn approx_oligo(m: &MetricStructure, n: usize, eps: Rational, aut: &AutGroup) -> Result<OligoReport, Error> {
    if n == 0 {
        return Err(Error::Input("tuple length must be positive".into()));
    }
    let c = Carrier::new(m, aut.points.clone());
    let np = c.n();
    let total = np
        .checked_pow(n as u32)
        .filter(|&t| t <= crate::typespace::MAX_TUPLES)
        .ok_or_else(|| Error::Limit(format!("more than {} tuples", crate::typespace::MAX_TUPLES)))?;
    let near: Vec<Vec<usize>> = (0..np).map(|a| (0..np).filter(|&b| c.d(a, b) <= eps).collect()).collect();
    let mut covers: Vec<Option<(usize, usize, Rational)>> = vec![None; total];
    let mut reps = Vec::new();
    for code in 0..total {
        if covers[code].is_some() {
            continue;
        }
        let t = decode(code, np, n);
        let rep = reps.len();
        for (a, map) in aut.maps.iter().enumerate() {
            let img: Vec<usize> = t.iter().map(|&i| map[i]).collect();
            for u in img.iter().map(|&i| near[i].iter().copied()).multi_cartesian_product() {
                let k = encode(&u, np);
                let d = u.iter().zip(&img).map(|(&x, &y)| c.d(x, y)).max().unwrap_or_else(Rational::zero);
                if covers[k].is_none() {
                    covers[k] = Some((rep, a, d));
                }
            }
        }
        reps.push(t);
    }
    let covers: Vec<(usize, usize, Rational)> = covers.into_iter().map(|c| c.expect("every tuple covered")).collect();
    let label = |t: &[usize]| t.iter().map(|&i| aut.labels[i].clone()).collect::<Vec<_>>();
    Ok(OligoReport {
        note: FINITE_NOTE,
        n,
        eps: format_rational(&eps),
        aut_order: aut.order(),
        reps: reps.iter().map(|t| label(t)).collect(),
        certificate: covers
            .iter()
            .enumerate()
            .map(|(code, (rep, a, d))| OligoCover {
                tuple: label(&decode(code, np, n)),
                rep: *rep,
                aut: *a,
                distance: format_rational(d),
            })
            .collect(),
        rep_tuples: reps,
        covers,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NearHomogReport {
    pub note: &'static str,
    pub family: String,
    /// `max_{a, c} [min_α max_i d(α(c_i), a_i) − type distance]`.
    pub defect: Real,
    pub worst: Option<(Vec<String>, Vec<String>)>,
    pub eps: String,
    pub holds: bool,
}

/// Near-homogeneity defect over all pairs of `n`-tuples, against the realized type distance
/// of `family` (whose variables must all range over the structure's sort).
pub fn near_homog_defect(
    m: &MetricStructure,
    n: usize,
    family: &TypeFamily,
    eps: Rational,
    aut: &AutGroup,
    tol: f64,
) -> Result<NearHomogReport, Error> {
    if family.arity() != n {
        return Err(Error::Arity(format!("family has {} variables, expected {n}", family.arity())));
    }
    if family.vars.iter().any(|v| v.1 != aut.sort) {
        return Err(Error::Sort("family variables must range over the structure's sort".into()));
    }
    let space = realized_types(m, family, tol)?;
    let c = Carrier::new(m, aut.points.clone());
    let np = c.n();
    // realized_types enumerates member tuples in member order; translate to sorted positions
    let member_order: Vec<usize> = m
        .member_indices(aut.sort)
        .expect("finite sort")
        .iter()
        .map(|&p| c.position(p))
        .collect();
    let total = space.points.len();
    let mut class = vec![0; total];
    let mut tuples = vec![Vec::new(); total];
    for (k, members) in space.classes.iter().enumerate() {
        for &i in members {
            class[i] = k;
        }
    }
    for (i, t) in tuples.iter_mut().enumerate() {
        *t = decode(i, np, n).iter().map(|&j| member_order[j]).collect();
    }
    let dist = space.distance_matrix(m);
    let rows: Vec<(Real, usize)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let a = &tuples[i];
            (0..total)
                .map(|j| {
                    let cbar = &tuples[j];
                    let best = aut
                        .maps
                        .iter()
                        .map(|map| {
                            a.iter()
                                .zip(cbar)
                                .map(|(&x, &y)| c.d(map[y], x))
                                .max()
                                .unwrap_or_else(Rational::zero)
                        })
                        .min()
                        .expect("identity present");
                    (Real::Exact(best).sub(dist[class[i]][class[j]]), j)
                })
                .fold((Real::Exact(Rational::from_integer(-1_000_000)), 0), |acc, x| {
                    if x.0 > acc.0 {
                        x
                    } else {
                        acc
                    }
                })
        })
        .collect();
    let (i, (defect, j)) = rows
        .iter()
        .enumerate()
        .fold((0, rows[0]), |acc, (i, &x)| if x.0 > acc.1 .0 { (i, x) } else { acc });
    let label = |t: &[usize]| t.iter().map(|&p| aut.labels[p].clone()).collect::<Vec<_>>();
    Ok(NearHomogReport {
        note: FINITE_NOTE,
        family: family.describe(),
        defect,
        worst: (defect > Real::zero()).then(|| (label(&tuples[i]), label(&tuples[j]))),
        eps: format_rational(&eps),
        holds: defect <= Real::Exact(eps),
    })
}

#[cfg(test)]
mod tests;
