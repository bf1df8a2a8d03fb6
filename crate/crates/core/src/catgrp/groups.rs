//! Set-level computations in a finite metric group: covers by products of balls,
//! Cayley bounds, chains, `G_ρ` and its definability defect.

use std::collections::VecDeque;

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::{AutGroup, FINITE_NOTE};
use crate::eval::{evaluate_with_witness, Assignment, EvalOptions, ValueBounds};
use crate::mstruct::{diameter, Interp, MetricStructure, Point};
use crate::real::{format_rational, Rational};
use crate::sigform::{Expr, Formula, Modulus, Quantifier, SortId, Term};
use crate::Error;

/// Largest group order handled here (tables are quadratic in the order).
pub const MAX_ORDER: usize = 5000;

/// Greedy covers give up past this many elements of `F`.
pub const MAX_COVER: usize = 256;

/// Multiplication, inversion and distances of the sort `G`, over sorted member positions.
#[derive(Clone, Debug)]
pub struct GroupView {
    pub sort: SortId,
    pub points: Vec<usize>,
    pub labels: Vec<String>,
    pub id: usize,
    mul: Vec<usize>,
    inv: Vec<usize>,
    dist: Vec<Rational>,
}

fn function(m: &MetricStructure, sort: SortId, name: &str, arity: usize) -> Result<Interp, Error> {
    let decl = m
        .signature()
        .candidates(name)
        .into_iter()
        .find(|d| d.args.len() == arity && d.args.iter().all(|&a| a == sort) && d.result_sort() == Some(sort))
        .ok_or_else(|| Error::Structure(format!("group sort lacks `{name}`")))?;
    m.interp_of(&decl)
        .cloned()
        .ok_or_else(|| Error::Structure(format!("`{name}` is not interpreted")))
}

impl GroupView {
    pub fn new(m: &MetricStructure) -> Result<GroupView, Error> {
        let sort = m.sort_id("G")?;
        let mut points = m
            .member_indices(sort)
            .ok_or_else(|| Error::Structure("sort G must be finite".into()))?
            .to_vec();
        points.sort_unstable();
        let n = points.len();
        if n > MAX_ORDER {
            return Err(Error::Limit(format!("group order {n} exceeds {MAX_ORDER}")));
        }
        let u = m.universe_of(sort).expect("finite sort");
        let (mul, inv, one) = (
            function(m, sort, "mul", 2)?,
            function(m, sort, "inv", 1)?,
            function(m, sort, "1", 0)?,
        );
        let pos = |p: Point| -> Result<usize, Error> {
            let e = p.elem().expect("finite value");
            points
                .binary_search(&e)
                .map_err(|_| Error::Structure(format!("operation leaves G at `{}`", u.label(e))))
        };
        let mut mt = Vec::with_capacity(n * n);
        for &a in &points {
            for &b in &points {
                mt.push(pos(mul.apply(&[Point::Elem(a), Point::Elem(b)]))?);
            }
        }
        let iv = points
            .iter()
            .map(|&a| pos(inv.apply(&[Point::Elem(a)])))
            .collect::<Result<Vec<_>, _>>()?;
        let id = pos(one.apply(&[]))?;
        let dist = (0..n * n).map(|k| u.dist(points[k / n], points[k % n])).collect();
        Ok(GroupView {
            sort,
            labels: points.iter().map(|&p| u.label(p)).collect(),
            points,
            id,
            mul: mt,
            inv: iv,
            dist,
        })
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.mul[a * self.order() + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn d(&self, a: usize, b: usize) -> Rational {
        self.dist[a * self.order() + b]
    }

    pub fn find(&self, label: &str) -> Result<usize, Error> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Input(format!("unknown group element `{label}`")))
    }

    pub fn set(&self, labels: &[impl AsRef<str>]) -> Result<Vec<bool>, Error> {
        let mut out = vec![false; self.order()];
        for l in labels {
            out[self.find(l.as_ref())?] = true;
        }
        Ok(out)
    }

    pub fn labels_of(&self, set: &[bool]) -> Vec<String> {
        members(set).map(|i| self.labels[i].clone()).collect()
    }

    /// `{x : d(x, 1) ≤ r}`.
    pub fn ball(&self, r: Rational) -> Vec<bool> {
        (0..self.order()).map(|x| self.d(x, self.id) <= r).collect()
    }

    pub fn product(&self, a: &[bool], b: &[bool]) -> Vec<bool> {
        let mut out = vec![false; self.order()];
        for x in members(a) {
            for y in members(b) {
                out[self.mul(x, y)] = true;
            }
        }
        out
    }

    pub fn power(&self, a: &[bool], k: usize) -> Vec<bool> {
        let mut out = a.to_vec();
        for _ in 1..k {
            out = self.product(&out, a);
        }
        out
    }

    pub fn diameter(&self) -> Rational {
        (0..self.order() * self.order())
            .map(|k| self.dist[k])
            .max()
            .unwrap_or_else(Rational::zero)
    }

    fn singleton(&self, x: usize) -> Vec<bool> {
        let mut s = vec![false; self.order()];
        s[x] = true;
        s
    }
}

fn members(set: &[bool]) -> impl Iterator<Item = usize> + '_ {
    set.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
}

fn count(set: &[bool]) -> usize {
    set.iter().filter(|&&b| b).count()
}

fn full(set: &[bool]) -> bool {
    set.iter().all(|&b| b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Attempt {
    pub k: usize,
    /// `None` when no cover was found within [`MAX_COVER`].
    pub f_size: Option<usize>,
    pub f: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormResult {
    pub form: String,
    pub attempts: Vec<Attempt>,
    /// Least `|F|`, at the least `k` attaining it; `None` if every attempt failed.
    pub best: Option<Attempt>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatteryReport {
    pub note: &'static str,
    pub radius: String,
    pub ball: Vec<String>,
    pub k_max: usize,
    pub forms: Vec<FormResult>,
}

/// Greedy set cover of `G` by `sets[f]`, largest gain first, ties to the least `f`.
fn greedy_cover(g: &GroupView, sets: &[Vec<bool>]) -> Option<Vec<usize>> {
    let mut covered = vec![false; g.order()];
    let mut chosen = Vec::new();
    while !full(&covered) {
        if chosen.len() >= MAX_COVER {
            return None;
        }
        let (f, gain) = sets
            .iter()
            .enumerate()
            .map(|(f, s)| (f, members(s).filter(|&x| !covered[x]).count()))
            .fold((0, 0), |best, x| if x.1 > best.1 { x } else { best });
        if gain == 0 {
            return None;
        }
        for x in members(&sets[f]) {
            covered[x] = true;
        }
        chosen.push(f);
    }
    Some(chosen)
}

/// Greedy `F` with `(FV)^k = G`: each step adds the element that enlarges `(FV)^k` most.
fn greedy_power_cover(g: &GroupView, v: &[bool], k: usize) -> Option<Vec<usize>> {
    let n = g.order();
    let mut f = vec![false; n];
    let mut chosen = Vec::new();
    let reach = |f: &[bool]| -> Vec<bool> { g.power(&g.product(f, v), k) };
    let mut current = vec![false; n];
    while !full(&current) {
        if chosen.len() >= MAX_COVER {
            return None;
        }
        let mut best: Option<(usize, usize, Vec<bool>)> = None;
        for x in (0..n).filter(|&x| !f[x]) {
            let mut trial = f.clone();
            trial[x] = true;
            let r = reach(&trial);
            let size = count(&r);
            if best.as_ref().is_none_or(|b| size > b.1) {
                best = Some((x, size, r));
            }
        }
        let (x, size, r) = best?;
        if size <= count(&current) && !chosen.is_empty() {
            return None;
        }
        f[x] = true;
        chosen.push(x);
        current = r;
    }
    Some(chosen)
}

fn summarize(form: &str, attempts: Vec<Attempt>) -> FormResult {
    let best = attempts
        .iter()
        .filter(|a| a.f_size.is_some())
        .fold(None::<&Attempt>, |best, a| match best {
            Some(b) if b.f_size <= a.f_size => Some(b),
            _ => Some(a),
        })
        .cloned();
    FormResult {
        form: form.into(),
        attempts,
        best,
    }
}

/// Greedy covers of `G` by `FV^k`, `V^kFV^k`, `VFV` and `(FV)^k` for `k = 1..=k_max`,
/// where `V` is the closed ball of radius `r` at 1.
pub fn boundedness_battery(m: &MetricStructure, r: Rational, k_max: usize) -> Result<BatteryReport, Error> {
    if k_max == 0 {
        return Err(Error::Input("k must be positive".into()));
    }
    let g = GroupView::new(m)?;
    let n = g.order();
    let v = g.ball(r);
    let attempt = |k: usize, chosen: Option<Vec<usize>>| Attempt {
        k,
        f_size: chosen.as_ref().map(Vec::len),
        f: chosen.unwrap_or_default().iter().map(|&i| g.labels[i].clone()).collect(),
    };
    let mut fvk = Vec::new();
    let mut vkfvk = Vec::new();
    let mut fv_pow = Vec::new();
    for k in 1..=k_max {
        let w = g.power(&v, k);
        let left: Vec<Vec<bool>> = (0..n).map(|f| g.product(&g.singleton(f), &w)).collect();
        fvk.push(attempt(k, greedy_cover(&g, &left)));
        let both: Vec<Vec<bool>> = left.iter().map(|s| g.product(&w, s)).collect();
        vkfvk.push(attempt(k, greedy_cover(&g, &both)));
        fv_pow.push(attempt(k, greedy_power_cover(&g, &v, k)));
    }
    let vfv = vec![vkfvk[0].clone()];
    Ok(BatteryReport {
        note: FINITE_NOTE,
        radius: format_rational(&r),
        ball: g.labels_of(&v),
        k_max,
        forms: vec![
            summarize("FV^k", fvk),
            summarize("V^kFV^k", vkfvk),
            summarize("VFV", vfv),
            summarize("(FV)^k", fv_pow),
        ],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CayleyBound {
    /// `(U ∪ U⁻¹ ∪ {1})ⁿ = G`; `sizes[i]` is the size of the `(i+1)`-th power.
    Bound {
        n: usize,
        sizes: Vec<usize>,
    },
    Exceeded {
        cap: usize,
        sizes: Vec<usize>,
    },
    /// `U` generates a proper subgroup.
    NotGenerating {
        subgroup: Vec<String>,
    },
}

/// Least `n` with `(U ∪ U⁻¹ ∪ {1})ⁿ = G`, searched up to `cap`.
pub fn cayley_bound(m: &MetricStructure, u: &[impl AsRef<str>], cap: usize) -> Result<CayleyBound, Error> {
    let g = GroupView::new(m)?;
    let mut s = g.set(u)?;
    for x in members(&s.clone()).collect::<Vec<_>>() {
        s[g.inv(x)] = true;
    }
    s[g.id] = true;
    let mut reached = g.singleton(g.id);
    let mut queue = VecDeque::from([g.id]);
    while let Some(x) = queue.pop_front() {
        for y in members(&s) {
            let z = g.mul(x, y);
            if !reached[z] {
                reached[z] = true;
                queue.push_back(z);
            }
        }
    }
    if !full(&reached) {
        return Ok(CayleyBound::NotGenerating {
            subgroup: g.labels_of(&reached),
        });
    }
    let mut power = s.clone();
    let mut sizes = vec![count(&power)];
    while !full(&power) {
        if sizes.len() >= cap {
            return Ok(CayleyBound::Exceeded { cap, sizes });
        }
        power = g.product(&power, &s);
        sizes.push(count(&power));
    }
    Ok(CayleyBound::Bound { n: sizes.len(), sizes })
}

/// A failure of `{1} ∪ X_n⁻¹ ∪ X_n·X_n ⊆ X_{n+1}` (levels are 1-based).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainViolation {
    pub level: usize,
    pub kind: String,
    pub a: String,
    pub b: String,
    pub result: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub note: &'static str,
    pub sizes: Vec<usize>,
    /// First `n` (1-based) with `X_n ⊄ X_{n+1}` strictly, if any.
    pub not_increasing: Option<usize>,
    pub violation: Option<ChainViolation>,
    /// Least `n` with `X_n = G`.
    pub covering_level: Option<usize>,
    pub valid: bool,
}

pub fn chain_validate<S: AsRef<str>>(m: &MetricStructure, chain: &[Vec<S>]) -> Result<ChainReport, Error> {
    let g = GroupView::new(m)?;
    if chain.is_empty() {
        return Err(Error::Input("chain must have at least one set".into()));
    }
    let sets: Vec<Vec<bool>> = chain.iter().map(|c| g.set(c)).collect::<Result<_, _>>()?;
    let not_increasing = sets.windows(2).position(|w| {
        let subset = (0..g.order()).all(|x| !w[0][x] || w[1][x]);
        !subset || w[0] == w[1]
    });
    let mut violation = None;
    'outer: for (level, w) in sets.windows(2).enumerate() {
        let (x, next) = (&w[0], &w[1]);
        let label = |i: usize| g.labels[i].clone();
        if !next[g.id] {
            violation = Some(ChainViolation {
                level: level + 1,
                kind: "identity".into(),
                a: label(g.id),
                b: label(g.id),
                result: label(g.id),
            });
            break;
        }
        for a in members(x) {
            if !next[g.inv(a)] {
                violation = Some(ChainViolation {
                    level: level + 1,
                    kind: "inverse".into(),
                    a: label(a),
                    b: label(a),
                    result: label(g.inv(a)),
                });
                break 'outer;
            }
            for b in members(x) {
                if !next[g.mul(a, b)] {
                    violation = Some(ChainViolation {
                        level: level + 1,
                        kind: "product".into(),
                        a: label(a),
                        b: label(b),
                        result: label(g.mul(a, b)),
                    });
                    break 'outer;
                }
            }
        }
    }
    let covering_level = sets.iter().position(|s| full(s)).map(|i| i + 1);
    Ok(ChainReport {
        note: FINITE_NOTE,
        sizes: sets.iter().map(|s| count(s)).collect(),
        valid: not_increasing.is_none() && violation.is_none(),
        not_increasing: not_increasing.map(|i| i + 1),
        violation,
        covering_level,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GRhoResult {
    pub note: &'static str,
    pub rho: String,
    /// The closed ball `{x : d(x, 1) ≤ ρ}`.
    pub ball: Vec<String>,
    /// Least `n` with `Bⁿ = Bⁿ⁺¹`.
    pub exponent: usize,
    /// Sizes of `B, B², …, Bⁿ`.
    pub powers: Vec<usize>,
    pub subgroup: Vec<String>,
    /// Left cosets `gG_ρ`, in order of least element.
    pub cosets: Vec<Vec<String>>,
    #[serde(skip)]
    pub subgroup_set: Vec<bool>,
    #[serde(skip)]
    pub coset_of: Vec<usize>,
}

pub fn g_rho(m: &MetricStructure, rho: Rational) -> Result<GRhoResult, Error> {
    if rho.is_negative() {
        return Err(Error::Input("ρ must be nonnegative".into()));
    }
    let g = GroupView::new(m)?;
    let ball = g.ball(rho);
    let mut power = ball.clone();
    let mut powers = vec![count(&power)];
    loop {
        let next = g.product(&power, &ball);
        if next == power {
            break;
        }
        power = next;
        powers.push(count(&power));
    }
    let n = g.order();
    let mut coset_of = vec![usize::MAX; n];
    let mut cosets = Vec::new();
    for x in 0..n {
        if coset_of[x] != usize::MAX {
            continue;
        }
        let c: Vec<usize> = members(&power).map(|h| g.mul(x, h)).collect();
        for &y in &c {
            coset_of[y] = cosets.len();
        }
        let mut c = c;
        c.sort_unstable();
        cosets.push(c);
    }
    Ok(GRhoResult {
        note: FINITE_NOTE,
        rho: format_rational(&rho),
        ball: g.labels_of(&ball),
        exponent: powers.len(),
        powers,
        subgroup: g.labels_of(&power),
        cosets: cosets.iter().map(|c| c.iter().map(|&i| g.labels[i].clone()).collect()).collect(),
        subgroup_set: power,
        coset_of,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DefinabilityReport {
    pub note: &'static str,
    pub formula: String,
    pub value: ValueBounds,
    /// The `x` attaining the outer supremum.
    pub witness: String,
}

/// `sup_x inf_{y₁..yₙ} max(d(y₁,1)∸ρ, …, d(yₙ,1)∸ρ, |P(x) − d(x, y₁⋯yₙ)|∸ε)` with `P(x) = d(x, G_ρ)`.
pub fn definability_defect(
    m: &MetricStructure,
    rho: Rational,
    n: usize,
    eps: Rational,
    opts: &EvalOptions,
) -> Result<DefinabilityReport, Error> {
    if n == 0 {
        return Err(Error::Input("n must be positive".into()));
    }
    if eps.is_negative() {
        return Err(Error::Input("ε must be nonnegative".into()));
    }
    let gr = g_rho(m, rho)?;
    let g = GroupView::new(m)?;
    let sort = g.sort;
    let u = m.universe_of(sort).expect("finite sort");
    let size = u.size;
    let subgroup: Vec<usize> = members(&gr.subgroup_set).collect();
    let mut data = vec![Rational::zero(); size];
    for x in 0..g.order() {
        data[g.points[x]] = subgroup.iter().map(|&h| g.d(x, h)).min().expect("1 ∈ G_ρ");
    }
    let diam = diameter(u, &g.points);
    let name = (0..)
        .map(|i| if i == 0 { "P".to_string() } else { format!("P{i}") })
        .find(|p| !m.signature().has_symbol(p))
        .expect("fresh name");
    let mut ext = m.extend(&format!("{} with d(x, G_ρ)", m.name), |sig| {
        sig.add_predicate(&name, &[sort], (Rational::zero(), diam), vec![Modulus::id()])?;
        Ok(())
    })?;
    ext.interpret(&name, &[sort], Interp::PredTable { sizes: vec![size], data })?;
    let cap = diam.max(Rational::from_integer(1));
    let sort_name = m.signature().sort(sort).name.clone();
    let ys: Vec<String> = (1..=n).map(|i| format!("y{i}")).collect();
    let product = ys[1..]
        .iter()
        .fold(Term::var(&ys[0]), |acc, y| Term::app("mul", vec![acc, Term::var(y)]));
    let one = Term::constant("1");
    let mut clauses: Vec<Expr> = ys
        .iter()
        .map(|y| Expr::sub(Expr::dist(Term::var(y), one.clone()), Expr::constant(rho.min(cap))))
        .collect();
    clauses.push(Expr::sub(
        Expr::absdiff(Expr::atom(&name, vec![Term::var("x")]), Expr::dist(Term::var("x"), product)),
        Expr::constant(eps.min(cap)),
    ));
    let body = Expr::fold(crate::sigform::BinOp::Max, clauses).expect("nonempty");
    let vars: Vec<(String, String)> = ys.iter().map(|y| (y.clone(), sort_name.clone())).collect();
    let expr = Expr::sup("x", &sort_name, Expr::quantify(Quantifier::Inf, &vars, body));
    let f = Formula::new(expr, ext.signature(), cap)?;
    let (value, witnesses) = evaluate_with_witness(&ext, &f, &Assignment::new(), opts)?;
    let witness = ext.label(sort, &witnesses[0].point);
    Ok(DefinabilityReport {
        note: FINITE_NOTE,
        formula: crate::sigform::print_formula(&f),
        value,
        witness,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    pub note: &'static str,
    pub cosets: usize,
    pub orbits: usize,
    pub orbit_sizes: Vec<usize>,
}

/// Orbits of `Aut(M)` acting on `G/G_ρ` by `gG_ρ ↦ α(g)G_ρ`.
pub fn quotient_orbits(m: &MetricStructure, rho: Rational, aut: &AutGroup) -> Result<QuotientReport, Error> {
    let gr = g_rho(m, rho)?;
    let g = GroupView::new(m)?;
    if aut.points != g.points {
        return Err(Error::Input("automorphisms belong to a different carrier".into()));
    }
    let k = gr.cosets.len();
    let mut orbit = vec![usize::MAX; k];
    let mut sizes = Vec::new();
    let reps: Vec<usize> = (0..k)
        .map(|c| gr.coset_of.iter().position(|&x| x == c).expect("nonempty coset"))
        .collect();
    for c in 0..k {
        if orbit[c] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        for map in &aut.maps {
            let image = gr.coset_of[map[reps[c]]];
            if orbit[image] == usize::MAX {
                orbit[image] = id;
                size += 1;
            }
        }
        sizes.push(size);
    }
    Ok(QuotientReport {
        note: FINITE_NOTE,
        cosets: k,
        orbits: sizes.len(),
        orbit_sizes: sizes,
    })
}
