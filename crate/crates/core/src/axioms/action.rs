//! Group actions on Hilbert towers and trees, packaged as sorted structures
//! `G, K_1 ⊆ ... ⊆ K_N` acting on balls with `act: K_n × B_m → B_ν(n,m)`.

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::mstruct::{diameter, hilbert_tower, norm, tree_space, Carrier, FiniteGroup, Interp, MetricStructure, Point};
use crate::real::Rational;
use crate::sigform::{Field, Modulus, Signature, Sort, SortId, SortKind};
use crate::Error;

/// The sort map `ν(n, m)`: explicit entries, falling back to `m + shift` when a shift is given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nu {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<u32>,
    /// `[n, m, ν(n, m)]` triples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<(u32, u32, u32)>,
}

impl Nu {
    pub fn identity() -> Nu {
        Nu::shift(0)
    }

    pub fn shift(c: u32) -> Nu {
        Nu {
            shift: Some(c),
            table: Vec::new(),
        }
    }

    pub fn get(&self, n: u32, m: u32) -> Option<u32> {
        self.table
            .iter()
            .rev()
            .find(|(a, b, _)| *a == n && *b == m)
            .map(|t| t.2)
            .or(self.shift.map(|c| m + c))
    }

    pub fn set(&mut self, n: u32, m: u32, v: u32) {
        self.table.push((n, m, v));
    }
}

/// `K_1 = S ∪ S⁻¹ ∪ {1}`, `K_{n+1} = K_n · K_n`, so `K_n · K_n ⊆ K_{n+1}` by construction.
pub fn cayley_chain(g: &FiniteGroup, generators: &[usize], levels: usize) -> Vec<Vec<usize>> {
    let mut k1: Vec<usize> = generators.iter().flat_map(|&s| [s, g.inv(s)]).chain([g.identity]).collect();
    k1.sort_unstable();
    k1.dedup();
    let mut chain = vec![k1];
    while chain.len() < levels {
        let last = chain.last().expect("nonempty");
        let mut next: Vec<usize> = last
            .iter()
            .flat_map(|&a| last.iter().map(move |&b| (a, b)))
            .map(|(a, b)| g.mul(a, b))
            .collect();
        next.sort_unstable();
        next.dedup();
        chain.push(next);
    }
    chain
}

/// `v ↦ U v + b` with `U` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub dim: usize,
    pub u: Vec<f64>,
    pub b: Vec<f64>,
}

impl Affine {
    fn identity(dim: usize) -> Affine {
        let mut u = vec![0.0; dim * dim];
        (0..dim).for_each(|i| u[i * dim + i] = 1.0);
        Affine { dim, u, b: vec![0.0; dim] }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.b[i] + (0..self.dim).map(|j| self.u[i * self.dim + j] * v[j]).sum::<f64>())
            .collect()
    }

    /// `self ∘ other`.
    fn compose(&self, other: &Affine) -> Affine {
        let n = self.dim;
        let mut u = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                u[i * n + j] = (0..n).map(|k| self.u[i * n + k] * other.u[k * n + j]).sum();
            }
        }
        Affine {
            dim: n,
            u,
            b: self.apply(&other.b),
        }
    }

    fn close_to(&self, other: &Affine, tol: f64) -> bool {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.b.iter().zip(&other.b))
            .all(|(a, b)| (a - b).abs() <= tol)
    }

    /// `Uᵀ w`.
    fn transpose_apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.u[i * self.dim + j] * w[i]).sum())
            .collect()
    }
}

/// An isometric action given on generators. Complex actions are given by their
/// realified matrices on `(re, im)` coordinate pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertAction {
    pub field: Field,
    /// Dimension over the field.
    pub dim: usize,
    /// Group element indices of the generators.
    pub generators: Vec<usize>,
    pub matrices: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub translations: Option<Vec<Vec<f64>>>,
}

const MATRIX_TOL: f64 = 1e-9;

impl HilbertAction {
    fn real_dim(&self) -> usize {
        match self.field {
            Field::Real => self.dim,
            Field::Complex => 2 * self.dim,
        }
    }

    fn generator_maps(&self) -> Result<Vec<Affine>, Error> {
        let n = self.real_dim();
        if self.matrices.len() != self.generators.len() {
            return Err(Error::Structure("one matrix per generator is required".into()));
        }
        let mut out = Vec::new();
        for (k, rows) in self.matrices.iter().enumerate() {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Structure(format!("generator {k}: matrix must be {n}x{n}")));
            }
            let b = match &self.translations {
                Some(t) => t
                    .get(k)
                    .cloned()
                    .ok_or_else(|| Error::Structure("one translation per generator".into()))?,
                None => vec![0.0; n],
            };
            if b.len() != n {
                return Err(Error::Structure(format!("generator {k}: translation must have {n} entries")));
            }
            let a = Affine {
                dim: n,
                u: rows.concat(),
                b,
            };
            // UᵀU = I
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = (0..n).map(|r| a.u[r * n + i] * a.u[r * n + j]).sum();
                    if (dot - if i == j { 1.0 } else { 0.0 }).abs() > MATRIX_TOL {
                        return Err(Error::Structure(format!("generator {k}: matrix is not orthogonal")));
                    }
                }
            }
            if self.field == Field::Complex {
                // commuting with multiplication by i on each (re, im) pair
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e.iter_mut().for_each(|x| *x = 0.0);
                    e[j] = 1.0;
                    let ie = times_i(&e);
                    let lhs = times_i(&a.transpose_apply_t(&e));
                    let rhs = a.transpose_apply_t(&ie);
                    if lhs.iter().zip(&rhs).any(|(x, y)| (x - y).abs() > MATRIX_TOL) {
                        return Err(Error::Structure(format!("generator {k}: matrix is not complex-linear")));
                    }
                }
            }
            out.push(a);
        }
        Ok(out)
    }
}

impl Affine {
    fn transpose_apply_t(&self, v: &[f64]) -> Vec<f64> {
        // linear part only
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.u[i * self.dim + j] * v[j]).sum())
            .collect()
    }
}

fn times_i(v: &[f64]) -> Vec<f64> {
    v.chunks(2).flat_map(|z| [-z[1], z[0]]).collect()
}

/// Extends generator data to every group element along the Cayley graph, checking that
/// every edge agrees (so the generator images satisfy all relations of the group).
fn extend_to_group<T: Clone>(
    g: &FiniteGroup,
    generators: &[usize],
    gen_maps: &[T],
    identity: T,
    compose: impl Fn(&T, &T) -> T,
    agree: impl Fn(&T, &T) -> bool,
) -> Result<Vec<T>, Error> {
    let mut maps: Vec<Option<T>> = vec![None; g.order];
    maps[g.identity] = Some(identity);
    let mut queue = VecDeque::from([g.identity]);
    while let Some(a) = queue.pop_front() {
        let ma = maps[a].clone().expect("visited");
        for (k, &s) in generators.iter().enumerate() {
            let h = g.mul(a, s);
            let mh = compose(&ma, &gen_maps[k]);
            match &maps[h] {
                Some(existing) if !agree(existing, &mh) => {
                    return Err(Error::Structure(format!(
                        "not a homomorphism: the images of {} · {} and {} disagree",
                        g.label(a),
                        g.label(s),
                        g.label(h)
                    )));
                }
                Some(_) => {}
                None => {
                    maps[h] = Some(mh);
                    queue.push_back(h);
                }
            }
        }
    }
    maps.into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| Error::Structure(format!("generators do not reach {}", g.label(i)))))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NuViolation {
    pub n: u32,
    pub m: u32,
    pub nu: u32,
    pub element: String,
    /// A point of `B_m` whose image leaves `B_ν(n,m)`.
    pub point: String,
    pub image_norm: f64,
}

impl std::fmt::Display for NuViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ν({}, {}) = {} is too small: {} maps {} in B{} to a point of norm {}",
            self.n, self.m, self.nu, self.element, self.point, self.m, self.image_norm
        )
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

/// First `(n, m)` with `g · B_m ⊄ B_ν(n,m)` for some `g ∈ K_n`. For `v ↦ Uv + b` the largest
/// image norm on `B_m` is `m + ‖b‖`, attained at `m·Uᵀb/‖b‖`.
pub fn check_nu_hilbert(g: &FiniteGroup, chain: &[Vec<usize>], maps: &[Affine], nu: &Nu, balls: u32) -> Result<Option<NuViolation>, Error> {
    for (level, members) in chain.iter().enumerate() {
        let n = level as u32 + 1;
        for m in 1..=balls {
            let Some(target) = nu.get(n, m) else { continue };
            for &x in members {
                let a = &maps[x];
                let bn = norm(&a.b);
                let reach = m as f64 + bn;
                if reach > target as f64 + MATRIX_TOL {
                    let dir = if bn > 0.0 {
                        a.transpose_apply(&a.b).iter().map(|t| t / bn).collect()
                    } else {
                        let mut e = vec![0.0; a.dim];
                        e[0] = 1.0;
                        e
                    };
                    let v: Vec<f64> = dir.iter().map(|t| t * m as f64).collect();
                    let image_norm = norm(&a.apply(&v));
                    return Ok(Some(NuViolation {
                        n,
                        m,
                        nu: target,
                        element: g.label(x),
                        point: fmt_vec(&v),
                        image_norm,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// Upper bound on the Lipschitz constant of `x ↦ act(x, v)` over `members × B_m`, as a rational.
fn lipschitz_in_group<T>(g: &FiniteGroup, members: &[usize], gap: impl Fn(&T, &T) -> f64, maps: &[T]) -> Modulus {
    let mut best: f64 = 0.0;
    for &a in members {
        for &b in members {
            if a < b {
                let d = crate::real::rational_to_f64(&g.dist(a, b));
                best = best.max(gap(&maps[a], &maps[b]) / d);
            }
        }
    }
    if best <= 1.0 {
        return Modulus::id();
    }
    let scaled = Rational::new((best * 1000.0).ceil() as i64, 1000);
    Modulus::scale(scaled).expect("positive")
}

fn frobenius_gap(a: &Affine, b: &Affine, m: f64) -> f64 {
    let du = a.u.iter().zip(&b.u).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let db = crate::mstruct::euclid(&a.b, &b.b);
    du * m + db
}

/// Adds `G`, the chain `K_1..K_N` and the group symbols to `base`. Returns the
/// structure and the sort ids of `K_1..K_N`.
fn add_group_sorts(
    base: &MetricStructure,
    name: &str,
    g: &Arc<FiniteGroup>,
    chain: &[Vec<usize>],
    extra: impl FnOnce(&mut Signature, SortId, &[SortId]) -> Result<(), Error>,
) -> Result<(MetricStructure, SortId, Vec<SortId>), Error> {
    let mut ids = (0, Vec::new());
    let mut m = base.extend(name, |sig| {
        let gs = sig.add_sort(Sort {
            name: "G".into(),
            diameter: g.diameter(),
            kind: SortKind::Finite,
            ball_index: None,
        })?;
        let mut ks = Vec::new();
        for (i, members) in chain.iter().enumerate() {
            ks.push(sig.add_sort(Sort {
                name: format!("K{}", i + 1),
                diameter: diameter(&g.universe, members),
                kind: SortKind::Finite,
                ball_index: None,
            })?);
        }
        let id = Modulus::id;
        sig.add_function("mul", &[gs, gs], gs, vec![id(), id()])?;
        sig.add_function("inv", &[gs], gs, vec![id()])?;
        sig.add_function("1", &[], gs, vec![])?;
        for (i, &k) in ks.iter().enumerate() {
            let up = ks.get(i + 1).copied().unwrap_or(gs);
            sig.add_function("1", &[], k, vec![])?;
            sig.add_function("inv", &[k], k, vec![id()])?;
            sig.add_function("inc", &[k], up, vec![id()])?;
            if let Some(&next) = ks.get(i + 1) {
                sig.add_function("mul", &[k, k], next, vec![id(), id()])?;
            }
        }
        ids = (gs, ks.clone());
        extra(sig, gs, &ks)
    })?;
    let (gs, ks) = ids;
    let u = m.add_universe(g.universe.clone());
    m.set_carrier(
        gs,
        Carrier::Finite {
            universe: u,
            members: g.elements().collect(),
        },
    );
    for (k, members) in ks.iter().zip(chain) {
        m.set_carrier(
            *k,
            Carrier::Finite {
                universe: u,
                members: members.clone(),
            },
        );
    }
    let gm = g.clone();
    let mul = Interp::Fn(Arc::new(move |a: &[Point]| {
        Point::Elem(gm.mul(a[0].elem().expect("element"), a[1].elem().expect("element")))
    }));
    let gi = g.clone();
    let inv = Interp::Fn(Arc::new(move |a: &[Point]| Point::Elem(gi.inv(a[0].elem().expect("element")))));
    let one = Interp::FnTable {
        sizes: vec![],
        data: vec![g.identity as u32],
    };
    let pass = Interp::Fn(Arc::new(|a: &[Point]| a[0].clone()));
    for s in std::iter::once(gs).chain(ks.iter().copied()) {
        m.interpret("inv", &[s], inv.clone())?;
        m.interpret("1", &[], one.clone())?;
    }
    m.interpret("mul", &[gs, gs], mul.clone())?;
    for (i, &k) in ks.iter().enumerate() {
        m.interpret("inc", &[k], pass.clone())?;
        if i + 1 < ks.len() {
            m.interpret("mul", &[k, k], mul.clone())?;
        }
    }
    m.set_group(g.clone());
    Ok((m, gs, ks))
}

fn ball_sort(sig: &Signature, m: u32) -> Option<SortId> {
    sig.sort_id(&format!("B{m}"))
}

/// Combines a finite group with an isometric action on a Hilbert tower `B_1..B_balls`.
/// `act` is declared on `K_n × B_m` wherever `ν(n, m)` is defined and at most `balls`.
/// Errors when the generator images do not define a homomorphism or `ν` is violated.
pub fn wrap_action(group: &MetricStructure, action: &HilbertAction, nu: &Nu, levels: usize, balls: u32) -> Result<MetricStructure, Error> {
    let g = group
        .group()
        .ok_or_else(|| Error::Structure("wrap_action needs a group structure".into()))?
        .clone();
    if levels == 0 {
        return Err(Error::Structure("at least one K level is required".into()));
    }
    let gens = action.generator_maps()?;
    let dim = action.real_dim();
    let maps = extend_to_group(
        &g,
        &action.generators,
        &gens,
        Affine::identity(dim),
        |a, b| a.compose(b),
        |a, b| a.close_to(b, 1e-7),
    )?;
    let chain = cayley_chain(&g, &action.generators, levels);
    if let Some(v) = check_nu_hilbert(&g, &chain, &maps, nu, balls)? {
        return Err(Error::Structure(v.to_string()));
    }
    let linear = maps.iter().all(|a| norm(&a.b) <= MATRIX_TOL);
    let base = hilbert_tower(action.field, action.dim, balls)?;
    let maps = Arc::new(maps);
    let mut act_decls = Vec::new();
    let name = format!("{} acting on {}", g.name, base.name);
    let (mut m, _, _) = add_group_sorts(&base, &name, &g, &chain, |sig, _, ks| {
        for (i, &k) in ks.iter().enumerate() {
            let n = i as u32 + 1;
            for b in 1..=balls {
                let Some(target) = nu.get(n, b).filter(|&t| t <= balls) else {
                    continue;
                };
                let (src, dst) = (ball_sort(sig, b).expect("ball"), ball_sort(sig, target).expect("ball"));
                let lx = lipschitz_in_group(&g, &chain[i], |x, y| frobenius_gap(x, y, b as f64), &maps);
                sig.add_function("act", &[k, src], dst, vec![lx, Modulus::id()])?;
                act_decls.push((k, src));
            }
            if linear {
                let s1 = sig.sort_id("S1").expect("sphere");
                let lx = lipschitz_in_group(&g, &chain[i], |x, y| frobenius_gap(x, y, 1.0), &maps);
                sig.add_function("act", &[k, s1], s1, vec![lx, Modulus::id()])?;
                act_decls.push((k, s1));
            }
        }
        Ok(())
    })?;
    let act = Interp::Fn(Arc::new(move |a: &[Point]| {
        let x = a[0].elem().expect("group element");
        Point::vector(maps[x].apply(a[1].coords().expect("vector")))
    }));
    for (k, src) in act_decls {
        m.interpret("act", &[k, src], act.clone())?;
    }
    m.validate()?;
    Ok(m)
}

/// `Z_m` (discrete metric) rotating the plane by `2π/m`.
pub fn rotation_action(m: usize) -> Result<(MetricStructure, HilbertAction), Error> {
    let g = crate::mstruct::discrete_wrap(&format!("Z{m}"), &crate::mstruct::cyclic_table(m))?;
    let t = 2.0 * std::f64::consts::PI / m as f64;
    let action = HilbertAction {
        field: Field::Real,
        dim: 2,
        generators: vec![1 % m],
        matrices: vec![vec![vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]],
        translations: None,
    };
    Ok((g, action))
}

/// Isometric action on a finite tree, given by vertex permutations of the generators.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeAction {
    pub generators: Vec<usize>,
    pub perms: Vec<Vec<usize>>,
}

/// Combines a finite group with an action on a pointed tree: `act: K_n × B_r → B_ν(n,r)`
/// on the ball sorts and `K_n × T → T`.
pub fn wrap_tree_action(
    group: &MetricStructure,
    action: &TreeAction,
    edges: &[(usize, usize, Rational)],
    basepoint: usize,
    nu: &Nu,
    levels: usize,
) -> Result<MetricStructure, Error> {
    let g = group
        .group()
        .ok_or_else(|| Error::Structure("wrap_tree_action needs a group structure".into()))?
        .clone();
    let vertices = edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(1).max(basepoint + 1);
    let base = tree_space(vertices, edges, basepoint)?;
    let tree = base.tree().expect("tree metadata").clone();
    if action.perms.len() != action.generators.len() {
        return Err(Error::Structure("one vertex permutation per generator is required".into()));
    }
    for (k, p) in action.perms.iter().enumerate() {
        let mut seen = vec![false; vertices];
        if p.len() != vertices || p.iter().any(|&v| v >= vertices || std::mem::replace(&mut seen[v], true)) {
            return Err(Error::Structure(format!(
                "generator {k}: not a permutation of the {vertices} vertices"
            )));
        }
        for a in 0..vertices {
            for b in 0..vertices {
                if tree.dist(p[a], p[b]) != tree.dist(a, b) {
                    return Err(Error::Structure(format!("generator {k}: not an isometry ({a}, {b})")));
                }
            }
        }
    }
    let ident: Vec<usize> = (0..vertices).collect();
    let maps = extend_to_group(
        &g,
        &action.generators,
        &action.perms,
        ident,
        |p, q| q.iter().map(|&i| p[i]).collect(),
        |p, q| p == q,
    )?;
    let chain = cayley_chain(&g, &action.generators, levels);
    let t_sort = base.sort_id("T")?;
    let top = base.signature().sorts().iter().filter_map(|s| s.ball_index).max().unwrap_or(1);
    for (level, members) in chain.iter().enumerate() {
        let n = level as u32 + 1;
        for r in 1..=top {
            let Some(target) = nu.get(n, r) else { continue };
            let radius = Rational::from_integer(target as i64);
            for &x in members {
                for (v, &image) in maps[x].iter().enumerate() {
                    if tree.dist(basepoint, v) <= Rational::from_integer(r as i64) && tree.dist(basepoint, image) > radius {
                        return Err(Error::Structure(format!(
                            "ν({n}, {r}) = {target} is too small: {} maps vertex {v} of B{r} to vertex {} at distance {}",
                            g.label(x),
                            image,
                            crate::real::format_rational(&tree.dist(basepoint, image))
                        )));
                    }
                }
            }
        }
    }
    let maps = Arc::new(maps);
    let mut act_decls = Vec::new();
    let name = format!("{} acting on {}", g.name, base.name);
    let (mut m, _, _) = add_group_sorts(&base, &name, &g, &chain, |sig, _, ks| {
        for (i, &k) in ks.iter().enumerate() {
            let n = i as u32 + 1;
            let lx = lipschitz_in_group(
                &g,
                &chain[i],
                |p: &Vec<usize>, q: &Vec<usize>| {
                    (0..vertices)
                        .map(|v| crate::real::rational_to_f64(&tree.dist(p[v], q[v])))
                        .fold(0.0, f64::max)
                },
                &maps,
            );
            for r in 1..=top {
                // balls past the height of the tree are all of it
                let Some(target) = nu.get(n, r).map(|t| t.min(top)) else { continue };
                let (src, dst) = (ball_sort(sig, r).expect("ball"), ball_sort(sig, target).expect("ball"));
                sig.add_function("act", &[k, src], dst, vec![lx.clone(), Modulus::id()])?;
                act_decls.push((k, src));
            }
            sig.add_function("act", &[k, t_sort], t_sort, vec![lx, Modulus::id()])?;
            act_decls.push((k, t_sort));
        }
        Ok(())
    })?;
    let act = Interp::Fn(Arc::new(move |a: &[Point]| {
        let x = a[0].elem().expect("group element");
        Point::Elem(maps[x][a[1].elem().expect("vertex")])
    }));
    for (k, src) in act_decls {
        m.interpret("act", &[k, src], act.clone())?;
    }
    m.validate()?;
    Ok(m)
}

/// Parameters of an action file: a group, generators and images, and `ν`.
/// Read files with [`ActionSpec::from_json`], which also rejects unknown keys.
#[derive(Clone, Debug, Deserialize)]
pub struct ActionSpec {
    pub group: crate::mstruct::StructureSpec,
    #[serde(flatten)]
    pub target: ActionTarget,
    #[serde(default)]
    pub nu: Option<Nu>,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    2
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ActionTarget {
    Hilbert {
        hilbert: HilbertAction,
        balls: u32,
    },
    Tree {
        tree: TreeAction,
        edges: Vec<(usize, usize, crate::sigform::modulus::RationalText)>,
        #[serde(default)]
        basepoint: usize,
    },
}

const ACTION_KEYS: [&str; 8] = ["group", "hilbert", "balls", "tree", "edges", "basepoint", "nu", "levels"];

impl ActionSpec {
    // serde cannot deny unknown fields next to a flattened enum, so the keys are checked here
    pub fn from_json(text: &str) -> Result<ActionSpec, Error> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Input(format!("action file: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Input("action file: expected an object".into()))?;
        if let Some(k) = obj.keys().find(|k| !ACTION_KEYS.contains(&k.as_str())) {
            return Err(Error::Input(format!("action file: unknown field `{k}`")));
        }
        serde_json::from_value(value).map_err(|e| Error::Input(format!("action file: {e}")))
    }

    pub fn build(&self) -> Result<MetricStructure, Error> {
        let group = self.group.build()?;
        let nu = self.nu.clone().unwrap_or_else(Nu::identity);
        match &self.target {
            ActionTarget::Hilbert { hilbert, balls } => wrap_action(&group, hilbert, &nu, self.levels, *balls),
            ActionTarget::Tree { tree, edges, basepoint } => {
                let edges: Vec<_> = edges.iter().map(|(a, b, l)| (*a, *b, l.0)).collect();
                wrap_tree_action(&group, tree, &edges, *basepoint, &nu, self.levels)
            }
        }
    }
}
