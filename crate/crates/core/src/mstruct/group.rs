//! Finite metric groups: Hamming-metric permutation groups and discrete Cayley tables.

use std::collections::HashMap;
use std::sync::Arc;

use itertools::Itertools;

use super::{diameter, Carrier, Interp, Metric, MetricStructure, Point, Universe};
use crate::real::Rational;
use crate::sigform::{Modulus, Signature, Sort, SortKind};
use crate::Error;

/// Largest degree accepted by [`sym_hamming`] unless a larger cap is passed.
pub const DEFAULT_SYM_CAP: usize = 8;

/// Groups up to this order get a full Cayley table.
const TABLE_LIMIT: usize = 1500;

#[derive(Clone, Debug)]
pub enum GroupMul {
    Table(Vec<u32>),
    /// Full symmetric group with elements in lexicographic order.
    Symmetric,
}

#[derive(Clone, Debug)]
pub struct FiniteGroup {
    pub name: String,
    pub order: usize,
    pub identity: usize,
    mul: GroupMul,
    inv: Vec<usize>,
    perms: Option<Arc<Vec<Vec<u8>>>>,
    pub universe: Universe,
}

fn compose(p: &[u8], q: &[u8]) -> Vec<u8> {
    // (pq)(i) = p(q(i))
    q.iter().map(|&i| p[i as usize]).collect()
}

fn inverse(p: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; p.len()];
    for (i, &j) in p.iter().enumerate() {
        out[j as usize] = i as u8;
    }
    out
}

/// Lexicographic rank of a permutation of `0..n`.
fn lex_rank(p: &[u8]) -> usize {
    let n = p.len();
    let mut rank = 0;
    let mut fact = vec![1usize; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i;
    }
    for i in 0..n {
        let smaller = p[i + 1..].iter().filter(|&&x| x < p[i]).count();
        rank += smaller * fact[n - 1 - i];
    }
    rank
}

/// Cycle notation with 1-based points, `()` for the identity.
pub fn perm_label(p: &[u8]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for start in 0..p.len() {
        if seen[start] || p[start] as usize == start {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push((i + 1).to_string());
            i = p[i] as usize;
        }
        out.push('(');
        out.push_str(&cycle.join(" "));
        out.push(')');
    }
    if out.is_empty() {
        "()".into()
    } else {
        out
    }
}

impl FiniteGroup {
    /// Permutation group with the normalized Hamming metric. `perms` must be closed under products.
    pub fn from_perms(name: &str, mut perms: Vec<Vec<u8>>, symmetric: bool) -> Result<FiniteGroup, Error> {
        perms.sort();
        perms.dedup();
        let order = perms.len();
        let index: HashMap<&[u8], usize> = perms.iter().enumerate().map(|(i, p)| (p.as_slice(), i)).collect();
        let degree = perms.first().map_or(0, Vec::len);
        let id: Vec<u8> = (0..degree as u8).collect();
        let identity = *index
            .get(id.as_slice())
            .ok_or_else(|| Error::Structure(format!("`{name}` does not contain the identity")))?;
        let find = |p: &[u8]| {
            index
                .get(p)
                .copied()
                .ok_or_else(|| Error::Structure(format!("`{name}` is not closed under products")))
        };
        let inv = perms.iter().map(|p| find(&inverse(p))).collect::<Result<Vec<_>, _>>()?;
        let mul = if order <= TABLE_LIMIT {
            let mut table = Vec::with_capacity(order * order);
            for p in &perms {
                for q in &perms {
                    table.push(find(&compose(p, q))? as u32);
                }
            }
            GroupMul::Table(table)
        } else if symmetric {
            GroupMul::Symmetric
        } else {
            return Err(Error::Limit(format!("`{name}` has order {order}, too large for a Cayley table")));
        };
        let labels = perms.iter().map(|p| perm_label(p)).collect();
        let perms = Arc::new(perms);
        Ok(FiniteGroup {
            name: name.to_string(),
            order,
            identity,
            mul,
            inv,
            universe: Universe {
                name: name.to_string(),
                size: order,
                metric: Metric::Hamming { perms: perms.clone() },
                labels,
            },
            perms: Some(perms),
        })
    }

    /// Group from a Cayley table, validating the group axioms.
    pub fn from_table(name: &str, table: &[Vec<usize>], metric: Metric, labels: Vec<String>) -> Result<FiniteGroup, Error> {
        let n = table.len();
        let bad = |msg: String| Err(Error::Structure(format!("`{name}` is not a group table: {msg}")));
        if n == 0 {
            return bad("empty".into());
        }
        if table.iter().any(|r| r.len() != n || r.iter().any(|&x| x >= n)) {
            return bad("not an n x n table over 0..n".into());
        }
        let Some(identity) = (0..n).find(|&e| (0..n).all(|x| table[e][x] == x && table[x][e] == x)) else {
            return bad("no identity".into());
        };
        let mut inv = vec![0; n];
        for x in 0..n {
            match (0..n).find(|&y| table[x][y] == identity && table[y][x] == identity) {
                Some(y) => inv[x] = y,
                None => return bad(format!("element {x} has no inverse")),
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return bad(format!("({a}*{b})*{c} != {a}*({b}*{c})"));
                    }
                }
            }
        }
        let labels = if labels.len() == n {
            labels
        } else {
            (0..n).map(|i| i.to_string()).collect()
        };
        Ok(FiniteGroup {
            name: name.to_string(),
            order: n,
            identity,
            mul: GroupMul::Table(table.iter().flatten().map(|&x| x as u32).collect()),
            inv,
            perms: None,
            universe: Universe {
                name: name.to_string(),
                size: n,
                metric,
                labels,
            },
        })
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        match &self.mul {
            GroupMul::Table(t) => t[a * self.order + b] as usize,
            GroupMul::Symmetric => {
                let perms = self.perms.as_ref().expect("symmetric groups keep permutations");
                lex_rank(&compose(&perms[a], &perms[b]))
            }
        }
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inv[a]
    }

    pub fn dist(&self, a: usize, b: usize) -> Rational {
        self.universe.dist(a, b)
    }

    pub fn label(&self, a: usize) -> String {
        self.universe.label(a)
    }

    pub fn find(&self, label: &str) -> Option<usize> {
        self.universe.find(label)
    }

    pub fn perm(&self, a: usize) -> Option<&[u8]> {
        self.perms.as_ref().map(|p| p[a].as_slice())
    }

    pub fn degree(&self) -> Option<usize> {
        self.perms.as_ref().map(|p| p.first().map_or(0, Vec::len))
    }

    /// Product of a word, left to right.
    pub fn product(&self, word: &[usize]) -> usize {
        word.iter().fold(self.identity, |acc, &x| self.mul(acc, x))
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    /// Full multiplication table (small groups).
    pub fn table(&self) -> Vec<Vec<usize>> {
        (0..self.order).map(|a| (0..self.order).map(|b| self.mul(a, b)).collect()).collect()
    }

    pub fn diameter(&self) -> Rational {
        if self.perms.is_some() {
            // Hamming: a fixed-point-free permutation exists once the degree is at least 2
            let members: Vec<usize> = self.elements().collect();
            if self.order <= 2000 {
                return diameter(&self.universe, &members);
            }
            return Rational::from_integer(1);
        }
        let members: Vec<usize> = self.elements().collect();
        diameter(&self.universe, &members)
    }
}

/// The one-sorted group signature: sort `G`, `mul`, `inv` and the constant `1`.
pub fn group_signature(diameter: Rational) -> Signature {
    let mut sig = Signature::new();
    let g = sig
        .add_sort(Sort {
            name: "G".into(),
            diameter,
            kind: SortKind::Finite,
            ball_index: None,
        })
        .expect("fresh signature");
    sig.add_function("mul", &[g, g], g, vec![Modulus::id(), Modulus::id()])
        .expect("fresh signature");
    sig.add_function("inv", &[g], g, vec![Modulus::id()]).expect("fresh signature");
    sig.add_function("1", &[], g, vec![]).expect("fresh signature");
    sig
}

/// Wraps a finite group as a one-sorted metric structure.
pub fn group_structure(group: FiniteGroup) -> MetricStructure {
    let group = Arc::new(group);
    let sig = group_signature(group.diameter());
    let mut m = MetricStructure::new(&group.name, sig);
    let u = m.add_universe(group.universe.clone());
    m.set_carrier(
        0,
        Carrier::Finite {
            universe: u,
            members: group.elements().collect(),
        },
    );
    let g = group.clone();
    let mul = Interp::Fn(Arc::new(move |a: &[Point]| {
        Point::Elem(g.mul(a[0].elem().expect("group element"), a[1].elem().expect("group element")))
    }));
    let g = group.clone();
    let inv = Interp::Fn(Arc::new(move |a: &[Point]| Point::Elem(g.inv(a[0].elem().expect("group element")))));
    let one = group.identity as u32;
    m.interpret("mul", &[0, 0], mul).expect("declared");
    m.interpret("inv", &[0], inv).expect("declared");
    m.interpret(
        "1",
        &[],
        Interp::FnTable {
            sizes: vec![],
            data: vec![one],
        },
    )
    .expect("declared");
    m.set_group(group);
    m
}

/// Full `Sym(n)` with the normalized Hamming metric. `cap` defaults to [`DEFAULT_SYM_CAP`].
pub fn sym_hamming(n: usize, cap: Option<usize>) -> Result<MetricStructure, Error> {
    let cap = cap.unwrap_or(DEFAULT_SYM_CAP);
    if n == 0 || n > cap {
        return Err(Error::Limit(format!("sym_hamming degree must be in 1..={cap}, got {n}")));
    }
    let perms: Vec<Vec<u8>> = (0..n as u8).permutations(n).collect();
    let g = FiniteGroup::from_perms(&format!("Sym({n})"), perms, true)?;
    Ok(group_structure(g))
}

/// `Z(2)^n x S_3` inside `Sym(2^n + 3)`: `Z(2)^n` acts regularly on the first `2^n` points
/// by XOR, `S_3` permutes the last three.
pub fn gn_family(n: usize) -> Result<MetricStructure, Error> {
    if n > 6 {
        return Err(Error::Limit(format!("gn_family index must be at most 6, got {n}")));
    }
    let block = 1usize << n;
    let s3: Vec<Vec<u8>> = (0..3u8).permutations(3).collect();
    let mut perms = Vec::with_capacity(6 * block);
    for a in 0..block {
        for s in &s3 {
            let mut p: Vec<u8> = (0..block).map(|i| (i ^ a) as u8).collect();
            p.extend(s.iter().map(|&j| block as u8 + j));
            perms.push(p);
        }
    }
    let g = FiniteGroup::from_perms(&format!("G_{n}"), perms, false)?;
    Ok(group_structure(g))
}

/// Cayley table of `Z_n` (addition mod `n`).
pub fn cyclic_table(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect()
}

/// Cayley table of `Sym(n)`, elements in lexicographic order.
pub fn symmetric_table(n: usize) -> Vec<Vec<usize>> {
    let perms: Vec<Vec<u8>> = (0..n as u8).permutations(n).collect();
    perms
        .iter()
        .map(|p| perms.iter().map(|q| lex_rank(&compose(p, q))).collect())
        .collect()
}

/// A finite group with the discrete `{0,1}` metric.
pub fn discrete_wrap(name: &str, table: &[Vec<usize>]) -> Result<MetricStructure, Error> {
    let g = FiniteGroup::from_table(name, table, Metric::Discrete, Vec::new())?;
    Ok(group_structure(g))
}
