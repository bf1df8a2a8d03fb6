//! Finite pointed trees with rational edge lengths and integer-radius ball sorts.

use std::collections::VecDeque;
use std::sync::Arc;

use num_traits::{Signed, Zero};

use super::{diameter, Carrier, Interp, Metric, MetricStructure, Point, Universe};
use crate::real::{format_rational, Rational};
use crate::sigform::{Modulus, Signature, Sort, SortKind};
use crate::Error;

#[derive(Clone, Debug)]
pub struct PointedTree {
    pub vertices: usize,
    pub basepoint: usize,
    adj: Vec<Vec<(usize, Rational)>>,
    dist: Vec<Rational>,
    /// `parent[r * n + v]`: neighbour of `v` on the path towards root `r`.
    parent: Vec<usize>,
}

impl PointedTree {
    pub fn new(vertices: usize, edges: &[(usize, usize, Rational)], basepoint: usize) -> Result<PointedTree, Error> {
        let n = vertices;
        if n == 0 || basepoint >= n {
            return Err(Error::Structure("tree needs at least one vertex and a valid basepoint".into()));
        }
        if edges.len() + 1 != n {
            return Err(Error::Structure(format!(
                "a tree on {n} vertices has {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b, len) in edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Structure(format!("bad edge ({a}, {b})")));
            }
            if !len.is_positive() {
                return Err(Error::Structure(format!("edge ({a}, {b}) has nonpositive length")));
            }
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        let mut dist = vec![Rational::zero(); n * n];
        let mut parent = vec![usize::MAX; n * n];
        for r in 0..n {
            let mut seen = vec![false; n];
            seen[r] = true;
            parent[r * n + r] = r;
            let mut queue = VecDeque::from([r]);
            while let Some(v) = queue.pop_front() {
                for &(w, len) in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        dist[r * n + w] = dist[r * n + v] + len;
                        parent[r * n + w] = v;
                        queue.push_back(w);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::Structure(
                    "edges do not form a connected tree (cycle or disconnected part)".into(),
                ));
            }
        }
        Ok(PointedTree {
            vertices: n,
            basepoint,
            adj,
            dist,
            parent,
        })
    }

    pub fn dist(&self, a: usize, b: usize) -> Rational {
        self.dist[a * self.vertices + b]
    }

    /// Vertices on the path from `a` to `b`, inclusive.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let n = self.vertices;
        let mut out = vec![a];
        let mut v = a;
        while v != b {
            v = self.parent[b * n + v];
            out.push(v);
        }
        out
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, Rational)] {
        &self.adj[v]
    }

    /// Midpoint of `a` and `b` in the geometric realization: the edge `(u, w)` of the
    /// path and the offset from `u`, or a vertex when the offset is zero.
    pub fn midpoint(&self, a: usize, b: usize) -> (usize, usize, Rational) {
        let half = self.dist(a, b) / 2;
        let path = self.path(a, b);
        for w in path.windows(2) {
            let (u, v) = (w[0], w[1]);
            if self.dist(a, v) >= half {
                return (u, v, half - self.dist(a, u));
            }
        }
        (a, a, Rational::zero())
    }

    /// Distance from vertex `x` to the point at offset `t` from `u` along edge `(u, v)`.
    pub fn dist_to_edge_point(&self, x: usize, u: usize, v: usize, t: Rational) -> Rational {
        if u == v {
            return self.dist(x, u);
        }
        let len = self.dist(u, v);
        // x reaches the edge through whichever endpoint is nearer along the tree
        if self.dist(x, v) == self.dist(x, u) + len {
            self.dist(x, u) + t
        } else {
            self.dist(x, v) + (len - t)
        }
    }

    pub fn max_height(&self) -> Rational {
        (0..self.vertices)
            .map(|v| self.dist(self.basepoint, v))
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

/// Pointed tree as a structure: sort `T` of all vertices and balls `B1..BN` around the basepoint,
/// with constants `0` and inclusions `inc`.
pub fn tree_space(vertices: usize, edges: &[(usize, usize, Rational)], basepoint: usize) -> Result<MetricStructure, Error> {
    let tree = PointedTree::new(vertices, edges, basepoint)?;
    let n = tree.vertices;
    let universe = Universe {
        name: "tree".into(),
        size: n,
        metric: Metric::Table {
            n,
            data: tree.dist.clone(),
        },
        labels: (0..n).map(|v| v.to_string()).collect(),
    };
    let height = tree.max_height();
    let top = height.ceil().to_integer().max(1) as u32;
    let all: Vec<usize> = (0..n).collect();
    let mut sig = Signature::new();
    let t = sig
        .add_sort(Sort {
            name: "T".into(),
            diameter: diameter(&universe, &all),
            kind: SortKind::Finite,
            ball_index: None,
        })
        .expect("fresh");
    let mut balls = Vec::new();
    for r in 1..=top {
        let members: Vec<usize> = all
            .iter()
            .copied()
            .filter(|&v| tree.dist(basepoint, v) <= Rational::from_integer(r as i64))
            .collect();
        let id = sig
            .add_sort(Sort {
                name: format!("B{r}"),
                diameter: diameter(&universe, &members),
                kind: SortKind::TreeBall,
                ball_index: Some(r),
            })
            .expect("fresh");
        balls.push((id, members));
    }
    sig.add_function("0", &[], t, vec![]).expect("fresh");
    for (i, (b, _)) in balls.iter().enumerate() {
        sig.add_function("0", &[], *b, vec![]).expect("fresh");
        let next = balls.get(i + 1).map_or(t, |x| x.0);
        sig.add_function("inc", &[*b], next, vec![Modulus::id()]).expect("fresh");
    }
    let mut m = MetricStructure::new(&format!("tree on {n} vertices (height {})", format_rational(&height)), sig.clone());
    let u = m.add_universe(universe);
    m.set_carrier(t, Carrier::Finite { universe: u, members: all });
    for (b, members) in &balls {
        m.set_carrier(
            *b,
            Carrier::Finite {
                universe: u,
                members: members.clone(),
            },
        );
    }
    for d in sig.symbols() {
        let interp = match d.name.as_str() {
            "0" => Interp::FnTable {
                sizes: vec![],
                data: vec![basepoint as u32],
            },
            _ => Interp::Fn(Arc::new(|a: &[Point]| a[0].clone())),
        };
        m.interpret(&d.name, &d.args, interp)?;
    }
    m.set_tree(Arc::new(tree));
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mstruct::metric_violation;

    fn one() -> Rational {
        Rational::from_integer(1)
    }

    #[test]
    fn star_leaves_are_two_apart() {
        let m = tree_space(4, &[(0, 1, one()), (0, 2, one()), (0, 3, one())], 0).unwrap();
        m.validate().unwrap();
        let u = m.universe(0);
        for a in 1..4 {
            for b in 1..4 {
                if a != b {
                    assert_eq!(u.dist(a, b), Rational::from_integer(2));
                }
            }
        }
        assert_eq!(metric_violation(u), None);
    }

    #[test]
    fn path_balls() {
        let edges: Vec<_> = (0..4).map(|i| (i, i + 1, one())).collect();
        let m = tree_space(5, &edges, 0).unwrap();
        let b2 = m.sort_id("B2").unwrap();
        assert_eq!(m.member_indices(b2).unwrap(), &[0, 1, 2]);
        assert_eq!(m.sort_id("B4").map(|_| ()).ok(), Some(()));
        assert!(m.sort_id("B5").is_err());
    }

    #[test]
    fn rejects_cycles_and_gaps() {
        let cyc = [(0, 1, one()), (1, 2, one()), (2, 0, one())];
        assert!(tree_space(4, &cyc, 0).is_err());
        assert!(tree_space(3, &cyc, 0).is_err());
        assert!(tree_space(4, &[(0, 1, one()), (1, 0, one()), (2, 3, one())], 0).is_err());
        assert!(tree_space(2, &[(0, 1, Rational::zero())], 0).is_err());
    }

    #[test]
    fn midpoints_in_the_realization() {
        let t = PointedTree::new(3, &[(0, 1, one()), (1, 2, Rational::new(1, 2))], 0).unwrap();
        let (u, v, off) = t.midpoint(0, 2);
        assert_eq!((u, v, off), (0, 1, Rational::new(3, 4)));
        assert_eq!(t.dist_to_edge_point(2, u, v, off), Rational::new(3, 4));
        assert_eq!(t.dist_to_edge_point(0, u, v, off), Rational::new(3, 4));
    }
}
