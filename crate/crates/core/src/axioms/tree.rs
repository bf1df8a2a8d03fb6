//! Exact tree defects of a finite metric sort: four-point hyperbolicity and midpoints.

use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::eval::ValueBounds;
use crate::mstruct::MetricStructure;
use crate::real::{Rational, Real};
use crate::sigform::SortId;
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeDefect {
    /// `max (d(x,y) + d(z,w) − max(d(x,z) + d(y,w), d(x,w) + d(y,z)))⁺` over 4-tuples.
    pub hyperbolicity: Real,
    /// `sup_{x,y} inf_z max(|d(x,z) − d(x,y)/2|, |d(y,z) − d(x,y)/2|)`.
    pub midpoint: Real,
    /// Whether `z` ranged over the geometric realization (edge points) rather than the sort.
    pub realized: bool,
}

pub fn tree_defect_parts(m: &MetricStructure, sort: SortId) -> Result<TreeDefect, Error> {
    let members = m
        .member_indices(sort)
        .ok_or_else(|| Error::Structure("tree defect needs a finite sort".into()))?;
    let u = m.universe_of(sort).expect("finite sort");
    let d = |a: usize, b: usize| u.dist(a, b);
    let hyperbolicity = members
        .par_iter()
        .map(|&x| {
            let mut worst = Rational::zero();
            for &y in members {
                for &z in members {
                    for &w in members {
                        let lhs = d(x, y) + d(z, w);
                        let rhs = (d(x, z) + d(y, w)).max(d(x, w) + d(y, z));
                        worst = worst.max(lhs - rhs);
                    }
                }
            }
            worst
        })
        .max()
        .unwrap_or_else(Rational::zero);
    let two = Rational::from_integer(2);
    let gap = |dxz: Rational, dyz: Rational, half: Rational| (dxz - half).abs().max((dyz - half).abs());
    let tree = m.tree().filter(|t| u.name == "tree" && u.size == t.vertices);
    let midpoint = members
        .par_iter()
        .map(|&x| {
            let mut worst = Rational::zero();
            for &y in members {
                let half = d(x, y) / two;
                let best = match tree {
                    Some(t) => {
                        let (a, b, s) = t.midpoint(x, y);
                        gap(t.dist_to_edge_point(x, a, b, s), t.dist_to_edge_point(y, a, b, s), half)
                    }
                    None => members.iter().map(|&z| gap(d(x, z), d(y, z), half)).min().expect("nonempty"),
                };
                worst = worst.max(best);
            }
            worst
        })
        .max()
        .unwrap_or_else(Rational::zero);
    Ok(TreeDefect {
        hyperbolicity: Real::Exact(hyperbolicity),
        midpoint: Real::Exact(midpoint),
        realized: tree.is_some(),
    })
}

/// Max of the two parts of [`tree_defect_parts`].
pub fn tree_defect(m: &MetricStructure, sort: SortId) -> Result<ValueBounds, Error> {
    let parts = tree_defect_parts(m, sort)?;
    Ok(ValueBounds::exact(parts.hyperbolicity.max(parts.midpoint)))
}
