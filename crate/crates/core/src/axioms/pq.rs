//! Unary predicates `P`, `Q` on a group sort, as used by the boundedness schemes.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::mstruct::{Interp, MetricStructure};
use crate::real::{format_rational, Rational};
use crate::sigform::Modulus;
use crate::Error;

/// Rescaling applied by [`from_open_set`]: `P = p_factor · d(x, G∖V)`, `Q = q_factor · d(x, V)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Normalization {
    pub p_factor: String,
    pub q_factor: String,
}

fn lipschitz(m: &MetricStructure, members: &[usize], values: &[Rational]) -> Modulus {
    let u = m.universe_of(0).expect("finite group sort");
    let mut best = Rational::zero();
    for (i, &a) in members.iter().enumerate() {
        for (j, &b) in members.iter().enumerate().skip(i + 1) {
            let d = u.dist(a, b);
            let ratio = (values[i] - values[j]).abs() / d;
            best = best.max(ratio);
        }
    }
    if best <= Rational::from_integer(1) {
        Modulus::id()
    } else {
        Modulus::scale(best).expect("positive")
    }
}

/// Adds `P, Q : G → [0, 1]` with the given values (indexed like the members of `G`).
/// Moduli are the exact Lipschitz constants of the tables.
pub fn with_predicates(group: &MetricStructure, p: &[Rational], q: &[Rational]) -> Result<MetricStructure, Error> {
    let g = group.sort_id("G")?;
    let members = group
        .member_indices(g)
        .ok_or_else(|| Error::Structure("sort G must be finite".into()))?
        .to_vec();
    let size = group.universe_of(g).expect("finite").size;
    for (name, vals) in [("P", p), ("Q", q)] {
        if vals.len() != members.len() {
            return Err(Error::Structure(format!(
                "{name} needs {} values, got {}",
                members.len(),
                vals.len()
            )));
        }
        if vals.iter().any(|v| v.is_negative() || *v > Rational::from_integer(1)) {
            return Err(Error::Structure(format!("{name} values must lie in [0, 1]")));
        }
    }
    let (mp, mq) = (lipschitz(group, &members, p), lipschitz(group, &members, q));
    let unit = (Rational::zero(), Rational::from_integer(1));
    let mut m = group.extend(&format!("{} with P, Q", group.name), |sig| {
        sig.add_predicate("P", &[g], unit, vec![mp])?;
        sig.add_predicate("Q", &[g], unit, vec![mq])?;
        Ok(())
    })?;
    for (name, vals) in [("P", p), ("Q", q)] {
        let mut data = vec![Rational::zero(); size];
        for (&i, &v) in members.iter().zip(vals) {
            data[i] = v;
        }
        m.interpret(name, &[g], Interp::PredTable { sizes: vec![size], data })?;
    }
    Ok(m)
}

/// `Q(x) = d(x, V)` and `P(x) = d(x, G∖V)`, each rescaled so that its supremum is 1/2
/// (which the k0 axioms `inf |P − 1/2| = inf |Q − 1/2| = 0` require).
/// `open` lists elements of `V` by label; `V` must be a nonempty proper subset.
pub fn from_open_set(group: &MetricStructure, open: &[&str]) -> Result<(MetricStructure, Normalization), Error> {
    let g = group.sort_id("G")?;
    let members = group
        .member_indices(g)
        .ok_or_else(|| Error::Structure("sort G must be finite".into()))?
        .to_vec();
    let u = group.universe_of(g).expect("finite").clone();
    let mut inside = vec![false; u.size];
    for label in open {
        let i = u
            .find(label)
            .ok_or_else(|| Error::Structure(format!("unknown element `{label}`")))?;
        inside[i] = true;
    }
    let (v, rest): (Vec<usize>, Vec<usize>) = members.iter().partition(|&&i| inside[i]);
    if v.is_empty() || rest.is_empty() {
        return Err(Error::Structure("V must be a nonempty proper subset of G".into()));
    }
    let dist_to = |x: usize, set: &[usize]| set.iter().map(|&y| u.dist(x, y)).min().expect("nonempty");
    let q: Vec<Rational> = members.iter().map(|&x| dist_to(x, &v)).collect();
    let p: Vec<Rational> = members.iter().map(|&x| dist_to(x, &rest)).collect();
    let half = Rational::new(1, 2);
    let factor = |vals: &[Rational]| half / *vals.iter().max().expect("nonempty");
    let (fp, fq) = (factor(&p), factor(&q));
    let p: Vec<Rational> = p.iter().map(|x| x * fp).collect();
    let q: Vec<Rational> = q.iter().map(|x| x * fq).collect();
    let m = with_predicates(group, &p, &q)?;
    Ok((
        m,
        Normalization {
            p_factor: format_rational(&fp),
            q_factor: format_rational(&fq),
        },
    ))
}
