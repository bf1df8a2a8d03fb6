//! Structure sequences and tail limits standing in for ultraproducts.
//!
//! A sequence whose tail is classified convergent has that limit along every
//! nonprincipal ultrafilter; oscillating or undetermined tails are reported as such.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::eval::{evaluate_with, Assignment, EvalOptions, ValueBounds};
use crate::mstruct::{gn_family, sym_hamming, MetricStructure, Point, StructureSpec};
use crate::real::{rational_to_f64, Real};
use crate::sigform::{static_range, Formula, Signature, SortId};
use crate::Error;

pub const DEFAULT_WINDOW: usize = 3;

/// Members indexed `first..first + len`, sharing one signature.
#[derive(Clone, Debug)]
pub struct StructureSequence {
    pub first: usize,
    members: Vec<MetricStructure>,
}

impl StructureSequence {
    pub fn new(first: usize, members: Vec<MetricStructure>) -> Result<Self, Error> {
        let Some(head) = members.first() else {
            return Err(Error::Input("a structure sequence needs at least one member".into()));
        };
        for (k, m) in members.iter().enumerate() {
            if m.signature() != head.signature() {
                return Err(Error::Signature(format!(
                    "member {} (`{}`) has a different signature from member {first}",
                    first + k,
                    m.name
                )));
            }
        }
        Ok(StructureSequence { first, members })
    }

    pub fn from_fn(range: std::ops::RangeInclusive<usize>, f: impl Fn(usize) -> Result<MetricStructure, Error>) -> Result<Self, Error> {
        let first = *range.start();
        let members = range.map(f).collect::<Result<Vec<_>, _>>()?;
        StructureSequence::new(first, members)
    }

    /// `gn_family(n)` for `n` in the range.
    pub fn gn(range: std::ops::RangeInclusive<usize>) -> Result<Self, Error> {
        Self::from_fn(range, gn_family)
    }

    pub fn sym_hamming(range: std::ops::RangeInclusive<usize>) -> Result<Self, Error> {
        Self::from_fn(range, |n| sym_hamming(n, None))
    }

    pub fn signature(&self) -> &Signature {
        self.members[0].signature()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.first + self.members.len() - 1
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.max_index()
    }

    pub fn member(&self, index: usize) -> &MetricStructure {
        &self.members[index - self.first]
    }

    pub fn members(&self) -> &[MetricStructure] {
        &self.members
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SequenceFile {
    Family {
        family: String,
        range: (usize, usize),
    },
    Members {
        #[serde(default)]
        signature: Option<Value>,
        #[serde(default = "one")]
        first: usize,
        members: Vec<StructureSpec>,
    },
}

fn one() -> usize {
    1
}

/// Reads `{"family": "gn", "range": [1, 6]}` or `{"signature": ..., "members": [...]}`.
pub fn load_sequence(text: &str) -> Result<StructureSequence, Error> {
    let file: SequenceFile = serde_json::from_str(text).map_err(|e| Error::Input(format!("sequence file: {e}")))?;
    match file {
        SequenceFile::Family { family, range: (a, b) } => {
            if a > b {
                return Err(Error::Input("empty index range".into()));
            }
            match family.as_str() {
                "gn" => StructureSequence::gn(a..=b),
                "sym_hamming" => StructureSequence::sym_hamming(a..=b),
                other => Err(Error::Input(format!("unknown family `{other}` (expected gn or sym_hamming)"))),
            }
        }
        SequenceFile::Members { signature, first, members } => {
            let members = members.iter().map(StructureSpec::build).collect::<Result<Vec<_>, _>>()?;
            let seq = StructureSequence::new(first, members)?;
            if let Some(sig) = signature {
                let sig = Signature::from_json(&sig.to_string())?;
                if &sig != seq.signature() {
                    return Err(Error::Signature("members do not match the declared signature".into()));
                }
            }
            Ok(seq)
        }
    }
}

/// One point per index, all in the same sort.
#[derive(Clone, Debug)]
pub struct PointSequence {
    pub sort: SortId,
    pub points: Vec<Point>,
}

impl PointSequence {
    pub fn from_fn(seq: &StructureSequence, sort: SortId, f: impl Fn(usize, &MetricStructure) -> Point) -> Self {
        PointSequence {
            sort,
            points: seq.indices().map(|n| f(n, seq.member(n))).collect(),
        }
    }

    /// The point labelled `label(n)` in each member.
    pub fn by_label(seq: &StructureSequence, sort: SortId, label: impl Fn(usize) -> String) -> Result<Self, Error> {
        let points = seq
            .indices()
            .map(|n| seq.member(n).point(sort, &label(n)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PointSequence { sort, points })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    /// Every tail value lies within `tol` of `limit`.
    Convergent {
        limit: f64,
        tol: f64,
    },
    Oscillating,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub values: Vec<(usize, ValueBounds)>,
    pub classification: Classification,
    pub window: usize,
}

impl ConvergenceReport {
    pub fn limit(&self) -> Option<f64> {
        match self.classification {
            Classification::Convergent { limit, .. } => Some(limit),
            _ => None,
        }
    }
}

/// Classifies the last `window` values. Stationary tails (spread ≤ `tol`) converge to the
/// last value; strictly monotone tails with shrinking increments are extrapolated
/// geometrically and clamped to `[lo, hi]`; sign-alternating increments oscillate.
pub fn classify_tail(values: &[f64], window: usize, tol: f64, range: (f64, f64)) -> Classification {
    let tail = &values[values.len().saturating_sub(window.max(2))..];
    if tail.len() < 2 {
        return Classification::Undetermined;
    }
    let last = *tail.last().expect("nonempty");
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= tol {
        return Classification::Convergent { limit: last, tol: hi - lo };
    }
    let steps: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    let signs: Vec<i8> = steps
        .iter()
        .map(|&s| {
            if s > tol {
                1
            } else if s < -tol {
                -1
            } else {
                0
            }
        })
        .collect();
    if signs.windows(2).any(|w| w[0] * w[1] < 0) {
        return Classification::Oscillating;
    }
    let monotone = signs.iter().all(|&s| s == signs[0] && s != 0);
    if monotone && steps.len() >= 2 {
        let ratios: Vec<f64> = steps.windows(2).map(|w| w[1] / w[0]).collect();
        if ratios.iter().all(|&r| r > 0.0 && r < 1.0) {
            let r = ratios.iter().copied().fold(0.0, f64::max);
            let step = *steps.last().expect("nonempty");
            let limit = (last + step * r / (1.0 - r)).clamp(range.0, range.1);
            let dev = tail.iter().map(|v| (v - limit).abs()).fold(0.0, f64::max);
            return Classification::Convergent { limit, tol: dev };
        }
    }
    Classification::Undetermined
}

fn options(tol: f64) -> EvalOptions {
    EvalOptions {
        parallel: false,
        ..EvalOptions::with_tol(tol)
    }
}

/// Evaluates the closed formula `f` on every member and classifies the tail.
pub fn ultra_eval(seq: &StructureSequence, f: &Formula, window: usize, tol: f64) -> Result<ConvergenceReport, Error> {
    if !f.is_sentence() {
        return Err(Error::Eval("ultra_eval needs a closed formula".into()));
    }
    let opts = options(tol);
    let values = seq
        .members()
        .par_iter()
        .map(|m| evaluate_with(m, f, &Assignment::new(), &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let (lo, hi) = static_range(f.typed(), seq.signature(), f.cap());
    let floats: Vec<f64> = values.iter().map(|v| v.value().to_f64()).collect();
    Ok(ConvergenceReport {
        classification: classify_tail(&floats, window, tol, (rational_to_f64(&lo), rational_to_f64(&hi))),
        values: seq.indices().zip(values).collect(),
        window,
    })
}

/// Index-wise distances `d(p_n, q_n)` with tail classification.
pub fn point_distance(
    seq: &StructureSequence,
    p: &PointSequence,
    q: &PointSequence,
    window: usize,
    tol: f64,
) -> Result<ConvergenceReport, Error> {
    if p.sort != q.sort {
        return Err(Error::Sort("point sequences lie in different sorts".into()));
    }
    if p.points.len() != seq.len() || q.points.len() != seq.len() {
        return Err(Error::Input("point sequences must have one point per member".into()));
    }
    let mut values = Vec::new();
    for (k, n) in seq.indices().enumerate() {
        let m = seq.member(n);
        for x in [&p.points[k], &q.points[k]] {
            if !m.contains(p.sort, x, tol) {
                return Err(Error::Sort(format!(
                    "point {x} is not in sort `{}` at index {n}",
                    m.signature().sort(p.sort).name
                )));
            }
        }
        values.push((n, ValueBounds::exact(m.dist(p.sort, &p.points[k], &q.points[k]))));
    }
    let floats: Vec<f64> = values.iter().map(|(_, v)| v.lo.to_f64()).collect();
    let diam = rational_to_f64(&seq.signature().sort(p.sort).diameter);
    Ok(ConvergenceReport {
        classification: classify_tail(&floats, window, tol, (0.0, diam)),
        values,
        window,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub classes: Vec<Vec<usize>>,
    /// Pairs left unmerged because their tail was oscillating or undetermined.
    pub undetermined: Vec<(usize, usize)>,
    /// Pairs in one class whose limit distance exceeds `3·tol`.
    pub intransitive: Vec<(usize, usize)>,
}

/// Classes of the relation "tail distance converges below `tol`".
pub fn quotient_classes(seq: &StructureSequence, points: &[PointSequence], window: usize, tol: f64) -> Result<Partition, Error> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    let mut limits = vec![vec![None; n]; n];
    let mut undetermined = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let r = point_distance(seq, &points[i], &points[j], window, tol)?;
            match r.limit() {
                Some(l) => {
                    limits[i][j] = Some(l);
                    if l < tol {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => undetermined.push((i, j)),
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_class = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_class[r] == usize::MAX {
            root_class[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[root_class[r]].push(i);
    }
    let mut intransitive = Vec::new();
    for c in &classes {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                if limits[i][j].is_none_or(|l| l > 3.0 * tol) {
                    intransitive.push((i, j));
                }
            }
        }
    }
    Ok(Partition {
        classes,
        undetermined,
        intransitive,
    })
}

/// Exact value of a report entry, when it has one.
pub fn exact_value(v: &ValueBounds) -> Option<crate::real::Rational> {
    match (v.is_exact(), v.lo) {
        (true, Real::Exact(q)) => Some(q),
        _ => None,
    }
}
