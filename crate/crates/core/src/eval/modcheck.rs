//! Checks that an interpreted symbol obeys its declared modulus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::optimize::{random_point, Block};
use crate::mstruct::{norm, scalar_apply, Carrier, MetricStructure, Point};
use crate::real::{rational_to_f64, Rational, Real};
use crate::sigform::signature::split_parametric;
use crate::sigform::{Scalar, SymbolDecl, SymbolKind};
use crate::Error;

/// Argument tuples checked exhaustively before falling back to sampling.
const EXHAUSTIVE_LIMIT: usize = 4_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct ModulusViolation {
    pub eps: f64,
    /// Argument position that was moved.
    pub position: usize,
    pub args: Vec<String>,
    pub moved: Vec<String>,
    pub distance: f64,
    pub difference: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusReport {
    pub symbol: String,
    /// `(eps, worst margin)` where margin = max |ΔR| − ε over pairs closer than γ(ε).
    /// A violation has margin ≥ 0.
    pub margins: Vec<(f64, f64)>,
    pub pairs_checked: usize,
    pub exhaustive: bool,
    pub worst: Option<ModulusViolation>,
}

impl ModulusReport {
    pub fn ok(&self) -> bool {
        self.worst.is_none()
    }
}

enum Output {
    Point(Point, usize),
    Value(Real),
}

fn apply(m: &MetricStructure, decl: &SymbolDecl, args: &[Point]) -> Result<Output, Error> {
    if let Some((_, payload)) = split_parametric(&decl.name) {
        let field = m
            .field()
            .ok_or_else(|| Error::Eval(format!("`{}` needs a Hilbert structure", decl.name)))?;
        let c = Scalar::parse(payload).ok_or_else(|| Error::Eval(format!("bad scalar in `{}`", decl.name)))?;
        let v = scalar_apply(field, &c, args[0].coords().expect("Hilbert point"));
        return Ok(Output::Point(Point::vector(v), decl.result_sort().expect("function")));
    }
    let interp = m
        .interp_of(decl)
        .ok_or_else(|| Error::Eval(format!("`{}` is not interpreted", decl.name)))?;
    Ok(match decl.kind {
        SymbolKind::Function { result } => Output::Point(interp.apply(args), result),
        SymbolKind::Predicate { .. } => Output::Value(interp.value(args)),
    })
}

fn difference(m: &MetricStructure, a: Output, b: Output) -> Real {
    match (a, b) {
        (Output::Point(x, s), Output::Point(y, _)) => m.dist(s, &x, &y),
        (Output::Value(x), Output::Value(y)) => x.abs_diff(y),
        _ => unreachable!("same symbol"),
    }
}

fn exceeds(diff: Real, eps: Rational, tol: f64) -> bool {
    match diff {
        Real::Exact(d) => d >= eps,
        Real::Approx(d) => d >= rational_to_f64(&eps) + tol,
    }
}

struct Check<'a> {
    m: &'a MetricStructure,
    decl: &'a SymbolDecl,
    grid: &'a [Rational],
    tol: f64,
    margins: Vec<f64>,
    pairs: usize,
    worst: Option<(f64, ModulusViolation)>,
}

impl Check<'_> {
    fn pair(&mut self, j: usize, args: &[Point], moved: &[Point]) -> Result<(), Error> {
        let sort = self.decl.args[j];
        let d = self.m.dist(sort, &args[j], &moved[j]);
        let mut out = None;
        for (k, &eps) in self.grid.iter().enumerate() {
            let gamma = self.decl.moduli[j].apply(eps);
            if d >= Real::Exact(gamma) {
                continue;
            }
            let diff = match out {
                Some(v) => v,
                None => {
                    let v = difference(self.m, apply(self.m, self.decl, args)?, apply(self.m, self.decl, moved)?);
                    out = Some(v);
                    v
                }
            };
            self.pairs += 1;
            let margin = diff.to_f64() - rational_to_f64(&eps);
            self.margins[k] = self.margins[k].max(margin);
            if exceeds(diff, eps, self.tol) && self.worst.as_ref().is_none_or(|(w, _)| margin > *w) {
                let label = |ps: &[Point]| ps.iter().zip(&self.decl.args).map(|(p, &s)| self.m.label(s, p)).collect::<Vec<_>>();
                self.worst = Some((
                    margin,
                    ModulusViolation {
                        eps: rational_to_f64(&eps),
                        position: j,
                        args: label(args),
                        moved: label(moved),
                        distance: d.to_f64(),
                        difference: diff.to_f64(),
                    },
                ));
            }
        }
        Ok(())
    }
}

/// Tests `d(x_j, x'_j) < γ_j(ε) ⇒ |R(..x_j..) − R(..x'_j..)| < ε` for every `ε` in `grid`:
/// exhaustively when all argument sorts are finite and small, otherwise on `samples`
/// random pairs per argument position.
pub fn check_modulus(
    m: &MetricStructure,
    decl: &SymbolDecl,
    grid: &[Rational],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<ModulusReport, Error> {
    let arity = decl.args.len();
    let mut check = Check {
        m,
        decl,
        grid,
        tol,
        margins: vec![f64::NEG_INFINITY; grid.len()],
        pairs: 0,
        worst: None,
    };
    let finite: Option<Vec<&[usize]>> = decl.args.iter().map(|&s| m.member_indices(s)).collect();
    let total = finite.as_ref().map(|f| {
        let tuples = f.iter().fold(1usize, |acc, s| acc.saturating_mul(s.len()));
        let widest = f.iter().map(|s| s.len()).max().unwrap_or(1);
        tuples.saturating_mul(widest).saturating_mul(arity.max(1))
    });
    let exhaustive = matches!(total, Some(t) if t <= EXHAUSTIVE_LIMIT);
    if exhaustive {
        let sets = finite.expect("finite sorts");
        for j in 0..arity {
            for tuple in itertools::Itertools::multi_cartesian_product(sets.iter().map(|s| s.iter().copied())) {
                let args: Vec<Point> = tuple.iter().map(|&i| Point::Elem(i)).collect();
                for &other in sets[j] {
                    if other == tuple[j] {
                        continue;
                    }
                    let mut moved = args.clone();
                    moved[j] = Point::Elem(other);
                    check.pair(j, &args, &moved)?;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let max_eps = grid.iter().copied().max().unwrap_or_else(|| Rational::from_integer(1));
        for j in 0..arity {
            for _ in 0..samples {
                let args: Vec<Point> = decl.args.iter().map(|&s| sample(m, s, &mut rng)).collect();
                let moved_j = match m.carrier(decl.args[j]) {
                    Carrier::Finite { members, .. } => Point::Elem(members[rng.random_range(0..members.len())]),
                    Carrier::Ball { dim, radius, sphere } => {
                        // perturb within the largest γ(ε) so the pair is informative
                        let reach = rational_to_f64(&decl.moduli[j].apply(max_eps)) * rng.random::<f64>();
                        let dir = random_point(
                            &[Block {
                                dim: *dim,
                                radius: 1.0,
                                sphere: true,
                            }],
                            &mut rng,
                        );
                        let x = args[j].coords().expect("Hilbert point");
                        let mut y: Vec<f64> = x.iter().zip(&dir).map(|(a, u)| a + reach * u).collect();
                        project(&mut y, *radius, *sphere);
                        Point::vector(y)
                    }
                };
                let mut moved = args.clone();
                moved[j] = moved_j;
                check.pair(j, &args, &moved)?;
            }
        }
    }
    Ok(ModulusReport {
        symbol: decl.name.clone(),
        margins: grid.iter().map(rational_to_f64).zip(check.margins).collect(),
        pairs_checked: check.pairs,
        exhaustive,
        worst: check.worst.map(|(_, v)| v),
    })
}

fn project(y: &mut [f64], radius: f64, sphere: bool) {
    let n = norm(y);
    if (sphere || n > radius) && n > 0.0 {
        y.iter_mut().for_each(|t| *t *= radius / n);
    }
}

fn sample(m: &MetricStructure, sort: usize, rng: &mut ChaCha8Rng) -> Point {
    match m.carrier(sort) {
        Carrier::Finite { members, .. } => Point::Elem(members[rng.random_range(0..members.len())]),
        Carrier::Ball { dim, radius, sphere } => Point::vector(random_point(
            &[Block {
                dim: *dim,
                radius: *radius,
                sphere: *sphere,
            }],
            rng,
        )),
    }
}
