use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mstruct::{cyclic_table, discrete_wrap, gn_family, hilbert_tower, load_structure, sym_hamming, symmetric_table};
use crate::real::Rational;
use crate::sigform::{derived_modulus_in, parse_formula, parse_formula_with, Expr, Term};

fn exact(m: &MetricStructure, text: &str) -> Real {
    let f = parse_formula(text, m.signature()).unwrap();
    let v = evaluate(m, &f, &Assignment::new(), 1e-9).unwrap();
    assert!(v.is_exact(), "{text}: {v:?}");
    v.lo
}

/// max over pairs of d(xy, yx), straight from the group tables.
fn commutator_oracle(m: &MetricStructure) -> Rational {
    let g = m.group().unwrap();
    let mut best = Rational::from_integer(0);
    for x in g.elements() {
        for y in g.elements() {
            best = best.max(g.dist(g.mul(x, y), g.mul(y, x)));
        }
    }
    best
}

const COMM: &str = "sup x:G. sup y:G. d(mul(x,y),mul(y,x))";

#[test]
fn identity_distance_is_zero() {
    let m = sym_hamming(3, None).unwrap();
    assert_eq!(exact(&m, "d(1,1)"), Real::int(0));
}

#[test]
fn commutativity_values() {
    let s3 = sym_hamming(3, None).unwrap();
    assert_eq!(exact(&s3, COMM), Real::Exact(commutator_oracle(&s3)));
    assert_eq!(exact(&s3, COMM), Real::int(1));
    let g1 = gn_family(1).unwrap();
    assert_eq!(exact(&g1, COMM), Real::Exact(commutator_oracle(&g1)));
    assert_eq!(exact(&g1, COMM), Real::ratio(3, 5));
}

#[test]
fn witness_attains_value() {
    let m = sym_hamming(3, None).unwrap();
    let f = parse_formula(COMM, m.signature()).unwrap();
    let (v, w) = evaluate_with_witness(&m, &f, &Assignment::new(), &EvalOptions::default()).unwrap();
    assert_eq!(v.lo, Real::int(1));
    let g = m.group().unwrap();
    let (x, y) = (w[0].point.elem().unwrap(), w[1].point.elem().unwrap());
    assert_eq!(g.dist(g.mul(x, y), g.mul(y, x)), Rational::from_integer(1));
}

#[test]
fn unit_sphere_in_ball() {
    let m = hilbert_tower(Field::Real, 2, 1).unwrap();
    let f = parse_formula("inf v:B1. absdiff(norm(v),1)", m.signature()).unwrap();
    let v = evaluate(&m, &f, &Assignment::new(), 1e-9).unwrap();
    assert!(v.hi_certified && v.hi.to_f64() < 1e-9, "{v:?}");
    assert!(v.lo_certified && v.lo == Real::int(0));
    // sup over the sphere hits the static ceiling, so both ends are certified
    let f = parse_formula("sup v:S1. norm(v)", m.signature()).unwrap();
    let v = evaluate(&m, &f, &Assignment::new(), 1e-9).unwrap();
    assert!(v.certified() && (v.lo.to_f64() - 1.0).abs() < 1e-12, "{v:?}");
}

#[test]
fn hilbert_lower_bound_is_heuristic() {
    let m = hilbert_tower(Field::Real, 2, 2).unwrap();
    // inf over B1 of |v - e| for e at distance 2 from the origin in B2: minimum 1
    let f = parse_formula_with("inf v:B1. d(inc(v), w)", m.signature(), Rational::from_integer(4), &[]).unwrap();
    let a = Assignment::new().with("w", Point::vector(vec![2.0, 0.0]));
    let v = evaluate(&m, &f, &a, 1e-9).unwrap();
    assert!((v.hi.to_f64() - 1.0).abs() < 1e-6, "{v:?}");
    assert!(v.hi_certified && !v.lo_certified);
    assert!(v.lo.to_f64() <= v.hi.to_f64());
}

#[test]
fn flattened_hilbert_block() {
    let m = hilbert_tower(Field::Real, 2, 2).unwrap();
    // the largest distance between two unit-ball points is 2
    let f = parse_formula_with(
        "sup u:B1. sup v:B1. d(inc(u), inc(v))",
        m.signature(),
        Rational::from_integer(2),
        &[],
    )
    .unwrap();
    let v = evaluate(&m, &f, &Assignment::new(), 1e-9).unwrap();
    assert!((v.lo.to_f64() - 2.0).abs() < 1e-6, "{v:?}");
    // the ceiling of d on B2 is 4, so the upper end stays heuristic
    assert!(v.lo_certified && !v.hi_certified);
}

#[test]
fn lam_uses_field_scaling() {
    let m = hilbert_tower(Field::Real, 3, 2).unwrap();
    let f = parse_formula_with("norm(lam[3/2](v))", m.signature(), Rational::from_integer(2), &[]).unwrap();
    let a = Assignment::new().with("v", Point::vector(vec![0.6, 0.0, 0.0]));
    let v = evaluate(&m, &f, &a, 1e-9).unwrap();
    assert!((v.lo.to_f64() - 0.9).abs() < 1e-12);
}

#[test]
fn unbound_and_misplaced_variables() {
    let m = sym_hamming(3, None).unwrap();
    let f = parse_formula("d(x,1)", m.signature()).unwrap();
    assert!(matches!(evaluate(&m, &f, &Assignment::new(), 1e-9), Err(Error::Eval(_))));
    let bad = Assignment::new().with("x", Point::Elem(99));
    assert!(matches!(evaluate(&m, &f, &bad, 1e-9), Err(Error::Sort(_))));
    let ok = Assignment::new().with("x", m.point(0, "(1 2)").unwrap());
    assert_eq!(evaluate(&m, &f, &ok, 1e-9).unwrap().lo, Real::ratio(2, 3));
}

#[test]
fn parallel_and_serial_agree() {
    let m = sym_hamming(4, None).unwrap();
    let f = parse_formula("sup x:G. inf y:G. d(mul(x,y), mul(y,mul(x,x)))", m.signature()).unwrap();
    let par = evaluate_with(&m, &f, &Assignment::new(), &EvalOptions::default()).unwrap();
    let ser = evaluate_with(
        &m,
        &f,
        &Assignment::new(),
        &EvalOptions {
            parallel: false,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(par, ser);
}

fn discrete_groups() -> (MetricStructure, MetricStructure) {
    (
        discrete_wrap("Z6", &cyclic_table(6)).unwrap(),
        discrete_wrap("S3", &symmetric_table(3)).unwrap(),
    )
}

#[test]
fn crisp_collapse_on_discrete_groups() {
    let (z6, s3) = discrete_groups();
    assert_eq!(exact(&z6, COMM), Real::int(0));
    assert_eq!(exact(&s3, COMM), Real::int(1));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = RandomFormula {
        allow_half: false,
        ..Default::default()
    };
    for _ in 0..200 {
        let f = random_formula(z6.signature(), &[], &cfg, &mut rng);
        for m in [&z6, &s3] {
            let v = evaluate(m, &f, &Assignment::new(), 1e-9).unwrap();
            assert!(v.is_exact() && (v.lo == Real::int(0) || v.lo == Real::int(1)), "{f}: {v:?}");
        }
    }
}

#[test]
fn restriction_never_raises_sup() {
    let m = gn_family(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = [("x".to_string(), 0)];
    // quantifier-free bodies, so only the outer sup sees the restriction
    let cfg = RandomFormula {
        quantifier_weight: 0.0,
        ..Default::default()
    };
    for k in 0..40 {
        let f = random_formula(m.signature(), &x, &cfg, &mut rng);
        let sup = Formula::new(Expr::sup("x", "G", f.expr().clone()), m.signature(), Rational::from_integer(1)).unwrap();
        let keep: Vec<usize> = (0..12).filter(|i| (i * 7 + k) % 3 != 0).collect();
        let sub = m.restrict(0, &keep).unwrap();
        let full = evaluate(&m, &sup, &Assignment::new(), 1e-9).unwrap();
        let part = evaluate(&sub, &sup, &Assignment::new(), 1e-9).unwrap();
        assert!(part.lo <= full.lo, "{sup}");
    }
}

/// Exhaustive pair check of the derived modulus of `f` in `x`, together with the
/// 1-Lipschitz bound when that modulus is the identity.
fn modulus_sound(m: &MetricStructure, f: &Formula) {
    let Some(gamma) = derived_modulus_in(f, "x") else { return };
    let opts = EvalOptions {
        parallel: false,
        ..Default::default()
    };
    let pts = m.member_indices(0).unwrap().to_vec();
    let values: Vec<Real> = pts
        .iter()
        .map(|&p| {
            let v = evaluate_with(m, f, &Assignment::new().with("x", Point::Elem(p)), &opts).unwrap();
            assert!(v.is_exact());
            v.lo
        })
        .collect();
    let grid = [Rational::new(1, 8), Rational::new(1, 4), Rational::new(1, 2)];
    let g = m.group().unwrap();
    for (i, &a) in pts.iter().enumerate() {
        for (j, &b) in pts.iter().enumerate() {
            let d = g.dist(a, b);
            let diff = values[i].abs_diff(values[j]);
            for eps in grid {
                if d < gamma.apply(eps) {
                    assert!(diff < Real::Exact(eps), "{f}: modulus {gamma:?} fails at eps {eps}");
                }
            }
            if gamma.is_id() {
                assert!(diff <= Real::Exact(d), "{f}: not 1-Lipschitz");
            }
        }
    }
}

#[test]
fn derived_moduli_hold_on_enumerated_formulas() {
    let m = sym_hamming(4, None).unwrap();
    let x = [("x".to_string(), 0)];
    for f in enum_formulas(m.signature(), 2, &x).step_by(37).take(150) {
        modulus_sound(&m, &f);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..60 {
        let f = random_formula(m.signature(), &x, &RandomFormula::default(), &mut rng);
        modulus_sound(&m, &f);
    }
}

#[test]
fn enumeration_examples() {
    let sig = crate::mstruct::group_signature(Rational::from_integer(1));
    let x = [("x".to_string(), 0)];
    let one: Vec<String> = enum_formulas(&sig, 1, &x).map(|f| f.to_string()).collect();
    let target = Expr::dist(Term::var("x"), Term::constant("1")).to_string();
    assert!(one.contains(&target));
    assert!(one.iter().all(|s| !s.contains(':')));
    let sub = Expr::sub(
        Expr::dist(Term::var("x"), Term::constant("1")),
        Expr::dist(Term::var("x"), Term::var("x")),
    )
    .to_string();
    assert!(enum_formulas(&sig, 2, &x).any(|f| f.to_string() == sub));
    let a: Vec<String> = enum_formulas(&sig, 3, &x).take(2000).map(|f| f.to_string()).collect();
    let b: Vec<String> = enum_formulas(&sig, 3, &x).take(2000).map(|f| f.to_string()).collect();
    assert_eq!(a, b);
    let mut seen = std::collections::HashSet::new();
    assert!(a.iter().all(|s| seen.insert(s.clone())));
    assert!(enum_formulas(&sig, 3, &x).take(5000).all(|f| f.depth() <= 3));
}

#[test]
fn equivalence_examples() {
    let s3 = sym_hamming(3, None).unwrap();
    let r = elem_equiv_depth(&s3, &s3, 2, 1e-9, 3000).unwrap();
    assert!(r.equivalent() && r.max_discrepancy == 0.0);
    let (z6, ds3) = discrete_groups();
    let r = elem_equiv_depth(&z6, &ds3, 3, 1e-9, 20_000).unwrap();
    assert!(!r.equivalent());
    let trivial = ds3.restrict(0, &[0]).unwrap();
    let r1 = elem_equiv_depth(&ds3, &trivial, 1, 1e-9, 10_000).unwrap();
    assert!(r1.equivalent() && r1.complete);
    let r2 = elem_equiv_depth(&ds3, &trivial, 2, 1e-9, 10_000).unwrap();
    let (text, a, b) = r2.distinguishing.unwrap();
    assert!(text.starts_with("sup") || text.starts_with("inf"), "{text}");
    assert_eq!((a - b).abs(), 1.0);
    let h = hilbert_tower(Field::Real, 2, 1).unwrap();
    assert!(elem_equiv_depth(&s3, &h, 1, 1e-9, 10).is_err());
}

#[test]
fn modulus_checks() {
    let m = sym_hamming(4, None).unwrap();
    // distinct permutations of 4 points are at least 1/2 apart
    let grid = [
        Rational::new(1, 8),
        Rational::new(1, 2),
        Rational::new(3, 4),
        Rational::from_integer(1),
    ];
    let mul = m.signature().resolve("mul", &[0, 0]).unwrap();
    let r = check_modulus(&m, &mul, &grid, 0, 0, 1e-9).unwrap();
    assert!(r.ok() && r.exhaustive && r.pairs_checked > 0, "{r:?}");

    let h = hilbert_tower(Field::Real, 3, 4).unwrap();
    let b1 = h.sort_id("B1").unwrap();
    let lam = h.signature().resolve("lam[2]", &[b1]).unwrap();
    let r = check_modulus(&h, &lam, &grid, 500, 1, 1e-9).unwrap();
    assert!(r.ok() && !r.exhaustive && r.pairs_checked > 0, "{r:?}");

    let bad = load_structure(
        r#"{"sorts": [{"name": "X", "points": ["a", "b", "c"],
                      "metric": [[0, "1/10", 1], ["1/10", 0, 1], [1, 1, 0]]}],
            "predicates": [{"name": "P", "args": ["X"], "range": [0, 1], "table": [0, 1, 1]}]}"#,
    )
    .unwrap();
    let p = bad.signature().resolve("P", &[0]).unwrap();
    let r = check_modulus(&bad, &p, &grid, 0, 0, 1e-9).unwrap();
    let w = r.worst.expect("violation");
    assert_eq!(w.difference, 1.0);
    assert!(w.distance < 0.125);
    assert!([w.args[0].as_str(), w.moved[0].as_str()].contains(&"a"));
}

fn duality_case(m: &MetricStructure, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = [("x".to_string(), 0)];
    let f = random_formula(m.signature(), &x, &RandomFormula::default(), &mut rng);
    let sig = m.signature();
    let one = Rational::from_integer(1);
    let inf = Formula::new(Expr::inf("x", "G", f.expr().clone()), sig, one).unwrap();
    let sup_not = Formula::new(Expr::sup("x", "G", Expr::not(f.expr().clone())), sig, one).unwrap();
    let a = evaluate(m, &inf, &Assignment::new(), 1e-9).unwrap();
    let b = evaluate(m, &sup_not, &Assignment::new(), 1e-9).unwrap();
    assert!(a.is_exact() && b.is_exact());
    assert_eq!(a.lo, Real::int(1).sub(b.lo), "{f}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn quantifier_duality(seed in any::<u64>()) {
        duality_case(&sym_hamming(3, None).unwrap(), seed);
        duality_case(&gn_family(1).unwrap(), seed);
    }

    #[test]
    fn certified_values_stay_in_range(seed in any::<u64>()) {
        let m = gn_family(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_formula(m.signature(), &[], &RandomFormula::default(), &mut rng);
        let v = evaluate(&m, &f, &Assignment::new(), 1e-9).unwrap();
        prop_assert!(v.is_exact());
        prop_assert!(v.lo >= Real::int(0) && v.lo <= Real::int(1));
    }
}
