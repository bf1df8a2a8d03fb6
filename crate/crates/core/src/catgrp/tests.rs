use std::collections::HashSet;

use itertools::Itertools;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use super::*;
use crate::eval::{enum_formulas, evaluate, Assignment, EvalOptions, ValueBounds};
use crate::mstruct::{cyclic_table, discrete_wrap, gn_family, sym_hamming, table_universe, Carrier as Carr};
use crate::sigform::{parse_formula_with, Signature, Sort, SortKind};

const TOL: f64 = 1e-9;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn space(rows: Vec<Vec<Rational>>) -> MetricStructure {
    let n = rows.len();
    let diam = rows.iter().flatten().copied().max().unwrap();
    let u = table_universe("space", rows, (0..n).map(|i| format!("p{i}")).collect()).unwrap();
    let mut sig = Signature::new();
    sig.add_sort(Sort {
        name: "X".into(),
        diameter: diam.max(Rational::from_integer(1)),
        kind: SortKind::Finite,
        ball_index: None,
    })
    .unwrap();
    let mut m = MetricStructure::new("space", sig);
    let id = m.add_universe(u);
    m.set_carrier(
        0,
        Carr::Finite {
            universe: id,
            members: (0..n).collect(),
        },
    );
    m
}

fn line(positions: &[i64]) -> MetricStructure {
    space(
        positions
            .iter()
            .map(|a| positions.iter().map(|b| Rational::from_integer((a - b).abs())).collect())
            .collect(),
    )
}

fn discrete_space(n: usize) -> MetricStructure {
    space(
        (0..n)
            .map(|i| (0..n).map(|j| Rational::from_integer((i != j) as i64)).collect())
            .collect(),
    )
}

fn aut(m: &MetricStructure) -> AutGroup {
    automorphisms(m, DEFAULT_AUT_CAP, TOL).unwrap()
}

/// Isometric automorphisms of a group, by trying every image pair of two fixed generators.
fn aut_oracle(g: &GroupView, gens: [usize; 2]) -> Vec<Vec<usize>> {
    let n = g.order();
    let words: Vec<Vec<usize>> = {
        // shortest word over gens for every element
        let mut word = vec![None; n];
        word[g.id] = Some(Vec::new());
        let mut frontier = vec![g.id];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &x in &frontier {
                for (k, &s) in gens.iter().enumerate() {
                    let y = g.mul(x, s);
                    if word[y].is_none() {
                        let mut w: Vec<usize> = word[x].clone().unwrap();
                        w.push(k);
                        word[y] = Some(w);
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        word.into_iter().map(|w| w.expect("gens generate")).collect()
    };
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let img = [a, b];
            let map: Vec<usize> = words.iter().map(|w| w.iter().fold(g.id, |acc, &k| g.mul(acc, img[k]))).collect();
            let hom = (0..n).all(|x| (0..n).all(|y| map[g.mul(x, y)] == g.mul(map[x], map[y])));
            let bij = map.iter().collect::<HashSet<_>>().len() == n;
            let iso = (0..n).all(|x| (0..n).all(|y| g.d(x, y) == g.d(map[x], map[y])));
            if hom && bij && iso {
                out.push(map);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn orbit_count(maps: &[Vec<usize>], n: usize) -> usize {
    let mut seen = vec![false; n];
    let mut k = 0;
    for i in 0..n {
        if !seen[i] {
            k += 1;
            for m in maps {
                seen[m[i]] = true;
            }
        }
    }
    k
}

#[test]
fn discrete_z2_is_rigid() {
    let a = aut(&discrete_wrap("Z2", &cyclic_table(2)).unwrap());
    assert_eq!(a.order(), 1);
    assert_eq!(a.maps[0], vec![0, 1]);
}

#[test]
fn inner_automorphisms_of_sym3() {
    let m = sym_hamming(3, None).unwrap();
    let a = aut(&m);
    let g = GroupView::new(&m).unwrap();
    for x in 0..6 {
        let conj: Vec<usize> = (0..6).map(|y| g.mul(g.mul(x, y), g.inv(x))).collect();
        assert!(a.contains(&conj), "conjugation by {} missing", g.labels[x]);
    }
    // Aut(S3) = Inn(S3)
    assert_eq!(a.order(), 6);
    assert_eq!(a.maps, aut_oracle(&g, [g.find("(1 2)").unwrap(), g.find("(1 2 3)").unwrap()]));
}

#[test]
fn gn_family_matches_oracle() {
    let m = gn_family(1).unwrap();
    let a = aut(&m);
    let g = GroupView::new(&m).unwrap();
    let oracle = aut_oracle(&g, [g.find("(1 2)(3 4 5)").unwrap(), g.find("(3 4)").unwrap()]);
    assert_eq!(a.maps, oracle);
    assert!(a.order() > 1);
}

#[test]
fn corrupted_metric_shrinks_the_group() {
    let m = sym_hamming(3, None).unwrap();
    let full = aut(&m);
    let g = GroupView::new(&m).unwrap();
    let (x, y) = (g.find("(1 2)").unwrap(), g.find("(1 3)").unwrap());
    let mut bad = m.clone();
    bad.corrupt_metric(0, g.points[x], g.points[y], q(1, 3), false);
    let smaller = aut(&bad);
    assert!(smaller.order() < full.order());
    assert!(smaller.maps.iter().all(|mp| full.contains(mp)));
    let bad_view = GroupView::new(&bad).unwrap();
    for mp in &smaller.maps {
        assert_eq!(bad_view.d(mp[x], mp[y]), q(1, 3));
    }
}

#[test]
fn point_search_on_metric_spaces() {
    assert_eq!(aut(&discrete_space(4)).order(), 24);
    assert_eq!(aut(&line(&[0, 1, 2, 3])).order(), 2);
    assert_eq!(aut(&line(&[0, 1, 3, 5])).order(), 1);
    assert!(matches!(automorphisms(&discrete_space(4), 3, TOL), Err(Error::Limit(_))));
}

#[test]
fn closure_is_exhaustive() {
    let structures = [
        sym_hamming(3, None).unwrap(),
        gn_family(1).unwrap(),
        discrete_wrap("Z6", &cyclic_table(6)).unwrap(),
        discrete_space(4),
        line(&[0, 1, 2, 4, 5, 6]),
    ];
    for m in &structures {
        let a = aut(m);
        assert_eq!(a.maps[0], (0..a.points.len()).collect::<Vec<_>>());
        for i in 0..a.order() {
            assert!(a.contains(&a.inverse(i)));
            for j in 0..a.order() {
                assert!(a.contains(&a.compose(i, j)));
            }
        }
        // the reported generators regenerate the whole group
        let mut reached: HashSet<Vec<usize>> = HashSet::from([a.maps[0].clone()]);
        let mut frontier = vec![a.maps[0].clone()];
        while let Some(x) = frontier.pop() {
            for &k in &a.generators {
                let y: Vec<usize> = a.maps[k].iter().map(|&i| x[i]).collect();
                if reached.insert(y.clone()) {
                    frontier.push(y);
                }
            }
        }
        assert_eq!(reached.len(), a.order());
    }
}

#[test]
fn automorphisms_preserve_formulas() {
    for m in [sym_hamming(3, None).unwrap(), gn_family(1).unwrap()] {
        let a = aut(&m);
        let vars = vec![("x1".to_string(), 0), ("x2".to_string(), 0)];
        let mut formulas: Vec<crate::sigform::Formula> = Vec::new();
        let mut deep = 0;
        for f in enum_formulas(m.signature(), 3, &vars) {
            if f.depth() == 3 {
                deep += 1;
                if deep > 150 {
                    break;
                }
            }
            if formulas.len() < 600 || f.depth() == 3 {
                formulas.push(f);
            }
        }
        let n = a.points.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        use rand::{Rng, SeedableRng};
        for _ in 0..100 {
            let (x, y, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..a.order()));
            let at = |i: usize, j: usize| {
                Assignment::new()
                    .with("x1", Point::Elem(a.points[i]))
                    .with("x2", Point::Elem(a.points[j]))
            };
            let (here, there) = (at(x, y), at(a.maps[k][x], a.maps[k][y]));
            for f in formulas.iter().step_by(3) {
                let u = evaluate(&m, f, &here, TOL).unwrap().value();
                let v = evaluate(&m, f, &there, TOL).unwrap().value();
                assert!(u.approx_eq(v, TOL), "{} moved by an automorphism", crate::sigform::print_formula(f));
            }
        }
    }
}

#[test]
fn oligo_exact_orbits() {
    let m = sym_hamming(3, None).unwrap();
    let a = aut(&m);
    let g = GroupView::new(&m).unwrap();
    // oracle: conjugacy classes
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for x in 0..6 {
        let class: Vec<usize> = (0..6).map(|y| g.mul(g.mul(y, x), g.inv(y))).sorted().dedup().collect();
        if !classes.contains(&class) {
            classes.push(class);
        }
    }
    let r = approx_oligo(&m, 1, Rational::zero(), &a).unwrap();
    assert_eq!(r.reps.len(), classes.len());
    assert_eq!(r.reps.len(), a.orbits().len());
    assert!(r.validate(&m, &a, Rational::zero()));
    let r = approx_oligo(&m, 1, Rational::from_integer(1), &a).unwrap();
    assert_eq!(r.reps.len(), 1);
    assert!(r.validate(&m, &a, Rational::from_integer(1)));
    // pairs: one representative per diagonal orbit
    let r = approx_oligo(&m, 2, Rational::zero(), &a).unwrap();
    let mut seen = HashSet::new();
    let mut orbits = 0;
    for (x, y) in (0..6).cartesian_product(0..6) {
        if seen.insert((x, y)) {
            orbits += 1;
            for mp in &a.maps {
                seen.insert((mp[x], mp[y]));
            }
        }
    }
    assert_eq!(r.reps.len(), orbits);
    assert!(r.validate(&m, &a, Rational::zero()));
}

#[test]
fn oligo_intermediate_eps() {
    let m = gn_family(1).unwrap();
    let a = aut(&m);
    for k in 0..=5 {
        let eps = q(k, 5);
        let r = approx_oligo(&m, 2, eps, &a).unwrap();
        assert!(r.validate(&m, &a, eps));
        assert!(!r.reps.is_empty());
    }
    assert!(approx_oligo(&m, 0, Rational::zero(), &a).is_err());
}

fn form<'a>(r: &'a BatteryReport, name: &str) -> &'a FormResult {
    r.forms.iter().find(|f| f.form == name).unwrap()
}

/// Least |F| with G = VFV, by trying every subset in increasing size.
fn vfv_oracle(g: &GroupView, v: &[bool]) -> usize {
    let n = g.order();
    let vv: Vec<usize> = (0..n).filter(|&x| v[x]).collect();
    let cell = |f: usize| -> HashSet<usize> {
        vv.iter()
            .flat_map(|&a| vv.iter().map(move |&b| (a, b)))
            .map(|(a, b)| g.mul(g.mul(a, f), b))
            .collect()
    };
    let cells: Vec<HashSet<usize>> = (0..n).map(cell).collect();
    for size in 1..=n {
        for f in (0..n).combinations(size) {
            let union: HashSet<usize> = f.iter().flat_map(|&i| cells[i].iter().copied()).collect();
            if union.len() == n {
                return size;
            }
        }
    }
    unreachable!("F = G always works")
}

#[test]
fn battery_examples() {
    let m = sym_hamming(3, None).unwrap();
    let r = boundedness_battery(&m, Rational::from_integer(1), 2).unwrap();
    for f in &r.forms {
        assert_eq!(f.best.as_ref().unwrap().f_size, Some(1), "{}", f.form);
    }
    let r = boundedness_battery(&m, q(1, 2), 2).unwrap();
    assert_eq!(r.ball, vec!["()".to_string()]);
    assert_eq!(form(&r, "VFV").best.as_ref().unwrap().f_size, Some(6));

    let m = gn_family(1).unwrap();
    let g = GroupView::new(&m).unwrap();
    let r = boundedness_battery(&m, q(9, 20), 3).unwrap();
    assert_eq!(r.ball.len(), 5);
    let greedy = form(&r, "VFV").best.as_ref().unwrap().f_size.unwrap();
    let oracle = vfv_oracle(&g, &g.ball(q(9, 20)));
    assert!(oracle <= greedy && greedy <= 3, "oracle {oracle}, greedy {greedy}");
    // V generates G, so every form reaches |F| = 1 at some k ≤ 3
    for name in ["FV^k", "V^kFV^k", "(FV)^k"] {
        assert_eq!(form(&r, name).best.as_ref().unwrap().f_size, Some(1), "{name}");
    }
}

#[test]
fn battery_covers_are_genuine() {
    let m = gn_family(1).unwrap();
    let g = GroupView::new(&m).unwrap();
    let r = boundedness_battery(&m, q(2, 5), 2).unwrap();
    let v = g.ball(q(2, 5));
    for f in &r.forms {
        for at in &f.attempts {
            let fs = g.set(&at.f).unwrap();
            let w = g.power(&v, at.k);
            let covered = match f.form.as_str() {
                "FV^k" => g.product(&fs, &w),
                "V^kFV^k" => g.product(&g.product(&w, &fs), &w),
                "VFV" => g.product(&g.product(&v, &fs), &v),
                _ => g.power(&g.product(&fs, &v), at.k),
            };
            assert!(covered.iter().all(|&b| b), "{} at k = {}", f.form, at.k);
        }
    }
}

#[test]
fn cayley_bounds_in_z6() {
    let m = discrete_wrap("Z6", &cyclic_table(6)).unwrap();
    // oracle: word length of k is min(k, 6 - k)
    let ecc = (0..6).map(|k: usize| k.min(6 - k)).max().unwrap();
    assert_eq!(
        cayley_bound(&m, &["1"], 10).unwrap(),
        CayleyBound::Bound {
            n: ecc,
            sizes: vec![3, 5, 6]
        }
    );
    let all: Vec<String> = (0..6).map(|i| i.to_string()).collect();
    assert!(matches!(cayley_bound(&m, &all, 10).unwrap(), CayleyBound::Bound { n: 1, .. }));
    assert_eq!(
        cayley_bound(&m, &["2"], 10).unwrap(),
        CayleyBound::NotGenerating {
            subgroup: vec!["0".into(), "2".into(), "4".into()]
        }
    );
    assert!(matches!(cayley_bound(&m, &["1"], 2).unwrap(), CayleyBound::Exceeded { cap: 2, .. }));
    assert!(cayley_bound(&m, &["9"], 2).is_err());
}

fn ball_labels(g: &GroupView, r: Rational) -> Vec<String> {
    g.labels_of(&g.ball(r))
}

#[test]
fn chains() {
    let m = gn_family(1).unwrap();
    let g = GroupView::new(&m).unwrap();
    let all = vec![g.labels.clone()];
    let r = chain_validate(&m, &all).unwrap();
    assert!(r.valid);
    assert_eq!(r.covering_level, Some(1));

    // radii i/10: B_{1/10} = B_{2/10} = {1}, so the chain is not strictly increasing
    let tenths: Vec<Vec<String>> = (1..=10).map(|i| ball_labels(&g, q(i, 10))).collect();
    let r = chain_validate(&m, &tenths).unwrap();
    assert_eq!(r.not_increasing, Some(1));
    assert!(!r.valid);

    // the distinct balls 2/5 ⊂ 4/5 ⊂ 1 satisfy the closure condition
    let good: Vec<Vec<String>> = [q(2, 5), q(4, 5), q(1, 1)].iter().map(|&r| ball_labels(&g, r)).collect();
    let r = chain_validate(&m, &good).unwrap();
    assert!(r.valid, "{r:?}");
    assert_eq!(r.covering_level, Some(3));
    assert_eq!(r.sizes, vec![5, 10, 12]);

    // 2/5 ⊂ 3/5: flip · (3 4) moves four points
    let bad: Vec<Vec<String>> = [q(2, 5), q(3, 5)].iter().map(|&r| ball_labels(&g, r)).collect();
    let r = chain_validate(&m, &bad).unwrap();
    let v = r.violation.unwrap();
    assert_eq!((v.level, v.kind.as_str()), (1, "product"));
    let (a, b) = (g.find(&v.a).unwrap(), g.find(&v.b).unwrap());
    assert_eq!(g.labels[g.mul(a, b)], v.result);
    assert!(g.d(g.mul(a, b), g.id) > q(3, 5));
    assert_eq!(r.covering_level, None);
}

#[test]
fn g_rho_examples() {
    let m = gn_family(1).unwrap();
    let g = GroupView::new(&m).unwrap();
    let r = g_rho(&m, q(9, 20)).unwrap();
    assert_eq!(r.ball.len(), 5);
    for l in &r.ball {
        let x = g.find(l).unwrap();
        assert!(x == g.id || g.d(x, g.id) == q(2, 5));
    }
    assert!(r.exponent <= 3);
    assert_eq!(r.subgroup.len(), 12);
    assert_eq!(r.cosets.len(), 1);

    let r = g_rho(&m, q(3, 10)).unwrap();
    assert_eq!(r.ball, vec!["()".to_string()]);
    assert_eq!(r.subgroup.len(), 1);
    assert_eq!(r.cosets.len(), 12);
    assert_eq!(r.exponent, 1);

    let r = g_rho(&m, g.diameter()).unwrap();
    assert_eq!((r.exponent, r.subgroup.len()), (1, 12));
    assert!(g_rho(&m, q(-1, 2)).is_err());
}

/// `sup_x inf_{y₁..yₙ}` of the definability body, by direct enumeration.
fn definability_oracle(g: &GroupView, subgroup: &[bool], rho: Rational, n: usize, eps: Rational) -> Rational {
    let k = g.order();
    let p = |x: usize| (0..k).filter(|&h| subgroup[h]).map(|h| g.d(x, h)).min().unwrap();
    let monus = |a: Rational, b: Rational| (a - b).max(Rational::zero());
    (0..k)
        .map(|x| {
            (0..n)
                .map(|_| 0..k)
                .multi_cartesian_product()
                .map(|ys| {
                    let prod = ys.iter().fold(g.id, |acc, &y| g.mul(acc, y));
                    let gap = monus((p(x) - g.d(x, prod)).abs(), eps);
                    ys.iter().map(|&y| monus(g.d(y, g.id), rho)).fold(gap, Rational::max)
                })
                .min()
                .unwrap()
        })
        .max()
        .unwrap()
}

#[test]
fn definability_examples() {
    let m = gn_family(1).unwrap();
    let g = GroupView::new(&m).unwrap();
    let opts = EvalOptions::default();
    let rho = q(9, 20);
    let gr = g_rho(&m, rho).unwrap();
    let r = definability_defect(&m, rho, gr.exponent, Rational::zero(), &opts).unwrap();
    assert_eq!(r.value, ValueBounds::exact(Real::zero()));

    let r = definability_defect(&m, rho, 1, Rational::zero(), &opts).unwrap();
    let oracle = definability_oracle(&g, &gr.subgroup_set, rho, 1, Rational::zero());
    assert!(oracle > Rational::zero());
    assert_eq!(r.value, ValueBounds::exact(Real::Exact(oracle)));
    // the witness lies outside the ball, so no single y reaches it
    let x = g.find(&r.witness).unwrap();
    assert!(g.d(x, g.id) > rho);

    let r = definability_defect(&m, rho, 1, g.diameter(), &opts).unwrap();
    assert_eq!(r.value, ValueBounds::exact(Real::zero()));
    assert!(r.formula.starts_with("sup x:G. inf y1:G."));
}

#[test]
fn quotient_examples() {
    let m = gn_family(1).unwrap();
    let a = aut(&m);
    let r = quotient_orbits(&m, Rational::from_integer(1), &a).unwrap();
    assert_eq!((r.cosets, r.orbits), (1, 1));
    let r = quotient_orbits(&m, q(3, 10), &a).unwrap();
    let g = GroupView::new(&m).unwrap();
    let oracle = aut_oracle(&g, [g.find("(1 2)(3 4 5)").unwrap(), g.find("(3 4)").unwrap()]);
    assert_eq!(r.cosets, 12);
    assert_eq!(r.orbits, orbit_count(&oracle, 12));
    assert_eq!(r.orbit_sizes.iter().sum::<usize>(), 12);
}

#[test]
fn near_homogeneity() {
    // full symmetry: one type, one orbit
    let m = discrete_space(5);
    let a = aut(&m);
    let fam = TypeFamily::enumerate(m.signature(), &[0], 2, 2000);
    let r = near_homog_defect(&m, 1, &fam, Rational::zero(), &a, TOL).unwrap();
    assert_eq!(r.defect, Real::zero());
    assert!(r.holds);
    assert!(near_homog_defect(&m, 2, &fam, Rational::zero(), &a, TOL).is_err());

    // positions 0, 1, 3, 5: rigid, but eccentricity does not separate 0 and 5
    let positions = [0i64, 1, 3, 5];
    let m = line(&positions);
    let a = aut(&m);
    let f = parse_formula_with("sup z:X. d(x, z)", m.signature(), Rational::from_integer(5), &[("x", 0)]).unwrap();
    let fam = TypeFamily::from_formulas(vec![("x".into(), 0)], vec![f]).unwrap();
    let r = near_homog_defect(&m, 1, &fam, Rational::zero(), &a, TOL).unwrap();
    // oracle: automorphisms among all 24 permutations, types by eccentricity
    let d = |i: usize, j: usize| (positions[i] - positions[j]).abs();
    let auts: Vec<Vec<usize>> = (0..4)
        .permutations(4)
        .filter(|p| (0..4).all(|i| (0..4).all(|j| d(i, j) == d(p[i], p[j]))))
        .collect();
    let ecc: Vec<i64> = (0..4).map(|i| (0..4).map(|j| d(i, j)).max().unwrap()).collect();
    let type_dist = |i: usize, j: usize| {
        (0..4)
            .cartesian_product(0..4)
            .filter(|&(x, y)| ecc[x] == ecc[i] && ecc[y] == ecc[j])
            .map(|(x, y)| d(x, y))
            .min()
            .unwrap()
    };
    let mut oracle = i64::MIN;
    for (i, j) in (0..4).cartesian_product(0..4) {
        let best = auts.iter().map(|p| d(p[j], i)).min().unwrap();
        oracle = oracle.max(best - type_dist(i, j));
    }
    assert_eq!(auts.len(), 1);
    assert_eq!(oracle, 5);
    assert_eq!(r.defect, Real::int(oracle));
    assert!(!r.holds);
    assert!(r.worst.is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn g_rho_is_an_open_subgroup(which in 0usize..3, k in 0i64..=20) {
        let m = match which {
            0 => gn_family(1).unwrap(),
            1 => sym_hamming(4, None).unwrap(),
            _ => gn_family(2).unwrap(),
        };
        let g = GroupView::new(&m).unwrap();
        let rho = q(k, 20);
        let r = g_rho(&m, rho).unwrap();
        let h = &r.subgroup_set;
        prop_assert!(h[g.id]);
        for x in 0..g.order() {
            if g.d(x, g.id) <= rho {
                prop_assert!(h[x]);
            }
            if !h[x] {
                continue;
            }
            prop_assert!(h[g.inv(x)]);
            for y in 0..g.order() {
                if h[y] {
                    prop_assert!(h[g.mul(x, y)]);
                }
                if g.d(x, y) < rho {
                    prop_assert!(h[y], "{} within {} of {}", g.labels[y], rho, g.labels[x]);
                }
            }
        }
        let opts = EvalOptions::default();
        let defect = definability_defect(&m, rho, r.exponent, Rational::zero(), &opts).unwrap();
        prop_assert_eq!(defect.value, ValueBounds::exact(Real::zero()));
    }

    #[test]
    fn near_homog_defect_is_nonnegative(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..6);
        let positions: Vec<i64> = (0..n).map(|_| rng.random_range(0..8)).sorted().dedup().collect();
        let m = line(&positions);
        let a = aut(&m);
        let fam = TypeFamily::enumerate(m.signature(), &[0], 2, 300);
        let r = near_homog_defect(&m, 1, &fam, Rational::zero(), &a, TOL).unwrap();
        prop_assert!(r.defect.to_f64() >= -TOL);
    }
}
