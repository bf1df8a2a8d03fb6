//! Acceptance criteria. Each prints one PASS/FAIL line with its runtime; any failure
//! (or an overrun of the time budget) makes the run exit nonzero.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use itertools::Itertools;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contilog::axioms::{rotation_action, scheme_defect, tree_defect_parts, wrap_action, HilbertAction, Nu, Scheme};
use contilog::catgrp::{automorphisms, chain_validate, definability_defect, g_rho, quotient_orbits, GroupView, DEFAULT_AUT_CAP};
use contilog::eval::{evaluate_with, random_formula, EvalOptions, RandomFormula};
use contilog::mstruct::{
    cyclic_table, discrete_wrap, gn_family, sym_hamming, symmetric_table, table_universe, tree_space, Carrier, Interp,
};
use contilog::sigform::{derived_modulus_in, joint_modulus, parse_formula, parse_formula_with, Field, Sort, SortKind};
use contilog::typespace::{eps_net, formula_pseudometric, realized_types, TypeFamily};
use contilog::ultra::{exact_value, ultra_eval, StructureSequence};
use contilog::{Assignment, MetricStructure, Point, Rational, Real, Signature, ValueBounds};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const COMM: &str = "sup x:G. sup y:G. d(mul(x,y),mul(y,x))";

fn exact(m: &MetricStructure, text: &str) -> Result<Real, String> {
    let f = parse_formula(text, m.signature()).map_err(|e| e.to_string())?;
    let v = evaluate_with(m, &f, &Assignment::new(), &EvalOptions::default()).map_err(|e| e.to_string())?;
    check(v.is_exact(), || format!("{text} is not exact on {}", m.name))?;
    Ok(v.lo)
}

fn abelian_ultraproduct() -> Outcome {
    let seq = StructureSequence::gn(1..=6).map_err(|e| e.to_string())?;
    let f = parse_formula(COMM, seq.signature()).map_err(|e| e.to_string())?;
    let report = ultra_eval(&seq, &f, 3, 1e-9).map_err(|e| e.to_string())?;
    let mut prev: Option<Rational> = None;
    for (n, v) in &report.values {
        let closed = Rational::new(3, (1 << n) + 3);
        let got = exact_value(v).ok_or_else(|| format!("n = {n}: value is not exact"))?;
        if *n <= 3 {
            // brute force from the group tables
            let m = seq.member(*n);
            let g = m.group().expect("group");
            let brute = g
                .elements()
                .cartesian_product(g.elements())
                .map(|(x, y)| g.dist(g.mul(x, y), g.mul(y, x)))
                .max()
                .expect("nonempty");
            check(brute == closed, || format!("n = {n}: brute force {brute} vs closed form {closed}"))?;
        }
        check(got == closed, || format!("n = {n}: {got} vs {closed}"))?;
        check(prev.is_none_or(|p| got < p), || format!("not strictly decreasing at n = {n}"))?;
        prev = Some(got);
    }
    let limit = report.limit().ok_or("not classified as convergent")?;
    check(limit.abs() < 1e-9, || format!("limit {limit} is not 0"))?;
    Ok("3/(2^n+3) exactly for n = 1..6, convergent to 0".into())
}

fn crisp_collapse() -> Outcome {
    let z6 = discrete_wrap("Z6", &cyclic_table(6)).map_err(|e| e.to_string())?;
    let s3 = discrete_wrap("S3", &symmetric_table(3)).map_err(|e| e.to_string())?;
    check(exact(&z6, COMM)? == Real::int(0), || "Z6 is not commutative".into())?;
    check(exact(&s3, COMM)? == Real::int(1), || "S3 commutes".into())?;
    let cfg = RandomFormula {
        allow_half: false,
        depth: 3,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let count = 250;
    for _ in 0..count {
        let f = random_formula(z6.signature(), &[], &cfg, &mut rng);
        check(f.depth() <= 3 && !f.expr().contains_half(), || {
            format!("{f} is not a half-free depth-3 sentence")
        })?;
        for m in [&z6, &s3] {
            let v = evaluate_with(m, &f, &Assignment::new(), &EvalOptions::default()).map_err(|e| e.to_string())?;
            check(v.is_exact() && (v.lo == Real::int(0) || v.lo == Real::int(1)), || {
                format!("{f} on {}: {v:?}", m.name)
            })?;
        }
    }
    Ok(format!("{count} random sentences crisp on both; commutativity 0 vs 1"))
}

fn modulus_soundness() -> Outcome {
    let m = sym_hamming(4, None).map_err(|e| e.to_string())?;
    let members = m.members(0).expect("finite");
    let vars = [("x".to_string(), 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let opts = EvalOptions::default();
    let (mut found, mut pairs) = (0, 0);
    while found < 10 {
        let f = random_formula(m.signature(), &vars, &RandomFormula::default(), &mut rng);
        if !f.expr().free_var_names().contains(&"x".to_string()) || derived_modulus_in(&f, "x").is_none_or(|g| !g.is_id()) {
            continue;
        }
        found += 1;
        let values: Vec<Real> = members
            .iter()
            .map(|p| evaluate_with(&m, &f, &Assignment::new().with("x", p.clone()), &opts).map(|v| v.value()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for (i, a) in members.iter().enumerate() {
            for (j, b) in members.iter().enumerate() {
                pairs += 1;
                let gap = values[i].abs_diff(values[j]);
                check(gap <= m.dist(0, a, b), || {
                    format!("{f}: violated at ({}, {})", m.label(0, a), m.label(0, b))
                })?;
            }
        }
    }
    Ok(format!("10 formulas, {pairs} pairs, 0 violations"))
}

fn tree_axioms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for t in 0..20 {
        let n = rng.random_range(1..=15);
        let edges: Vec<(usize, usize, Rational)> = (1..n)
            .map(|v| {
                (
                    rng.random_range(0..v),
                    v,
                    Rational::new(rng.random_range(1..9), rng.random_range(1..4)),
                )
            })
            .collect();
        let m = tree_space(n, &edges, 0).map_err(|e| e.to_string())?;
        let s = m.sort_id("T").map_err(|e| e.to_string())?;
        let parts = tree_defect_parts(&m, s).map_err(|e| e.to_string())?;
        check(parts.hyperbolicity == Real::zero() && parts.midpoint == Real::zero(), || {
            format!("tree {t} ({n} vertices): {parts:?}")
        })?;
    }
    let cycle: Vec<Vec<Rational>> = (0..4i64)
        .map(|i| {
            (0..4i64)
                .map(|j| Rational::from_integer((i - j).rem_euclid(4).min((j - i).rem_euclid(4))))
                .collect()
        })
        .collect();
    let m = finite_space(cycle);
    let parts = tree_defect_parts(&m, 0).map_err(|e| e.to_string())?;
    check(parts.hyperbolicity == Real::int(2), || {
        format!("4-cycle hyperbolicity {:?}", parts.hyperbolicity)
    })?;
    Ok("20 random trees exact 0; unit 4-cycle defect 2".into())
}

fn finite_space(rows: Vec<Vec<Rational>>) -> MetricStructure {
    let n = rows.len();
    let diam = rows.iter().flatten().copied().max().expect("nonempty");
    let u = table_universe("space", rows, (0..n).map(|i| i.to_string()).collect()).expect("metric table");
    let mut sig = Signature::new();
    sig.add_sort(Sort {
        name: "X".into(),
        diameter: diam,
        kind: SortKind::Finite,
        ball_index: None,
    })
    .expect("fresh signature");
    let mut m = MetricStructure::new("space", sig);
    let id = m.add_universe(u);
    m.set_carrier(
        0,
        Carrier::Finite {
            universe: id,
            members: (0..n).collect(),
        },
    );
    m
}

fn rotation_displacement() -> Outcome {
    let mut lines = Vec::new();
    for k in [3usize, 4, 8] {
        let (g, a) = rotation_action(k).map_err(|e| e.to_string())?;
        let m = wrap_action(&g, &a, &Nu::identity(), 1, 1).map_err(|e| e.to_string())?;
        let closed = 2.0 * (PI / k as f64).sin();
        let opts = EvalOptions::default();
        let f = parse_formula("inf v:S1. sup x:K1. d(act(x, v), v)", m.signature()).map_err(|e| e.to_string())?;
        let v = evaluate_with(&m, &f, &Assignment::new(), &opts).map_err(|e| e.to_string())?;
        check(v.hi_certified && v.hi.to_f64() <= closed + 1e-3, || {
            format!("Z{k}: upper bound {v:?} vs {closed}")
        })?;
        // v ↦ sup_x ‖xv − v‖ is 2-Lipschitz; grid points are within 2 sin(π/2N) of every unit vector
        let s1 = m.sort_id("S1").map_err(|e| e.to_string())?;
        let cap = f.cap();
        let inner = parse_formula_with("sup x:K1. d(act(x, v), v)", m.signature(), cap, &[("v", s1)]).map_err(|e| e.to_string())?;
        let grid = 720;
        let mut sampled = f64::INFINITY;
        for i in 0..grid {
            let t = 2.0 * PI * i as f64 / grid as f64;
            let p = Point::vector(vec![t.cos(), t.sin()]);
            let val = evaluate_with(&m, &inner, &Assignment::new().with("v", p), &opts).map_err(|e| e.to_string())?;
            sampled = sampled.min(val.value().to_f64());
        }
        let lower = sampled - 2.0 * 2.0 * (PI / (2.0 * grid as f64)).sin();
        check(lower >= closed - 1e-2, || format!("Z{k}: sampled lower bound {lower} vs {closed}"))?;
        check((v.hi.to_f64() - closed).abs() < 1e-3, || {
            format!("Z{k}: {} vs {closed}", v.hi.to_f64())
        })?;
        lines.push(format!("Z{k} {:.6}", v.hi.to_f64()));
    }
    Ok(lines.join(", "))
}

fn g_rho_construction() -> Outcome {
    let m = gn_family(1).map_err(|e| e.to_string())?;
    let r = g_rho(&m, Rational::new(9, 20)).map_err(|e| e.to_string())?;
    check(r.exponent <= 3 && r.subgroup.len() == 12, || {
        format!("ρ = 0.45: exponent {}, |G_ρ| = {}", r.exponent, r.subgroup.len())
    })?;
    let small = g_rho(&m, Rational::new(3, 10)).map_err(|e| e.to_string())?;
    check(small.subgroup.len() == 1 && small.cosets.len() == 12, || {
        format!("ρ = 0.3: {:?}", small.subgroup)
    })?;
    let d =
        definability_defect(&m, Rational::new(9, 20), r.exponent, Rational::zero(), &EvalOptions::default()).map_err(|e| e.to_string())?;
    check(d.value == ValueBounds::exact(Real::zero()), || format!("defect {:?}", d.value))?;
    // oracle: isometric automorphisms from every image pair of two generators
    let g = GroupView::new(&m).map_err(|e| e.to_string())?;
    let gens = [
        g.find("(1 2)(3 4 5)").map_err(|e| e.to_string())?,
        g.find("(3 4)").map_err(|e| e.to_string())?,
    ];
    let n = g.order();
    let word = |x: usize| -> Vec<usize> {
        // x as a product of generators, by breadth-first search
        let mut prev = vec![None; n];
        prev[g.id] = Some((g.id, 0));
        let mut queue = std::collections::VecDeque::from([g.id]);
        while let Some(y) = queue.pop_front() {
            for (k, &s) in gens.iter().enumerate() {
                let z = g.mul(y, s);
                if prev[z].is_none() {
                    prev[z] = Some((y, k));
                    queue.push_back(z);
                }
            }
        }
        let mut w = Vec::new();
        let mut y = x;
        while y != g.id {
            let (p, k) = prev[y].expect("reachable");
            w.push(k);
            y = p;
        }
        w.reverse();
        w
    };
    let words: Vec<Vec<usize>> = (0..n).map(word).collect();
    let mut seen = vec![false; n];
    let mut oracle_maps = Vec::new();
    for (a, b) in (0..n).cartesian_product(0..n) {
        let img = [a, b];
        let map: Vec<usize> = words.iter().map(|w| w.iter().fold(g.id, |acc, &k| g.mul(acc, img[k]))).collect();
        let ok = (0..n).all(|x| (0..n).all(|y| map[g.mul(x, y)] == g.mul(map[x], map[y]) && g.d(x, y) == g.d(map[x], map[y])))
            && map.iter().all_unique();
        if ok {
            oracle_maps.push(map);
        }
    }
    let mut orbits = 0;
    for x in 0..n {
        if !seen[x] {
            orbits += 1;
            for mp in &oracle_maps {
                seen[mp[x]] = true;
            }
        }
    }
    let aut = automorphisms(&m, DEFAULT_AUT_CAP, 1e-9).map_err(|e| e.to_string())?;
    let q = quotient_orbits(&m, Rational::new(3, 10), &aut).map_err(|e| e.to_string())?;
    check(q.orbits == orbits, || format!("{} orbits vs oracle {orbits}", q.orbits))?;
    let whole = quotient_orbits(&m, Rational::new(9, 20), &aut).map_err(|e| e.to_string())?;
    check(whole.orbits == 1, || "G/G shows more than one orbit".into())?;
    Ok(format!("exponent {}, defect 0, {} orbits on 12 cosets", r.exponent, q.orbits))
}

fn one_var(m: &MetricStructure, depth: usize, limit: usize) -> TypeFamily {
    TypeFamily::enumerate(m.signature(), &[0], depth, limit)
}

fn type_space_properties() -> Outcome {
    // d^T on formulas: symmetry and triangle inequality
    let a = sym_hamming(3, None).map_err(|e| e.to_string())?;
    let b = discrete_wrap("Z6", &cyclic_table(6)).map_err(|e| e.to_string())?;
    let vars = [("x".to_string(), 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let opts = EvalOptions::default();
    let d = |p: &contilog::Formula, q: &contilog::Formula| -> Result<f64, String> {
        formula_pseudometric(&[&a, &b], p, q, &opts)
            .map(|v| v.value().to_f64())
            .map_err(|e| e.to_string())
    };
    for t in 0..100 {
        let fs: Vec<contilog::Formula> = (0..3)
            .map(|_| random_formula(a.signature(), &vars, &RandomFormula::default(), &mut rng))
            .collect();
        let (pq, qp, qr, pr) = (d(&fs[0], &fs[1])?, d(&fs[1], &fs[0])?, d(&fs[1], &fs[2])?, d(&fs[0], &fs[2])?);
        check((pq - qp).abs() <= 1e-12, || format!("triple {t}: asymmetric {pq} vs {qp}"))?;
        check(pr <= pq + qr + 1e-12, || format!("triple {t}: {pr} > {pq} + {qr}"))?;
    }
    // Lipschitz comparison against the realized type distance, all pairs of classes
    for m in [
        sym_hamming(3, None).map_err(|e| e.to_string())?,
        gn_family(1).map_err(|e| e.to_string())?,
    ] {
        let fam = one_var(&m, 2, 1_500);
        let space = realized_types(&m, &fam, 1e-12).map_err(|e| e.to_string())?;
        let dist = space.distance_matrix(&m);
        for (i, f) in fam.formulas.iter().enumerate() {
            if !joint_modulus(f).is_id() {
                continue;
            }
            for (x, y) in (0..space.points.len()).cartesian_product(0..space.points.len()) {
                let (cx, cy) = (class_of(&space.classes, x), class_of(&space.classes, y));
                let gap = space.points[x].values[i].abs_diff(space.points[y].values[i]);
                check(gap <= dist[cx][cy], || format!("{} on {}: {} vs {}", f.expr(), m.name, x, y))?;
            }
        }
    }
    // eps-net against the brute-force cover and packing numbers
    let m = gn_family(1).map_err(|e| e.to_string())?;
    let fam = one_var(&m, 2, 2_000);
    let space = realized_types(&m, &fam, 1e-9).map_err(|e| e.to_string())?;
    let dist = space.distance_matrix(&m);
    let k = dist.len();
    for eps in [Rational::zero(), Rational::new(2, 5), Rational::new(1, 2), Rational::new(4, 5)] {
        let net = eps_net(&m, &fam, eps, 1e-9).map_err(|e| e.to_string())?;
        check(net.validate(eps), || format!("certificate invalid at ε = {eps}"))?;
        let e = Real::Exact(eps);
        let (mut cover, mut packing) = (k, 1);
        for mask in 1u32..(1 << k) {
            let set: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            if (0..k).all(|c| set.iter().any(|&s| dist[s][c] <= e)) {
                cover = cover.min(set.len());
            }
            if set.iter().tuple_combinations().all(|(&a, &b)| dist[a][b] > e) {
                packing = packing.max(set.len());
            }
        }
        check(cover <= net.len() && net.len() <= packing, || {
            format!("ε = {eps}: {cover} ≤ {} ≤ {packing} fails", net.len())
        })?;
        for c in &net.certificate {
            check(dist[net.net[c.member]][c.class] == c.distance, || {
                format!("certificate distance for class {}", c.class)
            })?;
        }
    }
    Ok("100 triples, exhaustive Lipschitz check, eps-net within cover/packing bounds".into())
}

fn class_of(classes: &[Vec<usize>], i: usize) -> usize {
    classes.iter().position(|c| c.contains(&i)).expect("every point has a class")
}

fn negative_controls() -> Outcome {
    // corrupted multiplication
    let mut m = sym_hamming(3, None).map_err(|e| e.to_string())?;
    let g = m.group().expect("group").clone();
    let n = g.order;
    let mut data: Vec<u32> = (0..n * n).map(|i| g.mul(i / n, i % n) as u32).collect();
    data[n + 2] = data[n + 3];
    m.interpret("mul", &[0, 0], Interp::FnTable { sizes: vec![n, n], data })
        .map_err(|e| e.to_string())?;
    let rep = scheme_defect(&m, &Scheme::Group, 1e-9).map_err(|e| e.to_string())?;
    check(rep.worst > 0.0 && !rep.witness.is_empty(), || {
        format!("group defect {} without witness", rep.worst)
    })?;
    // ν too small for an affine involution
    let z2 = discrete_wrap("Z2", &cyclic_table(2)).map_err(|e| e.to_string())?;
    let a = HilbertAction {
        field: Field::Real,
        dim: 2,
        generators: vec![1],
        matrices: vec![vec![vec![-1.0, 0.0], vec![0.0, -1.0]]],
        translations: Some(vec![vec![1.0, 0.0]]),
    };
    let err = match wrap_action(&z2, &a, &Nu::identity(), 1, 2) {
        Ok(_) => return Err("violated ν table accepted".into()),
        Err(e) => e.to_string(),
    };
    check(err.contains("ν(1, 1) = 1") && err.contains("maps"), || {
        format!("no witness in `{err}`")
    })?;
    // planted closure violation
    let m = gn_family(1).map_err(|e| e.to_string())?;
    let gv = GroupView::new(&m).map_err(|e| e.to_string())?;
    let chain = vec![
        gv.labels_of(&gv.ball(Rational::new(2, 5))),
        gv.labels_of(&gv.ball(Rational::new(3, 5))),
    ];
    let r = chain_validate(&m, &chain).map_err(|e| e.to_string())?;
    let v = r.violation.ok_or("closure violation not flagged")?;
    Ok(format!(
        "group defect {}, ν rejected, chain witness {}·{} = {}",
        rep.worst, v.a, v.b, v.result
    ))
}

/// Name, check and time budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 8] = [
        ("abelian ultraproduct regression", abelian_ultraproduct, 60),
        ("crisp collapse", crisp_collapse, 30),
        ("modulus soundness", modulus_soundness, 120),
        ("tree axioms", tree_axioms, 10),
        ("rotation displacement", rotation_displacement, 30),
        ("G_rho construction", g_rho_construction, 30),
        ("type-space properties", type_space_properties, 60),
        ("scheme negative controls", negative_controls, 10),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > Duration::from_secs(*budget) => Err(format!("over the {budget} s budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({:.2} s): {why}", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
