//! Finite-dimensional Hilbert ball towers `B_1 ⊂ ... ⊂ B_N` over the reals or complexes.

use std::sync::Arc;

use num_traits::Zero;

use super::{norm, Carrier, Interp, MetricStructure, Point};
use crate::real::{rational_to_f64, Rational, Real};
use crate::sigform::{Field, Modulus, Scalar, ScalarFamily, Signature, Sort, SortKind};
use crate::Error;

fn ball_name(n: u32) -> String {
    format!("B{n}")
}

/// Sorts `B1..BN` and the unit sphere `S1`, with `0`, `inc`, `vadd`, `vsub`, `norm`,
/// the inner product (`ip`, or `ip_re`/`ip_im` over the complexes) and scalar maps `lam[c]`.
pub fn hilbert_signature(field: Field, max_ball: u32) -> Signature {
    let mut sig = Signature::new();
    let mut balls = Vec::new();
    for n in 1..=max_ball {
        let id = sig
            .add_sort(Sort {
                name: ball_name(n),
                diameter: Rational::from_integer(2 * n as i64),
                kind: SortKind::HilbertBall,
                ball_index: Some(n),
            })
            .expect("distinct ball names");
        balls.push((n, id));
    }
    let sphere = sig
        .add_sort(Sort {
            name: "S1".into(),
            diameter: Rational::from_integer(2),
            kind: SortKind::HilbertSphere,
            ball_index: None,
        })
        .expect("distinct sort names");
    let id = || vec![Modulus::id()];
    for &(n, b) in &balls {
        let r = Rational::from_integer(n as i64);
        sig.add_function("0", &[], b, vec![]).expect("fresh");
        if n < max_ball {
            sig.add_function("inc", &[b], balls[n as usize].1, id()).expect("fresh");
        }
        if 2 * n <= max_ball {
            let target = balls[2 * n as usize - 1].1;
            sig.add_function("vadd", &[b, b], target, vec![Modulus::id(); 2]).expect("fresh");
            sig.add_function("vsub", &[b, b], target, vec![Modulus::id(); 2]).expect("fresh");
        }
        sig.add_predicate("norm", &[b], (Rational::zero(), r), id()).expect("fresh");
        let ip_mod = vec![Modulus::scale(r).expect("positive"); 2];
        let range = (-r * r, r * r);
        match field {
            Field::Real => {
                sig.add_predicate("ip", &[b, b], range, ip_mod).expect("fresh");
            }
            Field::Complex => {
                sig.add_predicate("ip_re", &[b, b], range, ip_mod.clone()).expect("fresh");
                sig.add_predicate("ip_im", &[b, b], range, ip_mod).expect("fresh");
            }
        }
    }
    sig.add_function("inc", &[sphere], balls[0].1, id()).expect("fresh");
    sig.add_predicate("norm", &[sphere], (Rational::zero(), Rational::from_integer(1)), id())
        .expect("fresh");
    sig.set_scalar_family(ScalarFamily { field, balls });
    sig
}

/// Multiplies a coordinate vector by `c`; complex vectors are stored as `(re, im)` pairs.
pub fn scalar_apply(field: Field, c: &Scalar, v: &[f64]) -> Vec<f64> {
    let (re, im) = (rational_to_f64(&c.re), rational_to_f64(&c.im));
    match field {
        Field::Real => v.iter().map(|x| re * x).collect(),
        Field::Complex => v
            .chunks(2)
            .flat_map(|z| {
                let (a, b) = (z[0], z[1]);
                [re * a - im * b, re * b + im * a]
            })
            .collect(),
    }
}

fn coords(p: &Point) -> &[f64] {
    p.coords().expect("Hilbert point")
}

/// `<x, y>` (complex: linear in `x`), returned as (real part, imaginary part).
pub fn inner(field: Field, x: &[f64], y: &[f64]) -> (f64, f64) {
    match field {
        Field::Real => (x.iter().zip(y).map(|(a, b)| a * b).sum(), 0.0),
        Field::Complex => x.chunks(2).zip(y.chunks(2)).fold((0.0, 0.0), |(re, im), (u, w)| {
            let (a, b, c, d) = (u[0], u[1], w[0], w[1]);
            (re + a * c + b * d, im + b * c - a * d)
        }),
    }
}

/// The tower of `dim`-dimensional balls of radii `1..=max_ball`.
pub fn hilbert_tower(field: Field, dim: usize, max_ball: u32) -> Result<MetricStructure, Error> {
    if dim == 0 || max_ball == 0 {
        return Err(Error::Structure("hilbert_tower needs dim >= 1 and at least one ball".into()));
    }
    let sig = hilbert_signature(field, max_ball);
    let real_dim = match field {
        Field::Real => dim,
        Field::Complex => 2 * dim,
    };
    let tag = match field {
        Field::Real => "R",
        Field::Complex => "C",
    };
    let mut m = MetricStructure::new(&format!("{tag}^{dim} balls 1..{max_ball}"), sig.clone());
    m.set_field(field);
    for (id, s) in sig.sorts().iter().enumerate() {
        let (radius, sphere) = match s.kind {
            SortKind::HilbertSphere => (1.0, true),
            _ => (s.ball_index.expect("ball sort") as f64, false),
        };
        m.set_carrier(
            id,
            Carrier::Ball {
                dim: real_dim,
                radius,
                sphere,
            },
        );
    }
    let zero = Point::vector(vec![0.0; real_dim]);
    let pass = Interp::Fn(Arc::new(|a: &[Point]| a[0].clone()));
    let vadd = Interp::Fn(Arc::new(|a: &[Point]| {
        Point::vector(coords(&a[0]).iter().zip(coords(&a[1])).map(|(x, y)| x + y).collect())
    }));
    let vsub = Interp::Fn(Arc::new(|a: &[Point]| {
        Point::vector(coords(&a[0]).iter().zip(coords(&a[1])).map(|(x, y)| x - y).collect())
    }));
    let vnorm = Interp::Pred(Arc::new(|a: &[Point]| Real::Approx(norm(coords(&a[0])))));
    let ip_re = Interp::Pred(Arc::new(move |a: &[Point]| {
        Real::Approx(inner(field, coords(&a[0]), coords(&a[1])).0)
    }));
    let ip_im = Interp::Pred(Arc::new(move |a: &[Point]| {
        Real::Approx(inner(field, coords(&a[0]), coords(&a[1])).1)
    }));
    for d in sig.symbols() {
        let interp = match d.name.as_str() {
            "0" => {
                let z = zero.clone();
                Interp::Fn(Arc::new(move |_: &[Point]| z.clone()))
            }
            "inc" => pass.clone(),
            "vadd" => vadd.clone(),
            "vsub" => vsub.clone(),
            "norm" => vnorm.clone(),
            "ip" | "ip_re" => ip_re.clone(),
            "ip_im" => ip_im.clone(),
            other => unreachable!("hilbert signature declares `{other}`"),
        };
        m.interpret(&d.name, &d.args, interp)?;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::parse_rational;

    #[test]
    fn orthogonal_unit_vectors() {
        let m = hilbert_tower(Field::Real, 2, 1).unwrap();
        m.validate().unwrap();
        let (e1, e2) = (Point::vector(vec![1.0, 0.0]), Point::vector(vec![0.0, 1.0]));
        let b1 = m.sort_id("B1").unwrap();
        let ip = m.interp_of(&m.signature().resolve("ip", &[b1, b1]).unwrap()).unwrap();
        assert_eq!(ip.value(&[e1.clone(), e2.clone()]).to_f64(), 0.0);
        assert!((m.dist(b1, &e1, &e2).to_f64() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lam_three_halves_lands_in_b2() {
        let sig = hilbert_signature(Field::Real, 3);
        let (b1, b2) = (sig.sort_id("B1").unwrap(), sig.sort_id("B2").unwrap());
        let d = sig.resolve("lam[3/2]", &[b1]).unwrap();
        assert_eq!(d.result_sort(), Some(b2));
        assert_eq!(d.moduli[0], Modulus::scale(Rational::new(3, 2)).unwrap());
        // |c| = 1 needs k = 2, so B1 -> B2 as well
        assert_eq!(sig.resolve("lam[1]", &[b1]).unwrap().result_sort(), Some(b2));
        assert_eq!(sig.resolve("lam[1/2]", &[b1]).unwrap().result_sort(), Some(b1));
        // no B4 in a 3-ball tower
        assert!(sig.resolve("lam[3/2]", &[b2]).is_none());
    }

    #[test]
    fn scalar_norms_scale() {
        for (field, text) in [(Field::Real, "-7/3"), (Field::Complex, "1,2"), (Field::Complex, "0,-1/2")] {
            let c = Scalar::parse(text).unwrap();
            let abs = rational_to_f64(&c.norm_sq()).sqrt();
            let v: Vec<f64> = vec![0.3, -0.4, 0.5, 0.1];
            let w = scalar_apply(field, &c, &v);
            assert!((norm(&w) - abs * norm(&v)).abs() < 1e-12);
        }
        assert_eq!(parse_rational("1/2"), Some(Rational::new(1, 2)));
    }

    #[test]
    fn complex_inner_product() {
        // <(i), (1)> = i
        assert_eq!(inner(Field::Complex, &[0.0, 1.0], &[1.0, 0.0]), (0.0, 1.0));
        let m = hilbert_tower(Field::Complex, 2, 2).unwrap();
        m.validate().unwrap();
        let b2 = m.sort_id("B2").unwrap();
        assert!(m.signature().resolve("ip_im", &[b2, b2]).is_some());
    }
}
