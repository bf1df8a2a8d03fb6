//! Subcommand implementations. Each returns a JSON payload and a check verdict.

use serde::Serialize;
use serde_json::{json, Value};

use contilog::axioms::{scheme_defect_with, ActionSpec, Scheme};
use contilog::catgrp::{self, CayleyBound, GroupView};
use contilog::eval::{check_modulus, evaluate_with_witness, EvalOptions};
use contilog::mstruct::load_structure;
use contilog::sigform::{derived_modulus, derived_modulus_in, joint_modulus, parse_formula_with};
use contilog::typespace::{self, TypeFamily};
use contilog::ultra::{exact_value, load_sequence, ultra_eval, StructureSequence};
use contilog::{Assignment, Error, Formula, MetricStructure, Rational, Signature, SortId, ValueBounds};

use crate::report::InputLog;
use crate::{Cli, Command, Global, Outcome};

type Result<T> = std::result::Result<T, Error>;

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report payload serializes")
}

fn ok(result: Value) -> Result<Outcome> {
    Ok(Outcome { result, violation: false })
}

fn options(g: &Global) -> EvalOptions {
    EvalOptions {
        tol: g.tol,
        seed: g.seed,
        ..EvalOptions::default()
    }
}

fn bounds_json(v: &ValueBounds) -> Value {
    json!({
        "value": v.value().to_f64(),
        "exact": exact_value(v).map(|q| contilog::real::format_rational(&q)),
        "bounds": to_json(v),
    })
}

fn load(inputs: &mut InputLog, path: &str, g: &Global) -> Result<MetricStructure> {
    let m = load_structure(&inputs.read(path)?)?;
    check_size(&m, g)?;
    Ok(m)
}

fn check_size(m: &MetricStructure, g: &Global) -> Result<()> {
    for (id, sort) in m.signature().sorts().iter().enumerate() {
        if let Some(members) = m.member_indices(id) {
            if members.len() > g.max_points {
                return Err(Error::Limit(format!(
                    "sort {} has {} points, above --max-points {}",
                    sort.name,
                    members.len(),
                    g.max_points
                )));
            }
        }
    }
    Ok(())
}

fn parse(text: &str, sig: &Signature, g: &Global, declared: &[(&str, SortId)]) -> Result<Formula> {
    parse_formula_with(text, sig, g.cap, declared)
}

fn list(text: &str) -> Result<Vec<Rational>> {
    crate::rational_list(text).map_err(Error::Input)
}

fn sort_named(m: &MetricStructure, name: &str) -> Result<SortId> {
    m.signature()
        .sort_id(name)
        .ok_or_else(|| Error::Input(format!("unknown sort `{name}`")))
}

pub fn run(cli: &Cli, inputs: &mut InputLog) -> Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Eval {
            structure,
            formula,
            assign,
        } => eval(inputs, g, structure, formula, assign),
        Command::Modulus {
            structure,
            symbol,
            args,
            grid,
            samples,
            formula,
        } => {
            let m = load(inputs, structure, g)?;
            match (symbol, formula) {
                (Some(symbol), _) => modulus_check(&m, g, symbol, args.as_deref(), &list(grid)?, *samples),
                (None, Some(text)) => modulus_formula(&m, g, text),
                (None, None) => Err(Error::Input("give --symbol or --formula".into())),
            }
        }
        Command::Scheme {
            name,
            scheme,
            structure,
            action,
        } => scheme_cmd(
            inputs,
            g,
            name.as_deref(),
            scheme.as_deref(),
            structure.as_deref(),
            action.as_deref(),
        ),
        Command::Ultra {
            family,
            range,
            sequence,
            formula,
            window,
        } => {
            let seq = match (family, sequence) {
                (_, Some(path)) => load_sequence(&inputs.read(path)?)?,
                (Some(family), None) => {
                    let &[a, b] = range.as_slice() else {
                        return Err(Error::Input("--range needs two indices".into()));
                    };
                    if a > b {
                        return Err(Error::Input("empty index range".into()));
                    }
                    match family.as_str() {
                        "gn" => StructureSequence::gn(a..=b)?,
                        "sym_hamming" => StructureSequence::sym_hamming(a..=b)?,
                        other => return Err(Error::Input(format!("unknown family `{other}` (expected gn or sym_hamming)"))),
                    }
                }
                (None, None) => return Err(Error::Input("give --family or --sequence".into())),
            };
            for m in seq.members() {
                check_size(m, g)?;
            }
            let f = parse(formula, seq.signature(), g, &[])?;
            let report = ultra_eval(&seq, &f, *window, g.tol)?;
            let values: Vec<Value> = report
                .values
                .iter()
                .map(|(n, v)| {
                    let mut entry = bounds_json(v);
                    entry["index"] = json!(n);
                    entry
                })
                .collect();
            ok(json!({
                "formula": contilog::print_formula(&f),
                "values": values,
                "classification": to_json(&report.classification),
                "limit": report.limit(),
                "window": report.window,
            }))
        }
        Command::Aut { structure, maps } => {
            let m = load(inputs, structure, g)?;
            let aut = catgrp::automorphisms(&m, g.max_points, g.tol)?;
            let orbits: Vec<Vec<&str>> = aut
                .orbits()
                .iter()
                .map(|o| o.iter().map(|&i| aut.labels[i].as_str()).collect())
                .collect();
            let generators: Vec<&Vec<usize>> = aut.generators.iter().map(|&i| &aut.maps[i]).collect();
            let mut result = json!({
                "note": catgrp::FINITE_NOTE,
                "order": aut.order(),
                "labels": aut.labels,
                "generators": generators,
                "orbits": orbits,
                "candidates": aut.candidates,
            });
            if *maps {
                result["maps"] = to_json(&aut.maps);
            }
            ok(result)
        }
        Command::Oligo { structure, n, eps } => {
            let m = load(inputs, structure, g)?;
            let aut = catgrp::automorphisms(&m, g.max_points, g.tol)?;
            let report = catgrp::approx_oligo(&m, *n, *eps, &aut)?;
            let valid = report.validate(&m, &aut, *eps);
            let mut result = to_json(&report);
            result["valid"] = json!(valid);
            Ok(Outcome { result, violation: !valid })
        }
        Command::Bound { structure, radius, k } => {
            let m = load(inputs, structure, g)?;
            ok(to_json(&catgrp::boundedness_battery(&m, *radius, *k)?))
        }
        Command::Cayley { structure, subset, max_n } => {
            let m = load(inputs, structure, g)?;
            let bound = catgrp::cayley_bound(&m, subset, *max_n)?;
            let violation = !matches!(bound, CayleyBound::Bound { .. });
            Ok(Outcome {
                result: to_json(&bound),
                violation,
            })
        }
        Command::Chain { structure, sets, balls } => {
            let m = load(inputs, structure, g)?;
            let chain: Vec<Vec<String>> = match (sets, balls) {
                (Some(text), _) => serde_json::from_str(text).map_err(|e| Error::Input(format!("--sets: {e}")))?,
                (None, Some(radii)) => {
                    let view = GroupView::new(&m)?;
                    list(radii)?.iter().map(|&r| view.labels_of(&view.ball(r))).collect()
                }
                (None, None) => return Err(Error::Input("give --sets or --balls".into())),
            };
            let report = catgrp::chain_validate(&m, &chain)?;
            let violation = !report.valid;
            Ok(Outcome {
                result: to_json(&report),
                violation,
            })
        }
        Command::Catreport {
            structure,
            rho,
            n,
            eps,
            arity,
            depth,
            limit,
        } => catreport(inputs, g, structure, *rho, *n, *eps, *arity, *depth, *limit),
        Command::Types {
            structure,
            sort,
            n,
            depth,
            limit,
            eps,
            tuples,
            phi,
            psi,
        } => types(
            inputs,
            g,
            structure,
            sort.as_deref(),
            *n,
            *depth,
            *limit,
            *eps,
            tuples,
            phi.as_deref(),
            psi.as_deref(),
        ),
    }
}

fn eval(inputs: &mut InputLog, g: &Global, structure: &str, formula: &str, assign: &[String]) -> Result<Outcome> {
    let m = load(inputs, structure, g)?;
    let mut bindings = Vec::new();
    for a in assign {
        let (var, rest) = a
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("--assign `{a}`: expected x:Sort=label")))?;
        let (sort, label) = rest
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("--assign `{a}`: expected x:Sort=label")))?;
        let id = sort_named(&m, sort)?;
        bindings.push((var.to_string(), id, m.point(id, label)?));
    }
    let declared: Vec<(&str, SortId)> = bindings.iter().map(|(v, s, _)| (v.as_str(), *s)).collect();
    let f = parse(formula, m.signature(), g, &declared)?;
    let mut assignment = Assignment::new();
    for (v, _, p) in &bindings {
        assignment.set(v, p.clone());
    }
    let (value, witness) = evaluate_with_witness(&m, &f, &assignment, &options(g))?;
    let witness: Vec<Value> = witness
        .iter()
        .map(|w| {
            json!({
                "var": w.var,
                "sort": m.signature().sort(w.sort).name,
                "point": m.label(w.sort, &w.point),
            })
        })
        .collect();
    let mut result = bounds_json(&value);
    result["formula"] = json!(contilog::print_formula(&f));
    result["witness"] = json!(witness);
    ok(result)
}

fn modulus_check(m: &MetricStructure, g: &Global, symbol: &str, args: Option<&str>, grid: &[Rational], samples: usize) -> Result<Outcome> {
    let sig = m.signature();
    let decl = match args {
        Some(list) => {
            let sorts = list.split(',').map(|s| sort_named(m, s.trim())).collect::<Result<Vec<_>>>()?;
            sig.resolve(symbol, &sorts)
                .ok_or_else(|| Error::UnknownSymbol(format!("{symbol}({list})")))?
        }
        None => {
            let mut found = sig.candidates(symbol);
            match found.len() {
                0 => return Err(Error::UnknownSymbol(symbol.into())),
                1 => found.remove(0),
                _ => return Err(Error::Input(format!("`{symbol}` is overloaded; pass --args"))),
            }
        }
    };
    let report = check_modulus(m, &decl, grid, samples, g.seed, g.tol)?;
    let violation = !report.ok();
    Ok(Outcome {
        result: to_json(&report),
        violation,
    })
}

fn modulus_formula(m: &MetricStructure, g: &Global, text: &str) -> Result<Outcome> {
    // free-variable sorts are inferred from their use
    let f = parse(text, m.signature(), g, &[])?;
    let per_var: Vec<Value> = f
        .free_vars()
        .iter()
        .map(|(v, _)| json!({"var": v, "modulus": derived_modulus_in(&f, v).map(|m| m.to_string())}))
        .collect();
    ok(json!({
        "formula": contilog::print_formula(&f),
        "derived": derived_modulus(&f).to_string(),
        "joint": joint_modulus(&f).to_string(),
        "variables": per_var,
    }))
}

fn scheme_cmd(
    inputs: &mut InputLog,
    g: &Global,
    name: Option<&str>,
    scheme: Option<&str>,
    structure: Option<&str>,
    action: Option<&str>,
) -> Result<Outcome> {
    let text = match (name, scheme) {
        (Some(name), _) => json!({ "name": name }).to_string(),
        (None, Some(s)) if s.trim_start().starts_with('{') => s.to_string(),
        (None, Some(path)) => inputs.read(path)?,
        (None, None) => return Err(Error::Input("give --name or --scheme".into())),
    };
    let scheme: Scheme = serde_json::from_str(&text).map_err(|e| Error::Scheme(format!("scheme: {e}")))?;
    let m = match (structure, action) {
        (Some(path), _) => load(inputs, path, g)?,
        (None, Some(path)) => {
            let spec = ActionSpec::from_json(&inputs.read(path)?)?;
            let m = spec.build()?;
            check_size(&m, g)?;
            m
        }
        (None, None) => return Err(Error::Input("give --structure or --action".into())),
    };
    let report = scheme_defect_with(&m, &scheme, &options(g))?;
    let violation = !report.holds(g.tol);
    let mut result = to_json(&report);
    result["holds"] = json!(!violation);
    Ok(Outcome { result, violation })
}

#[allow(clippy::too_many_arguments)]
fn catreport(
    inputs: &mut InputLog,
    g: &Global,
    structure: &str,
    rho: Rational,
    n: Option<usize>,
    eps: Rational,
    arity: usize,
    depth: usize,
    limit: usize,
) -> Result<Outcome> {
    let m = load(inputs, structure, g)?;
    let view = GroupView::new(&m)?;
    let grho = catgrp::g_rho(&m, rho)?;
    let n = n.unwrap_or(grho.exponent.max(1));
    let definability = catgrp::definability_defect(&m, rho, n, eps, &options(g))?;
    let aut = catgrp::automorphisms(&m, g.max_points, g.tol)?;
    let quotient = catgrp::quotient_orbits(&m, rho, &aut)?;
    let family = TypeFamily::enumerate(m.signature(), &vec![view.sort; arity], depth, limit);
    let homog = catgrp::near_homog_defect(&m, arity, &family, eps, &aut, g.tol)?;
    let violation = definability.value.hi.to_f64() > g.tol;
    Ok(Outcome {
        result: json!({
            "note": catgrp::FINITE_NOTE,
            "g_rho": to_json(&grho),
            "definability": {
                "n": n,
                "report": to_json(&definability),
            },
            "aut_order": aut.order(),
            "quotient": to_json(&quotient),
            "near_homogeneity": to_json(&homog),
        }),
        violation,
    })
}

#[allow(clippy::too_many_arguments)]
fn types(
    inputs: &mut InputLog,
    g: &Global,
    structure: &str,
    sort: Option<&str>,
    n: usize,
    depth: usize,
    limit: usize,
    eps: Option<Rational>,
    tuples: &[String],
    phi: Option<&str>,
    psi: Option<&str>,
) -> Result<Outcome> {
    let m = load(inputs, structure, g)?;
    let sort = match sort {
        Some(name) => sort_named(&m, name)?,
        None => (0..m.signature().sorts().len())
            .find(|&s| m.is_finite(s))
            .ok_or_else(|| Error::Input("structure has no finite sort".into()))?,
    };
    if n == 0 {
        return Err(Error::Input("--n must be positive".into()));
    }
    let family = TypeFamily::enumerate(m.signature(), &vec![sort; n], depth, limit);
    let space = typespace::realized_types(&m, &family, g.tol)?;
    let classes: Vec<Vec<&Vec<String>>> = space
        .classes
        .iter()
        .map(|c| c.iter().map(|&i| &space.points[i].labels).collect())
        .collect();
    let mut result = json!({
        "family": family.describe(),
        "formulas": family.formulas.len(),
        "truncated": family.truncated,
        "classes": classes,
    });
    let mut violation = false;
    if let Some(eps) = eps {
        let net = typespace::eps_net(&m, &family, eps, g.tol)?;
        let valid = net.validate(eps);
        violation |= !valid;
        let mut entry = to_json(&net);
        entry["valid"] = json!(valid);
        result["eps_net"] = entry;
    }
    if tuples.len() > 2 {
        return Err(Error::Input("--tuple may be given at most twice".into()));
    }
    let mut points = Vec::new();
    for t in tuples {
        let labels: Vec<&str> = t.split(',').map(str::trim).collect();
        if labels.len() != n {
            return Err(Error::Arity(format!("--tuple `{t}` has {} labels, expected {n}", labels.len())));
        }
        let tuple = labels.iter().map(|l| m.point(sort, l)).collect::<Result<Vec<_>>>()?;
        points.push(typespace::tp(&m, &tuple, &family, g.tol)?);
    }
    if !points.is_empty() {
        result["types"] = to_json(&points);
    }
    if let [p, q] = points.as_slice() {
        result["type_distance"] = to_json(&typespace::type_distance(&m, &family, p, q, g.tol)?);
    }
    if let (Some(phi), Some(psi)) = (phi, psi) {
        let declared: Vec<(&str, SortId)> = family.vars.iter().map(|(v, s)| (v.as_str(), *s)).collect();
        let phi = parse(phi, m.signature(), g, &declared)?;
        let psi = parse(psi, m.signature(), g, &declared)?;
        let d = typespace::formula_pseudometric(&[&m], &phi, &psi, &options(g))?;
        result["formula_distance"] = bounds_json(&d);
    }
    Ok(Outcome { result, violation })
}
