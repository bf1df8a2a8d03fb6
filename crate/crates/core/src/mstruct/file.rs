//! JSON structure files: generator shorthands or explicit sorts and tables.

use serde::Deserialize;
use serde_json::Value;

use super::group::{gn_family, group_structure, sym_hamming, FiniteGroup};
use super::hilbert::hilbert_tower;
use super::tree::tree_space;
use super::{diameter, table_universe, Carrier, Interp, Metric, MetricStructure};
use crate::real::Rational;
use crate::sigform::modulus::RationalText;
use crate::sigform::{Field, Modulus, Signature, Sort, SortKind};
use crate::Error;

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum StructureSpec {
    Generator(Generator),
    Explicit(ExplicitSpec),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    SymHamming {
        n: usize,
        #[serde(default)]
        cap: Option<usize>,
    },
    Gn {
        n: usize,
    },
    Hilbert {
        field: FieldName,
        dim: usize,
        balls: u32,
    },
    Tree {
        edges: Vec<(usize, usize, RationalText)>,
        #[serde(default)]
        basepoint: usize,
    },
    Cayley {
        table: Vec<Vec<usize>>,
        #[serde(default)]
        metric: Option<Vec<Vec<RationalText>>>,
        #[serde(default)]
        labels: Vec<String>,
    },
    Discrete {
        of: Box<StructureSpec>,
    },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldName {
    Real,
    Complex,
}

impl From<FieldName> for Field {
    fn from(f: FieldName) -> Field {
        match f {
            FieldName::Real => Field::Real,
            FieldName::Complex => Field::Complex,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub sorts: Vec<SortSpec>,
    #[serde(default)]
    pub functions: Vec<TableSpec>,
    #[serde(default)]
    pub predicates: Vec<TableSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortSpec {
    pub name: String,
    pub points: Vec<String>,
    pub metric: Vec<Vec<RationalText>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub result: Option<String>,
    #[serde(default)]
    pub range: Option<(RationalText, RationalText)>,
    #[serde(default)]
    pub modulus: Option<Modulus>,
    pub table: Vec<Value>,
}

fn rows(m: &[Vec<RationalText>]) -> Vec<Vec<Rational>> {
    m.iter().map(|r| r.iter().map(|x| x.0).collect()).collect()
}

impl StructureSpec {
    pub fn build(&self) -> Result<MetricStructure, Error> {
        let m = match self {
            StructureSpec::Generator(g) => g.build()?,
            StructureSpec::Explicit(e) => e.build()?,
        };
        m.validate()?;
        Ok(m)
    }
}

impl Generator {
    fn build(&self) -> Result<MetricStructure, Error> {
        match self {
            Generator::SymHamming { n, cap } => sym_hamming(*n, *cap),
            Generator::Gn { n } => gn_family(*n),
            Generator::Hilbert { field, dim, balls } => hilbert_tower((*field).into(), *dim, *balls),
            Generator::Tree { edges, basepoint } => {
                let edges: Vec<_> = edges.iter().map(|(a, b, l)| (*a, *b, l.0)).collect();
                let n = edges.iter().map(|e| e.0.max(e.1) + 1).max().unwrap_or(1).max(basepoint + 1);
                tree_space(n, &edges, *basepoint)
            }
            Generator::Cayley { table, metric, labels } => {
                let metric = match metric {
                    None => Metric::Discrete,
                    Some(m) => {
                        let n = table.len();
                        let u = table_universe("cayley", rows(m), Vec::new())?;
                        if u.size != n {
                            return Err(Error::Input("metric and table sizes differ".into()));
                        }
                        u.metric
                    }
                };
                Ok(group_structure(FiniteGroup::from_table("cayley", table, metric, labels.clone())?))
            }
            Generator::Discrete { of } => {
                let inner = of.build()?;
                let g = inner
                    .group()
                    .ok_or_else(|| Error::Input("`discrete` needs a group structure".into()))?;
                let labels = g.universe.labels.clone();
                let wrapped = FiniteGroup::from_table(&format!("{} (discrete)", g.name), &g.table(), Metric::Discrete, labels)?;
                Ok(group_structure(wrapped))
            }
        }
    }
}

fn elem_of(v: &Value, labels: &[String], what: &str) -> Result<usize, Error> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .map(|x| x as usize)
            .filter(|&x| x < labels.len())
            .ok_or_else(|| Error::Input(format!("{what}: index {n} out of range"))),
        Value::String(s) => labels
            .iter()
            .position(|l| l == s)
            .ok_or_else(|| Error::Input(format!("{what}: unknown point `{s}`"))),
        _ => Err(Error::Input(format!("{what}: table entries are indices or labels"))),
    }
}

fn sort_of(sig: &Signature, name: &str) -> Result<usize, Error> {
    sig.sort_id(name).ok_or_else(|| Error::Input(format!("unknown sort `{name}`")))
}

impl ExplicitSpec {
    fn build(&self) -> Result<MetricStructure, Error> {
        let mut sig = Signature::new();
        let mut universes = Vec::new();
        for s in &self.sorts {
            let u = table_universe(&s.name, rows(&s.metric), s.points.clone())?;
            if u.size != s.points.len() {
                return Err(Error::Input(format!(
                    "sort `{}`: {} points but a {}-row metric",
                    s.name,
                    s.points.len(),
                    u.size
                )));
            }
            let all: Vec<usize> = (0..u.size).collect();
            sig.add_sort(Sort {
                name: s.name.clone(),
                diameter: diameter(&u, &all),
                kind: SortKind::Finite,
                ball_index: None,
            })?;
            universes.push(u);
        }
        let mut interps = Vec::new();
        for f in &self.functions {
            let args = f.args.iter().map(|a| sort_of(&sig, a)).collect::<Result<Vec<_>, _>>()?;
            let result = sort_of(
                &sig,
                f.result
                    .as_deref()
                    .ok_or_else(|| Error::Input(format!("function `{}` needs a result", f.name)))?,
            )?;
            let sizes: Vec<usize> = args.iter().map(|&a| universes[a].size).collect();
            let cells: usize = sizes.iter().product();
            if f.table.len() != cells {
                return Err(Error::Input(format!("function `{}` needs {cells} table entries", f.name)));
            }
            let labels = &universes[result].labels;
            let data = f
                .table
                .iter()
                .map(|v| elem_of(v, labels, &f.name).map(|x| x as u32))
                .collect::<Result<Vec<_>, _>>()?;
            let moduli = vec![f.modulus.clone().unwrap_or_else(Modulus::id); args.len()];
            sig.add_function(&f.name, &args, result, moduli)?;
            interps.push((f.name.clone(), args, Interp::FnTable { sizes, data }));
        }
        for p in &self.predicates {
            let args = p.args.iter().map(|a| sort_of(&sig, a)).collect::<Result<Vec<_>, _>>()?;
            let (lo, hi) = p
                .range
                .as_ref()
                .map(|(a, b)| (a.0, b.0))
                .ok_or_else(|| Error::Input(format!("predicate `{}` needs a range", p.name)))?;
            let sizes: Vec<usize> = args.iter().map(|&a| universes[a].size).collect();
            let cells: usize = sizes.iter().product();
            if p.table.len() != cells {
                return Err(Error::Input(format!("predicate `{}` needs {cells} table entries", p.name)));
            }
            let data = p
                .table
                .iter()
                .map(|v| {
                    serde_json::from_value::<RationalText>(v.clone())
                        .map(|r| r.0)
                        .map_err(|e| Error::Input(format!("predicate `{}`: {e}", p.name)))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if data.iter().any(|&x| x < lo || x > hi) {
                return Err(Error::Input(format!("predicate `{}` has values outside its range", p.name)));
            }
            let moduli = vec![p.modulus.clone().unwrap_or_else(Modulus::id); args.len()];
            sig.add_predicate(&p.name, &args, (lo, hi), moduli)?;
            interps.push((p.name.clone(), args, Interp::PredTable { sizes, data }));
        }
        let mut m = MetricStructure::new(self.name.as_deref().unwrap_or("structure"), sig);
        for (id, u) in universes.into_iter().enumerate() {
            let members = (0..u.size).collect();
            let ui = m.add_universe(u);
            m.set_carrier(id, Carrier::Finite { universe: ui, members });
        }
        for (name, args, interp) in interps {
            m.interpret(&name, &args, interp)?;
        }
        Ok(m)
    }
}

/// Parses and validates a structure file.
pub fn load_structure(text: &str) -> Result<MetricStructure, Error> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Input(format!("structure file: {e}")))?;
    let spec: StructureSpec = if value.get("kind").is_some() {
        StructureSpec::Generator(serde_json::from_value(value).map_err(|e| Error::Input(format!("structure generator: {e}")))?)
    } else {
        StructureSpec::Explicit(serde_json::from_value(value).map_err(|e| Error::Input(format!("structure file: {e}")))?)
    };
    spec.build()
}
