use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use super::modulus::{Modulus, RationalText};
use crate::real::{format_rational, parse_rational, Rational};
use crate::Error;

pub type SortId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SortKind {
    Finite,
    HilbertBall,
    /// Unit sphere of a Hilbert tower; quantifying over it ranges over unit vectors.
    HilbertSphere,
    TreeBall,
}

impl SortKind {
    pub fn is_tower(self) -> bool {
        matches!(self, SortKind::HilbertBall | SortKind::TreeBall)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sort {
    pub name: String,
    #[serde(with = "rational_serde")]
    pub diameter: Rational,
    pub kind: SortKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball_index: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    Function { result: SortId },
    Predicate { lo: Rational, hi: Rational },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolDecl {
    pub name: String,
    pub args: Vec<SortId>,
    pub kind: SymbolKind,
    /// One modulus per argument.
    pub moduli: Vec<Modulus>,
}

impl SymbolDecl {
    pub fn is_function(&self) -> bool {
        matches!(self.kind, SymbolKind::Function { .. })
    }

    pub fn result_sort(&self) -> Option<SortId> {
        match self.kind {
            SymbolKind::Function { result } => Some(result),
            SymbolKind::Predicate { .. } => None,
        }
    }

    pub fn range(&self) -> Option<(Rational, Rational)> {
        match self.kind {
            SymbolKind::Predicate { lo, hi } => Some((lo, hi)),
            SymbolKind::Function { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

/// A scalar from `Q` or `Q[i]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Scalar {
    pub re: Rational,
    pub im: Rational,
}

impl Scalar {
    pub fn real(re: Rational) -> Self {
        Scalar { re, im: Rational::zero() }
    }

    pub fn norm_sq(&self) -> Rational {
        self.re * self.re + self.im * self.im
    }

    /// The ball multiplier `k >= 1` with `k - 1 <= |c| < k`.
    pub fn ball_multiplier(&self) -> u32 {
        let n2 = self.norm_sq();
        let mut k: i64 = 1;
        while Rational::from_integer(k * k) <= n2 {
            k += 1;
        }
        k as u32
    }

    /// Rational upper bound on `|c|` (exact for real scalars).
    pub fn norm_upper(&self) -> Rational {
        if self.im.is_zero() {
            self.re.abs()
        } else if self.re.is_zero() {
            self.im.abs()
        } else {
            self.re.abs() + self.im.abs()
        }
    }

    /// Parses the bracket payload of `lam[...]`: `3/2` or `re,im`.
    pub fn parse(text: &str) -> Option<Scalar> {
        match text.split_once(',') {
            Some((re, im)) => Some(Scalar {
                re: parse_rational(re)?,
                im: parse_rational(im)?,
            }),
            None => Some(Scalar::real(parse_rational(text)?)),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            f.write_str(&format_rational(&self.re))
        } else {
            write!(f, "{},{}", format_rational(&self.re), format_rational(&self.im))
        }
    }
}

/// Splits `lam[3/2]` into `("lam", "3/2")`.
pub fn split_parametric(name: &str) -> Option<(&str, &str)> {
    let open = name.find('[')?;
    let inner = name[open + 1..].strip_suffix(']')?;
    Some((&name[..open], inner))
}

/// The family `lam[c]: B_m -> B_{km}` of scalar multiplications on a Hilbert tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarFamily {
    pub field: Field,
    /// `(ball index, sort)` for every ball sort of the tower.
    pub balls: Vec<(u32, SortId)>,
}

impl ScalarFamily {
    pub const SYMBOL: &'static str = "lam";

    fn decls(&self, scalar: Scalar, name: &str) -> Vec<SymbolDecl> {
        if self.field == Field::Real && !scalar.im.is_zero() {
            return Vec::new();
        }
        let k = scalar.ball_multiplier();
        let modulus = if scalar.norm_sq().is_zero() {
            Modulus::id()
        } else {
            Modulus::scale(scalar.norm_upper()).expect("positive bound")
        };
        self.balls
            .iter()
            .filter_map(|&(m, sort)| {
                let target = self.balls.iter().find(|&&(n, _)| n == k * m)?.1;
                Some(SymbolDecl {
                    name: name.to_string(),
                    args: vec![sort],
                    kind: SymbolKind::Function { result: target },
                    moduli: vec![modulus.clone()],
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    sorts: Vec<Sort>,
    symbols: Vec<SymbolDecl>,
    scalars: Option<ScalarFamily>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sort(&mut self, sort: Sort) -> Result<SortId, Error> {
        if self.sort_id(&sort.name).is_some() {
            return Err(Error::Signature(format!("duplicate sort `{}`", sort.name)));
        }
        if sort.diameter.is_negative() {
            return Err(Error::Signature(format!("sort `{}` has negative diameter", sort.name)));
        }
        if sort.kind.is_tower() != sort.ball_index.is_some() {
            return Err(Error::Signature(format!(
                "sort `{}`: ball index must be present exactly for tower kinds",
                sort.name
            )));
        }
        self.sorts.push(sort);
        Ok(self.sorts.len() - 1)
    }

    fn check_symbol(&self, decl: &SymbolDecl) -> Result<(), Error> {
        let keyword = !decl.is_function() && crate::sigform::parser::KEYWORDS.contains(&decl.name.as_str());
        if decl.name.is_empty() || decl.name == "d" || decl.name.contains('[') || keyword {
            return Err(Error::Signature(format!("reserved symbol name `{}`", decl.name)));
        }
        if decl.moduli.len() != decl.args.len() {
            return Err(Error::Signature(format!("symbol `{}` needs one modulus per argument", decl.name)));
        }
        for &s in decl.args.iter().chain(decl.result_sort().iter()) {
            if s >= self.sorts.len() {
                return Err(Error::Signature(format!("symbol `{}` refers to an unknown sort", decl.name)));
            }
        }
        if let Some((lo, hi)) = decl.range() {
            if lo > hi {
                return Err(Error::Signature(format!("predicate `{}` has an empty range", decl.name)));
            }
        }
        let clash = |s: &SymbolDecl| match (&s.kind, &decl.kind) {
            (SymbolKind::Function { result: a }, SymbolKind::Function { result: b }) => a == b,
            _ => true,
        };
        if self.symbols.iter().any(|s| s.name == decl.name && s.args == decl.args && clash(s)) {
            return Err(Error::Signature(format!(
                "symbol `{}` already declared with the same argument sorts",
                decl.name
            )));
        }
        Ok(())
    }

    pub fn add_symbol(&mut self, decl: SymbolDecl) -> Result<usize, Error> {
        self.check_symbol(&decl)?;
        self.symbols.push(decl);
        Ok(self.symbols.len() - 1)
    }

    pub fn add_function(&mut self, name: &str, args: &[SortId], result: SortId, moduli: Vec<Modulus>) -> Result<usize, Error> {
        self.add_symbol(SymbolDecl {
            name: name.into(),
            args: args.to_vec(),
            kind: SymbolKind::Function { result },
            moduli,
        })
    }

    pub fn add_predicate(
        &mut self,
        name: &str,
        args: &[SortId],
        range: (Rational, Rational),
        moduli: Vec<Modulus>,
    ) -> Result<usize, Error> {
        self.add_symbol(SymbolDecl {
            name: name.into(),
            args: args.to_vec(),
            kind: SymbolKind::Predicate { lo: range.0, hi: range.1 },
            moduli,
        })
    }

    pub fn set_scalar_family(&mut self, family: ScalarFamily) {
        self.scalars = Some(family);
    }

    pub fn scalar_family(&self) -> Option<&ScalarFamily> {
        self.scalars.as_ref()
    }

    pub fn sorts(&self) -> &[Sort] {
        &self.sorts
    }

    pub fn sort(&self, id: SortId) -> &Sort {
        &self.sorts[id]
    }

    pub fn sort_id(&self, name: &str) -> Option<SortId> {
        self.sorts.iter().position(|s| s.name == name)
    }

    pub fn symbols(&self) -> &[SymbolDecl] {
        &self.symbols
    }

    /// All declarations named `name`, including synthesized scalar maps.
    pub fn candidates(&self, name: &str) -> Vec<SymbolDecl> {
        if let Some((base, payload)) = split_parametric(name) {
            if base == ScalarFamily::SYMBOL {
                if let (Some(fam), Some(c)) = (&self.scalars, Scalar::parse(payload)) {
                    return fam.decls(c, name);
                }
            }
            return Vec::new();
        }
        self.symbols.iter().filter(|s| s.name == name).cloned().collect()
    }

    pub fn has_symbol(&self, name: &str) -> bool {
        !self.candidates(name).is_empty()
    }

    pub fn resolve(&self, name: &str, args: &[SortId]) -> Option<SymbolDecl> {
        self.candidates(name).into_iter().find(|d| d.args == args)
    }

    /// Index of a plain (non-parametric) declaration.
    pub fn symbol_index(&self, name: &str, args: &[SortId]) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name && s.args == args)
    }

    pub fn decl_index(&self, decl: &SymbolDecl) -> Option<usize> {
        self.symbols.iter().position(|s| s == decl)
    }

    pub fn is_constant(&self, name: &str) -> bool {
        self.candidates(name).iter().any(|d| d.args.is_empty() && d.is_function())
    }

    pub fn from_json(text: &str) -> Result<Signature, Error> {
        let file: SignatureFile = serde_json::from_str(text).map_err(|e| Error::Input(format!("signature file: {e}")))?;
        file.into_signature()
    }

    pub fn to_file(&self) -> SignatureFile {
        let name = |id: SortId| self.sorts[id].name.clone();
        let mut file = SignatureFile {
            sorts: self.sorts.clone(),
            functions: Vec::new(),
            predicates: Vec::new(),
        };
        for s in &self.symbols {
            let entry = SymbolEntry {
                name: s.name.clone(),
                arity: s.args.iter().map(|&a| name(a)).collect(),
                result: s.result_sort().map(name),
                range: s.range().map(|(lo, hi)| [RationalText(lo), RationalText(hi)]),
                modulus: Some(ModulusSpec::PerArgument(s.moduli.clone())),
            };
            if s.is_function() {
                file.functions.push(entry);
            } else {
                file.predicates.push(entry);
            }
        }
        file
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignatureFile {
    pub sorts: Vec<Sort>,
    #[serde(default)]
    pub functions: Vec<SymbolEntry>,
    #[serde(default)]
    pub predicates: Vec<SymbolEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolEntry {
    pub name: String,
    #[serde(default)]
    pub arity: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[RationalText; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<ModulusSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModulusSpec {
    PerArgument(Vec<Modulus>),
    Uniform(Modulus),
}

impl ModulusSpec {
    pub fn expand(&self, arity: usize) -> Result<Vec<Modulus>, Error> {
        match self {
            ModulusSpec::Uniform(m) => Ok(vec![m.clone(); arity]),
            ModulusSpec::PerArgument(ms) if ms.len() == arity => Ok(ms.clone()),
            ModulusSpec::PerArgument(ms) => Err(Error::Signature(format!("expected {arity} moduli, got {}", ms.len()))),
        }
    }
}

impl SignatureFile {
    pub fn into_signature(self) -> Result<Signature, Error> {
        let mut sig = Signature::new();
        for s in self.sorts {
            sig.add_sort(s)?;
        }
        let lookup = |sig: &Signature, n: &str| sig.sort_id(n).ok_or_else(|| Error::Signature(format!("unknown sort `{n}`")));
        for f in self.functions {
            let args = f.arity.iter().map(|a| lookup(&sig, a)).collect::<Result<Vec<_>, _>>()?;
            let result = lookup(
                &sig,
                f.result
                    .as_deref()
                    .ok_or_else(|| Error::Signature(format!("function `{}` has no result sort", f.name)))?,
            )?;
            let moduli = f
                .modulus
                .map(|m| m.expand(args.len()))
                .transpose()?
                .unwrap_or_else(|| vec![Modulus::id(); args.len()]);
            sig.add_function(&f.name, &args, result, moduli)?;
        }
        for p in self.predicates {
            let args = p.arity.iter().map(|a| lookup(&sig, a)).collect::<Result<Vec<_>, _>>()?;
            let [lo, hi] = p
                .range
                .ok_or_else(|| Error::Signature(format!("predicate `{}` has no range", p.name)))?;
            let moduli = p
                .modulus
                .map(|m| m.expand(args.len()))
                .transpose()?
                .unwrap_or_else(|| vec![Modulus::id(); args.len()]);
            sig.add_predicate(&p.name, &args, (lo.0, hi.0), moduli)?;
        }
        Ok(sig)
    }
}

pub(crate) mod rational_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::real::Rational;
    use crate::sigform::modulus::RationalText;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        RationalText(*r).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        Ok(RationalText::deserialize(d)?.0)
    }
}
