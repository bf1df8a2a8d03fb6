//! Continuous first-order logic for metric structures.
//!
//! Formulas take nonnegative real values, connectives are the clamped
//! arithmetic ones, and `sup`/`inf` quantify over sorts. The crate evaluates
//! formulas on finite metric groups, Hilbert ball towers and finite trees,
//! compiles named axiom schemes, approximates ultraproducts by tail limits and
//! computes type-space and automorphism-group diagnostics.

pub mod axioms;
pub mod catgrp;
pub mod eval;
pub mod mstruct;
pub mod real;
pub mod sigform;
pub mod typespace;
pub mod ultra;

pub use eval::{evaluate, Assignment, ValueBounds};
pub use mstruct::{MetricStructure, Point};
pub use real::{Rational, Real};
pub use sigform::{parse_formula, print_formula, Expr, Formula, Modulus, Signature, SortId, Term};

/// Default float comparison tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown symbol: {0}")]
    UnknownSymbol(String),
    #[error("arity error: {0}")]
    Arity(String),
    #[error("sort error: {0}")]
    Sort(String),
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),
    #[error("signature error: {0}")]
    Signature(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error("scheme error: {0}")]
    Scheme(String),
    #[error("limit exceeded: {0}")]
    Limit(String),
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
