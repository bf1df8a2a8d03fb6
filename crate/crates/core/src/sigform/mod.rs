//! Signatures, moduli, formulas and the textual grammar.

pub mod formula;
pub mod modulus;
pub mod parser;
pub mod signature;

pub use formula::{
    cap_warnings, derived_modulus, derived_modulus_in, free_vars, joint_modulus, static_range, BinOp, Expr, Formula, Quantifier, Term,
    TypedExpr, TypedTerm,
};
pub use modulus::Modulus;
pub use parser::{parse_expr, parse_formula, parse_formula_with};
pub use signature::{Field, Scalar, ScalarFamily, Signature, Sort, SortId, SortKind, SymbolDecl, SymbolKind};

/// Canonical text of a formula; reparses to the same AST.
pub fn print_formula(f: &Formula) -> String {
    f.to_string()
}
