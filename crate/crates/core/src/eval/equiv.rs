//! Depth-k equivalence: agreement on every enumerated sentence up to a depth.

use serde::Serialize;

use super::{enum_formulas, evaluate_with, Assignment, EvalOptions};
use crate::mstruct::MetricStructure;
use crate::Error;

#[derive(Clone, Debug, Serialize)]
pub struct EquivReport {
    pub depth: usize,
    pub sentences: usize,
    /// False when the stream was cut off at `max_sentences`.
    pub complete: bool,
    pub max_discrepancy: f64,
    /// First sentence whose values differ by more than `tol`, with both values.
    pub distinguishing: Option<(String, f64, f64)>,
}

impl EquivReport {
    pub fn equivalent(&self) -> bool {
        self.distinguishing.is_none()
    }
}

/// Compares `m` and `n` on the sentences of `enum_formulas(sig, depth, [])`, stopping
/// after `max_sentences`.
pub fn elem_equiv_depth(
    m: &MetricStructure,
    n: &MetricStructure,
    depth: usize,
    tol: f64,
    max_sentences: usize,
) -> Result<EquivReport, Error> {
    if m.signature() != n.signature() {
        return Err(Error::Structure(
            "depth-k equivalence needs structures over the same signature".into(),
        ));
    }
    let opts = EvalOptions {
        parallel: false,
        ..EvalOptions::with_tol(tol)
    };
    let mut report = EquivReport {
        depth,
        sentences: 0,
        complete: true,
        max_discrepancy: 0.0,
        distinguishing: None,
    };
    let empty = Assignment::new();
    let mut stream = enum_formulas(m.signature(), depth, &[]);
    loop {
        if report.sentences >= max_sentences {
            report.complete = stream.next().is_none();
            break;
        }
        let Some(f) = stream.next() else { break };
        let a = evaluate_with(m, &f, &empty, &opts)?.value().to_f64();
        let b = evaluate_with(n, &f, &empty, &opts)?.value().to_f64();
        report.sentences += 1;
        let gap = (a - b).abs();
        report.max_discrepancy = report.max_discrepancy.max(gap);
        if gap > tol && report.distinguishing.is_none() {
            report.distinguishing = Some((f.to_string(), a, b));
        }
    }
    Ok(report)
}
