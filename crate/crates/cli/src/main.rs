//! `contilog`: evaluate continuous-logic formulas and run structure checks, emitting JSON reports.

mod commands;
mod report;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use contilog::Rational;

use report::{normalize_numbers, InputLog, Report, Timing, SCHEMA};

#[derive(Parser, Debug)]
#[command(name = "contilog", version, about = "Continuous-logic evaluation and structure checks")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Tolerance for comparisons and check verdicts.
    #[arg(long, global = true, default_value_t = contilog::DEFAULT_TOL)]
    pub tol: f64,
    /// Formula cap C (rational).
    #[arg(long, global = true, default_value = "1", value_parser = rational)]
    pub cap: Rational,
    /// Seed for optimizer multistarts and sampling.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Largest finite sort accepted.
    #[arg(long, global = true, default_value_t = 5000)]
    pub max_points: usize,
}

pub fn rational(s: &str) -> Result<Rational, String> {
    contilog::real::parse_rational(s).ok_or_else(|| format!("`{s}` is not a rational number"))
}

pub fn rational_list(s: &str) -> Result<Vec<Rational>, String> {
    s.split(',').map(rational).collect()
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate a formula on a structure.
    Eval {
        #[arg(long)]
        structure: String,
        #[arg(long)]
        formula: String,
        /// Free-variable binding `x:Sort=label`; repeatable.
        #[arg(long = "assign")]
        assign: Vec<String>,
    },
    /// Check a declared modulus, or derive the moduli of a formula.
    Modulus {
        #[arg(long)]
        structure: String,
        #[arg(long, conflicts_with = "formula", required_unless_present = "formula")]
        symbol: Option<String>,
        /// Comma-separated argument sorts, when the symbol is overloaded.
        #[arg(long, requires = "symbol")]
        args: Option<String>,
        /// Comma-separated ε values.
        #[arg(long, default_value = "1/4,1/2,3/4,1")]
        grid: String,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long)]
        formula: Option<String>,
    },
    /// Defect of a named axiom scheme.
    Scheme {
        /// Scheme name without parameters, e.g. `group`.
        #[arg(long, conflicts_with = "scheme", required_unless_present = "scheme")]
        name: Option<String>,
        /// Scheme as JSON text or a JSON file, e.g. `{"name":"aiv","m":1,"n":1}`.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, conflicts_with = "action", required_unless_present = "action")]
        structure: Option<String>,
        /// Action file: group, target and `nu`.
        #[arg(long)]
        action: Option<String>,
    },
    /// Evaluate a sentence along a structure sequence.
    Ultra {
        #[arg(long, conflicts_with = "sequence", required_unless_present = "sequence", requires = "range")]
        family: Option<String>,
        #[arg(long, num_args = 2, value_names = ["FIRST", "LAST"])]
        range: Vec<usize>,
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long)]
        formula: String,
        #[arg(long, default_value_t = 3)]
        window: usize,
    },
    /// Automorphism group of a one-sorted finite structure.
    Aut {
        #[arg(long)]
        structure: String,
        /// Include every map, not just the generators.
        #[arg(long)]
        maps: bool,
    },
    /// ε-approximate orbit representatives of n-tuples.
    Oligo {
        #[arg(long)]
        structure: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = rational)]
        eps: Rational,
    },
    /// Boundedness battery around the ball of radius r at 1.
    Bound {
        #[arg(long)]
        structure: String,
        #[arg(long, value_parser = rational)]
        radius: Rational,
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Least n with (U ∪ U⁻¹ ∪ {1})ⁿ = G.
    Cayley {
        #[arg(long)]
        structure: String,
        #[arg(long, num_args = 1.., required = true)]
        subset: Vec<String>,
        #[arg(long, default_value_t = 64)]
        max_n: usize,
    },
    /// Validate an increasing chain of subsets.
    Chain {
        #[arg(long)]
        structure: String,
        /// JSON array of label arrays.
        #[arg(long, conflicts_with = "balls", required_unless_present = "balls")]
        sets: Option<String>,
        /// Comma-separated radii; each level is the closed ball at 1.
        #[arg(long)]
        balls: Option<String>,
    },
    /// G_ρ, its definability defect, quotient orbits and the near-homogeneity defect.
    Catreport {
        #[arg(long)]
        structure: String,
        #[arg(long, value_parser = rational)]
        rho: Rational,
        /// Product length; defaults to the stabilization exponent.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = "0", value_parser = rational)]
        eps: Rational,
        /// Tuple length for the near-homogeneity defect.
        #[arg(long, default_value_t = 1)]
        arity: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        #[arg(long, default_value_t = 200)]
        limit: usize,
    },
    /// Realized types, ε-nets and the formula pseudometric.
    Types {
        #[arg(long)]
        structure: String,
        #[arg(long)]
        sort: Option<String>,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 500)]
        limit: usize,
        #[arg(long, value_parser = rational)]
        eps: Option<Rational>,
        /// Comma-separated labels; give twice to report their type distance.
        #[arg(long = "tuple")]
        tuples: Vec<String>,
        #[arg(long, requires = "psi")]
        phi: Option<String>,
        #[arg(long, requires = "phi")]
        psi: Option<String>,
    },
}

/// Result payload and whether a check failed.
pub struct Outcome {
    pub result: serde_json::Value,
    pub violation: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command: Vec<String> = std::env::args().skip(1).collect();
    let start = Instant::now();
    let mut inputs = InputLog::default();
    match commands::run(&cli, &mut inputs) {
        Ok(outcome) => {
            let report = Report {
                schema: SCHEMA.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command,
                inputs: inputs.finish(),
                result: outcome.result,
                timing: Timing {
                    elapsed_ms: (start.elapsed().as_secs_f64() * 1e3 * 1e3).round() / 1e3,
                },
            };
            let mut value = serde_json::to_value(&report).expect("report serializes");
            normalize_numbers(&mut value);
            let text = serde_json::to_string_pretty(&value).expect("report serializes");
            // a closed pipe downstream is not an error of ours
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            if outcome.violation {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
