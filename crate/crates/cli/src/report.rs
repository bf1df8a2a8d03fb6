//! The JSON report envelope and its number formatting.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "contilog-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub version: String,
    pub command: Vec<String>,
    pub inputs: Inputs,
    pub result: Value,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    /// Hex SHA-256 over every input file, in the order read.
    pub sha256: String,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

/// Collects the files a command reads so the report can digest them.
#[derive(Default)]
pub struct InputLog {
    hasher: Sha256,
    files: Vec<String>,
}

impl InputLog {
    pub fn read(&mut self, path: &str) -> Result<String, contilog::Error> {
        let text = std::fs::read_to_string(path).map_err(|e| contilog::Error::Input(format!("{path}: {e}")))?;
        self.hasher.update(path.as_bytes());
        self.hasher.update([0]);
        self.hasher.update((text.len() as u64).to_le_bytes());
        self.hasher.update(text.as_bytes());
        self.files.push(path.to_string());
        Ok(text)
    }

    pub fn finish(self) -> Inputs {
        Inputs {
            sha256: format!("{:x}", self.hasher.finalize()),
            files: self.files,
        }
    }
}

/// `x` with 17 significant digits; plain decimal for exponents in `-4..=16`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    if !(-4..=16).contains(&exp) {
        let m = trim_fraction(&format!("{}.{}", &digits[..1], &digits[1..]));
        return format!("{sign}{m}e{exp}");
    }
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else {
        let point = exp as usize + 1;
        format!("{}.{}", &digits[..point], &digits[point..])
    };
    format!("{sign}{}", trim_fraction(&body))
}

fn trim_fraction(s: &str) -> String {
    let t = s.trim_end_matches('0');
    if t.ends_with('.') {
        format!("{t}0")
    } else {
        t.to_string()
    }
}

/// Rewrites every non-integer number in `v` via [`format_f64`].
pub fn normalize_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            if let Some(x) = n.as_f64() {
                *n = Number::from_str(&format_f64(x)).expect("valid number");
            }
        }
        Value::Array(items) => items.iter_mut().for_each(normalize_numbers),
        Value::Object(map) => map.values_mut().for_each(normalize_numbers),
        _ => {}
    }
}
