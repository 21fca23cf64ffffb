//! The moment problem file: `{"degree": 2d, "moments": [{"i", "j", "value"}]}`.
//!
//! Values are integers, `"num/den"` strings or decimal strings (optionally
//! with an exponent); decimals are converted exactly.

use std::fmt;

use moment_extend::moment::{MomentError, MomentSequence};
use moment_extend::Rat;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProblemFile {
    pub degree: u32,
    pub moments: Vec<(u32, u32, Rat)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    /// Malformed JSON, with position.
    Syntax { line: usize, column: usize, message: String },
    /// Well-formed JSON with an invalid field.
    Field { path: String, message: String },
    /// Valid entries that do not form a complete sequence.
    Moments(MomentError),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { line, column, message } => {
                write!(f, "line {line}, column {column}: {message}")
            }
            ParseError::Field { path, message } => write!(f, "{path}: {message}"),
            ParseError::Moments(e) => write!(f, "moments: {e}"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    degree: Value,
    moments: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    i: Value,
    j: Value,
    value: Value,
}

#[derive(Serialize)]
struct OutFile<'a> {
    degree: u32,
    moments: Vec<OutEntry<'a>>,
}

#[derive(Serialize)]
struct OutEntry<'a> {
    i: u32,
    j: u32,
    value: &'a str,
}

fn field(path: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError::Field {
        path: path.into(),
        message: message.into(),
    }
}

fn index(v: &Value, path: String) -> Result<u32, ParseError> {
    v.as_u64()
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| field(path, format!("expected a non-negative integer, got {v}")))
}

/// Exact rational from `"-12"`, `"3/4"`, `"0.125"` or `"1.5e-3"`.
pub fn parse_rational(s: &str) -> Result<Rat, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| format!("invalid numerator in '{s}'"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("invalid denominator in '{s}'"))?;
        if d.is_zero() {
            return Err(format!("zero denominator in '{s}'"));
        }
        return Ok(Rat::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(k) => {
            let e: i64 = s[k + 1..].parse().map_err(|_| format!("invalid exponent in '{s}'"))?;
            (&s[..k], e)
        }
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(format!("invalid number '{s}'"));
    }
    if exp.unsigned_abs() > 10_000 {
        return Err(format!("exponent out of range in '{s}'"));
    }
    let all: BigInt = format!("{int}{frac}").parse().map_err(|_| format!("invalid number '{s}'"))?;
    let scale = exp - frac.len() as i64;
    let ten = BigInt::from(10u32);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    let mut r = if scale >= 0 {
        Rat::from_integer(all * pow)
    } else {
        Rat::new(all, pow)
    };
    if neg {
        r = -r;
    }
    Ok(r)
}

/// `"n"` for integers, `"n/d"` otherwise.
pub fn format_rational(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn value_of(v: &Value, path: String) -> Result<Rat, ParseError> {
    match v {
        Value::String(s) => parse_rational(s).map_err(|m| field(path, m)),
        // Requires `arbitrary_precision`, so the literal is kept verbatim.
        Value::Number(n) => parse_rational(&n.to_string()).map_err(|m| field(path, m)),
        other => Err(field(path, format!("expected a number or string, got {other}"))),
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<ProblemFile, ParseError> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let degree = index(&raw.degree, "degree".into())?;
        let mut moments = Vec::with_capacity(raw.moments.len());
        for (k, e) in raw.moments.iter().enumerate() {
            let i = index(&e.i, format!("moments[{k}].i"))?;
            let j = index(&e.j, format!("moments[{k}].j"))?;
            let value = value_of(&e.value, format!("moments[{k}].value"))?;
            moments.push((i, j, value));
        }
        let file = ProblemFile { degree, moments };
        file.sequence()?;
        Ok(file)
    }

    pub fn sequence(&self) -> Result<MomentSequence, ParseError> {
        MomentSequence::from_triples(self.degree, self.moments.iter().cloned()).map_err(ParseError::Moments)
    }

    pub fn from_sequence(beta: &MomentSequence) -> ProblemFile {
        ProblemFile {
            degree: beta.degree(),
            moments: beta.iter().map(|(m, v)| (m.i, m.j, v.clone())).collect(),
        }
    }

    pub fn emit(&self) -> String {
        let values: Vec<String> = self.moments.iter().map(|(_, _, v)| format_rational(v)).collect();
        let out = OutFile {
            degree: self.degree,
            moments: self
                .moments
                .iter()
                .zip(&values)
                .map(|((i, j, _), v)| OutEntry { i: *i, j: *j, value: v })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&out).expect("serializable");
        s.push('\n');
        s
    }
}
