//! Theoretical distances between years.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REFERENCE: i32 = 2025;

/// `|ln i - ln j|`.
pub fn d_log(i: i32, j: i32) -> Result<f64> {
    if i <= 0 || j <= 0 {
        return Err(Error::domain(format!(
            "log-linear distance needs positive years, got ({i}, {j})"
        )));
    }
    Ok((f64::from(i).ln() - f64::from(j).ln()).abs())
}

/// Edit distance between the plain decimal renderings of two years.
pub fn d_lev(i: i32, j: i32) -> usize {
    levenshtein(i.to_string().as_bytes(), j.to_string().as_bytes())
}

/// Unit-cost Levenshtein distance over bytes, two-row formulation.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (r, &ca) in a.iter().enumerate() {
        cur[0] = r + 1;
        for (c, &cb) in b.iter().enumerate() {
            let sub = prev[c] + usize::from(ca != cb);
            cur[c + 1] = sub.min(prev[c + 1] + 1).min(cur[c] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Side of the reference a year falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Past,
    At,
    Future,
}

fn side(x: i32, reference: i32) -> Side {
    match x.cmp(&reference) {
        std::cmp::Ordering::Less => Side::Past,
        std::cmp::Ordering::Equal => Side::At,
        std::cmp::Ordering::Greater => Side::Future,
    }
}

/// `ln max(|R - x|, 1)`.
pub fn log_offset(x: i32, reference: i32) -> f64 {
    let gap = (i64::from(reference) - i64::from(x)).abs().max(1);
    (gap as f64).ln()
}

/// Reference-log-linear distance: log offsets from `reference` subtract when
/// both years sit on the same side and add across it. `|R - x|` is clamped
/// to 1, and `x == R` counts as the same side as the other year.
pub fn d_ref(i: i32, j: i32, reference: i32) -> f64 {
    let li = log_offset(i, reference);
    let lj = log_offset(j, reference);
    let opposite = matches!(
        (side(i, reference), side(j, reference)),
        (Side::Past, Side::Future) | (Side::Future, Side::Past)
    );
    if opposite {
        li + lj
    } else {
        (li - lj).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TheoreticalMetric {
    LogLinear,
    Levenshtein,
    ReferenceLogLinear { reference: i32 },
}

impl TheoreticalMetric {
    pub fn reference_default() -> Self {
        TheoreticalMetric::ReferenceLogLinear {
            reference: DEFAULT_REFERENCE,
        }
    }

    /// The three metrics in tie-break order.
    pub fn all(reference: i32) -> [TheoreticalMetric; 3] {
        [
            TheoreticalMetric::LogLinear,
            TheoreticalMetric::Levenshtein,
            TheoreticalMetric::ReferenceLogLinear { reference },
        ]
    }

    pub fn eval(&self, i: i32, j: i32) -> Result<f64> {
        match *self {
            TheoreticalMetric::LogLinear => d_log(i, j),
            TheoreticalMetric::Levenshtein => Ok(d_lev(i, j) as f64),
            TheoreticalMetric::ReferenceLogLinear { reference } => Ok(d_ref(i, j, reference)),
        }
    }

    /// Position in the fixed tie-break order (log, lev, ref).
    pub fn rank(&self) -> u8 {
        match self {
            TheoreticalMetric::LogLinear => 0,
            TheoreticalMetric::Levenshtein => 1,
            TheoreticalMetric::ReferenceLogLinear { .. } => 2,
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            TheoreticalMetric::LogLinear => "log",
            TheoreticalMetric::Levenshtein => "lev",
            TheoreticalMetric::ReferenceLogLinear { .. } => "ref",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TheoreticalMetric::LogLinear => "log-linear",
            TheoreticalMetric::Levenshtein => "levenshtein",
            TheoreticalMetric::ReferenceLogLinear { .. } => "reference-log-linear",
        }
    }

    /// Parses `log`, `lev`, `ref` or `all` into metrics.
    pub fn parse_list(spec: &str, reference: i32) -> Result<Vec<TheoreticalMetric>> {
        let mut out = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Self::all(reference)),
                "log" | "log-linear" => out.push(TheoreticalMetric::LogLinear),
                "lev" | "levenshtein" => out.push(TheoreticalMetric::Levenshtein),
                "ref" | "reference-log-linear" => {
                    out.push(TheoreticalMetric::ReferenceLogLinear { reference })
                }
                other => return Err(Error::Config(format!("unknown metric {other:?}"))),
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no metrics selected".into()));
        }
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for TheoreticalMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoreticalMetric::ReferenceLogLinear { reference } => {
                write!(f, "reference-log-linear(R={reference})")
            }
            other => f.write_str(other.label()),
        }
    }
}

impl FromStr for TheoreticalMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let list = Self::parse_list(s, DEFAULT_REFERENCE)?;
        match list.as_slice() {
            [one] => Ok(*one),
            _ => Err(Error::Config(format!("expected a single metric, got {s:?}"))),
        }
    }
}
