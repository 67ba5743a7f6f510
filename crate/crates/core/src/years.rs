//! Year stimuli and pair enumeration.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive range of calendar years used as stimuli.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearRange {
    start: i32,
    end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(Error::Config(format!(
                "year range start {start} exceeds end {end}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> i32 {
        self.start
    }

    pub fn end(&self) -> i32 {
        self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + Clone {
        self.start..=self.end
    }

    pub fn index_of(&self, year: i32) -> Option<usize> {
        self.contains(year).then(|| (year - self.start) as usize)
    }

    pub fn year_at(&self, index: usize) -> Option<i32> {
        (index < self.len()).then(|| self.start + index as i32)
    }
}

impl Default for YearRange {
    /// The 1000-year grid 1525..=2524.
    fn default() -> Self {
        Self {
            start: 1525,
            end: 2524,
        }
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

impl FromStr for YearRange {
    type Err = Error;

    /// Parses `START:END`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("expected START:END, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|e| Error::Config(format!("bad year {v:?}: {e}")))
        };
        YearRange::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairMode {
    /// Every ordered pair (i, j), both orders included.
    Full,
    /// Pairs with i <= j, diagonal included.
    Upper,
}

impl fmt::Display for PairMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairMode::Full => "full",
            PairMode::Upper => "upper",
        })
    }
}

impl FromStr for PairMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(PairMode::Full),
            "upper" | "upper-triangle" | "uppertriangle" => Ok(PairMode::Upper),
            other => Err(Error::Config(format!("unknown pair mode {other:?}"))),
        }
    }
}

/// Ordered list of year pairs, lexicographic in (i, j).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    range: YearRange,
    mode: PairMode,
    pairs: Vec<(i32, i32)>,
}

impl PairSet {
    pub fn enumerate(range: YearRange, mode: PairMode) -> Self {
        let n = range.len();
        let capacity = match mode {
            PairMode::Full => n * n,
            PairMode::Upper => n * (n + 1) / 2,
        };
        let mut pairs = Vec::with_capacity(capacity);
        for i in range.years() {
            let first_j = match mode {
                PairMode::Full => range.start(),
                PairMode::Upper => i,
            };
            pairs.extend((first_j..=range.end()).map(|j| (i, j)));
        }
        Self { range, mode, pairs }
    }

    pub fn range(&self) -> YearRange {
        self.range
    }

    pub fn mode(&self) -> PairMode {
        self.mode
    }

    pub fn pairs(&self) -> &[(i32, i32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<(i32, i32)> {
        self.pairs.get(index).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        self.pairs.iter().copied()
    }

    /// Position of `(i, j)` in this set, computed arithmetically.
    pub fn index_of(&self, i: i32, j: i32) -> Option<usize> {
        let a = self.range.index_of(i)?;
        let b = self.range.index_of(j)?;
        let n = self.range.len();
        match self.mode {
            PairMode::Full => Some(a * n + b),
            PairMode::Upper if a <= b => {
                // rows before `a` hold n, n-1, ..., n-a+1 pairs
                Some(a * n - a * (a.saturating_sub(1)) / 2 + (b - a))
            }
            PairMode::Upper => None,
        }
    }

    /// Deterministic subsample of `k` pair indices, stratified by the first
    /// year so every row keeps its proportional share. Indices are returned
    /// in ascending order.
    pub fn stratified_sample(&self, k: usize, seed: u64) -> Vec<usize> {
        if k >= self.len() {
            return (0..self.len()).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = self.len() as f64;
        let mut out = Vec::with_capacity(k);
        let mut row_start = 0usize;
        let mut carried = 0.0f64;
        while row_start < self.len() {
            let row_year = self.pairs[row_start].0;
            let row_len = self.pairs[row_start..]
                .iter()
                .take_while(|p| p.0 == row_year)
                .count();
            // carry the fractional quota forward so the total stays exactly k
            let quota = k as f64 * row_len as f64 / total + carried;
            let take = (quota.floor() as usize).min(row_len);
            carried = quota - take as f64;
            let mut idx: Vec<usize> = (row_start..row_start + row_len).collect();
            idx.shuffle(&mut rng);
            out.extend_from_slice(&idx[..take]);
            row_start += row_len;
        }
        // rounding can leave us one short
        if out.len() < k {
            let taken: std::collections::HashSet<usize> = out.iter().copied().collect();
            let mut rest: Vec<usize> = (0..self.len()).filter(|i| !taken.contains(i)).collect();
            rest.shuffle(&mut rng);
            out.extend(rest.into_iter().take(k - out.len()));
        }
        out.sort_unstable();
        out
    }
}

/// Task condition: years, or the numerical control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Year,
    Number,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Year => "year",
            Condition::Number => "number",
        }
    }

    pub fn stimulus_prefix(&self) -> &'static str {
        match self {
            Condition::Year => "Year",
            Condition::Number => "Number",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "year" | "temporal" => Ok(Condition::Year),
            "number" | "numerical" => Ok(Condition::Number),
            other => Err(Error::Config(format!("unknown condition {other:?}"))),
        }
    }
}

/// Template for single-stimulus inputs.
///
/// Placeholders: `{prefix}` (`Year` / `Number`), `{digits}` (decimal digits
/// joined by `-`), `{year}` (plain decimal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusTemplate(pub String);

impl Default for StimulusTemplate {
    fn default() -> Self {
        StimulusTemplate("{prefix}: {digits}".to_string())
    }
}

pub fn hyphenated_digits(year: i32) -> String {
    let digits = year.unsigned_abs().to_string();
    let mut out = String::with_capacity(digits.len() * 2 + 1);
    if year < 0 {
        out.push('-');
    }
    for (k, ch) in digits.chars().enumerate() {
        if k > 0 {
            out.push('-');
        }
        out.push(ch);
    }
    out
}

pub fn render_stimulus(year: i32, condition: Condition, template: &StimulusTemplate) -> String {
    template
        .0
        .replace("{prefix}", condition.stimulus_prefix())
        .replace("{digits}", &hyphenated_digits(year))
        .replace("{year}", &year.to_string())
}
