//! Prompt construction and reply parsing.

use yearsense::{Condition, Error, Result};

pub const PLACEHOLDER_A: &str = "{A}";
pub const PLACEHOLDER_B: &str = "{B}";
/// Optional; replaced by "years" or "numbers".
pub const PLACEHOLDER_KIND: &str = "{kind}";

pub const DEFAULT_TEMPLATE: &str = "On a scale from 0 (completely dissimilar) to 1 (most similar), \
how similar are the {kind} {A} and {B}? Respond with a single number between 0 and 1.";

pub fn kind_word(condition: Condition) -> &'static str {
    match condition {
        Condition::Year => "years",
        Condition::Number => "numbers",
    }
}

/// Substitutes the pair into `template`. Both `{A}` and `{B}` must appear.
pub fn build_prompt(template: &str, i: i32, j: i32, condition: Condition) -> Result<String> {
    check_template(template)?;
    Ok(template
        .replace(PLACEHOLDER_KIND, kind_word(condition))
        .replace(PLACEHOLDER_A, &i.to_string())
        .replace(PLACEHOLDER_B, &j.to_string()))
}

pub fn check_template(template: &str) -> Result<()> {
    for p in [PLACEHOLDER_A, PLACEHOLDER_B] {
        if !template.contains(p) {
            return Err(Error::Config(format!("prompt template lacks the {p} placeholder")));
        }
    }
    Ok(())
}

/// First decimal literal in the text that lies in [0, 1]. Literals outside
/// the range are skipped, never clamped. A leading minus counts only when it
/// is not glued to a preceding word character (so "1-0" reads as 1).
pub fn parse_rating(text: &str) -> Option<f64> {
    let b = text.as_bytes();
    let mut k = 0;
    while k < b.len() {
        let starts_number = b[k].is_ascii_digit()
            || (b[k] == b'.' && b.get(k + 1).is_some_and(u8::is_ascii_digit));
        if !starts_number {
            k += 1;
            continue;
        }
        // digits glued to letters (e.g. "gpt4") are not ratings
        let glued = k > 0 && (b[k - 1].is_ascii_alphabetic() || b[k - 1] == b'_');
        let negative = k > 0
            && b[k - 1] == b'-'
            && (k < 2 || !(b[k - 2].is_ascii_alphanumeric() || b[k - 2] == b'.'));
        let start = k;
        while k < b.len() && b[k].is_ascii_digit() {
            k += 1;
        }
        if k < b.len() && b[k] == b'.' && b.get(k + 1).is_some_and(u8::is_ascii_digit) {
            k += 1;
            while k < b.len() && b[k].is_ascii_digit() {
                k += 1;
            }
        }
        if glued {
            continue;
        }
        let Ok(v) = text[start..k].parse::<f64>() else {
            continue;
        };
        let v = if negative { -v } else { v };
        if (0.0..=1.0).contains(&v) {
            return Some(v);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_examples() {
        let p = build_prompt(DEFAULT_TEMPLATE, 1900, 2000, Condition::Year).unwrap();
        assert!(p.contains("1900") && p.contains("2000") && p.contains("years"));
        assert!(p.contains("0 (completely dissimilar)") && p.contains("1 (most similar)"));
        let q = build_prompt(DEFAULT_TEMPLATE, 1900, 2000, Condition::Number).unwrap();
        assert!(q.contains("numbers") && !q.contains("years"));
        assert_eq!(build_prompt("{A}|{B}", 1, 2, Condition::Year).unwrap(), "1|2");
        assert!(matches!(build_prompt("{A} only", 1, 2, Condition::Year), Err(Error::Config(_))));
    }

    #[test]
    fn swap_changes_only_slots() {
        let a = build_prompt(DEFAULT_TEMPLATE, 1901, 2002, Condition::Year).unwrap();
        let b = build_prompt(DEFAULT_TEMPLATE, 2002, 1901, Condition::Year).unwrap();
        assert_eq!(a.replace("1901", "X").replace("2002", "Y"), b.replace("2002", "X").replace("1901", "Y"));
    }

    #[test]
    fn rating_examples() {
        assert_eq!(parse_rating("0.85"), Some(0.85));
        assert_eq!(parse_rating("Similarity: 0.2 (low)"), Some(0.2));
        assert_eq!(parse_rating("about 12"), None);
        assert_eq!(parse_rating("1"), Some(1.0));
        assert_eq!(parse_rating("0"), Some(0.0));
        assert_eq!(parse_rating(".5"), Some(0.5));
        assert_eq!(parse_rating("1.5 or rather 0.7"), Some(0.7));
        assert_eq!(parse_rating("-0.3"), None);
        assert_eq!(parse_rating("as gpt4 I say 0.4"), Some(0.4));
        assert_eq!(parse_rating("no idea"), None);
    }
}
