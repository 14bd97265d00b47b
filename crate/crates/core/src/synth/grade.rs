use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::VqaTask;

pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeResult {
    pub formatted: bool,
    pub extracted: Option<char>,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradeOptions {
    /// Accept a bare trailing option letter when no boxed answer parses.
    pub trailing_letter_fallback: bool,
}

impl Default for GradeOptions {
    fn default() -> Self {
        Self {
            trailing_letter_fallback: true,
        }
    }
}

fn boxed() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\\+boxed\{([^{}]*)\}").unwrap())
}

fn parse_letter(text: &str, n: usize) -> Option<char> {
    let t = text.trim();
    let t = t.trim_end_matches(['.', ')']).trim_start_matches('(');
    let mut chars = t.chars();
    let c = chars.next()?.to_ascii_uppercase();
    if chars.next().is_some() {
        return None;
    }
    ('A'..).take(n).find(|&l| l == c)
}

fn trailing_letter(response: &str, n: usize) -> Option<char> {
    let t = response.trim_end().trim_end_matches(['.', ')', '*', '"', '\'']);
    let last = t.chars().last()?;
    let before = t[..t.len() - last.len_utf8()].chars().last();
    if !last.is_ascii_uppercase() || before.is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '\\') {
        return None;
    }
    parse_letter(&last.to_string(), n)
}

pub fn grade_answer(task: &VqaTask, response: &str) -> GradeResult {
    grade_answer_with(task, response, &GradeOptions::default())
}

/// `formatted` iff exactly one boxed token parses to a valid letter; the
/// answer is the last boxed token, else (optionally) a trailing letter.
pub fn grade_answer_with(task: &VqaTask, response: &str, opts: &GradeOptions) -> GradeResult {
    let n = task.n();
    let tokens: Vec<&str> = boxed().captures_iter(response).map(|c| c.get(1).unwrap().as_str()).collect();
    let formatted = tokens.len() == 1 && parse_letter(tokens[0], n).is_some();
    let mut extracted = tokens.last().and_then(|t| parse_letter(t, n));
    if extracted.is_none() && opts.trailing_letter_fallback {
        extracted = trailing_letter(response, n);
    }
    let correct = extracted == Some(task.correct_letter());
    GradeResult {
        formatted,
        extracted,
        correct,
    }
}
