//! Reward components for both roles and their weighted totals.

mod bleu;
mod cluster;

pub use bleu::{bleu_similarity, bleu_similarity_tokens, profile_bleu, profile_similarity, sentence_bleu, BleuProfile, MAX_ORDER};
pub use cluster::{cluster_by_bleu, diversity_reward, ClusterAssignment, UnionFind};

use std::fmt::Display;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{execute_all, hash_similarity, perceptual_hash, ExecAllError, ExecErrorKind, ExecLimits, PerceptualHash, RasterImage, DUPLICATE_SIMILARITY};
use crate::lang::{lex, parse_program_with, ParseError, ParseOptions, ParseReport, Program, TokenKind};
use crate::seed::fold;
use crate::synth::{grade_answer, GradeResult, VqaTask};

/// Default clustering threshold; shared with the queue's dedup threshold.
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lambda_format: f64,
    pub lambda_valid: f64,
    pub lambda_diff: f64,
    pub lambda_div: f64,
    pub omega_format: f64,
    pub omega_acc: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            lambda_format: 0.2,
            lambda_valid: 0.4,
            lambda_diff: 0.4,
            lambda_div: 0.3,
            omega_format: 0.2,
            omega_acc: 0.8,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        let all = [
            self.lambda_format,
            self.lambda_valid,
            self.lambda_diff,
            self.lambda_div,
            self.omega_format,
            self.omega_acc,
        ];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(RewardError::NegativeWeight)
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardError {
    #[error("reward weights must be finite and non-negative")]
    NegativeWeight,
    #[error("no questions to average over")]
    EmptyInput,
}

fn thinking() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)<thinking>.*?</thinking>").unwrap())
}

/// Body of the single fenced block outside `<thinking>` spans, if there is
/// exactly one.
pub fn extract_fenced(raw: &str) -> Option<String> {
    let text = thinking().replace_all(raw, "");
    let lines: Vec<&str> = text.lines().collect();
    let fences: Vec<usize> = (0..lines.len()).filter(|&i| lines[i].trim_start().starts_with("```")).collect();
    if fences.len() != 2 {
        return None;
    }
    Some(lines[fences[0] + 1..fences[1]].join("\n"))
}

/// 1 iff one fenced block is present and it contains no comment tokens.
pub fn challenger_format_reward(raw: &str) -> u8 {
    match extract_fenced(raw) {
        Some(body) if !lex(&body).iter().any(|t| t.kind == TokenKind::Comment) => 1,
        _ => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidityReason {
    FormatFailed,
    Parse,
    Exec,
    SizeBounds,
    DuplicateOutput,
}

/// `(valid, reasons)`. Outputs are checked against the side bounds and for
/// pairwise hash similarity above the duplicate threshold.
pub fn validity_reward(
    format_ok: bool,
    parse: Option<&ParseReport>,
    exec: Option<&Result<Vec<RasterImage>, ExecAllError>>,
    limits: &ExecLimits,
) -> (u8, Vec<ValidityReason>) {
    let mut reasons = Vec::new();
    if !format_ok {
        reasons.push(ValidityReason::FormatFailed);
    } else if !parse.is_some_and(ParseReport::is_ok) {
        reasons.push(ValidityReason::Parse);
    } else {
        match exec {
            None => reasons.push(ValidityReason::Exec),
            Some(Err(e)) => reasons.push(match e.error.kind {
                ExecErrorKind::SizeBounds { .. } => ValidityReason::SizeBounds,
                _ => ValidityReason::Exec,
            }),
            Some(Ok(outputs)) => {
                if outputs.iter().any(|o| !limits.side_ok(o)) {
                    reasons.push(ValidityReason::SizeBounds);
                }
                let hashes: Vec<PerceptualHash> = outputs.iter().map(perceptual_hash).collect();
                if has_duplicate(&hashes) {
                    reasons.push(ValidityReason::DuplicateOutput);
                }
            }
        }
    }
    (u8::from(reasons.is_empty()), reasons)
}

pub fn has_duplicate(hashes: &[PerceptualHash]) -> bool {
    (0..hashes.len()).any(|i| (i + 1..hashes.len()).any(|j| hash_similarity(hashes[i], hashes[j]) > DUPLICATE_SIMILARITY))
}

/// Everything learned from one raw challenger output on one image.
#[derive(Debug, Clone)]
pub struct ChallengerCheck {
    pub format: u8,
    pub valid: u8,
    pub reasons: Vec<ValidityReason>,
    pub body: Option<String>,
    pub program: Option<Program>,
    pub parse_errors: Vec<ParseError>,
    pub exec_error: Option<ExecAllError>,
    pub outputs: Vec<RasterImage>,
}

impl ChallengerCheck {
    /// Text used for diversity clustering: the fenced body when present.
    pub fn cluster_text<'a>(&'a self, raw: &'a str) -> &'a str {
        self.body.as_deref().unwrap_or(raw)
    }
}

pub fn check_challenger_output(raw: &str, input: &RasterImage, limits: &ExecLimits, parse_opts: &ParseOptions) -> ChallengerCheck {
    let body = extract_fenced(raw);
    let format = challenger_format_reward(raw);
    let parse = (format == 1).then(|| parse_program_with(body.as_deref().unwrap_or(""), parse_opts));
    let exec = parse.as_ref().and_then(ParseReport::program).map(|p| execute_all(p, input, limits));
    let (valid, reasons) = validity_reward(format == 1, parse.as_ref(), exec.as_ref(), limits);
    let (program, parse_errors) = match parse.map(ParseReport::into_result) {
        Some(Ok(p)) => (Some(p), Vec::new()),
        Some(Err(e)) => (None, e),
        None => (None, Vec::new()),
    };
    let (outputs, exec_error) = match exec {
        Some(Ok(o)) => (o, None),
        Some(Err(e)) => (Vec::new(), Some(e)),
        None => (Vec::new(), None),
    };
    ChallengerCheck {
        format,
        valid,
        reasons,
        body,
        program,
        parse_errors,
        exec_error,
        outputs,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimate {
    pub correct_count: usize,
    pub k: usize,
    pub acc: f64,
    pub grades: Vec<GradeResult>,
    /// Samples whose policy call failed after retries; graded incorrect.
    pub failures: usize,
}

impl AccuracyEstimate {
    pub fn from_grades(grades: Vec<GradeResult>, failures: usize) -> Self {
        let k = grades.len();
        let correct_count = grades.iter().filter(|g| g.correct).count();
        Self {
            correct_count,
            k,
            acc: if k == 0 { 0.0 } else { correct_count as f64 / k as f64 },
            grades,
            failures,
        }
    }
}

/// Seed of solver sample `k` for a task seeded with `seed`.
pub fn sample_seed(seed: u64, k: usize, attempt: usize) -> u64 {
    let s = fold(seed, k as u64);
    if attempt == 0 {
        s
    } else {
        fold(s, 0x5245_5452_5900 + attempt as u64)
    }
}

/// Draws `k` solver answers via `sample(k_index, seed)` and grades them.
/// A sample that still fails after `retries` extra attempts is counted as
/// incorrect.
pub fn estimate_accuracy<F, E>(task: &VqaTask, k: usize, retries: usize, seed: u64, mut sample: F) -> AccuracyEstimate
where
    F: FnMut(usize, u64) -> Result<String, E>,
    E: Display,
{
    let mut grades = Vec::with_capacity(k);
    let mut failures = 0;
    for i in 0..k {
        let mut answer = None;
        for attempt in 0..=retries {
            match sample(i, sample_seed(seed, i, attempt)) {
                Ok(text) => {
                    answer = Some(text);
                    break;
                }
                Err(e) => log::warn!("solver sample {i} attempt {attempt} failed: {e}"),
            }
        }
        grades.push(match answer {
            Some(text) => grade_answer(task, &text),
            None => {
                failures += 1;
                GradeResult {
                    formatted: false,
                    extracted: None,
                    correct: false,
                }
            }
        });
    }
    AccuracyEstimate::from_grades(grades, failures)
}

/// `1 - 2|acc - 0.5|`, peaking at 0.5.
pub fn difficulty_reward(acc: f64) -> f64 {
    1.0 - 2.0 * (acc - 0.5).abs()
}

/// Mean difficulty reward over a program's questions.
pub fn program_difficulty(estimates: &[AccuracyEstimate]) -> Result<f64, RewardError> {
    if estimates.is_empty() {
        return Err(RewardError::EmptyInput);
    }
    Ok(estimates.iter().map(|e| difficulty_reward(e.acc)).sum::<f64>() / estimates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChallengerComponents {
    pub format: f64,
    pub valid: f64,
    pub diff: f64,
    pub div: f64,
}

pub fn challenger_total(c: &ChallengerComponents, w: &RewardWeights) -> f64 {
    w.lambda_format * c.format + w.lambda_valid * c.valid + w.lambda_diff * c.diff + w.lambda_div * c.div
}

pub fn solver_total(format: f64, acc: f64, w: &RewardWeights) -> f64 {
    w.omega_format * format + w.omega_acc * acc
}

/// One challenger rollout's reward record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChallengerBreakdown {
    pub components: ChallengerComponents,
    pub reasons: Vec<ValidityReason>,
    pub total: f64,
}

/// Per-sample inputs for a challenger group on one image.
#[derive(Debug, Clone)]
pub struct ChallengerSample<'a> {
    pub format: u8,
    pub valid: u8,
    pub reasons: Vec<ValidityReason>,
    /// Mean difficulty; ignored (zero) for invalid samples.
    pub diff: f64,
    pub text: &'a str,
}

/// Rewards for a rollout group: every sample, valid or not, takes part in
/// the diversity clustering.
pub fn challenger_group_rewards(samples: &[ChallengerSample<'_>], weights: &RewardWeights, threshold: f64) -> (ClusterAssignment, Vec<ChallengerBreakdown>) {
    let texts: Vec<&str> = samples.iter().map(|s| s.text).collect();
    let clusters = cluster_by_bleu(&texts, threshold);
    let div = diversity_reward(&clusters.densities);
    let out = samples
        .iter()
        .zip(div)
        .map(|(s, div)| {
            let components = ChallengerComponents {
                format: f64::from(s.format),
                valid: f64::from(s.valid),
                diff: if s.valid == 1 { s.diff } else { 0.0 },
                div,
            };
            ChallengerBreakdown {
                total: challenger_total(&components, weights),
                components,
                reasons: s.reasons.clone(),
            }
        })
        .collect();
    (clusters, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverBreakdown {
    pub format: f64,
    pub acc: f64,
    pub total: f64,
}

pub fn solver_breakdown(grade: &GradeResult, w: &RewardWeights) -> SolverBreakdown {
    let format = f64::from(u8::from(grade.formatted));
    let acc = f64::from(u8::from(grade.correct));
    SolverBreakdown {
        format,
        acc,
        total: solver_total(format, acc, w),
    }
}
