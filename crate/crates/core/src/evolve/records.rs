//! Run-log records and JSON-lines helpers.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::EvolveError;
use crate::queue::InsertOutcome;
use crate::reward::{AccuracyEstimate, ChallengerComponents, SolverBreakdown, ValidityReason};
use crate::synth::{GradeResult, VqaTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub iteration: usize,
    pub step: usize,
    pub rollout: usize,
    pub task: VqaTask,
    pub estimate: AccuracyEstimate,
    /// Raw solver answers behind `estimate`; `None` where every attempt failed.
    pub responses: Vec<Option<String>>,
    pub r_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub rollout: usize,
    pub group: usize,
    pub image: String,
    /// Insertion counters of the queue examples shown.
    pub examples: Vec<u64>,
    pub response: String,
    pub policy_error: Option<String>,
    pub format: u8,
    pub valid: u8,
    pub reasons: Vec<ValidityReason>,
    pub parse_errors: Vec<String>,
    pub exec_error: Option<String>,
    pub program: Option<String>,
    pub outputs: Vec<String>,
    pub questions: Vec<QuestionRecord>,
    pub r_diff: f64,
    pub queue: Option<InsertOutcome>,
    pub cluster: usize,
    pub components: ChallengerComponents,
    pub total: f64,
    pub advantage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub step: usize,
    pub queue_size: usize,
    pub rollouts: Vec<RolloutRecord>,
}

/// Line of `rewards.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    pub sample_id: String,
    pub components: ChallengerComponents,
    pub reasons: Vec<ValidityReason>,
    pub total: f64,
    pub advantage: f64,
}

/// Line of `questions.jsonl` (retained) or `discarded.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankRecord {
    pub rank: usize,
    pub question: QuestionRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub question: String,
    pub batch: usize,
    pub responses: Vec<String>,
    pub grades: Vec<GradeResult>,
    pub rewards: Vec<SolverBreakdown>,
    pub advantages: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanComponents {
    pub format: f64,
    pub valid: f64,
    pub diff: f64,
    pub div: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub rollouts: usize,
    pub valid_programs: usize,
    pub questions: usize,
    pub retained: usize,
    pub retained_mean_acc: Option<f64>,
    pub retained_mean_r_diff: Option<f64>,
    pub challenger: MeanComponents,
    pub reason_counts: Vec<(ValidityReason, usize)>,
    pub queue_size: usize,
    pub mean_pairwise_bleu_distance: f64,
    pub solver_mean_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: Vec<IterationReport>,
}

pub fn iter_dir(run: &Path, iteration: usize) -> PathBuf {
    run.join(format!("iter_{iteration}"))
}

pub fn to_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("records serialize")
}

pub fn append_line<T: Serialize>(path: &Path, v: &T) -> Result<(), EvolveError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| EvolveError::io(path, e))?;
    writeln!(f, "{}", to_line(v)).map_err(|e| EvolveError::io(path, e))
}

pub fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvolveError> {
    let mut s = String::new();
    for i in items {
        s.push_str(&to_line(i));
        s.push('\n');
    }
    write_atomic(path, s.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EvolveError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| EvolveError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| EvolveError::io(path, e))
}

/// Complete lines only; a torn final line (no newline) is ignored.
pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EvolveError> {
    let f = File::open(path).map_err(|e| EvolveError::MissingLogs(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    let mut reader = BufReader::new(f);
    let mut line = String::new();
    let mut n = 0;
    loop {
        line.clear();
        let read = reader.read_line(&mut line).map_err(|e| EvolveError::io(path, e))?;
        if read == 0 || !line.ends_with('\n') {
            break;
        }
        n += 1;
        out.push(serde_json::from_str(line.trim_end()).map_err(|e| EvolveError::Corrupt(format!("{}:{n}: {e}", path.display())))?);
    }
    Ok(out)
}

/// Rewrites `path` keeping only its first `keep` complete lines.
pub fn truncate_lines(path: &Path, keep: usize) -> Result<(), EvolveError> {
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(path).map_err(|e| EvolveError::io(path, e))?;
    let kept: String = text.split_inclusive('\n').filter(|l| l.ends_with('\n')).take(keep).collect();
    write_atomic(path, kept.as_bytes())
}
