//! Offline passes over a run directory: report, diversity, answer-key
//! re-verification and reward recomputation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::LoopConfig;
use super::records::*;
use super::EvolveError;
use crate::image::{content_digest, execute_all, hash_similarity, perceptual_hash, ImageStore, DUPLICATE_SIMILARITY};
use crate::lang::{parse_program_with, render_param_set};
use crate::queue::ExampleQueue;
use crate::reward::{
    challenger_group_rewards, check_challenger_output, difficulty_reward, profile_similarity, program_difficulty, AccuracyEstimate, BleuProfile,
    ChallengerComponents, ChallengerSample, ValidityReason,
};
use crate::rlmath::{group_advantages, DEFAULT_EPS_STD};
use crate::synth::{grade_answer, GradeResult, TaskKind, VqaTask};

const TOL: f64 = 1e-12;

/// Mean of `1 - bleu_similarity` over unordered pairs; 0 with fewer than two.
pub fn mean_pairwise_distance(programs: &[String]) -> f64 {
    let n = programs.len();
    if n < 2 {
        return 0.0;
    }
    let profiles: Vec<BleuProfile> = programs.iter().map(|p| BleuProfile::from_source(p)).collect();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += 1.0 - profile_similarity(&profiles[i], &profiles[j]);
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

/// Iterations `1..` that have a step log.
fn iterations(run: &Path) -> Vec<usize> {
    (1..).take_while(|&t| iter_dir(run, t).join("steps.jsonl").exists()).collect()
}

fn valid_programs(steps: &[StepRecord]) -> Vec<String> {
    steps.iter().flat_map(|s| &s.rollouts).filter(|r| r.valid == 1).filter_map(|r| r.program.clone()).collect()
}

/// Per-iteration mean pairwise BLEU distance between the valid programs
/// generated in that iteration.
pub fn analyze_diversity(run: &Path) -> Result<Vec<f64>, EvolveError> {
    let its = iterations(run);
    if its.is_empty() {
        return Err(EvolveError::MissingLogs(format!("{}: no iteration step logs", run.display())));
    }
    its.into_iter()
        .map(|t| Ok(mean_pairwise_distance(&valid_programs(&read_lines(&iter_dir(run, t).join("steps.jsonl"))?))))
        .collect()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Aggregates for every iteration whose bank has been written.
pub fn build_report(run: &Path) -> Result<RunReport, EvolveError> {
    let mut out = Vec::new();
    for t in iterations(run) {
        let idir = iter_dir(run, t);
        if !idir.join("questions.jsonl").exists() {
            break;
        }
        let steps: Vec<StepRecord> = read_lines(&idir.join("steps.jsonl"))?;
        let retained: Vec<BankRecord> = read_lines(&idir.join("questions.jsonl"))?;
        let rollouts: Vec<&RolloutRecord> = steps.iter().flat_map(|s| &s.rollouts).collect();
        let mut reasons: Vec<(ValidityReason, usize)> = Vec::new();
        for reason in rollouts.iter().flat_map(|r| &r.reasons) {
            match reasons.iter_mut().find(|(x, _)| x == reason) {
                Some((_, n)) => *n += 1,
                None => reasons.push((*reason, 1)),
            }
        }
        let m = |f: &dyn Fn(&RolloutRecord) -> f64| mean(rollouts.iter().map(|r| f(r))).unwrap_or(0.0);
        let queue_path = idir.join("queue.jsonl");
        let queue_size = if queue_path.exists() {
            let text = std::fs::read_to_string(&queue_path).map_err(|e| EvolveError::io(&queue_path, e))?;
            ExampleQueue::restore(&text)?.len()
        } else {
            steps.last().map_or(0, |s| s.queue_size)
        };
        let solver_path = idir.join("solver.jsonl");
        let solver_mean_reward = if solver_path.exists() {
            let recs: Vec<SolverRecord> = read_lines(&solver_path)?;
            mean(recs.iter().flat_map(|r| r.rewards.iter().map(|x| x.total)))
        } else {
            None
        };
        out.push(IterationReport {
            iteration: t,
            rollouts: rollouts.len(),
            valid_programs: rollouts.iter().filter(|r| r.valid == 1).count(),
            questions: rollouts.iter().map(|r| r.questions.len()).sum(),
            retained: retained.len(),
            retained_mean_acc: mean(retained.iter().map(|b| b.question.estimate.acc)),
            retained_mean_r_diff: mean(retained.iter().map(|b| b.question.r_diff)),
            challenger: MeanComponents {
                format: m(&|r| r.components.format),
                valid: m(&|r| r.components.valid),
                diff: m(&|r| r.components.diff),
                div: m(&|r| r.components.div),
                total: m(&|r| r.total),
            },
            reason_counts: reasons,
            queue_size,
            mean_pairwise_bleu_distance: mean_pairwise_distance(&valid_programs(&steps)),
            solver_mean_reward,
        });
    }
    Ok(RunReport { iterations: out })
}

fn load_config(run: &Path) -> Result<LoopConfig, EvolveError> {
    let path = run.join("config.json");
    if !path.exists() {
        return Err(EvolveError::MissingLogs(format!("{}", path.display())));
    }
    LoopConfig::load(&path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Problems found when re-deriving `task` from its program and original.
fn verify_task(task: &VqaTask, store: &ImageStore, cfg: &LoopConfig) -> Vec<String> {
    let mut bad = Vec::new();
    let original = match store.get(&task.original) {
        Ok(i) => i,
        Err(e) => return vec![format!("original: {e}")],
    };
    let program = match parse_program_with(&task.program_source, &cfg.parse_options()).into_result() {
        Ok(p) => p,
        Err(e) => return vec![format!("program does not parse: {}", e[0])],
    };
    let outputs = match execute_all(&program, &original, &cfg.limits) {
        Ok(o) => o,
        Err(e) => return vec![format!("program does not execute: {e}")],
    };
    let n = outputs.len();
    let hashes: Vec<_> = outputs.iter().map(perceptual_hash).collect();
    for i in 0..n {
        for j in i + 1..n {
            if hash_similarity(hashes[i], hashes[j]) > DUPLICATE_SIMILARITY {
                bad.push(format!("outputs {i} and {j} are near-duplicates"));
            }
        }
    }
    let digests: Vec<String> = outputs.iter().map(content_digest).collect();
    let mut perm = task.permutation.clone();
    perm.sort_unstable();
    if perm != (0..n).collect::<Vec<_>>() || task.options.len() != n || task.probe_index >= n {
        bad.push("permutation or options do not match the program".into());
        return bad;
    }
    if task.permutation[task.correct_option] != task.probe_index {
        bad.push("answer key does not point at the probe".into());
    }
    if task.probe_args != render_param_set(&program.arg_sets[task.probe_index]) {
        bad.push("probe arguments differ from the program".into());
    }
    let expected_edited: Vec<&String> = match task.kind {
        TaskKind::Type0 => task.permutation.iter().map(|&i| &digests[i]).collect(),
        TaskKind::Type1 => std::iter::once(task.probe_index).chain((0..n).filter(|&i| i != task.probe_index)).map(|i| &digests[i]).collect(),
    };
    if task.edited.iter().collect::<Vec<_>>() != expected_edited {
        bad.push("presented images differ from re-execution".into());
    }
    if task.kind == TaskKind::Type1 {
        for (slot, &i) in task.permutation.iter().enumerate() {
            if task.options[slot] != render_param_set(&program.arg_sets[i]) {
                bad.push(format!("option {slot} differs from argument set {i}"));
            }
        }
    }
    if task.rendered_prompt != task.render() {
        bad.push("prompt does not re-render".into());
    }
    bad
}

/// Re-executes every bank question (retained and discarded) and checks that
/// its answer key and images are reproduced.
pub fn verify_run(run: &Path) -> Result<VerifyReport, EvolveError> {
    let cfg = load_config(run)?;
    let store = ImageStore::open(run.join("images"))?;
    let mut report = VerifyReport {
        checked: 0,
        mismatches: Vec::new(),
    };
    for t in iterations(run) {
        for name in ["questions.jsonl", "discarded.jsonl"] {
            let path = iter_dir(run, t).join(name);
            if !path.exists() {
                continue;
            }
            for rec in read_lines::<BankRecord>(&path)? {
                report.checked += 1;
                for m in verify_task(&rec.question.task, &store, &cfg) {
                    report.mismatches.push(format!("{}: {m}", rec.question.id));
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescoreReport {
    pub rollouts: usize,
    pub mismatches: Vec<String>,
}

impl RescoreReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn regrade(task: &VqaTask, responses: &[Option<String>]) -> Vec<GradeResult> {
    responses
        .iter()
        .map(|r| match r {
            Some(text) => grade_answer(task, text),
            None => GradeResult {
                formatted: false,
                extracted: None,
                correct: false,
            },
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

/// Recomputes every challenger reward from the raw responses: re-checks and
/// re-executes each program, regrades the solver answers, reclusters each
/// group, and compares against `steps.jsonl` and `rewards.jsonl`.
pub fn rescore_run(run: &Path) -> Result<RescoreReport, EvolveError> {
    let cfg = load_config(run)?;
    let store = ImageStore::open(run.join("images"))?;
    let mut report = RescoreReport {
        rollouts: 0,
        mismatches: Vec::new(),
    };
    for t in iterations(run) {
        let idir = iter_dir(run, t);
        let steps: Vec<StepRecord> = read_lines(&idir.join("steps.jsonl"))?;
        let logged: Vec<RewardRecord> = read_lines(&idir.join("rewards.jsonl"))?;
        let logged: BTreeMap<&str, &RewardRecord> = logged.iter().map(|r| (r.sample_id.as_str(), r)).collect();
        for step in &steps {
            let mut diffs = Vec::new();
            let mut checks = Vec::new();
            for ro in &step.rollouts {
                let id = format!("t{t}-s{}-r{}", step.step, ro.rollout);
                let mut miss = |m: String| report.mismatches.push(format!("{id}: {m}"));
                let original = store.get(&ro.image)?;
                let check = check_challenger_output(&ro.response, &original, &cfg.limits, &cfg.parse_options());
                if (check.format, check.valid, &check.reasons) != (ro.format, ro.valid, &ro.reasons) {
                    miss("format/validity differ".into());
                }
                if check.outputs.iter().map(content_digest).collect::<Vec<_>>() != ro.outputs {
                    miss("outputs differ".into());
                }
                let mut estimates = Vec::new();
                for q in &ro.questions {
                    let grades = regrade(&q.task, &q.responses);
                    let est = AccuracyEstimate::from_grades(grades, q.estimate.failures);
                    if est.grades != q.estimate.grades || !close(difficulty_reward(est.acc), q.r_diff) {
                        miss(format!("{} grades differ", q.id));
                    }
                    estimates.push(est);
                }
                let diff = if estimates.is_empty() { 0.0 } else { program_difficulty(&estimates).expect("non-empty") };
                if !close(diff, ro.r_diff) {
                    miss(format!("r_diff {} != logged {}", diff, ro.r_diff));
                }
                diffs.push(diff);
                checks.push(check);
                report.rollouts += 1;
            }
            let mut start = 0;
            while start < step.rollouts.len() {
                let group = step.rollouts[start].group;
                let end = start + step.rollouts[start..].iter().take_while(|r| r.group == group).count();
                let samples: Vec<ChallengerSample> = (start..end)
                    .map(|i| ChallengerSample {
                        format: checks[i].format,
                        valid: checks[i].valid,
                        reasons: checks[i].reasons.clone(),
                        diff: diffs[i],
                        text: checks[i].cluster_text(&step.rollouts[i].response),
                    })
                    .collect();
                let (_, breakdowns) = challenger_group_rewards(&samples, &cfg.weights, cfg.cluster_threshold);
                let totals: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
                let adv = group_advantages(&totals, DEFAULT_EPS_STD);
                for (k, i) in (start..end).enumerate() {
                    let ro = &step.rollouts[i];
                    let id = format!("t{t}-s{}-r{}", step.step, ro.rollout);
                    let c = breakdowns[k].components;
                    let same = |x: &ChallengerComponents, total: f64, advantage: f64| {
                        close(x.format, c.format)
                            && close(x.valid, c.valid)
                            && close(x.diff, c.diff)
                            && close(x.div, c.div)
                            && close(total, totals[k])
                            && close(advantage, adv[k])
                    };
                    let step_ok = same(&ro.components, ro.total, ro.advantage);
                    let log_ok = logged.get(id.as_str()).is_some_and(|l| same(&l.components, l.total, l.advantage));
                    if !step_ok || !log_ok {
                        report.mismatches.push(format!("{id}: reward differs (recomputed total {})", totals[k]));
                    }
                }
                start = end;
            }
        }
    }
    Ok(report)
}
