//! Driving a run: phase 1 steps, bank selection, phase 2, checkpoints.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::analysis::build_report;
use super::config::LoopConfig;
use super::library::{builtin_library, load_library};
use super::records::*;
use super::{par_map, EvolveError};
use crate::image::{content_digest, ImageStore, RasterImage};
use crate::policy::{Hints, ImageRef, ImageSummary, LearnBatch, LearnItem, Policy, PolicyRole, PromptContext};
use crate::queue::{seeds::SEEDS, ExampleQueue, Origin};
use crate::reward::{
    challenger_group_rewards, check_challenger_output, difficulty_reward, estimate_accuracy, program_difficulty, sample_seed, solver_breakdown,
    ChallengerCheck, ChallengerSample,
};
use crate::rlmath::{group_advantages, DEFAULT_EPS_STD};
use crate::seed::{Role, StreamKey};
use crate::synth::{challenger_prompt, grade_answer, presented_digests, solver_prompt, synth_pair, GradeResult, VqaTask};

/// Where a run stands after its last complete step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// 1-based iteration in progress.
    pub iteration: usize,
    /// Next challenger step; equal to `steps` once phase 1 is done.
    pub next_step: usize,
    /// Steps committed over the whole run.
    pub committed: usize,
    pub steps_lines: usize,
    pub rewards_lines: usize,
    pub queue: String,
    pub challenger: Value,
    pub solver: Value,
}

/// Test hook: stop (as if killed) before committing step number `n`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunControl {
    pub stop_after_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed(RunReport),
    Stopped { iteration: usize, step: usize },
}

/// Stable sort by `r_diff` descending, then truncate to `cap`. Returns the
/// retained and the discarded entries.
pub fn select_question_bank<T>(mut bank: Vec<T>, cap: usize, r_diff: impl Fn(&T) -> f64) -> (Vec<T>, Vec<T>) {
    bank.sort_by(|a, b| r_diff(b).total_cmp(&r_diff(a)));
    let discarded = if bank.len() > cap { bank.split_off(cap) } else { Vec::new() };
    (bank, discarded)
}

pub fn run_evolution(cfg: &LoopConfig) -> Result<RunReport, EvolveError> {
    match run_evolution_with(cfg, &RunControl::default())? {
        RunStatus::Completed(r) => Ok(r),
        RunStatus::Stopped { .. } => unreachable!("no stop requested"),
    }
}

pub fn run_evolution_with(cfg: &LoopConfig, control: &RunControl) -> Result<RunStatus, EvolveError> {
    cfg.validate()?;
    let dir = cfg.run_dir.clone();
    if dir.join("config.json").exists() || dir.join("checkpoint.json").exists() {
        return Err(EvolveError::RunDirNotEmpty(dir));
    }
    fs::create_dir_all(&dir).map_err(|e| EvolveError::io(&dir, e))?;
    let text = serde_json::to_string_pretty(cfg).expect("config serializes") + "\n";
    write_atomic(&dir.join("config.json"), text.as_bytes())?;
    drive(&dir, cfg, None, control)
}

/// Continues the run in `run_dir` from its last checkpoint.
pub fn resume(run_dir: &Path, control: &RunControl) -> Result<RunStatus, EvolveError> {
    let cfg = LoopConfig::load(&run_dir.join("config.json"))?;
    let path = run_dir.join("checkpoint.json");
    let text = fs::read_to_string(&path).map_err(|e| EvolveError::MissingLogs(format!("{}: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| EvolveError::Corrupt(format!("{}: {e}", path.display())))?;
    drive(run_dir, &cfg, Some(ck), control)
}

struct Engine<'a> {
    cfg: &'a LoopConfig,
    library: Vec<ImageRef>,
    threads: usize,
}

/// Phase-1 result of one rollout, before group rewards.
struct Rollout {
    group: usize,
    image: usize,
    examples: Vec<u64>,
    response: String,
    policy_error: Option<String>,
    check: ChallengerCheck,
    outputs: Vec<ImageRef>,
    questions: Vec<QuestionRecord>,
    r_diff: f64,
}

fn policy_failure(e: impl std::fmt::Display) -> EvolveError {
    EvolveError::Policy(e.to_string())
}

fn solver_context(task: &Arc<VqaTask>, images: &HashMap<String, ImageRef>, cfg: &LoopConfig, seed: u64) -> PromptContext {
    PromptContext {
        role: PolicyRole::Solver,
        rendered_prompt: solver_prompt(&task.rendered_prompt),
        images: presented_digests(task).into_iter().filter_map(|d| images.get(d).cloned()).collect(),
        sampling: cfg.sampling,
        stream_seed: seed,
        hints: Hints::Solver { task: Arc::clone(task) },
    }
}

impl Engine<'_> {
    fn master(&self) -> u64 {
        self.cfg.master_seed
    }

    fn rollout(&self, t: usize, s: usize, r: usize, queue: &ExampleQueue, challenger: &dyn Policy, solver: &dyn Policy) -> Rollout {
        let cfg = self.cfg;
        let (it, st) = (t as u64, s as u64);
        let group = r / cfg.challenger_group;
        let image = StreamKey::new(it, st, group as u64, Role::Engine, "image").rng(self.master()).random_range(0..self.library.len());
        let original = &self.library[image];
        let n_ex = cfg.examples.min(queue.len());
        let examples = queue
            .sample(n_ex, StreamKey::new(it, st, r as u64, Role::Engine, "examples").seed(self.master()))
            .expect("sample size within queue length");
        let sources: Vec<&str> = examples.iter().map(|e| e.source.as_str()).collect();
        let ctx = PromptContext {
            role: PolicyRole::Challenger,
            rendered_prompt: challenger_prompt(&sources, cfg.arg_sets),
            images: vec![original.clone()],
            sampling: cfg.sampling,
            stream_seed: StreamKey::new(it, st, r as u64, Role::Challenger, "generate").seed(self.master()),
            hints: Hints::Challenger {
                examples: sources.iter().map(|s| s.to_string()).collect(),
                summary: ImageSummary::of(&original.image),
            },
        };
        let (response, policy_error) = match challenger.generate(&ctx) {
            Ok(r) => (r.text, None),
            Err(e) => (String::new(), Some(e.to_string())),
        };
        let mut check = check_challenger_output(&response, &original.image, &cfg.limits, &cfg.parse_options());
        let outputs: Vec<ImageRef> = std::mem::take(&mut check.outputs)
            .into_iter()
            .map(|img| ImageRef {
                digest: content_digest(&img),
                image: Arc::new(img),
            })
            .collect();
        let mut questions = Vec::new();
        let mut r_diff = 0.0;
        if let (1, Some(program)) = (check.valid, &check.program) {
            let edited: Vec<RasterImage> = outputs.iter().map(|o| (*o.image).clone()).collect();
            let synth_seed = StreamKey::new(it, st, r as u64, Role::Engine, "synth").seed(self.master());
            match synth_pair(program, &original.image, &edited, synth_seed) {
                Ok((q0, q1)) => {
                    let mut images: HashMap<String, ImageRef> = outputs.iter().map(|o| (o.digest.clone(), o.clone())).collect();
                    images.insert(original.digest.clone(), original.clone());
                    for (i, task) in [q0, q1].into_iter().enumerate() {
                        let task = Arc::new(task);
                        let seed = StreamKey::new(it, st, r as u64, Role::Solver, if i == 0 { "estimate0" } else { "estimate1" }).seed(self.master());
                        let mut responses = vec![None; cfg.solver_samples];
                        let estimate = estimate_accuracy(&task, cfg.solver_samples, cfg.solver_retries, seed, |k, sd| {
                            solver.generate(&solver_context(&task, &images, cfg, sd)).map(|resp| {
                                responses[k] = Some(resp.text.clone());
                                resp.text
                            })
                        });
                        questions.push(QuestionRecord {
                            id: format!("t{t}-s{s}-r{r}-q{i}"),
                            iteration: t,
                            step: s,
                            rollout: r,
                            r_diff: difficulty_reward(estimate.acc),
                            task: (*task).clone(),
                            estimate,
                            responses,
                        });
                    }
                    let estimates: Vec<_> = questions.iter().map(|q| q.estimate.clone()).collect();
                    r_diff = program_difficulty(&estimates).expect("two estimates");
                }
                // unreachable for a validated program; recorded as no questions
                Err(e) => log::warn!("synthesis failed for t{t}-s{s}-r{r}: {e}"),
            }
        }
        Rollout {
            group,
            image,
            examples: examples.iter().map(|e| e.insertion_counter).collect(),
            response,
            policy_error,
            check,
            outputs,
            questions,
            r_diff,
        }
    }
}

struct Run<'a> {
    dir: PathBuf,
    engine: Engine<'a>,
    store: ImageStore,
    queue: ExampleQueue,
    challenger: Box<dyn Policy>,
    solver: Box<dyn Policy>,
    /// Images of the current iteration's questions, by digest.
    images: HashMap<String, ImageRef>,
    committed: usize,
    steps_lines: usize,
    rewards_lines: usize,
}

fn drive(dir: &Path, cfg: &LoopConfig, ck: Option<Checkpoint>, control: &RunControl) -> Result<RunStatus, EvolveError> {
    let images = match &cfg.image_library {
        Some(p) => load_library(p)?,
        None => builtin_library(),
    };
    let library = images
        .into_iter()
        .map(|img| ImageRef {
            digest: content_digest(&img),
            image: Arc::new(img),
        })
        .collect();
    let mut run = Run {
        dir: dir.to_path_buf(),
        engine: Engine {
            cfg,
            library,
            threads: cfg.threads(),
        },
        store: ImageStore::open(dir.join("images"))?,
        queue: ExampleQueue::with_seeds(&SEEDS, cfg.queue_capacity, cfg.sigma_high)?,
        challenger: cfg.challenger.build()?,
        solver: cfg.solver.build()?,
        images: HashMap::new(),
        committed: 0,
        steps_lines: 0,
        rewards_lines: 0,
    };
    let (mut t, mut s) = (1, 0);
    if let Some(ck) = ck {
        run.queue = ExampleQueue::restore(&ck.queue)?;
        run.challenger.restore_state(&ck.challenger).map_err(policy_failure)?;
        run.solver.restore_state(&ck.solver).map_err(policy_failure)?;
        (t, s, run.committed, run.steps_lines, run.rewards_lines) = (ck.iteration, ck.next_step, ck.committed, ck.steps_lines, ck.rewards_lines);
    }
    while t <= cfg.iterations {
        let idir = iter_dir(dir, t);
        fs::create_dir_all(&idir).map_err(|e| EvolveError::io(&idir, e))?;
        // drop anything written after the last checkpoint
        truncate_lines(&idir.join("steps.jsonl"), run.steps_lines)?;
        truncate_lines(&idir.join("rewards.jsonl"), run.rewards_lines)?;
        let mut bank: Vec<QuestionRecord> = Vec::new();
        if s > 0 {
            for rec in read_lines::<StepRecord>(&idir.join("steps.jsonl"))? {
                bank.extend(rec.rollouts.into_iter().flat_map(|r| r.questions));
            }
        }
        while s < cfg.steps {
            if control.stop_after_steps == Some(run.committed) {
                return Ok(RunStatus::Stopped { iteration: t, step: s });
            }
            run.challenger_step(t, s, &mut bank)?;
            s += 1;
            run.checkpoint(t, s)?;
        }
        run.solver_phase(t, bank)?;
        run.challenger.end_iteration(t as u64);
        run.solver.end_iteration(t as u64);
        run.images.clear();
        let report = build_report(dir)?;
        write_atomic(&dir.join("report.json"), (serde_json::to_string_pretty(&report).expect("report serializes") + "\n").as_bytes())?;
        t += 1;
        s = 0;
        (run.steps_lines, run.rewards_lines) = (0, 0);
        run.checkpoint(t, s)?;
    }
    Ok(RunStatus::Completed(build_report(dir)?))
}

impl Run<'_> {
    fn checkpoint(&self, t: usize, s: usize) -> Result<(), EvolveError> {
        let ck = Checkpoint {
            iteration: t,
            next_step: s,
            committed: self.committed,
            steps_lines: self.steps_lines,
            rewards_lines: self.rewards_lines,
            queue: self.queue.snapshot(),
            challenger: self.challenger.state(),
            solver: self.solver.state(),
        };
        write_atomic(&self.dir.join("checkpoint.json"), to_line(&ck).as_bytes())
    }

    fn image(&mut self, digest: &str) -> Result<ImageRef, EvolveError> {
        if let Some(i) = self.images.get(digest) {
            return Ok(i.clone());
        }
        let r = ImageRef {
            digest: digest.to_string(),
            image: Arc::new(self.store.get(digest)?),
        };
        self.images.insert(digest.to_string(), r.clone());
        Ok(r)
    }

    fn challenger_step(&mut self, t: usize, s: usize, bank: &mut Vec<QuestionRecord>) -> Result<(), EvolveError> {
        let started = Instant::now();
        let cfg = self.engine.cfg;
        let idx: Vec<usize> = (0..cfg.batch).collect();
        let rollouts = {
            let (engine, queue) = (&self.engine, &self.queue);
            let (challenger, solver) = (self.challenger.as_ref(), self.solver.as_ref());
            par_map(&idx, engine.threads, |_, &r| engine.rollout(t, s, r, queue, challenger, solver))
        };
        let queue_size = self.queue.len();
        let mut records = Vec::with_capacity(rollouts.len());
        let mut rewards = Vec::with_capacity(rollouts.len());
        for (g, chunk) in rollouts.chunks(cfg.challenger_group).enumerate() {
            let samples: Vec<ChallengerSample> = chunk
                .iter()
                .map(|ro| ChallengerSample {
                    format: ro.check.format,
                    valid: ro.check.valid,
                    reasons: ro.check.reasons.clone(),
                    diff: ro.r_diff,
                    text: ro.check.cluster_text(&ro.response),
                })
                .collect();
            let (clusters, breakdowns) = challenger_group_rewards(&samples, &cfg.weights, cfg.cluster_threshold);
            let totals: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
            let advantages = group_advantages(&totals, DEFAULT_EPS_STD);
            for (j, ro) in chunk.iter().enumerate() {
                let r = g * cfg.challenger_group + j;
                debug_assert_eq!(ro.group, g);
                let original = self.engine.library[ro.image].clone();
                self.store.put(&original.image)?;
                let mut queue_outcome = None;
                if let (1, Some(p)) = (ro.check.valid, &ro.check.program) {
                    for o in &ro.outputs {
                        self.store.put(&o.image)?;
                        self.images.insert(o.digest.clone(), o.clone());
                    }
                    self.images.insert(original.digest.clone(), original.clone());
                    let origin = Origin::Generated {
                        iteration: t as u64,
                        step: s as u64,
                    };
                    queue_outcome = Some(self.queue.insert(&p.canonical(), ro.r_diff, origin)?);
                }
                let b = &breakdowns[j];
                rewards.push(RewardRecord {
                    sample_id: format!("t{t}-s{s}-r{r}"),
                    components: b.components,
                    reasons: b.reasons.clone(),
                    total: b.total,
                    advantage: advantages[j],
                });
                records.push(RolloutRecord {
                    rollout: r,
                    group: g,
                    image: original.digest.clone(),
                    examples: ro.examples.clone(),
                    response: ro.response.clone(),
                    policy_error: ro.policy_error.clone(),
                    format: ro.check.format,
                    valid: ro.check.valid,
                    reasons: ro.check.reasons.clone(),
                    parse_errors: ro.check.parse_errors.iter().map(|e| e.to_string()).collect(),
                    exec_error: ro.check.exec_error.as_ref().map(|e| e.to_string()),
                    program: ro.check.program.as_ref().map(|p| p.canonical()),
                    outputs: ro.outputs.iter().map(|o| o.digest.clone()).collect(),
                    questions: ro.questions.clone(),
                    r_diff: ro.r_diff,
                    queue: queue_outcome,
                    cluster: clusters.cluster_of[j],
                    components: b.components,
                    total: b.total,
                    advantage: advantages[j],
                });
            }
        }
        for rec in &records {
            bank.extend(rec.questions.iter().cloned());
        }
        let batch = LearnBatch {
            role: PolicyRole::Challenger,
            iteration: t as u64,
            items: records
                .iter()
                .zip(&rewards)
                .map(|(rec, rw)| LearnItem {
                    context_id: rw.sample_id.clone(),
                    response: rec.response.clone(),
                    reward: rw.total,
                    ground_truth: None,
                })
                .collect(),
        };
        if let Err(e) = self.challenger.learn(&batch) {
            log::warn!("challenger learn hook failed at t{t}-s{s}: {e}");
        }
        let idir = iter_dir(&self.dir, t);
        append_line(
            &idir.join("steps.jsonl"),
            &StepRecord {
                iteration: t,
                step: s,
                queue_size,
                rollouts: records,
            },
        )?;
        for rw in &rewards {
            append_line(&idir.join("rewards.jsonl"), rw)?;
        }
        self.steps_lines += 1;
        self.rewards_lines += rewards.len();
        self.committed += 1;
        append_line(&idir.join("timings.jsonl"), &json!({"phase": "challenger", "step": s, "ms": started.elapsed().as_secs_f64() * 1e3}))?;
        Ok(())
    }

    fn solver_phase(&mut self, t: usize, bank: Vec<QuestionRecord>) -> Result<(), EvolveError> {
        let started = Instant::now();
        let cfg = self.engine.cfg;
        let idir = iter_dir(&self.dir, t);
        let (retained, discarded) = select_question_bank(bank, cfg.bank_cap(), |q| q.r_diff);
        let ranked = |qs: &[QuestionRecord], from: usize| -> Vec<BankRecord> {
            qs.iter()
                .enumerate()
                .map(|(i, q)| BankRecord {
                    rank: from + i,
                    question: q.clone(),
                })
                .collect()
        };
        write_lines(&idir.join("questions.jsonl"), &ranked(&retained, 0))?;
        write_lines(&idir.join("discarded.jsonl"), &ranked(&discarded, retained.len()))?;
        let snapshot = self.queue.snapshot();
        write_atomic(&idir.join("queue.jsonl"), snapshot.as_bytes())?;
        write_atomic(&self.dir.join("queue.jsonl"), snapshot.as_bytes())?;

        for q in &retained {
            for d in presented_digests(&q.task) {
                self.image(d)?;
            }
        }
        let tasks: Vec<Arc<VqaTask>> = retained.iter().map(|q| Arc::new(q.task.clone())).collect();
        let mut out = Vec::with_capacity(retained.len());
        for (b, batch) in tasks.chunks(cfg.batch).enumerate() {
            let answers = {
                let (images, solver) = (&self.images, self.solver.as_ref());
                par_map(batch, self.engine.threads, |j, task| {
                    let idx = b * cfg.batch + j;
                    let seed = StreamKey::new(t as u64, b as u64, idx as u64, Role::Solver, "train").seed(cfg.master_seed);
                    (0..cfg.solver_group)
                        .map(|k| {
                            (0..=cfg.solver_retries).find_map(|attempt| match solver.generate(&solver_context(task, images, cfg, sample_seed(seed, k, attempt))) {
                                Ok(r) => Some(r.text),
                                Err(e) => {
                                    log::warn!("solver failed on bank entry {idx} sample {k}: {e}");
                                    None
                                }
                            })
                        })
                        .collect::<Vec<Option<String>>>()
                })
            };
            let mut items = Vec::new();
            for (j, responses) in answers.into_iter().enumerate() {
                let task = &batch[j];
                let q = &retained[b * cfg.batch + j];
                let grades: Vec<GradeResult> = responses
                    .iter()
                    .map(|r| match r {
                        Some(text) => grade_answer(task, text),
                        None => GradeResult {
                            formatted: false,
                            extracted: None,
                            correct: false,
                        },
                    })
                    .collect();
                let rewards: Vec<_> = grades.iter().map(|g| solver_breakdown(g, &cfg.weights)).collect();
                let advantages = group_advantages(&rewards.iter().map(|r| r.total).collect::<Vec<_>>(), DEFAULT_EPS_STD);
                let responses: Vec<String> = responses.into_iter().map(Option::unwrap_or_default).collect();
                for (text, rw) in responses.iter().zip(&rewards) {
                    items.push(LearnItem {
                        context_id: q.id.clone(),
                        response: text.clone(),
                        reward: rw.total,
                        ground_truth: Some(task.correct_letter().to_string()),
                    });
                }
                out.push(SolverRecord {
                    question: q.id.clone(),
                    batch: b,
                    responses,
                    grades,
                    rewards,
                    advantages,
                });
            }
            let lb = LearnBatch {
                role: PolicyRole::Solver,
                iteration: t as u64,
                items,
            };
            if let Err(e) = self.solver.learn(&lb) {
                log::warn!("solver learn hook failed at t{t} batch {b}: {e}");
            }
        }
        write_lines(&idir.join("solver.jsonl"), &out)?;
        append_line(&idir.join("timings.jsonl"), &json!({"phase": "solver", "ms": started.elapsed().as_secs_f64() * 1e3}))?;
        Ok(())
    }
}
