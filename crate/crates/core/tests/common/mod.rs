//! Shared generators and reference implementations for integration tests.
#![allow(dead_code)]

pub mod ops_ref;
pub mod stub;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use evoforge::evolve::{iter_dir, LoopConfig, PolicyBinding};
use evoforge::lang::{parse_program, tokenize};
use evoforge::policy::ScriptedConfig;
use evoforge::queue::{ExampleQueue, InsertOutcome, Origin};
use evoforge::reward::bleu_similarity_tokens;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Kind of a generated parameter, deciding which literals it takes.
#[derive(Clone, Copy)]
enum Kind {
    Int,
    Number,
    List,
    Box,
}

fn literal(rng: &mut ChaCha8Rng, kind: Kind) -> String {
    match kind {
        Kind::Int => rng.random_range(1..=64).to_string(),
        Kind::Number => {
            if rng.random_bool(0.5) {
                rng.random_range(-720..=720).to_string()
            } else {
                format!("{}.{}", rng.random_range(0..=9), rng.random_range(1..=9999))
            }
        }
        Kind::List => {
            let n = rng.random_range(1..=6);
            let items: Vec<String> = (0..n).map(|_| rng.random_range(0..=15).to_string()).collect();
            format!("[{}]", items.join(","))
        }
        Kind::Box => {
            let v: Vec<String> = (0..4).map(|_| rng.random_range(0..=1000).to_string()).collect();
            format!("[{}]", v.join(","))
        }
    }
}

const OPS: [(&str, &[Kind]); 14] = [
    ("rotate", &[Kind::Number]),
    ("flip h", &[]),
    ("flip v", &[]),
    ("crop", &[Kind::Box]),
    ("crop", &[Kind::Int, Kind::Int, Kind::Int, Kind::Int]),
    ("jigsaw", &[Kind::Int, Kind::List]),
    ("draw_rect", &[Kind::Box, Kind::Int]),
    ("brightness", &[Kind::Number]),
    ("contrast", &[Kind::Number]),
    ("grayscale", &[]),
    ("invert", &[]),
    ("pixelate", &[Kind::Int]),
    ("resize", &[Kind::Int, Kind::Int]),
    ("rotate", &[Kind::Number]),
];

/// A fresh lowercase name; the suffix keeps names within a program distinct.
fn ident(rng: &mut ChaCha8Rng, index: usize) -> String {
    let len = rng.random_range(3..=7);
    let mut s: String = (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
    s.push_str(&format!("_{index}"));
    s
}

/// A syntactically valid program with `n` distinct argument lines. It
/// need not execute successfully.
pub fn random_program(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut params: Vec<(String, Kind)> = Vec::new();
    let mut steps = Vec::new();
    let n_steps = rng.random_range(1..=4);
    for _ in 0..n_steps {
        let (op, slots) = OPS[rng.random_range(0..OPS.len())];
        let mut line = format!("step {op}");
        for &kind in slots {
            if rng.random_bool(0.6) {
                let p = ident(rng, params.len());
                line.push_str(&format!(" ${p}"));
                params.push((p, kind));
            } else {
                line.push(' ');
                line.push_str(&literal(rng, kind));
            }
        }
        steps.push(line);
    }
    if params.is_empty() {
        params.push(("angle".into(), Kind::Number));
        steps.push("step rotate $angle".into());
    }
    let mut out: Vec<String> = params.iter().map(|(p, _)| format!("param {p}")).collect();
    out.extend(steps);
    let mut seen = std::collections::BTreeSet::new();
    while seen.len() < n {
        let binding: Vec<String> = params.iter().map(|(p, k)| format!("{p}={}", literal(rng, *k))).collect();
        let line = format!("args {}", binding.join(", "));
        if seen.insert(line.clone()) {
            out.push(line);
        }
    }
    out.join("\n")
}

fn grams(tokens: &[String], n: usize) -> BTreeMap<Vec<String>, usize> {
    let mut m = BTreeMap::new();
    for i in 0..tokens.len().saturating_sub(n - 1) {
        *m.entry(tokens[i..i + n].to_vec()).or_insert(0) += 1;
    }
    m
}

/// Token count and n-gram multisets for orders 1 to 4.
pub struct RefDoc {
    len: usize,
    grams: Vec<BTreeMap<Vec<String>, usize>>,
}

pub fn ref_doc(tokens: &[String]) -> RefDoc {
    RefDoc {
        len: tokens.len(),
        grams: (1..=4).map(|n| grams(tokens, n)).collect(),
    }
}

/// Textbook sentence BLEU-4, add-one smoothing on every order, brevity
/// penalty `exp(1 - r/c)` when the candidate is shorter.
pub fn ref_sentence_bleu(cand: &RefDoc, reference: &RefDoc) -> f64 {
    if cand.len == 0 || reference.len == 0 {
        return if cand.len == reference.len { 1.0 } else { 0.0 };
    }
    let mut product = 1.0f64;
    for (c, r) in cand.grams.iter().zip(&reference.grams) {
        let mut hit = 0usize;
        for (g, k) in c {
            hit += (*k).min(*r.get(g).unwrap_or(&0));
        }
        let total: usize = c.values().sum();
        product *= (hit as f64 + 1.0) / (total as f64 + 1.0);
    }
    let bp = if cand.len > reference.len {
        1.0
    } else {
        (1.0 - reference.len as f64 / cand.len as f64).exp()
    };
    bp * product.powf(0.25)
}

pub fn ref_doc_similarity(a: &RefDoc, b: &RefDoc) -> f64 {
    (ref_sentence_bleu(a, b) + ref_sentence_bleu(b, a)) / 2.0
}

pub fn ref_similarity(a: &[String], b: &[String]) -> f64 {
    ref_doc_similarity(&ref_doc(a), &ref_doc(b))
}

/// Brute-force example queue: an unordered list, fully re-sorted on read.
pub struct RefQueue {
    pub capacity: usize,
    pub sigma: f64,
    pub counter: u64,
    /// (document, source, r_diff, counter)
    pub items: Vec<(RefDoc, String, f64, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefOutcome {
    Rejected,
    Accepted,
    BelowFloor,
}

impl RefQueue {
    pub fn new(capacity: usize, sigma: f64) -> Self {
        Self {
            capacity,
            sigma,
            counter: 0,
            items: Vec::new(),
        }
    }

    pub fn insert(&mut self, canonical: &str, tokens: &[String], r: f64) -> RefOutcome {
        let doc = ref_doc(tokens);
        if self.items.iter().any(|it| ref_doc_similarity(&doc, &it.0) > self.sigma) {
            return RefOutcome::Rejected;
        }
        self.counter += 1;
        self.items.push((doc, canonical.to_string(), r, self.counter));
        if self.items.len() <= self.capacity {
            return RefOutcome::Accepted;
        }
        // evict the lowest difficulty, oldest first among ties
        let worst = (0..self.items.len())
            .min_by(|&i, &j| {
                let (a, b) = (&self.items[i], &self.items[j]);
                a.2.total_cmp(&b.2).then(a.3.cmp(&b.3))
            })
            .unwrap();
        let gone = self.items.remove(worst);
        if gone.3 == self.counter {
            RefOutcome::BelowFloor
        } else {
            RefOutcome::Accepted
        }
    }

    /// (source, r_diff, counter) in priority order.
    pub fn ordered(&self) -> Vec<(String, f64, u64)> {
        let mut v: Vec<_> = self.items.iter().map(|i| (i.1.clone(), i.2, i.3)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.cmp(&a.2)));
        v
    }
}

/// Random inserts replayed against the brute-force queue, returning
/// (accepted, rejected). Difficulties come
/// from the K=6 grid so ties are common.
pub fn replay(seed: u64, inserts: usize, capacity: usize, sigma: f64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = ExampleQueue::new(capacity, sigma).unwrap();
    let mut r = RefQueue::new(capacity, sigma);
    let (mut accepted, mut rejected) = (0, 0);
    let mut pool: Vec<String> = Vec::new();
    for i in 0..inserts {
        // revisit an earlier program now and then to exercise rejection
        let src = if !pool.is_empty() && rng.random_bool(0.2) {
            pool[rng.random_range(0..pool.len())].clone()
        } else {
            let s = random_program(&mut rng, 4);
            pool.push(s.clone());
            s
        };
        let diff = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0][rng.random_range(0..4)];
        let canonical = parse_program(&src).into_result().unwrap().canonical();
        let got = q.insert(&src, diff, Origin::Generated { iteration: 0, step: i as u64 }).unwrap();
        let tokens = tokenize(&canonical);
        let want = r.insert(&canonical, &tokens, diff);
        match (&got, &want) {
            (InsertOutcome::Duplicate { .. }, RefOutcome::Rejected) => rejected += 1,
            (InsertOutcome::Accepted { .. }, RefOutcome::Accepted) => accepted += 1,
            (InsertOutcome::BelowFloor, RefOutcome::BelowFloor) => {}
            _ => panic!("insert {i}: engine {got:?}, reference {want:?}"),
        }
        let ours: Vec<(String, f64, u64)> = q.entries().iter().map(|e| (e.source.clone(), e.r_diff, e.insertion_counter)).collect();
        assert_eq!(ours, r.ordered(), "after insert {i}");
        assert!(q.len() <= capacity);
        // evictions cannot create a close pair, so only the newcomer needs checking
        if got.accepted() {
            for e in q.entries().iter().filter(|e| e.source != canonical) {
                assert!(bleu_similarity_tokens(&tokens, &tokenize(&e.source)) <= sigma);
            }
        }
    }
    (accepted, rejected)
}

/// The small configuration used for end-to-end runs.
pub fn desk(dir: &Path, compose: bool) -> LoopConfig {
    LoopConfig {
        iterations: 3,
        steps: 4,
        batch: 8,
        solver_samples: 6,
        master_seed: 7,
        challenger: PolicyBinding::Scripted(ScriptedConfig {
            compose,
            ..ScriptedConfig::default()
        }),
        solver: PolicyBinding::NoisyOracle {
            p: 0.3,
            increment: 0.2,
            ceiling: 1.0,
        },
        run_dir: dir.to_path_buf(),
        ..LoopConfig::default()
    }
}

pub const LOGS: [&str; 5] = ["steps.jsonl", "rewards.jsonl", "questions.jsonl", "discarded.jsonl", "queue.jsonl"];

/// Panics unless the logs of two runs are byte-identical.
pub fn same_logs(a: &Path, b: &Path) {
    for t in 1..=3 {
        for name in LOGS {
            let (x, y) = (iter_dir(a, t).join(name), iter_dir(b, t).join(name));
            assert_eq!(fs::read(&x).unwrap(), fs::read(&y).unwrap(), "{} differs", x.display());
        }
    }
    assert_eq!(fs::read(a.join("queue.jsonl")).unwrap(), fs::read(b.join("queue.jsonl")).unwrap());
}
