//! Multiple-choice question synthesis from execution results.
//!
//! Type-0 shows the edited images in shuffled order and asks which one a
//! given parameter set produces. Type-1 shows one target image first and
//! asks which (shuffled) parameter set produced it.

mod grade;
mod template;

pub use grade::{grade_answer, grade_answer_with, option_letter, GradeOptions, GradeResult};
pub use template::{
    challenger_prompt, fill_placeholders, solver_prompt, type0_template, type1_template, CHALLENGER_TEMPLATE, SOLVER_TEMPLATE,
    TYPE0_TEMPLATE, TYPE1_TEMPLATE,
};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{content_digest, RasterImage};
use crate::lang::{render_param_set, Program};
use crate::seed::{derive, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Type0,
    Type1,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("program has {sets} argument sets but {images} edited images were supplied")]
    LengthMismatch { sets: usize, images: usize },
    #[error("probe index {probe} out of range for {n} candidates")]
    ProbeOutOfRange { probe: usize, n: usize },
    #[error("permutation of length {len} is not a permutation of 0..{n}")]
    BadPermutation { len: usize, n: usize },
    #[error("need at least one candidate, and at most 26")]
    CandidateCount,
}

/// A synthesized question with its verified answer.
///
/// `permutation[slot]` is the original argument-set index shown at `slot`.
/// For Type-0 the slots are image positions `image_1..image_N`; for Type-1
/// they are the option letters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VqaTask {
    pub kind: TaskKind,
    pub original: String,
    /// Digests of `image_1..image_N` as presented.
    pub edited: Vec<String>,
    pub program_source: String,
    pub probe_index: usize,
    pub probe_args: String,
    pub options: Vec<String>,
    pub correct_option: usize,
    pub permutation: Vec<usize>,
    pub shuffle_seed: u64,
    pub rendered_prompt: String,
}

impl VqaTask {
    pub fn n(&self) -> usize {
        self.options.len()
    }

    pub fn correct_letter(&self) -> char {
        option_letter(self.correct_option)
    }

    /// Regenerates the prompt from the other fields.
    pub fn render(&self) -> String {
        render_prompt(self.kind, &self.program_source, &self.probe_args, &self.options)
    }

    /// Argument-set index behind option `slot`.
    pub fn arg_set_of_option(&self, slot: usize) -> Option<usize> {
        self.permutation.get(slot).copied()
    }
}

pub fn render_prompt(kind: TaskKind, code: &str, probe_args: &str, options: &[String]) -> String {
    let n = options.len();
    let mut values: Vec<(String, String)> = vec![("code_str".into(), code.to_string()), ("arg_chosen".into(), probe_args.to_string())];
    for (i, o) in options.iter().enumerate() {
        values.push((format!("arg_{}", i + 1), o.clone()));
    }
    let template = match kind {
        TaskKind::Type0 => type0_template(n),
        TaskKind::Type1 => type1_template(n),
    };
    fill_placeholders(&template, &values)
}

/// Seeded permutation of `0..n`.
pub fn shuffle_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from(seed));
    perm
}

fn check(program: &Program, edited: &[RasterImage], probe: usize) -> Result<usize, SynthError> {
    let n = program.n();
    if edited.len() != n {
        return Err(SynthError::LengthMismatch {
            sets: n,
            images: edited.len(),
        });
    }
    if n == 0 || n > 26 {
        return Err(SynthError::CandidateCount);
    }
    if probe >= n {
        return Err(SynthError::ProbeOutOfRange { probe, n });
    }
    Ok(n)
}

fn check_perm(perm: &[usize], n: usize) -> Result<(), SynthError> {
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
        return Err(SynthError::BadPermutation { len: perm.len(), n });
    }
    Ok(())
}

/// Type-0 with an explicit presentation permutation.
pub fn synth_type0_with(
    program: &Program,
    original: &RasterImage,
    edited: &[RasterImage],
    probe: usize,
    permutation: Vec<usize>,
    shuffle_seed: u64,
) -> Result<VqaTask, SynthError> {
    let n = check(program, edited, probe)?;
    check_perm(&permutation, n)?;
    let options: Vec<String> = (1..=n).map(|i| format!("image_{i}")).collect();
    let code = program.canonical();
    let probe_args = render_param_set(&program.arg_sets[probe]);
    let correct_option = permutation.iter().position(|&i| i == probe).expect("checked permutation");
    let rendered_prompt = render_prompt(TaskKind::Type0, &code, &probe_args, &options);
    Ok(VqaTask {
        kind: TaskKind::Type0,
        original: content_digest(original),
        edited: permutation.iter().map(|&i| content_digest(&edited[i])).collect(),
        program_source: code,
        probe_index: probe,
        probe_args,
        options,
        correct_option,
        permutation,
        shuffle_seed,
        rendered_prompt,
    })
}

pub fn synth_type0(program: &Program, original: &RasterImage, edited: &[RasterImage], probe: usize, seed: u64) -> Result<VqaTask, SynthError> {
    let n = check(program, edited, probe)?;
    synth_type0_with(program, original, edited, probe, shuffle_permutation(n, seed), seed)
}

/// Type-1 with an explicit option permutation. `image_1` is the probe's
/// output, followed by the other outputs in argument-set order.
pub fn synth_type1_with(
    program: &Program,
    original: &RasterImage,
    edited: &[RasterImage],
    probe: usize,
    permutation: Vec<usize>,
    shuffle_seed: u64,
) -> Result<VqaTask, SynthError> {
    let n = check(program, edited, probe)?;
    check_perm(&permutation, n)?;
    let options: Vec<String> = permutation.iter().map(|&i| render_param_set(&program.arg_sets[i])).collect();
    let code = program.canonical();
    let probe_args = render_param_set(&program.arg_sets[probe]);
    let correct_option = permutation.iter().position(|&i| i == probe).expect("checked permutation");
    let rendered_prompt = render_prompt(TaskKind::Type1, &code, &probe_args, &options);
    let shown = std::iter::once(probe).chain((0..n).filter(|&i| i != probe));
    Ok(VqaTask {
        kind: TaskKind::Type1,
        original: content_digest(original),
        edited: shown.map(|i| content_digest(&edited[i])).collect(),
        program_source: code,
        probe_index: probe,
        probe_args,
        options,
        correct_option,
        permutation,
        shuffle_seed,
        rendered_prompt,
    })
}

pub fn synth_type1(program: &Program, original: &RasterImage, edited: &[RasterImage], probe: usize, seed: u64) -> Result<VqaTask, SynthError> {
    let n = check(program, edited, probe)?;
    synth_type1_with(program, original, edited, probe, shuffle_permutation(n, seed), seed)
}

/// Seed-selected probe index.
pub fn choose_probe(n: usize, seed: u64) -> usize {
    use rand::Rng;
    rng_from(derive(seed, "probe")).random_range(0..n)
}

/// One Type-0 and one Type-1 task sharing a seed-selected probe; each
/// task's shuffle comes from its own substream.
pub fn synth_pair(program: &Program, original: &RasterImage, edited: &[RasterImage], seed: u64) -> Result<(VqaTask, VqaTask), SynthError> {
    check(program, edited, 0)?;
    let probe = choose_probe(program.n(), seed);
    let t0 = synth_type0(program, original, edited, probe, derive(seed, "type0"))?;
    let t1 = synth_type1(program, original, edited, probe, derive(seed, "type1"))?;
    Ok((t0, t1))
}

/// `count` pairs with distinct substreams; `count = 1` equals [`synth_pair`].
pub fn synth_pairs(
    program: &Program,
    original: &RasterImage,
    edited: &[RasterImage],
    seed: u64,
    count: usize,
) -> Result<Vec<(VqaTask, VqaTask)>, SynthError> {
    (0..count)
        .map(|k| {
            let s = if k == 0 { seed } else { derive(seed, &format!("pair{k}")) };
            synth_pair(program, original, edited, s)
        })
        .collect()
}

/// Images shown to the solver: `image_0` then `image_1..image_N`, as digests.
pub fn presented_digests(task: &VqaTask) -> Vec<&str> {
    std::iter::once(task.original.as_str()).chain(task.edited.iter().map(String::as_str)).collect()
}
