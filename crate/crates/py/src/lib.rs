//! Python module `evoforge`: the language, executor, rewards, queue and run
//! driver. Images cross the boundary as PNG bytes, tasks and reports as JSON.

use std::borrow::Cow;
use std::path::PathBuf;

use ::evoforge::evolve::{analyze_diversity, run_evolution, verify_run, LoopConfig};
use ::evoforge::image::{execute, execute_all, hash_similarity, load_png, perceptual_hash, save_png, ExecLimits, PerceptualHash, RasterImage};
use ::evoforge::lang::{parse_program, tokenize as lang_tokenize, Program};
use ::evoforge::queue::{ExampleQueue, InsertOutcome, Origin};
use ::evoforge::reward::{bleu_similarity as bleu, challenger_total as total, difficulty_reward as difficulty, ChallengerComponents, RewardWeights};
use ::evoforge::rlmath::{clipped_term as clipped, group_advantages as advantages, kl_low_var as kl};
use ::evoforge::synth::synth_pair;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn program(source: &str) -> PyResult<Program> {
    parse_program(source)
        .into_result()
        .map_err(|errs| PyValueError::new_err(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))
}

fn image(png: &[u8]) -> PyResult<RasterImage> {
    load_png(png).map_err(value_err)
}

fn png(img: &RasterImage) -> PyResult<Cow<'static, [u8]>> {
    Ok(Cow::Owned(save_png(img).map_err(value_err)?))
}

/// Canonical rendering of a program; raises ValueError on parse errors.
#[pyfunction]
fn canonicalize(source: &str) -> PyResult<String> {
    Ok(program(source)?.canonical())
}

#[pyfunction]
fn tokenize(source: &str) -> Vec<String> {
    lang_tokenize(source)
}

/// Output PNG of argument set `index` applied to the input PNG.
#[pyfunction]
fn run_program(source: &str, image_png: &[u8], index: usize) -> PyResult<Cow<'static, [u8]>> {
    let p = program(source)?;
    let set = p.arg_sets.get(index).ok_or_else(|| PyValueError::new_err(format!("no argument set {index}")))?;
    png(&execute(&p, set, &image(image_png)?, &ExecLimits::default()).map_err(value_err)?)
}

/// The Type-0 and Type-1 tasks as JSON strings.
#[pyfunction]
fn synthesize(source: &str, image_png: &[u8], seed: u64) -> PyResult<(String, String)> {
    let p = program(source)?;
    let original = image(image_png)?;
    let edited = execute_all(&p, &original, &ExecLimits::default()).map_err(value_err)?;
    let (t0, t1) = synth_pair(&p, &original, &edited, seed).map_err(value_err)?;
    let json = |t| serde_json::to_string(t).expect("task serializes");
    Ok((json(&t0), json(&t1)))
}

#[pyfunction]
fn dhash(image_png: &[u8]) -> PyResult<u64> {
    Ok(perceptual_hash(&image(image_png)?).0)
}

#[pyfunction]
fn dhash_similarity(a: u64, b: u64) -> f64 {
    hash_similarity(PerceptualHash(a), PerceptualHash(b))
}

#[pyfunction]
fn bleu_similarity(a: &str, b: &str) -> f64 {
    bleu(a, b)
}

#[pyfunction]
fn difficulty_reward(acc: f64) -> f64 {
    difficulty(acc)
}

/// Weighted challenger reward with the default weights.
#[pyfunction]
fn challenger_total(format: f64, valid: f64, diff: f64, div: f64) -> f64 {
    total(&ChallengerComponents { format, valid, diff, div }, &RewardWeights::default())
}

#[pyfunction]
#[pyo3(signature = (rewards, eps = ::evoforge::rlmath::DEFAULT_EPS_STD))]
fn group_advantages(rewards: Vec<f64>, eps: f64) -> Vec<f64> {
    advantages(&rewards, eps)
}

#[pyfunction]
fn kl_low_var(logp_current: f64, logp_ref: f64) -> f64 {
    kl(logp_current, logp_ref)
}

#[pyfunction]
fn clipped_term(ratio: f64, advantage: f64, eps_low: f64, eps_high: f64) -> f64 {
    clipped(ratio, advantage, eps_low, eps_high)
}

/// Bounded example queue with near-duplicate rejection.
#[pyclass(name = "ExampleQueue")]
struct PyQueue {
    inner: ExampleQueue,
    inserts: u64,
}

#[pymethods]
impl PyQueue {
    #[new]
    #[pyo3(signature = (capacity = ::evoforge::queue::DEFAULT_CAPACITY, sigma_high = ::evoforge::queue::DEFAULT_SIGMA_HIGH, seeded = true))]
    fn new(capacity: usize, sigma_high: f64, seeded: bool) -> PyResult<Self> {
        let inner = if seeded {
            ExampleQueue::with_seeds(&::evoforge::queue::seeds::SEEDS, capacity, sigma_high)
        } else {
            ExampleQueue::new(capacity, sigma_high)
        };
        Ok(Self {
            inner: inner.map_err(value_err)?,
            inserts: 0,
        })
    }

    /// Returns "accepted", "duplicate" or "below-floor".
    fn insert(&mut self, source: &str, r_diff: f64) -> PyResult<&'static str> {
        self.inserts += 1;
        let origin = Origin::Generated {
            iteration: 0,
            step: self.inserts,
        };
        Ok(match self.inner.insert(source, r_diff, origin).map_err(value_err)? {
            InsertOutcome::Accepted { .. } => "accepted",
            InsertOutcome::Duplicate { .. } => "duplicate",
            InsertOutcome::BelowFloor => "below-floor",
        })
    }

    /// (source, r_diff) pairs in priority order.
    fn entries(&self) -> Vec<(String, f64)> {
        self.inner.entries().iter().map(|e| (e.source.clone(), e.r_diff)).collect()
    }

    fn snapshot(&self) -> String {
        self.inner.snapshot()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Runs the loop from a JSON config; returns the report as JSON.
#[pyfunction]
fn evolve(py: Python<'_>, config_json: &str) -> PyResult<String> {
    let cfg: LoopConfig = serde_json::from_str(config_json).map_err(value_err)?;
    let report = py.detach(|| run_evolution(&cfg)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(serde_json::to_string(&report).expect("report serializes"))
}

/// Per-iteration mean pairwise BLEU distance and the count of bank
/// questions that failed re-verification.
#[pyfunction]
fn analyze(run_dir: PathBuf) -> PyResult<(Vec<f64>, usize)> {
    let d = analyze_diversity(&run_dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let v = verify_run(&run_dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((d, v.mismatches.len()))
}

#[pymodule]
fn evoforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(run_program, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(dhash, m)?)?;
    m.add_function(wrap_pyfunction!(dhash_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(bleu_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(difficulty_reward, m)?)?;
    m.add_function(wrap_pyfunction!(challenger_total, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(kl_low_var, m)?)?;
    m.add_function(wrap_pyfunction!(clipped_term, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_class::<PyQueue>()?;
    Ok(())
}
