//! The self-evolution loop: challenger phase, question-bank selection,
//! solver phase, run persistence and offline analysis.

mod analysis;
mod config;
mod library;
mod records;
mod run;

pub use analysis::{analyze_diversity, build_report, mean_pairwise_distance, rescore_run, verify_run, RescoreReport, VerifyReport};
pub use config::{LoopConfig, PolicyBinding};
pub use library::{builtin_library, load_library, synthetic_image, write_builtin_library, BUILTIN_LIBRARY_SIZE};
pub use records::{
    iter_dir, read_lines, BankRecord, IterationReport, MeanComponents, QuestionRecord, RewardRecord, RolloutRecord, RunReport, SolverRecord,
    StepRecord,
};
pub use run::{resume, run_evolution, run_evolution_with, select_question_bank, Checkpoint, RunControl, RunStatus};

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::image::StoreError;
use crate::queue::QueueError;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("image library: {0}")]
    Library(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error("policy: {0}")]
    Policy(String),
    #[error("missing logs: {0}")]
    MissingLogs(String),
    #[error("corrupt log: {0}")]
    Corrupt(String),
    #[error("run directory {0} already holds a run; resume it or pick another")]
    RunDirNotEmpty(PathBuf),
}

impl EvolveError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        EvolveError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Maps `f` over `items` on up to `threads` scoped workers, keeping order.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}
