//! Bounded store of example programs ranked by difficulty, with recency
//! tie-breaking and BLEU deduplication.

pub mod seeds;

use std::cmp::Ordering;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::parse_program;
use crate::reward::{profile_similarity, BleuProfile};
use crate::seed::rng_from;

pub const DEFAULT_CAPACITY: usize = 50;
pub const DEFAULT_SIGMA_HIGH: f64 = 0.25;
/// Difficulty assigned to seed programs, which are never measured.
pub const SEED_R_DIFF: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Generated { iteration: u64, step: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    pub source: String,
    pub r_diff: f64,
    pub insertion_counter: u64,
    pub origin: Origin,
}

/// Priority order: higher difficulty first, then the later insertion.
fn priority(a: &QueueEntry, b: &QueueEntry) -> Ordering {
    b.r_diff.total_cmp(&a.r_diff).then(b.insertion_counter.cmp(&a.insertion_counter))
}

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("seed {index} does not parse: {message}")]
    SeedParse { index: usize, message: String },
    #[error("entry does not parse: {0}")]
    InvalidSource(String),
    #[error("difficulty {0} is outside [0, 1]")]
    InvalidDifficulty(f64),
    #[error("asked for {wanted} entries but the queue holds {size}")]
    InsufficientEntries { wanted: usize, size: usize },
    #[error("malformed snapshot: {0}")]
    MalformedSnapshot(String),
    #[error("capacity must be at least 1")]
    ZeroCapacity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum InsertOutcome {
    Accepted { evicted: Option<QueueEntry> },
    /// Too similar to an entry already held.
    Duplicate { similarity: f64, of_counter: u64 },
    /// Accepted into a full queue and immediately evicted as the minimum.
    BelowFloor,
}

impl InsertOutcome {
    pub fn accepted(&self) -> bool {
        matches!(self, InsertOutcome::Accepted { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    capacity: usize,
    sigma_high: f64,
    counter: u64,
    entries: usize,
}

#[derive(Debug, Clone)]
pub struct ExampleQueue {
    capacity: usize,
    sigma_high: f64,
    counter: u64,
    /// Sorted by [`priority`].
    entries: Vec<QueueEntry>,
    profiles: Vec<BleuProfile>,
}

impl PartialEq for ExampleQueue {
    fn eq(&self, other: &Self) -> bool {
        self.capacity == other.capacity && self.sigma_high == other.sigma_high && self.counter == other.counter && self.entries == other.entries
    }
}

impl ExampleQueue {
    pub fn new(capacity: usize, sigma_high: f64) -> Result<Self, QueueError> {
        if capacity == 0 {
            return Err(QueueError::ZeroCapacity);
        }
        Ok(Self {
            capacity,
            sigma_high,
            counter: 0,
            entries: Vec::new(),
            profiles: Vec::new(),
        })
    }

    /// Queue holding `seeds` with the sentinel difficulty. Seeds are checked
    /// for parse errors but not for mutual similarity.
    pub fn with_seeds(seeds: &[&str], capacity: usize, sigma_high: f64) -> Result<Self, QueueError> {
        let mut q = Self::new(capacity, sigma_high)?;
        for (index, s) in seeds.iter().enumerate() {
            let program = parse_program(s).into_result().map_err(|e| QueueError::SeedParse {
                index,
                message: e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            })?;
            q.push_unchecked(program.canonical(), SEED_R_DIFF, Origin::Seed);
        }
        Ok(q)
    }

    pub fn with_default_seeds() -> Self {
        Self::with_seeds(&seeds::SEEDS, DEFAULT_CAPACITY, DEFAULT_SIGMA_HIGH).expect("built-in seeds parse")
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn sigma_high(&self) -> f64 {
        self.sigma_high
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in priority order.
    pub fn entries(&self) -> &[QueueEntry] {
        &self.entries
    }

    fn push_unchecked(&mut self, source: String, r_diff: f64, origin: Origin) -> Option<QueueEntry> {
        self.counter += 1;
        let entry = QueueEntry {
            source,
            r_diff,
            insertion_counter: self.counter,
            origin,
        };
        let pos = self.entries.partition_point(|e| priority(e, &entry) == Ordering::Less);
        self.profiles.insert(pos, BleuProfile::from_source(&entry.source));
        self.entries.insert(pos, entry);
        if self.entries.len() > self.capacity {
            self.profiles.pop();
            self.entries.pop()
        } else {
            None
        }
    }

    /// Highest similarity to a held entry, with that entry's counter.
    pub fn max_similarity(&self, source: &str) -> Option<(f64, u64)> {
        let p = BleuProfile::from_source(source);
        self.profiles
            .iter()
            .zip(&self.entries)
            .map(|(ep, e)| (profile_similarity(&p, ep), e.insertion_counter))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// Inserts `source` (canonicalized) unless it is a near duplicate.
    pub fn insert(&mut self, source: &str, r_diff: f64, origin: Origin) -> Result<InsertOutcome, QueueError> {
        if !(0.0..=1.0).contains(&r_diff) {
            return Err(QueueError::InvalidDifficulty(r_diff));
        }
        let program = parse_program(source)
            .into_result()
            .map_err(|e| QueueError::InvalidSource(e.first().map(|x| x.to_string()).unwrap_or_default()))?;
        let canonical = program.canonical();
        if let Some((similarity, of_counter)) = self.max_similarity(&canonical) {
            if similarity > self.sigma_high {
                return Ok(InsertOutcome::Duplicate { similarity, of_counter });
            }
        }
        let counter = self.counter + 1;
        Ok(match self.push_unchecked(canonical, r_diff, origin) {
            Some(e) if e.insertion_counter == counter => InsertOutcome::BelowFloor,
            evicted => InsertOutcome::Accepted { evicted },
        })
    }

    /// `n` entries drawn uniformly without replacement.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<QueueEntry>, QueueError> {
        if n > self.len() {
            return Err(QueueError::InsufficientEntries { wanted: n, size: self.len() });
        }
        let mut rng = rng_from(seed);
        Ok(index::sample(&mut rng, self.len(), n).into_iter().map(|i| self.entries[i].clone()).collect())
    }

    /// JSON lines: a header, then one entry per line in priority order.
    pub fn snapshot(&self) -> String {
        let header = Header {
            capacity: self.capacity,
            sigma_high: self.sigma_high,
            counter: self.counter,
            entries: self.entries.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn restore(text: &str) -> Result<Self, QueueError> {
        let bad = |m: String| QueueError::MalformedSnapshot(m);
        if !text.ends_with('\n') {
            return Err(bad("missing final newline".into()));
        }
        let mut lines = text.lines();
        let header: Header = serde_json::from_str(lines.next().ok_or_else(|| bad("empty".into()))?).map_err(|e| bad(format!("header: {e}")))?;
        let mut q = Self::new(header.capacity, header.sigma_high).map_err(|e| bad(e.to_string()))?;
        q.counter = header.counter;
        for (i, line) in lines.enumerate() {
            let e: QueueEntry = serde_json::from_str(line).map_err(|err| bad(format!("entry {i}: {err}")))?;
            if e.insertion_counter > q.counter || !(0.0..=1.0).contains(&e.r_diff) {
                return Err(bad(format!("entry {i} is out of range")));
            }
            q.profiles.push(BleuProfile::from_source(&e.source));
            q.entries.push(e);
        }
        if q.entries.len() != header.entries || q.entries.len() > q.capacity {
            return Err(bad(format!("expected {} entries, found {}", header.entries, q.entries.len())));
        }
        if q.entries.windows(2).any(|w| priority(&w[0], &w[1]) != Ordering::Less) {
            return Err(bad("entries are not in priority order".into()));
        }
        Ok(q)
    }
}
