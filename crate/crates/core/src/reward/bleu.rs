//! Token-level BLEU-4 between program texts.
//!
//! Uniform n-gram weights, add-one smoothing on every modified precision and
//! the standard brevity penalty. The similarity used for clustering and
//! deduplication is the mean of the two directional scores.

use std::cmp::Ordering;

use crate::lang::tokenize;

pub const MAX_ORDER: usize = 4;

/// A token stream with its distinct n-grams precomputed, for repeated
/// comparisons against many others.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuProfile {
    tokens: Vec<String>,
    /// Per order, (start index, count) of each distinct n-gram, sorted by
    /// the n-gram itself.
    grams: [Vec<(usize, usize)>; MAX_ORDER],
}

impl BleuProfile {
    pub fn new(tokens: Vec<String>) -> Self {
        let grams = std::array::from_fn(|k| {
            let n = k + 1;
            let mut starts: Vec<usize> = (0..tokens.len().saturating_sub(n - 1)).collect();
            starts.sort_by(|&i, &j| tokens[i..i + n].cmp(&tokens[j..j + n]));
            let mut out: Vec<(usize, usize)> = Vec::new();
            for i in starts {
                match out.last_mut() {
                    Some((j, c)) if tokens[*j..*j + n] == tokens[i..i + n] => *c += 1,
                    _ => out.push((i, 1)),
                }
            }
            out
        });
        Self { tokens, grams }
    }

    pub fn from_source(source: &str) -> Self {
        Self::new(tokenize(source))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Clipped count of order-`n` matches of `self` against `other`.
    fn clipped(&self, other: &Self, n: usize) -> usize {
        let (a, b) = (&self.grams[n - 1], &other.grams[n - 1]);
        let (mut i, mut j, mut hits) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            let (ga, gb) = (&self.tokens[a[i].0..a[i].0 + n], &other.tokens[b[j].0..b[j].0 + n]);
            match ga.cmp(gb) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    hits += a[i].1.min(b[j].1);
                    i += 1;
                    j += 1;
                }
            }
        }
        hits
    }
}

/// Directional sentence BLEU of `candidate` against one `reference`.
pub fn profile_bleu(candidate: &BleuProfile, reference: &BleuProfile) -> f64 {
    let (cl, rl) = (candidate.tokens.len(), reference.tokens.len());
    match (cl == 0, rl == 0) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let mut log_precision = 0.0;
    for n in 1..=MAX_ORDER {
        let clipped = candidate.clipped(reference, n);
        let total = cl.saturating_sub(n - 1);
        let p = (clipped as f64 + 1.0) / (total as f64 + 1.0);
        log_precision += p.ln() / MAX_ORDER as f64;
    }
    let (c, r) = (cl as f64, rl as f64);
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    brevity * log_precision.exp()
}

pub fn profile_similarity(a: &BleuProfile, b: &BleuProfile) -> f64 {
    0.5 * (profile_bleu(a, b) + profile_bleu(b, a))
}

pub fn sentence_bleu(candidate: &[String], reference: &[String]) -> f64 {
    profile_bleu(&BleuProfile::new(candidate.to_vec()), &BleuProfile::new(reference.to_vec()))
}

pub fn bleu_similarity_tokens(a: &[String], b: &[String]) -> f64 {
    profile_similarity(&BleuProfile::new(a.to_vec()), &BleuProfile::new(b.to_vec()))
}

/// Symmetric BLEU similarity in `[0, 1]` over language tokens.
pub fn bleu_similarity(a: &str, b: &str) -> f64 {
    profile_similarity(&BleuProfile::from_source(a), &BleuProfile::from_source(b))
}
