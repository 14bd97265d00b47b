use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Hints, Policy, PolicyError, PolicyResponse, PromptContext};
use crate::seed::rng_from;
use crate::synth::{option_letter, VqaTask};

/// Option index answered by an oracle that is right with probability `p`
/// and otherwise picks one of the wrong options uniformly.
pub fn noisy_oracle_answer(correct: usize, n: usize, p: f64, seed: u64) -> usize {
    let mut rng = rng_from(seed);
    let u: f64 = rng.random();
    if u < p || n < 2 {
        return correct;
    }
    let wrong = rng.random_range(0..n - 1);
    if wrong >= correct {
        wrong + 1
    } else {
        wrong
    }
}

pub fn noisy_oracle_solve(task: &VqaTask, p: f64, seed: u64) -> String {
    let i = noisy_oracle_answer(task.correct_option, task.n(), p, seed);
    format!("\\boxed{{{}}}", option_letter(i))
}

/// Solver double whose accuracy rises by `increment` per iteration up to
/// `ceiling`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyOracle {
    pub p: f64,
    pub increment: f64,
    pub ceiling: f64,
}

impl NoisyOracle {
    pub fn new(p: f64, increment: f64, ceiling: f64) -> Self {
        Self { p, increment, ceiling }
    }
}

impl Policy for NoisyOracle {
    fn name(&self) -> String {
        format!("noisy-oracle(p={})", self.p)
    }

    fn generate(&self, ctx: &PromptContext) -> Result<PolicyResponse, PolicyError> {
        match &ctx.hints {
            Hints::Solver { task } => Ok(PolicyResponse::immediate(noisy_oracle_solve(task, self.p, ctx.stream_seed))),
            _ => Err(PolicyError::InvalidContext("noisy oracle needs the task".into())),
        }
    }

    fn end_iteration(&mut self, _iteration: u64) {
        self.p = (self.p + self.increment).min(self.ceiling);
    }

    fn state(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("plain struct")
    }

    fn restore_state(&mut self, state: &serde_json::Value) -> Result<(), PolicyError> {
        *self = serde_json::from_value(state.clone()).map_err(|e| PolicyError::MalformedJson(e.to_string()))?;
        Ok(())
    }
}

/// Always answers the same letter.
#[derive(Debug, Clone, Copy)]
pub struct FixedAnswer(pub char);

impl Policy for FixedAnswer {
    fn name(&self) -> String {
        format!("fixed({})", self.0)
    }

    fn generate(&self, _ctx: &PromptContext) -> Result<PolicyResponse, PolicyError> {
        Ok(PolicyResponse::immediate(format!("\\boxed{{{}}}", self.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        for s in 0..200 {
            assert_eq!(noisy_oracle_answer(2, 4, 1.0, s), 2);
            assert_ne!(noisy_oracle_answer(2, 4, 0.0, s), 2);
        }
    }

    #[test]
    fn wrong_letters_are_uniform() {
        let mut counts = [0usize; 4];
        let draws = 10_000;
        for s in 0..draws {
            counts[noisy_oracle_answer(1, 4, 0.0, s)] += 1;
        }
        assert_eq!(counts[1], 0);
        for i in [0, 2, 3] {
            let f = counts[i] as f64 / draws as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn increments_are_capped() {
        let mut o = NoisyOracle::new(0.4, 0.1, 0.45);
        o.end_iteration(0);
        assert_eq!(o.p, 0.45);
        let mut o = NoisyOracle::new(0.4, 0.1, 1.0);
        o.end_iteration(0);
        assert!((o.p - 0.5).abs() < 1e-12);
    }
}
