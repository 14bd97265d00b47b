//! Policy-optimization arithmetic: group-normalized advantages, per-token
//! probability ratios, the asymmetric clipped surrogate and the
//! low-variance KL estimator, aggregated over all tokens of a group.
//!
//! Only the objective value is computed; there is no autodiff and no
//! parameter update here.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EPS_STD: f64 = 1e-6;
pub const DEFAULT_EPS_LOW: f64 = 0.28;
pub const DEFAULT_EPS_HIGH: f64 = 0.20;
pub const DEFAULT_BETA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    pub beta: f64,
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            eps_low: DEFAULT_EPS_LOW,
            eps_high: DEFAULT_EPS_HIGH,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RlMathError {
    #[error("{outputs} outputs but {advantages} advantages")]
    GroupMismatch { outputs: usize, advantages: usize },
    #[error("output {index}: log-prob sequences have lengths {current}/{old}/{reference}")]
    LengthMismatch {
        index: usize,
        current: usize,
        old: usize,
        reference: usize,
    },
    #[error("group contains no tokens")]
    NoTokens,
}

/// Per-token log-probabilities of one sampled output under the current,
/// behaviour (old) and reference policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub current: Vec<f64>,
    pub old: Vec<f64>,
    pub reference: Vec<f64>,
}

impl TokenLogProbs {
    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (divides by `G`).
pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// `(R_i - mean) / std` with population std; all zeros when `std < eps_std`.
pub fn group_advantages(rewards: &[f64], eps_std: f64) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let m = mean(rewards);
    let sd = population_std(rewards);
    if sd < eps_std {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - m) / sd).collect()
}

pub fn token_ratio(logp_new: f64, logp_old: f64) -> f64 {
    (logp_new - logp_old).exp()
}

/// `min(ratio * adv, clip(ratio, 1 - eps_low, 1 + eps_high) * adv)`.
pub fn clipped_term(ratio: f64, advantage: f64, eps_low: f64, eps_high: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps_low, 1.0 + eps_high);
    (ratio * advantage).min(clipped * advantage)
}

/// `exp(d) - d - 1` with `d = logp_ref - logp_current`.
pub fn kl_low_var(logp_current: f64, logp_ref: f64) -> f64 {
    let d = logp_ref - logp_current;
    // exp_m1 keeps precision near d = 0, where the estimator is tiny.
    (d.exp_m1() - d).max(0.0)
}

/// Token-level objective of one group, normalized by the total token count.
pub fn objective_estimate(outputs: &[TokenLogProbs], advantages: &[f64], params: &ObjectiveParams) -> Result<f64, RlMathError> {
    if outputs.len() != advantages.len() {
        return Err(RlMathError::GroupMismatch {
            outputs: outputs.len(),
            advantages: advantages.len(),
        });
    }
    let mut total = 0.0;
    let mut tokens = 0usize;
    for (index, (o, &adv)) in outputs.iter().zip(advantages).enumerate() {
        if o.old.len() != o.current.len() || o.reference.len() != o.current.len() {
            return Err(RlMathError::LengthMismatch {
                index,
                current: o.current.len(),
                old: o.old.len(),
                reference: o.reference.len(),
            });
        }
        for ((&cur, &old), &reference) in o.current.iter().zip(&o.old).zip(&o.reference) {
            let ratio = token_ratio(cur, old);
            total += clipped_term(ratio, adv, params.eps_low, params.eps_high) - params.beta * kl_low_var(cur, reference);
        }
        tokens += o.len();
    }
    if tokens == 0 {
        return Err(RlMathError::NoTokens);
    }
    Ok(total / tokens as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn advantages_examples() {
        assert_eq!(group_advantages(&[1.0, 0.0, 1.0, 0.0], DEFAULT_EPS_STD), [1.0, -1.0, 1.0, -1.0]);
        assert_eq!(group_advantages(&[0.3; 5], DEFAULT_EPS_STD), [0.0; 5]);
        assert_eq!(group_advantages(&[2.0, 0.0], DEFAULT_EPS_STD), [1.0, -1.0]);
        assert_eq!(group_advantages(&[0.7], DEFAULT_EPS_STD), [0.0]);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(token_ratio(-1.3, -1.3), 1.0);
        assert!(close(token_ratio(2f64.ln(), 0.0), 2.0));
        assert!(close(token_ratio(-(4f64.ln()), 0.0), 0.25));
    }

    #[test]
    fn clip_examples() {
        assert!(close(clipped_term(1.5, 1.0, 0.28, 0.2), 1.2));
        assert!(close(clipped_term(0.5, -1.0, 0.28, 0.2), -0.72));
        for adv in [-2.0, -0.1, 0.0, 0.4, 3.0] {
            assert_eq!(clipped_term(1.0, adv, 0.28, 0.2), adv);
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_low_var(-0.5, -0.5), 0.0);
        assert!(close(kl_low_var(0.0, 1.0), std::f64::consts::E - 2.0));
        assert!(close(kl_low_var(0.0, -1.0), (-1f64).exp()));
    }

    #[test]
    fn objective_examples() {
        let one = TokenLogProbs {
            current: vec![-0.2],
            old: vec![-0.2],
            reference: vec![-0.2],
        };
        let p0 = ObjectiveParams { beta: 0.0, ..ObjectiveParams::default() };
        assert_eq!(objective_estimate(std::slice::from_ref(&one), &[1.0], &p0).unwrap(), 1.0);

        // lengths 1 and 3, ratio 1, advantages 1 and -1 -> (1 - 3) / 4
        let three = TokenLogProbs {
            current: vec![-0.1; 3],
            old: vec![-0.1; 3],
            reference: vec![-0.1; 3],
        };
        let v = objective_estimate(&[one.clone(), three.clone()], &[1.0, -1.0], &p0).unwrap();
        assert!(close(v, -0.5));

        // beta > 0 with all ratios 1 and reference equal: token-weighted mean advantage
        let p = ObjectiveParams::default();
        let v = objective_estimate(&[one, three], &[0.5, 0.25], &p).unwrap();
        assert!(close(v, (0.5 + 3.0 * 0.25) / 4.0));
    }

    #[test]
    fn objective_shape_errors() {
        let bad = TokenLogProbs {
            current: vec![0.0; 2],
            old: vec![0.0],
            reference: vec![0.0; 2],
        };
        let p = ObjectiveParams::default();
        assert!(matches!(objective_estimate(&[bad], &[1.0], &p), Err(RlMathError::LengthMismatch { .. })));
        assert!(matches!(objective_estimate(&[], &[1.0], &p), Err(RlMathError::GroupMismatch { .. })));
        let empty = TokenLogProbs {
            current: vec![],
            old: vec![],
            reference: vec![],
        };
        assert_eq!(objective_estimate(&[empty], &[1.0], &p), Err(RlMathError::NoTokens));
    }
}
