//! The policy protocol shared by both roles, with deterministic test
//! doubles and an HTTP adapter for chat-completion endpoints.

mod oracle;
mod remote;
mod scripted;

pub use oracle::{noisy_oracle_answer, noisy_oracle_solve, FixedAnswer, NoisyOracle};
pub use remote::{RemoteConfig, RemotePolicy, TranscriptRecord};
pub use scripted::{scripted_challenger, ScriptedChallenger, ScriptedConfig};

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::RasterImage;
use crate::synth::VqaTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyRole {
    Challenger,
    Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub max_tokens: u32,
    pub presence_penalty: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 1.0,
            top_k: 40,
            max_tokens: 2048,
            presence_penalty: 2.0,
        }
    }
}

impl SamplingParams {
    /// Character cap standing in for the token limit.
    pub fn max_chars(&self) -> usize {
        self.max_tokens as usize * 4
    }
}

#[derive(Debug, Clone)]
pub struct ImageRef {
    pub digest: String,
    pub image: Arc<RasterImage>,
}

/// What a non-visual double is allowed to know about an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSummary {
    pub width: usize,
    pub height: usize,
    pub mean_color: [f64; 3],
}

impl ImageSummary {
    pub fn of(img: &RasterImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            mean_color: img.mean_color(),
        }
    }
}

/// Side information only test doubles read; remote policies ignore it.
#[derive(Debug, Clone, Default)]
pub enum Hints {
    #[default]
    None,
    Challenger {
        examples: Vec<String>,
        summary: ImageSummary,
    },
    Solver {
        task: Arc<VqaTask>,
    },
}

#[derive(Debug, Clone)]
pub struct PromptContext {
    pub role: PolicyRole,
    pub rendered_prompt: String,
    pub images: Vec<ImageRef>,
    pub sampling: SamplingParams,
    pub stream_seed: u64,
    pub hints: Hints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyResponse {
    pub text: String,
    #[serde(skip)]
    pub latency: Duration,
    pub attempts: u32,
}

impl PolicyResponse {
    pub fn immediate(text: String) -> Self {
        Self {
            text,
            latency: Duration::ZERO,
            attempts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnItem {
    pub context_id: String,
    pub response: String,
    pub reward: f64,
    pub ground_truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnBatch {
    pub role: PolicyRole,
    pub iteration: u64,
    pub items: Vec<LearnItem>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("request timed out")]
    Timeout,
    #[error("http status {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedJson(String),
    #[error("response contained no choices")]
    NoChoices,
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;

    fn generate(&self, ctx: &PromptContext) -> Result<PolicyResponse, PolicyError>;

    /// Training handoff; doubles may adapt, remote policies record it.
    fn learn(&mut self, _batch: &LearnBatch) -> Result<(), PolicyError> {
        Ok(())
    }

    /// Called once after each iteration's solver phase.
    fn end_iteration(&mut self, _iteration: u64) {}

    /// Serializable state for resuming a run.
    fn state(&self) -> serde_json::Value {
        serde_json::Value::Null
    }

    fn restore_state(&mut self, _state: &serde_json::Value) -> Result<(), PolicyError> {
        Ok(())
    }
}
