//! Execution-verified self-play engine.
//!
//! A challenger writes small image-transformation programs, the engine runs
//! them to build multiple-choice visual questions whose answers are fixed by
//! execution, and a solver is scored against those answers. The modules map
//! onto the pieces of that loop:
//!
//! - [`lang`]: the transformation language (lexer, parser, canonical form)
//! - [`image`]: raster images, the deterministic executor, dHash, PNG, store
//! - [`synth`]: Type-0 / Type-1 question synthesis and answer grading
//! - [`reward`]: format, validity, difficulty, BLEU diversity and totals
//! - [`rlmath`]: group advantages, ratios, clipping and the KL estimator
//! - [`queue`]: the bounded example queue with BLEU deduplication
//! - [`policy`]: policy protocol, scripted doubles and a remote adapter
//! - [`evolve`]: the iteration loop, run logs, scoring and analysis

pub mod lang;
pub mod seed;
pub mod image;
pub mod rlmath;
pub mod synth;
pub mod reward;
pub mod queue;
pub mod policy;
pub mod evolve;
