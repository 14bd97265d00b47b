use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ops, RasterImage};
use crate::lang::{Arg, Axis, Op, ParamSet, Program, Step, Value};

/// Resource limits for one program execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecLimits {
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub max_steps: usize,
    /// Pixel budget for every intermediate image.
    pub max_pixels: usize,
    pub min_side: usize,
    pub max_side: usize,
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

impl Default for ExecLimits {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(5),
            max_steps: 16,
            max_pixels: 2048 * 2048,
            min_side: 32,
            max_side: 2048,
        }
    }
}

impl ExecLimits {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout.is_zero() || self.max_steps == 0 || self.max_pixels == 0 || self.min_side == 0 || self.max_side == 0 {
            return Err("all execution limits must be positive".into());
        }
        if self.min_side > self.max_side {
            return Err(format!("min_side {} exceeds max_side {}", self.min_side, self.max_side));
        }
        Ok(())
    }

    pub fn side_ok(&self, img: &RasterImage) -> bool {
        let ok = |s: usize| (self.min_side..=self.max_side).contains(&s);
        ok(img.width()) && ok(img.height())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExecErrorKind {
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
    #[error("program has {steps} steps, limit is {limit}")]
    StepLimit { steps: usize, limit: usize },
    #[error("{width}x{height} image exceeds the {limit}-pixel budget")]
    PixelLimit { width: usize, height: usize, limit: usize },
    #[error("execution exceeded {limit_ms} ms")]
    Timeout { limit_ms: u64 },
    #[error("output {width}x{height} is outside side bounds [{min}, {max}]")]
    SizeBounds { width: usize, height: usize, min: usize, max: usize },
    #[error("crop box ({x0},{y0})-({x1},{y1}) is empty")]
    CropDegenerate { x0: usize, y0: usize, x1: usize, y1: usize },
    #[error("jigsaw order {order:?} is not a permutation of 0..{}", n * n)]
    JigsawNotPermutation { n: usize, order: Vec<i64> },
    #[error("{0}")]
    Degenerate(String),
    #[error("parameter `{0}` is not bound")]
    UnboundParam(String),
    #[error("argument does not fit the op signature: {0}")]
    BadArgument(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("step {step}: {kind}")]
pub struct ExecError {
    pub step: usize,
    pub kind: ExecErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("parameter set {index}: {error}")]
pub struct ExecAllError {
    pub index: usize,
    pub error: ExecError,
}

/// A step argument after `$name` substitution.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Value(Value),
    Axis(Axis),
}

pub fn resolve_args(step: &Step, params: &ParamSet) -> Result<Vec<Resolved>, ExecErrorKind> {
    step.args
        .iter()
        .map(|a| match a {
            Arg::Lit(v) => Ok(Resolved::Value(v.clone())),
            Arg::Axis(x) => Ok(Resolved::Axis(*x)),
            Arg::Param(name) => params
                .get(name)
                .cloned()
                .map(Resolved::Value)
                .ok_or_else(|| ExecErrorKind::UnboundParam(name.clone())),
        })
        .collect()
}

fn bad(op: Op) -> ExecErrorKind {
    ExecErrorKind::BadArgument(format!("`{op}`"))
}

fn int(arg: &Resolved, op: Op) -> Result<i64, ExecErrorKind> {
    match arg {
        Resolved::Value(v) => v.as_int().ok_or_else(|| bad(op)),
        Resolved::Axis(_) => Err(bad(op)),
    }
}

fn number(arg: &Resolved, op: Op) -> Result<crate::lang::Decimal, ExecErrorKind> {
    match arg {
        Resolved::Value(v) => v.as_decimal().ok_or_else(|| bad(op)),
        Resolved::Axis(_) => Err(bad(op)),
    }
}

fn list(arg: &Resolved, op: Op) -> Result<&[i64], ExecErrorKind> {
    match arg {
        Resolved::Value(v) => v.as_list().ok_or_else(|| bad(op)),
        Resolved::Axis(_) => Err(bad(op)),
    }
}

fn mille_box(args: &[Resolved], op: Op) -> Result<ops::MilleBox, ExecErrorKind> {
    match args {
        [a, b, c, d, ..] => Ok([int(a, op)?, int(b, op)?, int(c, op)?, int(d, op)?]),
        [one, ..] => {
            let items = list(one, op)?;
            <[i64; 4]>::try_from(items).map_err(|_| bad(op))
        }
        [] => Err(bad(op)),
    }
}

/// Applies one op with already-resolved arguments.
pub fn apply_op(op: Op, args: &[Resolved], img: &RasterImage, limits: &ExecLimits) -> Result<RasterImage, ExecErrorKind> {
    let arity_ok = op.form_for_arity(args.len()).is_some();
    if !arity_ok {
        return Err(bad(op));
    }
    match op {
        Op::Rotate => ops::rotate(img, number(&args[0], op)?, limits.max_pixels),
        Op::Flip => match args[0] {
            Resolved::Axis(axis) => Ok(ops::flip(img, axis)),
            Resolved::Value(_) => Err(bad(op)),
        },
        Op::Crop => ops::crop(img, mille_box(args, op)?),
        Op::Jigsaw => ops::jigsaw(img, int(&args[0], op)?, list(&args[1], op)?),
        Op::DrawRect => {
            let width = int(args.last().expect("arity checked"), op)?;
            ops::draw_rect(img, mille_box(&args[..args.len() - 1], op)?, width)
        }
        Op::Brightness => Ok(ops::brightness(img, number(&args[0], op)?)),
        Op::Contrast => Ok(ops::contrast(img, number(&args[0], op)?)),
        Op::Grayscale => Ok(ops::grayscale(img)),
        Op::Invert => Ok(ops::invert(img)),
        Op::Pixelate => ops::pixelate(img, int(&args[0], op)?),
        Op::Resize => ops::resize(img, int(&args[0], op)?, int(&args[1], op)?, limits.max_pixels),
    }
}

/// Runs `steps` in order over `input`. The step limit, the pixel budget and
/// the wall-clock timeout are checked before and between steps; the side
/// bounds are checked on the final output.
pub fn execute_resolved(steps: &[Step], params: &ParamSet, input: &RasterImage, limits: &ExecLimits) -> Result<RasterImage, ExecError> {
    let at = |step: usize| move |kind: ExecErrorKind| ExecError { step, kind };
    limits.validate().map_err(|m| ExecError {
        step: 0,
        kind: ExecErrorKind::InvalidLimits(m),
    })?;
    if steps.len() > limits.max_steps {
        return Err(ExecError {
            step: limits.max_steps,
            kind: ExecErrorKind::StepLimit {
                steps: steps.len(),
                limit: limits.max_steps,
            },
        });
    }
    if input.width() * input.height() > limits.max_pixels {
        return Err(at(0)(ExecErrorKind::PixelLimit {
            width: input.width(),
            height: input.height(),
            limit: limits.max_pixels,
        }));
    }
    let started = Instant::now();
    let mut current: Option<RasterImage> = None;
    for (i, step) in steps.iter().enumerate() {
        let args = resolve_args(step, params).map_err(at(i))?;
        let src = current.as_ref().unwrap_or(input);
        let next = apply_op(step.op, &args, src, limits).map_err(at(i))?;
        if next.width() * next.height() > limits.max_pixels {
            return Err(at(i)(ExecErrorKind::PixelLimit {
                width: next.width(),
                height: next.height(),
                limit: limits.max_pixels,
            }));
        }
        if started.elapsed() > limits.timeout {
            return Err(at(i)(ExecErrorKind::Timeout {
                limit_ms: limits.timeout.as_millis() as u64,
            }));
        }
        current = Some(next);
    }
    let out = current.unwrap_or_else(|| input.clone());
    if !limits.side_ok(&out) {
        return Err(at(steps.len().saturating_sub(1))(ExecErrorKind::SizeBounds {
            width: out.width(),
            height: out.height(),
            min: limits.min_side,
            max: limits.max_side,
        }));
    }
    Ok(out)
}

pub fn execute(program: &Program, params: &ParamSet, input: &RasterImage, limits: &ExecLimits) -> Result<RasterImage, ExecError> {
    execute_resolved(&program.steps, params, input, limits)
}

/// One output per parameter set, in `arg_sets` order.
pub fn execute_all(program: &Program, input: &RasterImage, limits: &ExecLimits) -> Result<Vec<RasterImage>, ExecAllError> {
    program
        .arg_sets
        .iter()
        .enumerate()
        .map(|(index, set)| execute(program, set, input, limits).map_err(|error| ExecAllError { index, error }))
        .collect()
}
