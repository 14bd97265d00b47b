//! The transformation language.
//!
//! A program is line oriented: zero or more `param NAME` declarations, one
//! or more `step OP ARG*` lines, then exactly N `args k=v, ...` lines, one
//! per parameter set. There are no loops, expressions, I/O or sources of
//! randomness; every op comes from a closed whitelist of eleven.
//!
//! ```text
//! param angle
//! step rotate $angle
//! args angle=90
//! args angle=180
//! args angle=270
//! args angle=15
//! ```

mod lexer;
mod parser;
mod render;

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use lexer::{lex, tokenize, Token, TokenKind};
pub use parser::{parse_program, parse_program_with, ParseError, ParseErrorKind, ParseOptions, ParseReport};
pub use render::{render_canonical, render_param_set, render_value};

/// Default number of parameter sets per program.
pub const DEFAULT_ARG_SETS: usize = 4;
pub const DEFAULT_MAX_STEPS: usize = 16;
/// Source length cap, in characters.
pub const MAX_SOURCE_CHARS: usize = 2000;

/// Fixed-point decimal with four fractional digits (`12.5` is `125000`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Decimal(pub i64);

impl Decimal {
    pub const SCALE: i64 = 10_000;

    pub fn from_int(v: i64) -> Self {
        Decimal(v * Self::SCALE)
    }

    pub fn scaled(self) -> i64 {
        self.0
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }
}

impl fmt::Display for Decimal {
    /// Shortest exact form that still reads back as a decimal: `90.0`, `12.5`, `-0.25`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / Self::SCALE as u64;
        let mut frac = format!("{:04}", abs % Self::SCALE as u64);
        while frac.len() > 1 && frac.ends_with('0') {
            frac.pop();
        }
        write!(f, "{sign}{int}.{frac}")
    }
}

/// A literal bound to a parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Dec(Decimal),
    List(Vec<i64>),
}

/// Comparison key under which `90` and `90.0` are the same value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CanonicalValue {
    Number(i64),
    List(Vec<i64>),
}

impl Value {
    pub fn canonical(&self) -> CanonicalValue {
        match self {
            Value::Int(v) => CanonicalValue::Number(v * Decimal::SCALE),
            Value::Dec(d) => CanonicalValue::Number(d.scaled()),
            Value::List(items) => CanonicalValue::List(items.clone()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Numeric value as fixed-point, for ops that accept int or decimal.
    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Value::Int(v) => Some(Decimal::from_int(*v)),
            Value::Dec(d) => Some(*d),
            Value::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[i64]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn fits(&self, kind: ArgKind) -> bool {
        match kind {
            ArgKind::Int => matches!(self, Value::Int(_)),
            ArgKind::Number => matches!(self, Value::Int(_) | Value::Dec(_)),
            ArgKind::IntList => matches!(self, Value::List(_)),
            ArgKind::Box => matches!(self, Value::List(items) if items.len() == 4),
            ArgKind::Axis => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "h")]
    Horizontal,
    #[serde(rename = "v")]
    Vertical,
}

impl Axis {
    pub fn keyword(self) -> &'static str {
        match self {
            Axis::Horizontal => "h",
            Axis::Vertical => "v",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        match word {
            "h" => Some(Axis::Horizontal),
            "v" => Some(Axis::Vertical),
            _ => None,
        }
    }
}

/// One step argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    Lit(Value),
    Axis(Axis),
    Param(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgKind {
    Int,
    /// Int or decimal.
    Number,
    IntList,
    /// Int list of exactly four millage coordinates `[x0,y0,x1,y1]`.
    Box,
    Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Rotate,
    Flip,
    Crop,
    Jigsaw,
    DrawRect,
    Brightness,
    Contrast,
    Grayscale,
    Invert,
    Pixelate,
    Resize,
}

use ArgKind as K;

impl Op {
    pub const ALL: [Op; 11] = [
        Op::Rotate,
        Op::Flip,
        Op::Crop,
        Op::Jigsaw,
        Op::DrawRect,
        Op::Brightness,
        Op::Contrast,
        Op::Grayscale,
        Op::Invert,
        Op::Pixelate,
        Op::Resize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Rotate => "rotate",
            Op::Flip => "flip",
            Op::Crop => "crop",
            Op::Jigsaw => "jigsaw",
            Op::DrawRect => "draw_rect",
            Op::Brightness => "brightness",
            Op::Contrast => "contrast",
            Op::Grayscale => "grayscale",
            Op::Invert => "invert",
            Op::Pixelate => "pixelate",
            Op::Resize => "resize",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Accepted argument shapes. Forms of one op always differ in arity.
    pub fn forms(self) -> &'static [&'static [ArgKind]] {
        match self {
            Op::Rotate => &[&[K::Number]],
            Op::Flip => &[&[K::Axis]],
            Op::Crop => &[&[K::Int, K::Int, K::Int, K::Int], &[K::Box]],
            Op::Jigsaw => &[&[K::Int, K::IntList]],
            Op::DrawRect => &[&[K::Int, K::Int, K::Int, K::Int, K::Int], &[K::Box, K::Int]],
            Op::Brightness | Op::Contrast => &[&[K::Number]],
            Op::Grayscale | Op::Invert => &[&[]],
            Op::Pixelate => &[&[K::Int]],
            Op::Resize => &[&[K::Int, K::Int]],
        }
    }

    pub fn form_for_arity(self, arity: usize) -> Option<&'static [ArgKind]> {
        self.forms().iter().copied().find(|f| f.len() == arity)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub op: Op,
    pub args: Vec<Arg>,
}

/// One parameter set, bindings kept in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ParamSet {
    pub bindings: Vec<(String, Value)>,
}

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn canonical_key(&self) -> Vec<(&str, CanonicalValue)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v.canonical())).collect()
    }

    /// Equality under canonical value comparison (`90` equals `90.0`).
    pub fn canonical_eq(&self, other: &ParamSet) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}

/// A parsed, validated program.
#[derive(Debug, Clone)]
pub struct Program {
    pub params: Vec<String>,
    pub steps: Vec<Step>,
    pub arg_sets: Vec<ParamSet>,
    /// Byte range of the program text inside the parsed source.
    pub source_span: Range<usize>,
}

impl PartialEq for Program {
    /// Structural equality; the source span is provenance, not structure.
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.steps == other.steps && self.arg_sets == other.arg_sets
    }
}

impl Eq for Program {}

impl Program {
    pub fn n(&self) -> usize {
        self.arg_sets.len()
    }

    pub fn canonical(&self) -> String {
        render_canonical(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_display_is_shortest_exact() {
        assert_eq!(Decimal(125_000).to_string(), "12.5");
        assert_eq!(Decimal(900_000).to_string(), "90.0");
        assert_eq!(Decimal(-2_500).to_string(), "-0.25");
        assert_eq!(Decimal(1).to_string(), "0.0001");
    }

    #[test]
    fn int_and_decimal_compare_equal_canonically() {
        assert_eq!(Value::Int(90).canonical(), Value::Dec(Decimal(900_000)).canonical());
        assert_ne!(Value::Int(90), Value::Dec(Decimal(900_000)));
    }

    #[test]
    fn whitelist_has_eleven_named_ops() {
        assert_eq!(Op::ALL.len(), 11);
        for op in Op::ALL {
            assert_eq!(Op::from_name(op.name()), Some(op));
            let arities: Vec<_> = op.forms().iter().map(|f| f.len()).collect();
            let mut dedup = arities.clone();
            dedup.dedup();
            assert_eq!(arities, dedup, "{op} has two forms with one arity");
        }
        assert_eq!(Op::from_name("random"), None);
        assert_eq!(Op::from_name("open"), None);
    }
}
