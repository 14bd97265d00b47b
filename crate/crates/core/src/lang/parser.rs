use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use super::lexer::{lex, Token, TokenKind};
use super::{
    Arg, ArgKind, Axis, Decimal, Op, ParamSet, Program, Step, Value, DEFAULT_ARG_SETS, DEFAULT_MAX_STEPS,
    MAX_SOURCE_CHARS,
};

/// Largest magnitude accepted for a numeric literal.
const MAX_MAGNITUDE: i64 = 1_000_000_000;
const MAX_FRACTION_DIGITS: usize = 4;
const RESERVED: [&str; 5] = ["param", "step", "args", "h", "v"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParseErrorKind {
    Lex,
    Syntax,
    UnknownOp,
    Arity,
    UnresolvedParam,
    DuplicateArgs,
    CommentPresent,
    LengthExceeded,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::Lex => "lex",
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::UnknownOp => "unknown-op",
            ParseErrorKind::Arity => "arity",
            ParseErrorKind::UnresolvedParam => "unresolved-param",
            ParseErrorKind::DuplicateArgs => "duplicate-args",
            ParseErrorKind::CommentPresent => "comment-present",
            ParseErrorKind::LengthExceeded => "length-exceeded",
        }
    }
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseError {
    /// Byte offset into the source; always a valid position in it (0 for empty input).
    pub pos: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}: {}", self.kind, self.pos, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    pub n_arg_sets: usize,
    pub max_steps: usize,
    pub max_chars: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            n_arg_sets: DEFAULT_ARG_SETS,
            max_steps: DEFAULT_MAX_STEPS,
            max_chars: MAX_SOURCE_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseReport {
    pub outcome: Result<Program, Vec<ParseError>>,
}

impl ParseReport {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn program(&self) -> Option<&Program> {
        self.outcome.as_ref().ok()
    }

    pub fn errors(&self) -> &[ParseError] {
        match &self.outcome {
            Ok(_) => &[],
            Err(errs) => errs,
        }
    }

    pub fn has(&self, kind: ParseErrorKind) -> bool {
        self.errors().iter().any(|e| e.kind == kind)
    }

    pub fn into_result(self) -> Result<Program, Vec<ParseError>> {
        self.outcome
    }
}

pub fn parse_program(source: &str) -> ParseReport {
    parse_program_with(source, &ParseOptions::default())
}

pub fn parse_program_with(source: &str, opts: &ParseOptions) -> ParseReport {
    let outcome = Parser::new(source, opts).run();
    ParseReport { outcome }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Params,
    Steps,
    Args,
}

struct Parser<'s> {
    source: &'s str,
    opts: &'s ParseOptions,
    errors: Vec<ParseError>,
    params: Vec<String>,
    param_pos: HashMap<String, usize>,
    steps: Vec<Step>,
    /// Expected kinds for each parameter, gathered from the steps that use it.
    usages: HashMap<String, Vec<(ArgKind, usize)>>,
    arg_sets: Vec<(ParamSet, usize)>,
}

impl<'s> Parser<'s> {
    fn new(source: &'s str, opts: &'s ParseOptions) -> Self {
        Self {
            source,
            opts,
            errors: Vec::new(),
            params: Vec::new(),
            param_pos: HashMap::new(),
            steps: Vec::new(),
            usages: HashMap::new(),
            arg_sets: Vec::new(),
        }
    }

    fn clamp_pos(&self, pos: usize) -> usize {
        pos.min(self.source.len().saturating_sub(1))
    }

    fn err(&mut self, pos: usize, kind: ParseErrorKind, message: impl Into<String>) {
        let pos = self.clamp_pos(pos);
        self.errors.push(ParseError {
            pos,
            kind,
            message: message.into(),
        });
    }

    fn run(mut self) -> Result<Program, Vec<ParseError>> {
        let chars = self.source.chars().count();
        if chars > self.opts.max_chars {
            self.err(
                self.opts.max_chars,
                ParseErrorKind::LengthExceeded,
                format!("source has {chars} characters, limit is {}", self.opts.max_chars),
            );
            return Err(self.errors);
        }

        let tokens = lex(self.source);
        for t in &tokens {
            match t.kind {
                TokenKind::Comment => self.err(t.start, ParseErrorKind::CommentPresent, "comments are not allowed"),
                TokenKind::Unknown => self.err(t.start, ParseErrorKind::Lex, format!("unexpected character {:?}", t.text)),
                _ => {}
            }
        }

        let mut section = Section::Params;
        for line in tokens.split(|t| t.kind == TokenKind::Newline) {
            let line: Vec<Token<'_>> = line
                .iter()
                .copied()
                .filter(|t| !matches!(t.kind, TokenKind::Comment | TokenKind::Unknown))
                .collect();
            let Some(head) = line.first() else { continue };
            let wanted = match (head.kind, head.text) {
                (TokenKind::Word, "param") => Section::Params,
                (TokenKind::Word, "step") => Section::Steps,
                (TokenKind::Word, "args") => Section::Args,
                _ => {
                    self.err(head.start, ParseErrorKind::Syntax, format!("expected `param`, `step` or `args`, found {:?}", head.text));
                    continue;
                }
            };
            if wanted < section {
                self.err(head.start, ParseErrorKind::Syntax, format!("`{}` line out of order", head.text));
                continue;
            }
            section = wanted;
            match wanted {
                Section::Params => self.param_line(&line),
                Section::Steps => self.step_line(&line),
                Section::Args => self.args_line(&line),
            }
        }

        self.finish()
    }

    fn param_line(&mut self, line: &[Token<'_>]) {
        let head = line[0];
        match line {
            [_, name] if name.kind == TokenKind::Word => {
                if RESERVED.contains(&name.text) || Op::from_name(name.text).is_some() {
                    self.err(name.start, ParseErrorKind::Syntax, format!("`{}` is reserved", name.text));
                } else if self.param_pos.contains_key(name.text) {
                    self.err(name.start, ParseErrorKind::Syntax, format!("parameter `{}` declared twice", name.text));
                } else {
                    self.param_pos.insert(name.text.to_string(), self.params.len());
                    self.params.push(name.text.to_string());
                }
            }
            _ => self.err(head.start, ParseErrorKind::Syntax, "expected `param NAME`"),
        }
    }

    fn step_line(&mut self, line: &[Token<'_>]) {
        let head = line[0];
        let Some(op_tok) = line.get(1) else {
            self.err(head.start, ParseErrorKind::Syntax, "expected an op name after `step`");
            return;
        };
        let Some(op) = (op_tok.kind == TokenKind::Word).then(|| Op::from_name(op_tok.text)).flatten() else {
            self.err(op_tok.start, ParseErrorKind::UnknownOp, format!("unknown op {:?}", op_tok.text));
            return;
        };

        let mut args = Vec::new();
        let mut arg_pos = Vec::new();
        let mut i = 2;
        while i < line.len() {
            let t = line[i];
            let parsed = match t.kind {
                TokenKind::Dollar => match line.get(i + 1) {
                    Some(name) if name.kind == TokenKind::Word && name.start == t.start + 1 => {
                        i += 2;
                        Some(Arg::Param(name.text.to_string()))
                    }
                    _ => {
                        self.err(t.start, ParseErrorKind::Syntax, "expected a parameter name after `$`");
                        return;
                    }
                },
                TokenKind::Word => {
                    i += 1;
                    match Axis::from_keyword(t.text) {
                        Some(axis) => Some(Arg::Axis(axis)),
                        None => {
                            self.err(t.start, ParseErrorKind::Syntax, format!("unexpected word {:?} in step arguments", t.text));
                            return;
                        }
                    }
                }
                TokenKind::Number | TokenKind::LBracket => match self.literal(line, &mut i) {
                    Some(v) => Some(Arg::Lit(v)),
                    None => return,
                },
                _ => {
                    self.err(t.start, ParseErrorKind::Syntax, format!("unexpected {:?} in step arguments", t.text));
                    return;
                }
            };
            if let Some(a) = parsed {
                args.push(a);
                arg_pos.push(t.start);
            }
        }

        let Some(form) = op.form_for_arity(args.len()) else {
            let expected: Vec<String> = op.forms().iter().map(|f| f.len().to_string()).collect();
            self.err(
                op_tok.start,
                ParseErrorKind::Arity,
                format!("`{op}` takes {} argument(s), got {}", expected.join(" or "), args.len()),
            );
            return;
        };

        let mut ok = true;
        for ((arg, &kind), &pos) in args.iter().zip(form).zip(&arg_pos) {
            match arg {
                Arg::Param(name) => {
                    if self.param_pos.contains_key(name) {
                        self.usages.entry(name.clone()).or_default().push((kind, pos));
                    } else {
                        self.err(pos, ParseErrorKind::UnresolvedParam, format!("`${name}` is not declared"));
                        ok = false;
                    }
                }
                Arg::Axis(_) if kind == ArgKind::Axis => {}
                Arg::Lit(v) if v.fits(kind) => {}
                _ => {
                    self.err(pos, ParseErrorKind::Arity, format!("argument of `{op}` must be {}", kind_name(kind)));
                    ok = false;
                }
            }
        }
        if ok {
            self.steps.push(Step { op, args });
        }
    }

    fn args_line(&mut self, line: &[Token<'_>]) {
        let head = line[0];
        let mut seen: HashMap<&str, Value> = HashMap::new();
        let mut i = 1;
        while i < line.len() {
            let name = line[i];
            if name.kind != TokenKind::Word {
                self.err(name.start, ParseErrorKind::Syntax, "expected `name=value`");
                return;
            }
            if line.get(i + 1).map(|t| t.kind) != Some(TokenKind::Equals) {
                self.err(name.start, ParseErrorKind::Syntax, format!("expected `=` after `{}`", name.text));
                return;
            }
            i += 2;
            let Some(value) = self.literal(line, &mut i) else { return };
            if !self.param_pos.contains_key(name.text) {
                self.err(name.start, ParseErrorKind::UnresolvedParam, format!("`{}` is not a declared parameter", name.text));
                return;
            }
            if seen.insert(name.text, value).is_some() {
                self.err(name.start, ParseErrorKind::Syntax, format!("`{}` bound twice", name.text));
                return;
            }
            match line.get(i) {
                None => {}
                Some(t) if t.kind == TokenKind::Comma && i + 1 < line.len() => i += 1,
                Some(t) => {
                    self.err(t.start, ParseErrorKind::Syntax, "expected `,` between bindings");
                    return;
                }
            }
        }

        let missing: Vec<&str> = self.params.iter().map(String::as_str).filter(|p| !seen.contains_key(p)).collect();
        if !missing.is_empty() {
            self.err(head.start, ParseErrorKind::Arity, format!("missing binding(s) for {}", missing.join(", ")));
            return;
        }
        let bindings = self
            .params
            .iter()
            .map(|p| (p.clone(), seen.remove(p.as_str()).expect("checked above")))
            .collect();
        self.arg_sets.push((ParamSet { bindings }, head.start));
    }

    /// Parses a number or bracketed int list starting at `line[*i]`.
    fn literal(&mut self, line: &[Token<'_>], i: &mut usize) -> Option<Value> {
        let Some(t) = line.get(*i).copied() else {
            let end = line.last().map_or(0, |t| t.start + t.text.len());
            self.err(end, ParseErrorKind::Syntax, "expected a value");
            return None;
        };
        match t.kind {
            TokenKind::Number => {
                *i += 1;
                self.number(t)
            }
            TokenKind::LBracket => {
                *i += 1;
                let mut items = Vec::new();
                loop {
                    let Some(tok) = line.get(*i).copied() else {
                        self.err(t.start, ParseErrorKind::Syntax, "unterminated list");
                        return None;
                    };
                    match tok.kind {
                        TokenKind::RBracket if items.is_empty() => {
                            *i += 1;
                            return Some(Value::List(items));
                        }
                        TokenKind::Number => {
                            *i += 1;
                            match self.number(tok)? {
                                Value::Int(v) => items.push(v),
                                _ => {
                                    self.err(tok.start, ParseErrorKind::Syntax, "list items must be integers");
                                    return None;
                                }
                            }
                            match line.get(*i).map(|t| t.kind) {
                                Some(TokenKind::Comma) => *i += 1,
                                Some(TokenKind::RBracket) => {
                                    *i += 1;
                                    return Some(Value::List(items));
                                }
                                _ => {
                                    self.err(tok.start, ParseErrorKind::Syntax, "expected `,` or `]` in list");
                                    return None;
                                }
                            }
                        }
                        _ => {
                            self.err(tok.start, ParseErrorKind::Syntax, "expected an integer in list");
                            return None;
                        }
                    }
                }
            }
            _ => {
                self.err(t.start, ParseErrorKind::Syntax, format!("expected a value, found {:?}", t.text));
                None
            }
        }
    }

    fn number(&mut self, t: Token<'_>) -> Option<Value> {
        let (neg, digits) = match t.text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.text),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((a, b)) => (a, Some(b)),
            None => (digits, None),
        };
        let int: i64 = match int_part.parse() {
            Ok(v) if v <= MAX_MAGNITUDE => v,
            _ => {
                self.err(t.start, ParseErrorKind::Lex, format!("number {} out of range", t.text));
                return None;
            }
        };
        let sign = if neg { -1 } else { 1 };
        match frac_part {
            None => Some(Value::Int(sign * int)),
            Some(frac) if frac.len() > MAX_FRACTION_DIGITS => {
                self.err(t.start, ParseErrorKind::Lex, format!("{} has more than {MAX_FRACTION_DIGITS} fractional digits", t.text));
                None
            }
            Some(frac) => {
                let mut scaled: i64 = frac.parse().expect("lexer only admits digits");
                for _ in frac.len()..MAX_FRACTION_DIGITS {
                    scaled *= 10;
                }
                Some(Value::Dec(Decimal(sign * (int * Decimal::SCALE + scaled))))
            }
        }
    }

    fn finish(mut self) -> Result<Program, Vec<ParseError>> {
        let end = self.source.len();
        if self.steps.is_empty() && self.errors.is_empty() {
            self.err(end, ParseErrorKind::Syntax, "program has no steps");
        }
        if self.steps.len() > self.opts.max_steps {
            self.err(
                end,
                ParseErrorKind::LengthExceeded,
                format!("{} steps, limit is {}", self.steps.len(), self.opts.max_steps),
            );
        }
        if self.arg_sets.len() != self.opts.n_arg_sets {
            let pos = self.arg_sets.get(self.opts.n_arg_sets).map_or(end, |(_, p)| *p);
            self.err(
                pos,
                ParseErrorKind::Arity,
                format!("expected {} `args` lines, found {}", self.opts.n_arg_sets, self.arg_sets.len()),
            );
        }

        // Every value bound to a parameter must suit every place it is used.
        let mut kind_errors = Vec::new();
        for (set, line_pos) in &self.arg_sets {
            for (name, value) in &set.bindings {
                for &(kind, _) in self.usages.get(name).map(Vec::as_slice).unwrap_or(&[]) {
                    if !value.fits(kind) {
                        kind_errors.push((*line_pos, format!("`{name}` is used as {} but bound to {value:?}", kind_name(kind))));
                    }
                }
            }
        }
        for (pos, msg) in kind_errors {
            self.err(pos, ParseErrorKind::Arity, msg);
        }

        let duplicates: Vec<(usize, usize, usize)> = self
            .arg_sets
            .iter()
            .enumerate()
            .filter_map(|(j, (set, pos))| {
                let k = self.arg_sets[..j].iter().position(|(prev, _)| prev.canonical_eq(set))?;
                Some((j, k, *pos))
            })
            .collect();
        for (j, k, pos) in duplicates {
            self.err(pos, ParseErrorKind::DuplicateArgs, format!("parameter set {j} repeats set {k}"));
        }

        if !self.errors.is_empty() {
            self.errors.sort_by_key(|e| e.pos);
            return Err(self.errors);
        }
        let (start, stop) = span(self.source);
        Ok(Program {
            params: self.params,
            steps: self.steps,
            arg_sets: self.arg_sets.into_iter().map(|(s, _)| s).collect(),
            source_span: start..stop,
        })
    }
}

fn span(source: &str) -> (usize, usize) {
    let start = source.len() - source.trim_start().len();
    let stop = source.trim_end().len();
    (start, stop.max(start))
}

fn kind_name(kind: ArgKind) -> &'static str {
    match kind {
        ArgKind::Int => "an integer",
        ArgKind::Number => "a number",
        ArgKind::IntList => "an integer list",
        ArgKind::Box => "a 4-element box [x0,y0,x1,y1]",
        ArgKind::Axis => "`h` or `v`",
    }
}
