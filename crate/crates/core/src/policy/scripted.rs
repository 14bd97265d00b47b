//! Queue-driven program synthesizer standing in for a learned challenger.
//! It cannot see pixels: it only knows the image size and mean colour.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Hints, ImageSummary, Policy, PolicyError, PolicyResponse, PromptContext};
use crate::lang::{parse_program, parse_program_with, Arg, Axis, Decimal, Op, ParamSet, ParseOptions, Program, Step, Value};
use crate::queue::seeds;
use crate::seed::{rng_from, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScriptedConfig {
    /// Structural mutations: op insertion and concatenating two examples.
    /// When off only parameters are resampled.
    pub compose: bool,
    pub compose_prob: f64,
    pub insert_prob: f64,
    /// Chance that an existing parameter is resampled.
    pub jitter_prob: f64,
    pub n_arg_sets: usize,
    pub max_steps: usize,
}

impl Default for ScriptedConfig {
    fn default() -> Self {
        Self {
            compose: true,
            compose_prob: 0.5,
            insert_prob: 0.35,
            jitter_prob: 0.85,
            n_arg_sets: 4,
            max_steps: 8,
        }
    }
}

const ANGLES: [i64; 14] = [15, 30, 45, 60, 75, 90, 120, 135, 150, 180, 210, 240, 270, 315];
const BRIGHTNESS: [i64; 8] = [4_000, 6_000, 7_500, 8_500, 12_000, 13_500, 15_000, 18_000];
const CONTRAST: [i64; 8] = [3_000, 5_000, 7_000, 8_500, 12_500, 15_000, 18_000, 22_000];
const PIXEL_BLOCKS: [i64; 7] = [3, 4, 6, 8, 12, 16, 24];
const RESIZE_SIDES: [i64; 9] = [64, 96, 128, 160, 192, 224, 256, 320, 384];
const LINE_WIDTHS: [i64; 4] = [2, 3, 5, 8];
const JIGSAW_N: [i64; 2] = [2, 3];

fn dec(scaled: i64) -> Value {
    Value::Dec(Decimal(scaled))
}

/// Box in thousandths of the image side, large enough that a crop keeps at
/// least ~48 pixels on the shorter side.
fn sample_box(rng: &mut StreamRng, summary: &ImageSummary) -> [i64; 4] {
    let short = summary.width.min(summary.height).max(1) as i64;
    let min_span = (48_000 / short + 1).clamp(150, 900);
    let mut axis = || {
        let span = rng.random_range(min_span..=(min_span + 450).min(1000));
        let start = rng.random_range(0..=1000 - span);
        (start, start + span)
    };
    let (x0, x1) = axis();
    let (y0, y1) = axis();
    [x0, y0, x1, y1]
}

fn permutation(rng: &mut StreamRng, n: i64) -> Vec<i64> {
    let mut v: Vec<i64> = (0..n * n).collect();
    loop {
        v.shuffle(rng);
        if v.iter().enumerate().any(|(i, &x)| i as i64 != x) {
            return v;
        }
    }
}

/// Where a parameter is first used: op, arity of the form, argument slot.
type Usage = (Op, usize, usize);

fn usages(program: &Program) -> BTreeMap<String, Usage> {
    let mut out = BTreeMap::new();
    for step in &program.steps {
        for (pos, a) in step.args.iter().enumerate() {
            if let Arg::Param(name) = a {
                out.entry(name.clone()).or_insert((step.op, step.args.len(), pos));
            }
        }
    }
    out
}

/// Fresh values for the chosen parameters of one argument set. Boxes and
/// jigsaw orders are drawn per step so coupled slots stay consistent.
fn resample_set(program: &Program, set: &mut ParamSet, chosen: &[String], rng: &mut StreamRng, summary: &ImageSummary) {
    let picked = |name: &str| chosen.iter().any(|c| c == name);
    let mut fresh: BTreeMap<String, Value> = BTreeMap::new();
    for step in &program.steps {
        let bbox = sample_box(rng, summary);
        let mut jigsaw_n: Option<i64> = None;
        for (pos, a) in step.args.iter().enumerate() {
            let name = match a {
                Arg::Param(n) if picked(n) && !fresh.contains_key(n) => n.clone(),
                Arg::Lit(Value::Int(v)) if step.op == Op::Jigsaw && pos == 0 => {
                    jigsaw_n = Some(*v);
                    continue;
                }
                Arg::Param(n) if step.op == Op::Jigsaw && pos == 0 => {
                    jigsaw_n = fresh.get(n).or_else(|| set.get(n)).and_then(Value::as_int);
                    continue;
                }
                _ => continue,
            };
            let v = match (step.op, step.args.len(), pos) {
                (Op::Rotate, _, _) => Value::Int(*ANGLES.choose(rng).unwrap()),
                (Op::Brightness, _, _) => dec(*BRIGHTNESS.choose(rng).unwrap()),
                (Op::Contrast, _, _) => dec(*CONTRAST.choose(rng).unwrap()),
                (Op::Pixelate, _, _) => Value::Int(*PIXEL_BLOCKS.choose(rng).unwrap()),
                (Op::Resize, _, _) => Value::Int(*RESIZE_SIDES.choose(rng).unwrap()),
                (Op::Jigsaw, _, 0) => {
                    let n = *JIGSAW_N.choose(rng).unwrap();
                    jigsaw_n = Some(n);
                    Value::Int(n)
                }
                (Op::Jigsaw, _, _) => Value::List(permutation(rng, jigsaw_n.unwrap_or(2))),
                (Op::Crop | Op::DrawRect, 1 | 2, 0) => Value::List(bbox.to_vec()),
                (Op::Crop | Op::DrawRect, 4 | 5, p) if p < 4 => Value::Int(bbox[p]),
                (Op::DrawRect, _, _) => Value::Int(*LINE_WIDTHS.choose(rng).unwrap()),
                _ => continue,
            };
            fresh.insert(name, v);
        }
    }
    for (k, v) in set.bindings.iter_mut() {
        if let Some(nv) = fresh.remove(k.as_str()) {
            *v = nv;
        }
    }
}

fn unique_name(taken: &[String], base: &str) -> String {
    if !taken.iter().any(|t| t == base) {
        return base.to_string();
    }
    (2..).map(|k| format!("{base}_{k}")).find(|c| !taken.iter().any(|t| t == c)).unwrap()
}

/// `a` followed by `b`, renaming `b`'s colliding parameters.
fn concatenate(a: &Program, b: &Program) -> Program {
    let mut params = a.params.clone();
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for p in &b.params {
        let n = unique_name(&params, p);
        params.push(n.clone());
        rename.insert(p.clone(), n);
    }
    let mut steps = a.steps.clone();
    steps.extend(b.steps.iter().map(|s| Step {
        op: s.op,
        args: s
            .args
            .iter()
            .map(|x| match x {
                Arg::Param(n) => Arg::Param(rename[n].clone()),
                other => other.clone(),
            })
            .collect(),
    }));
    let n = a.arg_sets.len().max(b.arg_sets.len());
    let arg_sets = (0..n)
        .map(|i| {
            let mut bindings = a.arg_sets[i % a.arg_sets.len()].bindings.clone();
            bindings.extend(b.arg_sets[i % b.arg_sets.len()].bindings.iter().map(|(k, v)| (rename[k].clone(), v.clone())));
            ParamSet { bindings }
        })
        .collect();
    Program {
        params,
        steps,
        arg_sets,
        source_span: 0..0,
    }
}

/// Inserts one whitelisted step; parameterized ones get a new parameter
/// whose values are filled by the caller's jitter pass.
fn insert_op(program: &mut Program, rng: &mut StreamRng) -> Option<String> {
    let pos = rng.random_range(0..=program.steps.len());
    let choice = rng.random_range(0..8);
    let (op, args, param): (Op, Vec<Arg>, Option<&str>) = match choice {
        0 => (Op::Flip, vec![Arg::Axis(Axis::Horizontal)], None),
        1 => (Op::Flip, vec![Arg::Axis(Axis::Vertical)], None),
        2 => (Op::Grayscale, vec![], None),
        3 => (Op::Invert, vec![], None),
        4 => (Op::Pixelate, vec![], Some("block")),
        5 => (Op::Brightness, vec![], Some("factor")),
        6 => (Op::Contrast, vec![], Some("amount")),
        _ => (Op::Rotate, vec![], Some("angle")),
    };
    let mut args = args;
    let mut added = None;
    if let Some(base) = param {
        let name = unique_name(&program.params, base);
        program.params.push(name.clone());
        for set in &mut program.arg_sets {
            // placeholder; resampled immediately
            set.bindings.push((name.clone(), Value::Int(1)));
        }
        args.push(Arg::Param(name.clone()));
        added = Some(name);
    }
    program.steps.insert(pos, Step { op, args });
    added
}

/// Emits one fenced program derived from `examples` by seeded mutation.
pub fn scripted_challenger(examples: &[&str], summary: &ImageSummary, seed: u64, cfg: &ScriptedConfig) -> String {
    let mut rng = rng_from(seed);
    let mut parsed: Vec<Program> = examples.iter().filter_map(|e| parse_program(e).into_result().ok()).collect();
    if parsed.is_empty() {
        parsed.push(parse_program(seeds::ROTATION).into_result().expect("seed parses"));
    }
    let n = cfg.n_arg_sets.max(1);
    let first = rng.random_range(0..parsed.len());
    let mut program = parsed[first].clone();
    let mut notes = vec![format!("start from example {}", first + 1)];

    if cfg.compose && parsed.len() >= 2 && rng.random_bool(cfg.compose_prob.clamp(0.0, 1.0)) {
        let second = (first + rng.random_range(1..parsed.len())) % parsed.len();
        if program.steps.len() + parsed[second].steps.len() <= cfg.max_steps {
            program = concatenate(&program, &parsed[second]);
            notes.push(format!("chain example {} after it", second + 1));
        }
    }

    let mut forced: Vec<String> = Vec::new();
    let want_insert = program.params.is_empty() || (cfg.compose && rng.random_bool(cfg.insert_prob.clamp(0.0, 1.0)));
    if want_insert && program.steps.len() < cfg.max_steps {
        // a program without parameters cannot have distinct argument sets
        loop {
            let added = insert_op(&mut program, &mut rng);
            let op = program.steps.iter().map(|s| s.op.name()).collect::<Vec<_>>().join(" -> ");
            if let Some(p) = added {
                forced.push(p);
            }
            if !program.params.is_empty() || program.steps.len() >= cfg.max_steps {
                notes.push(format!("insert an op, pipeline is {op}"));
                break;
            }
        }
    }

    // exactly n argument sets
    let have = program.arg_sets.len().max(1);
    if program.arg_sets.is_empty() {
        program.arg_sets.push(ParamSet::default());
    }
    program.arg_sets = (0..n).map(|i| program.arg_sets[i % have].clone()).collect();

    let jittered: Vec<String> = program
        .params
        .iter()
        .filter(|p| forced.contains(p) || rng.random_bool(cfg.jitter_prob.clamp(0.0, 1.0)))
        .cloned()
        .collect();
    let known = usages(&program);
    for i in 0..n {
        let mut set = program.arg_sets[i].clone();
        resample_set(&program, &mut set, &jittered, &mut rng, summary);
        program.arg_sets[i] = set;
    }
    // distinct argument sets
    let all: Vec<String> = known.keys().cloned().collect();
    for i in 1..n {
        let mut tries = 0;
        while tries < 64 && program.arg_sets[..i].iter().any(|s| s.canonical_eq(&program.arg_sets[i])) {
            let mut set = program.arg_sets[i].clone();
            resample_set(&program, &mut set, &all, &mut rng, summary);
            program.arg_sets[i] = set;
            tries += 1;
        }
    }
    if !jittered.is_empty() {
        notes.push(format!("resample {}", jittered.join(", ")));
    }

    let source = program.canonical();
    let opts = ParseOptions {
        n_arg_sets: n,
        ..ParseOptions::default()
    };
    let source = if parse_program_with(&source, &opts).is_ok() {
        source
    } else {
        seeds::ROTATION.to_string()
    };
    format!(
        "<thinking>\nThe image is {}x{}. Plan: {}.\n</thinking>\n```tl\n{}\n```",
        summary.width,
        summary.height,
        notes.join("; "),
        source
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedChallenger {
    pub config: ScriptedConfig,
}

impl ScriptedChallenger {
    pub fn new(config: ScriptedConfig) -> Self {
        Self { config }
    }
}

impl Policy for ScriptedChallenger {
    fn name(&self) -> String {
        format!("scripted-challenger(compose={})", self.config.compose)
    }

    fn generate(&self, ctx: &PromptContext) -> Result<PolicyResponse, PolicyError> {
        match &ctx.hints {
            Hints::Challenger { examples, summary } => {
                let refs: Vec<&str> = examples.iter().map(String::as_str).collect();
                let text = scripted_challenger(&refs, summary, ctx.stream_seed, &self.config);
                Ok(PolicyResponse::immediate(text))
            }
            _ => Err(PolicyError::InvalidContext("scripted challenger needs examples".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::{challenger_format_reward, extract_fenced};

    fn summary() -> ImageSummary {
        ImageSummary {
            width: 300,
            height: 256,
            mean_color: [100.0, 90.0, 80.0],
        }
    }

    fn program_of(out: &str) -> Program {
        parse_program(&extract_fenced(out).unwrap()).into_result().unwrap()
    }

    #[test]
    fn deterministic() {
        let ex = [seeds::ROTATION, seeds::JIGSAW];
        let cfg = ScriptedConfig::default();
        assert_eq!(scripted_challenger(&ex, &summary(), 42, &cfg), scripted_challenger(&ex, &summary(), 42, &cfg));
    }

    #[test]
    fn rotation_jitter_gives_distinct_angles() {
        let cfg = ScriptedConfig {
            compose: false,
            insert_prob: 0.0,
            jitter_prob: 1.0,
            ..ScriptedConfig::default()
        };
        let ex = "param angle\nstep rotate $angle\nargs angle=90\nargs angle=180\nargs angle=270\nargs angle=15";
        for s in 0..50 {
            let p = program_of(&scripted_challenger(&[ex], &summary(), s, &cfg));
            assert_eq!(p.steps.len(), 1);
            let angles: Vec<_> = p.arg_sets.iter().map(|a| a.get("angle").unwrap().canonical()).collect();
            for i in 0..4 {
                for j in i + 1..4 {
                    assert_ne!(angles[i], angles[j]);
                }
            }
        }
    }

    #[test]
    fn concatenation_has_both_steps() {
        let rot = parse_program(seeds::ROTATION).into_result().unwrap();
        let flip = parse_program("param angle\nstep flip h\nstep rotate $angle\nargs angle=1\nargs angle=2\nargs angle=3\nargs angle=4")
            .into_result()
            .unwrap();
        let c = concatenate(&rot, &flip);
        assert_eq!(c.steps.len(), 3);
        assert_eq!(c.params, ["angle", "angle_2"]);
        assert!(parse_program(&c.canonical()).is_ok());
        let one = Program {
            params: vec![],
            steps: vec![Step {
                op: Op::Flip,
                args: vec![Arg::Axis(Axis::Vertical)],
            }],
            arg_sets: vec![ParamSet::default(); 4],
            source_span: 0..0,
        };
        assert_eq!(concatenate(&rot, &one).steps.len(), 2);
    }

    #[test]
    fn always_well_formatted() {
        let cfg = ScriptedConfig::default();
        let ex: Vec<&str> = seeds::SEEDS.to_vec();
        for s in 0..300 {
            let k = (s as usize % 3) + 1;
            let out = scripted_challenger(&ex[..k.min(4)], &summary(), s, &cfg);
            assert_eq!(challenger_format_reward(&out), 1, "{out}");
            assert_eq!(program_of(&out).n(), 4);
        }
    }
}
