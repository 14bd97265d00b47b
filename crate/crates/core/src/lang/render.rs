use std::fmt::Write;

use super::{Arg, ParamSet, Program, Value};

pub fn render_value(value: &Value) -> String {
    match value {
        Value::Int(v) => v.to_string(),
        Value::Dec(d) => d.to_string(),
        Value::List(items) => {
            let inner: Vec<String> = items.iter().map(i64::to_string).collect();
            format!("[{}]", inner.join(","))
        }
    }
}

fn render_arg(arg: &Arg) -> String {
    match arg {
        Arg::Lit(v) => render_value(v),
        Arg::Axis(a) => a.keyword().to_string(),
        Arg::Param(name) => format!("${name}"),
    }
}

/// Canonical text: one declaration per line, single spaces, bindings in
/// declaration order, no trailing newline.
pub fn render_canonical(program: &Program) -> String {
    let mut lines = Vec::with_capacity(program.params.len() + program.steps.len() + program.arg_sets.len());
    for p in &program.params {
        lines.push(format!("param {p}"));
    }
    for step in &program.steps {
        let mut line = format!("step {}", step.op);
        for a in &step.args {
            let _ = write!(line, " {}", render_arg(a));
        }
        lines.push(line);
    }
    for set in &program.arg_sets {
        let bindings: Vec<String> = set.bindings.iter().map(|(k, v)| format!("{k}={}", render_value(v))).collect();
        if bindings.is_empty() {
            lines.push("args".to_string());
        } else {
            lines.push(format!("args {}", bindings.join(", ")));
        }
    }
    lines.join("\n")
}

/// Option rendering used in prompts: `{angle: 90}`, `{n: 2, order: [3, 0, 1, 2]}`.
pub fn render_param_set(set: &ParamSet) -> String {
    let parts: Vec<String> = set
        .bindings
        .iter()
        .map(|(k, v)| {
            let v = match v {
                Value::List(items) => {
                    let inner: Vec<String> = items.iter().map(i64::to_string).collect();
                    format!("[{}]", inner.join(", "))
                }
                other => render_value(other),
            };
            format!("{k}: {v}")
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}
