//! Prompt templates. The shipped files hold the default layouts (four
//! candidates, two in-context examples); other sizes are generated with the
//! same wording.

pub const TYPE0_TEMPLATE: &str = include_str!("../../templates/type0.txt");
pub const TYPE1_TEMPLATE: &str = include_str!("../../templates/type1.txt");
pub const SOLVER_TEMPLATE: &str = include_str!("../../templates/solver.txt");
pub const CHALLENGER_TEMPLATE: &str = include_str!("../../templates/challenger.txt");

const GUIDELINES: &str =
    "Guidelines: First, understand the the code, then carefully observe the images, and solve the problem based on the key elements or details in the images.";

/// Replaces each `{name}` whose name is bound in `values`, in one pass, so
/// substituted text is never rescanned. Unbound braces are kept verbatim.
pub fn fill_placeholders(template: &str, values: &[(String, String)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let bound = after.find('}').and_then(|close| {
            let name = &after[..close];
            values.iter().find(|(k, _)| k == name).map(|(_, v)| (v, close))
        });
        match bound {
            Some((v, close)) => {
                out.push_str(v);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn header(n: usize) -> String {
    let names: Vec<String> = (0..=n).map(|i| format!("image_{i}")).collect();
    let (last, init) = names.split_last().expect("at least image_0");
    format!(
        "The given images are {}, and {last}, respectively. Images image_1 through image_{n} are the results of applying the `edit_image` program to image_0 with different arguments.\n```tl\n{{code_str}}\n```\n",
        init.join(", ")
    )
}

fn letters(n: usize, option: impl Fn(usize) -> String) -> String {
    (0..n).map(|i| format!("{}. {}\n", super::option_letter(i), option(i))).collect()
}

/// Parameter-to-image question layout for `n` candidates.
pub fn type0_template(n: usize) -> String {
    if n == 4 {
        return TYPE0_TEMPLATE.to_string();
    }
    build_type0(n)
}

fn build_type0(n: usize) -> String {
    format!(
        "{}Question: After applying the `edit_image` program to image_0 with `{{arg_chosen}}`, which candidate image will be produced?\nOptions:\n{}\n{GUIDELINES}\n",
        header(n),
        letters(n, |i| format!("image_{}", i + 1))
    )
}

/// Image-to-parameter question layout for `n` candidates.
pub fn type1_template(n: usize) -> String {
    if n == 4 {
        return TYPE1_TEMPLATE.to_string();
    }
    build_type1(n)
}

fn build_type1(n: usize) -> String {
    format!(
        "{}Question: Which set of arguments, when passed to `edit_image` for image_0, produces image_1?\nOptions:\n{}\n{GUIDELINES}\n",
        header(n),
        letters(n, |i| format!("{{arg_{}}}", i + 1))
    )
}

/// Wraps a question for the solver.
pub fn solver_prompt(question: &str) -> String {
    fill_placeholders(SOLVER_TEMPLATE, &[("question".into(), question.to_string())])
}

fn build_challenger(n_examples: usize, n: usize) -> String {
    let mut s = format!(
        "# Task\nWrite a simple transformation program named `edit_image` that edits the user's image, and then design {n} different parameter sets.\n\n\
# Requirements\n\
1. The program declares its parameters with `param NAME` lines, applies one or more `step OP ARG...` lines, and ends with exactly {n} `args NAME=VALUE, ...` lines.\n\
2. Steps may only use these ops: rotate, flip, crop, jigsaw, draw_rect, brightness, contrast, grayscale, invert, pixelate, resize.\n\
3. Ensure that the {n} sets of parameters in the `args` lines produce {n} visually distinct editing results.\n\
4. No comments must be added to the program.\n\
5. The examples below are for format reference only. The parameters must be designed according to the specific content of the user's image; do not copy them directly.\n\n\
# Examples\n"
    );
    for k in 1..=n_examples {
        s.push_str(&format!("\n## Example {k}\n```tl\n{{code_str{k}}}\n```\n"));
    }
    s.push_str(
        "\nObserve the given image, design the code with reference to the image content. Output your reasoning process inside <thinking>...</thinking> tags, followed by the final program in\n```tl\n...\n```\n",
    );
    s
}

/// Challenger instruction with in-context examples for `n` parameter sets.
pub fn challenger_prompt(examples: &[&str], n: usize) -> String {
    let template = if examples.len() == 2 && n == 4 {
        CHALLENGER_TEMPLATE.to_string()
    } else {
        build_challenger(examples.len(), n)
    };
    let values: Vec<(String, String)> = examples
        .iter()
        .enumerate()
        .map(|(i, e)| (format!("code_str{}", i + 1), e.to_string()))
        .collect();
    fill_placeholders(&template, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_layouts_match_shipped_files() {
        assert_eq!(build_type0(4), TYPE0_TEMPLATE);
        assert_eq!(build_type1(4), TYPE1_TEMPLATE);
        assert_eq!(build_challenger(2, 4), CHALLENGER_TEMPLATE);
    }

    #[test]
    fn single_pass_substitution() {
        let v = vec![("a".to_string(), "{b}".to_string()), ("b".to_string(), "x".to_string())];
        assert_eq!(fill_placeholders("{a}{b}{c}{}", &v), "{b}x{c}{}");
    }

    #[test]
    fn solver_wrapper() {
        assert_eq!(solver_prompt("Q?"), "Q?\nPlease put your final answer within \\boxed{}.");
    }

    #[test]
    fn other_sizes() {
        let t = type1_template(3);
        assert!(t.contains("image_0, image_1, image_2, and image_3"));
        assert!(t.contains("C. {arg_3}\n\n"));
        assert!(!t.contains("D. "));
        let c = challenger_prompt(&["x", "y", "z"], 5);
        assert!(c.contains("## Example 3\n```tl\nz\n```"));
        assert!(c.contains("design 5 different"));
    }
}
