//! Stage prompt templates. Placeholders are `{name}`; `{{` and `}}` are literal braces.

use std::collections::BTreeMap;

use thiserror::Error;

pub const SEMANTIC_ENCODER: &str = include_str!("../prompts/semantic_encoder.txt");
pub const FORMALIZATION: &str = include_str!("../prompts/formalization.txt");
pub const COMPILER: &str = include_str!("../prompts/compiler.txt");
pub const SUPERVISOR_FORWARD: &str = include_str!("../prompts/supervisor_forward.txt");
pub const SUPERVISOR_BACKWARD: &str = include_str!("../prompts/supervisor_backward.txt");
pub const REASONER: &str = include_str!("../prompts/reasoner.txt");
/// Description of the model document format; inserted verbatim, not a template.
pub const FORMAT_SPEC: &str = include_str!("../prompts/format_spec.txt");
/// Example document the supervisor normalizes towards.
pub const CODE_EXAMPLE: &str = include_str!("../prompts/code_example.json");

pub const ATTENTION: &str = "Declare every variable you use. Keep every expression linear and write numeric coefficients, not divisions.";

/// Appended to a prompt when its JSON answer could not be parsed.
pub const FORMAT_REMINDER: &str =
    "\nYour previous answer was not valid JSON. Reply with the JSON object only, with no code fences or commentary.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template placeholder {{{0}}} has no value")]
    MissingValue(String),
}

/// Substitutes `{name}` placeholders by exact name. Braces that do not enclose
/// an identifier are copied through unchanged.
pub fn render(template: &str, values: &BTreeMap<&str, &str>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(i) = rest.find(['{', '}']) {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if let Some(after) = tail.strip_prefix("{{") {
            out.push('{');
            rest = after;
        } else if let Some(after) = tail.strip_prefix("}}") {
            out.push('}');
            rest = after;
        } else if let Some(name) = placeholder(tail) {
            let value = values.get(name).ok_or_else(|| PromptError::MissingValue(name.to_string()))?;
            out.push_str(value);
            rest = &tail[name.len() + 2..];
        } else {
            out.push_str(&tail[..1]);
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

fn placeholder(tail: &str) -> Option<&str> {
    let body = tail.strip_prefix('{')?;
    let end = body.find('}')?;
    let name = &body[..end];
    ormind_core::model::is_identifier(name).then_some(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vals<'a>(pairs: &[(&'a str, &'a str)]) -> BTreeMap<&'a str, &'a str> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn substitutes_and_unescapes() {
        let out = render("a {x} {{\"k\": {y}}} }", &vals(&[("x", "1"), ("y", "{2}")])).unwrap();
        assert_eq!(out, "a 1 {\"k\": {2}} }");
    }

    #[test]
    fn missing_value_is_an_error() {
        assert_eq!(
            render("{nope}", &BTreeMap::new()),
            Err(PromptError::MissingValue("nope".into()))
        );
    }

    #[test]
    fn shipped_templates_render() {
        let all = vals(&[
            ("problem_example", "P"),
            ("comment_text", "C"),
            ("problem_description", "P"),
            ("comments_text", "C"),
            ("format_spec", FORMAT_SPEC),
            ("code_example", CODE_EXAMPLE),
            ("attention", ATTENTION),
            ("feedback", "F"),
            ("previous_code", "D"),
            ("input_content", "I"),
        ]);
        for t in [SEMANTIC_ENCODER, FORMALIZATION, COMPILER, SUPERVISOR_FORWARD, SUPERVISOR_BACKWARD, REASONER] {
            let out = render(t, &all).unwrap();
            assert!(!out.contains("{{"), "{out}");
        }
        assert!(render(SEMANTIC_ENCODER, &all).unwrap().contains("\"ParameterName\": {\"Type\""));
        assert!(serde_json::from_str::<serde_json::Value>(CODE_EXAMPLE).is_ok());
    }
}
