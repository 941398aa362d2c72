use std::path::Path;

use crate::model::MASKED;

pub const DEFAULT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");
pub const DEFAULT_API_DEFINITION: &str = include_str!("../../assets/api_definition.py");

const PLACEHOLDERS: [&str; 4] = ["{QUESTION}", "{CODE}", "{API_DEFINITION}", "{PROGRAM_SIGNATURE}"];

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("reading template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("template is missing placeholder {0}")]
    Missing(&'static str),
    #[error("template must end with {{PROGRAM_SIGNATURE}} so generation continues the program")]
    Suffix,
}

/// The recovery prompt with its four placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    template: String,
    api_definition: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(DEFAULT_TEMPLATE, DEFAULT_API_DEFINITION).expect("bundled template is valid")
    }
}

impl PromptTemplate {
    pub fn new(template: &str, api_definition: &str) -> Result<Self, TemplateError> {
        if let Some(p) = PLACEHOLDERS.iter().find(|p| !template.contains(**p)) {
            return Err(TemplateError::Missing(p));
        }
        if !template.ends_with("{PROGRAM_SIGNATURE}") {
            return Err(TemplateError::Suffix);
        }
        Ok(PromptTemplate {
            template: template.to_string(),
            api_definition: api_definition.to_string(),
        })
    }

    pub fn load(template: &Path, api_definition: &Path) -> Result<Self, TemplateError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|source| TemplateError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        PromptTemplate::new(&read(template)?, &read(api_definition)?)
    }

    /// Fills every placeholder. `code` is the program with the masked span
    /// already replaced by `<MASKED>`.
    pub fn render(&self, question: &str, code: &str, signature: &str) -> String {
        let values = [question, code, self.api_definition.as_str(), signature];
        let mut out = String::with_capacity(self.template.len() + code.len() + self.api_definition.len());
        let mut rest = self.template.as_str();
        // Single pass, so placeholder text inside substituted values stays literal.
        while let Some((pos, k)) = PLACEHOLDERS
            .iter()
            .enumerate()
            .filter_map(|(k, p)| rest.find(p).map(|pos| (pos, k)))
            .min()
        {
            out.push_str(&rest[..pos]);
            out.push_str(values[k]);
            rest = &rest[pos + PLACEHOLDERS[k].len()..];
        }
        out.push_str(rest);
        out
    }
}

/// The first line of a program: its `def` header.
pub fn program_signature(program: &str) -> &str {
    program.split('\n').next().unwrap_or("")
}

/// `program` with `program[start..end]` replaced by the mask sentinel.
pub fn mask_program(program: &str, start: usize, end: usize) -> String {
    format!("{}{MASKED}{}", &program[..start], &program[end..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_template_renders() {
        let t = PromptTemplate::default();
        let program = "def execute_command(image) -> str:\n    return 'yes'";
        let code = mask_program(program, 46, 51);
        let out = t.render("Is it?", &code, program_signature(program));
        assert!(out.starts_with("[INST] I am writing code to handle visual question answering tasks"));
        assert!(out.contains("```python\n# Is it?\ndef execute_command(image) -> str:\n    return <MASKED>\n```\n"));
        assert!(out.contains("```[/INST] Here's the original code with the `<MASKED>` section replaced:\n"));
        assert!(out.ends_with("```python\n# Is it?\ndef execute_command(image) -> str:"));
        assert!(out.contains("class ImagePatch:"));
    }

    #[test]
    fn template_validation() {
        assert!(matches!(PromptTemplate::new("{CODE}", ""), Err(TemplateError::Missing(_))));
        let t = "{QUESTION}{CODE}{API_DEFINITION}{PROGRAM_SIGNATURE}\n";
        assert!(matches!(PromptTemplate::new(t, ""), Err(TemplateError::Suffix)));
    }
}
