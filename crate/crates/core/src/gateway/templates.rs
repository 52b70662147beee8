//! Prompt templates. The four built-in bodies ship as data files under
//! `prompts/` and are loaded verbatim; placeholders are `{name}` tokens
//! where `name` is lowercase ASCII plus underscores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::GatewayError;

/// The four pipeline prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateName {
    TriplesExtraction,
    Reasoning,
    MissingKnowledge,
    KgEnrichment,
}

impl fmt::Display for TemplateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TemplateName::TriplesExtraction => "triples_extraction",
            TemplateName::Reasoning => "reasoning",
            TemplateName::MissingKnowledge => "missing_knowledge",
            TemplateName::KgEnrichment => "kg_enrichment",
        };
        f.write_str(s)
    }
}

/// A prompt body plus the placeholder names found in it.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
    pub placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    pub fn new(name: TemplateName, body: impl Into<String>) -> Self {
        let body = body.into();
        let placeholders = scan_placeholders(&body);
        Self {
            name,
            body,
            placeholders,
        }
    }

    /// The built-in body for `name`, byte-identical to the shipped
    /// `prompts/*.txt` file.
    pub fn builtin(name: TemplateName) -> Self {
        let body = match name {
            TemplateName::TriplesExtraction => {
                include_str!("../../prompts/triples_extraction.txt")
            }
            TemplateName::Reasoning => include_str!("../../prompts/reasoning.txt"),
            TemplateName::MissingKnowledge => include_str!("../../prompts/missing_knowledge.txt"),
            TemplateName::KgEnrichment => include_str!("../../prompts/kg_enrichment.txt"),
        };
        Self::new(name, body)
    }
}

/// A `{lowercase_ident}` token. Anything else stays literal.
fn scan_placeholders(body: &str) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = body[i + 1..].find(['}', '{']) {
                let candidate = &body[i + 1..i + 1 + end];
                if bytes[i + 1 + end] == b'}'
                    && !candidate.is_empty()
                    && candidate.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
                {
                    found.insert(candidate.to_string());
                    i += end + 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    found
}

/// Substitute every placeholder with its binding. Single pass, so text
/// inside bindings is never re-scanned. Fails on the first placeholder
/// without a binding.
pub fn render(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String, GatewayError> {
    for p in &template.placeholders {
        if !bindings.contains_key(p) {
            return Err(GatewayError::MissingBinding(p.clone()));
        }
    }
    let body = &template.body;
    let mut out = String::with_capacity(body.len());
    let mut rest = body.as_str();
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        let mut replaced = false;
        if let Some(close) = after.find('}') {
            let candidate = &after[1..close];
            if template.placeholders.contains(candidate) {
                out.push_str(&bindings[candidate]);
                rest = &after[close + 1..];
                replaced = true;
            }
        }
        if !replaced {
            out.push('{');
            rest = &after[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// The full set of pipeline templates.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub triples_extraction: PromptTemplate,
    pub reasoning: PromptTemplate,
    pub missing_knowledge: PromptTemplate,
    pub kg_enrichment: PromptTemplate,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            triples_extraction: PromptTemplate::builtin(TemplateName::TriplesExtraction),
            reasoning: PromptTemplate::builtin(TemplateName::Reasoning),
            missing_knowledge: PromptTemplate::builtin(TemplateName::MissingKnowledge),
            kg_enrichment: PromptTemplate::builtin(TemplateName::KgEnrichment),
        }
    }

    pub fn get(&self, name: TemplateName) -> &PromptTemplate {
        match name {
            TemplateName::TriplesExtraction => &self.triples_extraction,
            TemplateName::Reasoning => &self.reasoning,
            TemplateName::MissingKnowledge => &self.missing_knowledge,
            TemplateName::KgEnrichment => &self.kg_enrichment,
        }
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}
