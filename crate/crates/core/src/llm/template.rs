//! Named-placeholder prompt templates.
//!
//! A placeholder is `{identifier}`. Anything else in braces (JSON examples in
//! the decision prompts, for instance) is literal text.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template `{template}` has no binding for `{placeholder}`")]
    MissingBinding {
        template: String,
        placeholder: String,
    },
    #[error("template `{template}` has no placeholder `{placeholder}`")]
    UnknownPlaceholder {
        template: String,
        placeholder: String,
    },
    #[error("template `{template}` uses undeclared placeholder `{placeholder}`")]
    Undeclared {
        template: String,
        placeholder: String,
    },
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    body: String,
    placeholders: BTreeSet<String>,
}

impl PromptTemplate {
    /// Build a template whose placeholders are exactly those found in `body`.
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let placeholders = placeholder_re()
            .captures_iter(&body)
            .map(|c| c[1].to_string())
            .collect();
        Self {
            name: name.into(),
            body,
            placeholders,
        }
    }

    /// Build a template and check that `body` only uses the declared names.
    pub fn with_declared(
        name: impl Into<String>,
        body: impl Into<String>,
        declared: &[&str],
    ) -> Result<Self, TemplateError> {
        let t = Self::new(name, body);
        let declared: BTreeSet<String> = declared.iter().map(|s| s.to_string()).collect();
        if let Some(p) = t.placeholders.difference(&declared).next() {
            return Err(TemplateError::Undeclared {
                template: t.name.clone(),
                placeholder: p.clone(),
            });
        }
        Ok(Self {
            placeholders: declared,
            ..t
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.placeholders.iter().map(String::as_str)
    }

    /// Substitute every placeholder in a single pass. Bound values are not
    /// re-scanned, so a value containing `{x}` is inserted literally.
    pub fn render<K, V>(&self, bindings: &BTreeMap<K, V>) -> Result<String, TemplateError>
    where
        K: AsRef<str> + Ord,
        V: AsRef<str>,
    {
        let bound: BTreeMap<&str, &str> = bindings
            .iter()
            .map(|(k, v)| (k.as_ref(), v.as_ref()))
            .collect();
        if let Some(k) = bound.keys().find(|k| !self.placeholders.contains(**k)) {
            return Err(TemplateError::UnknownPlaceholder {
                template: self.name.clone(),
                placeholder: k.to_string(),
            });
        }
        if let Some(p) = self
            .placeholders
            .iter()
            .find(|p| !bound.contains_key(p.as_str()))
        {
            return Err(TemplateError::MissingBinding {
                template: self.name.clone(),
                placeholder: p.clone(),
            });
        }
        let out = placeholder_re().replace_all(&self.body, |c: &regex::Captures<'_>| {
            bound[&c[1]].to_string()
        });
        Ok(out.into_owned())
    }

    /// Convenience wrapper over [`render`](Self::render) for slice bindings.
    pub fn render_pairs(&self, pairs: &[(&str, &str)]) -> Result<String, TemplateError> {
        let map: BTreeMap<&str, &str> = pairs.iter().copied().collect();
        self.render(&map)
    }
}
