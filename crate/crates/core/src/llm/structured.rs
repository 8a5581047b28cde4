//! Pulling JSON records out of free-form model output.

use std::collections::BTreeMap;

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructuredError {
    #[error("no JSON object found in model output")]
    NoJsonFound,
    #[error("field `{field}` has invalid value {value}")]
    FieldInvalid { field: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    /// One of a fixed set of strings, compared exactly after trimming.
    Enum(Vec<String>),
    Number {
        min: f64,
        max: f64,
    },
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
}

impl FieldSpec {
    pub fn enumeration<S: AsRef<str>>(name: &str, allowed: &[S]) -> Self {
        Self {
            name: name.to_string(),
            kind: FieldKind::Enum(allowed.iter().map(|s| s.as_ref().to_string()).collect()),
            required: true,
        }
    }

    pub fn number(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: FieldKind::Number { min, max },
            required: true,
        }
    }

    pub fn text(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: FieldKind::Text,
            required: true,
        }
    }

    pub fn optional(mut self) -> Self {
        self.required = false;
        self
    }
}

pub type Schema = Vec<FieldSpec>;

/// A validated field value.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Choice(String),
    Number(f64),
    Text(String),
}

impl FieldValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            FieldValue::Choice(s) | FieldValue::Text(s) => Some(s),
            FieldValue::Number(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FieldValue::Number(n) => Some(*n),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            FieldValue::Choice(s) | FieldValue::Text(s) => Value::String(s.clone()),
            FieldValue::Number(n) => serde_json::Number::from_f64(*n)
                .map(Value::Number)
                .unwrap_or(Value::Null),
        }
    }
}

pub type StructuredRecord = BTreeMap<String, FieldValue>;

/// Why a field did not make it into the record.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldIssue {
    pub field: String,
    /// Offending value as JSON text, or `None` when absent.
    pub value: Option<String>,
}

/// Locate the first balanced `{...}` block that parses as a JSON object.
///
/// Code fences and prose around the object are ignored.
pub fn extract_json_object(text: &str) -> Option<Map<String, Value>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        if let Some(close) = matching_brace(bytes, open) {
            if let Ok(Value::Object(map)) = serde_json::from_str(&text[open..=close]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

fn matching_brace(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// If none of the schema fields sit at the top level but exactly one value is
/// an object (as in `{"startup_analysis_responses": {...}}`), descend into it.
fn locate_fields<'a>(obj: &'a Map<String, Value>, schema: &[FieldSpec]) -> &'a Map<String, Value> {
    let hits = |m: &Map<String, Value>| schema.iter().filter(|f| m.contains_key(&f.name)).count();
    if hits(obj) > 0 {
        return obj;
    }
    let nested: Vec<&Map<String, Value>> = obj.values().filter_map(Value::as_object).collect();
    match nested.as_slice() {
        [only] if hits(only) > 0 => only,
        _ => obj,
    }
}

fn check_field(spec: &FieldSpec, raw: &Value) -> Option<FieldValue> {
    match &spec.kind {
        FieldKind::Enum(allowed) => {
            let s = raw.as_str()?.trim();
            allowed
                .iter()
                .any(|a| a == s)
                .then(|| FieldValue::Choice(s.to_string()))
        }
        FieldKind::Number { min, max } => {
            let n = match raw {
                Value::Number(n) => n.as_f64()?,
                Value::String(s) => s.trim().parse::<f64>().ok()?,
                _ => return None,
            };
            (n.is_finite() && n >= *min && n <= *max).then_some(FieldValue::Number(n))
        }
        FieldKind::Text => match raw {
            Value::String(s) => Some(FieldValue::Text(s.clone())),
            Value::Null => None,
            other => Some(FieldValue::Text(other.to_string())),
        },
    }
}

/// Lenient parse: every valid field is returned, every absent or invalid one
/// is reported. Fails only when no JSON object exists at all.
pub fn parse_structured_lenient(
    text: &str,
    schema: &[FieldSpec],
) -> Result<(StructuredRecord, Vec<FieldIssue>), StructuredError> {
    let obj = extract_json_object(text).ok_or(StructuredError::NoJsonFound)?;
    let fields = locate_fields(&obj, schema);
    let mut record = StructuredRecord::new();
    let mut issues = Vec::new();
    for spec in schema {
        match fields.get(&spec.name) {
            Some(raw) => match check_field(spec, raw) {
                Some(v) => {
                    record.insert(spec.name.clone(), v);
                }
                None => issues.push(FieldIssue {
                    field: spec.name.clone(),
                    value: Some(raw.to_string()),
                }),
            },
            None if spec.required => issues.push(FieldIssue {
                field: spec.name.clone(),
                value: None,
            }),
            None => {}
        }
    }
    Ok((record, issues))
}

/// Strict parse: the first absent or invalid required field is an error.
pub fn parse_structured(
    text: &str,
    schema: &[FieldSpec],
) -> Result<StructuredRecord, StructuredError> {
    let (record, issues) = parse_structured_lenient(text, schema)?;
    match issues.into_iter().next() {
        Some(issue) => Err(StructuredError::FieldInvalid {
            field: issue.field,
            value: issue.value.unwrap_or_else(|| "<missing>".to_string()),
        }),
        None => Ok(record),
    }
}

/// Render a record back to a JSON object.
pub fn record_to_json(record: &StructuredRecord) -> String {
    let map: Map<String, Value> = record
        .iter()
        .map(|(k, v)| (k.clone(), v.to_json()))
        .collect();
    Value::Object(map).to_string()
}
