use indexmap::IndexMap;

use super::{CodecError, VariableSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Literal(Vec<u8>),
    Variable { name: String, offset: usize, len: usize },
}

/// A compiled `bdo:pattern`: literal octets interleaved with variable spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternLayout {
    segments: Vec<Segment>,
    len: usize,
}

impl PatternLayout {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Total payload length in octets.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Distinct placeholder names in order of first appearance.
    pub fn variable_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for seg in &self.segments {
            if let Segment::Variable { name, .. } = seg {
                if !names.contains(&name.as_str()) {
                    names.push(name);
                }
            }
        }
        names
    }
}

/// Placeholder names found in a pattern, without validating against any variable map.
pub fn placeholder_names(pattern: &str) -> Result<Vec<String>, CodecError> {
    let mut names = Vec::new();
    for token in tokenize(pattern)? {
        if let Token::Placeholder(name) = token {
            if !names.contains(&name) {
                names.push(name);
            }
        }
    }
    Ok(names)
}

enum Token {
    Literal(String),
    Placeholder(String),
}

fn tokenize(pattern: &str) -> Result<Vec<Token>, CodecError> {
    let bad = |why: &str| CodecError::BadHexPattern(format!("{pattern:?}: {why}"));
    let mut tokens = Vec::new();
    let mut rest = pattern;
    while !rest.is_empty() {
        if let Some(after) = rest.strip_prefix('{') {
            let close = after.find('}').ok_or_else(|| bad("unterminated placeholder"))?;
            let name = &after[..close];
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(bad("malformed placeholder name"));
            }
            tokens.push(Token::Placeholder(name.to_string()));
            rest = &after[close + 1..];
        } else {
            let end = rest.find('{').unwrap_or(rest.len());
            let lit = &rest[..end];
            if lit.contains('}') {
                return Err(bad("unmatched '}'"));
            }
            if !lit.bytes().all(|c| c.is_ascii_hexdigit()) {
                return Err(bad("non-hex character in literal"));
            }
            if !lit.len().is_multiple_of(2) {
                return Err(bad("odd-length literal run"));
            }
            tokens.push(Token::Literal(lit.to_string()));
            rest = &rest[end..];
        }
    }
    Ok(tokens)
}

pub fn compile_pattern(pattern: &str, variables: &IndexMap<String, VariableSpec>) -> Result<PatternLayout, CodecError> {
    let mut segments = Vec::new();
    let mut len = 0usize;
    for token in tokenize(pattern)? {
        match token {
            Token::Literal(hex_text) => {
                let octets =
                    hex::decode(&hex_text).map_err(|e| CodecError::BadHexPattern(format!("{pattern:?}: {e}")))?;
                len += octets.len();
                segments.push(Segment::Literal(octets));
            }
            Token::Placeholder(name) => {
                let var = variables.get(&name).ok_or_else(|| CodecError::MissingVariable(name.clone()))?;
                let span = var.bytelength as usize;
                segments.push(Segment::Variable { name, offset: len, len: span });
                len += span;
            }
        }
    }
    Ok(PatternLayout { segments, len })
}
