//! The shared line-based `key: value` document format.
//!
//! One pair per line, `#` starts a comment line, blank lines are ignored,
//! and `[name]` lines open a named block. Regime documents, policy and
//! global config files, task files, and scenario files all use it.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based line number.
    pub line: usize,
    /// 1-based column where the key starts.
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// `None` for the pairs preceding the first header.
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

/// Splits a document into blocks. Every malformed line is reported.
pub fn parse_blocks(text: &str) -> Result<Vec<Block>, Vec<SyntaxError>> {
    let mut blocks = vec![Block {
        name: None,
        line: 0,
        entries: Vec::new(),
    }];
    let mut errors = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let indent = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let col = raw[..indent].chars().count() + 1;
        if trimmed.starts_with('[') {
            match trimmed.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
                Some(name) if !name.trim().is_empty() && !name.contains(char::is_whitespace) => {
                    blocks.push(Block {
                        name: Some(name.to_string()),
                        line,
                        entries: Vec::new(),
                    });
                }
                _ => errors.push(SyntaxError {
                    line,
                    col,
                    message: format!("malformed block header {trimmed:?}"),
                }),
            }
            continue;
        }
        let Some(colon) = trimmed.find(':') else {
            errors.push(SyntaxError {
                line,
                col: col + trimmed.chars().count(),
                message: "expected `key: value`".to_string(),
            });
            continue;
        };
        let key = trimmed[..colon].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            errors.push(SyntaxError {
                line,
                col,
                message: format!("malformed key {key:?}"),
            });
            continue;
        }
        let value = trimmed[colon + 1..].trim().to_string();
        blocks
            .last_mut()
            .expect("at least the leading block")
            .entries
            .push(Entry {
                key: key.to_string(),
                value,
                line,
                col,
            });
    }

    if errors.is_empty() {
        Ok(blocks)
    } else {
        Err(errors)
    }
}

/// Comma-separated list value; an empty value is an empty list.
pub fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
