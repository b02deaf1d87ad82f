//! Line-oriented `key value...` model files.
//!
//! Floats are written in shortest round-trip exponent form, so reading a file back reproduces
//! every parameter bit for bit.

use std::fmt::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn write_floats(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        write!(out, " {v:e}").unwrap();
    }
    out.push('\n');
}

pub(crate) fn write_kv(out: &mut String, key: &str, value: impl std::fmt::Display) {
    writeln!(out, "{key} {value}").unwrap();
}

/// Cursor over non-empty, non-comment lines.
pub(crate) struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self { lines, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let line = self
            .lines
            .get(self.pos.saturating_sub(1))
            .map_or(0, |(n, _)| *n);
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Consumes the next line, which must start with `key`, returning the remainder.
    pub fn field(&mut self, key: &str) -> Result<&'a str> {
        let Some(&(line, text)) = self.lines.get(self.pos) else {
            return Err(self.err(format!("unexpected end of input, expected '{key}'")));
        };
        self.pos += 1;
        let (k, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
        if k != key {
            return Err(Error::Parse {
                line,
                message: format!("expected '{key}', found '{k}'"),
            });
        }
        Ok(rest.trim())
    }

    pub fn parsed<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let raw = self.field(key)?;
        raw.parse()
            .map_err(|_| self.err(format!("cannot parse '{raw}' for '{key}'")))
    }

    pub fn floats(&mut self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let raw = self.field(key)?;
        let values = raw
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| self.err(format!("bad float in '{key}': {e}")))?;
        if values.len() != expected {
            return Err(self.err(format!(
                "'{key}' has {} values, expected {expected}",
                values.len()
            )));
        }
        Ok(values)
    }

    pub fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            None => Ok(()),
            Some(&(line, text)) => Err(Error::Parse {
                line,
                message: format!("trailing content '{text}'"),
            }),
        }
    }
}
