//! Sectioned `key = value` text shared by scene files and CLI configs.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! [actor "car_1"]
//! mesh = car.ply
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// 1-based column of the first value character.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    /// The quoted label in `[name "label"]`.
    pub label: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub path: PathBuf,
    pub sections: Vec<Section>,
}

fn at(path: &Path, line: usize, column: usize, msg: impl std::fmt::Display) -> Error {
    Error::format(path, line, format!("column {column}: {msg}"))
}

pub fn parse_document(text: &str, path: &Path) -> Result<Document> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        let indent = body.len() - body.trim_start().len();
        let line = body.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let inner = rest.strip_suffix(']').ok_or_else(|| {
                at(
                    path,
                    line_no,
                    indent + line.len(),
                    "expected ']' to close the section header",
                )
            })?;
            let (name, label) = match inner.split_once(char::is_whitespace) {
                None => (inner.trim(), None),
                Some((name, tail)) => {
                    let tail = tail.trim();
                    let label = tail
                        .strip_prefix('"')
                        .and_then(|t| t.strip_suffix('"'))
                        .filter(|l| !l.is_empty() && !l.contains('"'))
                        .ok_or_else(|| {
                            let col = indent + 1 + raw[indent..].find(tail).unwrap_or(1);
                            at(
                                path,
                                line_no,
                                col,
                                format!("section label must be a non-empty quoted string, found {tail}"),
                            )
                        })?;
                    (name, Some(label.to_string()))
                }
            };
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(at(path, line_no, indent + 2, format!("invalid section name '{name}'")));
            }
            sections.push(Section {
                name: name.to_string(),
                label,
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(at(
                path,
                line_no,
                indent + 1,
                format!("expected 'key = value', found '{line}'"),
            ));
        };
        let key = line[..eq].trim();
        if key.is_empty() {
            return Err(at(path, line_no, indent + 1, "missing key before '='"));
        }
        let after = &line[eq + 1..];
        let value = after.trim();
        let column = indent + eq + 2 + (after.len() - after.trim_start().len());
        let Some(section) = sections.last_mut() else {
            return Err(at(
                path,
                line_no,
                indent + 1,
                format!("entry '{key}' appears before any section"),
            ));
        };
        if section.entries.iter().any(|e| e.key == key) {
            return Err(at(
                path,
                line_no,
                indent + 1,
                format!("duplicate key '{key}' in [{}]", section.name),
            ));
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: line_no,
            column,
        });
    }
    Ok(Document {
        path: path.to_path_buf(),
        sections,
    })
}

impl Document {
    pub fn read(path: &Path) -> Result<Document> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_document(&text, path)
    }

    /// The single section called `name`, if present.
    pub fn section(&self, name: &str) -> Result<Option<&Section>> {
        let mut found = self.sections.iter().filter(|s| s.name == name);
        let first = found.next();
        if let Some(dup) = found.next() {
            return Err(at(
                &self.path,
                dup.line,
                1,
                format!("section [{name}] appears more than once"),
            ));
        }
        if let Some(s) = first {
            if s.label.is_some() {
                return Err(at(&self.path, s.line, 1, format!("section [{name}] takes no label")));
            }
        }
        Ok(first)
    }

    pub fn sections_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    /// Resolves a path written in the document relative to its directory.
    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new("")).join(p)
        }
    }

    pub fn error(&self, line: usize, column: usize, msg: impl std::fmt::Display) -> Error {
        at(&self.path, line, column, msg)
    }

    /// Fails on keys outside `allowed`.
    pub fn check_keys(&self, section: &Section, allowed: &[&str]) -> Result<()> {
        match section.entries.iter().find(|e| !allowed.contains(&e.key.as_str())) {
            Some(e) => Err(at(
                &self.path,
                e.line,
                e.column.saturating_sub(e.key.len() + 3).max(1),
                format!("unknown key '{}' in [{}]", e.key, section.name),
            )),
            None => Ok(()),
        }
    }

    pub fn require<'a>(&self, section: &'a Section, key: &str) -> Result<&'a Entry> {
        section.get(key).ok_or_else(|| {
            at(
                &self.path,
                section.line,
                1,
                format!("[{}] is missing '{key}'", section.name),
            )
        })
    }

    pub fn value<T: FromStr>(&self, entry: &Entry) -> Result<T> {
        entry.value.parse().map_err(|_| {
            at(
                &self.path,
                entry.line,
                entry.column,
                format!("invalid value '{}' for '{}'", entry.value, entry.key),
            )
        })
    }

    /// Whitespace-separated numbers; `count` fixes how many are required.
    pub fn numbers(&self, entry: &Entry, count: Option<usize>) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut offset = 0;
        for tok in entry.value.split_whitespace() {
            let pos = offset + entry.value[offset..].find(tok).unwrap_or(0);
            offset = pos + tok.len();
            let v: f64 = tok.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
                at(
                    &self.path,
                    entry.line,
                    entry.column + pos,
                    format!("'{tok}' is not a finite number"),
                )
            })?;
            out.push(v);
        }
        if let Some(n) = count {
            if out.len() != n {
                return Err(at(
                    &self.path,
                    entry.line,
                    entry.column,
                    format!("'{}' needs {n} numbers, found {}", entry.key, out.len()),
                ));
            }
        }
        Ok(out)
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}
