//! Minimal sectioned key-value text format shared by structure, scenario and
//! allocation inputs.
//!
//! ```text
//! # comment
//! [polygon]
//! faces = 4
//! mass = 0.007
//! ```
//!
//! Sections may repeat; order is preserved. Every section and entry remembers
//! its source line so downstream validation can point at the offending line.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: [{section}] is missing required key `{key}`")]
    MissingKey { line: usize, section: String, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue { line: usize, key: String, message: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unexpected section [{section}]")]
    UnknownSection { line: usize, section: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    /// Every value for a key that may repeat (e.g. `row=` in `[interconnect]`).
    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            Some(entry) => entry.parse(),
            None => Err(ConfigError::MissingKey {
                line: self.line,
                section: self.name.clone(),
                key: key.to_string(),
            }),
        }
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.get(key).map(Entry::parse).transpose()
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    /// Rejects keys outside `allowed`, so typos surface instead of being ignored.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for entry in &self.entries {
            if !allowed.contains(&entry.key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    line: entry.line,
                    section: self.name.clone(),
                    key: entry.key.clone(),
                });
            }
        }
        Ok(())
    }
}

impl Entry {
    pub fn parse<T: FromStr>(&self) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
            line: self.line,
            key: self.key.clone(),
            message: e.to_string(),
        })
    }

    /// Comma or whitespace separated list of numbers.
    pub fn parse_list<T: FromStr>(&self) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.value
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    line: self.line,
                    key: self.key.clone(),
                    message: format!("`{s}`: {e}"),
                })
            })
            .collect()
    }

    pub fn parse_vec3(&self) -> Result<[f64; 3], ConfigError> {
        let values: Vec<f64> = self.parse_list()?;
        <[f64; 3]>::try_from(values.as_slice()).map_err(|_| ConfigError::InvalidValue {
            line: self.line,
            key: self.key.clone(),
            message: format!("expected 3 components, found {}", values.len()),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: Vec<Section> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(ConfigError::Syntax {
                        line,
                        message: "empty section name".into(),
                    });
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            let section = sections.last_mut().ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("`{key}` appears before any [section]"),
            })?;
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { sections })
    }

    pub fn sections<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| s.name == name)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn expect_sections(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        match self.sections.iter().find(|s| !allowed.contains(&s.name.as_str())) {
            Some(s) => Err(ConfigError::UnknownSection {
                line: s.line,
                section: s.name.clone(),
            }),
            None => Ok(()),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find(['#', ';']) {
        Some(pos) => &line[..pos],
        None => line,
    }
}
