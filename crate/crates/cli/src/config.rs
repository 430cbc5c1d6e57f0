//! Flat `section.key = value` configuration with typed, recorded lookups.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::str::FromStr;

use phlab::{Error, Result};

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Config {
    /// Parses `key = value` lines. `#` starts a comment and `[section]`
    /// prefixes the keys that follow it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            cfg.entries.insert(full, value.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {assignment:?}")))?;
        self.entries
            .insert(key.trim().to_string(), value.trim().to_string());
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    pub fn get<T: FromStr + ToString>(&self, key: &str, default: T) -> Result<T> {
        let v = match self.raw(key) {
            Some(s) => s
                .parse::<T>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn require<T: FromStr + ToString>(&self, key: &str) -> Result<T> {
        let s = self
            .raw(key)
            .ok_or_else(|| Error::Config(format!("missing required key {key}")))?;
        let v = s
            .parse::<T>()
            .map_err(|_| Error::Config(format!("{key}: cannot parse {s:?}")))?;
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.record(key, v.clone());
        v
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.raw(key) {
            Some(s) => parse_list(key, s)?,
            None => default.to_vec(),
        };
        self.record(key, join(&v));
        Ok(v)
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        let v = match self.raw(key) {
            Some(s) => s
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("{key}: cannot parse {t:?}")))
                })
                .collect::<Result<Vec<_>>>()?,
            None => default.to_vec(),
        };
        self.record(
            key,
            v.iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        Ok(v)
    }

    /// Integer matrix written `a,b;c,d`.
    pub fn matrix(&self, key: &str, default: [[i64; 2]; 2]) -> Result<[[i64; 2]; 2]> {
        let m = match self.raw(key) {
            Some(s) => {
                let rows: Vec<Vec<i64>> = s
                    .split(';')
                    .map(|row| {
                        row.split(',')
                            .map(|t| {
                                t.trim().parse::<i64>().map_err(|_| {
                                    Error::Config(format!("{key}: cannot parse {t:?}"))
                                })
                            })
                            .collect()
                    })
                    .collect::<Result<_>>()?;
                if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                    return Err(Error::Config(format!("{key}: expected a,b;c,d")));
                }
                [[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]]
            }
            None => default,
        };
        self.record(
            key,
            format!("{},{};{},{}", m[0][0], m[0][1], m[1][0], m[1][1]),
        );
        Ok(m)
    }

    /// Every looked-up key with the value actually used.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }

    /// Supplied keys that no lookup consumed.
    pub fn unused(&self) -> Vec<String> {
        let used = self.resolved.borrow();
        self.entries
            .keys()
            .filter(|k| !used.contains_key(*k))
            .cloned()
            .collect()
    }
}

fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: cannot parse {t:?}")))
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}
