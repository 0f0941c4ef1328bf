//! Run manifests.
//!
//! A manifest is TOML made of `key = value` lines: the flattened effective
//! configuration first, then a `[manifest]` table with the seed, generator,
//! configuration hash and results. Feeding a manifest back as `--config`
//! reruns the experiment. The `timestamp` line is the only field that
//! changes between identical runs.

use std::fmt::Write;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// TOML literal for a float; always has a decimal point or exponent.
pub fn toml_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

/// TOML basic string with escapes.
pub fn toml_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Integers beyond the TOML range are written as strings.
pub fn toml_u64(x: u64) -> String {
    if x <= i64::MAX as u64 {
        x.to_string()
    } else {
        toml_string(&x.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    config: String,
    entries: Vec<(String, String)>,
}

impl Manifest {
    /// `config` is the flattened effective configuration; its hash is
    /// recorded as `config_hash`.
    pub fn new(command: &str, config: String) -> Self {
        let hash = sha256_hex(config.as_bytes());
        let mut m = Self {
            config,
            entries: Vec::new(),
        };
        m.text("command", command);
        m.text("config_hash", &hash);
        m
    }

    pub fn config_hash(&self) -> &str {
        self.get("config_hash").map(|s| s.trim_matches('"')).unwrap_or("")
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn push(&mut self, key: &str, literal: String) {
        self.entries.push((key.to_owned(), literal));
    }

    pub fn text(&mut self, key: &str, value: &str) {
        self.push(key, toml_string(value));
    }

    pub fn float(&mut self, key: &str, value: f64) {
        self.push(key, toml_float(value));
    }

    pub fn int(&mut self, key: &str, value: u64) {
        self.push(key, toml_u64(value));
    }

    pub fn flag(&mut self, key: &str, value: bool) {
        self.push(key, value.to_string());
    }

    /// Renders with the given timestamp, or the current time when `None`.
    pub fn render(&self, timestamp: Option<u64>) -> String {
        let ts = timestamp.unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        });
        let mut out = self.config.clone();
        out.push_str("\n[manifest]\n");
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "timestamp = {ts}");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn literals_parse_back() {
        for x in [0.1, 100.0, 1e-9, -2.5e300, 0.30000000000000004] {
            let doc: toml::Table = format!("x = {}", toml_float(x)).parse().unwrap();
            assert_eq!(doc["x"].as_float(), Some(x));
        }
        let doc: toml::Table = format!("s = {}", toml_string("a\"b\\c\n")).parse().unwrap();
        assert_eq!(doc["s"].as_str(), Some("a\"b\\c\n"));
    }

    #[test]
    fn renders_single_timestamp_line() {
        let mut m = Manifest::new("price", "market.rate = 0.05\n".into());
        m.float("price", 10.0);
        m.flag("pass", true);
        let a = m.render(Some(1));
        let b = m.render(Some(2));
        let diff: Vec<_> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
        assert_eq!(diff, vec![("timestamp = 1", "timestamp = 2")]);
        let doc: toml::Table = a.parse().unwrap();
        assert_eq!(doc["manifest"]["price"].as_float(), Some(10.0));
        assert_eq!(m.config_hash().len(), 64);
    }
}
