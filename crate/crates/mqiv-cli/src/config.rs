//! Flat INI-style configuration files with one section per subcommand.
//!
//! ```text
//! # comment
//! [estimate]
//! input = data.csv
//! k-folds = 10
//!
//! [mc-study]
//! reps = 200
//! sizes = 600,2400
//! ```
//!
//! Keys are case-insensitive and `_` is treated as `-`, so `k_folds` and
//! `k-folds` name the same setting. Values from the file sit between
//! built-in defaults and command-line flags: flags always win.

use mqiv::{Error, Result};
use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

/// The key-value pairs of one section, keys already normalized.
#[derive(Debug, Default)]
pub struct Section {
    values: HashMap<String, String>,
}

impl Section {
    /// Look up `key` and parse it, reporting the key and raw value on
    /// failure. `Ok(None)` means the file does not set the key.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                Error::invalid(format!("config key {key:?}: cannot parse value {raw:?}"))
            }),
        }
    }

    /// Boolean keys accept `true/false`, `yes/no`, `on/off`, `1/0`.
    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.values.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(None),
            Some(v) => match v.as_str() {
                "true" | "yes" | "on" | "1" => Ok(Some(true)),
                "false" | "no" | "off" | "0" => Ok(Some(false)),
                other => Err(Error::invalid(format!(
                    "config key {key:?}: expected a boolean, got {other:?}"
                ))),
            },
        }
    }

    /// Raw string lookup for values parsed by command-specific code.
    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

/// Parse a whole config file into sections.
pub fn parse(text: &str) -> Result<HashMap<String, Section>> {
    let mut sections: HashMap<String, Section> = HashMap::new();
    let mut current: Option<String> = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = normalize_key(name);
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::invalid(format!(
                "config line {}: expected `key = value` or `[section]`, got {line:?}",
                idx + 1
            )));
        };
        let Some(section) = &current else {
            return Err(Error::invalid(format!(
                "config line {}: key {key:?} appears before any [section] header",
                idx + 1
            )));
        };
        sections
            .get_mut(section)
            .expect("current section was inserted on its header")
            .values
            .insert(normalize_key(key), value.trim().to_string());
    }
    Ok(sections)
}

/// Load the named section from an optional config path. No path, or a file
/// without that section, yields an empty section (all lookups `None`).
pub fn load_section(path: Option<&Path>, section: &str) -> Result<Section> {
    let Some(path) = path else {
        return Ok(Section::default());
    };
    let text = std::fs::read_to_string(path)?;
    let mut sections = parse(&text)?;
    Ok(sections.remove(&normalize_key(section)).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_normalized_keys() {
        let text = "\n# top comment\n[Estimate]\nK_Folds = 10\ninput = a.csv\n; trailing\n[mc-study]\nreps=7\n";
        let sections = parse(text).unwrap();
        let est = &sections["estimate"];
        assert_eq!(est.get::<usize>("k-folds").unwrap(), Some(10));
        assert_eq!(est.get_str("input"), Some("a.csv"));
        assert_eq!(sections["mc-study"].get::<usize>("reps").unwrap(), Some(7));
    }

    #[test]
    fn later_duplicate_wins() {
        let sections = parse("[s]\na = 1\na = 2\n").unwrap();
        assert_eq!(sections["s"].get::<i32>("a").unwrap(), Some(2));
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse("[s]\nno equals sign\n").is_err());
        assert!(parse("orphan = 1\n").is_err());
        let sections = parse("[s]\nn = x\n").unwrap();
        assert!(sections["s"].get::<usize>("n").is_err());
        assert!(sections["s"].get_bool("n").is_err());
    }

    #[test]
    fn missing_file_and_missing_section_behave() {
        assert_eq!(
            load_section(None, "estimate").unwrap().get_str("input"),
            None
        );
        let err = load_section(Some(Path::new("/nonexistent/cfg.ini")), "estimate");
        assert!(err.is_err());
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "[other]\nk = 1\n").unwrap();
        let sec = load_section(Some(f.path()), "estimate").unwrap();
        assert_eq!(sec.get_str("k"), None);
    }

    #[test]
    fn booleans_parse_all_spellings() {
        let sections = parse("[s]\na = Yes\nb = off\nc = 1\n").unwrap();
        let s = &sections["s"];
        assert_eq!(s.get_bool("a").unwrap(), Some(true));
        assert_eq!(s.get_bool("b").unwrap(), Some(false));
        assert_eq!(s.get_bool("c").unwrap(), Some(true));
        assert_eq!(s.get_bool("missing").unwrap(), None);
    }
}
