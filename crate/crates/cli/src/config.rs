//! Flat `key=value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt::{Display, Write as _};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};

use crate::UsageError;

/// Values from a config file, consumed key by key as a command resolves its
/// settings. Every resolved value is echoed into the manifest.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Settings> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Settings {
            file: parse(&text)?,
            resolved: Vec::new(),
        })
    }

    /// Flag value if given, else the file's value, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        let value = match (flag, from_file) {
            (Some(v), _) => v,
            (None, Some(text)) => text
                .parse()
                .map_err(|e| UsageError(format!("config key `{key}`: cannot parse `{text}`: {e}")))?,
            (None, None) => default,
        };
        self.resolved.push((key.to_string(), value.to_string()));
        Ok(value)
    }

    /// Comma-separated list setting.
    pub fn get_list<T>(&mut self, key: &str, flag: Option<Vec<T>>, default: Vec<T>) -> anyhow::Result<Vec<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        let value = match (flag, from_file) {
            (Some(v), _) => v,
            (None, Some(text)) => parse_list(&text).map_err(|e| UsageError(format!("config key `{key}`: {e}")))?,
            (None, None) => default,
        };
        let echo: Vec<String> = value.iter().map(T::to_string).collect();
        self.resolved.push((key.to_string(), echo.join(",")));
        Ok(value)
    }

    /// Optional setting without a default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        let value = match (flag, from_file) {
            (Some(v), _) => Some(v),
            (None, Some(text)) => Some(
                text.parse()
                    .map_err(|e| UsageError(format!("config key `{key}`: cannot parse `{text}`: {e}")))?,
            ),
            (None, None) => None,
        };
        if let Some(v) = &value {
            self.resolved.push((key.to_string(), v.to_string()));
        }
        Ok(value)
    }

    /// Fails on config keys no setting consumed.
    pub fn finish(&self) -> anyhow::Result<()> {
        if self.file.is_empty() {
            return Ok(());
        }
        let all: Vec<&str> = self.file.keys().map(String::as_str).collect();
        bail!(UsageError(format!("unknown config key(s) `{}`", all.join("`, `"))))
    }

    pub fn manifest(&self, command: &str) -> String {
        let mut out = format!("# lookahead {} {command}\n", env!("CARGO_PKG_VERSION"));
        for (k, v) in &self.resolved {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }
}

pub fn parse(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(UsageError(format!("config line {}: expected key=value, got `{raw}`", n + 1)));
        };
        let key = key.trim().replace('-', "_");
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!(UsageError(format!("config line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

pub fn parse_list<T>(text: &str) -> Result<Vec<T>, String>
where
    T: FromStr,
    T::Err: Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| format!("cannot parse `{s}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let mut s = Settings {
            file: parse("# grid\ntrees = 20\ngamma=0.5,1\n").unwrap(),
            resolved: Vec::new(),
        };
        assert_eq!(s.get("trees", Some(5u32), 1).unwrap(), 5);
        assert_eq!(s.get_list::<f64>("gamma", None, vec![]).unwrap(), vec![0.5, 1.0]);
        assert_eq!(s.get("d_max", None, 50u32).unwrap(), 50);
        assert!(s.finish().is_ok());
        assert_eq!(s.manifest("x").lines().skip(1).collect::<Vec<_>>(), ["trees=5", "gamma=0.5,1", "d_max=50"]);
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let s = Settings {
            file: parse("bogus=1\n").unwrap(),
            resolved: Vec::new(),
        };
        assert!(s.finish().is_err());
        assert!(parse("a=1\na=2\n").is_err());
        assert!(parse("novalue\n").is_err());
    }

    #[test]
    fn dashes_normalize_to_underscores() {
        assert!(parse("d-max=3\n").unwrap().contains_key("d_max"));
    }
}
