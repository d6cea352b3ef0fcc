//! `key = value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("config line {}: expected key = value", i + 1));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return err(format!("config line {}: empty key", i + 1));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Resolved parameters for one subcommand. Later sources win: file, then `--set`, then flags.
#[derive(Clone, Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    pub fn resolve(
        allowed: &[&str],
        config: Option<&Path>,
        sets: &[String],
        flags: Vec<(&str, Option<String>)>,
    ) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            pairs.extend(parse_config(&text)?);
        }
        for s in sets {
            let Some((k, v)) = s.split_once('=') else {
                return err(format!("--set expects KEY=VALUE, got {s:?}"));
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        let mut values = BTreeMap::new();
        for (k, v) in pairs {
            if !allowed.contains(&k.as_str()) {
                return err(format!("unknown key {k:?}; allowed: {}", allowed.join(", ")));
            }
            values.insert(k, v);
        }
        Ok(Self { values })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| v.parse().map_err(|_| ConfigError(format!("bad value for {key}: {v:?}"))))
            .transpose()
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| x.trim().parse().map_err(|_| ConfigError(format!("bad entry in {key}: {x:?}"))))
                    .collect()
            })
            .transpose()
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => err(format!("bad boolean for {key}: {v:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# header\ntau = 0.5\n\npoints=16  # inline\n").unwrap();
        let p = Params::resolve(
            &["tau", "points", "radius"],
            Some(&path),
            &["radius=2".into(), "tau=0.1".into()],
            vec![("points", Some("32".into())), ("radius", None)],
        )
        .unwrap();
        assert_eq!(p.get("tau", 0.0).unwrap(), 0.1);
        assert_eq!(p.get("points", 0usize).unwrap(), 32);
        assert_eq!(p.get("radius", 0.0).unwrap(), 2.0);
        assert_eq!(p.get("missing", 7).unwrap(), 7);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Params::resolve(&["a"], None, &["b=1".into()], vec![]).is_err());
        assert!(Params::resolve(&["a"], None, &["a".into()], vec![]).is_err());
        assert!(parse_config("just words\n").is_err());
        let p = Params::resolve(&["a"], None, &["a=x".into()], vec![]).unwrap();
        assert!(p.get("a", 1.0).is_err());
        assert!(p.bool("a", true).is_err());
        let p = Params::resolve(&["a"], None, &["a=1, 2,3".into()], vec![]).unwrap();
        assert_eq!(p.list::<u32>("a").unwrap().unwrap(), vec![1, 2, 3]);
    }
}
