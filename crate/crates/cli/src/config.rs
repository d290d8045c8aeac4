//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`, blank, or `#` comments. Command-line flags are
//! applied on top of the file. Every value a command reads is recorded in
//! canonical form, and the hash of those records tags the CSV outputs.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Keys accepted in a config file or through `--set`.
pub const KEYS: &[&str] = &[
    "mu_x",
    "mu_y",
    "rho_x",
    "rho_y",
    "rho_xy",
    "t",
    "x0",
    "y0",
    "x_min",
    "x_max",
    "y_min",
    "y_max",
    "h0",
    "k0",
    "k",
    "h",
    "lambda",
    "p",
    "n",
    "index_set",
    "l_star",
    "levels",
    "level",
    "samples",
    "top_samples",
    "min_samples",
    "eps",
    "alpha",
    "method",
    "pilot_samples",
    "max_level",
    "seed",
    "threads",
];

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T, CliError> {
        raw.parse()
            .map_err(|_| CliError::Config(format!("cannot parse `{raw}` for `{key}`")))
    }

    fn record(&self, key: &str, value: String) {
        self.used.borrow_mut().insert(key.to_string(), value);
    }

    pub fn get_opt<T: FromStr + Display>(&self, key: &str) -> Result<Option<T>, CliError> {
        debug_assert!(KEYS.contains(&key));
        match self.values.get(key) {
            Some(raw) => {
                let v: T = self.parse_value(key, raw)?;
                self.record(key, v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn get<T: FromStr + Display>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get_opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr + Display>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: Clone,
    {
        let v = match self.values.get(key) {
            Some(raw) => raw
                .split(',')
                .map(|s| self.parse_value(key, s.trim()))
                .collect::<Result<Vec<T>, _>>()?,
            None => default.to_vec(),
        };
        let canon: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        self.record(key, canon.join(","));
        Ok(v)
    }

    /// Reads a value without recording it, for keys that must not change
    /// the outputs (thread count).
    pub fn peek<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.values
            .get(key)
            .map(|raw| self.parse_value(key, raw))
            .transpose()
    }

    /// First 16 hex digits of SHA-256 over the command name and every value
    /// read so far.
    pub fn hash(&self, command: &str) -> String {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(b"\n");
        for (k, v) in self.used.borrow().iter() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = Config::parse("# model\nrho_x = 0.2\n\nh0=0.5 # coarse\n").unwrap();
        assert_eq!(c.get::<f64>("rho_x", 0.0).unwrap(), 0.2);
        c.set("h0", "0.25").unwrap();
        assert_eq!(c.get::<f64>("h0", 1.0).unwrap(), 0.25);
        assert_eq!(c.get::<u32>("levels", 4).unwrap(), 4);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(Config::parse("rho = 1"), Err(CliError::Config(_))));
        assert!(matches!(Config::parse("rho_x 1"), Err(CliError::Config(_))));
        let c = Config::parse("levels = two").unwrap();
        assert!(c.get::<u32>("levels", 1).is_err());
    }

    #[test]
    fn hash_uses_canonical_values_only() {
        let a = Config::parse("h0 = 0.50\nthreads = 1").unwrap();
        let b = Config::parse("h0 = .5\nthreads = 8").unwrap();
        for c in [&a, &b] {
            c.get::<f64>("h0", 1.0).unwrap();
            c.peek::<usize>("threads").unwrap();
        }
        assert_eq!(a.hash("table2"), b.hash("table2"));
        assert_ne!(a.hash("table2"), a.hash("table1"));
    }

    #[test]
    fn lists() {
        let c = Config::parse("eps = 0.1, 0.05").unwrap();
        assert_eq!(c.get_list::<f64>("eps", &[1.0]).unwrap(), vec![0.1, 0.05]);
    }
}
