//! Parsing of `family:key=value,key=value` identifiers used in configs and on
//! the command line.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedName {
    pub family: String,
    pub params: BTreeMap<String, String>,
}

impl ParsedName {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (family, rest) = match text.split_once(':') {
            Some((f, r)) => (f.trim(), Some(r)),
            None => (text, None),
        };
        if family.is_empty() {
            return Err(Error::Parse(format!("empty family name in {text:?}")));
        }
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?} in {text:?}")))?;
                if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    return Err(Error::Parse(format!("duplicate parameter {k:?} in {text:?}")));
                }
            }
        }
        Ok(ParsedName { family: family.to_string(), params })
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let raw = self
            .params
            .get(key)
            .ok_or_else(|| Error::Parse(format!("{}: missing parameter {key:?}", self.family)))?;
        let v: f64 = raw
            .parse()
            .map_err(|_| Error::Parse(format!("{}: parameter {key}={raw:?} is not a number", self.family)))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("{}: parameter {key} must be finite", self.family)));
        }
        Ok(v)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.params.contains_key(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let raw = self
            .params
            .get(key)
            .ok_or_else(|| Error::Parse(format!("{}: missing parameter {key:?}", self.family)))?;
        raw.parse()
            .map_err(|_| Error::Parse(format!("{}: parameter {key}={raw:?} is not a non-negative integer", self.family)))
    }

    /// Fails if any parameter outside `allowed` is present.
    pub fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::Parse(format!("{}: unknown parameter {k:?}", self.family))),
            None => Ok(()),
        }
    }
}
