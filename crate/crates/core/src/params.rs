//! Parsing for the `name:key=value,key=value` strings used to select
//! families, link functions and covariate laws.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamString {
    pub name: String,
    params: BTreeMap<String, f64>,
}

impl ParamString {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r)),
            None => (s, None),
        };
        if name.is_empty() {
            return Err(Error::Parse(format!("missing name in {s:?}")));
        }
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for item in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("expected key=value, got {item:?}")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad number for {}: {v:?}", k.trim())))?;
                if params.insert(k.trim().to_string(), v).is_some() {
                    return Err(Error::Parse(format!("duplicate key {:?}", k.trim())));
                }
            }
        }
        Ok(Self {
            name: name.to_ascii_lowercase(),
            params,
        })
    }

    /// Takes a parameter, falling back to `default` when absent.
    pub fn take_or(&mut self, key: &str, default: f64) -> f64 {
        self.params.remove(key).unwrap_or(default)
    }

    pub fn take(&mut self, key: &str) -> Result<f64> {
        self.params
            .remove(key)
            .ok_or_else(|| Error::Parse(format!("{}: missing parameter {key:?}", self.name)))
    }

    /// Errors if any parameter was supplied but never consumed.
    pub fn finish(self) -> Result<()> {
        match self.params.keys().next() {
            Some(k) => Err(Error::Parse(format!("{}: unknown parameter {k:?}", self.name))),
            None => Ok(()),
        }
    }
}
