//! Parser for the short `name(key=value, ...)` descriptors used to name
//! tasks and variational families in configs and on the command line.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Descriptor {
    pub name: String,
    pub args: BTreeMap<String, String>,
}

impl Descriptor {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = match s.find('(') {
            None => (s, None),
            Some(i) => {
                let inner = s[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::config(s, "missing closing parenthesis"))?;
                (&s[..i], Some(inner))
            }
        };
        if name.is_empty() {
            return Err(Error::config(s, "empty name"));
        }
        let mut args = BTreeMap::new();
        for part in rest.unwrap_or("").split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::config(s, format!("argument `{part}` is not key=value")))?;
            args.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Descriptor {
            name: name.trim().to_string(),
            args,
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.args.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::config(
                    format!("{}.{key}", self.name),
                    format!("cannot parse `{v}`"),
                )
            }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Errors on any argument not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.args.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::config(
                format!("{}.{k}", self.name),
                format!("unknown argument; expected one of {allowed:?}"),
            )),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.args.is_empty() {
            let parts: Vec<String> = self.args.iter().map(|(k, v)| format!("{k}={v}")).collect();
            write!(f, "({})", parts.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_args() {
        let d = Descriptor::parse("mean-field-normal(dim=51)").unwrap();
        assert_eq!(d.name, "mean-field-normal");
        assert_eq!(d.get::<usize>("dim").unwrap(), Some(51));
        let d = Descriptor::parse(" slcp ").unwrap();
        assert!(d.args.is_empty());
        assert_eq!(d.to_string(), "slcp");
        let d = Descriptor::parse("linear-regression(p=10, n=100)").unwrap();
        assert_eq!(d.to_string(), "linear-regression(n=100,p=10)");
    }

    #[test]
    fn rejects_malformed() {
        assert!(Descriptor::parse("x(dim=3").is_err());
        assert!(Descriptor::parse("x(dim)").is_err());
        let d = Descriptor::parse("x(dim=a)").unwrap();
        assert!(d.get::<usize>("dim").is_err());
        assert!(d.check_keys(&["n"]).is_err());
    }
}
