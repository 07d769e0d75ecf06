//! Generator descriptors such as `lazy-cycle:m=5:hold=0.5`.
//!
//! The same descriptor string doubles as the chain id in reports. List values
//! (`mu`) are `/`-separated so ids never contain commas.

use std::fmt;
use std::str::FromStr;

use mml_core::chain::{generate, Family};
use mml_core::ChainSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Descriptor {
    Iid { mu: Vec<f64> },
    LazyCycle { m: usize, hold: f64 },
    BirthDeath { m: usize, p: f64, q: f64 },
    RandomDense {
        m: usize,
        alpha: f64,
        #[serde(default)]
        seed: u64,
    },
    TwoState { p: f64, q: f64 },
}

impl Descriptor {
    pub fn family(&self) -> Family {
        match self {
            Descriptor::Iid { mu } => Family::Iid { mu: mu.clone() },
            &Descriptor::LazyCycle { m, hold } => Family::LazyCycle { m, hold },
            &Descriptor::BirthDeath { m, p, q } => Family::BirthDeath { m, p, q },
            &Descriptor::RandomDense { m, alpha, .. } => Family::RandomDense { m, alpha },
            &Descriptor::TwoState { p, q } => Family::TwoState { p, q },
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Descriptor::RandomDense { seed, .. } => *seed,
            _ => 0,
        }
    }

    pub fn build(&self) -> mml_core::Result<ChainSpec> {
        generate(&self.family(), self.seed())
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Descriptor::Iid { mu } => {
                let mu: Vec<String> = mu.iter().map(f64::to_string).collect();
                write!(f, "iid:mu={}", mu.join("/"))
            }
            Descriptor::LazyCycle { m, hold } => write!(f, "lazy-cycle:m={m}:hold={hold}"),
            Descriptor::BirthDeath { m, p, q } => write!(f, "birth-death:m={m}:p={p}:q={q}"),
            Descriptor::RandomDense { m, alpha, seed } => write!(f, "random-dense:m={m}:alpha={alpha}:seed={seed}"),
            Descriptor::TwoState { p, q } => write!(f, "two-state:p={p}:q={q}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bad descriptor {input:?}: {reason}")]
pub struct DescriptorError {
    input: String,
    reason: String,
}

struct Fields<'a> {
    input: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn err(&self, reason: impl Into<String>) -> DescriptorError {
        DescriptorError { input: self.input.into(), reason: reason.into() }
    }

    fn raw(&self, key: &str) -> Result<&'a str, DescriptorError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| self.err(format!("missing {key}=")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, DescriptorError> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| self.err(format!("cannot parse {key}={v}")))
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, DescriptorError> {
        if self.pairs.iter().any(|(k, _)| *k == key) {
            self.get(key)
        } else {
            Ok(default)
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<(), DescriptorError> {
        match self.pairs.iter().find(|(k, _)| !allowed.contains(k)) {
            Some((k, _)) => Err(self.err(format!("unknown key {k}"))),
            None => Ok(()),
        }
    }
}

impl FromStr for Descriptor {
    type Err = DescriptorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let mut fields = Fields { input: s, pairs: Vec::new() };
        for part in parts {
            match part.split_once('=') {
                Some(kv) => fields.pairs.push(kv),
                None => return Err(fields.err(format!("expected key=value, got {part:?}"))),
            }
        }
        let d = match name {
            "iid" => {
                fields.only(&["mu"])?;
                let mu = fields
                    .raw("mu")?
                    .split(['/', ','])
                    .map(|x| x.trim().parse::<f64>().map_err(|_| fields.err(format!("cannot parse mu entry {x:?}"))))
                    .collect::<Result<_, _>>()?;
                Descriptor::Iid { mu }
            }
            "lazy-cycle" => {
                fields.only(&["m", "hold"])?;
                Descriptor::LazyCycle { m: fields.get("m")?, hold: fields.get_or("hold", 0.5)? }
            }
            "birth-death" => {
                fields.only(&["m", "p", "q"])?;
                Descriptor::BirthDeath { m: fields.get("m")?, p: fields.get("p")?, q: fields.get("q")? }
            }
            "random-dense" => {
                fields.only(&["m", "alpha", "seed"])?;
                Descriptor::RandomDense { m: fields.get("m")?, alpha: fields.get_or("alpha", 1.0)?, seed: fields.get_or("seed", 0)? }
            }
            "two-state" => {
                fields.only(&["p", "q"])?;
                Descriptor::TwoState { p: fields.get("p")?, q: fields.get("q")? }
            }
            other => return Err(fields.err(format!("unknown family {other:?}"))),
        };
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["iid:mu=0.25/0.75", "lazy-cycle:m=5:hold=0.5", "birth-death:m=8:p=0.3:q=0.2", "random-dense:m=4:alpha=1:seed=9", "two-state:p=0.1:q=0.2"] {
            let d: Descriptor = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
            d.build().unwrap();
        }
        assert_eq!("iid:mu=0.5,0.5".parse::<Descriptor>().unwrap(), Descriptor::Iid { mu: vec![0.5, 0.5] });
    }

    #[test]
    fn rejects_garbage() {
        assert!("nope:m=3".parse::<Descriptor>().is_err());
        assert!("lazy-cycle:m=x".parse::<Descriptor>().is_err());
        assert!("lazy-cycle:m=3:colour=red".parse::<Descriptor>().is_err());
        assert!("two-state:p=0.1".parse::<Descriptor>().is_err());
    }

    #[test]
    fn serde_tagged_form() {
        let d: Descriptor = serde_json::from_str(r#"{"family": "lazy-cycle", "m": 10, "hold": 0.5}"#).unwrap();
        assert_eq!(d, Descriptor::LazyCycle { m: 10, hold: 0.5 });
        let r: Descriptor = serde_json::from_str(r#"{"family": "random-dense", "m": 3, "alpha": 2.0}"#).unwrap();
        assert_eq!(r.seed(), 0);
    }
}
