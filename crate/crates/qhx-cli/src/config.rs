//! Config files and argument value types.
//!
//! A config file is a JSON object whose keys are the long flag names in
//! snake_case; any flag given on the command line replaces the file's value.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use qhx::geometry::{CuspModel, DomainSpec};

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or output path (exit 2).
    Usage(String),
    /// Library error: exit 3 when numerical, 2 otherwise.
    Lib(qhx::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Lib(e) if e.is_numerical() => 3,
            CliError::Lib(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<qhx::Error> for CliError {
    fn from(e: qhx::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

/// Overlays the command-line values (skipping unset options and false
/// switches) onto the config file and deserializes the result.
pub fn resolve<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&Path>) -> Result<T, CliError> {
    let mut base = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Usage("config must be a JSON object".into())),
                Err(e) => return Err(CliError::Usage(format!("config {}: {e}", p.display()))),
            }
        }
        None => Map::new(),
    };
    let over = serde_json::to_value(cli).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Value::Object(m) = over {
        for (k, v) in m {
            if v.is_null() || v == Value::Bool(false) {
                continue;
            }
            base.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// A domain given as JSON (`{"variant":"unit_disk"}`) or in short form:
/// `disk`, `power_cusp:S[:graph|horn]`, `iterated_log_cusp:S:σ1,σ2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainArg(pub DomainSpec);

fn num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}"))
}

impl FromStr for DomainArg {
    type Err = String;
    fn from_str(text: &str) -> Result<Self, String> {
        let t = text.trim();
        if t.starts_with('{') {
            return serde_json::from_str(t).map(DomainArg).map_err(|e| e.to_string());
        }
        let parts: Vec<&str> = t.split(':').collect();
        let spec = match parts.as_slice() {
            ["disk"] | ["unit_disk"] => DomainSpec::UnitDisk,
            ["power_cusp", s] => DomainSpec::PowerCusp {
                s: num(s)?,
                model: CuspModel::Graph,
            },
            ["power_cusp", s, m] => DomainSpec::PowerCusp {
                s: num(s)?,
                model: match *m {
                    "graph" => CuspModel::Graph,
                    "horn" => CuspModel::Horn,
                    _ => return Err(format!("unknown cusp model {m:?}")),
                },
            },
            ["iterated_log_cusp", s, sigma] => DomainSpec::IteratedLogCusp {
                s: num(s)?,
                sigma: sigma.split(',').map(num).collect::<Result<_, _>>()?,
            },
            _ => return Err(format!("unrecognised domain {text:?}")),
        };
        Ok(DomainArg(spec))
    }
}

impl Serialize for DomainArg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DomainArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => serde_json::from_value(v).map(DomainArg).map_err(serde::de::Error::custom),
        }
    }
}

/// A vector of log exponents: `-2`, `-2:-1` on the command line; a number,
/// array or such string in a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaVec(pub Vec<f64>);

impl FromStr for LambdaVec {
    type Err = String;
    fn from_str(text: &str) -> Result<Self, String> {
        let t = text.trim().trim_start_matches('[').trim_end_matches(']');
        t.split([':', ','])
            .map(num)
            .collect::<Result<Vec<_>, _>>()
            .map(LambdaVec)
    }
}

impl Serialize for LambdaVec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LambdaVec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            Value::Number(n) => Ok(LambdaVec(vec![n.as_f64().unwrap_or(f64::NAN)])),
            v => serde_json::from_value(v).map(LambdaVec).map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_domain_forms() {
        assert_eq!("disk".parse::<DomainArg>().unwrap().0, DomainSpec::UnitDisk);
        assert_eq!(
            "power_cusp:0.5:horn".parse::<DomainArg>().unwrap().0,
            DomainSpec::PowerCusp {
                s: 0.5,
                model: CuspModel::Horn
            }
        );
        assert_eq!(
            "iterated_log_cusp:0.5:1,2".parse::<DomainArg>().unwrap().0,
            DomainSpec::IteratedLogCusp {
                s: 0.5,
                sigma: vec![1.0, 2.0]
            }
        );
        let j = r#"{"variant":"power_cusp","s":0.25}"#.parse::<DomainArg>().unwrap();
        assert_eq!(
            j.0,
            DomainSpec::PowerCusp {
                s: 0.25,
                model: CuspModel::Graph
            }
        );
        assert!("square".parse::<DomainArg>().is_err());
    }

    #[test]
    fn lambda_vectors() {
        assert_eq!("-2".parse::<LambdaVec>().unwrap().0, vec![-2.0]);
        assert_eq!("-2:-1.5".parse::<LambdaVec>().unwrap().0, vec![-2.0, -1.5]);
        let v: Vec<LambdaVec> = serde_json::from_str(r#"[-1, [-2, -2], "-1.5"]"#).unwrap();
        assert_eq!(v[1].0, vec![-2.0, -2.0]);
        assert_eq!(v[2].0, vec![-1.5]);
    }

    #[derive(Serialize, Deserialize, Debug)]
    #[serde(deny_unknown_fields)]
    struct Demo {
        a: Option<f64>,
        b: Option<f64>,
        #[serde(default)]
        flag: bool,
    }

    #[test]
    fn command_line_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"a": 1.0, "b": 2.0, "flag": true}"#).unwrap();
        let cli = Demo {
            a: Some(5.0),
            b: None,
            flag: false,
        };
        let r = resolve(&cli, Some(&p)).unwrap();
        assert_eq!((r.a, r.b, r.flag), (Some(5.0), Some(2.0), true));
        std::fs::write(&p, r#"{"c": 1.0}"#).unwrap();
        assert_eq!(resolve(&cli, Some(&p)).unwrap_err().exit_code(), 2);
    }
}
