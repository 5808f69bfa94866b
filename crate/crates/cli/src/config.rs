//! Flat key/value configuration and the flag > file > default resolution.
//!
//! Every setting is carried as text and parsed with the same `FromStr`
//! implementation whether it came from a flag or from a file, so a manifest
//! written by one run reads back identically.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Keys accepted in config files (after lower-casing and `-` → `_`).
pub const KNOWN_KEYS: &[&str] = &[
    "command", "version", "seed", "threads", "format", "model", "a", "b", "mu", "kappa",
    "theta", "epsilon", "rho", "y0", "scheme", "ode_substeps", "area_sampler", "area_q",
    "reference_scheme", "t0", "t_end", "m", "m_start", "paths", "h", "sampler", "dw1", "dw2",
    "samples", "threshold", "check", "f", "grid",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConfigFormat {
    Json,
    Toml,
}

/// Parsed config file: normalised key → textual value.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigMap(pub BTreeMap<String, String>);

fn normalise_key(k: &str) -> String {
    let k = k.trim().to_ascii_lowercase().replace('-', "_");
    match k.as_str() {
        "t" | "horizon" => "t_end".into(),
        "p" => "paths".into(),
        "mstart" => "m_start".into(),
        _ => k,
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn json_scalar(key: &str, v: &serde_json::Value) -> Result<String, CliError> {
    use serde_json::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(invalid(format!("config key `{key}`: expected a scalar"))),
    }
}

fn toml_scalar(key: &str, v: &toml::Value) -> Result<String, CliError> {
    use toml::Value;
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        _ => Err(invalid(format!("config key `{key}`: expected a scalar"))),
    }
}

fn insert(map: &mut BTreeMap<String, String>, raw_key: &str, value: String) -> Result<(), CliError> {
    let key = normalise_key(raw_key);
    if !KNOWN_KEYS.contains(&key.as_str()) {
        return Err(invalid(format!("unknown config key `{raw_key}`")));
    }
    if map.insert(key, value).is_some() {
        return Err(invalid(format!("config key `{raw_key}` given twice")));
    }
    Ok(())
}

/// Parses a flat JSON object or TOML table. Arrays of scalars become
/// comma-separated lists; nested tables are rejected.
pub fn parse_config(text: &str, format: ConfigFormat) -> Result<ConfigMap, CliError> {
    let mut map = BTreeMap::new();
    match format {
        ConfigFormat::Json => {
            let v: serde_json::Value = serde_json::from_str(text)
                .map_err(|e| invalid(format!("config is not valid JSON: {e}")))?;
            let obj = v
                .as_object()
                .ok_or_else(|| invalid("config must be a JSON object"))?;
            for (k, v) in obj {
                let value = match v {
                    serde_json::Value::Array(items) => items
                        .iter()
                        .map(|x| json_scalar(k, x))
                        .collect::<Result<Vec<_>, _>>()?
                        .join(","),
                    serde_json::Value::Null => continue,
                    other => json_scalar(k, other)?,
                };
                insert(&mut map, k, value)?;
            }
        }
        ConfigFormat::Toml => {
            let table: toml::Table = text
                .parse()
                .map_err(|e| invalid(format!("config is not valid TOML: {e}")))?;
            for (k, v) in &table {
                let value = match v {
                    toml::Value::Array(items) => items
                        .iter()
                        .map(|x| toml_scalar(k, x))
                        .collect::<Result<Vec<_>, _>>()?
                        .join(","),
                    other => toml_scalar(k, other)?,
                };
                insert(&mut map, k, value)?;
            }
        }
    }
    Ok(ConfigMap(map))
}

pub fn load_config(path: &Path) -> Result<ConfigMap, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("json") => parse_config(&text, ConfigFormat::Json),
        Some("toml") => parse_config(&text, ConfigFormat::Toml),
        _ => parse_config(&text, ConfigFormat::Json)
            .or_else(|_| parse_config(&text, ConfigFormat::Toml)),
    }
}

/// Resolves settings in precedence order and records what was used.
#[derive(Debug, Default)]
pub struct Resolver {
    file: ConfigMap,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(file: ConfigMap) -> Resolver {
        Resolver {
            file,
            resolved: BTreeMap::new(),
        }
    }

    fn raw(&self, key: &str, flag: Option<&str>) -> Option<String> {
        flag.map(str::to_owned)
            .or_else(|| self.file.0.get(key).cloned())
    }

    fn parse<T>(key: &str, text: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        text.parse::<T>()
            .map_err(|e| invalid(format!("`{key}`: {e}")))
    }

    /// Flag, else file, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<&str>, default: T) -> Result<T, CliError>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        let value = match self.raw(key, flag) {
            Some(text) => Self::parse(key, &text)?,
            None => default,
        };
        self.resolved.insert(key.to_owned(), value.to_string());
        Ok(value)
    }

    /// Flag, else file, else absent.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<&str>) -> Result<Option<T>, CliError>
    where
        T: FromStr + fmt::Display,
        T::Err: fmt::Display,
    {
        match self.raw(key, flag) {
            Some(text) => {
                let v: T = Self::parse(key, &text)?;
                self.resolved.insert(key.to_owned(), v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    /// Records a derived value that is not read from any source.
    pub fn record(&mut self, key: &str, value: impl fmt::Display) {
        self.resolved.insert(key.to_owned(), value.to_string());
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// Comma-separated floats, e.g. `1.0,0.09`.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let items = s
            .split(',')
            .map(|p| {
                let p = p.trim();
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("expected a finite number, got {p:?}"))
            })
            .collect::<Result<Vec<f64>, String>>()?;
        Ok(FloatList(items))
    }
}

impl fmt::Display for FloatList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Non-negative count; accepts `100000`, `1e5` or `100_000`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Count(pub u64);

impl FromStr for Count {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let t = s.trim().replace('_', "");
        if let Ok(n) = t.parse::<u64>() {
            return Ok(Count(n));
        }
        match t.parse::<f64>() {
            Ok(v) if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v <= 9.007_199_254_740_992e15 => {
                Ok(Count(v as u64))
            }
            _ => Err(format!("expected a non-negative whole number, got {s:?}")),
        }
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finite float (rejects `nan`/`inf`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl FromStr for Real {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Real(v)),
            _ => Err(format!("expected a finite number, got {s:?}")),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (csv or json)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelName {
    Gbm,
    Langevin,
    Heston,
    Linear2d,
}

impl FromStr for ModelName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gbm" => Ok(ModelName::Gbm),
            "langevin" | "ou" => Ok(ModelName::Langevin),
            "heston" => Ok(ModelName::Heston),
            "linear2d" | "bilinear" => Ok(ModelName::Linear2d),
            other => Err(format!("unknown model {other:?} (gbm, langevin, heston, linear2d)")),
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelName::Gbm => "gbm",
            ModelName::Langevin => "langevin",
            ModelName::Heston => "heston",
            ModelName::Linear2d => "linear2d",
        })
    }
}

/// A scheme name or `none`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaybeScheme(pub Option<sdesim_core::SchemeKind>);

impl FromStr for MaybeScheme {
    type Err = sdesim_core::SdeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("none") {
            Ok(MaybeScheme(None))
        } else {
            s.parse().map(|k| MaybeScheme(Some(k)))
        }
    }
}

impl fmt::Display for MaybeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(k) => write!(f, "{k}"),
            None => f.write_str("none"),
        }
    }
}
