//! Where results go: files under `--out`, or stdout.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use sdesim_core::format_f64;

use crate::config::OutputFormat;
use crate::CliError;

#[derive(Clone, Debug)]
pub struct Sink {
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>, format: OutputFormat) -> Sink {
        Sink { dir, format }
    }

    pub fn to_files(&self) -> bool {
        self.dir.is_some()
    }

    fn ext(&self) -> &'static str {
        match self.format {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    /// Writes `<dir>/<stem>.<ext>`, or prints `body` when there is no directory.
    pub fn emit(&self, stem: &str, body: &str) -> Result<(), CliError> {
        match &self.dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(format!("{stem}.{}", self.ext())), body)?;
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(body.as_bytes())?;
                out.flush()?;
            }
        }
        Ok(())
    }

    /// `manifest.json`: the resolved settings plus the command name. Only
    /// written with `--out`.
    pub fn manifest(&self, command: &str, resolved: &BTreeMap<String, String>) -> Result<(), CliError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let mut map = serde_json::Map::new();
        map.insert("command".into(), command.into());
        for (k, v) in resolved {
            map.insert(k.clone(), v.clone().into());
        }
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(map))
            .map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
        fs::create_dir_all(dir)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Quotes a CSV field when it contains a separator, quote or newline.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Appends one CSV line.
pub fn csv_line(buf: &mut String, fields: &[String]) {
    let joined: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    buf.push_str(&joined.join(","));
    buf.push('\n');
}

pub fn num(x: f64) -> String {
    format_f64(x)
}

pub fn json_text(v: &impl serde::Serialize) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Runtime(format!("JSON encoding: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
        let mut s = String::new();
        csv_line(&mut s, &["t".into(), "x,y".into()]);
        assert_eq!(s, "t,\"x,y\"\n");
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 20.085536923187668] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
