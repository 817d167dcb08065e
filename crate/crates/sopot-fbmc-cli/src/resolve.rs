//! Flag / config-file / default resolution and the run manifest.
//!
//! A config file is `key=value` lines ('#' comments allowed); keys are the
//! long flag names. Flags given on the command line win. Unknown keys are
//! rejected. The manifest a run writes is itself a valid config file, so
//! `--config <output>.manifest` reproduces the run.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sopot_fbmc::{Error, Result};

pub struct Resolver {
    command: &'static str,
    config: BTreeMap<String, String>,
    /// resolved key=value pairs, echoed into the manifest in resolution order
    resolved: Vec<(String, String)>,
}

impl Resolver {
    /// Loads the optional config file and validates its keys against the
    /// command's known set (plus `command` and `output`).
    pub fn new(
        command: &'static str,
        config_path: Option<&str>,
        known_keys: &[&str],
    ) -> Result<Self> {
        let mut config = BTreeMap::new();
        if let Some(path) = config_path {
            let text = fs::read_to_string(path)?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Parse(format!("{path}:{}: expected key=value", lineno + 1))
                })?;
                config.insert(key.trim().to_string(), value.trim().to_string());
            }
            if let Some(cmd) = config.remove("command") {
                if cmd != command {
                    return Err(Error::InvalidInput(format!(
                        "config file is for command '{cmd}', not '{command}'"
                    )));
                }
            }
            for key in config.keys() {
                if key != "output" && !known_keys.contains(&key.as_str()) {
                    return Err(Error::InvalidInput(format!(
                        "unknown config key '{key}' for command '{command}'"
                    )));
                }
            }
        }
        Ok(Self {
            command,
            config,
            resolved: Vec::new(),
        })
    }

    fn raw(&self, key: &str, flag: Option<&String>) -> Option<String> {
        flag.cloned().or_else(|| self.config.get(key).cloned())
    }

    /// A required parameter: flag, else config, else error.
    pub fn required<T: FromStr>(&mut self, key: &str, flag: Option<&String>) -> Result<T> {
        let raw = self
            .raw(key, flag)
            .ok_or_else(|| Error::InvalidInput(format!("missing required parameter --{key}")))?;
        self.parse_and_record(key, raw)
    }

    /// An optional parameter with a default.
    pub fn with_default<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<&String>,
        default: T,
    ) -> Result<T> {
        match self.raw(key, flag) {
            Some(raw) => self.parse_and_record(key, raw),
            None => {
                self.resolved.push((key.to_string(), default.to_string()));
                Ok(default)
            }
        }
    }

    /// An optional parameter that may be absent entirely.
    pub fn optional<T: FromStr>(&mut self, key: &str, flag: Option<&String>) -> Result<Option<T>> {
        match self.raw(key, flag) {
            Some(raw) => self.parse_and_record(key, raw).map(Some),
            None => Ok(None),
        }
    }

    fn parse_and_record<T: FromStr>(&mut self, key: &str, raw: String) -> Result<T> {
        let value = raw
            .parse()
            .map_err(|_| Error::Parse(format!("invalid value '{raw}' for --{key}")))?;
        self.resolved.push((key.to_string(), raw));
        Ok(value)
    }

    /// The primary output path: flag, else the config file's `output` key.
    pub fn output(&self, flag: Option<&String>) -> Result<String> {
        flag.cloned()
            .or_else(|| self.config.get("output").cloned())
            .ok_or_else(|| Error::InvalidInput("missing required parameter --output".into()))
    }

    /// Writes the manifest next to the primary output.
    pub fn write_manifest(&self, output: &str) -> Result<()> {
        let mut text = String::from("# sopot-fbmc manifest\n");
        text.push_str(&format!("command={}\n", self.command));
        for (key, value) in &self.resolved {
            text.push_str(&format!("{key}={value}\n"));
        }
        text.push_str(&format!("output={output}\n"));
        fs::write(manifest_path(output), text)?;
        Ok(())
    }
}

pub fn manifest_path(output: &str) -> String {
    format!("{output}.manifest")
}

/// Parses "start:step:stop" (inclusive) or a comma-separated list of floats.
pub fn parse_float_list(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let start: f64 = parse_float(parts[0])?;
        let step: f64 = parse_float(parts[1])?;
        let stop: f64 = parse_float(parts[2])?;
        if step <= 0.0 || stop < start {
            return Err(Error::InvalidInput(format!("bad range '{spec}'")));
        }
        let mut out = Vec::new();
        let mut i = 0;
        loop {
            let x = start + step * i as f64;
            if x > stop + 1e-9 {
                break;
            }
            out.push(x);
            i += 1;
        }
        return Ok(out);
    }
    spec.split(',').map(parse_float).collect()
}

fn parse_float(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid number '{s}'")))
}

/// Parses a comma-separated integer list.
pub fn parse_u32_list(spec: &str) -> Result<Vec<u32>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("invalid integer '{s}'")))
        })
        .collect()
}

/// Parses a comma-separated `label=path` list.
pub fn parse_labeled_paths(spec: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let (label, path) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("expected label=path, got '{item}'")))?;
        if label.trim().is_empty() || path.trim().is_empty() {
            return Err(Error::InvalidInput(format!(
                "empty label or path in '{item}'"
            )));
        }
        out.push((label.trim().to_string(), path.trim().to_string()));
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("no filters given".into()));
    }
    Ok(out)
}

/// Reads a filter CSV from disk.
pub fn load_filter(path: &str) -> Result<(sopot_fbmc::fbmc::PrototypeFilter, usize, usize)> {
    let file = fs::File::open(Path::new(path))?;
    sopot_fbmc::fbmc::read_filter_csv(std::io::BufReader::new(file))
}
