//! Run configuration files.
//!
//! ```text
//! # comment
//! seed = 7
//! output_dir = out
//!
//! [mask]
//! aperture_diameter = 5.87 nm
//! wall_width = 4.8 nm
//! ```
//!
//! One `key = value` per line. Keys before the first `[section]` header are
//! global. Quantities take an optional unit suffix: lengths `nm` or `um`,
//! energies `keV` or `eV`, times `us` or `ns`; a bare number is read in the
//! first unit listed. Lists are comma separated. Booleans are
//! `true/false`, `on/off` or `yes/no`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: key `{key}`: {reason}")]
    Value { line: usize, key: String, reason: String },
    #[error("missing key `{key}` in {section}")]
    Missing { section: String, key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Length,
    Energy,
    Time,
    /// Dimensionless; any suffix is an error.
    Plain,
}

impl Unit {
    fn scale(self, suffix: &str) -> Option<f64> {
        match (self, suffix) {
            (_, "") => Some(1.0),
            (Unit::Length, "nm") => Some(1.0),
            (Unit::Length, "um") | (Unit::Length, "μm") => Some(1e3),
            (Unit::Energy, "keV") => Some(1.0),
            (Unit::Energy, "eV") => Some(1e-3),
            (Unit::Time, "us") | (Unit::Time, "μs") => Some(1.0),
            (Unit::Time, "ns") => Some(1e-3),
            _ => None,
        }
    }

    fn expected(self) -> &'static str {
        match self {
            Unit::Length => "nm or um",
            Unit::Energy => "keV or eV",
            Unit::Time => "us or ns",
            Unit::Plain => "no unit",
        }
    }
}

/// Keys each section accepts.
const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["seed", "output_dir"]),
    (
        "mask",
        &[
            "naa",
            "aperture_diameter",
            "wall_width",
            "hole_diameter",
            "hole_pitch",
            "holes_x",
            "holes_y",
            "dead_layer_loss",
        ],
    ),
    (
        "implant",
        &["energy", "dose", "conversion_yield", "allow_high_yield", "transport", "range_table"],
    ),
    (
        "sweep",
        &["energies", "hole_diameters", "naa", "n_ions", "bin_width", "kde_nodes", "svg", "range_table"],
    ),
    ("ratio", &["dose", "pl_masked", "pl_bare"]),
    ("bca", &["energies", "n_ions"]),
    ("analysis", &["couplings", "t2"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    /// Directory relative paths are resolved against.
    base: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        cfg.sections.insert(section.clone(), BTreeMap::new());
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, reason: format!("unterminated section header `{body}`") })?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) || name.is_empty() {
                    return Err(ConfigError::Syntax { line, reason: format!("unknown section `[{name}]`") });
                }
                if cfg.sections.contains_key(name) {
                    return Err(ConfigError::Syntax { line, reason: format!("section `[{name}]` appears twice") });
                }
                section = name.to_string();
                cfg.sections.insert(section.clone(), BTreeMap::new());
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, reason: format!("expected `key = value`, found `{body}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line, reason: "empty key".into() });
            }
            let allowed = SCHEMA.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !allowed.contains(&key) {
                let place = if section.is_empty() { "at top level".to_string() } else { format!("in [{section}]") };
                return Err(ConfigError::Value { line, key: key.into(), reason: format!("unknown key {place}") });
            }
            if value.is_empty() {
                return Err(ConfigError::Value { line, key: key.into(), reason: "missing value".into() });
            }
            let entries = cfg.sections.get_mut(&section).expect("section inserted on header");
            if entries.contains_key(key) {
                return Err(ConfigError::Value { line, key: key.into(), reason: "set twice".into() });
            }
            entries.insert(key.into(), Entry { value: value.into(), line });
        }
        Ok(cfg)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    pub fn f64(&self, section: &str, key: &str, unit: Unit) -> Result<Option<f64>, ConfigError> {
        self.entry(section, key)
            .map(|e| parse_quantity(&e.value, unit).map_err(|reason| value_err(e, key, reason)))
            .transpose()
    }

    pub fn require_f64(&self, section: &str, key: &str, unit: Unit) -> Result<f64, ConfigError> {
        self.f64(section, key, unit)?.ok_or_else(|| missing(section, key))
    }

    pub fn list(&self, section: &str, key: &str, unit: Unit) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|v| parse_quantity(v.trim(), unit).map_err(|reason| value_err(e, key, reason)))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    pub fn usize(&self, section: &str, key: &str) -> Result<Option<usize>, ConfigError> {
        self.entry(section, key)
            .map(|e| {
                e.value
                    .parse::<usize>()
                    .map_err(|_| value_err(e, key, format!("`{}` is not a non-negative integer", e.value)))
            })
            .transpose()
    }

    pub fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, ConfigError> {
        self.entry(section, key)
            .map(|e| {
                e.value
                    .parse::<u64>()
                    .map_err(|_| value_err(e, key, format!("`{}` is not a non-negative integer", e.value)))
            })
            .transpose()
    }

    pub fn bool(&self, section: &str, key: &str) -> Result<Option<bool>, ConfigError> {
        self.entry(section, key)
            .map(|e| parse_bool(&e.value).ok_or_else(|| value_err(e, key, format!("`{}` is not a boolean", e.value))))
            .transpose()
    }

    pub fn bool_list(&self, section: &str, key: &str) -> Result<Option<Vec<bool>>, ConfigError> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        e.value
            .split(',')
            .map(|v| parse_bool(v.trim()).ok_or_else(|| value_err(e, key, format!("`{}` is not a boolean", v.trim()))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// A path value resolved against the config file's directory.
    pub fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.str(section, key).map(|p| self.base.join(p))
    }

    /// Line number of a key, for error messages raised after parsing.
    pub fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|e| e.line)
    }
}

fn value_err(e: &Entry, key: &str, reason: String) -> ConfigError {
    ConfigError::Value { line: e.line, key: key.into(), reason }
}

fn missing(section: &str, key: &str) -> ConfigError {
    let section = if section.is_empty() { "the top level".to_string() } else { format!("[{section}]") };
    ConfigError::Missing { section, key: key.into() }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" => Some(true),
        "false" | "off" | "no" => Some(false),
        _ => None,
    }
}

/// A number with an optional unit suffix, converted to the canonical unit.
pub fn parse_quantity(text: &str, unit: Unit) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|(i, c)| c.is_alphabetic() && !is_exponent(text, *i))
        .map_or(text.len(), |(i, _)| i);
    let (num, suffix) = (text[..split].trim(), text[split..].trim());
    let value: f64 = num.parse().map_err(|_| format!("`{text}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let scale = unit
        .scale(suffix)
        .ok_or_else(|| format!("unit `{suffix}` not accepted here (expected {})", unit.expected()))?;
    Ok(value * scale)
}

/// `e`/`E` between a digit and a sign or digit is an exponent, not a unit.
fn is_exponent(text: &str, i: usize) -> bool {
    let b = text.as_bytes();
    matches!(b[i], b'e' | b'E')
        && i > 0
        && (b[i - 1].is_ascii_digit() || b[i - 1] == b'.')
        && b.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}
