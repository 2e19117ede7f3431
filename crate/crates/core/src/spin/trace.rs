//! Measurement traces and their two-column CSV forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photon autocorrelation versus delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Trace {
    /// ns
    pub t: Vec<f64>,
    pub g2: Vec<f64>,
    /// Optional per-bin standard deviation, used as fit weights.
    pub sigma: Option<Vec<f64>>,
}

impl G2Trace {
    pub fn new(t: Vec<f64>, g2: Vec<f64>) -> Result<Self> {
        check_columns("g2 trace", &t, &g2)?;
        if g2.iter().any(|v| *v < 0.0) {
            return Err(format_err("g2 trace", "g2 values must be non-negative"));
        }
        let (lo, hi) = min_max(&t);
        if !(lo < 0.0 && hi > 0.0) {
            return Err(format_err("g2 trace", "delays must span both signs"));
        }
        Ok(Self { t, g2, sigma: None })
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.t.len() || sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(format_err("g2 trace", "sigma must be positive, one per bin"));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (t, g2) = read_columns(reader, "g2 trace", ["t_ns", "g2"])?;
        Self::new(t, g2)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_columns(writer, ["t_ns", "g2"], &self.t, &self.g2)
    }
}

/// Normalized ODMR fluorescence versus microwave frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    /// MHz, increasing.
    pub frequency: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl OdmrSpectrum {
    pub fn new(frequency: Vec<f64>, contrast: Vec<f64>) -> Result<Self> {
        check_columns("odmr spectrum", &frequency, &contrast)?;
        if frequency.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(format_err("odmr spectrum", "frequencies must be strictly increasing"));
        }
        if contrast.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(format_err("odmr spectrum", "contrast must lie in [0, 1]"));
        }
        Ok(Self { frequency, contrast })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (f, c) = read_columns(reader, "odmr spectrum", ["f_mhz", "contrast"])?;
        Self::new(f, c)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_columns(writer, ["f_mhz", "contrast"], &self.frequency, &self.contrast)
    }
}

/// Hahn-echo coherence versus total evolution time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoTrace {
    /// μs
    pub t: Vec<f64>,
    pub coherence: Vec<f64>,
}

impl EchoTrace {
    pub fn new(t: Vec<f64>, coherence: Vec<f64>) -> Result<Self> {
        check_columns("echo trace", &t, &coherence)?;
        if t.iter().any(|v| *v < 0.0) {
            return Err(format_err("echo trace", "evolution times must be non-negative"));
        }
        Ok(Self { t, coherence })
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (t, c) = read_columns(reader, "echo trace", ["t_us", "coherence"])?;
        Self::new(t, c)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_columns(writer, ["t_us", "coherence"], &self.t, &self.coherence)
    }
}

fn format_err(kind: &'static str, reason: impl Into<String>) -> Error {
    Error::Format {
        kind,
        reason: reason.into(),
    }
}

fn check_columns(kind: &'static str, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(format_err(kind, "columns differ in length"));
    }
    if x.len() < 3 {
        return Err(format_err(kind, "need at least three rows"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(format_err(kind, "values must be finite"));
    }
    Ok(())
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn read_columns<R: Read>(reader: R, kind: &'static str, header: [&str; 2]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let found = rdr.headers()?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(format_err(kind, format!("header must be `{}`", header.join(","))));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format_err(kind, format!("row {}: {e}", i + 2)))?;
        let parse = |k: usize| -> Result<f64> {
            let field = rec.get(k).unwrap_or("");
            field
                .parse()
                .map_err(|_| format_err(kind, format!("row {}: `{field}` in column {} is not a number", i + 2, header[k])))
        };
        x.push(parse(0)?);
        y.push(parse(1)?);
    }
    Ok((x, y))
}

fn write_columns<W: Write>(writer: W, header: [&str; 2], x: &[f64], y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for (a, b) in x.iter().zip(y) {
        w.write_record([a.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
