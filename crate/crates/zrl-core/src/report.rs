//! Structured run reports: named checks with explicit relations and
//! tolerances, plot-data series, and a determinism hash.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, ZrlError};

/// How a measured quantity relates to its bound or reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// measured >= bound - tolerance
    #[serde(rename = ">=")]
    Ge,
    /// measured <= bound + tolerance
    #[serde(rename = "<=")]
    Le,
    /// |measured - bound| <= tolerance * max(1, |bound|)
    #[serde(rename = "~=")]
    Approx,
    /// recorded only; never contributes to pass/fail
    #[serde(rename = "info")]
    Info,
}

/// A measured value; complex results keep both parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Measured {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Measured {
    fn primary(&self) -> f64 {
        match *self {
            Measured::Real(x) => x,
            Measured::Complex { re, im } => (re * re + im * im).sqrt(),
        }
    }
}

impl From<f64> for Measured {
    fn from(x: f64) -> Self {
        Measured::Real(x)
    }
}

/// One evaluated check. The relation is always evaluated at construction,
/// never inferred later.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: Measured,
    pub bound_or_reference: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn new<M: Into<Measured>>(
        name: &str,
        measured: M,
        bound: f64,
        relation: Relation,
        tolerance: f64,
    ) -> CheckRecord {
        let measured = measured.into();
        let m = measured.primary();
        let pass = match relation {
            Relation::Ge => m >= bound - tolerance,
            Relation::Le => m <= bound + tolerance,
            Relation::Approx => (m - bound).abs() <= tolerance * bound.abs().max(1.0),
            Relation::Info => true,
        };
        CheckRecord {
            name: name.to_string(),
            measured,
            bound_or_reference: bound,
            relation,
            tolerance,
            pass,
        }
    }

    pub fn info<M: Into<Measured>>(name: &str, measured: M) -> CheckRecord {
        CheckRecord::new(name, measured, 0.0, Relation::Info, 0.0)
    }
}

/// A named table of numeric rows for CSV emission.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Structured record of one pipeline run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub checks: Vec<CheckRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<String, Series>,
    pub timing_ms: f64,
    pub version: String,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> RunReport {
        RunReport {
            command: command.to_string(),
            config,
            checks: Vec::new(),
            series: BTreeMap::new(),
            timing_ms: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.checks.push(check);
    }

    /// True when every non-informational check passed.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// SHA-256 over the serialized report with the timing field zeroed.
    /// Identical config and seed must reproduce this hash bit-for-bit.
    pub fn determinism_hash(&self) -> String {
        let mut clone = self.clone();
        clone.timing_ms = 0.0;
        let bytes = serde_json::to_vec(&clone).expect("report serializes");
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for b in digest {
            hex.push_str(&format!("{b:02x}"));
        }
        hex
    }

    /// Emit one stored series as CSV: header row, 17-significant-digit
    /// decimal floats, LF line endings.
    pub fn emit_plot_data(&self, kind: &str) -> Result<String> {
        let series = self.series.get(kind).ok_or_else(|| {
            ZrlError::Config(format!("report has no series named '{kind}'"))
        })?;
        if series.rows.is_empty() {
            return Err(ZrlError::Config(format!("series '{kind}' is empty")));
        }
        let mut out = String::new();
        out.push_str(&series.columns.join(","));
        out.push('\n');
        for row in &series.rows {
            let cells: Vec<String> = row.iter().map(|v| format_full(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }
}

/// 17 significant digits: enough to round-trip any f64 exactly.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}
