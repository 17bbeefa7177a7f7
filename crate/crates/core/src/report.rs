//! Per-point verification records shared by the barrier and Harnack suites.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One inequality sample: lhs ≥ rhs is the claim, margin = lhs - rhs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointRecord {
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub error: f64,
}

impl PointRecord {
    pub fn new(radius: f64, lhs: f64, rhs: f64, error: f64) -> Self {
        Self { radius, lhs, rhs, margin: lhs - rhs, error }
    }

    /// A point only counts as a violation when it fails beyond its error bar.
    pub fn violated(&self) -> bool {
        self.margin < -2.0 * self.error
    }
}

/// Inequality margins over a sample set plus fitted empirical constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub label: String,
    pub records: Vec<PointRecord>,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), records: Vec::new(), constants: BTreeMap::new(), notes: Vec::new() }
    }

    pub fn min_margin(&self) -> f64 {
        self.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> usize {
        self.records.iter().filter(|r| r.violated()).count()
    }

    pub fn set_constant(&mut self, key: &str, value: f64) {
        self.constants.insert(key.to_string(), value);
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    /// CSV with columns radius,lhs,rhs,margin,err (17 significant digits).
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,lhs,rhs,margin,err\n");
        for r in &self.records {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.radius, r.lhs, r.rhs, r.margin, r.error
            ));
        }
        out
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label,
            "points": self.records.len(),
            "min_margin": self.min_margin(),
            "violations": self.violations(),
            "constants": self.constants,
            "notes": self.notes,
        })
    }
}
