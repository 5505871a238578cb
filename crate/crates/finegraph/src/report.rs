//! Measurement reports: radius-indexed constants with input digests,
//! monotonicity bookkeeping, and deterministic JSON serialization.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusEntry {
    pub radius: usize,
    pub values: BTreeMap<String, f64>,
    pub complete: bool,
}

/// A radius-indexed constant report. Fields listed in `monotone_keys` are
/// checked to be non-decreasing on every append; a violation is recorded
/// rather than silently accepted.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantReport {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub series: Vec<RadiusEntry>,
    pub monotone_keys: Vec<String>,
    pub monotone_violations: Vec<String>,
    pub verdict: Option<String>,
    pub notes: Vec<String>,
}

impl ConstantReport {
    pub fn new(command: &str, seed: u64) -> ConstantReport {
        ConstantReport {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: Vec::new(),
            series: Vec::new(),
            monotone_keys: Vec::new(),
            monotone_violations: Vec::new(),
            verdict: None,
            notes: Vec::new(),
        }
    }

    pub fn monotone(mut self, keys: &[&str]) -> ConstantReport {
        self.monotone_keys = keys.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(())
    }

    pub fn push_radius(&mut self, radius: usize, values: BTreeMap<String, f64>, complete: bool) {
        if let Some(prev) = self.series.last() {
            for key in &self.monotone_keys {
                if let (Some(&a), Some(&b)) = (prev.values.get(key), values.get(key)) {
                    if b < a - 1e-9 {
                        self.monotone_violations.push(format!(
                            "{key} decreased from {a} to {b} at radius {radius}"
                        ));
                    }
                }
            }
        }
        self.series.push(RadiusEntry { radius, values, complete });
    }

    pub fn values_of(&self, key: &str) -> Vec<f64> {
        self.series.iter().filter_map(|e| e.values.get(key).copied()).collect()
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_violations_are_recorded() {
        let mut r = ConstantReport::new("test", 0).monotone(&["sigma"]);
        r.push_radius(1, BTreeMap::from([("sigma".into(), 1.0)]), true);
        r.push_radius(2, BTreeMap::from([("sigma".into(), 2.0)]), true);
        assert!(r.monotone_violations.is_empty());
        r.push_radius(3, BTreeMap::from([("sigma".into(), 1.0)]), true);
        assert_eq!(r.monotone_violations.len(), 1);
    }

    #[test]
    fn deterministic_json() {
        let mut r = ConstantReport::new("test", 7);
        r.push_radius(
            1,
            BTreeMap::from([("delta".into(), 0.5), ("count".into(), 3.0)]),
            true,
        );
        let a = r.to_json();
        let b = r.to_json();
        assert_eq!(a, b);
        assert!(a.contains("\"count\""));
    }
}
