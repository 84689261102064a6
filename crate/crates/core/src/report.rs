//! Named-value reports with optional armed assertions.
//!
//! Every measurement lands in an [`EstimateReport`] entry; an entry with a
//! tolerance attached is "armed" and contributes to the suite-level pass
//! flag.  Entries live in a `BTreeMap` so serialization is deterministic:
//! identical runs produce byte-identical JSON.

use crate::error::Result;
use crate::grid::GridMeta;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masked_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub label: String,
    pub grid: GridMeta,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub entries: BTreeMap<String, ReportEntry>,
    /// Conjunction of all armed assertions.
    pub pass: bool,
}

impl EstimateReport {
    pub fn new(label: impl Into<String>, grid: GridMeta) -> EstimateReport {
        EstimateReport {
            label: label.into(),
            grid,
            seed: None,
            entries: BTreeMap::new(),
            pass: true,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> EstimateReport {
        self.seed = Some(seed);
        self
    }

    /// Record an unarmed value.
    pub fn put(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.entries.entry(name.into()).or_insert(ReportEntry {
            value,
            tolerance: None,
            pass: None,
            masked_fraction: None,
        });
        self
    }

    pub fn put_masked(
        &mut self,
        name: impl Into<String>,
        value: f64,
        masked_fraction: f64,
    ) -> &mut Self {
        self.entries.entry(name.into()).or_insert(ReportEntry {
            value,
            tolerance: None,
            pass: None,
            masked_fraction: Some(masked_fraction),
        });
        self
    }

    /// Record an armed assertion `value <= tolerance`.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        let pass = value <= tolerance;
        self.pass &= pass;
        self.entries.entry(name.into()).or_insert(ReportEntry {
            value,
            tolerance: Some(tolerance),
            pass: Some(pass),
            masked_fraction: None,
        });
        self
    }

    /// Arm an already-recorded entry against a tolerance.
    pub fn arm(&mut self, name: &str, tolerance: f64) -> &mut Self {
        if let Some(e) = self.entries.get_mut(name) {
            let pass = e.value <= tolerance;
            e.tolerance = Some(tolerance);
            e.pass = Some(pass);
            self.pass &= pass;
        }
        self
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.entries.get(name).map(|e| e.value)
    }

    /// Fold another report in under a key prefix.
    pub fn absorb(&mut self, prefix: &str, other: &EstimateReport) -> &mut Self {
        for (k, v) in &other.entries {
            let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if let Some(p) = v.pass {
                self.pass &= p;
            }
            self.entries.insert(key, v.clone());
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(s: &str) -> serde_json::Result<EstimateReport> {
        serde_json::from_str(s)
    }

    /// name,value,tolerance,pass,masked_fraction rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "name,value,tolerance,pass,masked_fraction")?;
        for (k, e) in &self.entries {
            let tol = e.tolerance.map(|t| format!("{t:e}")).unwrap_or_default();
            let pass = e.pass.map(|p| p.to_string()).unwrap_or_default();
            let mf = e.masked_fraction.map(|m| format!("{m}")).unwrap_or_default();
            writeln!(w, "{k},{:e},{tol},{pass},{mf}", e.value)?;
        }
        Ok(())
    }
}

/// One inequality instrument: both sides, their ratio, and the fraction of
/// nodes the chart mask admitted into the integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub masked_fraction: f64,
}

impl RatioEntry {
    /// Ratio with the zero-numerator convention: a vanishing left side
    /// yields 0 even when the right side also vanishes.
    pub fn new(lhs: f64, rhs: f64, masked_fraction: f64) -> RatioEntry {
        let ratio = if lhs == 0.0 || rhs <= 0.0 { 0.0 } else { lhs / rhs };
        RatioEntry { lhs, rhs, ratio, masked_fraction }
    }
}

/// Named set of theorem-level inequality ratios.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InequalityRatioSet {
    pub entries: BTreeMap<String, RatioEntry>,
}

impl InequalityRatioSet {
    pub fn insert(&mut self, id: &str, entry: RatioEntry) {
        self.entries.insert(id.to_string(), entry);
    }

    pub fn ratio(&self, id: &str) -> Option<f64> {
        self.entries.get(id).map(|e| e.ratio)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> GridMeta {
        GridMeta { dim: 2, sizes: vec![8, 8], lengths: vec![1.0, 1.0], parities: vec![0, 0] }
    }

    #[test]
    fn armed_assertions_drive_the_pass_flag() {
        let mut r = EstimateReport::new("t", meta());
        r.put("a", 5.0);
        r.check_le("b", 1e-3, 1e-2);
        assert!(r.pass);
        r.check_le("c", 2.0, 1.0);
        assert!(!r.pass);
        assert_eq!(r.entries["c"].pass, Some(false));
        assert_eq!(r.entries["a"].pass, None);
    }

    #[test]
    fn json_round_trip_is_lossless_and_deterministic() {
        let mut r = EstimateReport::new("t", meta()).with_seed(7);
        r.put("pi_ish", 0.1 + 0.2);
        r.check_le("tiny", 1.0 / 3.0, 0.5);
        r.put_masked("m", f64::MIN_POSITIVE, 0.25);
        let s1 = r.to_json();
        let back = EstimateReport::from_json(&s1).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json(), s1);
    }

    #[test]
    fn ratio_convention_on_degenerate_input() {
        let e = RatioEntry::new(0.0, 0.0, 1.0);
        assert_eq!(e.ratio, 0.0);
        let e = RatioEntry::new(2.0, 4.0, 1.0);
        assert_eq!(e.ratio, 0.5);
    }
}
