//! Report rows and their CSV/JSON serialization.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::montecarlo::{BoundReport, Verdict};

/// One output row. Absent values are empty in CSV and `null` in JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub quantity: String,
    pub analytic: Option<f64>,
    pub estimate: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub z: Option<f64>,
    pub verdict: Option<Verdict>,
}

impl ReportRow {
    pub fn analytic(quantity: impl Into<String>, value: f64) -> Self {
        Self {
            quantity: quantity.into(),
            analytic: Some(value),
            estimate: None,
            se: None,
            ci_low: None,
            ci_high: None,
            z: None,
            verdict: None,
        }
    }

    pub fn observed(quantity: impl Into<String>, value: f64) -> Self {
        Self {
            analytic: None,
            estimate: Some(value),
            ..Self::analytic(quantity, 0.0)
        }
    }

    /// A row whose computation failed with a domain error.
    pub fn failed(quantity: impl Into<String>, message: &str) -> Self {
        Self {
            analytic: None,
            ..Self::analytic(format!("{} (domain error: {message})", quantity.into()), 0.0)
        }
    }
}

impl From<&BoundReport> for ReportRow {
    fn from(r: &BoundReport) -> Self {
        Self {
            quantity: r.quantity.clone(),
            analytic: r.analytic,
            estimate: Some(r.estimate.mean),
            se: Some(r.estimate.std_error),
            ci_low: Some(r.estimate.ci_low),
            ci_high: Some(r.estimate.ci_high),
            z: r.z_score,
            verdict: Some(r.verdict),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub rows: Vec<ReportRow>,
    /// Command-specific extras (fit coefficients, optimiser output). JSON only.
    pub details: Value,
}

impl Report {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        if self.rows.is_empty() {
            out.write_record(["quantity", "analytic", "estimate", "se", "ci_low", "ci_high", "z", "verdict"])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| crate::Error::Io(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn any_violated(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Some(Verdict::BoundViolated))
    }
}
