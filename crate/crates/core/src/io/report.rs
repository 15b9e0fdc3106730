//! Evaluation report file (JSON) and score-curve dumps.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::{check_version, to_json_text, write_atomic, FORMAT_VERSION};
use crate::{Error, EvaluationReport, Real, Result};

const FORMAT_NAME: &str = "beltloc-report";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub format_version: u32,
    pub manifest: String,
    pub sweeps: Vec<EvaluationReport>,
}

impl ReportFile {
    pub fn new(manifest: String, sweeps: Vec<EvaluationReport>) -> Self {
        ReportFile {
            format: FORMAT_NAME.into(),
            format_version: FORMAT_VERSION,
            manifest,
            sweeps,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Format {
            path: String::new(),
            message: e.to_string(),
        })?;
        Ok(to_json_text(&value))
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let file: ReportFile = serde_json::from_str(text).map_err(|e| Error::Format {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        if file.format != FORMAT_NAME {
            return Err(Error::Format {
                path: origin.to_string(),
                message: format!("not a {FORMAT_NAME} file"),
            });
        }
        check_version(file.format_version)?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

/// Tab-separated `angle_deg<TAB>score`, one row per degree.
pub fn curve_to_tsv<T: Real>(curve: &[T]) -> String {
    let mut out = String::from("angle_deg\tscore\n");
    for (angle, score) in curve.iter().enumerate() {
        let _ = writeln!(out, "{angle}\t{}", score.as_f64());
    }
    out
}
