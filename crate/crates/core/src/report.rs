//! `report.json`: the record written by every pipeline command.
//!
//! Floats are rounded to four decimals on the way out so that reruns diff
//! cleanly. Reading a report back through [`parse_report`] doubles as schema
//! validation: unknown top-level fields, a wrong `schema` number, or missing
//! required fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::advisor::AdvisorReport;
use crate::error::{invalid, Result};
use crate::geometry::{GaussianFit, MatchReport, StarGeometry};
use crate::imageio::atomic_write;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub network: Option<u64>,
    pub images: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErfSummary {
    pub height: usize,
    pub width: usize,
    /// Unknown when the map was loaded from a dump.
    pub n_images: Option<usize>,
    pub center: (usize, usize),
    pub max_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionSettings {
    pub window: usize,
    pub threshold_frac: f64,
    pub smoothing_sigma: f64,
    pub match_radius: f64,
    pub n_peaks: usize,
    pub taps_in_frame: usize,
    pub min_matched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema: u32,
    pub command: Vec<String>,
    pub network_digest: Option<String>,
    /// Every artifact written or read by the run.
    pub files: Vec<PathBuf>,
    pub seeds: Seeds,
    pub erf: Option<ErfSummary>,
    pub star: Option<StarGeometry>,
    pub detection: Option<DetectionSettings>,
    #[serde(rename = "match")]
    pub star_match: Option<MatchReport>,
    pub gaussian_fit: Option<GaussianFit>,
    pub advisor: Option<AdvisorReport>,
    pub wall_clock_seconds: f64,
}

impl RunReport {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            command,
            network_digest: None,
            files: Vec::new(),
            seeds: Seeds::default(),
            erf: None,
            star: None,
            detection: None,
            star_match: None,
            gaussian_fit: None,
            advisor: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        round_floats(&mut v);
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_json()?.as_bytes())
    }

    /// Paths listed in `files` that do not exist.
    pub fn missing_files(&self) -> Vec<PathBuf> {
        self.files.iter().filter(|p| !p.exists()).cloned().collect()
    }

    /// Copy with wall-clock time zeroed, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        Self { wall_clock_seconds: 0.0, ..self.clone() }
    }
}

/// Round every non-integer number to four decimals.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            let r = (x * 1e4).round() / 1e4;
            // -0.0 would print as "-0.0"
            let r = if r == 0.0 { 0.0 } else { r };
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn parse_report(text: &str) -> Result<RunReport> {
    let report: RunReport = serde_json::from_str(text)?;
    if report.schema != SCHEMA_VERSION {
        return Err(invalid(format!("unsupported report schema {}, expected {SCHEMA_VERSION}", report.schema)));
    }
    if !(report.wall_clock_seconds >= 0.0) {
        return Err(invalid("wall_clock_seconds must be nonnegative"));
    }
    Ok(report)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    parse_report(&std::fs::read_to_string(path)?)
}
