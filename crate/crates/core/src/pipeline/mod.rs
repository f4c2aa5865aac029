//! End-to-end orchestration: skeleton files in, assessment report out.
//!
//! [`run_pipeline`] reads every recording under the configured input
//! directory and returns an [`AnalysisReport`]; [`write_bundle`] renders it as
//! text plus a set of CSV tables. The stages are also exposed separately so
//! each can be run and inspected on its own.

mod config;
mod plot;
mod render;
mod run;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::biomarker::{BiomarkerHistogram, ImportanceRanking};
use crate::ingest::{Action, ConventionName, Finding, IngestError};
use crate::stats::{Alternative, BlandAltmanSummary, CalibrationModel, CorrelationResult, PairedTestResult, Tails};

pub use config::PipelineConfig;
pub use plot::{
    bland_altman_svg, emit_plot_data, histogram_svg, write_bland_altman_csv, write_histogram_csv, PlotData,
};
pub use render::{
    bundle_file_names, calibration_csv, descriptors_csv, rankings_csv, render_text, ttest_csv, write_bundle,
};
pub use run::{
    analyze, analyze_recordings, assess, build_features, calibrate_sources, compute_descriptors, histograms,
    load_inputs, prepare_recording, rank_biomarkers, run_pipeline, LoadedInputs,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no recordings found in {}", .0.display())]
    NoRecordings(PathBuf),
    #[error("no patient has both pre and post sessions for source {0}")]
    NoPairedPatients(ConventionName),
    #[error("{file}: {source}")]
    Ingest { file: String, source: IngestError },
    #[error("{file}: {}", summarize(findings))]
    Validation { file: String, findings: Vec<Finding> },
    #[error("{context}: {message}")]
    Analysis { context: String, message: String },
}

fn summarize(findings: &[Finding]) -> String {
    let shown: Vec<String> = findings.iter().take(3).map(|f| f.to_string()).collect();
    let more = findings.len().saturating_sub(shown.len());
    if more > 0 {
        format!("{} (and {more} more)", shown.join("; "))
    } else {
        shown.join("; ")
    }
}

impl PipelineError {
    /// True for failures to read or write files, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            PipelineError::Io { .. }
                | PipelineError::Ingest {
                    source: IngestError::Io { .. },
                    ..
                }
        )
    }

    pub(crate) fn analysis(context: impl Into<String>, err: impl fmt::Display) -> Self {
        PipelineError::Analysis {
            context: context.into(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// The two per-biomarker summaries that are compared across sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Descriptor {
    /// Angular impulse, reported as the spatial analysis.
    Impulse,
    /// Smoothness, reported as the temporal analysis.
    Smoothness,
}

impl Descriptor {
    pub const ALL: [Descriptor; 2] = [Descriptor::Impulse, Descriptor::Smoothness];

    pub fn as_str(self) -> &'static str {
        match self {
            Descriptor::Impulse => "impulse",
            Descriptor::Smoothness => "smoothness",
        }
    }

    pub fn analysis_label(self) -> &'static str {
        match self {
            Descriptor::Impulse => "spatial",
            Descriptor::Smoothness => "temporal",
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    /// Input file names relative to the input directory, sorted.
    pub input_files: Vec<String>,
    pub assess_source: ConventionName,
    pub sources: Vec<ConventionName>,
    /// Patients with both sessions for the assessed source.
    pub patients: Vec<String>,
    /// Patients left out of the paired analysis for lack of a session.
    pub unpaired_patients: Vec<String>,
    pub tails: Tails,
    pub alternative: Alternative,
    pub alpha: f64,
    pub ba_multiplier: f64,
}

/// Per-patient descriptor values for one biomarker, in `patients` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorValues {
    pub action: Action,
    pub biomarker: String,
    pub descriptor: Descriptor,
    pub patients: Vec<String>,
    pub pre: Vec<f64>,
    pub post: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub action: Action,
    pub biomarker: String,
    pub descriptor: Descriptor,
    pub result: Option<PairedTestResult>,
    pub error: Option<String>,
}

impl TestEntry {
    pub fn significant(&self) -> bool {
        self.result.is_some_and(|r| r.significant)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanEntry {
    pub action: Action,
    pub biomarker: String,
    pub descriptor: Descriptor,
    pub summary: Option<BlandAltmanSummary>,
    pub error: Option<String>,
}

impl BlandAltmanEntry {
    pub fn file_name(&self) -> String {
        format!(
            "bland_altman_{}_{}_{}.csv",
            self.biomarker, self.descriptor, self.action
        )
    }
}

/// Regression of one source's windowed biomarker values onto another's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationEntry {
    pub biomarker: String,
    pub from: ConventionName,
    pub to: ConventionName,
    pub model: Option<CalibrationModel>,
    pub correlation: Option<CorrelationResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub provenance: Provenance,
    /// Pooled-action ranking per patient and session, patients sorted by id.
    pub rankings: Vec<ImportanceRanking>,
    /// One per action, in action order.
    pub histograms: Vec<BiomarkerHistogram>,
    /// Empty unless two sources were supplied.
    pub calibrations: Vec<CalibrationEntry>,
    pub descriptors: Vec<DescriptorValues>,
    pub tests: Vec<TestEntry>,
    pub bland_altman: Vec<BlandAltmanEntry>,
}

impl AnalysisReport {
    pub fn tests_for(&self, action: Action) -> impl Iterator<Item = &TestEntry> {
        self.tests.iter().filter(move |t| t.action == action)
    }

    pub fn significant(&self) -> Vec<&TestEntry> {
        self.tests.iter().filter(|t| t.significant()).collect()
    }

    pub fn histogram(&self, action: Action) -> Option<&BiomarkerHistogram> {
        self.histograms.iter().find(|h| h.action == action)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
