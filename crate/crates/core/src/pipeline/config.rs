use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::biomarker::DEFAULT_TOP_K;
use crate::ingest::{ConventionName, Session, DEFAULT_DT, DEFAULT_GAP_TOLERANCE};
use crate::kinematics::{AngleDefinition, WindowSpec};
use crate::stats::{Alternative, PairedTestOptions, Tails, DEFAULT_ALPHA, DEFAULT_BA_MULTIPLIER};
use crate::temporal::ImpulseMode;

use super::PipelineError;

/// Pipeline settings, read from a single JSON document. Every field is
/// optional; defaults are 30 Hz sampling, the six default angles, 15-frame
/// windows, top-5 features, a one-tailed test at 0.05 and 1.96 SD limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory holding the `*.jsonl` skeleton files. Relative paths are
    /// resolved against the directory of the config file.
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub dt: f64,
    pub gap_tolerance: f64,
    pub angles: Vec<AngleDefinition>,
    pub window: WindowSpec,
    pub impulse_mode: ImpulseMode,
    pub top_k: usize,
    /// Session whose rankings feed the per-action histograms.
    pub histogram_session: Session,
    pub tails: Tails,
    /// Expected direction of `post - pre` for one-tailed tests.
    pub alternative: Alternative,
    pub alpha: f64,
    pub ba_multiplier: f64,
    /// Source used for rankings and pre/post tests. Defaults to the mesh
    /// model when present, otherwise the only source found.
    pub assess_source: Option<ConventionName>,
    /// Also write SVG renderings next to the plot CSVs.
    pub svg: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_dir: PathBuf::from("input"),
            output_dir: PathBuf::from("out"),
            dt: DEFAULT_DT,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            angles: AngleDefinition::default_set(),
            window: WindowSpec::default(),
            impulse_mode: ImpulseMode::Curve,
            top_k: DEFAULT_TOP_K,
            histogram_session: Session::Pre,
            tails: Tails::One,
            alternative: Alternative::Less,
            alpha: DEFAULT_ALPHA,
            ba_multiplier: DEFAULT_BA_MULTIPLIER,
            assess_source: None,
            svg: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Reads and validates a config file, resolving relative directories
    /// against the file's location.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if config.input_dir.is_relative() {
            config.input_dir = base.join(&config.input_dir);
        }
        if config.output_dir.is_relative() {
            config.output_dir = base.join(&config.output_dir);
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.gap_tolerance.is_finite() && self.gap_tolerance > 0.0) {
            return bad(format!("gap_tolerance must be positive, got {}", self.gap_tolerance));
        }
        if self.angles.is_empty() {
            return bad("at least one angle definition is required".into());
        }
        for (i, a) in self.angles.iter().enumerate() {
            a.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
            if self.angles[..i].iter().any(|o| o.name == a.name) {
                return bad(format!("duplicate angle name {}", a.name));
            }
        }
        self.window
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.ba_multiplier.is_finite() && self.ba_multiplier > 0.0) {
            return bad(format!("ba_multiplier must be positive, got {}", self.ba_multiplier));
        }
        Ok(())
    }

    pub fn test_options(&self) -> PairedTestOptions {
        PairedTestOptions {
            tails: self.tails,
            alternative: self.alternative,
            alpha: self.alpha,
        }
    }

    /// SHA-256 of the canonical JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
