//! Movement biomarkers from 3D skeleton time series.
//!
//! The crate takes joint-position recordings exported by a depth-camera
//! skeleton tracker or a mesh-regression pose estimator and runs them through
//! the following stages:
//!
//! * [`ingest`]: parse JSON Lines skeleton files, map both skeletons onto one
//!   canonical joint set, validate and resample onto a uniform clock.
//! * [`kinematics`]: joint angles from the cosine rule and windowed angle
//!   statistics collected into an annotated [`FeatureMatrix`].
//! * [`temporal`]: angular impulse and smoothness descriptors of a series.
//! * [`biomarker`]: two-component PCA feature importance per patient and
//!   cross-patient top-k histograms.
//! * [`stats`]: Pearson correlation, least-squares calibration between pose
//!   sources, paired t-tests and Bland-Altman summaries.
//! * [`pipeline`]: configuration, end-to-end orchestration and report output.
//!
//! [`synth`] generates deterministic synthetic cohorts for testing the whole
//! chain.

// `!(x > 0.0)` style guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod biomarker;
pub mod ingest;
pub mod kinematics;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod temporal;

pub use biomarker::{BiomarkerHistogram, ImportanceRanking, PcaModel};
pub use ingest::{Action, CanonicalSeries, JointId, RawRecording, Session, SkeletonConvention};
pub use kinematics::{AngleDefinition, AngleSeries, FeatureMatrix, WindowSpec};
pub use pipeline::{AnalysisReport, PipelineConfig};
pub use stats::{BlandAltmanSummary, CalibrationModel, CorrelationResult, PairedTestResult};
pub use temporal::ScalarSeries;
