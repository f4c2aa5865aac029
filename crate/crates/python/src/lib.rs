use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use kinemarker_core::biomarker::{self, Scope};
use kinemarker_core::ingest::ConventionName;
use kinemarker_core::kinematics;
use kinemarker_core::pipeline::{self, PipelineError};
use kinemarker_core::stats::{self, Alternative, PairedTestOptions, Tails};
use kinemarker_core::synth::{self, CohortSpec, PlantedEffect};
use kinemarker_core::temporal::{self, ImpulseMode, ScalarSeries};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pipeline_error(e: PipelineError) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn series(values: Vec<f64>, dt: f64) -> PyResult<ScalarSeries> {
    ScalarSeries::new(values, dt).map_err(value_error)
}

/// Angle at `knee` between the segments to `hip` and `ankle`, in degrees.
#[pyfunction]
fn joint_angle(hip: [f64; 3], knee: [f64; 3], ankle: [f64; 3]) -> PyResult<f64> {
    kinematics::joint_angle(hip, knee, ankle).map_err(value_error)
}

/// Integral of the squared second derivative.
#[pyfunction]
fn smoothness(values: Vec<f64>, dt: f64) -> PyResult<f64> {
    temporal::smoothness(&series(values, dt)?).map_err(value_error)
}

/// Area under the min-subtracted curve. `mode` is "curve" or "acceleration".
#[pyfunction]
#[pyo3(signature = (values, dt, mode = "curve"))]
fn angular_impulse(values: Vec<f64>, dt: f64, mode: &str) -> PyResult<f64> {
    let mode = match mode {
        "curve" => ImpulseMode::Curve,
        "acceleration" => ImpulseMode::Acceleration,
        other => return Err(value_error(format!("unknown impulse mode {other:?}"))),
    };
    temporal::angular_impulse_with(&series(values, dt)?, mode).map_err(value_error)
}

#[pyfunction]
fn t_cdf(t: f64, df: f64) -> f64 {
    stats::t_cdf(t, df)
}

/// One-tailed critical value: `P(T > c) = alpha`.
#[pyfunction]
fn t_critical(alpha: f64, df: f64) -> f64 {
    stats::t_critical(alpha, df)
}

/// Pearson correlation and its two-tailed p-value.
#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = stats::pearson(&x, &y).map_err(value_error)?;
    Ok((r.r, r.p))
}

#[pyclass(frozen, get_all, module = "kinemarker")]
struct PairedTest {
    n: usize,
    df: usize,
    mean_diff: f64,
    sd_diff: f64,
    t: f64,
    p: f64,
    p_one: f64,
    p_two: f64,
    critical: f64,
    significant: bool,
}

#[pymethods]
impl PairedTest {
    fn __repr__(&self) -> String {
        format!(
            "PairedTest(t={:.4}, p_one={:.4}, p_two={:.4}, significant={})",
            self.t,
            self.p_one,
            self.p_two,
            if self.significant { "True" } else { "False" }
        )
    }
}

/// Paired t-test on `post - pre`.
#[pyfunction]
#[pyo3(signature = (pre, post, tails = "one", alternative = "greater", alpha = 0.05))]
fn paired_t_test(pre: Vec<f64>, post: Vec<f64>, tails: &str, alternative: &str, alpha: f64) -> PyResult<PairedTest> {
    let tails: Tails = tails.parse().map_err(value_error)?;
    let alternative = match alternative {
        "greater" => Alternative::Greater,
        "less" => Alternative::Less,
        other => {
            return Err(value_error(format!(
                "alternative must be \"greater\" or \"less\", got {other:?}"
            )))
        }
    };
    let r = stats::paired_t_test_with(
        &pre,
        &post,
        &PairedTestOptions {
            tails,
            alternative,
            alpha,
        },
    )
    .map_err(value_error)?;
    Ok(PairedTest {
        n: r.n,
        df: r.df,
        mean_diff: r.mean_diff,
        sd_diff: r.sd_diff,
        t: r.t,
        p: r.p,
        p_one: r.p_one,
        p_two: r.p_two,
        critical: r.critical,
        significant: r.significant,
    })
}

#[pyclass(frozen, get_all, module = "kinemarker")]
struct BlandAltman {
    mean_diff: f64,
    sd_diff: f64,
    lower_limit: f64,
    upper_limit: f64,
    coverage: f64,
    pair_means: Vec<f64>,
    differences: Vec<f64>,
}

#[pyfunction]
#[pyo3(signature = (pre, post, multiplier = 1.96))]
fn bland_altman(pre: Vec<f64>, post: Vec<f64>, multiplier: f64) -> PyResult<BlandAltman> {
    let s = stats::bland_altman_with(&pre, &post, multiplier).map_err(value_error)?;
    Ok(BlandAltman {
        mean_diff: s.mean_diff,
        sd_diff: s.sd_diff,
        lower_limit: s.lower_limit,
        upper_limit: s.upper_limit,
        coverage: s.coverage,
        pair_means: s.pair_means,
        differences: s.differences,
    })
}

#[pyclass(frozen, get_all, module = "kinemarker")]
struct Calibration {
    slope: f64,
    intercept: f64,
    rmse_before: f64,
    rmse_after: f64,
}

#[pymethods]
impl Calibration {
    fn apply(&self, x: Vec<f64>) -> Vec<f64> {
        x.iter().map(|v| self.slope * v + self.intercept).collect()
    }
}

/// Least squares fit of `y` on `x`.
#[pyfunction]
fn fit_calibration(x: Vec<f64>, y: Vec<f64>) -> PyResult<Calibration> {
    let m = stats::fit_calibration(&x, &y).map_err(value_error)?;
    Ok(Calibration {
        slope: m.slope,
        intercept: m.intercept,
        rmse_before: m.rmse_before,
        rmse_after: m.rmse_after,
    })
}

/// Two-component PCA of a standardized feature matrix.
#[pyclass(frozen, module = "kinemarker")]
struct Pca {
    model: biomarker::PcaModel,
}

#[pymethods]
impl Pca {
    #[new]
    #[pyo3(signature = (rows, columns = None))]
    fn new(rows: Vec<Vec<f64>>, columns: Option<Vec<String>>) -> PyResult<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let columns = columns.unwrap_or_else(|| (0..p).map(|j| format!("f{j}")).collect());
        let scope = Scope {
            patient_id: String::new(),
            session: None,
            action: None,
        };
        let model = biomarker::pca_fit_rows(&columns, &rows, scope).map_err(value_error)?;
        Ok(Pca { model })
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.model.columns.clone()
    }

    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        self.model.components.to_vec()
    }

    #[getter]
    fn explained_variance_ratio(&self) -> Vec<f64> {
        self.model.explained_variance_ratio.to_vec()
    }

    fn transform(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        if row.len() != self.model.columns.len() {
            return Err(value_error(format!(
                "row has {} values, model has {} columns",
                row.len(),
                self.model.columns.len()
            )));
        }
        Ok(self.model.transform(&row).to_vec())
    }

    /// `(feature, score)` pairs, strongest first.
    fn feature_importance(&self) -> Vec<(String, f64)> {
        biomarker::feature_importance(&self.model)
            .entries
            .into_iter()
            .map(|e| (e.feature, e.score))
            .collect()
    }
}

/// Writes a synthetic cohort as JSON Lines files and returns their paths.
#[pyfunction]
#[pyo3(signature = (out_dir, patients = 20, seed = 0, planted_effect = true, sources = None))]
fn write_cohort(
    out_dir: PathBuf,
    patients: usize,
    seed: u64,
    planted_effect: bool,
    sources: Option<Vec<String>>,
) -> PyResult<Vec<String>> {
    let sources = match sources {
        Some(names) => names
            .iter()
            .map(|s| s.parse::<ConventionName>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_error)?,
        None => vec![ConventionName::MeshModel24],
    };
    if patients == 0 || sources.is_empty() {
        return Err(value_error("patients and sources must be non-empty"));
    }
    let spec = CohortSpec {
        patients,
        seed,
        sources,
        effect: if planted_effect {
            PlantedEffect::SlowerSquatKnee
        } else {
            PlantedEffect::None
        },
        ..CohortSpec::default()
    };
    let paths = synth::write_cohort(&spec, &out_dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(paths.iter().map(|p| p.display().to_string()).collect())
}

/// Runs the full analysis on a directory of recordings and returns the report
/// as JSON. `config` is an optional JSON document of configuration overrides;
/// when `output_dir` is given the report bundle is written there too.
#[pyfunction]
#[pyo3(signature = (input_dir, config = None, output_dir = None))]
fn run_pipeline(
    py: Python<'_>,
    input_dir: PathBuf,
    config: Option<&str>,
    output_dir: Option<PathBuf>,
) -> PyResult<String> {
    let mut cfg = match config {
        Some(text) => pipeline::PipelineConfig::from_json(text).map_err(pipeline_error)?,
        None => pipeline::PipelineConfig::default(),
    };
    cfg.input_dir = input_dir;
    if let Some(dir) = &output_dir {
        cfg.output_dir = dir.clone();
    }
    py.detach(|| {
        let report = pipeline::run_pipeline(&cfg)?;
        if output_dir.is_some() {
            pipeline::write_bundle(&report, &cfg.output_dir, cfg.svg)?;
        }
        Ok(report.to_json())
    })
    .map_err(pipeline_error)
}

#[pymodule]
pub fn kinemarker(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(joint_angle, m)?)?;
    m.add_function(wrap_pyfunction!(smoothness, m)?)?;
    m.add_function(wrap_pyfunction!(angular_impulse, m)?)?;
    m.add_function(wrap_pyfunction!(t_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(t_critical, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(bland_altman, m)?)?;
    m.add_function(wrap_pyfunction!(fit_calibration, m)?)?;
    m.add_function(wrap_pyfunction!(write_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<Pca>()?;
    m.add_class::<PairedTest>()?;
    m.add_class::<BlandAltman>()?;
    m.add_class::<Calibration>()?;
    Ok(())
}
