use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F>(body: F)
where
    F: for<'py> FnOnce(Python<'py>, &Bound<'py, PyDict>) -> PyResult<()>,
{
    Python::attach(|py| {
        let m = PyModule::new(py, "kinemarker").unwrap();
        kinemarker::kinemarker(&m).unwrap();
        let globals = PyDict::new(py);
        globals.set_item("km", m).unwrap();
        body(py, &globals).unwrap_or_else(|e| panic!("{e}"));
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) -> PyResult<()> {
    let code = std::ffi::CString::new(code).unwrap();
    py.run(&code, Some(globals), None)
}

#[test]
fn numeric_functions() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
assert abs(km.joint_angle([1, 0, 0], [0, 0, 0], [0, 1, 0]) - 90.0) < 1e-12
assert km.angular_impulse([3.0, 1.0, 2.0], 0.5) == 0.75
assert km.smoothness([0.0, 1.0, 2.0, 3.0], 0.1) == 0.0
assert abs(km.t_critical(0.05, 19) - 1.729) < 1e-3
assert abs(2 * (1 - km.t_cdf(2.324, 19)) - 0.031) < 2e-3
ba = km.bland_altman([0, 0, 0], [1, 2, 3])
assert abs(ba.lower_limit - 0.04) < 1e-12 and abs(ba.upper_limit - 3.96) < 1e-12
cal = km.fit_calibration([0, 1, 2, 3], [25, 27, 29, 31])
assert abs(cal.slope - 2) < 1e-12 and abs(cal.intercept - 25) < 1e-12
assert cal.apply([4]) == [33.0]
r, p = km.pearson([1, 2, 3, 4], [2, 4, 6, 8.5])
assert r > 0.99 and 0 <= p < 0.05
"#,
        )
    });
}

#[test]
fn paired_test_and_errors() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
t = km.paired_t_test([1, 2, 3, 4], [2, 3.5, 3.9, 5.2])
assert t.significant and t.df == 3 and t.t > 0
less = km.paired_t_test([1, 2, 3, 4], [2, 3.5, 3.9, 5.2], alternative="less")
assert not less.significant
for bad in (lambda: km.joint_angle([0, 0, 0], [0, 0, 0], [1, 0, 0]),
            lambda: km.paired_t_test([1, 2], [2, 3]),
            lambda: km.paired_t_test([1, 2, 3], [2, 3, 5], tails="three"),
            lambda: km.smoothness([1.0, 2.0], 0.1)):
    try:
        bad()
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")
"#,
        )
    });
}

#[test]
fn pca_ranks_dominant_columns() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
rows = [[i, 2 * i + (i % 2) * 0.1, 5.0 + (i % 3) * 0.01] for i in range(10)]
pca = km.Pca(rows, ["a", "b", "c"])
ratio = pca.explained_variance_ratio
assert ratio[0] > 0.6 and ratio[0] >= ratio[1] and sum(ratio) <= 1 + 1e-12
ranked = [name for name, _ in pca.feature_importance()]
assert sorted(ranked[:2]) == ["a", "b"] and ranked[2] == "c"
assert len(pca.transform(rows[0])) == 2
"#,
        )
    });
}

#[test]
fn pipeline_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    with_module(|py, g| {
        g.set_item("data", data.to_str().unwrap())?;
        g.set_item("out", out.to_str().unwrap())?;
        run(
            py,
            g,
            r#"
import json
files = km.write_cohort(data, patients=6, seed=3)
assert len(files) == 6 * 2 * 2
report = json.loads(km.run_pipeline(data, output_dir=out))
flagged = {(t["action"], t["biomarker"], t["descriptor"]) for t in report["tests"]
           if t["result"] and t["result"]["significant"]}
assert all(a == "squat" and "knee_flexion" in b and d == "smoothness" for a, b, d in flagged), flagged
assert len(report["provenance"]["patients"]) == 6
try:
    km.run_pipeline(data + "/missing")
except OSError:
    pass
else:
    raise AssertionError("expected OSError")
"#,
        )
    });
    assert!(out.join("report.json").exists());
    assert!(out.join("ttest_squat.csv").exists());
}
