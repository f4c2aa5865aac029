use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ingest::Action;
use crate::stats::{Alternative, Tails};

use super::plot::{emit_plot_data, PlotData};
use crate::biomarker::ImportanceRanking;

use super::{AnalysisReport, CalibrationEntry, Descriptor, DescriptorValues, PipelineError, Result, TestEntry};

fn find<'a>(report: &'a AnalysisReport, action: Action, biomarker: &str, d: Descriptor) -> Option<&'a TestEntry> {
    report
        .tests
        .iter()
        .find(|t| t.action == action && t.biomarker == biomarker && t.descriptor == d)
}

fn biomarkers(report: &AnalysisReport, action: Action) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for t in report.tests_for(action) {
        if !out.contains(&t.biomarker.as_str()) {
            out.push(&t.biomarker);
        }
    }
    out
}

fn cell(entry: Option<&TestEntry>) -> String {
    match entry {
        Some(TestEntry { result: Some(r), .. }) if r.significant => format!("{:.3} **({:.3})**", r.t, r.p_two),
        Some(TestEntry { result: Some(r), .. }) => format!("{:.3} ({:.3})", r.t, r.p_two),
        Some(TestEntry { error: Some(e), .. }) => format!("n/a: {e}"),
        _ => "n/a".to_string(),
    }
}

fn rule(report: &AnalysisReport) -> String {
    let p = &report.provenance;
    let critical = report.tests.iter().find_map(|t| t.result.map(|r| r.critical));
    match p.tails {
        Tails::One => {
            let (cmp, sign) = match p.alternative {
                Alternative::Greater => (">", ""),
                Alternative::Less => ("<", "-"),
            };
            match critical {
                Some(c) => format!("one-tailed, t {cmp} {sign}{c:.3} (alpha {})", p.alpha),
                None => format!("one-tailed (alpha {})", p.alpha),
            }
        }
        Tails::Two => format!("two-tailed, p_two < {}", p.alpha),
    }
}

/// Plain-text report. Each action gets a grid of biomarkers against the
/// spatial (impulse) and temporal (smoothness) analyses with `t (p)` cells,
/// where p is two-tailed. Rows with a significant cell are starred and the
/// significant p-values are bolded.
pub fn render_text(report: &AnalysisReport) -> String {
    let p = &report.provenance;
    let mut s = String::new();
    let _ = writeln!(s, "# Assessment report\n");
    let _ = writeln!(s, "config hash: {}", p.config_hash);
    let _ = writeln!(s, "source: {}", p.assess_source);
    let _ = writeln!(s, "patients: {} ({})", p.patients.len(), p.patients.join(", "));
    if !p.unpaired_patients.is_empty() {
        let _ = writeln!(s, "excluded (missing a session): {}", p.unpaired_patients.join(", "));
    }
    let _ = writeln!(s, "input files: {}", p.input_files.len());
    let _ = writeln!(s, "significance: {}", rule(report));
    let _ = writeln!(s, "differences are post - pre\n");

    for action in Action::ALL {
        let names = biomarkers(report, action);
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(s, "## {action}\n");
        let _ = writeln!(
            s,
            "| Biomarker ({action}) | Spatial analysis: t (p two-tailed) | Temporal analysis: t (p two-tailed) |"
        );
        let _ = writeln!(s, "|---|---|---|");
        for name in &names {
            let spatial = find(report, action, name, Descriptor::Impulse);
            let temporal = find(report, action, name, Descriptor::Smoothness);
            let star = if spatial.is_some_and(TestEntry::significant) || temporal.is_some_and(TestEntry::significant) {
                " *"
            } else {
                ""
            };
            let _ = writeln!(s, "| {name}{star} | {} | {} |", cell(spatial), cell(temporal));
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "| Biomarker | Descriptor | n | df | mean diff | t | p one-tailed | p two-tailed | significant |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
        for t in report.tests_for(action) {
            match (&t.result, &t.error) {
                (Some(r), _) => {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} | {} | {:.6} | {:.3} | {:.4} | {:.4} | {} |",
                        t.biomarker,
                        t.descriptor,
                        r.n,
                        r.df,
                        r.mean_diff,
                        r.t,
                        r.p_one,
                        r.p_two,
                        if r.significant { "yes" } else { "no" }
                    );
                }
                (None, e) => {
                    let _ = writeln!(
                        s,
                        "| {} | {} | | | | | | | error: {} |",
                        t.biomarker,
                        t.descriptor,
                        e.as_deref().unwrap_or("unknown")
                    );
                }
            }
        }
        let _ = writeln!(s);
        if let Some(h) = report.histogram(action) {
            let _ = writeln!(
                s,
                "Most representative biomarkers ({action}, top features per patient):"
            );
            for (feature, count) in h.sorted() {
                let _ = writeln!(s, "  {feature}: {count}");
            }
            let _ = writeln!(s);
        }
    }

    if !report.calibrations.is_empty() {
        let _ = writeln!(s, "## calibration\n");
        let _ = writeln!(
            s,
            "| Biomarker | slope | intercept | rmse before | rmse after | r | p |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|");
        for c in &report.calibrations {
            match (&c.model, &c.correlation) {
                (Some(m), Some(r)) => {
                    let _ = writeln!(
                        s,
                        "| {} | {:.4} | {:.4} | {:.4} | {:.4} | {:.4} | {:.3e} |",
                        c.biomarker, m.slope, m.intercept, m.rmse_before, m.rmse_after, r.r, r.p
                    );
                }
                _ => {
                    let _ = writeln!(
                        s,
                        "| {} | error: {} | | | | | |",
                        c.biomarker,
                        c.error.as_deref().unwrap_or("")
                    );
                }
            }
        }
        let _ = writeln!(s);
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        w.write_record(&r).expect("write to memory");
    }
    w.into_inner().expect("flush to memory")
}

/// `biomarker,descriptor,t,p_one,p_two,significant,n,error` for one action.
pub fn ttest_csv(tests: &[TestEntry], action: Action) -> Vec<u8> {
    let rows = tests
        .iter()
        .filter(|t| t.action == action)
        .map(|t| {
            let r = t.result;
            vec![
                t.biomarker.clone(),
                t.descriptor.to_string(),
                opt(r.map(|r| r.t)),
                opt(r.map(|r| r.p_one)),
                opt(r.map(|r| r.p_two)),
                t.significant().to_string(),
                r.map(|r| r.n.to_string()).unwrap_or_default(),
                t.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(
        &[
            "biomarker",
            "descriptor",
            "t",
            "p_one",
            "p_two",
            "significant",
            "n",
            "error",
        ],
        rows,
    )
}

pub fn calibration_csv(calibrations: &[CalibrationEntry]) -> Vec<u8> {
    let rows = calibrations
        .iter()
        .map(|c| {
            let m = c.model;
            let r = c.correlation;
            vec![
                c.biomarker.clone(),
                c.from.to_string(),
                c.to.to_string(),
                opt(m.map(|m| m.slope)),
                opt(m.map(|m| m.intercept)),
                opt(m.map(|m| m.rmse_before)),
                opt(m.map(|m| m.rmse_after)),
                opt(r.map(|r| r.r)),
                opt(r.map(|r| r.p)),
                m.map(|m| m.n.to_string()).unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(
        &[
            "biomarker",
            "from",
            "to",
            "slope",
            "intercept",
            "rmse_before",
            "rmse_after",
            "r",
            "p",
            "n",
            "error",
        ],
        rows,
    )
}

/// One row per patient, session and rank.
pub fn rankings_csv(rankings: &[ImportanceRanking]) -> Vec<u8> {
    let mut rows = Vec::new();
    for r in rankings {
        let session = r.scope.session.map(|s| s.to_string()).unwrap_or_default();
        for (i, e) in r.entries.iter().enumerate() {
            rows.push(vec![
                r.scope.patient_id.clone(),
                session.clone(),
                (i + 1).to_string(),
                e.feature.clone(),
                e.score.to_string(),
            ]);
        }
    }
    csv_bytes(&["patient_id", "session", "rank", "feature", "score"], rows)
}

pub fn descriptors_csv(descriptors: &[DescriptorValues]) -> Vec<u8> {
    let mut rows = Vec::new();
    for d in descriptors {
        for (i, patient) in d.patients.iter().enumerate() {
            rows.push(vec![
                d.action.to_string(),
                d.biomarker.clone(),
                d.descriptor.to_string(),
                patient.clone(),
                opt(d.pre.get(i).copied()),
                opt(d.post.get(i).copied()),
                d.error.clone().unwrap_or_default(),
            ]);
        }
    }
    csv_bytes(
        &[
            "action",
            "biomarker",
            "descriptor",
            "patient_id",
            "pre",
            "post",
            "error",
        ],
        rows,
    )
}

/// Names of every file [`write_bundle`] writes for this report, without SVGs.
pub fn bundle_file_names(report: &AnalysisReport) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for action in Action::ALL {
        names.push(format!("ttest_{action}.csv"));
        names.push(format!("histogram_{action}.csv"));
    }
    names.extend(
        report
            .bland_altman
            .iter()
            .filter(|b| b.summary.is_some())
            .map(|b| b.file_name()),
    );
    names.extend(
        [
            "calibration.csv",
            "rankings.csv",
            "descriptors.csv",
            "report.json",
            "report.txt",
        ]
        .map(String::from),
    );
    names
}

fn write(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Writes the text report, the JSON report and the CSV bundle into `dir`,
/// creating it if needed. Tables with no rows still get a header line.
pub fn write_bundle(report: &AnalysisReport, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for action in Action::ALL {
        write(
            dir,
            &format!("ttest_{action}.csv"),
            &ttest_csv(&report.tests, action),
            &mut written,
        )?;
        match report.histogram(action) {
            Some(h) => written.extend(emit_plot_data(
                PlotData::Histogram(h),
                dir,
                &format!("histogram_{action}"),
                svg,
            )?),
            None => write(
                dir,
                &format!("histogram_{action}.csv"),
                b"feature,count\n",
                &mut written,
            )?,
        }
    }
    for b in &report.bland_altman {
        if let Some(s) = &b.summary {
            let name = b.file_name();
            let stem = name.trim_end_matches(".csv");
            written.extend(emit_plot_data(PlotData::BlandAltman(s), dir, stem, svg)?);
        }
    }
    write(
        dir,
        "calibration.csv",
        &calibration_csv(&report.calibrations),
        &mut written,
    )?;
    write(dir, "rankings.csv", &rankings_csv(&report.rankings), &mut written)?;
    write(
        dir,
        "descriptors.csv",
        &descriptors_csv(&report.descriptors),
        &mut written,
    )?;
    write(dir, "report.json", report.to_json().as_bytes(), &mut written)?;
    write(dir, "report.txt", render_text(report).as_bytes(), &mut written)?;
    Ok(written)
}
