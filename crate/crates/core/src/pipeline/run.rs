use std::collections::{BTreeMap, BTreeSet};
use std::fs;

use rayon::prelude::*;

use crate::biomarker::{
    aggregate_histogram, feature_importance, pca_fit, top_k_features, BiomarkerHistogram, ImportanceRanking,
};
use crate::ingest::{
    map_to_canonical, parse_recording_auto, resample_uniform, validate_series, Action, CanonicalSeries, ConventionName,
    RawRecording, Session, SkeletonConvention,
};
use crate::kinematics::{assemble_feature_matrix, FeatureMatrix};
use crate::stats::{bland_altman_with, fit_calibration, paired_t_test_with, pearson};
use crate::temporal::{angular_impulse_with, smoothness, ScalarSeries};

use super::{
    AnalysisReport, BlandAltmanEntry, CalibrationEntry, Descriptor, DescriptorValues, PipelineConfig, PipelineError,
    Provenance, Result, TestEntry,
};

#[derive(Debug, Clone)]
pub struct LoadedInputs {
    /// File names relative to the input directory, sorted.
    pub files: Vec<String>,
    /// One resampled series per file, in file order.
    pub series: Vec<CanonicalSeries>,
}

/// Maps a source recording onto canonical joints, validates it and resamples
/// it onto the configured grid. `file` labels any error.
pub fn prepare_recording(rec: &RawRecording, config: &PipelineConfig, file: &str) -> Result<CanonicalSeries> {
    let ingest = |source| PipelineError::Ingest {
        file: file.to_string(),
        source,
    };
    let convention = SkeletonConvention::for_name(rec.source);
    let canonical = map_to_canonical(rec, &convention).map_err(ingest)?;
    let findings = validate_series(&canonical, config.gap_tolerance);
    if !findings.is_empty() {
        return Err(PipelineError::Validation {
            file: file.to_string(),
            findings,
        });
    }
    resample_uniform(&canonical, config.dt).map_err(ingest)
}

/// Reads every `*.jsonl` file in the input directory.
pub fn load_inputs(config: &PipelineConfig) -> Result<LoadedInputs> {
    let dir = &config.input_dir;
    let io = |source| PipelineError::Io {
        path: dir.clone(),
        source,
    };
    let mut files: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "jsonl") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                files.push(name.to_string());
            }
        }
    }
    if files.is_empty() {
        return Err(PipelineError::NoRecordings(dir.clone()));
    }
    files.sort();
    let series = files
        .par_iter()
        .map(|name| {
            let rec = parse_recording_auto(&dir.join(name)).map_err(|source| PipelineError::Ingest {
                file: name.clone(),
                source,
            })?;
            prepare_recording(&rec, config, name)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedInputs { files, series })
}

type GroupKey = (String, Session, ConventionName);

/// One feature matrix per (patient, session, source), sorted by that key.
/// Within a matrix, recordings appear in action order, then input order.
pub fn build_features(series: &[CanonicalSeries], config: &PipelineConfig) -> Result<Vec<FeatureMatrix>> {
    let mut groups: BTreeMap<GroupKey, Vec<&CanonicalSeries>> = BTreeMap::new();
    for s in series {
        groups
            .entry((s.patient_id.clone(), s.session, s.source))
            .or_default()
            .push(s);
    }
    let groups: Vec<(GroupKey, Vec<&CanonicalSeries>)> = groups.into_iter().collect();
    groups
        .par_iter()
        .map(|((patient, session, source), members)| {
            let mut ordered: Vec<CanonicalSeries> = members.iter().map(|s| (*s).clone()).collect();
            ordered.sort_by_key(|s| s.action);
            assemble_feature_matrix(&ordered, &config.angles, &config.window)
                .map_err(|e| PipelineError::analysis(format!("patient {patient} {session} {source}"), e))
        })
        .collect()
}

fn choose_source(features: &[FeatureMatrix], config: &PipelineConfig) -> Result<(ConventionName, Vec<ConventionName>)> {
    let sources: Vec<ConventionName> = features
        .iter()
        .map(|m| m.source)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let chosen = match config.assess_source {
        Some(s) if sources.contains(&s) => s,
        Some(s) => {
            return Err(PipelineError::Config(format!("assess_source {s} has no recordings")));
        }
        None if sources.contains(&ConventionName::MeshModel24) => ConventionName::MeshModel24,
        None => *sources
            .first()
            .ok_or(PipelineError::NoRecordings(config.input_dir.clone()))?,
    };
    Ok((chosen, sources))
}

fn lookup<'a>(
    features: &'a [FeatureMatrix],
    patient: &str,
    session: Session,
    source: ConventionName,
) -> Option<&'a FeatureMatrix> {
    features
        .iter()
        .find(|m| m.patient_id == patient && m.session == session && m.source == source)
}

/// Pooled-action importance ranking for every matrix of `source`.
pub fn rank_biomarkers(features: &[FeatureMatrix], source: ConventionName) -> Result<Vec<ImportanceRanking>> {
    features
        .par_iter()
        .filter(|m| m.source == source)
        .map(|m| {
            let model = pca_fit(m)
                .map_err(|e| PipelineError::analysis(format!("patient {} {}", m.patient_id, m.session), e))?;
            Ok(feature_importance(&model))
        })
        .collect()
}

/// Cross-patient histograms of each patient's top-k features, one per action
/// present. Each patient contributes a ranking fitted on that action alone.
pub fn histograms(
    features: &[FeatureMatrix],
    source: ConventionName,
    session: Session,
    top_k: usize,
) -> Result<Vec<BiomarkerHistogram>> {
    let chosen: Vec<&FeatureMatrix> = features
        .iter()
        .filter(|m| m.source == source && m.session == session)
        .collect();
    let mut out = Vec::new();
    for action in Action::ALL {
        let lists = chosen
            .par_iter()
            .filter(|m| m.actions.contains(&action))
            .map(|m| {
                let model = pca_fit(&m.select_action(action)).map_err(|e| {
                    PipelineError::analysis(format!("patient {} {} {action}", m.patient_id, m.session), e)
                })?;
                Ok(top_k_features(&feature_importance(&model), top_k))
            })
            .collect::<Result<Vec<_>>>()?;
        if !lists.is_empty() {
            out.push(aggregate_histogram(&lists, action));
        }
    }
    Ok(out)
}

/// Regresses `to`-source biomarker values on `from`-source values, pairing
/// windows per patient, session and action and truncating each pair to the
/// shorter run.
pub fn calibrate_sources(
    features: &[FeatureMatrix],
    from: ConventionName,
    to: ConventionName,
) -> Vec<CalibrationEntry> {
    let Some(template) = features.iter().find(|m| m.source == from) else {
        return Vec::new();
    };
    let mut pairs: Vec<(&FeatureMatrix, &FeatureMatrix)> = Vec::new();
    for x in features.iter().filter(|m| m.source == from) {
        if let Some(y) = lookup(features, &x.patient_id, x.session, to) {
            pairs.push((x, y));
        }
    }
    template
        .columns
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (x, y) in &pairs {
                for action in Action::ALL {
                    let a = x.column_for_action(j, action);
                    let b = y.column_for_action(j, action);
                    let n = a.len().min(b.len());
                    xs.extend_from_slice(&a[..n]);
                    ys.extend_from_slice(&b[..n]);
                }
            }
            let fitted = fit_calibration(&xs, &ys).and_then(|m| Ok((m, pearson(&xs, &ys)?)));
            let (model, correlation, error) = match fitted {
                Ok((m, c)) => (Some(m), Some(c), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            CalibrationEntry {
                biomarker: name.clone(),
                from,
                to,
                model,
                correlation,
                error,
            }
        })
        .collect()
}

/// Descriptor of one action's rows of a column. Repeats are concatenated on
/// the time axis; the junctions between recordings are not integrated
/// across, so the result is the sum over recordings.
fn descriptor_value(
    m: &FeatureMatrix,
    column: usize,
    action: Action,
    descriptor: Descriptor,
    config: &PipelineConfig,
) -> std::result::Result<f64, String> {
    let segments = m.column_segments(column, action);
    if segments.is_empty() {
        return Err(format!(
            "patient {} {} has no {action} recording",
            m.patient_id, m.session
        ));
    }
    let mut total = 0.0;
    for values in segments {
        let s = ScalarSeries::new(values, m.dt).map_err(|e| e.to_string())?;
        let v = match descriptor {
            Descriptor::Impulse => angular_impulse_with(&s, config.impulse_mode),
            Descriptor::Smoothness => smoothness(&s),
        }
        .map_err(|e| format!("patient {} {}: {e}", m.patient_id, m.session))?;
        total += v;
    }
    Ok(total)
}

/// Pre and post descriptor values for every action, biomarker and
/// descriptor, in that nesting order.
pub fn compute_descriptors(
    features: &[FeatureMatrix],
    source: ConventionName,
    patients: &[String],
    config: &PipelineConfig,
) -> Vec<DescriptorValues> {
    let paired: Vec<(&FeatureMatrix, &FeatureMatrix)> = patients
        .iter()
        .filter_map(|p| {
            Some((
                lookup(features, p, Session::Pre, source)?,
                lookup(features, p, Session::Post, source)?,
            ))
        })
        .collect();
    let Some((template, _)) = paired.first() else {
        return Vec::new();
    };
    let mut keys = Vec::new();
    for action in Action::ALL {
        for (j, name) in template.columns.iter().enumerate() {
            for descriptor in Descriptor::ALL {
                keys.push((action, j, name.clone(), descriptor));
            }
        }
    }
    keys.into_par_iter()
        .map(|(action, j, biomarker, descriptor)| {
            let mut pre = Vec::with_capacity(paired.len());
            let mut post = Vec::with_capacity(paired.len());
            let mut error = None;
            for (a, b) in &paired {
                match (
                    descriptor_value(a, j, action, descriptor, config),
                    descriptor_value(b, j, action, descriptor, config),
                ) {
                    (Ok(x), Ok(y)) => {
                        pre.push(x);
                        post.push(y);
                    }
                    (Err(e), _) | (_, Err(e)) => {
                        error = Some(e);
                        break;
                    }
                }
            }
            if error.is_some() {
                pre.clear();
                post.clear();
            }
            DescriptorValues {
                action,
                biomarker,
                descriptor,
                patients: patients.to_vec(),
                pre,
                post,
                error,
            }
        })
        .collect()
}

/// Paired tests and Bland-Altman summaries for every descriptor entry.
pub fn assess(descriptors: &[DescriptorValues], config: &PipelineConfig) -> (Vec<TestEntry>, Vec<BlandAltmanEntry>) {
    let opts = config.test_options();
    descriptors
        .par_iter()
        .map(|d| {
            let (result, test_error) = match &d.error {
                Some(e) => (None, Some(e.clone())),
                None => match paired_t_test_with(&d.pre, &d.post, &opts) {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                },
            };
            let (summary, ba_error) = match &d.error {
                Some(e) => (None, Some(e.clone())),
                None => match bland_altman_with(&d.pre, &d.post, config.ba_multiplier) {
                    Ok(s) => (Some(s), None),
                    Err(e) => (None, Some(e.to_string())),
                },
            };
            (
                TestEntry {
                    action: d.action,
                    biomarker: d.biomarker.clone(),
                    descriptor: d.descriptor,
                    result,
                    error: test_error,
                },
                BlandAltmanEntry {
                    action: d.action,
                    biomarker: d.biomarker.clone(),
                    descriptor: d.descriptor,
                    summary,
                    error: ba_error,
                },
            )
        })
        .unzip()
}

/// Every analysis stage after feature extraction.
pub fn analyze(
    features: &[FeatureMatrix],
    config: &PipelineConfig,
    input_files: Vec<String>,
) -> Result<AnalysisReport> {
    let (source, sources) = choose_source(features, config)?;
    let ids: BTreeSet<&str> = features
        .iter()
        .filter(|m| m.source == source)
        .map(|m| m.patient_id.as_str())
        .collect();
    let (patients, unpaired): (Vec<String>, Vec<String>) = ids.into_iter().map(str::to_string).partition(|p| {
        lookup(features, p, Session::Pre, source).is_some() && lookup(features, p, Session::Post, source).is_some()
    });
    if patients.is_empty() {
        return Err(PipelineError::NoPairedPatients(source));
    }

    let rankings = rank_biomarkers(features, source)?;
    let histograms = histograms(features, source, config.histogram_session, config.top_k)?;
    let calibrations = if sources.len() > 1 {
        let target = *sources.iter().find(|&&s| s != source).expect("two sources");
        calibrate_sources(features, source, target)
    } else {
        Vec::new()
    };
    let descriptors = compute_descriptors(features, source, &patients, config);
    let (tests, bland_altman) = assess(&descriptors, config);

    Ok(AnalysisReport {
        provenance: Provenance {
            config_hash: config.hash(),
            input_files,
            assess_source: source,
            sources,
            patients,
            unpaired_patients: unpaired,
            tails: config.tails,
            alternative: config.alternative,
            alpha: config.alpha,
            ba_multiplier: config.ba_multiplier,
        },
        rankings,
        histograms,
        calibrations,
        descriptors,
        tests,
        bland_altman,
    })
}

/// Runs the whole analysis on recordings already in memory. Each recording
/// is labelled `<patient>_<session>_<source>_<action>_<index>` in errors and
/// provenance.
pub fn analyze_recordings(recordings: &[RawRecording], config: &PipelineConfig) -> Result<AnalysisReport> {
    config.validate()?;
    if recordings.is_empty() {
        return Err(PipelineError::NoRecordings(config.input_dir.clone()));
    }
    let labels: Vec<String> = recordings
        .iter()
        .enumerate()
        .map(|(i, r)| format!("{}_{}_{}_{}_{i}", r.patient_id, r.session, r.source, r.action))
        .collect();
    let series = recordings
        .par_iter()
        .zip(&labels)
        .map(|(r, label)| prepare_recording(r, config, label))
        .collect::<Result<Vec<_>>>()?;
    let features = build_features(&series, config)?;
    analyze(&features, config, labels)
}

/// Reads the configured input directory and analyses it. Nothing is written.
pub fn run_pipeline(config: &PipelineConfig) -> Result<AnalysisReport> {
    config.validate()?;
    let inputs = load_inputs(config)?;
    let features = build_features(&inputs.series, config)?;
    analyze(&features, config, inputs.files)
}
