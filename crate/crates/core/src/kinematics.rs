//! Joint angles and windowed angle statistics.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ingest::{Action, CanonicalSeries, ConventionName, JointId, Point3, Session};

/// Limb segments shorter than this (metres) make an angle undefined.
pub const MIN_SEGMENT_LENGTH: f64 = 1e-9;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KinematicsError {
    #[error("degenerate triangle: limb segment shorter than {MIN_SEGMENT_LENGTH} m")]
    DegenerateTriangle,
    #[error("degenerate triangle at frame {frame} for angle {angle}")]
    DegenerateTriangleAt { frame: usize, angle: String },
    #[error("invalid angle definition: {0}")]
    InvalidDefinition(String),
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),
    #[error("window of {length} frames is longer than the series ({available} frames)")]
    WindowTooLong { length: usize, available: usize },
    #[error("recordings disagree on {0}")]
    InconsistentMetadata(String),
    #[error("no angle definitions given")]
    EmptyDefinitions,
    #[error("no recordings given")]
    NoRecordings,
    #[error("feature matrix contains a non-finite value in column {0}")]
    NonFinite(String),
    #[error("feature csv: {0}")]
    Csv(String),
}

pub type Result<T> = std::result::Result<T, KinematicsError>;

fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm_sq(v: Point3) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Interior angle at `knee` of the triangle (`hip`, `knee`, `ankle`), in
/// degrees, from the cosine rule on the three side lengths. Any vertex
/// triple works: for the elbow pass shoulder, elbow, wrist.
pub fn joint_angle(hip: Point3, knee: Point3, ankle: Point3) -> Result<f64> {
    let m2 = norm_sq(sub(hip, knee));
    let n2 = norm_sq(sub(ankle, knee));
    let p2 = norm_sq(sub(hip, ankle));
    let (m, n) = (m2.sqrt(), n2.sqrt());
    if !(m >= MIN_SEGMENT_LENGTH && n >= MIN_SEGMENT_LENGTH) {
        return Err(KinematicsError::DegenerateTriangle);
    }
    let cos = ((m2 + n2 - p2) / (2.0 * m * n)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees().clamp(0.0, 180.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Full 3D angle.
    #[default]
    None,
    /// Angle after dropping the mediolateral coordinate.
    Sagittal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleDefinition {
    pub name: String,
    pub vertex: JointId,
    pub end_a: JointId,
    pub end_b: JointId,
    #[serde(default)]
    pub projection: Projection,
}

impl AngleDefinition {
    pub fn new(name: impl Into<String>, vertex: JointId, end_a: JointId, end_b: JointId) -> Self {
        AngleDefinition {
            name: name.into(),
            vertex,
            end_a,
            end_b,
            projection: Projection::None,
        }
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = projection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(KinematicsError::InvalidDefinition("empty name".into()));
        }
        if self.vertex == self.end_a || self.vertex == self.end_b || self.end_a == self.end_b {
            return Err(KinematicsError::InvalidDefinition(format!(
                "{}: joints must be distinct",
                self.name
            )));
        }
        Ok(())
    }

    /// Knee flexion, elbow flexion and arm abduction on both sides.
    ///
    /// Abduction is the upper arm against the trunk: vertex at the shoulder,
    /// ends at the elbow and the hip of the same side.
    pub fn default_set() -> Vec<AngleDefinition> {
        use JointId::*;
        vec![
            AngleDefinition::new("right_knee_flexion", RightKnee, RightHip, RightAnkle),
            AngleDefinition::new("left_knee_flexion", LeftKnee, LeftHip, LeftAnkle),
            AngleDefinition::new("right_elbow_flexion", RightElbow, RightShoulder, RightWrist),
            AngleDefinition::new("left_elbow_flexion", LeftElbow, LeftShoulder, LeftWrist),
            AngleDefinition::new("right_arm_abduction", RightShoulder, RightElbow, RightHip),
            AngleDefinition::new("left_arm_abduction", LeftShoulder, LeftElbow, LeftHip),
        ]
    }
}

/// One angle per frame, degrees in [0, 180].
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSeries {
    pub name: String,
    pub dt: f64,
    pub values: Vec<f64>,
}

/// Horizontal axis (x or z, y is up) along which the hips are spread the
/// most on average. This is the coordinate dropped by the sagittal projection.
pub fn mediolateral_axis(series: &CanonicalSeries) -> usize {
    let mut spread = [0.0f64; 3];
    for frame in &series.positions {
        let d = sub(frame[JointId::LeftHip.index()], frame[JointId::RightHip.index()]);
        for c in 0..3 {
            spread[c] += d[c].abs();
        }
    }
    if spread[2] > spread[0] {
        2
    } else {
        0
    }
}

pub fn compute_angle_series(series: &CanonicalSeries, def: &AngleDefinition) -> Result<AngleSeries> {
    def.validate()?;
    let dropped = match def.projection {
        Projection::None => None,
        Projection::Sagittal => Some(mediolateral_axis(series)),
    };
    let project = |mut p: Point3| {
        if let Some(axis) = dropped {
            p[axis] = 0.0;
        }
        p
    };
    let values = series
        .positions
        .iter()
        .enumerate()
        .map(|(frame, joints)| {
            joint_angle(
                project(joints[def.end_a.index()]),
                project(joints[def.vertex.index()]),
                project(joints[def.end_b.index()]),
            )
            .map_err(|_| KinematicsError::DegenerateTriangleAt {
                frame,
                angle: def.name.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AngleSeries {
        name: def.name.clone(),
        dt: series.dt,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    Max,
    Min,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Max => "max",
            Statistic::Min => "min",
        }
    }

    fn apply(self, window: &[f64]) -> f64 {
        match self {
            Statistic::Mean => window.iter().sum::<f64>() / window.len() as f64,
            Statistic::Max => window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Statistic::Min => window.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowSpec {
    pub length: usize,
    pub stride: usize,
    pub statistics: Vec<Statistic>,
}

impl Default for WindowSpec {
    /// Half a second at 30 Hz, stride one frame, mean/max/min.
    fn default() -> Self {
        WindowSpec {
            length: 15,
            stride: 1,
            statistics: vec![Statistic::Mean, Statistic::Max, Statistic::Min],
        }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(KinematicsError::InvalidWindow("length must be at least 1".into()));
        }
        if self.stride == 0 {
            return Err(KinematicsError::InvalidWindow("stride must be at least 1".into()));
        }
        if self.statistics.is_empty() {
            return Err(KinematicsError::InvalidWindow("no statistics requested".into()));
        }
        for (i, s) in self.statistics.iter().enumerate() {
            if self.statistics[..i].contains(s) {
                return Err(KinematicsError::InvalidWindow(format!("statistic {s} repeated")));
            }
        }
        Ok(())
    }

    /// `floor((n - length) / stride) + 1`, or zero when the window does not fit.
    pub fn window_count(&self, n: usize) -> usize {
        if self.length == 0 || self.stride == 0 || self.length > n {
            0
        } else {
            (n - self.length) / self.stride + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedColumn {
    pub statistic: Statistic,
    pub values: Vec<f64>,
}

/// Requested statistics over each window, in `spec.statistics` order.
pub fn window_statistics(angle: &AngleSeries, spec: &WindowSpec) -> Result<Vec<WindowedColumn>> {
    spec.validate()?;
    let n = angle.values.len();
    if spec.length > n {
        return Err(KinematicsError::WindowTooLong {
            length: spec.length,
            available: n,
        });
    }
    let count = spec.window_count(n);
    Ok(spec
        .statistics
        .iter()
        .map(|&statistic| WindowedColumn {
            statistic,
            values: (0..count)
                .map(|w| {
                    let start = w * spec.stride;
                    statistic.apply(&angle.values[start..start + spec.length])
                })
                .collect(),
        })
        .collect())
}

/// Windowed angle statistics for one patient and session, rows from every
/// recording stacked in input order and labelled with their action.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub patient_id: String,
    pub session: Session,
    pub source: ConventionName,
    /// Time between consecutive rows of one recording (stride times frame interval).
    pub dt: f64,
    pub columns: Vec<String>,
    pub actions: Vec<Action>,
    /// Index of the source recording for each row.
    pub segments: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[idx]).collect()
    }

    /// Column values over the rows of one action, in row order.
    pub fn column_for_action(&self, idx: usize, action: Action) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.actions)
            .filter(|(_, a)| **a == action)
            .map(|(r, _)| r[idx])
            .collect()
    }

    /// Column values split per source recording, restricted to one action.
    pub fn column_segments(&self, idx: usize, action: Action) -> Vec<Vec<f64>> {
        let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
        for ((row, a), seg) in self.rows.iter().zip(&self.actions).zip(&self.segments) {
            if *a != action {
                continue;
            }
            match out.last_mut() {
                Some((s, values)) if s == seg => values.push(row[idx]),
                _ => out.push((*seg, vec![row[idx]])),
            }
        }
        out.into_iter().map(|(_, v)| v).collect()
    }

    pub fn actions_present(&self) -> Vec<Action> {
        Action::ALL
            .iter()
            .copied()
            .filter(|a| self.actions.contains(a))
            .collect()
    }

    /// Rows of one action only.
    pub fn select_action(&self, action: Action) -> FeatureMatrix {
        let keep: Vec<usize> = (0..self.n_rows()).filter(|&i| self.actions[i] == action).collect();
        FeatureMatrix {
            actions: keep.iter().map(|&i| self.actions[i]).collect(),
            segments: keep.iter().map(|&i| self.segments[i]).collect(),
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            ..self.clone_header()
        }
    }

    /// Rows of `self` followed by rows of `other`. Columns must match.
    pub fn stacked(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.columns != other.columns {
            return Err(KinematicsError::InconsistentMetadata("columns".into()));
        }
        let offset = self.segments.iter().max().map_or(0, |m| m + 1);
        let mut out = self.clone();
        out.actions.extend_from_slice(&other.actions);
        out.segments.extend(other.segments.iter().map(|s| s + offset));
        out.rows.extend(other.rows.iter().cloned());
        Ok(out)
    }

    fn clone_header(&self) -> FeatureMatrix {
        FeatureMatrix {
            patient_id: self.patient_id.clone(),
            session: self.session,
            source: self.source,
            dt: self.dt,
            columns: self.columns.clone(),
            actions: Vec::new(),
            segments: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// CSV with header `action,<columns..>`, one row per window.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["action".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (row, action) in self.rows.iter().zip(&self.actions) {
            let mut rec = vec![action.as_str().to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| KinematicsError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads the CSV written by [`FeatureMatrix::write_csv`]. Metadata is not
    /// part of the file and is supplied by the caller; every row is treated as
    /// its own segment boundary-free run per action.
    pub fn read_csv<R: Read>(
        input: R,
        patient_id: &str,
        session: Session,
        source: ConventionName,
        dt: f64,
    ) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("action") {
            return Err(KinematicsError::Csv("first column must be \"action\"".into()));
        }
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut m = FeatureMatrix {
            patient_id: patient_id.to_string(),
            session,
            source,
            dt,
            columns,
            actions: Vec::new(),
            segments: Vec::new(),
            rows: Vec::new(),
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let action: Action = rec
                .get(0)
                .unwrap_or_default()
                .parse()
                .map_err(|e: String| KinematicsError::Csv(format!("row {}: {e}", i + 1)))?;
            let row = rec
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| KinematicsError::Csv(format!("row {}: {e}", i + 1)))?;
            if row.len() != m.columns.len() {
                return Err(KinematicsError::Csv(format!("row {} has wrong width", i + 1)));
            }
            let segment = match m.actions.last() {
                Some(prev) if *prev == action => *m.segments.last().unwrap(),
                Some(_) => m.segments.last().unwrap() + 1,
                None => 0,
            };
            m.actions.push(action);
            m.segments.push(segment);
            m.rows.push(row);
        }
        Ok(m)
    }
}

fn csv_err(e: csv::Error) -> KinematicsError {
    KinematicsError::Csv(e.to_string())
}

/// Builds one feature matrix from all recordings of a patient and session.
/// Columns are `<angle>_<statistic>` in definition-major order.
pub fn assemble_feature_matrix(
    recordings: &[CanonicalSeries],
    defs: &[AngleDefinition],
    spec: &WindowSpec,
) -> Result<FeatureMatrix> {
    if defs.is_empty() {
        return Err(KinematicsError::EmptyDefinitions);
    }
    spec.validate()?;
    for (i, d) in defs.iter().enumerate() {
        d.validate()?;
        if defs[..i].iter().any(|o| o.name == d.name) {
            return Err(KinematicsError::InvalidDefinition(format!(
                "duplicate angle name {}",
                d.name
            )));
        }
    }
    let first = recordings.first().ok_or(KinematicsError::NoRecordings)?;
    for r in recordings {
        if r.patient_id != first.patient_id {
            return Err(KinematicsError::InconsistentMetadata("patient_id".into()));
        }
        if r.session != first.session {
            return Err(KinematicsError::InconsistentMetadata("session".into()));
        }
        if r.source != first.source {
            return Err(KinematicsError::InconsistentMetadata("source".into()));
        }
        if r.dt != first.dt {
            return Err(KinematicsError::InconsistentMetadata("dt".into()));
        }
    }

    let columns: Vec<String> = defs
        .iter()
        .flat_map(|d| spec.statistics.iter().map(move |s| format!("{}_{}", d.name, s)))
        .collect();

    let mut m = FeatureMatrix {
        patient_id: first.patient_id.clone(),
        session: first.session,
        source: first.source,
        dt: first.dt * spec.stride as f64,
        columns,
        actions: Vec::new(),
        segments: Vec::new(),
        rows: Vec::new(),
    };

    for (seg, rec) in recordings.iter().enumerate() {
        let mut per_column: Vec<Vec<f64>> = Vec::with_capacity(m.columns.len());
        for def in defs {
            let angles = compute_angle_series(rec, def)?;
            for col in window_statistics(&angles, spec)? {
                per_column.push(col.values);
            }
        }
        let n_windows = per_column[0].len();
        for w in 0..n_windows {
            m.rows.push(per_column.iter().map(|c| c[w]).collect());
            m.actions.push(rec.action);
            m.segments.push(seg);
        }
    }

    for row in &m.rows {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(KinematicsError::NonFinite(m.columns[j].clone()));
        }
    }
    Ok(m)
}
