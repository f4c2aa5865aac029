//! Deterministic synthetic cohorts for exercising the pipeline.
//!
//! Each patient performs a squat and a sit-to-stand in a pre and a post
//! session. Joint positions are generated from prescribed joint-angle
//! profiles on a skeleton whose pelvis and trunk stay fixed, so angles that
//! share a profile across sessions are bit-identical between sessions.
//!
//! With [`PlantedEffect::SlowerSquatKnee`] the post-session squat knee dip
//! lasts longer than the pre-session dip by a per-patient factor, and the
//! squat recording grows by the same amount. That lowers the smoothness of
//! every squat knee-flexion feature and raises its impulse. Arm angles rest
//! at their minimum, so the extra standing time leaves every arm descriptor
//! bit-identical.

use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    write_recording, Action, ConventionName, Frame, JointId, Labelling, Point3, RawRecording, Session,
    SkeletonConvention, DEFAULT_DT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantedEffect {
    /// Post sessions repeat the pre sessions exactly.
    None,
    /// Post-session squat knee dips are slower, hence smoother.
    SlowerSquatKnee,
}

#[derive(Debug, Clone)]
pub struct CohortSpec {
    pub patients: usize,
    pub repeats: usize,
    pub seed: u64,
    pub sources: Vec<ConventionName>,
    pub effect: PlantedEffect,
    pub dt: f64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            patients: 20,
            repeats: 1,
            seed: 0,
            sources: vec![ConventionName::MeshModel24],
            effect: PlantedEffect::SlowerSquatKnee,
            dt: DEFAULT_DT,
        }
    }
}

const SQUAT_LEAD: f64 = 0.5;
const SQUAT_TAIL: f64 = 2.0;
const SIT_TO_STAND_SECONDS: f64 = 4.0;
const THIGH: f64 = 0.45;
const SHANK: f64 = 0.42;
const UPPER_ARM: f64 = 0.30;
const FOREARM: f64 = 0.27;

// Raised-cosine bump on [0, 1].
fn bump(s: f64) -> f64 {
    if (0.0..=1.0).contains(&s) {
        let v = (PI * s).sin();
        v * v
    } else {
        0.0
    }
}

fn smoothstep(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * (3.0 - 2.0 * s)
}

#[derive(Debug, Clone, Copy)]
struct SideParams {
    knee_amplitude: f64,
    elbow_rest: f64,
    elbow_amplitude: f64,
    abduction_rest: f64,
    abduction_amplitude: f64,
}

#[derive(Debug, Clone)]
struct PatientParams {
    left: SideParams,
    right: SideParams,
    squat_duration: f64,
    squat_stretch: f64,
    sts_start: f64,
    sts_duration: f64,
    arm_start: f64,
    arm_duration: f64,
    repeat_jitter: Vec<f64>,
}

fn draw_patient(rng: &mut ChaCha8Rng, repeats: usize) -> PatientParams {
    let amplitude = rng.random_range(60.0..95.0);
    let side = |rng: &mut ChaCha8Rng| SideParams {
        knee_amplitude: amplitude * rng.random_range(0.95..1.05),
        elbow_rest: rng.random_range(110.0..130.0),
        elbow_amplitude: rng.random_range(20.0..45.0),
        abduction_rest: rng.random_range(8.0..20.0),
        abduction_amplitude: rng.random_range(15.0..40.0),
    };
    let left = side(rng);
    let right = side(rng);
    PatientParams {
        left,
        right,
        squat_duration: rng.random_range(1.6..2.2),
        squat_stretch: rng.random_range(1.25..1.5),
        sts_start: rng.random_range(0.4..0.8),
        sts_duration: rng.random_range(1.2..1.8),
        arm_start: rng.random_range(0.5..1.0),
        arm_duration: rng.random_range(1.2..2.0),
        repeat_jitter: (0..repeats).map(|_| rng.random_range(0.97..1.03)).collect(),
    }
}

fn squat_dip_seconds(p: &PatientParams, slow_knee: bool, jitter: f64) -> f64 {
    let stretch = if slow_knee { p.squat_stretch } else { 1.0 };
    p.squat_duration * stretch * jitter
}

struct Angles {
    left_knee: f64,
    right_knee: f64,
    left_elbow: f64,
    right_elbow: f64,
    left_abduction: f64,
    right_abduction: f64,
}

fn angles_at(p: &PatientParams, action: Action, slow_knee: bool, jitter: f64, t: f64) -> Angles {
    let arm = bump((t - p.arm_start) / (p.arm_duration * jitter));
    let elbow = |s: &SideParams| s.elbow_rest + s.elbow_amplitude * arm;
    let abduction = |s: &SideParams| s.abduction_rest + s.abduction_amplitude * arm;
    let (left_knee, right_knee) = match action {
        Action::Squat => {
            let dip = bump((t - SQUAT_LEAD) / squat_dip_seconds(p, slow_knee, jitter));
            (
                180.0 - p.left.knee_amplitude * dip,
                180.0 - p.right.knee_amplitude * dip,
            )
        }
        Action::SitToStand => {
            let rise = smoothstep((t - p.sts_start) / (p.sts_duration * jitter));
            (95.0 + 80.0 * rise, 95.0 + 80.0 * rise)
        }
    };
    Angles {
        left_knee,
        right_knee,
        left_elbow: elbow(&p.left),
        right_elbow: elbow(&p.right),
        left_abduction: abduction(&p.left),
        right_abduction: abduction(&p.right),
    }
}

fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(v: Point3, s: f64) -> Point3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

/// Knee and ankle for a given interior knee angle; the leg folds in the y-z plane.
fn leg(hip: Point3, knee_deg: f64) -> (Point3, Point3) {
    let half = (180.0 - knee_deg).to_radians() / 2.0;
    let knee = add(hip, scale([0.0, -half.cos(), half.sin()], THIGH));
    let ankle = add(knee, scale([0.0, -half.cos(), -half.sin()], SHANK));
    (knee, ankle)
}

/// Elbow and wrist for shoulder abduction and elbow flexion. `outward` is +1
/// for the left arm and -1 for the right.
fn arm(shoulder: Point3, outward: f64, abduction_deg: f64, elbow_deg: f64) -> (Point3, Point3) {
    let b = abduction_deg.to_radians();
    let upper = [outward * b.sin(), -b.cos(), 0.0];
    let elbow = add(shoulder, scale(upper, UPPER_ARM));
    let e = elbow_deg.to_radians();
    // Rotate the reversed upper-arm direction by the flexion angle towards +z.
    let fore = add(scale(upper, -e.cos()), [0.0, 0.0, e.sin()]);
    let wrist = add(elbow, scale(fore, FOREARM));
    (elbow, wrist)
}

fn canonical_pose(a: &Angles) -> [Point3; JointId::COUNT] {
    let mut pose = [[0.0; 3]; JointId::COUNT];
    let mut set = |j: JointId, p: Point3| pose[j.index()] = p;
    let left_hip = [0.1, 0.95, 0.0];
    let right_hip = [-0.1, 0.95, 0.0];
    let left_shoulder = [0.18, 1.45, 0.0];
    let right_shoulder = [-0.18, 1.45, 0.0];
    set(JointId::Pelvis, [0.0, 0.95, 0.0]);
    set(JointId::LeftHip, left_hip);
    set(JointId::RightHip, right_hip);
    set(JointId::SpineChest, [0.0, 1.32, 0.0]);
    set(JointId::Neck, [0.0, 1.52, 0.0]);
    set(JointId::LeftShoulder, left_shoulder);
    set(JointId::RightShoulder, right_shoulder);
    let (k, an) = leg(left_hip, a.left_knee);
    set(JointId::LeftKnee, k);
    set(JointId::LeftAnkle, an);
    let (k, an) = leg(right_hip, a.right_knee);
    set(JointId::RightKnee, k);
    set(JointId::RightAnkle, an);
    let (e, w) = arm(left_shoulder, 1.0, a.left_abduction, a.left_elbow);
    set(JointId::LeftElbow, e);
    set(JointId::LeftWrist, w);
    let (e, w) = arm(right_shoulder, -1.0, a.right_abduction, a.right_elbow);
    set(JointId::RightElbow, e);
    set(JointId::RightWrist, w);
    pose
}

/// Source-labelled joints for one canonical pose. The mesh skeleton places
/// its hip joints higher and closer to the midline than the depth tracker.
fn source_joints(
    pose: &[Point3; JointId::COUNT],
    convention: &SkeletonConvention,
) -> std::collections::BTreeMap<String, Point3> {
    let mut joints = std::collections::BTreeMap::new();
    for joint in JointId::ALL {
        let mut p = pose[joint.index()];
        if convention.name() == ConventionName::MeshModel24 && matches!(joint, JointId::LeftHip | JointId::RightHip) {
            p = [p[0] * 0.8, p[1] + 0.04, p[2] + 0.02];
        }
        joints.insert(convention.label_for(joint).unwrap().to_string(), p);
    }
    // Remaining source joints hang off the nearest canonical joint.
    let neck = pose[JointId::Neck.index()];
    for (i, label) in convention.labels().iter().enumerate() {
        if !joints.contains_key(label) {
            joints.insert(
                label.clone(),
                add(neck, [0.0, 0.02 * (i % 7) as f64, 0.01 * (i % 3) as f64]),
            );
        }
    }
    joints
}

fn recording(
    patient_id: &str,
    params: &PatientParams,
    session: Session,
    action: Action,
    repeat: usize,
    convention: &SkeletonConvention,
    spec: &CohortSpec,
) -> RawRecording {
    let slow = spec.effect == PlantedEffect::SlowerSquatKnee && session == Session::Post;
    let jitter = params.repeat_jitter[repeat];
    let seconds = match action {
        Action::Squat => SQUAT_LEAD + squat_dip_seconds(params, slow, jitter) + SQUAT_TAIL,
        Action::SitToStand => SIT_TO_STAND_SECONDS,
    };
    let n = (seconds / spec.dt).round() as usize + 1;
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 * spec.dt;
            let pose = canonical_pose(&angles_at(params, action, slow, jitter, t));
            Frame {
                t,
                joints: source_joints(&pose, convention),
            }
        })
        .collect();
    RawRecording {
        patient_id: patient_id.to_string(),
        session,
        source: convention.name(),
        action,
        labelling: Labelling::Source,
        frames,
    }
}

pub fn patient_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

/// Every recording of the cohort, ordered by patient, session, source,
/// action and repeat.
pub fn generate_cohort(spec: &CohortSpec) -> Vec<RawRecording> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let repeats = spec.repeats.max(1);
    let params: Vec<PatientParams> = (0..spec.patients).map(|_| draw_patient(&mut rng, repeats)).collect();
    let mut out = Vec::new();
    for (i, p) in params.iter().enumerate() {
        let id = patient_id(i);
        for session in [Session::Pre, Session::Post] {
            for &source in &spec.sources {
                let convention = SkeletonConvention::for_name(source);
                for action in Action::ALL {
                    for repeat in 0..repeats {
                        out.push(recording(&id, p, session, action, repeat, &convention, spec));
                    }
                }
            }
        }
    }
    out
}

pub fn recording_file_name(rec: &RawRecording, repeat: usize) -> String {
    format!(
        "{}_{}_{}_{}_{}.jsonl",
        rec.patient_id, rec.session, rec.source, rec.action, repeat
    )
}

/// Writes the cohort as JSON Lines files into `dir` and returns their paths.
pub fn write_cohort(spec: &CohortSpec, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let repeats = spec.repeats.max(1);
    generate_cohort(spec)
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let path = dir.join(recording_file_name(rec, i % repeats));
            let mut out = BufWriter::new(fs::File::create(&path)?);
            write_recording(rec, &mut out)?;
            std::io::Write::flush(&mut out)?;
            Ok(path)
        })
        .collect()
}
