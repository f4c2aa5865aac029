mod oracle;

use std::collections::BTreeMap;

use proptest::prelude::*;

use kinemarker::biomarker::{aggregate_histogram, feature_importance, pca_fit_rows, standardize_rows, Scope};
use kinemarker::ingest::{
    map_to_canonical, parse_str, resample_uniform, write_recording, Action, ConventionName, Frame, JointId, Labelling,
    RawRecording, Session, SkeletonConvention,
};
use kinemarker::kinematics::{joint_angle, window_statistics, AngleSeries, Statistic, WindowSpec};

fn scope() -> Scope {
    Scope {
        patient_id: "P01".into(),
        session: None,
        action: None,
    }
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("f{j}")).collect()
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-3.0f64..3.0)
}

fn non_degenerate(a: [f64; 3], k: [f64; 3], b: [f64; 3]) -> bool {
    let len = |p: [f64; 3]| ((p[0] - k[0]).powi(2) + (p[1] - k[1]).powi(2) + (p[2] - k[2]).powi(2)).sqrt();
    len(a) > 1e-3 && len(b) > 1e-3
}

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (3..=max_rows, 2..=max_cols)
        .prop_flat_map(|(n, p)| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, p), n))
}

/// A recording whose every coordinate is an affine function of time.
fn affine_recording(times: &[f64], slope: f64, offset: f64) -> RawRecording {
    let frames = times
        .iter()
        .map(|&t| Frame {
            t,
            joints: JointId::ALL
                .iter()
                .map(|j| {
                    let i = j.index() as f64;
                    (
                        j.name().to_string(),
                        [offset + slope * t, i - 0.5 * slope * t, 2.0 * i + t],
                    )
                })
                .collect(),
        })
        .collect();
    RawRecording {
        patient_id: "P01".into(),
        session: Session::Pre,
        source: ConventionName::DepthTracker32,
        action: Action::Squat,
        labelling: Labelling::Canonical,
        frames,
    }
}

fn depth_recording(coords: &[f64]) -> RawRecording {
    let convention = SkeletonConvention::depth_tracker_32();
    let frames = coords
        .chunks(3)
        .enumerate()
        .map(|(i, _)| {
            let joints: BTreeMap<String, [f64; 3]> = convention
                .labels()
                .iter()
                .enumerate()
                .map(|(j, label)| {
                    let at = |c: usize| coords[(i * 3 + j * 7 + c) % coords.len()];
                    (label.clone(), [at(0), at(1), at(2)])
                })
                .collect();
            Frame {
                t: i as f64 / 30.0,
                joints,
            }
        })
        .collect();
    RawRecording {
        patient_id: "P07".into(),
        session: Session::Post,
        source: ConventionName::DepthTracker32,
        action: Action::SitToStand,
        labelling: Labelling::Source,
        frames,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn serialized_recording_parses_bit_exactly(coords in prop::collection::vec(
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -5.0f64..5.0], 3..60)
    ) {
        let rec = depth_recording(&coords);
        let mut buf = Vec::new();
        write_recording(&rec, &mut buf).unwrap();
        let back = parse_str(std::str::from_utf8(&buf).unwrap(), &SkeletonConvention::depth_tracker_32()).unwrap();
        prop_assert_eq!(back.frames.len(), rec.frames.len());
        for (a, b) in back.frames.iter().zip(&rec.frames) {
            prop_assert_eq!(a.t.to_bits(), b.t.to_bits());
            for (label, p) in &b.joints {
                let q = a.joints[label];
                prop_assert!(p.iter().zip(&q).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn canonical_mapping_is_idempotent(coords in prop::collection::vec(-5.0f64..5.0, 3..30)) {
        let convention = SkeletonConvention::depth_tracker_32();
        let once = map_to_canonical(&depth_recording(&coords), &convention).unwrap();
        let twice = map_to_canonical(&once, &convention).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!(once.frames.iter().all(|f| f.joints.len() == JointId::COUNT));
    }

    #[test]
    fn resampling_on_own_grid_is_identity(
        n in 2usize..80, dt in 0.005f64..0.2, t0 in -5.0f64..5.0, slope in -3.0f64..3.0
    ) {
        let times: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
        let mut rec = affine_recording(&times, slope, 1.0);
        // Break the affine pattern so interpolation could not hide an index slip.
        for (i, f) in rec.frames.iter_mut().enumerate() {
            f.joints.get_mut("LEFT_KNEE").unwrap()[0] += (i * i % 7) as f64;
        }
        let s = resample_uniform(&rec, dt).unwrap();
        prop_assert_eq!(s.frame_count(), n);
        for (i, f) in rec.frames.iter().enumerate() {
            for j in JointId::ALL {
                let (p, q) = (f.joints[j.name()], s.position(i, j));
                prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-12));
            }
        }
    }

    #[test]
    fn resampling_is_exact_on_affine_motion(
        gaps in prop::collection::vec(0.01f64..0.1, 1..40), dt in 0.01f64..0.05, slope in -3.0f64..3.0
    ) {
        let mut times = vec![0.0];
        for g in &gaps {
            times.push(times.last().unwrap() + g);
        }
        let rec = affine_recording(&times, slope, -2.0);
        let s = resample_uniform(&rec, dt).unwrap();
        let expected = affine_recording(&(0..s.frame_count()).map(|k| k as f64 * dt).collect::<Vec<_>>(), slope, -2.0);
        for (k, f) in expected.frames.iter().enumerate() {
            for j in JointId::ALL {
                let (p, q) = (f.joints[j.name()], s.position(k, j));
                prop_assert!(p.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs())));
            }
        }
    }

    #[test]
    fn angle_matches_oracle_and_is_symmetric(a in point(), k in point(), b in point()) {
        prop_assume!(non_degenerate(a, k, b));
        let angle = joint_angle(a, k, b).unwrap();
        prop_assert!((0.0..=180.0).contains(&angle));
        prop_assert!((angle - oracle::angle_between(a, k, b)).abs() <= 1e-9);
        prop_assert_eq!(angle, joint_angle(b, k, a).unwrap());
    }

    #[test]
    fn angle_ignores_translation_and_scale(
        a in point(), k in point(), b in point(), shift in point(), scale in 0.01f64..100.0
    ) {
        prop_assume!(non_degenerate(a, k, b));
        let moved = |p: [f64; 3]| [scale * p[0] + shift[0], scale * p[1] + shift[1], scale * p[2] + shift[2]];
        let before = joint_angle(a, k, b).unwrap();
        let after = joint_angle(moved(a), moved(k), moved(b)).unwrap();
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn window_count_matches_enumeration(n in 1usize..200, length in 1usize..50, stride in 1usize..20) {
        prop_assume!(length <= n);
        let spec = WindowSpec { length, stride, statistics: vec![Statistic::Mean] };
        let angle = AngleSeries { name: "x".into(), dt: 1.0 / 30.0, values: (0..n).map(|i| i as f64).collect() };
        let cols = window_statistics(&angle, &spec).unwrap();
        let enumerated = (0..n).step_by(stride).filter(|s| s + length <= n).count();
        prop_assert_eq!(spec.window_count(n), enumerated);
        prop_assert_eq!(cols[0].values.len(), enumerated);
    }

    #[test]
    fn pca_agrees_with_covariance_eigenvectors(rows in matrix(20, 8)) {
        let reference = oracle::brute_force_pca(&rows);
        let ev = &reference.eigenvalues;
        let gap = |i: usize| (ev[i] - ev.get(i + 1).copied().unwrap_or(0.0)) / ev[0].max(1e-300);
        prop_assume!(ev[0] > 1e-9 && gap(0) > 1e-3 && (rows[0].len() == 2 || gap(1) > 1e-3));
        let model = pca_fit_rows(&names(rows[0].len()), &rows, scope()).unwrap();
        for c in 0..2 {
            let sign = oracle::dot(&model.components[c], &reference.vectors[c]).signum();
            for (a, b) in model.components[c].iter().zip(&reference.vectors[c]) {
                prop_assert!((a - sign * b).abs() <= 1e-8);
            }
            prop_assert!((model.explained_variance_ratio[c] - reference.ratios[c]).abs() <= 1e-10);
        }
    }

    #[test]
    fn components_orthonormal_and_ratios_ordered(rows in matrix(25, 10)) {
        let Ok(model) = pca_fit_rows(&names(rows[0].len()), &rows, scope()) else {
            return Ok(());
        };
        let [u, v] = &model.components;
        prop_assert!((oracle::dot(u, u) - 1.0).abs() <= 1e-8);
        prop_assert!((oracle::dot(v, v) - 1.0).abs() <= 1e-8);
        prop_assert!(oracle::dot(u, v).abs() <= 1e-8);
        let r = model.explained_variance_ratio;
        prop_assert!(r[0] >= r[1] && r[1] >= 0.0 && r[0] <= 1.0 && r[0] + r[1] <= 1.0 + 1e-12);
    }

    #[test]
    fn rank_two_matrices_reconstruct(
        n in 3usize..20,
        basis in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2..8), 2),
        weights in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 20)
    ) {
        let p = basis[0].len().min(basis[1].len());
        let rows: Vec<Vec<f64>> = weights[..n]
            .iter()
            .map(|(a, b)| (0..p).map(|j| a * basis[0][j] + b * basis[1][j]).collect())
            .collect();
        prop_assume!(p >= 2);
        let Ok(model) = pca_fit_rows(&names(p), &rows, scope()) else {
            return Ok(());
        };
        let (z, _) = standardize_rows(&rows).unwrap();
        for (row, zrow) in rows.iter().zip(&z) {
            let back = model.reconstruct_standardized(&model.transform(row));
            for (x, y) in back.iter().zip(zrow) {
                prop_assert!((x - y).abs() <= 1e-8, "{} vs {}", x, y);
            }
        }
    }

    #[test]
    fn importance_ignores_component_signs(rows in matrix(20, 8), flip in 0usize..4) {
        let Ok(mut model) = pca_fit_rows(&names(rows[0].len()), &rows, scope()) else {
            return Ok(());
        };
        let before = feature_importance(&model);
        for c in 0..2 {
            if flip & (1 << c) != 0 {
                model.components[c].iter_mut().for_each(|v| *v = -*v);
            }
        }
        let after = feature_importance(&model);
        for e in &before.entries {
            prop_assert!((after.score_of(&e.feature).unwrap() - e.score).abs() <= 1e-15);
        }
    }

    #[test]
    fn importance_follows_column_permutation(rows in matrix(20, 8), seed in any::<u64>()) {
        let p = rows[0].len();
        let reference = oracle::brute_force_pca(&rows);
        let ev = &reference.eigenvalues;
        prop_assume!(ev[0] > 1e-9 && (ev[0] - ev[1]) > 1e-3 * ev[0] && (p == 2 || ev[1] - ev[2] > 1e-3 * ev[0]));
        let mut perm: Vec<usize> = (0..p).collect();
        let mut state = seed;
        for i in (1..p).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let columns = names(p);
        let permuted_columns: Vec<String> = perm.iter().map(|&j| columns[j].clone()).collect();
        let permuted_rows: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let a = feature_importance(&pca_fit_rows(&columns, &rows, scope()).unwrap());
        let b = feature_importance(&pca_fit_rows(&permuted_columns, &permuted_rows, scope()).unwrap());
        for e in &a.entries {
            prop_assert!((b.score_of(&e.feature).unwrap() - e.score).abs() <= 1e-9);
        }
        let total: f64 = a.entries.iter().map(|e| e.score).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(a.entries.windows(2).all(|w| w[0].score >= w[1].score - 1e-12));
    }

    #[test]
    fn histogram_conserves_list_entries(
        lists in prop::collection::vec(prop::collection::btree_set(0usize..12, 0..6), 0..25)
    ) {
        let lists: Vec<Vec<String>> = lists
            .iter()
            .map(|set| set.iter().map(|i| format!("feature_{i}")).collect())
            .collect();
        let h = aggregate_histogram(&lists, Action::Squat);
        prop_assert_eq!(h.total(), lists.iter().map(Vec::len).sum::<usize>());
        prop_assert!(h.counts.iter().all(|(_, c)| *c <= lists.len()));
    }
}
