use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kinemarker(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinemarker"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn synth(dir: &Path, extra: &[&str]) {
    let out = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out", out, "--patients", "6", "--seed", "5"];
    args.extend_from_slice(extra);
    let o = kinemarker(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn report_flags_planted_descriptors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let config = data.join("config.json");
    let o = kinemarker(&["report", "--config", config.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let report = data.join("report");
    let (header, rows) = read_csv(&report.join("ttest_squat.csv"));
    assert_eq!(
        header,
        [
            "biomarker",
            "descriptor",
            "t",
            "p_one",
            "p_two",
            "significant",
            "n",
            "error"
        ]
    );
    assert_eq!(rows.len(), 36);
    let flagged: Vec<(&str, &str)> = rows
        .iter()
        .filter(|r| r[5] == "true")
        .map(|r| (r[0].as_str(), r[1].as_str()))
        .collect();
    assert_eq!(flagged.len(), 6);
    assert!(flagged
        .iter()
        .all(|(b, d)| b.contains("knee_flexion") && *d == "smoothness"));

    let (_, rows) = read_csv(&report.join("ttest_sit_to_stand.csv"));
    assert!(rows.iter().all(|r| r[5] == "false" && !r[7].is_empty()));
    assert!(report.join("report.txt").exists());
    assert!(report.join("histogram_squat.csv").exists());
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let config = data.join("config.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = kinemarker(&["report", "--config", config.to_str().unwrap()]);
        assert!(o.status.success());
        runs.push(snapshot(&data.join("report")));
        fs::remove_dir_all(data.join("report")).unwrap();
    }
    assert!(runs[0].len() > 10);
    assert_eq!(runs[0].len(), runs[1].len());
    for ((name, a), (other, b)) in runs[0].iter().zip(&runs[1]) {
        assert_eq!(name, other);
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn overrides_change_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &[]);
    let config = data.join("config.json");
    let hash = |extra: &[&str], out: &str| {
        let dir = tmp.path().join(out);
        let mut args = vec![
            "report",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(kinemarker(&args).status.success());
        config_hash(&fs::read_to_string(dir.join("report.json")).unwrap())
    };
    let base = hash(&[], "base");
    let two = hash(&["--tails", "two"], "two");
    let ba = hash(&["--ba-multiplier", "2.0"], "ba");
    assert_ne!(base, two);
    assert_ne!(base, ba);
    assert_ne!(two, ba);
}

fn config_hash(report_json: &str) -> String {
    let key = "\"config_hash\": \"";
    let start = report_json.find(key).expect("hash present") + key.len();
    report_json[start..start + 64].to_string()
}

#[test]
fn stage_commands_write_their_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, &["--sources", "mesh_model_24,depth_tracker_32"]);
    let config = data.join("config.json");
    let c = config.to_str().unwrap();
    let run = |cmd: &str, out: &str| {
        let dir = tmp.path().join(out);
        let o = kinemarker(&[cmd, "--config", c, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        dir
    };

    let dir = run("ingest", "ingest");
    assert_eq!(fs::read_dir(dir.join("canonical")).unwrap().count(), 6 * 2 * 2 * 2);

    let dir = run("features", "features");
    let (header, rows) = read_csv(&dir.join("features").join("P01_pre_mesh_model_24.csv"));
    assert_eq!(header.len(), 1 + 18);
    assert_eq!(header[0], "action");
    assert!(!rows.is_empty());

    let dir = run("biomarkers", "biomarkers");
    let (header, rows) = read_csv(&dir.join("histogram_squat.csv"));
    assert_eq!(header, ["feature", "count"]);
    let total: usize = rows.iter().map(|r| r[1].parse::<usize>().unwrap()).sum();
    assert_eq!(total, 6 * 5);
    assert!(dir.join("rankings.csv").exists());

    let dir = run("calibrate", "calibrate");
    let (_, rows) = read_csv(&dir.join("calibration.csv"));
    assert_eq!(rows.len(), 18);

    let dir = run("assess", "assess");
    assert!(dir.join("ttest_squat.csv").exists());
    assert!(dir
        .join("bland_altman_right_knee_flexion_max_smoothness_squat.csv")
        .exists());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    assert_eq!(
        kinemarker(&["report", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    fs::write(empty.join("c.json"), r#"{"input_dir": "."}"#).unwrap();
    let c = empty.join("c.json");
    assert_eq!(
        kinemarker(&["report", "--config", c.to_str().unwrap()]).status.code(),
        Some(1)
    );

    fs::write(empty.join("bad.json"), r#"{"top_k": 0}"#).unwrap();
    let bad = empty.join("bad.json");
    assert_eq!(
        kinemarker(&["report", "--config", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );

    let data = tmp.path().join("data");
    synth(&data, &[]);
    let config = data.join("config.json");
    assert_eq!(
        kinemarker(&["calibrate", "--config", config.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    let victim = fs::read_dir(&data)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .unwrap();
    let text = fs::read_to_string(&victim).unwrap();
    let truncated: String = text.lines().take(3).collect::<Vec<_>>().join("\n") + "\n{\"t\": 0.5, \"joints\": \n";
    fs::write(&victim, truncated).unwrap();
    let o = kinemarker(&["report", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(victim.file_name().unwrap().to_str().unwrap()));
}
