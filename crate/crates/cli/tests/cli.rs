use std::path::Path;
use std::process::{Command, Output};

fn qsfe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsfe")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL: &str = r#"{
  "name": "small",
  "d": 3,
  "schmidt": "proportional",
  "noise": {"kind": "white", "epsilon": 0.0},
  "config_sets": [[0], [0, 1, 2]],
  "chi_strategies": ["symmetric", "general"],
  "sweep": {"parameter": "epsilon", "from": 0.0, "to": 0.5, "steps": 6},
  "estimators": ["theorem1", "nonadaptive", "lemma2_trivial"]
}"#;

#[test]
fn scenario_run_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.json", SMALL);
    let out = dir.path().join("out");
    let o = qsfe(&["--scenario", &path, "--out", out.to_str().unwrap(), "--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut reader = csv::Reader::from_path(out.join("small.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..4], ["sweep_param", "exact_F", "theorem1_lower", "theorem1_upper"]);
    assert!(header.contains(&"lemma2_trivial_upper".to_string()));
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 2 * 6);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for r in &rows {
        assert_eq!(&r[col("violation")], "false");
        // Every float cell round-trips through its shortest representation.
        for cell in [&r[col("exact_F")], &r[col("theorem1_lower")], &r[col("v_e")]] {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:?}"), cell);
        }
    }
    // Prime d with every configuration: the bounds close on the oracle.
    let full = rows.iter().find(|r| &r[col("config_set")] == "0;1;2").unwrap();
    let f: f64 = full[col("exact_F")].parse().unwrap();
    let lo: f64 = full[col("theorem1_lower")].parse().unwrap();
    assert!((f - lo).abs() < 1e-9);

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("small.json")).unwrap()).unwrap();
    assert_eq!(sidecar["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(sidecar["provenance"]["seed"], 0);
    assert_eq!(sidecar["scenario"]["d"], 3);
    assert_eq!(sidecar["rows"], 24);
    assert_eq!(sidecar["violations"], 0);
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.json", SMALL);
    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = qsfe(&["--scenario", &path, "--out", out.to_str().unwrap(), "--shots", "2000", "--seed", "7"]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((std::fs::read(out.join("small.csv")).unwrap(), std::fs::read(out.join("small.json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let out = dir.path().join("c");
    qsfe(&["--scenario", &path, "--out", out.to_str().unwrap(), "--shots", "2000", "--seed", "8"]);
    assert_ne!(std::fs::read(out.join("small.csv")).unwrap(), outputs[0].0);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("small.json")).unwrap()).unwrap();
    assert_eq!(sidecar["provenance"]["seed"], 8);
    assert_eq!(sidecar["scenario"]["mode"]["shots"]["n"], 2000);
}

#[test]
fn strict_mode_ignores_sampling_noise() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.json", SMALL);
    let out = dir.path().join("o");
    let o = qsfe(&["--scenario", &path, "--out", out.to_str().unwrap(), "--shots", "5", "--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn malformed_scenario_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", "{\n  \"d\": 3,\n  \"schmidt\": \"proportional\",\n  \"noise\": }\n");
    let o = qsfe(&["--scenario", &path, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let path = write(dir.path(), "typo.json", "{\"d\": 3, \"schmidt\": \"proportional\", \"noise\": {\"kind\": \"white\", \"epsilon\": 0}, \"configs\": [0], \"sweeep\": {}}");
    let o = qsfe(&["--scenario", &path]);
    assert!(stderr(&o).contains("sweeep"), "{}", stderr(&o));
}

#[test]
fn invalid_scenario_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"d": 4, "schmidt": [1, 2, 3], "noise": {"kind": "crosstalk", "eps_a": 0.2, "eps_b": 0.0},
                   "configs": [4], "estimators": []}"#;
    let path = write(dir.path(), "inv.json", text);
    let o = qsfe(&["--scenario", &path]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("4 problems"), "{err}");
    assert!(err.contains("schmidt") && err.contains("configuration 4") && err.contains("noise") && err.contains("estimators"));
}

#[test]
fn presets_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = qsfe(&["--preset", "fig3", "--out", dir.path().to_str().unwrap(), "--strict"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("fig3.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 101);
    for name in ["one_side_A", "one_side_B", "symmetric", "general"] {
        assert!(text.contains(&format!(",{name},")));
    }
    let o = qsfe(&["--preset", "fig9"]);
    assert!(!o.status.success());
    let o = qsfe(&["--preset", "fig1", "--scenario", "x.json"]);
    assert!(!o.status.success());
}

#[test]
fn selfcheck_subcommand() {
    let a = qsfe(&["selfcheck", "--seed", "3", "--trials", "20"]);
    assert!(a.status.success(), "{}", stderr(&a));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert!(text.contains("sandwich") && text.contains("passed    20"));
    let b = qsfe(&["selfcheck", "--seed", "3", "--trials", "20"]);
    assert_eq!(a.stdout, b.stdout);
}
