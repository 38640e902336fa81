use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bconf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

#[test]
fn bifurcate_fixed_point_row() {
    let out = bconf(&[
        "bifurcate",
        "--a-min",
        "2.5",
        "--a-max",
        "3.56",
        "--steps",
        "2000",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("A,x"));
    let at_start: Vec<f64> = lines
        .map(|l| l.split_once(',').unwrap())
        .filter(|(a, _)| a.parse::<f64>().unwrap() == 2.5)
        .map(|(_, x)| x.parse().unwrap())
        .collect();
    assert_eq!(at_start.len(), 1);
    assert!((at_start[0] - 0.6).abs() < 1e-12);
}

#[test]
fn paper_circle_demo_validates() {
    let out = bconf(&["branched-path", "--demo", "paper-circle"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["valid"], true);
    let y_jets: Vec<&Value> = v["jets"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|j| j["function"] == "x1")
        .collect();
    assert_eq!(y_jets.len(), 2);
    assert!(y_jets.iter().all(|j| j["passed"] == true));
}

#[test]
fn perturbed_circle_fails_with_gap() {
    let out = bconf(&[
        "branched-path",
        "--demo",
        "paper-circle",
        "--perturb",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let gap = json(&out)["violation"]["gap"].as_f64().unwrap();
    assert!((gap - 0.1).abs() < 1e-9);
}

#[test]
fn dot_output() {
    let out = bconf(&[
        "branched-path",
        "--demo",
        "paper-circle",
        "--m",
        "16",
        "--format",
        "dot",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph"));
    assert_eq!(text.matches("->").count(), 4);
}

#[test]
fn two_particle_demo_merges_once() {
    let out = bconf(&["simulate", "--demo", "two-particle-merge"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let events: Vec<Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["kind"], "merge");
    assert_eq!(events[0]["t"], 1.0);
    assert_eq!(
        (events[0]["from"].as_u64(), events[0]["to"].as_u64()),
        (Some(2), Some(1))
    );
}

#[test]
fn simulation_is_byte_identical_per_seed() {
    let args = [
        "simulate", "--seed", "11", "--n", "15", "--steps", "80", "--format", "json",
    ];
    let a = bconf(&args);
    let b = bconf(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = bconf(&[
        "simulate", "--seed", "12", "--n", "15", "--steps", "80", "--format", "json",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn every_subcommand_reruns_identically() {
    let runs: [&[&str]; 5] = [
        &["bifurcate", "--steps", "50"],
        &["section", "--field", "2.5 + x", "--grid-n", "21"],
        &["chart", "--random", "40", "--seed", "3"],
        &["measure", "--demo", "translated-bump"],
        &["branched-path", "--demo", "paper-circle", "--m", "32"],
    ];
    for args in runs {
        assert_eq!(bconf(args).stdout, bconf(args).stdout, "{args:?}");
    }
}

#[test]
fn section_reports_first_doubling_at_half() {
    let out = bconf(&["section", "--field", "2.5+x", "--grid-n", "101"]);
    assert!(out.status.success());
    let v = json(&out);
    let loci = v["loci"].as_array().unwrap();
    let first = &loci[0];
    assert_eq!(first["cardinality_before"], 1);
    assert_eq!(first["cardinality_after"], 2);
    assert!((first["base_location"][0].as_f64().unwrap() - 0.5).abs() <= 0.01);
    let runs = v["runs"].as_array().unwrap();
    let period_two = runs.iter().find(|r| r["cardinality"] == 2).unwrap();
    assert_eq!(period_two["selections"]["count"], 2);
}

#[test]
fn section_marks_chaos_as_null() {
    let out = bconf(&["section", "--field", "3.9", "--grid-n", "3"]);
    assert!(out.status.success());
    assert!(json(&out)["fibers"]
        .as_array()
        .unwrap()
        .iter()
        .all(Value::is_null));
}

#[test]
fn measure_demos() {
    let out = bconf(&["measure", "--demo", "translated-bump"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["valid"], true);
    let out = bconf(&["measure", "--demo", "growing-bump"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["first_violation"], 3);
}

#[test]
fn measure_reads_frame_directory() {
    let dir = tempfile::tempdir().unwrap();
    for k in 0..3 {
        let mut values = vec![0.0; 36];
        values[6 * 2 + 1 + k] = 1.0;
        values[6 * 3 + 1 + k] = 2.0;
        let f =
            serde_json::json!({"dims": [6, 6], "h": 0.5, "origin": [0.0, 0.0], "values": values});
        fs::write(dir.path().join(format!("frame{k}.json")), f.to_string()).unwrap();
    }
    let mut text = String::from("dims 6 6\nh 0.5\norigin 0 0\n");
    for i in 0..6 {
        let row: Vec<&str> = (0..6)
            .map(|j| {
                if i == 2 && (2..5).contains(&j) {
                    "1"
                } else {
                    "0"
                }
            })
            .collect();
        text += &(row.join(" ") + "\n");
    }
    fs::write(dir.path().join("frame3.txt"), text).unwrap();
    let out = bconf(&["measure", dir.path().to_str().unwrap()]);
    let v = json(&out);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(v["first_violation"], 3);
    assert_eq!(v["component_volumes"][0][0], 0.5);
}

#[test]
fn hausdorff_between_files_and_trajectory_events() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    fs::write(&a, r#"{"dim": 2, "points": [[0, 0], [1, 0]]}"#).unwrap();
    fs::write(&b, r#"{"dim": 2, "points": [[0, 0], [0, 3]]}"#).unwrap();
    for extra in [&[][..], &["--indexed"][..]] {
        let mut args = vec!["hausdorff", a.to_str().unwrap(), b.to_str().unwrap()];
        args.extend_from_slice(extra);
        let out = bconf(&args);
        assert!(out.status.success());
        assert_eq!(json(&out)["distance"], 3.0);
    }

    let t = dir.path().join("t.json");
    fs::write(
        &t,
        r#"{"times": [0, 1, 2], "frames": [
            {"dim": 1, "points": [[0]]},
            {"dim": 1, "points": [[-0.1], [0.1]]},
            {"dim": 1, "points": [[-0.2], [0.2]]}]}"#,
    )
    .unwrap();
    let out = bconf(&[
        "hausdorff",
        "--trajectory",
        t.to_str().unwrap(),
        "--merge-tol",
        "0.2",
    ]);
    assert!(out.status.success());
    let ev: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(ev["kind"], "split");
    assert_eq!(ev["t"], 1.0);
    let out = bconf(&[
        "hausdorff",
        "--trajectory",
        t.to_str().unwrap(),
        "--merge-tol",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let out = bconf(&["hausdorff", "--trajectory", t.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn chart_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("u.json");
    fs::write(&p, r#"{"dim": 1, "points": [[0], [1], [3]]}"#).unwrap();
    let out = bconf(&["chart", p.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["disjoint"], true);
    assert_eq!(v["chart"]["radii"], serde_json::json!([0.5, 0.5, 1.0]));
    fs::write(&p, r#"{"dim": 1, "points": [[0], [0]]}"#).unwrap();
    assert_eq!(
        bconf(&["chart", p.to_str().unwrap()]).status.code(),
        Some(3)
    );
}

#[test]
fn exit_codes() {
    assert_eq!(bconf(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        bconf(&["section", "--field", "2 +* x"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bconf(&["section", "--field", "5 + x"]).status.code(),
        Some(3)
    );
    assert_eq!(
        bconf(&["bifurcate", "--format", "dot"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bconf(&["--tol-eq", "-1", "bifurcate"]).status.code(),
        Some(2)
    );
    assert_eq!(
        bconf(&["hausdorff", "/no/such/a.json", "/no/such/b.json"])
            .status
            .code(),
        Some(4)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(
        bconf(&["hausdorff", bad.to_str().unwrap(), bad.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn version_and_schema_are_json() {
    let v = json(&bconf(&["--version"]));
    assert_eq!(v["name"], "bconf");
    assert!(v["version"].is_string());
    let s = json(&bconf(&["--schema"]));
    for key in [
        "configuration",
        "trajectory",
        "chart",
        "branched_path",
        "section",
        "grid_function",
    ] {
        assert!(s.get(key).is_some(), "{key}");
    }
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("diagram.csv");
    let out = bconf(&["bifurcate", "--steps", "4", "-o", p.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(fs::read_to_string(p).unwrap().starts_with("A,x\n"));
}
