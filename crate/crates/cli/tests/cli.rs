use std::path::Path;
use std::process::{Command, Output};

fn cutpoints(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutpoints")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows as header-keyed maps.
fn rows(csv_text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let header = r.headers().unwrap().clone();
    r.records().map(|rec| header.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.into(), v.into())).collect()).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().into()
}

#[test]
fn exact_p_canonical() {
    let o = cutpoints(&["exact", "--beta", "2", "--op", "p", "--k", "10"]);
    assert!(o.status.success());
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r["schema_version"], "1");
    assert_eq!(r["quantity"], "p");
    let p: f64 = r["estimate"].parse().unwrap();
    // r_10 / t_10 for beta = 2
    assert!((p - 0.042478377).abs() < 1e-8, "{p}");
    assert!(r["abs_err"].parse::<f64>().unwrap() < 1e-9);
}

#[test]
fn uniform_profile_file() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "uniform.txt", "# three unit resistors\n1\n1\n1\n");
    let o = cutpoints(&["exact", "--profile", &f, "--op", "q", "--j", "1", "--k", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let q: f64 = rows(&stdout(&o))[0]["estimate"].parse().unwrap();
    assert!((q - 1.0 / 3.0).abs() < 1e-15);

    let o = cutpoints(&["exact", "--profile", &f, "--op", "hit", "--k", "2", "--n", "4", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["schema_version"], 1);
    assert!((v[0]["estimate"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn experiment_output_is_reproducible_across_threads() {
    let base = ["experiment", "--beta", "2", "--summability", "--m", "2:4", "--reps", "3000", "--seed", "11"];
    let a = cutpoints(&base);
    assert!(a.status.success());
    let b = cutpoints(&base);
    let mut threaded = vec!["--threads", "3"];
    threaded.extend(base);
    let c = cutpoints(&threaded);
    let mut single = base.to_vec();
    single.extend(["--threads", "1"]);
    let d = cutpoints(&single);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_eq!(a.stdout, d.stdout);
    let rows = rows(&stdout(&a));
    assert_eq!(rows.last().unwrap()["quantity"], "note");
    assert_eq!(rows.len(), 4);

    let census =
        ["experiment", "--beta", "2", "--census", "--levels", "3,9", "--pairs", "4:8", "--reps", "2000", "--seed", "5"];
    let mut threaded = vec!["--threads", "2"];
    threaded.extend(census);
    assert_eq!(cutpoints(&census).stdout, cutpoints(&threaded).stdout);
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(cutpoints(&["exact", "--op", "p", "--k", "3"]).status.code(), Some(2));
    assert_eq!(cutpoints(&["exact", "--beta", "2", "--op", "q", "--k", "3"]).status.code(), Some(2));
    assert_eq!(cutpoints(&["cutpoints", "--beta", "2", "--k", "3"]).status.code(), Some(2));
    assert_eq!(cutpoints(&["experiment", "--beta", "2", "--reps", "10", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(cutpoints(&["nonsense"]).status.code(), Some(2));

    // computation errors come with an error record
    let o = cutpoints(&["exact", "--beta", "1", "--op", "p", "--k", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let r = &rows(&stdout(&o))[0];
    assert_eq!(r["quantity"], "error");
    assert_eq!(r["status"], "divergent-tail");

    let o = cutpoints(&["exact", "--beta", "2", "--op", "q", "--j", "5", "--k", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(rows(&stdout(&o))[0]["status"], "invalid-arguments");

    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "bad.txt", "1\n-1\n");
    let o = cutpoints(&["exact", "--profile", &f, "--op", "r", "--k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(rows(&stdout(&o))[0]["status"], "invalid-profile");
}

#[test]
fn trajectory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("walk.txt");
    let t = t.to_str().unwrap();
    let o = cutpoints(&["simulate", "--beta", "2", "--first-passage", "40", "--seed", "9", "--out", t]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(t).unwrap();
    assert!(text.starts_with("# trajectory v1\n"));
    let states: Vec<u32> = text.lines().filter(|l| !l.starts_with('#')).map(|l| l.parse().unwrap()).collect();
    assert_eq!(states[0], 1);
    assert_eq!(*states.last().unwrap(), 40);

    // same seed, same file
    let again = dir.path().join("again.txt");
    cutpoints(&["simulate", "--beta", "2", "--first-passage", "40", "--seed", "9", "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read_to_string(&again).unwrap(), text);

    // the file's path gives the same censored pattern as sampling it directly
    let from_file = cutpoints(&["cutpoints", "--beta", "2", "--trajectory", t, "--k", "10", "--strong"]);
    let sampled = cutpoints(&[
        "cutpoints",
        "--beta",
        "2",
        "--k",
        "10",
        "--n",
        "40",
        "--method",
        "censored",
        "--seed",
        "9",
        "--strong",
    ]);
    assert!(from_file.status.success() && sampled.status.success());
    let (a, b) = (rows(&stdout(&from_file)), rows(&stdout(&sampled)));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        for col in ["quantity", "k", "n", "estimate", "abs_err", "status"] {
            assert_eq!(x[col], y[col], "{col}");
        }
    }
    // a cut level never comes back once its successor is reached
    for r in a.iter().filter(|r| r["quantity"] == "cut" && r["status"] == "cut") {
        let k: u32 = r["k"].parse().unwrap();
        let first_up = states.iter().position(|&s| s == k + 1).unwrap();
        assert!(!states[first_up..].contains(&k));
    }
}

#[test]
fn tree_and_stacks_report_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "tree.txt", "root 1\nabsorb 6\n1 2\n2 3\n2 4 2.5\n4 5\n4 6 0.5\n3 7\n");
    let o = cutpoints(&["tree", "--tree", &f, "--seed", "3", "--leaf-orders", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows_t = rows(&stdout(&o));
    let recon: Vec<_> = rows_t.iter().filter(|r| r["quantity"] == "reconstruct_m").collect();
    assert_eq!(recon.len(), 5);
    assert!(recon.iter().all(|r| r["status"] == "match"));
    assert!(rows_t.iter().any(|r| r["quantity"] == "infer_u" && r["status"] == "match"));
    let l = rows_t.iter().find(|r| r["quantity"] == "L").unwrap();
    assert_eq!(l["derived"], "1 2 4 6");

    let o = cutpoints(&["stacks", "--tree", &f, "--seed", "3", "--reorderings", "6"]);
    assert!(o.status.success());
    let rows_s = rows(&stdout(&o));
    let checks: Vec<_> = rows_s.iter().filter(|r| r["quantity"] == "reorder" || r["quantity"] == "resample").collect();
    assert_eq!(checks.len(), 12);
    assert!(checks.iter().all(|r| r["status"] == "invariant"));
}
