use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn seqdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqdiff")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data.csv");
    let o = seqdiff(&["simulate", "--n", "250", "--gamma", "0.5", "--phi", "0.8", "--phi-prime", "0.8", "--seed", "1", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,s,y"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 250);
    assert!(rows.iter().all(|r| r.ends_with(",0") || r.ends_with(",1")));
}

#[test]
fn simulate_to_stdout_is_deterministic() {
    let a = seqdiff(&["simulate", "--n", "50", "--seed", "9"]);
    let b = seqdiff(&["simulate", "--n", "50", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = seqdiff(&["simulate", "--n", "50", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn usage_errors_exit_one() {
    let o = seqdiff(&["simulate", "--gamma", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--n"));
    assert_eq!(seqdiff(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(seqdiff(&["simulate", "--n", "10", "--phi", "1.5"]).status.code(), Some(1));
    assert_eq!(seqdiff(&["--version"]).status.code(), Some(0));
    assert_eq!(seqdiff(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_label_exits_two_and_names_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "t,s,y\n0,0.1,0\n1,0.2,2\n2,0.3,1\n").unwrap();
    let o = seqdiff(&["test", "--in", path(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));
    let missing = dir.path().join("missing.csv");
    assert_eq!(seqdiff(&["test", "--in", path(&missing)]).status.code(), Some(2));
}

#[test]
fn simulate_then_test_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    let splits = dir.path().join("splits.csv");
    let report = dir.path().join("report.csv");
    let o = seqdiff(&["simulate", "--n", "600", "--gamma", "2", "--seed", "3", "--out", path(&data)]);
    assert!(o.status.success());
    let mut s = String::from("index,set\n");
    for i in 0..600 {
        s += &format!("{i},{}\n", ["t1", "t2", "v"][i / 200]);
    }
    fs::write(&splits, s).unwrap();
    let args = ["test", "--in", path(&data), "--splits", path(&splits), "--B", "99", "--seed", "5", "--report", path(&report)];
    let o = seqdiff(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = fs::read(&report).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,p_value,fallback_count"));
    let values: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(values[0] > 0.0);
    assert_eq!(values[1], 0.01);
    assert_eq!(lines.next(), Some("v_index,s,lpd"));
    assert_eq!(lines.count(), 200);

    // same inputs and seed give a byte-identical report, whatever the thread count
    let o = seqdiff(&[&args[..], &["--threads", "3"]].concat());
    assert!(o.status.success());
    assert_eq!(fs::read(&report).unwrap(), first);
}

#[test]
fn local_and_permutation_variants() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert!(seqdiff(&["simulate", "--n", "450", "--seed", "2", "--out", path(&data)]).status.success());
    let o = seqdiff(&["test", "--in", path(&data), "--null", "permutation", "--B", "49"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("lambda,p_value,fallback_count"));
    let o = seqdiff(&["test", "--in", path(&data), "--B", "49", "--ball-center", "0", "--ball-radius", "0.25"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("lambda,p_value,train_in_ball,null_rate"));
    let o = seqdiff(&["test", "--in", path(&data), "--ball-center", "40", "--ball-radius", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn label_events_from_intensity_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.csv");
    let out = dir.path().join("y.csv");
    fs::write(&input, "t,w\n0,35\n6,45\n12,55\n18,65\n24,75\n30,75\n").unwrap();
    let o = seqdiff(&["label-events", "--in", path(&input), "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(&out).unwrap(), "t,y\n0,1\n6,1\n12,1\n18,1\n24,1\n30,0\n");
    let o = seqdiff(&["label-events", "--in", path(&input), "--direction", "rw"]);
    assert!(String::from_utf8_lossy(&o.stdout).lines().skip(1).all(|l| l.ends_with(",0")));
    let o = seqdiff(&["label-events", "--in", path(&input), "--fine-steps", "12"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1 + 5 * 12 + 1);

    fs::write(&input, "t,w\n0,35\n6,45\n13,55\n").unwrap();
    let o = seqdiff(&["label-events", "--in", path(&input)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));
}

#[test]
fn experiment_writes_tables_and_charts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.cfg");
    fs::write(&config, "# tiny study\nsetting = A\nnull = permutation\ntrials = 30\nsims = 200\n").unwrap();
    let out = dir.path().join("out");
    let o = seqdiff(&["experiment", "validity", "--config", path(&config), "--out", path(&out), "--B", "19", "--svg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["validity_pvalues.csv", "validity_qq.csv", "validity_summary.csv", "validity_band.csv", "validity_permutation.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let pvalues = fs::read_to_string(out.join("validity_pvalues.csv")).unwrap();
    assert_eq!(pvalues.lines().count(), 31);

    let o = seqdiff(&["experiment", "power", "--out", path(&out), "--trials", "5", "--B", "19"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("power.csv")).unwrap().lines().count(), 6);

    fs::write(&config, "bogus = 1\n").unwrap();
    let o = seqdiff(&["experiment", "lpd", "--config", path(&config), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
}
