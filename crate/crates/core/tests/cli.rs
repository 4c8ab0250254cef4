use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bpm_artifact::io::{load_model, read_model_metadata, save_model};

const BIN: &str = env!("CARGO_BIN_EXE_bpm-artifact");

/// Small, fast settings shared by every test.
const SMALL: &[&str] = &[
    "--set",
    "n_records=20",
    "--set",
    "record_len=240",
    "--set",
    "epochs=2",
    "--set",
    "hidden_dim=8",
    "--set",
    "latent_dim=4",
    "--set",
    "batch_size=32",
];

fn run(args: &[&str]) -> Output {
    let out = Command::new(BIN)
        .arg(args[0])
        .args(SMALL)
        .args(&args[1..])
        .output()
        .expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

#[test]
fn synth_twice_gives_identical_trees() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("nested/missing/b"));
    ok(&["synth", "--set", "seed=7", "--out", s(&a)]);
    ok(&["synth", "--set", "seed=7", "--out", s(&b)]);
    let (ta, tb) = (tree(&a), tree(&b));
    assert_eq!(ta.len(), 20 + 3);
    assert!(ta.contains_key(Path::new("records/rec0019.csv")));
    assert!(ta.contains_key(Path::new("manifest.csv")));
    assert!(ta.contains_key(Path::new("generation_log.csv")));
    assert_eq!(ta, tb);

    let c = tmp.path().join("c");
    ok(&["synth", "--set", "seed=8", "--out", s(&c)]);
    assert_ne!(
        tree(&c).get(Path::new("records/rec0000.csv")),
        ta.get(Path::new("records/rec0000.csv"))
    );
}

#[test]
fn resolved_config_is_dumped_and_reloadable() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    ok(&["synth", "--seed", "3", "--out", s(&out)]);
    let dump = std::fs::read_to_string(out.join("resolved_config.txt")).unwrap();
    assert!(dump.contains("seed=3\n"));
    assert!(dump.contains("n_records=20\n"));
    let again = tmp.path().join("again");
    let o = Command::new(BIN)
        .args([
            "synth",
            "--config",
            s(&out.join("resolved_config.txt")),
            "--out",
            s(&again),
        ])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(tree(&out), tree(&again));
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for bad in ["bogus=1", "epochs=many", "flatline_on=sideways"] {
        let o = run(&["synth", "--set", bad, "--out", s(tmp.path())]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "# ok\nunknown_key=3\n").unwrap();
    let o = run(&["synth", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_round_trips_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data)]);
    let d = format!("data_dir={}", s(&data));
    for (kind, extra) in [("ae", "beta=0"), ("vae", "beta=0.1")] {
        let a = tmp.path().join(format!("{kind}_a"));
        let b = tmp.path().join(format!("{kind}_b"));
        for out in [&a, &b] {
            ok(&[
                "train",
                "--set",
                &d,
                "--set",
                &format!("kind={kind}"),
                "--set",
                extra,
                "--out",
                s(out),
            ]);
        }
        let bytes = std::fs::read(a.join("model.bpm")).unwrap();
        let params = load_model(&bytes).unwrap();
        assert_eq!(save_model(&params), bytes);
        assert_eq!(read_model_metadata(&bytes).unwrap().arch.window_len, 60);
        assert_eq!(bytes, std::fs::read(b.join("model.bpm")).unwrap());
        let trace = std::fs::read_to_string(a.join("loss_trace.csv")).unwrap();
        assert_eq!(trace.lines().count(), 1 + 2);
    }
    let o = run(&[
        "train",
        "--set",
        &d,
        "--set",
        "kind=arima",
        "--out",
        s(&tmp.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_threshold(path: &Path, value: f64) {
    std::fs::write(
        path,
        format!("model_id=arima\nvalidation_id=manual\nq=98\nvalue={value}\n"),
    )
    .unwrap();
}

#[test]
fn detect_labels_a_long_flatline_entirely() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = tmp.path().join("flat.csv");
    let mut text = String::from("time_min,bpm,label\n");
    for t in 0..100 {
        text.push_str(&format!("{t},72.5,1\n"));
    }
    std::fs::write(&rec, text).unwrap();
    let thr = tmp.path().join("t.threshold");
    write_threshold(&thr, 1.0);
    let out = tmp.path().join("det");
    ok(&[
        "detect",
        "--set",
        "kind=arima",
        "--set",
        &format!("threshold={}", s(&thr)),
        "--out",
        s(&out),
        s(&rec),
    ]);
    let labels = std::fs::read_to_string(out.join("labels/flat.csv")).unwrap();
    let rows: Vec<&str> = labels.lines().skip(1).collect();
    assert_eq!(rows.len(), 100);
    assert!(
        rows.iter().all(|r| r.split(',').nth(2) == Some("1")),
        "{labels}"
    );
    let report = std::fs::read_to_string(out.join("detection_report.csv")).unwrap();
    assert!(report.contains("flat,ok,100,100,0,100"), "{report}");
}

#[test]
fn detect_without_threshold_or_validation_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let rec = tmp.path().join("r.csv");
    std::fs::write(&rec, "time_min,bpm,label\n0,80,0\n1,81,0\n").unwrap();
    let o = run(&[
        "detect",
        "--set",
        "kind=arima",
        "--out",
        s(&tmp.path().join("o")),
        s(&rec),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn clean_records_at_q98_stay_near_two_percent() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("clean");
    let clean = [
        "--set",
        "spike_rate=0",
        "--set",
        "flatline_rate=0",
        "--set",
        "missing_rate=0",
        "--set",
        "n_records=40",
    ];
    let mut args = vec!["synth", "--out", s(&data)];
    args.extend(clean);
    ok(&args);
    let out = tmp.path().join("det");
    let d = format!("data_dir={}", s(&data));
    let mut args = vec![
        "detect",
        "--set",
        "kind=arima",
        "--set",
        "q=98",
        "--set",
        &d,
        "--out",
        s(&out),
    ];
    args.extend(clean);
    ok(&args);
    let report = std::fs::read_to_string(out.join("detection_report.csv")).unwrap();
    let (mut n, mut flat, mut spike, mut fused) = (0usize, 0usize, 0usize, 0usize);
    for row in report.lines().skip(2) {
        let f: Vec<usize> = row.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        n += f[0];
        flat += f[1];
        spike += f[2];
        fused += f[3];
    }
    assert!(n >= 8 * 240, "{report}");
    // Pooled exceedance of a 98th percentile calibrated on held-out clean
    // records: 2% plus three binomial standard deviations.
    let p = 0.02;
    let bound = p + 3.0 * (p * (1.0 - p) / n as f64).sqrt() + flat as f64 / n as f64;
    assert!(
        (fused as f64 / n as f64) <= bound,
        "fused {fused}/{n} spike {spike} flat {flat}"
    );
}

#[test]
fn detect_and_evaluate_agree_on_row_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data)]);
    let d = format!("data_dir={}", s(&data));
    let det = tmp.path().join("det");
    ok(&[
        "detect",
        "--set",
        "kind=arima",
        "--set",
        &d,
        "--out",
        s(&det),
    ]);
    let manifest = std::fs::read_to_string(data.join("manifest.csv")).unwrap();
    let test_ids: Vec<&str> = manifest
        .lines()
        .filter(|l| l.contains(",test,"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    for id in &test_ids {
        let input = std::fs::read_to_string(data.join(format!("records/{id}.csv"))).unwrap();
        let labels = std::fs::read_to_string(det.join(format!("labels/{id}.csv"))).unwrap();
        assert_eq!(input.lines().count(), labels.lines().count(), "{id}");
    }
    let ev = tmp.path().join("ev");
    ok(&[
        "evaluate",
        "--set",
        &d,
        "--set",
        &format!("labels_dir={}", s(&det.join("labels"))),
        "--out",
        s(&ev),
    ]);
    let table = std::fs::read_to_string(ev.join("evaluation.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + test_ids.len() + 1);
    assert!(table.lines().last().unwrap().starts_with("pooled,"));
}

#[test]
fn sweep_resumes_from_job_files() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(&["synth", "--out", s(&data)]);
    let d = format!("data_dir={}", s(&data));
    let out = tmp.path().join("sw");
    let args = [
        "sweep",
        "--set",
        &d,
        "--set",
        "beta_grid=0.1,0.6",
        "--set",
        "q_grid=90,98",
        "--set",
        "seeds=1",
        "--out",
        s(&out),
    ];
    ok(&args);
    let first = tree(&out);
    let table = String::from_utf8(first[Path::new("table.csv")].clone()).unwrap();
    assert_eq!(table.lines().count(), 1 + 4);
    let sweep_rows = String::from_utf8(first[Path::new("sweep.csv")].clone()).unwrap();
    assert_eq!(sweep_rows.lines().count(), 1 + 8);

    // A finished job is reused: tampering with its counts shows up verbatim.
    let job = out.join("jobs/arima.counts.csv");
    let text = std::fs::read_to_string(&job).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut f: Vec<String> = lines[4].split(',').map(String::from).collect();
    f[2] = "0".into();
    lines[4] = f.join(",");
    std::fs::write(&job, lines.join("\n") + "\n").unwrap();
    ok(&args);
    let tampered = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_ne!(tampered, sweep_rows);

    // A deleted or foreign job file is recomputed, restoring the original bytes.
    std::fs::remove_file(&job).unwrap();
    let model = out.join("jobs/vae_b0.1_s1.counts.csv");
    let foreign = std::fs::read_to_string(&model)
        .unwrap()
        .replace("fingerprint=", "fingerprint=stale");
    std::fs::write(&model, foreign).unwrap();
    ok(&args);
    assert_eq!(tree(&out), first);
}
