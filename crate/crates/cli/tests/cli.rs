use std::path::Path;
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccpd-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn geometry_prints_both_tables() {
    let out = bench(&["geometry", "--preset", "B-1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("transmit array (J = 49)"));
    assert!(text.contains("receive array (I = 25)"));
    let rows = text.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 49 + 25);
}

#[test]
fn noiseless_run_writes_exact_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = bench(&[
        "run", "--preset", "A-1", "--snr", "inf", "--trials", "1", "--seed", "42",
        "--methods", "ccpd-jevd", "--out", path.to_str().unwrap(), "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&path);
    assert_eq!(rows[0], "experiment,snr_db,method,trial,mae_rad,cpu_seconds,converged");
    assert_eq!(rows.len(), 2);
    let fields: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(&fields[..4], &["A-1", "inf", "ccpd-jevd", "0"]);
    assert!(fields[4].parse::<f64>().unwrap() < 1e-4);
}

#[test]
fn negative_snr_ranges_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let out = bench(&[
        "run", "--preset", "A-1", "--snr", "-10:0:5", "--trials", "1", "--methods", "ccpd-jevd",
        "--no-timing", "--out", path.to_str().unwrap(), "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = lines(&path);
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("A-1,-10.0,"));
    assert!(rows.iter().skip(1).all(|r| r.split(',').nth(5) == Some("0.0")));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "trials = 2\nsnr = \"inf\"\nmethods = [\"ccpd-jevd\", \"ccpd-als-alg\"]\ntiming = false\nout = {:?}\n",
            path.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = bench(&[
        "run", "--preset", "A-1", "--trials", "5", "--snr", "0", "--methods", "ccpd-als-rand",
        "--config", cfg.to_str().unwrap(), "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r["snr_db"] == "inf" && r["cpu_seconds"] == 0.0));
    assert_eq!(records[0]["method"], "ccpd-jevd");
    assert_eq!(records[2]["method"], "ccpd-als-alg");
}

#[test]
fn summary_lists_each_group() {
    let out = bench(&["run", "--preset", "A-1", "--snr", "inf", "--trials", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# A-1 (overdetermined), I=13 J=27 K=8 R=10 T=64"));
    for m in ["ccpd-jevd", "ccpd-als-alg", "ccpd-als-rand"] {
        assert!(text.contains(m));
    }
}

#[test]
fn violated_conditions_warn_but_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "r = 12\nk = 1\nsnr = \"inf\"\ntrials = 1\nmethods = [\"ccpd-als-rand\"]\n").unwrap();
    let out = bench(&["run", "--config", cfg.to_str().unwrap(), "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("working conditions violated"));
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let conflict = write("conflict.toml", "preset = \"A-1\"\ni = 25\n");
    let unknown = write("unknown.toml", "colour = \"red\"\n");
    let zero = write("zero.toml", "trials = 0\n");
    for args in [
        vec!["run", "--preset", "Z-9"],
        vec!["run", "--methods", "ccpd-magic"],
        vec!["run", "--snr", "5:1:1"],
        vec!["run", "--config", conflict.to_str().unwrap()],
        vec!["run", "--config", unknown.to_str().unwrap()],
        vec!["run", "--config", zero.to_str().unwrap()],
        vec!["run", "--config", "/nonexistent/run.toml"],
        vec!["geometry", "--preset", "C-4"],
    ] {
        let out = bench(&args);
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}

#[test]
fn unwritable_output_exits_nonzero() {
    let out = bench(&[
        "run", "--snr", "inf", "--trials", "1", "--methods", "ccpd-jevd", "--out", "/nonexistent/dir/out.csv",
    ]);
    assert!(!out.status.success());
}
