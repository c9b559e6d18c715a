use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdastream"))
}

fn run(args: &[&str], stdin: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin).unwrap();
    child.wait_with_output().unwrap()
}

fn read_curve(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn bound_table() {
    let out = run(&["bound"], b"");
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 21);
    let row = text.lines().find(|l| l.starts_with("5,")).unwrap();
    let d1: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((d1 - 0.96455).abs() < 1e-4);
}

#[test]
fn resume_equals_one_shot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = run(
        &["simulate", "--design", "sparse", "--K", "3", "--seed", "7"],
        b"",
    );
    assert!(sim.status.success());
    let lines: Vec<&[u8]> = sim.stdout.split_inclusive(|&c| c == b'\n').collect();
    assert_eq!(lines.len(), 3);
    let s = |p: &str| d.join(p).to_str().unwrap().to_string();

    let one = run(
        &[
            "fit",
            "--snapshot",
            &s("one.snap"),
            "--out-dir",
            &s("one"),
            "--L",
            "3",
        ],
        &sim.stdout,
    );
    assert!(
        one.status.success(),
        "{}",
        String::from_utf8_lossy(&one.stderr)
    );
    let head = run(&["fit", "--snapshot", &s("two.snap"), "--L", "3"], lines[0]);
    assert!(head.status.success());
    let tail = run(
        &[
            "resume",
            "--snapshot",
            &s("two.snap"),
            "--out-dir",
            &s("two"),
        ],
        &lines[1..].concat(),
    );
    assert!(tail.status.success());

    let a = read_curve(&d.join("one/mean.csv"));
    let b = read_curve(&d.join("two/mean.csv"));
    assert_eq!(a.len(), 101);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-12);
    }
    assert_eq!(
        std::fs::read(d.join("one.snap")).unwrap(),
        std::fs::read(d.join("two.snap")).unwrap()
    );
}

#[test]
fn empty_stream_writes_initial_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.snap");
    let out = run(&["fit", "--snapshot", path.to_str().unwrap()], b"");
    assert!(out.status.success());
    let est = fdastream::snapshot::load(&path).unwrap();
    assert_eq!(est.blocks(), 0);
}

#[test]
fn bad_input_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.snap");
    let out = run(
        &["fit", "--snapshot", path.to_str().unwrap()],
        b"{\"block_id\":1,\"subjects\":[{\"t\":[0.2],\"y\":[1.0,2.0]}]}\n",
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert!(!path.exists());
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "L = 2\ncurve_points = 21\nsurface_points = 11\n").unwrap();
    let snap = dir.path().join("s.snap");
    let sim = run(&["simulate", "--K", "2"], b"");
    let out = run(
        &[
            "fit",
            "--config",
            cfg.to_str().unwrap(),
            "--curve-points",
            "31",
            "--snapshot",
            snap.to_str().unwrap(),
        ],
        &sim.stdout,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let est = fdastream::snapshot::load(&snap).unwrap();
    assert_eq!(est.config().slots_mean, 2);
    assert_eq!(est.config().curve_grid.len(), 31);
    assert_eq!(est.config().surface_grid.len(), 11);
}

#[test]
fn batch_fit_then_fpca() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = run(&["simulate", "--K", "4", "--seed", "2"], b"");
    let out = run(
        &[
            "batch-fit",
            "--out-dir",
            d.to_str().unwrap(),
            "--surface-points",
            "21",
        ],
        &sim.stdout,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let cov = d.join("cov.csv");
    let out = run(
        &[
            "fpca",
            "--surface",
            cov.to_str().unwrap(),
            "--components",
            "2",
        ],
        b"",
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,phi1,phi2"));
    assert!(lines.next().unwrap().starts_with("eigenvalue,"));
    assert!(lines.next().unwrap().starts_with("fve,"));
    assert_eq!(lines.count(), 21);
}
