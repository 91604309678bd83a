use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colt-ot")).args(args).output().unwrap()
}

fn field(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

fn asset(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(name).display().to_string()
}

#[test]
fn w1_1d_reports_against_the_oracle() {
    let out = run(&["w1-1d", "--n", "40", "--outer", "200", "--oracle"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let err: f64 = field(&out, "rel_error").parse().unwrap();
    assert!(err < 1e-3);
    assert_eq!(field(&out, "solver"), "fs2");
}

#[test]
fn w1_1d_reads_csv_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let (s, t) = (dir.path().join("s.csv"), dir.path().join("t.csv"));
    std::fs::write(&s, "# source\n1\n0\n0\n0\n").unwrap();
    std::fs::write(&t, "0\n0\n0\n1\n").unwrap();
    let out = run(&["w1-1d", "--source", s.to_str().unwrap(), "--target", t.to_str().unwrap(), "--outer", "300"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let w: f64 = field(&out, "w1").parse().unwrap();
    assert!((w - 3.0).abs() < 1e-3, "{w}");
}

#[test]
fn w1_2d_and_dense_solvers_agree() {
    let a = run(&["w1-2d", "--n", "6", "--m", "5", "--seed", "4", "--outer", "50"]);
    let b = run(&["w1-2d", "--n", "6", "--m", "5", "--seed", "4", "--outer", "50", "--solver", "ipot"]);
    assert!(a.status.success() && b.status.success());
    let (x, y): (f64, f64) = (field(&a, "w1").parse().unwrap(), field(&b, "w1").parse().unwrap());
    assert!((x - y).abs() < 1e-12);
    assert_eq!(field(&a, "size"), "6x5");
}

#[test]
fn image_w1_runs_on_bundled_assets() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "image-w1",
        &asset("rings.pgm"),
        &asset("blobs.pgm"),
        "--n",
        "8",
        "--m",
        "8",
        "--outer",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(field(&out, "trace")).unwrap();
    assert_eq!(trace.lines().count(), 31);
    assert!(trace.starts_with("outer,iterations,w1,"));
}

#[test]
fn exit_codes_follow_error_kind() {
    assert_eq!(run(&["w1-1d", "--n", "1"]).status.code(), Some(1));
    assert_eq!(run(&["w1-1d", "--n", "50", "--delta", "1e-6"]).status.code(), Some(2));
    assert_eq!(run(&["image-w1", "/nonexistent/a.pgm", "/nonexistent/b.pgm"]).status.code(), Some(3));
    let bad = run(&["w1-1d", "--n", "50", "--delta", "1e-6"]);
    assert!(!String::from_utf8_lossy(&bad.stderr).is_empty());
}

#[test]
fn bench_is_deterministic_apart_from_timings() {
    let summary = |dir: &Path| {
        let out = run(&[
            "bench",
            "--problem",
            "random2d",
            "--n",
            "4,5",
            "--solver",
            "ipot,fs2,fs1",
            "--outer",
            "20",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(field(&out, "failed_cells"), "0");
        let text = std::fs::read_to_string(field(&out, "summary")).unwrap();
        // drop median_s, mean_s and speed-up
        text.lines()
            .map(|l| l.rsplitn(4, ',').last().unwrap().to_string())
            .collect::<Vec<_>>()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (x, y) = (summary(a.path()), summary(b.path()));
    assert_eq!(x.len(), 7);
    assert_eq!(x, y);
}

#[test]
fn fit_recovers_the_exponent() {
    let out = run(&["fit", "--sizes", "10,100,1000", "--times", "0.2,2,20"]);
    assert!(out.status.success());
    let slope: f64 = field(&out, "slope").parse().unwrap();
    assert!((slope - 1.0).abs() < 1e-12);
}
