//! End-to-end runs of the `boxann` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn boxann(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxann"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Builds `points` with `eps` and returns the index path.
fn build(dir: &TempDir, name: &str, points: &str, eps: &str) -> PathBuf {
    let input = write(dir, &format!("{name}.txt"), points);
    let out = dir.path().join(format!("{name}.idx"));
    let o = boxann(&["build", path_str(&input), "--eps", eps, "-o", path_str(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn grid_points(n: usize) -> String {
    // Deterministic scattered points in the unit square.
    (0..n)
        .map(|i| {
            let x = (i as f64 * 0.618_034) % 1.0;
            let y = (i as f64 * 0.414_214 + 0.1) % 1.0;
            format!("{x} {y}\n")
        })
        .collect()
}

#[test]
fn build_writes_header_and_stats() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "two.txt", "# two sites\n0 0\n\n2 0\n");
    let out = dir.path().join("two.idx");
    let o = boxann(&["build", path_str(&input), "--eps", "0.5", "-o", path_str(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "VBOXTREE 1");
    assert!(lines.contains(&"dim 2"));
    assert!(lines.contains(&"sites 2"));
    let report = stdout(&o);
    for key in ["main_nodes=", "main_max_depth=", "cell_tests=", "lp_calls="] {
        assert!(report.lines().any(|l| l.starts_with(key)), "missing {key}");
    }
}

#[test]
fn build_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.idx");
    let empty = write(&dir, "empty.txt", "# nothing\n\n");
    let o = boxann(&["build", path_str(&empty), "--eps", "0.5", "-o", path_str(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no points"));

    let bad = write(&dir, "bad.txt", "0 0\n1 x\n");
    let o = boxann(&["build", path_str(&bad), "--eps", "0.5", "-o", path_str(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let mixed = write(&dir, "mixed.txt", "0 0\n1 1 1\n");
    let o = boxann(&["build", path_str(&mixed), "--eps", "0.5", "-o", path_str(&out)]);
    assert!(!o.status.success());
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let pts = grid_points(30);
    let a = build(&dir, "a", &pts, "0.2");
    let b = build(&dir, "b", &pts, "0.2");
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn query_outputs() {
    let dir = TempDir::new().unwrap();
    let one = build(&dir, "one", "1 1\n", "0.5");
    let o = boxann(&["query", path_str(&one), "0.3 0.9"]);
    assert!(stdout(&o).starts_with("sprime=0 exact=true"));

    let two = build(&dir, "two", "0 0\n2 0\n", "0.5");
    let o = boxann(&["query", path_str(&two), "1 0"]);
    assert!(stdout(&o).starts_with("sprime=0,1 exact=false"));
    let o = boxann(&["query", path_str(&two), "1000 0"]);
    assert!(stdout(&o).starts_with("sprime=1 exact=true nodes_visited=0"));
    let o = boxann(&["query", path_str(&two), "0 0", "--hash-locate"]);
    assert!(stdout(&o).starts_with("sprime=0 "));

    let o = boxann(&["query", path_str(&two), "1 2 3"]);
    assert!(!o.status.success());
}

#[test]
fn check_is_complete_and_repeatable() {
    let dir = TempDir::new().unwrap();
    let idx = build(&dir, "c", &grid_points(40), "0.15");
    let args = ["check", path_str(&idx), "--queries", "300", "--seed", "5", "--samples", "2000"];
    let a = boxann(&args);
    assert!(a.status.success());
    assert!(stdout(&a).lines().any(|l| l == "completeness=1"));
    assert_eq!(stdout(&a), stdout(&boxann(&args)));

    let one = build(&dir, "one", "0.5 0.5\n", "0.5");
    let o = boxann(&["check", path_str(&one), "--queries", "100"]);
    assert!(stdout(&o).lines().any(|l| l == "exact=1"));
}

#[test]
fn viz_writes_svg() {
    let dir = TempDir::new().unwrap();
    let idx = build(&dir, "v", "0 0\n2 0\n", "0.5");
    let svg = dir.path().join("v.svg");
    let o = boxann(&["viz", path_str(&idx), path_str(&svg), "--aux-leaf", "0"]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
    assert!(text.contains("<polygon"));

    let line = build(&dir, "line", "0\n1\n", "0.5");
    let o = boxann(&["viz", path_str(&line), path_str(&svg)]);
    assert!(!o.status.success());
}

#[test]
fn bench_respects_the_bound() {
    let dir = TempDir::new().unwrap();
    let idx = build(&dir, "b", &grid_points(100), "0.1");
    let args = ["bench", path_str(&idx), "--queries", "1000", "--seed", "3"];
    let a = boxann(&args);
    assert!(a.status.success());
    assert!(stdout(&a).lines().any(|l| l == "bound_violations=0"));
    let counters = |s: String| s.lines().filter(|l| l.starts_with("nodes_visited")).map(String::from).collect::<Vec<_>>();
    assert_eq!(counters(stdout(&a)), counters(stdout(&boxann(&args))));

    let one = build(&dir, "one", "0.5 0.5\n", "0.5");
    let o = boxann(&["bench", path_str(&one), "--queries", "100"]);
    assert!(stdout(&o)
        .lines()
        .any(|l| l == "nodes_visited_mean=1 nodes_visited_median=1 nodes_visited_p99=1"));
}

#[test]
fn experiment_reports() {
    let o = boxann(&["experiment", "--n", "50", "--eps", "0.3", "--trials", "10", "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("measured_mean="));
}
