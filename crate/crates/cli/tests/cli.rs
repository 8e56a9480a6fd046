use std::path::Path;
use std::process::{Command, Output};

fn rawq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rawq"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run rawq")
}

fn tpch_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = rawq(dir.path(), &["datagen", "--tpch", "--sf", "0.01", "--out", "."]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

const REVENUE: &str = "SELECT l_orderkey, sum(l_extendedprice * (1 - l_discount)) as revenue \
    FROM orders, lineitem WHERE l_orderkey = o_orderkey and o_orderdate >= '1995-01-01' \
    GROUP BY l_orderkey ORDER BY revenue LIMIT 5";

#[test]
fn query_prints_five_rows() {
    let dir = tpch_dir();
    let out = rawq(dir.path(), &["--workers", "4", "query", REVENUE]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "l_orderkey|revenue");
    assert_eq!(lines.len(), 7);
    assert_eq!(lines[6], "(5 rows)");
}

#[test]
fn explain_prints_tree() {
    let dir = tpch_dir();
    let out = rawq(dir.path(), &["explain", REVENUE]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("head(5)\n"));
    assert!(text.contains("merge_join(o_orderkey = l_orderkey, indexed)"));
}

#[test]
fn malformed_sql_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = rawq(dir.path(), &["query", "select from where"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
}

#[test]
fn other_errors_exit_with_one() {
    let dir = tpch_dir();
    let out = rawq(dir.path(), &["query", "select x from nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    let out = rawq(dir.path(), &["--strategy", "bogus", "query", "select 1 from orders"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn repl_survives_errors() {
    use std::io::Write;
    use std::process::Stdio;
    let dir = tpch_dir();
    let mut child = Command::new(env!("CARGO_BIN_EXE_rawq"))
        .current_dir(dir.path())
        .arg("repl")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"nonsense;\nselect count(*) as n\n  from region;\nquit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("n\n5\n(1 rows)"), "{stdout}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax error"));
}

#[test]
fn datagen_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = rawq(
            dir.path(),
            &["datagen", "--dist", "hhit_shf", "--r", "2000", "--c", "50", "--seed", "9", "--out", name],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 2000);
}

#[test]
fn bench_writes_verified_report() {
    let dir = tpch_dir();
    let out = rawq(
        dir.path(),
        &["--workers", "2", "bench", "--suite", "tpch", "--sf", "0.01", "--verify", "--out", "report.txt"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines.len(), 5);
    for l in lines {
        assert!(l.contains("verified=yes") && l.contains("workers=2"), "{l}");
    }
}
