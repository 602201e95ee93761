use std::process::{Command, Output};

fn slar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slar")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn have_solver() -> bool {
    slar::SolverConfig::from_env().validate().is_ok()
}

#[test]
fn exit_codes_follow_the_verdict() {
    if !have_solver() {
        return;
    }
    let cases = [
        ("Arr(x,x) |- x -> 0, Ex y. y > 0 & x -> y", 0, "valid"),
        ("x -> 0 |- x -> 1", 1, "invalid"),
        ("Arr(1,5) |- Ex y. Arr(1,1+y) * Arr(2+y,5)", 2, "condition-violation"),
    ];
    for (text, expected, label) in cases {
        let out = slar(&["-e", text]);
        assert_eq!(code(&out), expected, "{}", text);
        assert!(String::from_utf8_lossy(&out.stdout).starts_with(label));
    }
}

#[test]
fn unknown_on_exhausted_deadline() {
    if !have_solver() {
        return;
    }
    let out = slar(&["-e", "x -> 0 |- x -> 0", "--no-f", "--entailment-timeout-ms", "0"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn parse_errors_are_usage_errors() {
    let out = slar(&["-e", "x -> 0 * |- emp"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1:10"));
    assert_eq!(code(&slar(&[])), 4);
    assert_eq!(code(&slar(&["--bench", "nonsense", "1", "1"])), 4);
    assert_eq!(code(&slar(&["-e", "emp |- emp", "--solver", "/nonexistent/solver"])), 4);
}

#[test]
fn batch_reports_every_line() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("in.sl");
    std::fs::write(&file, "# sample\ng: 3 -> 10 * 4 -> 11 |- Arr(3, 4)\nc: Arr(1, 5) |- Ex y. Arr(1, 1 + y) * Arr(2 + y, 5)\n").unwrap();
    let out = slar(&[file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("g\tvalid"));
    assert!(lines[1].starts_with("c\tcondition-violation"));
    assert!(lines[2].starts_with("# 2 entailments"));

    let out = slar(&[file.to_str().unwrap(), "--format", "json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["lines"][0]["verdict"], "valid");
    assert_eq!(json["lines"][1]["verdict"], "condition-violation");

    let empty = dir.path().join("empty.sl");
    std::fs::write(&empty, "").unwrap();
    let out = slar(&[empty.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("# 0 entailments"));
}

#[test]
fn dump_directory_receives_scripts() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("smt");
    let out = slar(&["-e", "x -> 0 |- x -> 0", "--no-f", "--no-u", "--dump-smt", dump.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let n = std::fs::read_dir(&dump).unwrap().count();
    assert_eq!(n, 1);
}

#[test]
fn emitted_benchmarks_are_deterministic() {
    let a = slar(&["--bench", "base", "30", "7", "--emit"]);
    let b = slar(&["--bench", "base", "30", "7", "--emit"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 30);
    let c = slar(&["--bench", "base", "30", "8", "--emit"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn oracle_flag_attaches_countermodels() {
    if !have_solver() {
        return;
    }
    let out = slar(&["-e", "x -> 0 |- x -> 1", "--oracle", "2", "2", "--format", "json"]);
    assert_eq!(code(&out), 1);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["verdict"], "invalid");
    assert!(json["countermodel"].as_str().unwrap().contains("heap"));
}
