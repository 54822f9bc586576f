use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tat_core::format::{parse_instance, parse_matrix, write_instance};

fn tat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tat"))
        .args(args)
        .env_remove("TAT_EXACT_CAP")
        .output()
        .expect("spawn tat")
}

fn gen(dir: &Path, name: &str, n: usize, seed: u64) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let out = tat(&[
        "gen",
        "--n",
        &n.to_string(),
        "--d",
        "2",
        "--bound",
        "0.8",
        "--seed",
        &seed.to_string(),
        "--out",
        &path,
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    path
}

#[test]
fn gen_is_byte_stable_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.tat", 8, 7);
    let b = gen(dir.path(), "b.tat", 8, 7);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(write_instance(&parse_instance(&text).unwrap()), text);
    let c = gen(dir.path(), "c.tat", 8, 8);
    assert_ne!(text, fs::read_to_string(c).unwrap());
}

#[test]
fn gen_without_out_writes_stdout() {
    let out = tat(&["gen", "--n", "2", "--d", "1", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("TATINST 2 1\n"));
}

#[test]
fn check_passes_then_fails_when_perturbed() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "i.tat", 8, 7);
    let ok = tat(&["check", "--in", &inst, "--eps", "1e-8", "--tol", "1e-6"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let bad = tat(&[
        "check",
        "--in",
        &inst,
        "--eps",
        "1e-8",
        "--tol",
        "1e-6",
        "--perturb",
        "1e-4",
    ]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("FAIL"));
}

#[test]
fn grad_engines_agree_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "i.tat", 6, 2);
    let mut grads = Vec::new();
    for engine in ["exact", "fast"] {
        let out_path = dir.path().join(format!("{engine}.mat"));
        let out = tat(&[
            "grad",
            "--in",
            &inst,
            "--engine",
            engine,
            "--eps",
            "1e-8",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        grads.push(parse_matrix(&fs::read_to_string(out_path).unwrap()).unwrap());
    }
    assert_eq!(grads[0].shape(), (2, 4));
    assert!(grads[0].max_abs_diff(&grads[1]).unwrap() <= 1e-6);
}

#[test]
fn exact_engine_above_cap_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "i.tat", 8, 1);
    let out = Command::new(env!("CARGO_BIN_EXE_tat"))
        .args(["grad", "--in", &inst, "--engine", "exact"])
        .env("TAT_EXACT_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cap"));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_prints_usage_and_exits_1() {
    let out = tat(&["gen", "--n", "2", "--d", "1", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.tat");
    let out = tat(&["grad", "--in", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_input_is_a_validation_error_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tat");
    fs::write(&path, "TATINST 2 1\nA1\n1.0\nnan\n").unwrap();
    let out = tat(&["grad", "--in", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn bench_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("b.csv");
    let out = tat(&[
        "bench",
        "--n-list",
        "4,8",
        "--engine",
        "both",
        "--repeats",
        "1",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "n",
            "d",
            "eps",
            "degree_g",
            "k1",
            "k5",
            "method",
            "wall_seconds",
            "linf_err_vs_exact",
            "seed"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let methods: Vec<&str> = rows.iter().map(|r| &r[6]).collect();
    assert_eq!(methods, ["fast", "exact", "fast", "exact"]);
    for r in &rows {
        assert!(r[7].parse::<f64>().unwrap() >= 0.0);
        if &r[6] == "fast" {
            let k1: usize = r[4].parse().unwrap();
            let k5: usize = r[5].parse().unwrap();
            // k5 = k1·d + k1 with d = 2.
            assert_eq!(k5, 3 * k1);
            assert!(r[8].parse::<f64>().unwrap() <= 1e-6);
        } else {
            assert!(r[8].is_empty());
        }
    }
    // One shared degree across the sweep.
    assert_eq!(rows[0][3], rows[2][3]);
}

#[test]
fn probe_reports_curve_and_passes() {
    let out = tat(&[
        "probe", "--n", "4", "--d", "2", "--ba", "3", "--seed", "5", "--t", "10",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,f,f_prime"));
    assert_eq!(lines.count(), 21);
}

#[test]
fn single_thread_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen(dir.path(), "i.tat", 32, 4);
    let a = tat(&["--threads", "1", "grad", "--in", &inst, "--eps", "1e-6"]);
    let b = tat(&["--threads", "1", "grad", "--in", &inst, "--eps", "1e-6"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
