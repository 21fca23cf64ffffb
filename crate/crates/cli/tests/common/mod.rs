#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use moment_extend::{MomentMatrix, MomentSequence};
use moment_extend_cli::ProblemFile;
use serde_json::Value;

pub fn write_problem(dir: &Path, name: &str, beta: &MomentSequence) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, ProblemFile::from_sequence(beta).emit()).unwrap();
    path
}

pub fn write_matrix(dir: &Path, name: &str, m: &MomentMatrix) -> PathBuf {
    write_problem(dir, name, m.moments())
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moment-extend"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_file(cmd: &str, file: &Path, extra: &[&str]) -> (Value, i32) {
    let mut args = vec!["--deterministic", cmd, file.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = run(&args);
    let code = out.status.code().expect("exit code");
    let json: Value = serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)));
    (json, code)
}

pub fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| v.to_string().parse().expect("number"))
}
