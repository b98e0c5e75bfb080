#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn ortree() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ortree"))
}

pub fn run(args: &[&str]) -> Output {
    ortree().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a header plus rows as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

/// Noisy piecewise target over `p` features; the last column is `y`.
pub fn synthetic_rows(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x: Vec<f64> = (0..p)
                .map(|_| (r.random_range(0.0..100.0f64) * 10.0).round() / 10.0)
                .collect();
            let y = if x[0] < 40.0 { 3.0 } else { 9.0 }
                + if p > 1 && x[1] > 70.0 { 4.0 } else { 0.0 }
                + r.random_range(-1.0..1.0);
            x.push((y * 1000.0f64).round() / 1000.0);
            x
        })
        .collect()
}

pub fn synthetic_csv(dir: &Path, name: &str, seed: u64, n: usize, p: usize) -> PathBuf {
    let path = dir.join(name);
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).chain(["y".to_string()]).collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    write_csv(&path, &header, &synthetic_rows(seed, n, p));
    path
}

pub fn manifest_results(model: &Path) -> serde_json::Value {
    let stem = model.file_stem().unwrap().to_string_lossy();
    let path = model.with_file_name(format!("{stem}.manifest.json"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["results"].clone()
}
