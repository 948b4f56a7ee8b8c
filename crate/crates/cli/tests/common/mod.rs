//! Helpers shared by the CLI test targets.
#![allow(dead_code)]

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use semdensity::GenerationRecord;
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn semdensity<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_semdensity"))
        .args(args)
        .env_remove("SEMDENSITY_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write_records(path: &Path, records: &[GenerationRecord]) {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json_line());
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

pub fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Compares every field of each golden line against the produced line.
pub fn compare_golden(produced: &[Value], golden: &[Value], tol: f64) -> Result<(), String> {
    if produced.len() != golden.len() {
        return Err(format!("{} lines, golden has {}", produced.len(), golden.len()));
    }
    for (k, (p, g)) in produced.iter().zip(golden).enumerate() {
        for (field, want) in g.as_object().unwrap() {
            let got = &p[field];
            let ok = match (want.as_f64(), got.as_f64()) {
                (Some(w), Some(v)) if !want.is_boolean() => (w - v).abs() <= tol,
                _ => want == got,
            };
            if !ok {
                return Err(format!("line {}: {field} = {got}, golden {want}", k + 1));
            }
        }
    }
    Ok(())
}

/// CSV rows keyed by column name.
pub fn read_csv(path: &Path) -> Vec<HashMap<String, String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            header
                .iter()
                .map(String::from)
                .zip(r.iter().map(String::from))
                .collect()
        })
        .collect()
}

pub fn cell(rows: &[HashMap<String, String>], col: &str) -> f64 {
    assert_eq!(rows.len(), 1, "expected a single configuration");
    rows[0][col].parse().unwrap()
}
