#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cann"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "cann {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Writes a small two-class dataset with one informative continuous column,
/// one noise column and one nominal column. Returns `(data, schema)`.
pub fn write_fixture(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let mut csv = String::from("signal,noise,colour,class\n");
    let colours = ["red", "green", "blue"];
    for i in 0..n {
        let class = i % 2;
        // deterministic pseudo-noise
        let a = ((i * 37 + 11) % 101) as f64 / 101.0;
        let b = ((i * 53 + 7) % 97) as f64 / 97.0;
        let signal = class as f64 * 0.6 + 0.4 * a;
        let colour = colours[(i * 7 + class) % 3];
        let label = if class == 1 { "spam" } else { "ham" };
        csv.push_str(&format!("{signal:.4},{b:.4},{colour},{label}\n"));
    }
    let data = dir.join("data.csv");
    fs::write(&data, csv).unwrap();
    let schema = dir.join("schema.json");
    fs::write(
        &schema,
        r#"{
  "columns": [
    {"name": "signal", "type": "continuous"},
    {"name": "noise", "type": "continuous"},
    {"name": "colour", "type": "nominal"},
    {"name": "class", "type": "nominal"}
  ],
  "class_column": "class"
}
"#,
    )
    .unwrap();
    (data, schema)
}
