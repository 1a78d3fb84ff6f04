#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod schema;

use std::path::{Path, PathBuf};
use std::process::Command;

use magnitude::dsl::parse_model;
use magnitude::Model;

pub fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

/// Parse and validate, panicking with the diagnostics otherwise.
pub fn model(text: &str) -> Model {
    let r = parse_model(text);
    r.model
        .unwrap_or_else(|| panic!("invalid model: {:#?}", r.diagnostics))
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Run the `magnitude` binary.
pub fn cli(args: &[&str]) -> Output {
    cli_in(Path::new(env!("CARGO_MANIFEST_DIR")), args)
}

pub fn cli_in(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_magnitude"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}
