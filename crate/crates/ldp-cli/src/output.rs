//! Output documents, run manifests and exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Global;

/// Digest of one input file.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance of a single invocation.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: &'static str,
    pub inputs: Vec<InputDigest>,
    pub config: Value,
    pub version: &'static str,
    pub wall_time_seconds: f64,
}

/// Why a command failed.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or unreadable files.
    Usage(String),
    /// Errors raised by the library, carrying the structured witness.
    Domain(ldp::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Failure::Usage(msg) => json!({ "kind": "usage", "message": msg }),
            Failure::Domain(e) => {
                let witness = match e {
                    ldp::Error::Inadmissible(v) => {
                        serde_json::to_value(v.as_ref()).unwrap_or(Value::Null)
                    }
                    _ => Value::Null,
                };
                json!({ "kind": "domain", "message": e.to_string(), "witness": witness })
            }
        }
    }
}

impl From<ldp::Error> for Failure {
    fn from(e: ldp::Error) -> Self {
        Failure::Domain(e)
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// Collects inputs, free-text lines and CSV for one invocation.
pub struct Run {
    json_only: bool,
    out: Option<PathBuf>,
    pub inputs: Vec<InputDigest>,
    text: Vec<String>,
    csv: Option<String>,
}

impl Run {
    pub fn new(g: &Global) -> Self {
        Self {
            json_only: g.json_only,
            out: g.out.clone(),
            inputs: Vec::new(),
            text: Vec::new(),
            csv: None,
        }
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> CmdResult<String> {
        let bytes = std::fs::read(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes)
            .map_err(|_| Failure::Usage(format!("{} is not UTF-8", path.display())))
    }

    /// Reads words from stdin.
    pub fn read_stdin(&mut self) -> CmdResult<String> {
        let text = std::io::read_to_string(std::io::stdin())
            .map_err(|e| Failure::Usage(format!("cannot read stdin: {e}")))?;
        self.inputs.push(InputDigest {
            path: "-".into(),
            sha256: hex::encode(Sha256::digest(text.as_bytes())),
        });
        Ok(text)
    }

    /// A line printed before the JSON document unless `--json-only`.
    pub fn say(&mut self, line: String) {
        self.text.push(line);
    }

    pub fn set_csv(&mut self, csv: String) {
        self.csv = Some(csv);
    }

    pub fn finish(self, result: Value, manifest: Manifest) {
        if let (Some(csv), Some(path)) = (&self.csv, &self.out) {
            if let Err(e) = std::fs::write(path, csv) {
                eprintln!("warning: cannot write {}: {e}", path.display());
            }
        }
        let mut text = String::new();
        if !self.json_only {
            for line in &self.text {
                text.push_str(line);
                text.push('\n');
            }
        }
        emit(text, json!({ "result": result, "manifest": manifest }));
    }

    pub fn fail(self, f: Failure, manifest: Manifest) {
        match &f {
            Failure::Usage(m) => eprintln!("error: {m}"),
            Failure::Domain(e) => eprintln!("error: {e}"),
        }
        emit(
            String::new(),
            json!({ "error": f.to_json(), "manifest": manifest }),
        );
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(mut text: String, doc: Value) {
    text.push_str(&serde_json::to_string_pretty(&doc).expect("JSON values serialize"));
    text.push('\n');
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// A float as JSON, with infinities written as `"inf"` and `"-inf"`.
pub fn num(v: f64) -> Value {
    serde_json::to_value(ldp::num::Ext(v)).expect("floats serialize")
}

/// Any serializable library value as JSON.
pub fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("library types serialize")
}
