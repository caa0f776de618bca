//! CSV and JSON writers. Numbers use Rust's shortest round-trip formatting,
//! so identical values give identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Streams rows to `path`.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    line: String,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            line: String::new(),
        };
        w.out.write_all(header.join(",").as_bytes())?;
        w.out.write_all(b"\n")?;
        Ok(w)
    }

    pub fn row<I: IntoIterator<Item = Cell>>(&mut self, cells: I) -> Result<(), CliError> {
        use std::fmt::Write as _;
        self.line.clear();
        for (k, c) in cells.into_iter().enumerate() {
            if k > 0 {
                self.line.push(',');
            }
            let _ = match c {
                Cell::F(x) => write!(self.line, "{x}"),
                Cell::U(x) => write!(self.line, "{x}"),
                Cell::B(x) => write!(self.line, "{x}"),
            };
        }
        self.line.push('\n');
        self.out.write_all(self.line.as_bytes())?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.out.flush()?;
        Ok(self.path)
    }
}

pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
}

/// Writes `body` (an object) with a leading `meta` block holding the
/// command, crate version, effective config and a timestamp.
pub fn write_json<T: Serialize>(path: &Path, command: &str, cfg: &ExperimentConfig, body: &T) -> Result<PathBuf, CliError> {
    let mut obj = Map::new();
    obj.insert(
        "meta".into(),
        json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "timestamp": chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            "config": cfg,
        }),
    );
    match serde_json::to_value(body).map_err(|e| CliError::Io(e.to_string()))? {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("result".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.to_path_buf())
}

/// Drops `meta.timestamp` so that two reports can be compared.
pub fn strip_timestamp(mut v: Value) -> Value {
    if let Some(meta) = v.get_mut("meta").and_then(Value::as_object_mut) {
        meta.remove("timestamp");
    }
    v
}
