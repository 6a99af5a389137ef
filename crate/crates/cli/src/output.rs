//! Output files. Text outputs start with `#` lines carrying the tool
//! version and the full run config; JSON outputs carry a `provenance` key.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Self {
            tool: "synthsearch",
            version: synthsearch::TOOL_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        vec![
            self.version.to_string(),
            format!("command: {}", self.command),
            format!("config: {}", self.config),
        ]
    }

    pub fn header(&self) -> String {
        self.header_lines().iter().map(|l| format!("# {l}\n")).collect()
    }
}

pub struct OutDir {
    pub root: PathBuf,
    pub provenance: Provenance,
}

impl OutDir {
    pub fn create(root: &Path, provenance: Provenance) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            provenance,
        })
    }

    pub fn file(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.root.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        Ok(p)
    }

    /// Writes `body` after the `#` header.
    pub fn text(&self, rel: &str, body: &str) -> Result<(), CliError> {
        let p = self.file(rel)?;
        fs::write(&p, self.provenance.header() + body).map_err(|e| CliError::io(&p, e))
    }

    /// Writes `value` as pretty JSON with a `provenance` key added.
    pub fn json(&self, rel: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value).expect("output serializes");
        let prov = serde_json::to_value(&self.provenance).expect("provenance serializes");
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("provenance".into(), prov);
            }
            None => v = serde_json::json!({ "provenance": prov, "data": v }),
        }
        let p = self.file(rel)?;
        fs::write(&p, serde_json::to_string_pretty(&v).expect("json") + "\n").map_err(|e| CliError::io(&p, e))
    }

    /// Serializes `rows` as CSV with a header row, after the `#` header.
    pub fn csv<R: Serialize>(&self, rel: &str, rows: &[R]) -> Result<(), CliError> {
        let p = self.file(rel)?;
        let mut buf = self.provenance.header().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in rows {
                w.serialize(r).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            }
            w.flush().map_err(|e| CliError::io(&p, e))?;
        }
        let mut f = fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
        f.write_all(&buf).map_err(|e| CliError::io(&p, e))
    }
}
