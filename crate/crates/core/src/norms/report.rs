use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One measured quantity and the resolution it was computed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub name: String,
    pub value: f64,
    pub resolution: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Measured norms, ratios, slopes and verdicts with run metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub title: String,
    pub entries: Vec<NormEntry>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl NormReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Default::default() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: f64, resolution: impl Into<String>) {
        self.entries.push(NormEntry { name: name.into(), value, resolution: resolution.into() });
    }

    pub fn verdict(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.into(), pass, detail: detail.into() });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.metadata.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Appends another report's contents with a name prefix.
    pub fn merge(&mut self, prefix: &str, other: NormReport) {
        for e in other.entries {
            self.entries.push(NormEntry { name: format!("{prefix}{}", e.name), ..e });
        }
        for v in other.verdicts {
            self.verdicts.push(Verdict { name: format!("{prefix}{}", v.name), ..v });
        }
        self.warnings.extend(other.warnings.into_iter().map(|w| format!("{prefix}{w}")));
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Entries as `kind,name,value,resolution` rows followed by verdict rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| crate::Error::Io(e.to_string()))?;
        let io = |e: csv::Error| crate::Error::Io(e.to_string());
        w.write_record(["kind", "name", "value", "detail"]).map_err(io)?;
        for e in &self.entries {
            w.write_record(["entry", &e.name, &format!("{:.12e}", e.value), &e.resolution]).map_err(io)?;
        }
        for v in &self.verdicts {
            w.write_record(["verdict", &v.name, if v.pass { "pass" } else { "fail" }, &v.detail]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
