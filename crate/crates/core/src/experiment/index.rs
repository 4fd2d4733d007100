use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::SOFT_VERDICTS;
use crate::norms::NormReport;
use crate::Result;

/// Entry names shown as key ratios, in order of preference.
const KEY_ENTRIES: &[&str] = &[
    "n_emp",
    "n_ext",
    "local_ratio",
    "lp_ratio_max",
    "w1p_ratio_max",
    "hardy_term_ratio",
    "sandwich_min",
    "sandwich_max",
    "max_error",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexRow {
    pub file: String,
    pub readable: bool,
    pub version: Option<String>,
    pub kind: Option<String>,
    pub params: String,
    pub key_values: String,
    pub verdicts: String,
    pub pass: Option<bool>,
    pub wall_seconds: Option<f64>,
}

/// One row per cell report found under a directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportIndex {
    pub rows: Vec<IndexRow>,
    pub warnings: Vec<String>,
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") && path.file_name().is_some_and(|n| n != "index.json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Wall times keyed by cell id from a run directory's `timings.csv`.
fn read_timings(run_dir: &Path) -> BTreeMap<usize, f64> {
    let mut map = BTreeMap::new();
    let Ok(mut reader) = csv::Reader::from_path(run_dir.join("timings.csv")) else {
        return map;
    };
    for rec in reader.records().flatten() {
        if let (Some(Ok(k)), Some(Ok(t))) = (rec.get(0).map(str::parse), rec.get(1).map(str::parse)) {
            map.insert(k, t);
        }
    }
    map
}

fn meta_str(report: &NormReport, key: &str) -> Option<String> {
    report.metadata.get(key).map(|v| match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    })
}

/// Summarizes every cell report below `dir`. Unreadable files become rows flagged as such.
pub fn report_index(dir: &Path) -> Result<ReportIndex> {
    let mut files = Vec::new();
    collect_json(dir, &mut files)?;
    files.sort();
    let mut index = ReportIndex::default();
    if files.is_empty() {
        index.warnings.push(format!("no reports found under {}", dir.display()));
    }
    let mut timings: BTreeMap<PathBuf, BTreeMap<usize, f64>> = BTreeMap::new();
    for path in files {
        let file = path.strip_prefix(dir).unwrap_or(&path).display().to_string();
        let parsed = std::fs::read_to_string(&path)
            .ok()
            .and_then(|text| serde_json::from_str::<NormReport>(&text).ok());
        let Some(report) = parsed else {
            index.warnings.push(format!("{file}: unreadable"));
            index.rows.push(IndexRow {
                file,
                readable: false,
                version: None,
                kind: None,
                params: String::new(),
                key_values: String::new(),
                verdicts: String::new(),
                pass: None,
                wall_seconds: None,
            });
            continue;
        };
        let run_dir = path.parent().and_then(Path::parent).unwrap_or(dir).to_path_buf();
        let times = timings.entry(run_dir.clone()).or_insert_with(|| read_timings(&run_dir));
        let wall = report.metadata.get("cell").and_then(|v| v.as_u64()).and_then(|k| times.get(&(k as usize)).copied());
        let params = report
            .metadata
            .get("params")
            .and_then(|v| v.as_object())
            .map(|m| m.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "))
            .unwrap_or_default();
        let key_values = KEY_ENTRIES
            .iter()
            .filter_map(|name| report.get(name).map(|v| format!("{name}={v:.4e}")))
            .collect::<Vec<_>>()
            .join(" ");
        let passed = report.verdicts.iter().filter(|v| v.pass).count();
        index.rows.push(IndexRow {
            file,
            readable: true,
            version: meta_str(&report, "version"),
            kind: meta_str(&report, "kind"),
            params,
            key_values,
            verdicts: format!("{passed}/{}", report.verdicts.len()),
            pass: Some(report.verdicts.iter().all(|v| v.pass || SOFT_VERDICTS.contains(&v.name.as_str()))),
            wall_seconds: wall,
        });
    }
    Ok(index)
}

impl ReportIndex {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| crate::Error::Io(e.to_string());
        w.write_record(["file", "version", "kind", "params", "key_values", "verdicts", "pass", "wall_seconds"]).map_err(io)?;
        for r in &self.rows {
            let pass = match r.pass {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "unreadable",
            };
            w.write_record([
                r.file.as_str(),
                r.version.as_deref().unwrap_or(""),
                r.kind.as_deref().unwrap_or(""),
                &r.params,
                &r.key_values,
                &r.verdicts,
                pass,
                &r.wall_seconds.map(|t| format!("{t:.3}")).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| crate::Error::Io(e.to_string()))?;
        Ok(String::from_utf8_lossy(&bytes).into_owned())
    }
}

impl fmt::Display for ReportIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let status = match r.pass {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "UNREADABLE",
            };
            writeln!(
                f,
                "{status:<10} {:<28} v{:<8} {:<15} {:<6} {} {}",
                r.file,
                r.version.as_deref().unwrap_or("?"),
                r.kind.as_deref().unwrap_or("?"),
                r.verdicts,
                r.params,
                r.key_values
            )?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}
