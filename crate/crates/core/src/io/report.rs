use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::transform::TransformRecord;
use crate::error::{Error, Result};
use crate::estimators::FitResult;
use crate::inference::WaldRow;
use crate::sim::SimReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        ErrorInfo { kind: e.kind().into(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodStatus {
    Ok,
    Failed,
}

/// One estimator's outcome in `results.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodResult {
    pub estimator: String,
    pub status: MethodStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    /// Estimate, standard error and Wald test on the analysis scale.
    #[serde(default)]
    pub coefficients: Vec<WaldRow>,
    /// The same with standardizations undone, when any were applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unstandardized: Option<Vec<WaldRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitResult>,
}

/// Contents of `results.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub config: RunConfig,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub transforms: TransformRecord,
    pub methods: Vec<MethodResult>,
}

impl FitReport {
    pub fn method(&self, name: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.estimator == name)
    }

    pub fn all_failed(&self) -> bool {
        self.methods.iter().all(|m| m.status == MethodStatus::Failed)
    }
}

/// Contents of `simreport.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReportFile {
    pub run: RunConfig,
    pub seed: u64,
    #[serde(flatten)]
    pub report: SimReport,
}

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::Io(format!("{}: {e}", path.display()))
    })
}

/// Comment lines carrying the resolved configuration and seed.
pub fn provenance_header(run: &RunConfig, seed: u64) -> Result<String> {
    let json = serde_json::to_string(run).map_err(|e| Error::Io(e.to_string()))?;
    Ok(format!("# config: {json}\n# seed: {seed}\n"))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => v.to_string(),
        _ => String::new(),
    }
}

/// `results.csv`: a row group per method with Estimate, S.E. and p-value
/// rows and a column per coefficient. Failed methods appear as comments.
pub fn results_csv(report: &FitReport) -> Result<String> {
    let mut out = provenance_header(&report.config, report.seed)?;
    let names: Vec<String> = report
        .methods
        .iter()
        .find(|m| m.status == MethodStatus::Ok)
        .map(|m| m.coefficients.iter().map(|c| c.name.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["method".to_string(), "statistic".to_string()];
    header.extend(names.iter().cloned());
    let _ = writeln!(out, "{}", header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    for m in &report.methods {
        if m.status == MethodStatus::Failed {
            let msg = m.error.as_ref().map_or(String::new(), |e| e.message.replace('\n', " "));
            let _ = writeln!(out, "# {} failed: {msg}", m.estimator);
            continue;
        }
        let rows: [(&str, fn(&WaldRow) -> f64); 3] =
            [("Estimate", |w| w.estimate), ("S.E.", |w| w.se), ("p-value", |w| w.p_value)];
        for (label, get) in rows {
            let mut fields = vec![csv_field(&m.estimator), label.to_string()];
            for name in &names {
                fields.push(num(m.coefficients.iter().find(|c| &c.name == name).map(get)));
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
    }
    Ok(out)
}

/// `simreport.csv`: a row group per estimator (Bias, ESE, ASE, Coverage) with
/// a column per parameter, preceded by the true values.
pub fn simreport_csv(file: &SimReportFile) -> Result<String> {
    let mut out = provenance_header(&file.run, file.seed)?;
    let report = &file.report;
    let names: Vec<String> = report
        .estimators
        .iter()
        .find(|e| !e.params.is_empty())
        .map(|e| e.params.iter().map(|p| p.name.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["estimator".to_string(), "statistic".to_string()];
    header.extend(names.iter().cloned());
    let _ = writeln!(out, "{}", header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(","));
    let truth = report.config.reported_truth();
    let mut fields = vec!["truth".to_string(), "value".to_string()];
    fields.extend(names.iter().enumerate().map(|(j, _)| num(truth.get(j).copied())));
    let _ = writeln!(out, "{}", fields.join(","));
    for e in &report.estimators {
        let _ = writeln!(
            out,
            "# {}: {} successes, {} failures{}",
            e.estimator,
            e.successes,
            e.failures,
            if e.unreliable { " (unreliable)" } else { "" }
        );
        if e.params.is_empty() {
            continue;
        }
        let rows: [(&str, fn(&crate::sim::ParamSummary) -> Option<f64>); 4] =
            [("Bias", |p| Some(p.bias)), ("ESE", |p| p.ese), ("ASE", |p| p.ase), ("Coverage", |p| p.coverage)];
        for (label, get) in rows {
            let mut fields = vec![csv_field(&e.estimator), label.to_string()];
            for name in &names {
                fields.push(num(e.param(name).and_then(get)));
            }
            let _ = writeln!(out, "{}", fields.join(","));
        }
    }
    Ok(out)
}
