use gliofuse_core::metrics::{CaseReport, CohortSummary};
use gliofuse_core::CaseId;
use serde_json::{json, Map, Value};

use crate::config::PipelineConfig;

fn case_entry(report: &CaseReport) -> Value {
    let regions: Map<String, Value> = report
        .scores
        .iter()
        .map(|s| (s.region.name().to_string(), json!({"dice": s.dice, "hd95_mm": s.hd95_mm})))
        .collect();
    json!({"case": report.case, "regions": regions})
}

/// The evaluation document: per-case scores, cohort summary, missing cases and the effective config.
/// `summary` is an empty object when no case was evaluated.
pub fn evaluation_report(
    reports: &[CaseReport],
    summary: Option<&CohortSummary>,
    missing: &[CaseId],
    config: &PipelineConfig,
) -> Value {
    json!({
        "cases": reports.iter().map(case_entry).collect::<Vec<_>>(),
        "summary": summary.map_or_else(|| json!({}), |s| json!(s.regions)),
        "missing": missing,
        "config": config,
    })
}
