use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Outcome;
use crate::ids::{CaseId, RoomId, TagId};
use crate::model::ItemKind;
use crate::protocol::{Alert, ChecklistStatus, Phase};
use crate::simkernel::{RecordBody, Trace};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReportError {
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("csv: {0}")]
    Csv(String),
}

/// Lifecycle of one checklist tag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSummary {
    pub tag_id: TagId,
    pub kind: Option<ItemKind>,
    pub first_seen_s: u64,
    pub last_seen_s: u64,
    pub final_status: ChecklistStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurgeryReport {
    pub case_id: CaseId,
    pub room_id: RoomId,
    pub final_phase: Phase,
    pub items: Vec<ItemSummary>,
    pub alerts: Vec<Alert>,
    /// Reconciliation passes (one per cavity scan).
    pub scans: u32,
    pub outcomes: Vec<Outcome>,
    pub duration_s: u64,
}

/// Summarizes one case from a trace.
///
/// Duration runs from the case start to `Complete`, or to the horizon if
/// the case never completed.
pub fn generate_report(trace: &Trace, case_id: &CaseId) -> Result<SurgeryReport, ReportError> {
    let mut room = None;
    let mut kinds = BTreeMap::new();
    let mut items: BTreeMap<TagId, ItemSummary> = BTreeMap::new();
    let mut alerts = Vec::new();
    let mut outcomes = Vec::new();
    let mut phase = Phase::Setup;
    let mut started = None;
    let mut completed = None;
    for record in trace {
        match &record.body {
            RecordBody::Item { tag_id, kind, .. } => {
                kinds.insert(tag_id.clone(), *kind);
            }
            RecordBody::CaseOpened { case_id: c, room_id } if c == case_id => room = Some(room_id.clone()),
            RecordBody::Checklist { change } if &change.case_id == case_id => {
                items
                    .entry(change.tag_id.clone())
                    .and_modify(|s| {
                        s.last_seen_s = record.tick;
                        s.final_status = change.status;
                    })
                    .or_insert_with(|| ItemSummary {
                        tag_id: change.tag_id.clone(),
                        kind: kinds.get(&change.tag_id).copied(),
                        first_seen_s: record.tick,
                        last_seen_s: record.tick,
                        final_status: change.status,
                    });
            }
            RecordBody::Alert { alert } if alert.case_id.as_ref() == Some(case_id) => alerts.push(alert.clone()),
            RecordBody::Reconciliation { report } if &report.case_id == case_id => outcomes.push(report.outcome),
            RecordBody::Phase { change } if &change.case_id == case_id => {
                phase = change.to;
                if change.to == Phase::InProgress {
                    started.get_or_insert(record.tick);
                }
                if change.to == Phase::Complete {
                    completed = Some(record.tick);
                }
            }
            _ => {}
        }
    }
    let room_id = room.ok_or_else(|| ReportError::UnknownCase(case_id.clone()))?;
    let horizon = trace.horizon_s().unwrap_or(0);
    let start = started.unwrap_or(0);
    let end = completed.unwrap_or(horizon);
    Ok(SurgeryReport {
        case_id: case_id.clone(),
        room_id,
        final_phase: phase,
        items: items.into_values().collect(),
        alerts,
        scans: outcomes.len() as u32,
        outcomes,
        duration_s: end.saturating_sub(start),
    })
}

impl SurgeryReport {
    /// Canonical JSON with sorted keys.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }

    /// One row per item: tag_id, kind, first_seen_s, last_seen_s, final_status.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| ReportError::Csv(e.to_string());
        w.write_record(["tag_id", "kind", "first_seen_s", "last_seen_s", "final_status"])
            .map_err(err)?;
        for item in &self.items {
            w.write_record([
                item.tag_id.to_string(),
                item.kind.map(|k| k.to_string()).unwrap_or_default(),
                item.first_seen_s.to_string(),
                item.last_seen_s.to_string(),
                format!("{:?}", item.final_status),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}
