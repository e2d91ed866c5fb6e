//! Closing-time counting and retained-item detection, location queries,
//! per-case reports and the trace store.

mod closing;
mod report;
mod store;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{CaseId, TagId};
use crate::protocol::{ChecklistStatus, LocationBelief, MonitoringChecklist, ProtocolError};
use crate::sensing::{ScanResult, TagReadEvent};

pub use closing::{closing_loop, evaluate_pass, ClosingRun, ClosingWorld, PassStep};
pub use report::{generate_report, ItemSummary, ReportError, SurgeryReport};
pub use store::{load, persist, StoreError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Clean,
    RsbSuspected,
    CountMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub case_id: CaseId,
    pub expected: BTreeSet<TagId>,
    pub accounted: BTreeSet<TagId>,
    pub missing: BTreeSet<TagId>,
    pub cavity_detected: BTreeSet<TagId>,
    pub outcome: Outcome,
}

/// Compares what the checklist expects with what the tray and bin antennas
/// re-read and what the cavity scan found.
pub fn reconcile(
    checklist: &MonitoringChecklist,
    tray_reads: &[TagReadEvent],
    bin_reads: &[TagReadEvent],
    scan: &ScanResult,
) -> ReconciliationReport {
    let expected = checklist.expected();
    let accounted: BTreeSet<TagId> = tray_reads
        .iter()
        .chain(bin_reads)
        .map(|r| &r.tag_id)
        .filter(|t| expected.contains(*t))
        .cloned()
        .collect();
    let missing: BTreeSet<TagId> = expected.difference(&accounted).cloned().collect();
    let cavity_detected = scan.detected.clone();
    let outcome = if !cavity_detected.is_empty() {
        Outcome::RsbSuspected
    } else if !missing.is_empty() {
        Outcome::CountMismatch
    } else {
        Outcome::Clean
    };
    ReconciliationReport {
        case_id: checklist.case_id.clone(),
        expected,
        accounted,
        missing,
        cavity_detected,
        outcome,
    }
}

/// Last known location of `tag` according to the CMS.
pub fn locate(
    tag: &TagId,
    beliefs: &std::collections::BTreeMap<TagId, LocationBelief>,
) -> Result<LocationBelief, ProtocolError> {
    beliefs
        .get(tag)
        .cloned()
        .ok_or_else(|| ProtocolError::UnknownTag(tag.clone()))
}

/// Statuses counted as accounted for when re-verified by an antenna.
pub fn is_accounted_status(status: ChecklistStatus) -> bool {
    matches!(status, ChecklistStatus::OnTray | ChecklistStatus::Discarded)
}
