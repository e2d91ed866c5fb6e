use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CaseId, ItemId, RoomId, TagId};
use crate::model::{GroundTruthEvent, ItemKind};
use crate::protocol::{Alert, ChecklistChange, PhaseChange, ProtocolMessage};
use crate::reconciliation::ReconciliationReport;

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub tick: u64,
    #[serde(flatten)]
    pub body: RecordBody,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum RecordBody {
    Run {
        scenario: String,
        seed: u64,
        horizon_s: u64,
    },
    Item {
        item_id: ItemId,
        tag_id: TagId,
        kind: ItemKind,
    },
    CaseOpened {
        case_id: CaseId,
        room_id: RoomId,
    },
    GroundTruth {
        event: GroundTruthEvent,
    },
    Delivered {
        message: ProtocolMessage,
    },
    Dropped {
        message: ProtocolMessage,
    },
    Alert {
        alert: Alert,
    },
    Phase {
        change: PhaseChange,
    },
    Checklist {
        change: ChecklistChange,
    },
    Reconciliation {
        report: ReconciliationReport,
    },
    Error {
        node: String,
        error: String,
    },
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
}

/// Ordered run log. Serialized as newline-delimited JSON with keys sorted
/// alphabetically at every level, so equal traces are byte-identical.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, tick: u64, body: RecordBody) {
        self.records.push(TraceRecord { tick, body });
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter()
    }

    pub fn alerts(&self) -> impl Iterator<Item = &Alert> {
        self.records.iter().filter_map(|r| match &r.body {
            RecordBody::Alert { alert } => Some(alert),
            _ => None,
        })
    }

    pub fn horizon_s(&self) -> Option<u64> {
        self.records.iter().find_map(|r| match r.body {
            RecordBody::Run { horizon_s, .. } => Some(horizon_s),
            _ => None,
        })
    }

    /// Records other than the run header and item/case registration.
    pub fn body_len(&self) -> usize {
        self.records
            .iter()
            .filter(|r| {
                !matches!(
                    r.body,
                    RecordBody::Run { .. } | RecordBody::Item { .. } | RecordBody::CaseOpened { .. }
                )
            })
            .count()
    }

    pub fn record_line(record: &TraceRecord) -> String {
        let value = serde_json::to_value(record).expect("trace records serialize");
        value.to_string()
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&Self::record_line(record));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, TraceParseError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = serde_json::from_str(line).map_err(|e| TraceParseError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(Self { records })
    }
}

impl<'a> IntoIterator for &'a Trace {
    type Item = &'a TraceRecord;
    type IntoIter = std::slice::Iter<'a, TraceRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Location, MoveCause, SubLocation};

    #[test]
    fn keys_are_sorted_and_flat() {
        let mut t = Trace::new();
        t.push(
            3,
            RecordBody::GroundTruth {
                event: GroundTruthEvent {
                    time_s: 3,
                    item_id: "s1".into(),
                    from: Location::equipment_room(),
                    to: Location::in_or("OR-1", SubLocation::ToolTray),
                    cause: MoveCause::RoomTransit,
                },
            },
        );
        let text = t.to_ndjson();
        assert_eq!(
            text,
            "{\"event\":{\"cause\":\"RoomTransit\",\"from\":\"EquipmentRoom\",\"item_id\":\"s1\",\"time_s\":3,\"to\":\"OR-1/ToolTray\"},\"record\":\"ground_truth\",\"tick\":3}\n"
        );
        assert_eq!(Trace::from_ndjson(&text).unwrap(), t);
    }

    #[test]
    fn bad_line_reports_line_number() {
        let err = Trace::from_ndjson("{\"record\":\"run\",\"scenario\":\"x\",\"seed\":1,\"horizon_s\":5,\"tick\":0}\n{oops\n").unwrap_err();
        assert!(err.to_string().starts_with("line 2"));
    }
}
