//! Communicating state machines: room entrance sensors, the CMS, the MTC and
//! the MED request/response.
//!
//! Every handler is a deterministic function of its state and input; all
//! effects come back as messages, alerts and bookkeeping records that the
//! kernel routes and logs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CaseId, RoomId, TagId};
use crate::model::Site;
use crate::reconciliation::{self, ReconciliationReport};
use crate::sensing::{ScanResult, TagReadEvent};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("case {case_id}: {op} not allowed in phase {phase:?}")]
    InvalidPhase {
        case_id: CaseId,
        phase: Phase,
        op: &'static str,
    },
    #[error("unknown case {0}")]
    UnknownCase(CaseId),
    #[error("case {0} is complete")]
    StaleCase(CaseId),
    #[error("unknown tag {0}")]
    UnknownTag(TagId),
    #[error("no active case in room {0}")]
    NoActiveCase(RoomId),
    #[error("unexpected input for {node}: {what}")]
    UnexpectedInput { node: NodeId, what: String },
}

/// Participants on the message bus.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NodeId {
    RoomSensor(RoomId),
    Med(RoomId),
    Mtc(RoomId),
    Cms,
    Spd,
}

impl NodeId {
    /// Delivery order for messages due at the same tick, lowest first.
    pub fn priority(&self) -> u8 {
        match self {
            NodeId::RoomSensor(_) => 0,
            NodeId::Med(_) => 1,
            NodeId::Mtc(_) => 2,
            NodeId::Cms => 3,
            NodeId::Spd => 4,
        }
    }

    /// Node class name used for bus link configuration.
    pub fn kind(&self) -> &'static str {
        match self {
            NodeId::RoomSensor(_) => "room_sensor",
            NodeId::Med(_) => "med",
            NodeId::Mtc(_) => "mtc",
            NodeId::Cms => "cms",
            NodeId::Spd => "spd",
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::RoomSensor(r) | NodeId::Med(r) | NodeId::Mtc(r) => write!(f, "{}:{r}", self.kind()),
            NodeId::Cms | NodeId::Spd => f.write_str(self.kind()),
        }
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "cms" => Ok(NodeId::Cms),
            None if s == "spd" => Ok(NodeId::Spd),
            Some(("room_sensor", r)) => Ok(NodeId::RoomSensor(r.into())),
            Some(("med", r)) => Ok(NodeId::Med(r.into())),
            Some(("mtc", r)) => Ok(NodeId::Mtc(r.into())),
            _ => Err(format!("bad node id {s:?}")),
        }
    }
}

impl TryFrom<String> for NodeId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NodeId> for String {
    fn from(n: NodeId) -> String {
        n.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    In,
    Out,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChecklistOp {
    Add,
    Remove,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Payload {
    NewEquipmentInOR {
        tag_id: TagId,
    },
    EquipmentLeftOR {
        tag_id: TagId,
    },
    RoomCrossing {
        tag_id: TagId,
        room_id: RoomId,
        direction: Direction,
    },
    ClosingAnnounced {
        case_id: CaseId,
    },
    CavityScanResult {
        case_id: CaseId,
        scan: ScanResult,
    },
    SpdReadyAck {
        case_id: CaseId,
    },
    ChecklistUpdate {
        case_id: CaseId,
        op: ChecklistOp,
        tag_id: TagId,
    },
    RequestCavityScan {
        case_id: CaseId,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub msg_id: u64,
    pub time_s: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub payload: Payload,
}

/// Run-wide message id allocator.
#[derive(Clone, Debug, Default)]
pub struct MessageIds(u64);

impl MessageIds {
    pub fn new() -> Self {
        Self(0)
    }

    pub fn issue(&mut self, time_s: u64, from: NodeId, to: NodeId, payload: Payload) -> ProtocolMessage {
        assert_ne!(from, to, "message addressed to its sender");
        let msg_id = self.0;
        self.0 += 1;
        ProtocolMessage {
            msg_id,
            time_s,
            from,
            to,
            payload,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlertKind {
    NewEquipmentDetected,
    EquipmentLeftOR,
    RsbSuspected,
    CountMismatch,
    SensorDown,
    ManualOverride,
    UnknownTag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub time_s: u64,
    pub severity: Severity,
    pub kind: AlertKind,
    pub case_id: Option<CaseId>,
    pub tags: BTreeSet<TagId>,
    pub text: String,
}

impl Alert {
    /// Retained-item and count alerts are always raised as Critical.
    pub fn new(
        time_s: u64,
        severity: Severity,
        kind: AlertKind,
        case_id: Option<CaseId>,
        tags: impl IntoIterator<Item = TagId>,
        text: impl Into<String>,
    ) -> Self {
        let severity = match kind {
            AlertKind::RsbSuspected | AlertKind::CountMismatch => Severity::Critical,
            _ => severity,
        };
        Self {
            time_s,
            severity,
            kind,
            case_id,
            tags: tags.into_iter().collect(),
            text: text.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChecklistStatus {
    OnTray,
    InUse,
    InCavityBelief,
    Discarded,
    RemovedFromOR,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistEntry {
    pub status: ChecklistStatus,
    pub last_seen_s: u64,
}

/// The MTC's belief of what is in the operating room for one case.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitoringChecklist {
    pub case_id: CaseId,
    pub entries: BTreeMap<TagId, ChecklistEntry>,
}

impl MonitoringChecklist {
    pub fn new(case_id: CaseId) -> Self {
        Self {
            case_id,
            entries: BTreeMap::new(),
        }
    }

    pub fn status(&self, tag: &TagId) -> Option<ChecklistStatus> {
        self.entries.get(tag).map(|e| e.status)
    }

    /// Tags counted at reconciliation: everything not removed from the OR.
    pub fn expected(&self) -> BTreeSet<TagId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.status != ChecklistStatus::RemovedFromOR)
            .map(|(t, _)| t.clone())
            .collect()
    }

    pub fn with_status(&self, status: ChecklistStatus) -> BTreeSet<TagId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.status == status)
            .map(|(t, _)| t.clone())
            .collect()
    }

    /// Sets `tag` to `status`. Returns the previous status when it changed
    /// (`Some(None)` for a new entry), `None` when nothing changed.
    pub fn set(&mut self, tag: &TagId, status: ChecklistStatus, now: u64) -> Option<Option<ChecklistStatus>> {
        match self.entries.get_mut(tag) {
            Some(entry) => {
                entry.last_seen_s = now;
                if entry.status == status {
                    None
                } else {
                    let prev = entry.status;
                    entry.status = status;
                    Some(Some(prev))
                }
            }
            None => {
                self.entries.insert(
                    tag.clone(),
                    ChecklistEntry {
                        status,
                        last_seen_s: now,
                    },
                );
                Some(None)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Setup,
    InProgress,
    ClosingAnnounced,
    CavityScan,
    Reconciled,
    AwaitingSpd,
    Complete,
}

impl Phase {
    /// Edges of the case lifecycle graph.
    pub fn can_transition_to(self, next: Phase) -> bool {
        use Phase::*;
        matches!(
            (self, next),
            (Setup, InProgress)
                | (InProgress, ClosingAnnounced)
                | (ClosingAnnounced, CavityScan)
                | (CavityScan, ClosingAnnounced)
                | (CavityScan, Reconciled)
                | (Reconciled, AwaitingSpd)
                | (AwaitingSpd, Complete)
        )
    }

    /// Phases in which checklist traffic is processed normally.
    pub fn is_monitoring(self) -> bool {
        matches!(
            self,
            Phase::Setup | Phase::InProgress | Phase::ClosingAnnounced | Phase::CavityScan
        )
    }
}

/// Checks that a per-case phase sequence is a path in the lifecycle graph
/// starting at `Setup`. Returns the index of the first bad step.
pub fn validate_phase_path(phases: &[Phase]) -> Result<(), usize> {
    match phases.first() {
        None => return Ok(()),
        Some(Phase::Setup) => {}
        Some(_) => return Err(0),
    }
    for (i, w) in phases.windows(2).enumerate() {
        if !w[0].can_transition_to(w[1]) {
            return Err(i + 1);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub case_id: CaseId,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistChange {
    pub case_id: CaseId,
    pub tag_id: TagId,
    pub status: ChecklistStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurgeryCase {
    pub case_id: CaseId,
    pub room_id: RoomId,
    pub phase: Phase,
    pub checklist: MonitoringChecklist,
    pub spd_acked: bool,
    /// Re-scans triggered by count mismatches so far.
    pub count_rescans: u32,
    /// Set once re-scans are exhausted; only a manual override proceeds.
    pub awaiting_override: bool,
}

impl SurgeryCase {
    pub fn new(case_id: impl Into<CaseId>, room_id: impl Into<RoomId>) -> Self {
        let case_id = case_id.into();
        Self {
            checklist: MonitoringChecklist::new(case_id.clone()),
            case_id,
            room_id: room_id.into(),
            phase: Phase::Setup,
            spd_acked: false,
            count_rescans: 0,
            awaiting_override: false,
        }
    }

    pub fn transition(&mut self, to: Phase) -> Result<PhaseChange, ProtocolError> {
        if !self.phase.can_transition_to(to) || (to == Phase::Complete && !self.spd_acked) {
            return Err(self.invalid("transition"));
        }
        let change = PhaseChange {
            case_id: self.case_id.clone(),
            from: self.phase,
            to,
        };
        self.phase = to;
        Ok(change)
    }

    fn invalid(&self, op: &'static str) -> ProtocolError {
        ProtocolError::InvalidPhase {
            case_id: self.case_id.clone(),
            phase: self.phase,
            op,
        }
    }
}

/// Staff announce patient closing: request a cavity scan from the MED.
pub fn announce_closing(
    case: &mut SurgeryCase,
    now: u64,
    ids: &mut MessageIds,
) -> Result<(PhaseChange, Vec<ProtocolMessage>), ProtocolError> {
    if case.phase != Phase::InProgress {
        return Err(case.invalid("announce_closing"));
    }
    let change = case.transition(Phase::ClosingAnnounced)?;
    let mtc = NodeId::Mtc(case.room_id.clone());
    let messages = vec![
        ids.issue(
            now,
            mtc.clone(),
            NodeId::Med(case.room_id.clone()),
            Payload::RequestCavityScan {
                case_id: case.case_id.clone(),
            },
        ),
        ids.issue(
            now,
            mtc,
            NodeId::Cms,
            Payload::ClosingAnnounced {
                case_id: case.case_id.clone(),
            },
        ),
    ];
    Ok((change, messages))
}

/// The SPD reports it is ready to receive the case's instruments.
pub fn spd_acknowledge(
    case: Option<&SurgeryCase>,
    case_id: &CaseId,
    now: u64,
    ids: &mut MessageIds,
) -> Result<ProtocolMessage, ProtocolError> {
    let case = case.ok_or_else(|| ProtocolError::UnknownCase(case_id.clone()))?;
    if !matches!(case.phase, Phase::Reconciled | Phase::AwaitingSpd) {
        return Err(case.invalid("spd_acknowledge"));
    }
    Ok(ids.issue(
        now,
        NodeId::Spd,
        NodeId::Cms,
        Payload::SpdReadyAck {
            case_id: case.case_id.clone(),
        },
    ))
}

/// Entrance sensor of one room. A single antenna cannot see direction, so
/// each read toggles the tag between inside and outside.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoomSensorState {
    pub room_id: RoomId,
    inside: BTreeSet<TagId>,
}

impl RoomSensorState {
    pub fn new(room_id: impl Into<RoomId>) -> Self {
        Self {
            room_id: room_id.into(),
            inside: BTreeSet::new(),
        }
    }

    /// Starts with `tags` believed inside (initial inventory).
    pub fn with_inside(mut self, tags: impl IntoIterator<Item = TagId>) -> Self {
        self.inside.extend(tags);
        self
    }

    pub fn believes_inside(&self, tag: &TagId) -> bool {
        self.inside.contains(tag)
    }

    pub fn on_reads(&mut self, reads: &[TagReadEvent], ids: &mut MessageIds) -> Vec<ProtocolMessage> {
        reads
            .iter()
            .map(|read| {
                let direction = if self.inside.remove(&read.tag_id) {
                    Direction::Out
                } else {
                    self.inside.insert(read.tag_id.clone());
                    Direction::In
                };
                ids.issue(
                    read.time_s,
                    NodeId::RoomSensor(self.room_id.clone()),
                    NodeId::Cms,
                    Payload::RoomCrossing {
                        tag_id: read.tag_id.clone(),
                        room_id: self.room_id.clone(),
                        direction,
                    },
                )
            })
            .collect()
    }
}

/// Where the CMS believes a tag is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "belief")]
pub enum LocationBelief {
    Unknown,
    In { room_id: RoomId, last_seen_s: u64 },
    LeftFrom { room_id: RoomId, last_seen_s: u64 },
}

impl LocationBelief {
    /// Site the tag is believed to be inside, if any.
    pub fn site(&self) -> Option<Site> {
        match self {
            LocationBelief::In { room_id, .. } => Some(Site::from_room_id(room_id)),
            _ => None,
        }
    }

    pub fn last_seen_s(&self) -> Option<u64> {
        match self {
            LocationBelief::Unknown => None,
            LocationBelief::In { last_seen_s, .. } | LocationBelief::LeftFrom { last_seen_s, .. } => {
                Some(*last_seen_s)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NodeOutput {
    pub messages: Vec<ProtocolMessage>,
    pub alerts: Vec<Alert>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct CaseMirror {
    case_id: CaseId,
    on_checklist: BTreeSet<TagId>,
}

/// Central management system: global locator and message hub.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CmsState {
    beliefs: BTreeMap<TagId, LocationBelief>,
    cases: BTreeMap<RoomId, CaseMirror>,
    case_rooms: BTreeMap<CaseId, RoomId>,
}

impl CmsState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tag with no known location.
    pub fn register(&mut self, tag: TagId) {
        self.beliefs.entry(tag).or_insert(LocationBelief::Unknown);
    }

    /// Registers a tag from an inventory record placing it in `site`.
    pub fn register_at(&mut self, tag: TagId, site: &Site, time_s: u64) {
        self.beliefs.insert(
            tag,
            LocationBelief::In {
                room_id: site.room_id(),
                last_seen_s: time_s,
            },
        );
    }

    pub fn open_case(&mut self, case_id: CaseId, room_id: RoomId) {
        self.case_rooms.insert(case_id.clone(), room_id.clone());
        self.cases.insert(
            room_id,
            CaseMirror {
                case_id,
                on_checklist: BTreeSet::new(),
            },
        );
    }

    pub fn beliefs(&self) -> &BTreeMap<TagId, LocationBelief> {
        &self.beliefs
    }

    pub fn on_checklist(&self, room: &RoomId, tag: &TagId) -> bool {
        self.cases
            .get(room)
            .is_some_and(|c| c.on_checklist.contains(tag))
    }

    pub fn handle(&mut self, msg: &ProtocolMessage, now: u64, ids: &mut MessageIds) -> NodeOutput {
        let mut out = NodeOutput::default();
        match &msg.payload {
            Payload::RoomCrossing {
                tag_id,
                room_id,
                direction,
            } => {
                let Some(belief) = self.beliefs.get_mut(tag_id) else {
                    out.alerts.push(Alert::new(
                        now,
                        Severity::Warning,
                        AlertKind::UnknownTag,
                        self.cases.get(room_id).map(|c| c.case_id.clone()),
                        [tag_id.clone()],
                        format!("unregistered tag {tag_id} read at {room_id}"),
                    ));
                    return out;
                };
                *belief = match direction {
                    Direction::In => LocationBelief::In {
                        room_id: room_id.clone(),
                        last_seen_s: now,
                    },
                    Direction::Out => LocationBelief::LeftFrom {
                        room_id: room_id.clone(),
                        last_seen_s: now,
                    },
                };
                if let Some(case) = self.cases.get(room_id) {
                    let listed = case.on_checklist.contains(tag_id);
                    let payload = match direction {
                        Direction::In if !listed => Some(Payload::NewEquipmentInOR { tag_id: tag_id.clone() }),
                        Direction::Out if listed => Some(Payload::EquipmentLeftOR { tag_id: tag_id.clone() }),
                        _ => None,
                    };
                    if let Some(payload) = payload {
                        out.messages
                            .push(ids.issue(now, NodeId::Cms, NodeId::Mtc(room_id.clone()), payload));
                    }
                }
            }
            Payload::ChecklistUpdate { case_id, op, tag_id } => {
                if let Some(mirror) = self
                    .case_rooms
                    .get(case_id)
                    .and_then(|room| self.cases.get_mut(room))
                {
                    match op {
                        ChecklistOp::Add => mirror.on_checklist.insert(tag_id.clone()),
                        ChecklistOp::Remove => mirror.on_checklist.remove(tag_id),
                    };
                }
            }
            Payload::SpdReadyAck { case_id } => {
                if let Some(room) = self.case_rooms.get(case_id) {
                    out.messages.push(ids.issue(
                        now,
                        NodeId::Cms,
                        NodeId::Mtc(room.clone()),
                        msg.payload.clone(),
                    ));
                }
            }
            // Informational for the CMS.
            Payload::ClosingAnnounced { .. } => {}
            _ => {}
        }
        out
    }
}

/// Re-scan policy for the closing loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosingConfig {
    pub scan_passes: u32,
    pub max_rescans: u32,
    pub rescan_delay_s: u64,
}

impl Default for ClosingConfig {
    fn default() -> Self {
        Self {
            scan_passes: 2,
            max_rescans: 2,
            rescan_delay_s: 30,
        }
    }
}

pub enum MtcInput<'a> {
    /// Case start time reached.
    Start,
    Message(&'a ProtocolMessage),
    TrayInventory(&'a [TagReadEvent]),
    BinInventory(&'a [TagReadEvent]),
    /// A cavity scan result together with fresh tray and bin inventories.
    CavityScan {
        msg: &'a ProtocolMessage,
        tray_reads: &'a [TagReadEvent],
        bin_reads: &'a [TagReadEvent],
    },
    AnnounceClosing,
    RescanDue,
    ManualOverride,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MtcOutput {
    pub messages: Vec<ProtocolMessage>,
    pub alerts: Vec<Alert>,
    pub phases: Vec<PhaseChange>,
    pub checklist: Vec<ChecklistChange>,
    pub report: Option<ReconciliationReport>,
    pub rescan_at: Option<u64>,
}

/// Mobile tool cart: owner of the case and its monitoring checklist.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MtcState {
    pub room_id: RoomId,
    pub case: SurgeryCase,
    pub config: ClosingConfig,
}

impl MtcState {
    pub fn new(case: SurgeryCase, config: ClosingConfig) -> Self {
        Self {
            room_id: case.room_id.clone(),
            case,
            config,
        }
    }

    fn node(&self) -> NodeId {
        NodeId::Mtc(self.room_id.clone())
    }

    fn set_status(&mut self, tag: &TagId, status: ChecklistStatus, now: u64, ids: &mut MessageIds, out: &mut MtcOutput) {
        let Some(prev) = self.case.checklist.set(tag, status, now) else {
            return;
        };
        out.checklist.push(ChecklistChange {
            case_id: self.case.case_id.clone(),
            tag_id: tag.clone(),
            status,
        });
        let was_listed = matches!(prev, Some(s) if s != ChecklistStatus::RemovedFromOR);
        let now_listed = status != ChecklistStatus::RemovedFromOR;
        let op = match (was_listed, now_listed) {
            (false, true) => ChecklistOp::Add,
            (true, false) => ChecklistOp::Remove,
            _ => return,
        };
        out.messages.push(ids.issue(
            now,
            self.node(),
            NodeId::Cms,
            Payload::ChecklistUpdate {
                case_id: self.case.case_id.clone(),
                op,
                tag_id: tag.clone(),
            },
        ));
    }

    /// Applies an antenna inventory: tags read get `present`, tags that had
    /// `present` and were not read are back in use.
    fn inventory(&mut self, reads: &[TagReadEvent], present: ChecklistStatus, now: u64, ids: &mut MessageIds, out: &mut MtcOutput) {
        let seen: BTreeSet<&TagId> = reads.iter().map(|r| &r.tag_id).collect();
        let gone: Vec<TagId> = self
            .case
            .checklist
            .with_status(present)
            .into_iter()
            .filter(|t| !seen.contains(t))
            .collect();
        for tag in gone {
            self.set_status(&tag, ChecklistStatus::InUse, now, ids, out);
        }
        for tag in seen {
            self.set_status(tag, present, now, ids, out);
        }
    }

    fn transition(&mut self, to: Phase, out: &mut MtcOutput) -> Result<(), ProtocolError> {
        out.phases.push(self.case.transition(to)?);
        Ok(())
    }

    pub fn handle(&mut self, input: MtcInput<'_>, now: u64, ids: &mut MessageIds) -> Result<MtcOutput, ProtocolError> {
        let mut out = MtcOutput::default();
        let complete = self.case.phase == Phase::Complete;
        match input {
            MtcInput::Start => self.transition(Phase::InProgress, &mut out)?,
            MtcInput::TrayInventory(reads) => {
                if !complete {
                    self.inventory(reads, ChecklistStatus::OnTray, now, ids, &mut out);
                }
            }
            MtcInput::BinInventory(reads) => {
                if !complete {
                    self.inventory(reads, ChecklistStatus::Discarded, now, ids, &mut out);
                }
            }
            MtcInput::AnnounceClosing => {
                let (change, messages) = announce_closing(&mut self.case, now, ids)?;
                out.phases.push(change);
                out.messages = messages;
            }
            MtcInput::RescanDue => {
                if self.case.phase == Phase::ClosingAnnounced {
                    out.messages.push(ids.issue(
                        now,
                        self.node(),
                        NodeId::Med(self.room_id.clone()),
                        Payload::RequestCavityScan {
                            case_id: self.case.case_id.clone(),
                        },
                    ));
                }
            }
            MtcInput::ManualOverride => {
                if !(self.case.phase == Phase::CavityScan && self.case.awaiting_override) {
                    return Err(self.case.invalid("manual_override"));
                }
                self.case.awaiting_override = false;
                out.alerts.push(Alert::new(
                    now,
                    Severity::Warning,
                    AlertKind::ManualOverride,
                    Some(self.case.case_id.clone()),
                    [],
                    "manual override accepted; count discrepancy signed off by staff",
                ));
                self.transition(Phase::Reconciled, &mut out)?;
                self.transition(Phase::AwaitingSpd, &mut out)?;
            }
            MtcInput::CavityScan {
                msg,
                tray_reads,
                bin_reads,
            } => {
                let Payload::CavityScanResult { case_id, scan } = &msg.payload else {
                    return Err(self.unexpected(msg));
                };
                if *case_id != self.case.case_id {
                    return Err(ProtocolError::UnknownCase(case_id.clone()));
                }
                if complete {
                    return Err(ProtocolError::StaleCase(case_id.clone()));
                }
                if self.case.phase != Phase::ClosingAnnounced {
                    return Err(self.case.invalid("cavity_scan_result"));
                }
                self.transition(Phase::CavityScan, &mut out)?;
                self.inventory(tray_reads, ChecklistStatus::OnTray, now, ids, &mut out);
                self.inventory(bin_reads, ChecklistStatus::Discarded, now, ids, &mut out);
                for tag in &scan.detected {
                    self.set_status(tag, ChecklistStatus::InCavityBelief, now, ids, &mut out);
                }
                let report = reconciliation::reconcile(&self.case.checklist, tray_reads, bin_reads, scan);
                let step = reconciliation::evaluate_pass(&mut self.case, &report, &self.config, now);
                out.alerts.extend(step.alerts);
                out.phases.extend(step.phases);
                out.rescan_at = step.rescan_at;
                out.report = Some(report);
            }
            MtcInput::Message(msg) => self.on_message(msg, now, ids, &mut out)?,
        }
        Ok(out)
    }

    fn unexpected(&self, msg: &ProtocolMessage) -> ProtocolError {
        ProtocolError::UnexpectedInput {
            node: self.node(),
            what: format!("{:?}", msg.payload),
        }
    }

    fn on_message(&mut self, msg: &ProtocolMessage, now: u64, ids: &mut MessageIds, out: &mut MtcOutput) -> Result<(), ProtocolError> {
        if self.case.phase == Phase::Complete {
            return Err(ProtocolError::StaleCase(self.case.case_id.clone()));
        }
        let case_id = Some(self.case.case_id.clone());
        match &msg.payload {
            Payload::NewEquipmentInOR { tag_id } => {
                let listed = matches!(
                    self.case.checklist.status(tag_id),
                    Some(s) if s != ChecklistStatus::RemovedFromOR
                );
                if !listed {
                    self.set_status(tag_id, ChecklistStatus::InUse, now, ids, out);
                    out.alerts.push(Alert::new(
                        now,
                        Severity::Info,
                        AlertKind::NewEquipmentDetected,
                        case_id,
                        [tag_id.clone()],
                        format!("{tag_id} entered the OR off-cart; added to the monitoring list"),
                    ));
                }
            }
            Payload::EquipmentLeftOR { tag_id } => {
                let listed = matches!(
                    self.case.checklist.status(tag_id),
                    Some(s) if s != ChecklistStatus::RemovedFromOR
                );
                if listed {
                    self.set_status(tag_id, ChecklistStatus::RemovedFromOR, now, ids, out);
                    let severity = match self.case.phase {
                        Phase::ClosingAnnounced | Phase::CavityScan => Severity::Warning,
                        _ => Severity::Info,
                    };
                    out.alerts.push(Alert::new(
                        now,
                        severity,
                        AlertKind::EquipmentLeftOR,
                        case_id,
                        [tag_id.clone()],
                        format!("{tag_id} left the OR; removed from the monitoring list"),
                    ));
                }
            }
            Payload::SpdReadyAck { case_id: acked } => {
                if *acked != self.case.case_id {
                    return Err(ProtocolError::UnknownCase(acked.clone()));
                }
                self.case.spd_acked = true;
                if self.case.phase == Phase::AwaitingSpd {
                    self.transition(Phase::Complete, out)?;
                }
            }
            _ => return Err(self.unexpected(msg)),
        }
        Ok(())
    }
}
