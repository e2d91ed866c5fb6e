#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rsb_core::model::{Location, Site, SubLocation};
use rsb_core::protocol::{ChecklistStatus, NodeId, Payload, Phase};
use rsb_core::simkernel::{load_scenario, RecordBody, Scenario, Trace};
use rsb_core::{CaseId, RoomId, TagId};

pub const GOLDEN: [&str; 6] = [
    "clean",
    "sponge-in-cavity",
    "sponge-retained",
    "new-equipment",
    "pocket-carry-out",
    "minimal",
];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

pub fn golden(name: &str) -> Scenario {
    let text = std::fs::read_to_string(scenario_path(name)).expect("scenario file");
    load_scenario(&text).expect("valid scenario")
}

/// Ground-truth placement of every item tag, folded from the trace alone.
pub fn truth_from_trace(trace: &Trace) -> BTreeMap<TagId, Location> {
    let mut tag_of = BTreeMap::new();
    let mut at = BTreeMap::new();
    for r in trace {
        match &r.body {
            RecordBody::Item { item_id, tag_id, .. } => {
                tag_of.insert(item_id.clone(), tag_id.clone());
                at.insert(tag_id.clone(), Location::equipment_room());
            }
            RecordBody::GroundTruth { event } => {
                at.insert(tag_of[&event.item_id].clone(), event.to.clone());
            }
            _ => {}
        }
    }
    at
}

pub fn in_room(loc: &Location, room: &RoomId) -> bool {
    loc.site() == &Site::OperatingRoom(room.clone())
}

/// Checklist status the MTC should hold for a tag at `loc` once it has
/// entered the room at least once.
pub fn expected_status(loc: &Location, room: &RoomId) -> ChecklistStatus {
    if !in_room(loc, room) {
        return ChecklistStatus::RemovedFromOR;
    }
    match loc.sub() {
        SubLocation::ToolTray => ChecklistStatus::OnTray,
        SubLocation::TrashBin => ChecklistStatus::Discarded,
        _ => ChecklistStatus::InUse,
    }
}

/// Final phase per case from phase records.
pub fn final_phases(trace: &Trace) -> BTreeMap<CaseId, Phase> {
    let mut out = BTreeMap::new();
    for r in trace {
        match &r.body {
            RecordBody::CaseOpened { case_id, .. } => {
                out.insert(case_id.clone(), Phase::Setup);
            }
            RecordBody::Phase { change } => {
                out.insert(change.case_id.clone(), change.to);
            }
            _ => {}
        }
    }
    out
}

/// Every `Complete` transition must follow a delivered SPD acknowledgment
/// that arrived while the case was awaiting it. Returns the offending case.
pub fn complete_without_ack(trace: &Trace) -> Option<CaseId> {
    let mut phase: BTreeMap<CaseId, Phase> = BTreeMap::new();
    let mut acked: BTreeSet<CaseId> = BTreeSet::new();
    for r in trace {
        match &r.body {
            RecordBody::Delivered { message } => {
                if let Payload::SpdReadyAck { case_id } = &message.payload {
                    if matches!(message.to, NodeId::Mtc(_)) && phase.get(case_id) == Some(&Phase::AwaitingSpd) {
                        acked.insert(case_id.clone());
                    }
                }
            }
            RecordBody::Phase { change } => {
                if change.to == Phase::Complete && !acked.contains(&change.case_id) {
                    return Some(change.case_id.clone());
                }
                phase.insert(change.case_id.clone(), change.to);
            }
            _ => {}
        }
    }
    None
}

/// Case ids that reached `Complete` while a ground-truth item was in the
/// cavity of their room. Computed from the trace without kernel state.
pub fn completed_with_retained(trace: &Trace) -> Vec<CaseId> {
    let mut tag_of = BTreeMap::new();
    let mut at: BTreeMap<TagId, Location> = BTreeMap::new();
    let mut room_of = BTreeMap::new();
    let mut bad = Vec::new();
    for r in trace {
        match &r.body {
            RecordBody::Item { item_id, tag_id, .. } => {
                tag_of.insert(item_id.clone(), tag_id.clone());
            }
            RecordBody::CaseOpened { case_id, room_id } => {
                room_of.insert(case_id.clone(), room_id.clone());
            }
            RecordBody::GroundTruth { event } => {
                at.insert(tag_of[&event.item_id].clone(), event.to.clone());
            }
            RecordBody::Phase { change } if change.to == Phase::Complete => {
                let room = &room_of[&change.case_id];
                if at.values().any(|l| l.is(room, SubLocation::PatientCavity)) {
                    bad.push(change.case_id.clone());
                }
            }
            _ => {}
        }
    }
    bad
}

/// Tag set carried by CMS-to-MTC messages in a trace.
pub fn cms_to_mtc_tags(trace: &Trace, delivered: bool) -> BTreeSet<TagId> {
    trace
        .iter()
        .filter_map(|r| match &r.body {
            RecordBody::Delivered { message } if delivered => Some(message),
            RecordBody::Dropped { message } if !delivered => Some(message),
            _ => None,
        })
        .filter(|m| m.from == NodeId::Cms && matches!(m.to, NodeId::Mtc(_)))
        .filter_map(|m| match &m.payload {
            Payload::NewEquipmentInOR { tag_id } | Payload::EquipmentLeftOR { tag_id } => Some(tag_id.clone()),
            _ => None,
        })
        .collect()
}

/// Outcome of the CMS-to-MTC fault experiment on one scenario.
#[derive(Debug)]
pub struct Divergence {
    /// Tags whose membership in the room differs between MTC belief and ground truth.
    pub lossy_diff: BTreeSet<TagId>,
    pub lossless_diff: BTreeSet<TagId>,
    /// Tags the zero-loss replay delivered from CMS to MTC.
    pub replay_tags: BTreeSet<TagId>,
    /// Tags in messages the lossy run dropped.
    pub dropped_tags: BTreeSet<TagId>,
}

fn belief_diff(s: &Scenario) -> (BTreeSet<TagId>, Trace) {
    use rsb_core::simkernel::{SimOptions, Simulation};
    let mut sim = Simulation::new(s, SimOptions::default());
    sim.run_until(s.horizon_s);
    let room = &s.cases[0].room;
    let truth = truth_from_trace(sim.trace());
    let physical: BTreeSet<TagId> = truth
        .iter()
        .filter(|(_, l)| in_room(l, room))
        .map(|(t, _)| t.clone())
        .collect();
    let believed = sim.mtc(room).expect("case room").case.checklist.expected();
    let diff = physical.symmetric_difference(&believed).cloned().collect();
    (diff, sim.trace().clone())
}

/// Runs `s` with every CMS-to-MTC message dropped and with a lossless bus.
pub fn cms_to_mtc_divergence(s: &Scenario) -> Divergence {
    use rsb_core::simkernel::LinkSpec;
    let mut lossless = s.clone();
    lossless.bus.drop_rate = 0.0;
    lossless.bus.links.clear();
    let mut lossy = lossless.clone();
    lossy.bus.links.push(LinkSpec {
        from: "cms".into(),
        to: "mtc".into(),
        latency_s: None,
        drop_rate: Some(1.0),
    });
    let (lossy_diff, lossy_trace) = belief_diff(&lossy);
    let (lossless_diff, lossless_trace) = belief_diff(&lossless);
    Divergence {
        lossy_diff,
        lossless_diff,
        replay_tags: cms_to_mtc_tags(&lossless_trace, true),
        dropped_tags: cms_to_mtc_tags(&lossy_trace, false),
    }
}
