use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::bus::{Bus, Delivery};
use super::scenario::{Action, EventSpec, Scenario, SensorRole};
use super::trace::{RecordBody, Trace};
use crate::ids::{CaseId, ItemId, RoomId, TagId};
use crate::model::{GroundTruthEvent, Location, ModelError, MoveCause, Site, SubLocation, WorldState};
use crate::protocol::{
    spd_acknowledge, Alert, AlertKind, CmsState, MessageIds, MtcInput, MtcOutput, MtcState, NodeId,
    Payload, Phase, ProtocolMessage, RoomSensorState, Severity, SurgeryCase,
};
use crate::reconciliation::Outcome;
use crate::rng::{stream, StreamRng};
use crate::sensing::{
    med_scan, read_tags, sensor_failure_schedule, ReadKind, ScanRegion, Sensor, TagReadEvent,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    /// Keep a full trace. Off for large enumerations and batches.
    pub record_trace: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { record_trace: true }
    }
}

/// Counters accumulated over one run.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub messages_delivered: u64,
    pub messages_dropped: u64,
    pub cavity_scans: u64,
    /// Tags physically in the cavity summed over all scans.
    pub cavity_tags_scanned: u64,
    pub cavity_tags_missed: u64,
    /// Same, restricted to the first scan of each case.
    pub first_scan_tags: u64,
    pub first_scan_missed: u64,
    pub alerts: BTreeMap<AlertKind, u64>,
    pub outcomes: BTreeMap<Outcome, u64>,
    pub errors: u64,
    pub reconciled_with_retained: u64,
    pub completed_with_retained: u64,
}

impl RunStats {
    pub fn merge(&mut self, other: &RunStats) {
        self.messages_delivered += other.messages_delivered;
        self.messages_dropped += other.messages_dropped;
        self.cavity_scans += other.cavity_scans;
        self.cavity_tags_scanned += other.cavity_tags_scanned;
        self.cavity_tags_missed += other.cavity_tags_missed;
        self.first_scan_tags += other.first_scan_tags;
        self.first_scan_missed += other.first_scan_missed;
        for (k, v) in &other.alerts {
            *self.alerts.entry(*k).or_default() += v;
        }
        for (k, v) in &other.outcomes {
            *self.outcomes.entry(*k).or_default() += v;
        }
        self.errors += other.errors;
        self.reconciled_with_retained += other.reconciled_with_retained;
        self.completed_with_retained += other.completed_with_retained;
    }
}

/// How one case ended.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: CaseId,
    pub room_id: RoomId,
    pub final_phase: Phase,
    pub last_outcome: Option<Outcome>,
    /// The last reconciliation flagged a problem and the case never reached
    /// `Reconciled` after it.
    pub unresolved: bool,
    /// Tags physically in the patient cavity at the horizon.
    pub retained_at_end: BTreeSet<TagId>,
    pub scans: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub stats: RunStats,
    pub cases: Vec<CaseResult>,
}

impl RunOutput {
    /// Any case finished with an unresolved safety finding.
    pub fn has_safety_finding(&self) -> bool {
        self.cases.iter().any(|c| c.unresolved)
    }
}

#[derive(Clone, Debug, Default)]
struct CaseTrack {
    last_outcome: Option<Outcome>,
    resolved: bool,
    scans: u32,
}

/// Messages in flight, ordered by due time, sender priority, then id.
type InFlight = BTreeMap<(u64, u8, u64), ProtocolMessage>;

/// Deterministic discrete-event simulation of one scenario.
///
/// Per time point the kernel starts due cases, applies scenario events in
/// declaration order, fires re-scan timers, then delivers due messages until
/// nothing more is due (zero-latency links deliver within the same tick).
#[derive(Clone, Debug)]
pub struct Simulation {
    name: String,
    seed: u64,
    horizon_s: u64,
    clock: Option<u64>,
    world: WorldState,
    sensors: BTreeMap<(RoomId, SensorRole), Sensor>,
    sensor_rngs: BTreeMap<(RoomId, SensorRole), StreamRng>,
    room_sensors: BTreeMap<RoomId, RoomSensorState>,
    cms: CmsState,
    mtcs: BTreeMap<RoomId, MtcState>,
    case_rooms: BTreeMap<CaseId, RoomId>,
    case_starts: BTreeSet<(u64, RoomId)>,
    tracks: BTreeMap<RoomId, CaseTrack>,
    pending: VecDeque<EventSpec>,
    timers: BTreeSet<(u64, RoomId)>,
    inflight: InFlight,
    bus: Bus,
    ids: MessageIds,
    record: bool,
    trace: Trace,
    stats: RunStats,
}

/// Runs a scenario to its horizon and returns the trace.
pub fn run(scenario: &Scenario) -> Trace {
    Simulation::new(scenario, SimOptions::default()).finish().trace
}

/// Runs a scenario to its horizon with full output.
pub fn run_full(scenario: &Scenario, options: SimOptions) -> RunOutput {
    Simulation::new(scenario, options).finish()
}

impl Simulation {
    /// Builds the initial state. The scenario is assumed valid.
    pub fn new(scenario: &Scenario, options: SimOptions) -> Self {
        let seed = scenario.seed;
        let horizon = scenario.horizon_s;
        let mut sim = Simulation {
            name: scenario.name.clone(),
            seed,
            horizon_s: horizon,
            clock: None,
            world: WorldState::new(),
            sensors: BTreeMap::new(),
            sensor_rngs: BTreeMap::new(),
            room_sensors: BTreeMap::new(),
            cms: CmsState::new(),
            mtcs: BTreeMap::new(),
            case_rooms: BTreeMap::new(),
            case_starts: BTreeSet::new(),
            tracks: BTreeMap::new(),
            pending: scenario.events.iter().cloned().collect(),
            timers: BTreeSet::new(),
            inflight: InFlight::new(),
            bus: Bus::new(scenario.bus.clone(), seed),
            ids: MessageIds::new(),
            record: options.record_trace,
            trace: Trace::new(),
            stats: RunStats::default(),
        };
        sim.log(
            0,
            RecordBody::Run {
                scenario: scenario.name.clone(),
                seed,
                horizon_s: horizon,
            },
        );

        for ((room, role), (id, model)) in scenario.sensor_layout() {
            let read_kind = match role {
                SensorRole::Entrance => ReadKind::RoomEntrance,
                SensorRole::Tray => ReadKind::Tray,
                SensorRole::Bin => ReadKind::Bin,
                SensorRole::Med => ReadKind::MedScan,
            };
            let outages = sensor_failure_schedule(&model, horizon, &mut stream(seed, &format!("failures:{id}")));
            sim.sensor_rngs
                .insert((room.clone(), role), stream(seed, &format!("sensor:{id}")));
            sim.sensors
                .insert((room, role), Sensor::new(id, model, read_kind).with_outages(outages));
        }

        let mut stock = Vec::new();
        for item in &scenario.items {
            sim.world
                .create_item(item.id.clone(), item.kind, item.tag.clone(), item.sterile)
                .expect("validated scenario has unique ids");
            sim.cms
                .register_at(item.tag.clone(), &Site::EquipmentRoom, 0);
            stock.push(item.tag.clone());
            sim.log(
                0,
                RecordBody::Item {
                    item_id: item.id.clone(),
                    tag_id: item.tag.clone(),
                    kind: item.kind,
                },
            );
        }
        for room in scenario.all_rooms() {
            let mut state = RoomSensorState::new(room.clone());
            if room.as_str() == crate::model::EQUIPMENT_ROOM {
                state = state.with_inside(stock.iter().cloned());
            }
            sim.room_sensors.insert(room, state);
        }
        for case in &scenario.cases {
            sim.cms.open_case(case.id.clone(), case.room.clone());
            sim.mtcs.insert(
                case.room.clone(),
                MtcState::new(SurgeryCase::new(case.id.clone(), case.room.clone()), case.closing_config()),
            );
            sim.case_rooms.insert(case.id.clone(), case.room.clone());
            sim.case_starts.insert((case.start_s, case.room.clone()));
            sim.tracks.insert(case.room.clone(), CaseTrack::default());
            sim.log(
                0,
                RecordBody::CaseOpened {
                    case_id: case.id.clone(),
                    room_id: case.room.clone(),
                },
            );
        }
        sim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon_s(&self) -> u64 {
        self.horizon_s
    }

    /// Last processed time point.
    pub fn clock(&self) -> Option<u64> {
        self.clock
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn cms(&self) -> &CmsState {
        &self.cms
    }

    pub fn mtc(&self, room: &RoomId) -> Option<&MtcState> {
        self.mtcs.get(room)
    }

    pub fn mtcs(&self) -> impl Iterator<Item = &MtcState> {
        self.mtcs.values()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn in_flight(&self) -> usize {
        self.inflight.len()
    }

    /// Queues an extra event. It must not be earlier than the last processed
    /// time point or any already queued event.
    pub fn inject(&mut self, event: EventSpec) {
        debug_assert!(self.clock.is_none_or(|c| event.t > c));
        debug_assert!(self.pending.back().is_none_or(|e| e.t <= event.t));
        self.pending.push_back(event);
    }

    fn next_time(&self) -> Option<u64> {
        [
            self.pending.front().map(|e| e.t),
            self.case_starts.first().map(|(t, _)| *t),
            self.timers.first().map(|(t, _)| *t),
            self.inflight.first_key_value().map(|((t, _, _), _)| *t),
        ]
        .into_iter()
        .flatten()
        .min()
    }

    /// Processes the next time point at or before the horizon. Returns the
    /// time processed.
    pub fn step(&mut self) -> Option<u64> {
        let t = self.next_time()?;
        if t > self.horizon_s {
            return None;
        }
        self.clock = Some(t);
        self.world.advance_to(t);

        while let Some((start, _)) = self.case_starts.first() {
            if *start > t {
                break;
            }
            let (_, room) = self.case_starts.pop_first().expect("nonempty");
            self.mtc_input(&room, MtcInput::Start, t);
        }
        while self.pending.front().is_some_and(|e| e.t <= t) {
            let event = self.pending.pop_front().expect("nonempty");
            self.apply(&event.action, t);
        }
        while let Some((due, _)) = self.timers.first() {
            if *due > t {
                break;
            }
            let (_, room) = self.timers.pop_first().expect("nonempty");
            self.mtc_input(&room, MtcInput::RescanDue, t);
        }
        while let Some(entry) = self.inflight.first_entry() {
            if entry.key().0 > t {
                break;
            }
            let msg = entry.remove();
            self.dispatch(msg, t);
        }
        Some(t)
    }

    /// Processes every time point up to and including `t`.
    pub fn run_until(&mut self, t: u64) {
        let limit = t.min(self.horizon_s);
        while self.next_time().is_some_and(|n| n <= limit) {
            self.step();
        }
    }

    pub fn finish(mut self) -> RunOutput {
        self.run_until(self.horizon_s);
        let cases = self
            .mtcs
            .values()
            .map(|mtc| {
                let track = self.tracks.get(&mtc.room_id).cloned().unwrap_or_default();
                CaseResult {
                    case_id: mtc.case.case_id.clone(),
                    room_id: mtc.room_id.clone(),
                    final_phase: mtc.case.phase,
                    last_outcome: track.last_outcome,
                    unresolved: matches!(
                        track.last_outcome,
                        Some(Outcome::RsbSuspected | Outcome::CountMismatch)
                    ) && !track.resolved,
                    retained_at_end: self.cavity_tags(&mtc.room_id),
                    scans: track.scans,
                }
            })
            .collect();
        RunOutput {
            trace: self.trace,
            stats: self.stats,
            cases,
        }
    }

    fn log(&mut self, tick: u64, body: RecordBody) {
        if self.record {
            self.trace.push(tick, body);
        }
    }

    fn alert(&mut self, alert: Alert, t: u64) {
        *self.stats.alerts.entry(alert.kind).or_default() += 1;
        self.log(t, RecordBody::Alert { alert });
    }

    fn error(&mut self, node: impl ToString, error: impl ToString, t: u64) {
        self.stats.errors += 1;
        self.log(
            t,
            RecordBody::Error {
                node: node.to_string(),
                error: error.to_string(),
            },
        );
    }

    fn send(&mut self, msg: ProtocolMessage, t: u64) {
        match self.bus.send(&msg, t) {
            Delivery::Delivered(at) => {
                self.inflight
                    .insert((at, msg.from.priority(), msg.msg_id), msg);
            }
            Delivery::Dropped => {
                self.stats.messages_dropped += 1;
                self.log(t, RecordBody::Dropped { message: msg });
            }
        }
    }

    fn case_of_room(&self, room: &RoomId) -> Option<CaseId> {
        self.mtcs.get(room).map(|m| m.case.case_id.clone())
    }

    fn sensor_down_alert(&mut self, room: &RoomId, role: SensorRole, t: u64) {
        let id = self.sensors[&(room.clone(), role)].id.clone();
        let alert = Alert::new(
            t,
            Severity::Warning,
            AlertKind::SensorDown,
            self.case_of_room(room),
            [],
            format!("sensor {id} is down"),
        );
        self.alert(alert, t);
    }

    /// One read attempt by the sensor in slot `(room, role)`.
    fn read(&mut self, room: &RoomId, role: SensorRole, candidates: &[(TagId, f64)], t: u64) -> Option<Vec<TagReadEvent>> {
        let key = (room.clone(), role);
        let sensor = self.sensors.get(&key)?;
        let rng = self.sensor_rngs.get_mut(&key)?;
        match read_tags(sensor, t, candidates, rng) {
            Ok(reads) => Some(reads),
            Err(_) => {
                self.sensor_down_alert(room, role, t);
                None
            }
        }
    }

    fn tags_at(&self, room: &RoomId, sub: SubLocation) -> Vec<(TagId, f64)> {
        self.world
            .tags_where(|loc| loc.is(room, sub))
            .into_iter()
            .map(|t| (t, 0.0))
            .collect()
    }

    fn cavity_tags(&self, room: &RoomId) -> BTreeSet<TagId> {
        self.world
            .tags_where(|loc| loc.is(room, SubLocation::PatientCavity))
            .into_iter()
            .collect()
    }

    fn apply_output(&mut self, room: &RoomId, out: MtcOutput, t: u64) {
        for change in out.phases {
            if change.to == Phase::Reconciled || change.to == Phase::Complete {
                let retained = !self.cavity_tags(room).is_empty();
                if retained && change.to == Phase::Reconciled {
                    self.stats.reconciled_with_retained += 1;
                }
                if retained && change.to == Phase::Complete {
                    self.stats.completed_with_retained += 1;
                }
            }
            if change.to == Phase::Reconciled {
                if let Some(track) = self.tracks.get_mut(room) {
                    track.resolved = true;
                }
            }
            self.log(t, RecordBody::Phase { change });
        }
        for change in out.checklist {
            self.log(t, RecordBody::Checklist { change });
        }
        if let Some(report) = out.report {
            *self.stats.outcomes.entry(report.outcome).or_default() += 1;
            if let Some(track) = self.tracks.get_mut(room) {
                track.last_outcome = Some(report.outcome);
                track.resolved = false;
            }
            self.log(t, RecordBody::Reconciliation { report });
        }
        for alert in out.alerts {
            self.alert(alert, t);
        }
        for msg in out.messages {
            self.send(msg, t);
        }
        if let Some(at) = out.rescan_at {
            self.timers.insert((at, room.clone()));
        }
    }

    fn mtc_input(&mut self, room: &RoomId, input: MtcInput<'_>, t: u64) {
        let Some(mtc) = self.mtcs.get_mut(room) else {
            self.error(NodeId::Mtc(room.clone()), "no case in this room", t);
            return;
        };
        match mtc.handle(input, t, &mut self.ids) {
            Ok(out) => self.apply_output(room, out, t),
            Err(e) => self.error(NodeId::Mtc(room.clone()), e, t),
        }
    }

    fn inventory(&mut self, room: &RoomId, role: SensorRole, t: u64) {
        if !self.mtcs.contains_key(room) {
            return;
        }
        let sub = match role {
            SensorRole::Tray => SubLocation::ToolTray,
            _ => SubLocation::TrashBin,
        };
        let candidates = self.tags_at(room, sub);
        let Some(reads) = self.read(room, role, &candidates, t) else {
            return;
        };
        let input = match role {
            SensorRole::Tray => MtcInput::TrayInventory(&reads),
            _ => MtcInput::BinInventory(&reads),
        };
        self.mtc_input(room, input, t);
    }

    fn entrance(&mut self, room: &RoomId, tag: &TagId, distance: f64, t: u64) {
        let Some(reads) = self.read(room, SensorRole::Entrance, &[(tag.clone(), distance)], t) else {
            return;
        };
        let Some(state) = self.room_sensors.get_mut(room) else {
            return;
        };
        for msg in state.on_reads(&reads, &mut self.ids) {
            self.send(msg, t);
        }
    }

    /// Applies a ground-truth move and fires the reads it triggers.
    fn move_item(&mut self, item: &ItemId, to: Location, cause: MoveCause, distance: f64, t: u64) {
        let Some(from) = self.world.placement(item).cloned() else {
            self.error("world", ModelError::UnknownItem(item.clone()), t);
            return;
        };
        let event = GroundTruthEvent {
            time_s: t,
            item_id: item.clone(),
            from: from.clone(),
            to: to.clone(),
            cause,
        };
        if let Err(e) = self.world.apply_ground_truth(event.clone()) {
            self.error("world", e, t);
            return;
        }
        self.log(t, RecordBody::GroundTruth { event });
        let tag = self.world.item(item).expect("known item").tag_id.clone();

        if from.site() != to.site() {
            self.entrance(&from.site().room_id(), &tag, distance, t);
            self.entrance(&to.site().room_id(), &tag, distance, t);
        }
        for role in [SensorRole::Tray, SensorRole::Bin] {
            let sub = if role == SensorRole::Tray {
                SubLocation::ToolTray
            } else {
                SubLocation::TrashBin
            };
            let mut rooms: Vec<RoomId> = [&from, &to]
                .into_iter()
                .filter(|l| l.sub() == sub)
                .filter_map(|l| l.site().operating_room().cloned())
                .collect();
            rooms.dedup();
            for room in rooms {
                self.inventory(&room, role, t);
            }
        }
    }

    fn current_or(&mut self, item: &ItemId, what: &str, t: u64) -> Option<(RoomId, Location)> {
        let Some(loc) = self.world.placement(item).cloned() else {
            self.error("world", ModelError::UnknownItem(item.clone()), t);
            return None;
        };
        match loc.site().operating_room() {
            Some(room) => Some((room.clone(), loc)),
            None => {
                self.error("world", format!("{what}: item {item} is not in an operating room (at {loc})"), t);
                None
            }
        }
    }

    fn case_room(&mut self, case: &CaseId, t: u64) -> Option<RoomId> {
        let room = self.case_rooms.get(case).cloned();
        if room.is_none() {
            self.error("kernel", format!("unknown case {case}"), t);
        }
        room
    }

    fn apply(&mut self, action: &Action, t: u64) {
        match action {
            Action::Move { item, to, distance_m } => {
                let from_site = self.world.placement(item).map(|l| l.site().clone());
                let cause = if from_site.as_ref() != Some(to.site()) {
                    MoveCause::RoomTransit
                } else if to.sub() == SubLocation::TrashBin {
                    MoveCause::Discard
                } else {
                    MoveCause::StaffMove
                };
                self.move_item(item, to.clone(), cause, *distance_m, t);
            }
            Action::PlaceInCavity { item } => {
                if let Some((room, _)) = self.current_or(item, "place_in_cavity", t) {
                    let to = Location::in_or(room, SubLocation::PatientCavity);
                    self.move_item(item, to, MoveCause::PlaceInCavity, 0.0, t);
                }
            }
            Action::RemoveFromCavity { item, to } => {
                if let Some((room, loc)) = self.current_or(item, "remove_from_cavity", t) {
                    if loc.sub() != SubLocation::PatientCavity {
                        self.error("world", format!("remove_from_cavity: item {item} is not in the cavity"), t);
                        return;
                    }
                    let to = to
                        .clone()
                        .unwrap_or_else(|| Location::in_or(room, SubLocation::ToolTray));
                    self.move_item(item, to, MoveCause::RemoveFromCavity, 0.0, t);
                }
            }
            Action::Discard { item } => {
                if let Some((room, _)) = self.current_or(item, "discard", t) {
                    let to = Location::in_or(room, SubLocation::TrashBin);
                    self.move_item(item, to, MoveCause::Discard, 0.0, t);
                }
            }
            Action::CarryOut { item, to, distance_m } => {
                let to = to.clone().unwrap_or_else(Location::equipment_room);
                self.move_item(item, to, MoveCause::RoomTransit, *distance_m, t);
            }
            Action::AnnounceClosing { case } => {
                if let Some(room) = self.case_room(case, t) {
                    self.mtc_input(&room, MtcInput::AnnounceClosing, t);
                }
            }
            Action::ManualOverride { case } => {
                if let Some(room) = self.case_room(case, t) {
                    self.mtc_input(&room, MtcInput::ManualOverride, t);
                }
            }
            Action::SpdAck { case } => {
                let mtc_case = self
                    .case_rooms
                    .get(case)
                    .and_then(|room| self.mtcs.get(room))
                    .map(|m| &m.case);
                match spd_acknowledge(mtc_case, case, t, &mut self.ids) {
                    Ok(msg) => self.send(msg, t),
                    Err(e) => self.error(NodeId::Spd, e, t),
                }
            }
        }
    }

    fn dispatch(&mut self, msg: ProtocolMessage, t: u64) {
        self.stats.messages_delivered += 1;
        self.log(t, RecordBody::Delivered { message: msg.clone() });
        match msg.to.clone() {
            NodeId::Cms => {
                let out = self.cms.handle(&msg, t, &mut self.ids);
                for alert in out.alerts {
                    self.alert(alert, t);
                }
                for m in out.messages {
                    self.send(m, t);
                }
            }
            NodeId::Mtc(room) => {
                if matches!(msg.payload, Payload::CavityScanResult { .. }) {
                    let tray = self.tags_at(&room, SubLocation::ToolTray);
                    let bin = self.tags_at(&room, SubLocation::TrashBin);
                    let tray_reads = self.read(&room, SensorRole::Tray, &tray, t).unwrap_or_default();
                    let bin_reads = self.read(&room, SensorRole::Bin, &bin, t).unwrap_or_default();
                    self.mtc_input(
                        &room,
                        MtcInput::CavityScan {
                            msg: &msg,
                            tray_reads: &tray_reads,
                            bin_reads: &bin_reads,
                        },
                        t,
                    );
                } else {
                    self.mtc_input(&room, MtcInput::Message(&msg), t);
                }
            }
            NodeId::Med(room) => self.med_request(&room, &msg, t),
            other => self.error(other, format!("no handler for {:?}", msg.payload), t),
        }
    }

    fn med_request(&mut self, room: &RoomId, msg: &ProtocolMessage, t: u64) {
        let Payload::RequestCavityScan { case_id } = &msg.payload else {
            self.error(NodeId::Med(room.clone()), format!("unexpected {:?}", msg.payload), t);
            return;
        };
        let Some(config) = self.mtcs.get(room).map(|m| m.config) else {
            self.error(NodeId::Med(room.clone()), "no case in this room", t);
            return;
        };
        let key = (room.clone(), SensorRole::Med);
        let Some(sensor) = self.sensors.get(&key) else {
            return;
        };
        if sensor.is_down(t) {
            self.sensor_down_alert(room, SensorRole::Med, t);
            self.timers.insert((t + config.rescan_delay_s, room.clone()));
            return;
        }
        let model = sensor.model;
        let cavity = self.tags_at(room, SubLocation::PatientCavity);
        let rng = self.sensor_rngs.get_mut(&key).expect("rng per sensor");
        let scan = match med_scan(ScanRegion::PatientCavity, &cavity, config.scan_passes, &model, rng) {
            Ok(scan) => scan,
            Err(e) => {
                self.error(NodeId::Med(room.clone()), e, t);
                return;
            }
        };
        let present = cavity.len() as u64;
        let missed = present - scan.detected.len() as u64;
        self.stats.cavity_scans += 1;
        self.stats.cavity_tags_scanned += present;
        self.stats.cavity_tags_missed += missed;
        if let Some(track) = self.tracks.get_mut(room) {
            if track.scans == 0 {
                self.stats.first_scan_tags += present;
                self.stats.first_scan_missed += missed;
            }
            track.scans += 1;
        }
        let reply = self.ids.issue(
            t,
            NodeId::Med(room.clone()),
            NodeId::Mtc(room.clone()),
            Payload::CavityScanResult {
                case_id: case_id.clone(),
                scan,
            },
        );
        self.send(reply, t);
    }
}
