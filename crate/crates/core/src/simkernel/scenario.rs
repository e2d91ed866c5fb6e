//! Scenario file format and validation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CaseId, ItemId, RoomId, SensorId, TagId};
use crate::model::{ItemKind, Location, Site, EQUIPMENT_ROOM, SPD_ROOM};
use crate::protocol::ClosingConfig;
use crate::sensing::{SensingError, SensorModel, DEFAULT_MTBF_S, DEFAULT_P_DETECT, DEFAULT_RANGE_M};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(msg.into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub horizon_s: u64,
    /// Operating rooms. The equipment room and SPD always exist.
    pub rooms: Vec<RoomId>,
    pub items: Vec<ItemSpec>,
    pub sensors: BTreeMap<SensorId, SensorSpec>,
    pub cases: Vec<CaseSpec>,
    pub events: Vec<EventSpec>,
    pub bus: BusConfig,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemSpec {
    pub id: ItemId,
    pub tag: TagId,
    pub kind: ItemKind,
    #[serde(default = "yes")]
    pub sterile: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorRole {
    Entrance,
    Tray,
    Bin,
    Med,
}

impl SensorRole {
    pub fn name(self) -> &'static str {
        match self {
            SensorRole::Entrance => "entrance",
            SensorRole::Tray => "tray",
            SensorRole::Bin => "bin",
            SensorRole::Med => "med",
        }
    }
}

fn default_range() -> f64 {
    DEFAULT_RANGE_M
}
fn default_p() -> f64 {
    DEFAULT_P_DETECT
}
fn default_mtbf() -> f64 {
    DEFAULT_MTBF_S
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub room: RoomId,
    pub role: SensorRole,
    #[serde(default = "default_range")]
    pub range_m: f64,
    #[serde(default = "default_p")]
    pub p_detect: f64,
    #[serde(default = "default_mtbf")]
    pub mtbf_s: f64,
    #[serde(default)]
    pub mttr_s: f64,
}

impl SensorSpec {
    pub fn new(room: impl Into<RoomId>, role: SensorRole, model: SensorModel) -> Self {
        Self {
            room: room.into(),
            role,
            range_m: model.range_m,
            p_detect: model.p_detect,
            mtbf_s: model.mtbf_s,
            mttr_s: model.mttr_s,
        }
    }

    pub fn model(&self) -> SensorModel {
        SensorModel {
            range_m: self.range_m,
            p_detect: self.p_detect,
            mtbf_s: self.mtbf_s,
            mttr_s: self.mttr_s,
        }
    }
}

fn default_passes() -> u32 {
    ClosingConfig::default().scan_passes
}
fn default_max_rescans() -> u32 {
    ClosingConfig::default().max_rescans
}
fn default_rescan_delay() -> u64 {
    ClosingConfig::default().rescan_delay_s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseSpec {
    pub id: CaseId,
    pub room: RoomId,
    #[serde(default)]
    pub start_s: u64,
    #[serde(default = "default_passes")]
    pub scan_passes: u32,
    #[serde(default = "default_max_rescans")]
    pub max_rescans: u32,
    #[serde(default = "default_rescan_delay")]
    pub rescan_delay_s: u64,
}

impl CaseSpec {
    pub fn new(id: impl Into<CaseId>, room: impl Into<RoomId>) -> Self {
        Self {
            id: id.into(),
            room: room.into(),
            start_s: 0,
            scan_passes: default_passes(),
            max_rescans: default_max_rescans(),
            rescan_delay_s: default_rescan_delay(),
        }
    }

    pub fn closing_config(&self) -> ClosingConfig {
        ClosingConfig {
            scan_passes: self.scan_passes,
            max_rescans: self.max_rescans,
            rescan_delay_s: self.rescan_delay_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub t: u64,
    #[serde(flatten)]
    pub action: Action,
}

/// Staff and world actions. Item moves carry an optional read distance
/// applied to the entrance reads they trigger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Move {
        item: ItemId,
        to: Location,
        #[serde(default, skip_serializing_if = "is_zero")]
        distance_m: f64,
    },
    PlaceInCavity {
        item: ItemId,
    },
    RemoveFromCavity {
        item: ItemId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<Location>,
    },
    Discard {
        item: ItemId,
    },
    CarryOut {
        item: ItemId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<Location>,
        #[serde(default, skip_serializing_if = "is_zero")]
        distance_m: f64,
    },
    AnnounceClosing {
        case: CaseId,
    },
    SpdAck {
        case: CaseId,
    },
    ManualOverride {
        case: CaseId,
    },
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl Action {
    pub fn item(&self) -> Option<&ItemId> {
        match self {
            Action::Move { item, .. }
            | Action::PlaceInCavity { item }
            | Action::RemoveFromCavity { item, .. }
            | Action::Discard { item }
            | Action::CarryOut { item, .. } => Some(item),
            _ => None,
        }
    }

    pub fn case(&self) -> Option<&CaseId> {
        match self {
            Action::AnnounceClosing { case } | Action::SpdAck { case } | Action::ManualOverride { case } => Some(case),
            _ => None,
        }
    }

    fn target(&self) -> Option<&Location> {
        match self {
            Action::Move { to, .. } => Some(to),
            Action::RemoveFromCavity { to, .. } | Action::CarryOut { to, .. } => to.as_ref(),
            _ => None,
        }
    }
}

fn default_latency() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusConfig {
    #[serde(default = "default_latency")]
    pub latency_s: u64,
    #[serde(default)]
    pub drop_rate: f64,
    /// Per-link overrides keyed by node class (`room_sensor`, `med`, `mtc`,
    /// `cms`, `spd`).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkSpec>,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self {
            latency_s: default_latency(),
            drop_rate: 0.0,
            links: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_rate: Option<f64>,
}

const NODE_KINDS: [&str; 5] = ["room_sensor", "med", "mtc", "cms", "spd"];

/// Parses and validates a scenario file.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    /// Empty scenario with default bus and no rooms.
    pub fn empty(name: impl Into<String>, seed: u64, horizon_s: u64) -> Self {
        Self {
            name: name.into(),
            seed,
            horizon_s,
            rooms: Vec::new(),
            items: Vec::new(),
            sensors: BTreeMap::new(),
            cases: Vec::new(),
            events: Vec::new(),
            bus: BusConfig::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Every room with an entrance sensor: the equipment room, the SPD and
    /// the operating rooms.
    pub fn all_rooms(&self) -> Vec<RoomId> {
        let mut rooms = vec![RoomId::from(EQUIPMENT_ROOM), RoomId::from(SPD_ROOM)];
        rooms.extend(self.rooms.iter().cloned());
        rooms
    }

    /// Sensor for every (room, role) slot; missing slots get a default model
    /// under id `<room>/<role>`.
    pub fn sensor_layout(&self) -> BTreeMap<(RoomId, SensorRole), (SensorId, SensorModel)> {
        let mut layout = BTreeMap::new();
        for room in self.all_rooms() {
            let roles: &[SensorRole] = if self.rooms.contains(&room) {
                &[SensorRole::Entrance, SensorRole::Tray, SensorRole::Bin, SensorRole::Med]
            } else {
                &[SensorRole::Entrance]
            };
            for role in roles {
                layout.insert(
                    (room.clone(), *role),
                    (SensorId::new(format!("{room}/{}", role.name())), SensorModel::default()),
                );
            }
        }
        for (id, spec) in &self.sensors {
            layout.insert((spec.room.clone(), spec.role), (id.clone(), spec.model()));
        }
        layout
    }

    /// Applies `model` to every sensor slot, explicit or defaulted.
    pub fn with_all_sensors(mut self, model: SensorModel) -> Self {
        let layout = self.sensor_layout();
        self.sensors = layout
            .into_iter()
            .map(|((room, role), (id, _))| (id, SensorSpec::new(room, role, model)))
            .collect();
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.horizon_s == 0 {
            return Err(invalid("horizon_s must be > 0"));
        }
        let mut rooms = BTreeSet::new();
        for room in &self.rooms {
            let r = room.as_str();
            if r.is_empty() || r.contains('/') || r.contains(':') {
                return Err(invalid(format!("bad room id {r:?}")));
            }
            if r == EQUIPMENT_ROOM || r == SPD_ROOM || r == "EquipmentRoom" || r == "SPD" {
                return Err(invalid(format!("room id {r:?} is reserved")));
            }
            if !rooms.insert(room) {
                return Err(invalid(format!("duplicate room {r}")));
            }
        }
        let known_room = |room: &RoomId| {
            rooms.contains(room) || room.as_str() == EQUIPMENT_ROOM || room.as_str() == SPD_ROOM
        };

        let mut items = BTreeSet::new();
        let mut tags = BTreeSet::new();
        for item in &self.items {
            if !items.insert(&item.id) {
                return Err(invalid(format!("duplicate item {}", item.id)));
            }
            if !tags.insert(&item.tag) {
                return Err(invalid(format!("duplicate tag {}", item.tag)));
            }
        }

        let mut slots = BTreeSet::new();
        for (id, spec) in &self.sensors {
            if !known_room(&spec.room) {
                return Err(invalid(format!("sensor {id}: unknown room {}", spec.room)));
            }
            if spec.role != SensorRole::Entrance && !rooms.contains(&spec.room) {
                return Err(invalid(format!(
                    "sensor {id}: {} sensors only exist in operating rooms",
                    spec.role.name()
                )));
            }
            if !slots.insert((&spec.room, spec.role)) {
                return Err(invalid(format!("sensor {id}: duplicate {} sensor in {}", spec.role.name(), spec.room)));
            }
            spec.model()
                .validate()
                .map_err(|e: SensingError| invalid(format!("sensor {id}: {e}")))?;
        }

        let mut case_ids = BTreeSet::new();
        let mut case_rooms = BTreeMap::new();
        for case in &self.cases {
            if !case_ids.insert(&case.id) {
                return Err(invalid(format!("duplicate case {}", case.id)));
            }
            if !rooms.contains(&case.room) {
                return Err(invalid(format!("case {}: unknown room {}", case.id, case.room)));
            }
            if case_rooms.insert(&case.room, &case.id).is_some() {
                return Err(invalid(format!("room {} has more than one case", case.room)));
            }
            if case.scan_passes == 0 {
                return Err(invalid(format!("case {}: scan_passes must be >= 1", case.id)));
            }
            if case.rescan_delay_s == 0 {
                return Err(invalid(format!("case {}: rescan_delay_s must be >= 1", case.id)));
            }
            if case.start_s > self.horizon_s {
                return Err(invalid(format!("case {}: starts after horizon", case.id)));
            }
        }

        let mut last_t = 0;
        let mut closing_announced: BTreeMap<&RoomId, u64> = BTreeMap::new();
        for (i, event) in self.events.iter().enumerate() {
            if event.t < last_t {
                return Err(invalid(format!("events out of order at index {i}")));
            }
            last_t = event.t;
            if event.t > self.horizon_s {
                return Err(invalid(format!("event {i} after horizon")));
            }
            if let Some(item) = event.action.item() {
                if !items.contains(item) {
                    return Err(invalid(format!("unknown item {item} in event {i}")));
                }
            }
            if let Some(case) = event.action.case() {
                if !case_ids.contains(case) {
                    return Err(invalid(format!("unknown case {case} in event {i}")));
                }
            }
            if let Some(loc) = event.action.target() {
                if let Site::OperatingRoom(room) = loc.site() {
                    if !rooms.contains(room) {
                        return Err(invalid(format!("unknown room {room} in event {i}")));
                    }
                }
            }
            match &event.action {
                Action::AnnounceClosing { case } => {
                    let room = self.cases.iter().find(|c| &c.id == case).map(|c| &c.room);
                    if let Some(room) = room {
                        closing_announced.entry(room).or_insert(event.t);
                    }
                }
                Action::Move { to, distance_m, .. } => {
                    if to.sub() == crate::model::SubLocation::PatientCavity {
                        return Err(invalid(format!(
                            "event {i}: use place_in_cavity to put items in the patient cavity"
                        )));
                    }
                    if !(*distance_m >= 0.0) {
                        return Err(invalid(format!("event {i}: negative distance")));
                    }
                }
                Action::CarryOut { to, distance_m, .. } => {
                    if to.as_ref().is_some_and(|l| l.site().operating_room().is_some()) {
                        return Err(invalid(format!("event {i}: carry_out must leave the operating rooms")));
                    }
                    if !(*distance_m >= 0.0) {
                        return Err(invalid(format!("event {i}: negative distance")));
                    }
                }
                Action::RemoveFromCavity { to: Some(to), .. } => {
                    if to.sub() == crate::model::SubLocation::PatientCavity {
                        return Err(invalid(format!("event {i}: removal back into the cavity")));
                    }
                }
                _ => {}
            }
        }
        // The patient is being closed once closing is announced: nothing new
        // goes into the cavity of that room afterwards.
        let mut placed_in: BTreeMap<&ItemId, Option<&RoomId>> = BTreeMap::new();
        for (i, event) in self.events.iter().enumerate() {
            match &event.action {
                Action::Move { item, to, .. } => {
                    placed_in.insert(item, to.site().operating_room());
                }
                Action::CarryOut { item, .. } => {
                    placed_in.insert(item, None);
                }
                Action::PlaceInCavity { item } => {
                    if let Some(Some(room)) = placed_in.get(item) {
                        if closing_announced.get(room).is_some_and(|&t| event.t >= t) {
                            return Err(invalid(format!(
                                "event {i}: cavity placement after closing announced in {room}"
                            )));
                        }
                    }
                }
                _ => {}
            }
        }

        let bus = &self.bus;
        if !(0.0..=1.0).contains(&bus.drop_rate) {
            return Err(invalid("bus drop_rate outside [0, 1]"));
        }
        for link in &bus.links {
            for end in [&link.from, &link.to] {
                if !NODE_KINDS.contains(&end.as_str()) {
                    return Err(invalid(format!("bus link: unknown node class {end:?}")));
                }
            }
            if link.drop_rate.is_some_and(|d| !(0.0..=1.0).contains(&d)) {
                return Err(invalid("bus link drop_rate outside [0, 1]"));
            }
        }
        Ok(())
    }
}
