//! Ground truth: tagged items, physical locations and the world state.
//!
//! Nothing in the protocol layer reads [`WorldState`] directly. The kernel
//! consults it only to decide what a sensor could physically observe.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ItemId, RoomId, TagId};

/// Reserved room id of the equipment room entrance sensor.
pub const EQUIPMENT_ROOM: &str = "equipment-room";
/// Reserved room id of the sterile processing department entrance sensor.
pub const SPD_ROOM: &str = "spd";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate tag {0}")]
    DuplicateTag(TagId),
    #[error("duplicate item {0}")]
    DuplicateItem(ItemId),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("inconsistent move of {item}: event says from {claimed}, item is at {actual}")]
    InconsistentMove {
        item: ItemId,
        claimed: Location,
        actual: Location,
    },
    #[error("move of {0} does not change its location")]
    NullMove(ItemId),
    #[error("event at t={event}s precedes clock t={clock}s")]
    ClockRegression { event: u64, clock: u64 },
    #[error("invalid location: {0}")]
    InvalidLocation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ItemKind {
    Sponge,
    Needle,
    Blade,
    Guidewire,
    Instrument,
    Consumable,
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquipmentItem {
    pub item_id: ItemId,
    pub tag_id: TagId,
    pub kind: ItemKind,
    pub sterile: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    EquipmentRoom,
    Spd,
    OperatingRoom(RoomId),
}

impl Site {
    /// Room id of the entrance sensor guarding this site.
    pub fn room_id(&self) -> RoomId {
        match self {
            Site::EquipmentRoom => RoomId::from(EQUIPMENT_ROOM),
            Site::Spd => RoomId::from(SPD_ROOM),
            Site::OperatingRoom(room) => room.clone(),
        }
    }

    pub fn from_room_id(room: &RoomId) -> Site {
        match room.as_str() {
            EQUIPMENT_ROOM => Site::EquipmentRoom,
            SPD_ROOM => Site::Spd,
            _ => Site::OperatingRoom(room.clone()),
        }
    }

    pub fn operating_room(&self) -> Option<&RoomId> {
        match self {
            Site::OperatingRoom(room) => Some(room),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubLocation {
    None,
    ToolTray,
    TrashBin,
    PatientCavity,
    StaffCarried,
    RoomSpace,
}

/// A physical place. Sub-locations only exist inside an operating room.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Location {
    site: Site,
    sub: SubLocation,
}

impl Location {
    pub fn new(site: Site, sub: SubLocation) -> Result<Self, ModelError> {
        if sub != SubLocation::None && site.operating_room().is_none() {
            return Err(ModelError::InvalidLocation(format!(
                "{sub:?} outside an operating room"
            )));
        }
        Ok(Self { site, sub })
    }

    pub fn equipment_room() -> Self {
        Self {
            site: Site::EquipmentRoom,
            sub: SubLocation::None,
        }
    }

    pub fn spd() -> Self {
        Self {
            site: Site::Spd,
            sub: SubLocation::None,
        }
    }

    pub fn in_or(room: impl Into<RoomId>, sub: SubLocation) -> Self {
        Self {
            site: Site::OperatingRoom(room.into()),
            sub,
        }
    }

    pub fn site(&self) -> &Site {
        &self.site
    }

    pub fn sub(&self) -> SubLocation {
        self.sub
    }

    /// True if this is `sub` inside operating room `room`.
    pub fn is(&self, room: &RoomId, sub: SubLocation) -> bool {
        self.sub == sub && self.site.operating_room() == Some(room)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.site, self.sub) {
            (Site::EquipmentRoom, _) => f.write_str("EquipmentRoom"),
            (Site::Spd, _) => f.write_str("SPD"),
            (Site::OperatingRoom(room), SubLocation::None) => write!(f, "{room}"),
            (Site::OperatingRoom(room), sub) => write!(f, "{room}/{sub:?}"),
        }
    }
}

impl FromStr for Location {
    type Err = ModelError;

    /// Parses `EquipmentRoom`, `SPD`, `<room>` or `<room>/<sub>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "EquipmentRoom" => return Ok(Self::equipment_room()),
            "SPD" => return Ok(Self::spd()),
            "" => return Err(ModelError::InvalidLocation("empty".into())),
            _ => {}
        }
        let (room, sub) = match s.split_once('/') {
            Some((room, sub)) => (room, sub),
            None => (s, "None"),
        };
        if room.is_empty() || room == EQUIPMENT_ROOM || room == SPD_ROOM {
            return Err(ModelError::InvalidLocation(s.to_owned()));
        }
        let sub = match sub {
            "None" => SubLocation::None,
            "ToolTray" => SubLocation::ToolTray,
            "TrashBin" => SubLocation::TrashBin,
            "PatientCavity" => SubLocation::PatientCavity,
            "StaffCarried" => SubLocation::StaffCarried,
            "RoomSpace" => SubLocation::RoomSpace,
            other => return Err(ModelError::InvalidLocation(format!("unknown sub-location {other}"))),
        };
        Ok(Self::in_or(room, sub))
    }
}

impl TryFrom<String> for Location {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Location> for String {
    fn from(loc: Location) -> String {
        loc.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveCause {
    StaffMove,
    Discard,
    PlaceInCavity,
    RemoveFromCavity,
    RoomTransit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEvent {
    pub time_s: u64,
    pub item_id: ItemId,
    pub from: Location,
    pub to: Location,
    pub cause: MoveCause,
}

/// Ground truth of the simulated hospital.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorldState {
    clock_s: u64,
    items: BTreeMap<ItemId, EquipmentItem>,
    by_tag: BTreeMap<TagId, ItemId>,
    placements: BTreeMap<ItemId, Location>,
    log: Vec<GroundTruthEvent>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new item in the equipment room.
    pub fn create_item(
        &mut self,
        item_id: impl Into<ItemId>,
        kind: ItemKind,
        tag_id: impl Into<TagId>,
        sterile: bool,
    ) -> Result<&EquipmentItem, ModelError> {
        let item_id = item_id.into();
        let tag_id = tag_id.into();
        if self.by_tag.contains_key(&tag_id) {
            return Err(ModelError::DuplicateTag(tag_id));
        }
        if self.items.contains_key(&item_id) {
            return Err(ModelError::DuplicateItem(item_id));
        }
        let item = EquipmentItem {
            item_id: item_id.clone(),
            tag_id: tag_id.clone(),
            kind,
            sterile,
        };
        self.by_tag.insert(tag_id, item_id.clone());
        self.placements
            .insert(item_id.clone(), Location::equipment_room());
        Ok(self.items.entry(item_id).or_insert(item))
    }

    pub fn apply_ground_truth(&mut self, event: GroundTruthEvent) -> Result<(), ModelError> {
        if event.time_s < self.clock_s {
            return Err(ModelError::ClockRegression {
                event: event.time_s,
                clock: self.clock_s,
            });
        }
        let actual = self
            .placements
            .get(&event.item_id)
            .ok_or_else(|| ModelError::UnknownItem(event.item_id.clone()))?;
        if *actual != event.from {
            return Err(ModelError::InconsistentMove {
                item: event.item_id.clone(),
                claimed: event.from.clone(),
                actual: actual.clone(),
            });
        }
        if event.from == event.to {
            return Err(ModelError::NullMove(event.item_id.clone()));
        }
        self.clock_s = event.time_s;
        self.placements
            .insert(event.item_id.clone(), event.to.clone());
        self.log.push(event);
        Ok(())
    }

    /// Advances the clock without moving anything.
    pub fn advance_to(&mut self, time_s: u64) {
        self.clock_s = self.clock_s.max(time_s);
    }

    /// Same items, all back in the equipment room, empty log.
    pub fn initial(&self) -> WorldState {
        WorldState {
            clock_s: 0,
            items: self.items.clone(),
            by_tag: self.by_tag.clone(),
            placements: self
                .items
                .keys()
                .map(|id| (id.clone(), Location::equipment_room()))
                .collect(),
            log: Vec::new(),
        }
    }

    /// Rebuilds a world by re-applying `log` onto `initial`.
    pub fn replay(initial: &WorldState, log: &[GroundTruthEvent]) -> Result<WorldState, ModelError> {
        let mut world = initial.clone();
        for event in log {
            world.apply_ground_truth(event.clone())?;
        }
        Ok(world)
    }

    pub fn clock_s(&self) -> u64 {
        self.clock_s
    }

    pub fn items(&self) -> impl Iterator<Item = &EquipmentItem> {
        self.items.values()
    }

    pub fn item(&self, id: &ItemId) -> Option<&EquipmentItem> {
        self.items.get(id)
    }

    pub fn item_by_tag(&self, tag: &TagId) -> Option<&EquipmentItem> {
        self.by_tag.get(tag).and_then(|id| self.items.get(id))
    }

    pub fn placement(&self, id: &ItemId) -> Option<&Location> {
        self.placements.get(id)
    }

    pub fn placements(&self) -> &BTreeMap<ItemId, Location> {
        &self.placements
    }

    pub fn log(&self) -> &[GroundTruthEvent] {
        &self.log
    }

    /// Tags of every item whose location satisfies `pred`, in tag order.
    pub fn tags_where(&self, mut pred: impl FnMut(&Location) -> bool) -> Vec<TagId> {
        let mut tags: Vec<TagId> = self
            .placements
            .iter()
            .filter(|(_, loc)| pred(loc))
            .map(|(id, _)| self.items[id].tag_id.clone())
            .collect();
        tags.sort();
        tags
    }

    /// Item count per location.
    pub fn occupancy(&self) -> BTreeMap<&Location, usize> {
        let mut counts = BTreeMap::new();
        for loc in self.placements.values() {
            *counts.entry(loc).or_insert(0) += 1;
        }
        counts
    }
}
