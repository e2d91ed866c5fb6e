use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::scenario::{Action, BusConfig, CaseSpec, EventSpec, ItemSpec, Scenario};
use crate::ids::{CaseId, ItemId, RoomId};
use crate::model::{ItemKind, Location, Site, SubLocation};
use crate::sensing::SensorModel;

/// Shape of randomly generated scenarios.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub max_rooms: usize,
    pub max_items: usize,
    pub max_events: usize,
    pub max_latency_s: u64,
    pub sensor: SensorModel,
    pub drop_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            max_rooms: 2,
            max_items: 6,
            max_events: 30,
            max_latency_s: 2,
            sensor: SensorModel::perfect(),
            drop_rate: 0.0,
        }
    }
}

const KINDS: [ItemKind; 6] = [
    ItemKind::Sponge,
    ItemKind::Needle,
    ItemKind::Blade,
    ItemKind::Guidewire,
    ItemKind::Instrument,
    ItemKind::Consumable,
];

const OR_SUBS: [SubLocation; 3] = [SubLocation::ToolTray, SubLocation::RoomSpace, SubLocation::StaffCarried];

/// Produces a random scenario that passes validation and whose item events
/// are all physically possible. Cases are usually closed and acknowledged,
/// with items sometimes left in the cavity.
pub fn random_scenario<R: Rng + ?Sized>(config: &GeneratorConfig, seed: u64, rng: &mut R) -> Scenario {
    let n_rooms = rng.random_range(1..=config.max_rooms.max(1));
    let n_items = rng.random_range(1..=config.max_items.max(1));
    let rooms: Vec<RoomId> = (1..=n_rooms).map(|i| RoomId::new(format!("OR-{i}"))).collect();
    let items: Vec<ItemSpec> = (0..n_items)
        .map(|i| ItemSpec {
            id: ItemId::new(format!("item-{i}")),
            tag: format!("T-{i:03}").into(),
            kind: *KINDS.choose(rng).expect("nonempty"),
            sterile: true,
        })
        .collect();
    let case_of = |room: &RoomId| CaseId::new(format!("case-{room}"));

    let mut at: BTreeMap<ItemId, Location> = items
        .iter()
        .map(|i| (i.id.clone(), Location::equipment_room()))
        .collect();
    let mut closed: BTreeMap<RoomId, bool> = rooms.iter().map(|r| (r.clone(), false)).collect();
    let mut events = Vec::new();
    let mut t = 0u64;
    let n_events = rng.random_range(1..=config.max_events.max(1));

    for _ in 0..n_events {
        t += rng.random_range(1..=20);
        let item = &items[rng.random_range(0..items.len())].id;
        let loc = at[item].clone();
        let room = rooms[rng.random_range(0..rooms.len())].clone();
        let choice = rng.random_range(0..10);
        let action = match (loc.site(), choice) {
            (_, 0) if !closed[&room] => {
                closed.insert(room.clone(), true);
                Some(Action::AnnounceClosing { case: case_of(&room) })
            }
            (_, 1) if closed[&room] => Some(Action::SpdAck { case: case_of(&room) }),
            (Site::OperatingRoom(r), 2..=4) if loc.sub() != SubLocation::PatientCavity && !closed[r] => {
                Some(Action::PlaceInCavity { item: item.clone() })
            }
            (Site::OperatingRoom(_), 2..=6) if loc.sub() == SubLocation::PatientCavity => {
                Some(Action::RemoveFromCavity { item: item.clone(), to: None })
            }
            (Site::OperatingRoom(_), 5) if loc.sub() != SubLocation::TrashBin => Some(Action::Discard { item: item.clone() }),
            (Site::OperatingRoom(_), 6) => {
                let to = if rng.random_bool(0.8) {
                    Location::equipment_room()
                } else {
                    Location::spd()
                };
                Some(Action::CarryOut { item: item.clone(), to: Some(to), distance_m: 0.0 })
            }
            (Site::OperatingRoom(r), _) if loc.sub() != SubLocation::PatientCavity => {
                let sub = *OR_SUBS.choose(rng).expect("nonempty");
                (sub != loc.sub()).then(|| Action::Move {
                    item: item.clone(),
                    to: Location::in_or(r.clone(), sub),
                    distance_m: 0.0,
                })
            }
            (Site::OperatingRoom(_), _) => None,
            (_, _) => {
                let sub = *OR_SUBS.choose(rng).expect("nonempty");
                Some(Action::Move {
                    item: item.clone(),
                    to: Location::in_or(room.clone(), sub),
                    distance_m: 0.0,
                })
            }
        };
        let Some(action) = action else { continue };
        match &action {
            Action::Move { item, to, .. } => {
                at.insert(item.clone(), to.clone());
            }
            Action::PlaceInCavity { item } => {
                let r = at[item].site().operating_room().expect("in OR").clone();
                at.insert(item.clone(), Location::in_or(r, SubLocation::PatientCavity));
            }
            Action::RemoveFromCavity { item, .. } => {
                let r = at[item].site().operating_room().expect("in OR").clone();
                at.insert(item.clone(), Location::in_or(r, SubLocation::ToolTray));
            }
            Action::Discard { item } => {
                let r = at[item].site().operating_room().expect("in OR").clone();
                at.insert(item.clone(), Location::in_or(r, SubLocation::TrashBin));
            }
            Action::CarryOut { item, to, .. } => {
                at.insert(item.clone(), to.clone().expect("generator sets a target"));
            }
            _ => {}
        }
        events.push(EventSpec { t, action });
    }

    // Close out every case: announce, then acknowledge and override a few
    // times so reconciled cases get a chance to complete.
    for room in &rooms {
        if !closed[room] && rng.random_bool(0.9) {
            t += 1;
            events.push(EventSpec {
                t,
                action: Action::AnnounceClosing { case: case_of(room) },
            });
        }
    }
    for _ in 0..3 {
        t += 100;
        for room in &rooms {
            let case = case_of(room);
            if rng.random_bool(0.3) {
                events.push(EventSpec {
                    t,
                    action: Action::ManualOverride { case: case.clone() },
                });
            }
            events.push(EventSpec {
                t,
                action: Action::SpdAck { case },
            });
        }
    }

    let latency = rng.random_range(0..=config.max_latency_s);
    let scenario = Scenario {
        name: format!("generated-{seed}"),
        seed,
        horizon_s: t + 200,
        rooms: rooms.clone(),
        items,
        sensors: BTreeMap::new(),
        cases: rooms.iter().map(|r| CaseSpec::new(case_of(r), r.clone())).collect(),
        events,
        bus: BusConfig {
            latency_s: latency,
            drop_rate: config.drop_rate,
            links: Vec::new(),
        },
    };
    scenario.with_all_sensors(config.sensor)
}
