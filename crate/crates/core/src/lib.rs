//! Simulation and protocol engine for RFID-based tracking of surgical equipment.
//!
//! The crate is split along the same lines as the running system:
//!
//! - [`model`] holds ground truth: items, locations and the world state that
//!   the sensing layer observes.
//! - [`sensing`] is the probabilistic RFID read model (room entrances, the
//!   cart's tray and bin antennas, the medical equipment detector).
//! - [`protocol`] contains the communicating state machines: room sensors,
//!   the central management system (CMS), the mobile tool cart (MTC) and the
//!   medical equipment detector (MED).
//! - [`simkernel`] is the deterministic discrete-event kernel, scenario
//!   loader, message bus and trace format.
//! - [`reconciliation`] covers closing-time counting, retained-item detection,
//!   location queries, reports and the trace store.
//! - [`concept`] is the decision-analysis toolkit: morphological matrix,
//!   QFD weighting, Pugh screening/ranking, two-axis plot data and risk scoring.

pub mod concept;
pub mod ids;
pub mod model;
pub mod protocol;
pub mod reconciliation;
pub mod rng;
pub mod sensing;
pub mod simkernel;

pub use ids::{CaseId, ItemId, RoomId, SensorId, TagId};
