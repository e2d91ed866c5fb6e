//! RFID read model.
//!
//! Detection is a step function of distance: a constant per-read probability
//! inside the detection radius, zero outside. Sensor outages follow an
//! exponential time-to-failure with a fixed repair time.

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{SensorId, TagId};

/// Target detection range from the engineering characteristics table.
pub const DEFAULT_RANGE_M: f64 = 0.9;
pub const MIN_RANGE_M: f64 = 0.2;
pub const MAX_RANGE_M: f64 = 1.0;
pub const DEFAULT_P_DETECT: f64 = 0.98;
/// Target MTBF from the engineering characteristics table.
pub const DEFAULT_MTBF_S: f64 = 5_184_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("sensor {0} is down")]
    SensorDown(SensorId),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub range_m: f64,
    pub p_detect: f64,
    pub mtbf_s: f64,
    pub mttr_s: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            range_m: DEFAULT_RANGE_M,
            p_detect: DEFAULT_P_DETECT,
            mtbf_s: DEFAULT_MTBF_S,
            mttr_s: 0.0,
        }
    }
}

impl SensorModel {
    pub fn new(range_m: f64, p_detect: f64, mtbf_s: f64, mttr_s: f64) -> Result<Self, SensingError> {
        let model = Self {
            range_m,
            p_detect,
            mtbf_s,
            mttr_s,
        };
        model.validate()?;
        Ok(model)
    }

    /// Perfect reads, never fails. Handy for oracle scenarios.
    pub fn perfect() -> Self {
        Self {
            p_detect: 1.0,
            ..Self::default()
        }
    }

    pub fn with_p_detect(self, p_detect: f64) -> Self {
        Self { p_detect, ..self }
    }

    pub fn validate(&self) -> Result<(), SensingError> {
        if !(MIN_RANGE_M..=MAX_RANGE_M).contains(&self.range_m) {
            return Err(SensingError::InvalidParam(format!(
                "range_m {} outside [{MIN_RANGE_M}, {MAX_RANGE_M}]",
                self.range_m
            )));
        }
        if !(self.p_detect > 0.0 && self.p_detect <= 1.0) {
            return Err(SensingError::InvalidParam(format!(
                "p_detect {} outside (0, 1]",
                self.p_detect
            )));
        }
        if !(self.mtbf_s > 0.0) {
            return Err(SensingError::InvalidParam(format!("mtbf_s {} must be > 0", self.mtbf_s)));
        }
        if !(self.mttr_s >= 0.0) {
            return Err(SensingError::InvalidParam(format!("mttr_s {} must be >= 0", self.mttr_s)));
        }
        Ok(())
    }

    pub fn availability(&self) -> Result<f64, SensingError> {
        availability(self.mtbf_s, self.mttr_s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReadKind {
    RoomEntrance,
    Tray,
    Bin,
    MedScan,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagReadEvent {
    pub time_s: u64,
    pub sensor_id: SensorId,
    pub tag_id: TagId,
    pub read_kind: ReadKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScanRegion {
    PatientCavity,
    RoomSpace,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanResult {
    pub region: ScanRegion,
    pub detected: BTreeSet<TagId>,
    pub passes: u32,
}

/// Probability that one read attempt at `distance_m` sees the tag.
pub fn detect_probability(distance_m: f64, model: &SensorModel) -> f64 {
    if distance_m <= model.range_m {
        model.p_detect
    } else {
        0.0
    }
}

/// A deployed reader: its model, what it reads, and when it is out of service.
#[derive(Clone, Debug, PartialEq)]
pub struct Sensor {
    pub id: SensorId,
    pub model: SensorModel,
    pub read_kind: ReadKind,
    outages: Vec<(u64, u64)>,
}

impl Sensor {
    pub fn new(id: impl Into<SensorId>, model: SensorModel, read_kind: ReadKind) -> Self {
        Self {
            id: id.into(),
            model,
            read_kind,
            outages: Vec::new(),
        }
    }

    pub fn with_outages(mut self, outages: Vec<(u64, u64)>) -> Self {
        self.outages = outages;
        self
    }

    pub fn outages(&self) -> &[(u64, u64)] {
        &self.outages
    }

    /// Down during `[start, end)` of any outage.
    pub fn is_down(&self, t: u64) -> bool {
        let idx = self.outages.partition_point(|&(start, _)| start <= t);
        idx > 0 && t < self.outages[idx - 1].1
    }
}

/// One read sweep: each candidate is seen independently.
pub fn read_tags<R: Rng + ?Sized>(
    sensor: &Sensor,
    now: u64,
    candidates: &[(TagId, f64)],
    rng: &mut R,
) -> Result<Vec<TagReadEvent>, SensingError> {
    if sensor.is_down(now) {
        return Err(SensingError::SensorDown(sensor.id.clone()));
    }
    let mut events = Vec::new();
    for (tag, distance) in candidates {
        let p = detect_probability(*distance, &sensor.model);
        if p > 0.0 && rng.random_bool(p) {
            events.push(TagReadEvent {
                time_s: now,
                sensor_id: sensor.id.clone(),
                tag_id: tag.clone(),
                read_kind: sensor.read_kind,
            });
        }
    }
    Ok(events)
}

/// Repeated MED sweep over a region; a tag is found if any pass reads it.
pub fn med_scan<R: Rng + ?Sized>(
    region: ScanRegion,
    candidates: &[(TagId, f64)],
    passes: u32,
    model: &SensorModel,
    rng: &mut R,
) -> Result<ScanResult, SensingError> {
    if passes == 0 {
        return Err(SensingError::InvalidParam("passes must be >= 1".into()));
    }
    let mut detected = BTreeSet::new();
    for (tag, distance) in candidates {
        let p = detect_probability(*distance, model);
        if p <= 0.0 {
            continue;
        }
        if (0..passes).any(|_| rng.random_bool(p)) {
            detected.insert(tag.clone());
        }
    }
    Ok(ScanResult {
        region,
        detected,
        passes,
    })
}

/// Steady-state availability, `mtbf / (mtbf + mttr)`.
pub fn availability(mtbf_s: f64, mttr_s: f64) -> Result<f64, SensingError> {
    if !(mtbf_s > 0.0) {
        return Err(SensingError::InvalidParam(format!("mtbf_s {mtbf_s} must be > 0")));
    }
    if !(mttr_s >= 0.0) {
        return Err(SensingError::InvalidParam(format!("mttr_s {mttr_s} must be >= 0")));
    }
    Ok(mtbf_s / (mtbf_s + mttr_s))
}

/// Outage intervals `[down_start, down_end)` over `[0, horizon_s)`.
///
/// Time to the next failure is exponential with mean `mtbf_s`, counted from
/// the end of the previous repair. Times are rounded to whole seconds.
pub fn sensor_failure_schedule<R: Rng + ?Sized>(
    model: &SensorModel,
    horizon_s: u64,
    rng: &mut R,
) -> Vec<(u64, u64)> {
    let mut schedule = Vec::new();
    let Ok(exp) = Exp::new(1.0 / model.mtbf_s) else {
        return schedule;
    };
    let repair = model.mttr_s.round() as u64;
    let mut t = 0u64;
    loop {
        let gap: f64 = exp.sample(rng);
        let onset = t.saturating_add(gap.round() as u64);
        if onset >= horizon_s {
            break;
        }
        let end = onset.saturating_add(repair);
        schedule.push((onset, end));
        t = end;
    }
    schedule
}
