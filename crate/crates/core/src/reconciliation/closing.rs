use rand::Rng;

use super::{Outcome, ReconciliationReport};
use crate::ids::TagId;
use crate::protocol::{
    Alert, AlertKind, ClosingConfig, MessageIds, MtcInput, MtcState, NodeId, Payload, Phase, PhaseChange,
    ProtocolError, Severity, SurgeryCase,
};
use crate::sensing::{med_scan, read_tags, ReadKind, ScanRegion, Sensor, SensorModel};

/// What one reconciliation pass decided.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PassStep {
    pub alerts: Vec<Alert>,
    pub phases: Vec<PhaseChange>,
    pub rescan_at: Option<u64>,
}

/// Applies the closing-loop policy to a case sitting in `CavityScan`:
///
/// - retained item suspected: Critical alert, back to `ClosingAnnounced`,
///   re-scan after the configured delay (never overridable);
/// - count mismatch: re-scan while count re-scans remain, otherwise Critical
///   alerts and the case waits in `CavityScan` for a manual override;
/// - clean: `Reconciled`, then `AwaitingSpd`.
pub fn evaluate_pass(
    case: &mut SurgeryCase,
    report: &ReconciliationReport,
    config: &ClosingConfig,
    now: u64,
) -> PassStep {
    debug_assert_eq!(case.phase, Phase::CavityScan);
    let mut step = PassStep::default();
    let case_id = Some(case.case_id.clone());
    let go = |case: &mut SurgeryCase, to: Phase, step: &mut PassStep| {
        step.phases
            .push(case.transition(to).expect("closing loop follows the lifecycle graph"));
    };
    match report.outcome {
        Outcome::RsbSuspected => {
            let tags: Vec<TagId> = report.cavity_detected.iter().cloned().collect();
            step.alerts.push(Alert::new(
                now,
                Severity::Critical,
                AlertKind::RsbSuspected,
                case_id,
                tags.iter().cloned(),
                format!("possible retained item in patient cavity: {}", join(&tags)),
            ));
            go(case, Phase::ClosingAnnounced, &mut step);
            step.rescan_at = Some(now + config.rescan_delay_s);
        }
        Outcome::CountMismatch if case.count_rescans < config.max_rescans => {
            case.count_rescans += 1;
            go(case, Phase::ClosingAnnounced, &mut step);
            step.rescan_at = Some(now + config.rescan_delay_s);
        }
        Outcome::CountMismatch => {
            let tags: Vec<TagId> = report.missing.iter().cloned().collect();
            step.alerts.push(Alert::new(
                now,
                Severity::Critical,
                AlertKind::CountMismatch,
                case_id.clone(),
                tags.iter().cloned(),
                format!("count mismatch after {} re-scans; unaccounted: {}", case.count_rescans, join(&tags)),
            ));
            step.alerts.push(Alert::new(
                now,
                Severity::Critical,
                AlertKind::ManualOverride,
                case_id,
                tags,
                "manual override required to proceed",
            ));
            case.awaiting_override = true;
        }
        Outcome::Clean => {
            go(case, Phase::Reconciled, &mut step);
            go(case, Phase::AwaitingSpd, &mut step);
        }
    }
    step
}

fn join(tags: &[TagId]) -> String {
    tags.iter().map(TagId::as_str).collect::<Vec<_>>().join(", ")
}

/// Physical contents seen by a standalone closing loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosingWorld {
    pub cavity: Vec<(TagId, f64)>,
    pub tray: Vec<(TagId, f64)>,
    pub bin: Vec<(TagId, f64)>,
    pub med: SensorModel,
    pub antennas: SensorModel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClosingRun {
    pub alerts: Vec<Alert>,
    pub reports: Vec<ReconciliationReport>,
    pub phases: Vec<PhaseChange>,
}

/// Drives the MTC through scan/reconcile passes without the kernel.
///
/// `staff` runs between passes that looped back to `ClosingAnnounced` and may
/// change the world (e.g. remove an item from the cavity). At most
/// `max_passes` scans are made.
pub fn closing_loop<R: Rng + ?Sized>(
    mtc: &mut MtcState,
    world: &mut ClosingWorld,
    max_passes: u32,
    mut now: u64,
    rng: &mut R,
    mut staff: impl FnMut(&ReconciliationReport, &mut ClosingWorld),
) -> Result<ClosingRun, ProtocolError> {
    if mtc.case.phase != Phase::ClosingAnnounced {
        return Err(ProtocolError::InvalidPhase {
            case_id: mtc.case.case_id.clone(),
            phase: mtc.case.phase,
            op: "closing_loop",
        });
    }
    let mut ids = MessageIds::new();
    let mut run = ClosingRun::default();
    let room = mtc.room_id.clone();
    let tray_sensor = Sensor::new(format!("{room}/tray"), world.antennas, ReadKind::Tray);
    let bin_sensor = Sensor::new(format!("{room}/bin"), world.antennas, ReadKind::Bin);
    for _ in 0..max_passes {
        let scan = med_scan(ScanRegion::PatientCavity, &world.cavity, mtc.config.scan_passes, &world.med, rng)
            .map_err(|e| ProtocolError::UnexpectedInput {
                node: NodeId::Med(room.clone()),
                what: e.to_string(),
            })?;
        let msg = ids.issue(
            now,
            NodeId::Med(room.clone()),
            NodeId::Mtc(room.clone()),
            Payload::CavityScanResult {
                case_id: mtc.case.case_id.clone(),
                scan,
            },
        );
        let tray_reads = read_tags(&tray_sensor, now, &world.tray, rng).unwrap_or_default();
        let bin_reads = read_tags(&bin_sensor, now, &world.bin, rng).unwrap_or_default();
        let out = mtc.handle(
            MtcInput::CavityScan {
                msg: &msg,
                tray_reads: &tray_reads,
                bin_reads: &bin_reads,
            },
            now,
            &mut ids,
        )?;
        run.alerts.extend(out.alerts);
        run.phases.extend(out.phases);
        let report = out.report.expect("scan input always reconciles");
        run.reports.push(report.clone());
        match out.rescan_at {
            Some(at) => {
                staff(&report, world);
                now = at;
            }
            None => break,
        }
    }
    Ok(run)
}
