mod common;

use common::{cms_to_mtc_divergence, golden};
use rsb_core::protocol::{AlertKind, Phase};
use rsb_core::simkernel::{run_full, LinkSpec, SimOptions};
use rsb_core::TagId;

#[test]
fn dropped_cms_updates_leave_exactly_those_tags_unmonitored() {
    let d = cms_to_mtc_divergence(&golden("new-equipment"));
    assert!(d.lossless_diff.is_empty(), "{d:?}");
    assert!(!d.lossy_diff.is_empty(), "{d:?}");
    assert_eq!(d.lossy_diff, d.replay_tags, "{d:?}");
    assert_eq!(d.dropped_tags, d.replay_tags, "{d:?}");
    assert_eq!(d.lossy_diff, [TagId::from("T-G1"), TagId::from("T-R1")].into());
}

#[test]
fn carted_scenarios_do_not_depend_on_cms_updates() {
    // Tray and bin antennas report to the cart directly.
    for name in ["clean", "sponge-in-cavity"] {
        let d = cms_to_mtc_divergence(&golden(name));
        assert!(d.lossy_diff.is_empty(), "{name}: {d:?}");
    }
}

#[test]
fn lost_departure_notice_keeps_item_on_count() {
    let d = cms_to_mtc_divergence(&golden("pocket-carry-out"));
    assert_eq!(d.lossy_diff, [TagId::from("T-I1")].into());
    // Carted items also produce CMS notices, but the cart already lists them.
    assert!(d.lossy_diff.is_subset(&d.replay_tags));
}

#[test]
fn dead_med_link_never_reconciles() {
    let mut s = golden("clean");
    s.bus.links.push(LinkSpec {
        from: "med".into(),
        to: "mtc".into(),
        latency_s: None,
        drop_rate: Some(1.0),
    });
    let out = run_full(&s, SimOptions::default());
    assert_ne!(out.cases[0].final_phase, Phase::Complete);
    assert!(out.stats.messages_dropped > 0);
}

#[test]
fn med_outage_raises_sensor_down_and_retries() {
    let mut s = golden("sponge-in-cavity");
    let med = s.sensors.get_mut(&"OR-1/med".into()).unwrap();
    // Down almost always, repaired rarely: the first closing scan fails.
    med.mtbf_s = 1.0;
    med.mttr_s = 1.0e6;
    s.validate().unwrap();
    let out = run_full(&s, SimOptions::default());
    assert!(out.stats.alerts.get(&AlertKind::SensorDown).copied().unwrap_or(0) > 0);
    assert_ne!(out.cases[0].final_phase, Phase::Complete);
}
