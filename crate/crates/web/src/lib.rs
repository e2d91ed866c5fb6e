//! Browser bindings. Each export takes and returns JSON text so the page needs
//! no generated types; failures come back as `{"error": "..."}`.

use rsb_core::concept::{bundled, evaluate};
use rsb_core::reconciliation::generate_report;
use rsb_core::rng::stream;
use rsb_core::sensing::{med_scan, ScanRegion, SensorModel};
use rsb_core::simkernel::{load_scenario, run_full, SimOptions};
use rsb_core::TagId;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const SCENARIOS: [(&str, &str); 6] = [
    ("clean", include_str!("../../../scenarios/clean.json")),
    ("sponge-in-cavity", include_str!("../../../scenarios/sponge-in-cavity.json")),
    ("sponge-retained", include_str!("../../../scenarios/sponge-retained.json")),
    ("new-equipment", include_str!("../../../scenarios/new-equipment.json")),
    ("pocket-carry-out", include_str!("../../../scenarios/pocket-carry-out.json")),
    ("cavity-retention", include_str!("../../../scenarios/cavity-retention.json")),
];

/// Upper bound on Monte Carlo trials per point, to keep the page responsive.
pub const MAX_TRIALS: u32 = 200_000;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

/// Names and JSON text of the bundled example scenarios.
#[wasm_bindgen]
pub fn example_scenarios() -> String {
    let list: Vec<Value> = SCENARIOS
        .iter()
        .map(|(name, text)| json!({ "name": name, "scenario": text }))
        .collect();
    Value::Array(list).to_string()
}

/// Runs a scenario and returns alerts, per-case results and reports, and the
/// trace as NDJSON. `seed` of `None` keeps the scenario's own seed.
#[wasm_bindgen]
pub fn simulate(scenario_json: &str, seed: Option<u64>) -> String {
    respond((|| {
        let mut scenario = load_scenario(scenario_json).map_err(|e| e.to_string())?;
        if let Some(seed) = seed {
            scenario.seed = seed;
        }
        let out = run_full(&scenario, SimOptions::default());
        let reports = out
            .cases
            .iter()
            .map(|c| generate_report(&out.trace, &c.case_id).map_err(|e| e.to_string()))
            .collect::<Result<Vec<_>, _>>()?;
        let alerts: Vec<_> = out.trace.alerts().collect();
        Ok(json!({
            "name": scenario.name,
            "seed": scenario.seed,
            "safety_finding": out.has_safety_finding(),
            "cases": out.cases,
            "stats": out.stats,
            "alerts": alerts,
            "reports": reports,
            "trace": out.trace.to_ndjson(),
        }))
    })())
}

/// Per-tag miss rate of a cavity scan for 1..=`max_passes` passes, simulated
/// and closed form, at read probability `p_detect`.
#[wasm_bindgen]
pub fn miss_curve(p_detect: f64, max_passes: u32, trials: u32, seed: u64) -> String {
    respond((|| {
        if !(0.0..=1.0).contains(&p_detect) {
            return Err(format!("p_detect {p_detect} outside [0, 1]"));
        }
        if max_passes == 0 || max_passes > 20 {
            return Err("max_passes must be in 1..=20".into());
        }
        if trials == 0 || trials > MAX_TRIALS {
            return Err(format!("trials must be in 1..={MAX_TRIALS}"));
        }
        let model = SensorModel::perfect().with_p_detect(p_detect);
        let cavity = [(TagId::from("T"), 0.0)];
        let mut points = Vec::new();
        for k in 1..=max_passes {
            let mut rng = stream(seed, &format!("miss-curve:{k}"));
            let mut missed = 0u32;
            for _ in 0..trials {
                let r = med_scan(ScanRegion::PatientCavity, &cavity, k, &model, &mut rng).map_err(|e| e.to_string())?;
                missed += u32::from(r.detected.is_empty());
            }
            points.push(json!({
                "passes": k,
                "simulated": f64::from(missed) / f64::from(trials),
                "expected": (1.0 - p_detect).powi(k as i32),
            }));
        }
        Ok(json!({ "p_detect": p_detect, "trials": trials, "points": points }))
    })())
}

/// Runs the bundled concept-selection instance keeping the `top_k` heaviest
/// characteristics.
#[wasm_bindgen]
pub fn evaluate_concepts(top_k: usize) -> String {
    respond((|| {
        let inputs = bundled().inputs(top_k).map_err(|e| e.to_string())?;
        let out = evaluate(&inputs).map_err(|e| e.to_string())?;
        serde_json::from_str(&out.to_json()).map_err(|e| e.to_string())
    })())
}
