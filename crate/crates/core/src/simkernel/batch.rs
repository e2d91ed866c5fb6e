use serde::{Deserialize, Serialize};

use super::kernel::{RunStats, SimOptions, Simulation};
use super::scenario::Scenario;

/// Per-seed result kept for the reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
struct SeedResult {
    stats: RunStats,
    cases: u64,
    complete: u64,
    unresolved: u64,
    finding: bool,
}

/// Aggregate over a batch of runs with seeds `seed_base .. seed_base + runs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub runs: u64,
    pub seed_base: u64,
    pub cases: u64,
    pub cases_complete: u64,
    pub cases_unresolved: u64,
    pub runs_with_finding: u64,
    /// Missed tags over tags present, first scan of each case only.
    pub first_scan_miss_rate: Option<f64>,
    /// Missed tags over tags present, every scan.
    pub per_tag_miss_rate: Option<f64>,
    pub totals: RunStats,
}

impl BatchSummary {
    /// Canonical JSON with sorted keys.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("summary serializes");
        serde_json::to_string_pretty(&value).expect("value serializes")
    }
}

fn rate(missed: u64, total: u64) -> Option<f64> {
    (total > 0).then(|| missed as f64 / total as f64)
}

fn run_seed(scenario: &Scenario, seed: u64) -> SeedResult {
    let mut scenario = scenario.clone();
    scenario.seed = seed;
    let out = Simulation::new(&scenario, SimOptions { record_trace: false }).finish();
    SeedResult {
        cases: out.cases.len() as u64,
        complete: out
            .cases
            .iter()
            .filter(|c| c.final_phase == crate::protocol::Phase::Complete)
            .count() as u64,
        unresolved: out.cases.iter().filter(|c| c.unresolved).count() as u64,
        finding: out.has_safety_finding(),
        stats: out.stats,
    }
}

#[cfg(feature = "parallel")]
fn run_all(scenario: &Scenario, seeds: Vec<u64>) -> Vec<SeedResult> {
    use rayon::prelude::*;
    seeds.into_par_iter().map(|s| run_seed(scenario, s)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all(scenario: &Scenario, seeds: Vec<u64>) -> Vec<SeedResult> {
    seeds.into_iter().map(|s| run_seed(scenario, s)).collect()
}

/// Runs the scenario once per seed and reduces the results in seed order.
pub fn run_batch(scenario: &Scenario, runs: u64, seed_base: u64) -> BatchSummary {
    let seeds: Vec<u64> = (0..runs).map(|i| seed_base.wrapping_add(i)).collect();
    let results = run_all(scenario, seeds);
    let mut summary = BatchSummary {
        scenario: scenario.name.clone(),
        runs,
        seed_base,
        cases: 0,
        cases_complete: 0,
        cases_unresolved: 0,
        runs_with_finding: 0,
        first_scan_miss_rate: None,
        per_tag_miss_rate: None,
        totals: RunStats::default(),
    };
    for r in &results {
        summary.cases += r.cases;
        summary.cases_complete += r.complete;
        summary.cases_unresolved += r.unresolved;
        summary.runs_with_finding += u64::from(r.finding);
        summary.totals.merge(&r.stats);
    }
    summary.first_scan_miss_rate = rate(summary.totals.first_scan_missed, summary.totals.first_scan_tags);
    summary.per_tag_miss_rate = rate(summary.totals.cavity_tags_missed, summary.totals.cavity_tags_scanned);
    summary
}
