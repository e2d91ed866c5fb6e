//! Discrete-event kernel: scenario files, the message bus, the run loop,
//! batch Monte Carlo and the trace format.

mod batch;
mod bus;
mod generator;
mod kernel;
mod scenario;
mod trace;

pub use batch::{run_batch, BatchSummary};
pub use bus::{deliver, Bus, Delivery, LinkParams};
pub use generator::{random_scenario, GeneratorConfig};
pub use kernel::{run, run_full, CaseResult, RunOutput, RunStats, SimOptions, Simulation};
pub use scenario::{
    load_scenario, Action, BusConfig, CaseSpec, EventSpec, ItemSpec, LinkSpec, Scenario, ScenarioError, SensorRole,
    SensorSpec,
};
pub use trace::{RecordBody, Trace, TraceParseError, TraceRecord};
