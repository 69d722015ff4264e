//! Discrete-event simulation of slice admission over a request stream.

mod engine;
mod io;
mod presets;
mod scenario;

pub use engine::{
    run, run_with, Classifier, Counters, DecisionRecord, DropRecord, Outcome, OverloadWarning,
    SampleRow, SimError, SimulationResult,
};
pub use io::{read_pairs, read_samples, write_decisions, write_pairs, write_samples, write_totals};
pub use presets::{all_presets, preset, preset_names};
pub use scenario::{Capacities, FailureEvent, PredictorMode, Scenario, ScenarioError, Surge};
