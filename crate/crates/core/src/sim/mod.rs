//! Monte Carlo operating characteristics of the adjustment under
//! exponential-survival study generators.

mod harness;
mod scenario;

pub use harness::{
    compare_methods, run_scenario, simulate_study, OperatingCharacteristics, ReplicationRecord,
    ReplicationStatus, SimConfig, SimulationOutcome, StudyEstimates, DEFAULT_TOTAL_STUDIES,
    MAX_REFERENCE, MIN_REFERENCE,
};
pub use scenario::{
    draw_event_count, draw_lognormal, generate_study, ArmTriple, LognormalSpec, ScenarioSpec,
    StudyParams, BUILTIN_IDS,
};
