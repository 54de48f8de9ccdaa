//! Scenario registry, Monte Carlo driver, variance oracles and report
//! emission.

mod contacts;
mod harness;
mod oracle;
mod report;
mod scenario;
mod tables;

pub use contacts::{
    load_contact_file, load_contact_network, synthetic_classes, synthetic_contacts, write_synthetic_contacts,
    ContactPeriod, CONTACT_MIN_COUNT, MIDDAY_ATTENDANCE,
};
pub use harness::{
    run_scenario, MethodSummary, ReplicateDraw, RunConfig, ScenarioSummary, MAX_FAILURE_RATE, SCHEMA_VERSION,
};
pub use oracle::{network_b, population_slopes, theoretical_variance_oracle, CovariateFn, Formula, ORACLE_BATCHES};
pub use report::{emit_report, method_histogram, summary_cells, Cell, Histogram, ReportFormat, DEFAULT_BINS};
pub use scenario::{NetworkSource, Scenario, ScenarioId, GRAPHON_SPARSITY};
pub use tables::{reproduce_table, write_table_report, ReproduceOptions, TableCell, TableId, TableReport, FULL_REPS};
