//! Scenario-driven verification suites and the delay-condition demonstrations.

mod demo;
pub mod probes;
mod report;
mod scenario;
mod suite;
mod tolerances;

pub use demo::{demo_conditions, DemoOutcome, GrowthRow};
pub use report::{CheckRecord, Report, Summary};
pub use scenario::{
    Built, DelayKind, FeedbackKind, FlowSection, GridSection, OutputSection, ProbeSection,
    RegionSection, Scenario, SystemSection, SystemTag, TransversalMode, TransversalSection,
    MAX_SEED,
};
pub use suite::{
    characteristic_root, chart_experiment, covering_chart, flat_zero_points, flatten_along,
    flow_run, manifold_points, run_suite, smooth_start, steep_probe, transversal_ratios, ChartRow,
};
pub use tolerances::Tolerances;
