//! The particle filter with Eve-index tracking.

mod filter;
mod history;
mod plan;
mod resample;

pub(crate) use filter::point_from_values;
pub use filter::{point_estimates, run_filter, run_filter_terminal, PointEstimates};
pub use history::{HistoryBundle, ParticleHistory, TerminalHistory, TerminalView, BUNDLE_SCHEMA_VERSION};
pub use plan::AllocationPlan;
pub(crate) use resample::draw_ancestors;
pub use resample::multinomial_resample;
