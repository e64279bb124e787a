//! Continuous-time coordinate-jump process reversible with respect to a
//! measure model, with invariance and reversibility checks.

mod oracle;
mod rate;
mod simulate;

pub use oracle::{ks_exponential, rate_matrix, reversibility_oracle, table_function, KsReport, ReversibilityReport};
pub use rate::{coordinate_rate, sample_jump};
pub use simulate::{invariance_test, simulate, Event, InvarianceReport, JumpChainConfig, Terminal, Trajectory};
