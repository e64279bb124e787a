//! Non-local form kernel, Monte-Carlo and exact estimators of the truncated
//! coordinate forms, and the unit-contraction apparatus.

mod contraction;
mod estimate;
mod exact;
mod kernel;

pub use contraction::{apply_contraction, ContractionProfile};
pub use estimate::{
    damping_bound, damping_constant, form_estimate, form_i_estimate, truncation_monotonicity_check,
    young_diagnostic, CoordinateTerm, FormEstimate, FormSpec, MonotonicityReport, YoungDiagnostic,
};
pub use exact::{form_exact_small, gaussian_grid_atoms, product_form_quadrature, ExactForm};
pub use kernel::{coordinate_differences, kernel_term, phi_alpha};
