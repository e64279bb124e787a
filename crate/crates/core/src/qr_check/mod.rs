//! Partial-sum checkers for the quasi-regularity conditions, their
//! Chebyshev-type sufficient conditions and the support condition.

mod check;
mod scheme;

pub use check::{
    check_condition, chebyshev_sufficient, support_estimate, verdict, ConditionId, QrOptions, QrReport, SupportRow,
    Verdict,
};
pub use scheme::{free_field_scheme, SchemeKind, SchemeSource, WeightScheme};
