//! Finite-truncation laboratory for non-local Markovian symmetric forms on
//! weighted sequence spaces.

pub mod error;
pub mod forms;
pub mod hilbert_scale;
pub mod measures;
pub mod process;
pub mod qr_check;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod seqspace;
pub mod stats;
pub mod suite;

pub use error::{Error, Result};
pub use scalar::Real;

pub type SpaceSpec = seqspace::SpaceSpec<f64>;
pub type Point = seqspace::Point<f64>;
pub type BoxSpec = seqspace::BoxSpec<f64>;
pub type Sequence = seqspace::Sequence<f64>;
pub type CylinderFunction = seqspace::CylinderFunction<f64>;
