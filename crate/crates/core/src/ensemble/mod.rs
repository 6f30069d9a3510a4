//! Random coefficient fields and probes of the ensemble assumptions.

mod field;
mod holder;
pub mod rng;
mod sample;
mod spec;
mod spectral_gap;

pub use field::{CoefficientField, Mat3};
pub use holder::{holder_constant_field, holder_constant_radius, FieldValues};
pub use sample::{bump, gaussian_kernel, sample_field, smootherstep};
pub use spec::{EnsembleKind, EnsembleSpec};
pub use spectral_gap::{spectral_gap_probe, GapFunctional, GapReport};
