//! Numerical workbench for quantitative stochastic homogenization on
//! finite-difference grids: correctors, boundary layers, two-scale expansions
//! and empirical regularity probes.

// `!(x > 0.0)` is used on purpose so that NaN fails validation, and stencil
// loops read better with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod boundary_layer;
pub mod cone;
pub mod correctors;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod meyers;
pub mod pde;
pub mod profile;
pub mod regularity;
pub mod stats;

pub use error::{Error, Result};
pub use profile::{DecayProfile, PowerFit};
