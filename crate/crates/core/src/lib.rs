//! Semiclassical integrated density of states for operators
//! `A0(hD) + eps B(x, hD)` with truncated almost-periodic perturbations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

mod error;
mod exec;
pub mod quad;
pub mod report;

pub mod apsymbol;
pub mod freqgeom;
pub mod gauge;
pub mod oracle;
pub mod spectra;
pub mod zones;

pub use error::{Error, Result};
pub use exec::{parallel_enabled, Execution};
