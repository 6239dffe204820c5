//! Pharmacokinetic analysis of dynamic contrast-enhanced MRI.
//!
//! The crate covers the full quantitative chain for a DCE study:
//!
//! 1. [`volume`] / [`io`] — volumes, dynamic series, masks, parameter
//!    maps, and their portable on-disk formats.
//! 2. [`relaxometry`] — SPGR signal model, variable-flip-angle T10
//!    estimation, and signal → concentration conversion.
//! 3. [`vifregion`] — automatic detection of a vascular region and
//!    extraction of its plasma concentration curve.
//! 4. [`vif`] — closed-form vascular input function models and the
//!    corresponding Tofts tissue responses, with a quadrature oracle.
//! 5. [`fitting`] — bounded Levenberg–Marquardt for the VIF and the
//!    per-voxel (Ktrans, ve) maps.
//! 6. [`phantom`] / [`metrics`] — synthetic ground-truth studies and
//!    evaluation statistics.
//! 7. [`pipeline`] — the automated end-to-end run.
//!
//! Conventions used throughout: voxel storage is x-fastest scan order;
//! acquisition timestamps are seconds starting at 0; kinetic model time
//! is minutes; rate constants are min⁻¹ and concentrations mmol/L. All
//! computation is deterministic for a fixed configuration and seed,
//! independent of thread count.

pub mod error;
pub mod fitting;
pub mod io;
pub mod labeling;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod relaxometry;
pub mod vif;
pub mod vifregion;
pub mod volume;

mod quad;

pub use error::{Error, Result};
