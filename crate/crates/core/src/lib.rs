//! Day-pattern decomposition of building occupancy counts.
//!
//! The pipeline turns an irregularly sampled count series into a matrix with
//! one column per calendar day and factors it as `X ≈ W H` with `W, H ≥ 0`.
//! Columns of `W` are daily patterns; rows of `H` are per-day activations.
//!
//! ```text
//! ingest ──► resample ──► nmf::fit ──► analysis
//!                      └─► rank::sweep
//! ```
//!
//! [`synth`] produces series with planted patterns for testing the whole chain.

pub mod analysis;
pub mod error;
pub mod ingest;
pub mod io;
pub mod nmf;
pub mod rank;
pub mod resample;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::{DedupePolicy, IngestOptions, IngestReport, RawSample, RawSeries};
pub use nmf::{fit, Factorization, Init, NmfConfig, Solver};
pub use resample::{DataMatrix, DayPolicy, GapPolicy, GriddedSeries};
