//! Precoders for Gaussian MIMO channels with QAM inputs built from pairs of
//! SVD subchannels.
//!
//! The channel is diagonalized by its SVD, subchannels are matched into
//! pairs, and each pair is coupled by a real 2x2 rotation with its own
//! power split (an X-Code). The total mutual information is then the sum
//! of per-pair terms, so the design splits into a small per-pair problem
//! (solved offline into lookup tables) and a pairing/power problem between
//! pairs. Reference schemes (Gaussian and discrete waterfilling,
//! Mercury/waterfilling, the fixed-point optimal precoder) are included for
//! comparison.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod hungarian;
pub mod linalg;
pub mod mi;
pub mod pair;
pub mod pairing;
pub mod precoder;
pub mod quadrature;
pub mod sweep;

pub use error::{Error, Result};

/// `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
