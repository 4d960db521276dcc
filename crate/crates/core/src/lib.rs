//! Baseband simulation of CP-OFDM, FBMC/OQAM and dual-polarization FBMC.
//!
//! The crate is organised bottom-up:
//!
//! - [`filters`]: prototype filters (IOTA, PHYDYAS, SRRC) and their
//!   time-frequency ambiguity tables.
//! - [`lattice`]: the π/2 phase map and the polarization assignment of the
//!   dual-polarization structures.
//! - [`modem`]: QAM mapping, OQAM staggering, the polyphase filter bank
//!   and the CP-OFDM reference modem.
//! - [`channel`]: tapped-delay-line fading, AWGN, CFO/TO impairments and
//!   cross-polarization leakage.
//! - [`estimation`]: scattered pilots, auxiliary pilots, LS/DFT/spline
//!   channel estimation and zero-forcing.
//! - [`metrics`]: BER counting, PAPR CCDF and Welch PSD.
//! - [`harness`]: seeded, config-driven experiment runner producing CSV.

pub mod channel;
pub mod error;
pub mod estimation;
pub mod filters;
pub mod harness;
pub mod lattice;
pub mod metrics;
pub mod modem;
mod spline;

pub use error::{Error, Result};
pub use num_complex::Complex64;
