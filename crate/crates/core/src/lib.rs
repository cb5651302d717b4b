//! Desk-scale simulator of a light-controlled vesicular transmitter for
//! molecular communication, together with its diffusive point-to-point link.
//!
//! The transmitter is a lipid vesicle whose membrane carries a light-driven
//! proton pump and a proton/messenger symporter with Hill-type proton
//! cooperativity. Illumination loads the vesicle with protons; the symporter
//! spends that gradient to export messenger molecules, which diffuse to a
//! perfectly absorbing spherical receiver counting absorptions.
//!
//! Module map:
//! - [`params`]: parameter set, validation, config parsing, derived sizes
//! - [`tx`]: transmitter ODE, forward-Euler integration, equilibria and the
//!   symporter activation threshold
//! - [`modulation`]: LED waveforms for OOK, OOK with guard interval, and the
//!   two threshold-pinned schemes, plus loading/deloading time bounds
//! - [`channel`]: first-passage statistics of the diffusive link and the
//!   Monte-Carlo receiver
//! - [`detection`]: threshold detection and the genie-aided threshold search
//! - [`experiment`]: seeded end-to-end BER grid
//! - [`figures`]: flat CSV surfaces for plotting

pub mod channel;
pub mod csvfmt;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod modulation;
pub mod params;
pub mod rng;
pub mod tx;

pub use error::{McError, Result};
