//! Joint 2D compressed sensing and slotted CSMA/CA data reporting for
//! smart-grid field networks.
//!
//! The crate is organised by subsystem:
//!
//! - [`griddata`]: synthetic injected-power fields (harmonic + AR(1) loads,
//!   wind generation with spatially correlated innovations) and model fitting.
//! - [`cscodec`]: wavelet bases, separable sampling operators and sparse
//!   reconstruction of `n_S x n_T` data fields.
//! - [`calibrate`]: empirical success curves and the `(m_S, m_T)` split.
//! - [`macmodel`]: closed-form analytics of the superframe CSMA/CA protocol.
//! - [`optimizer`]: MAC parameter search, TDMA baselines and channel counts.
//! - [`simulator`]: slot-stepped protocol simulator and rolling campaigns.

pub mod calibrate;
pub mod cscodec;
pub mod error;
pub mod griddata;
pub mod macmodel;
pub mod optimizer;
pub mod rng;
pub mod simulator;

pub use error::{Error, Result};
