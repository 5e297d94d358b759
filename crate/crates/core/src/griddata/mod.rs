//! Synthetic injected-power fields and model fitting.
//!
//! Loads and wind speeds follow `X_t = X^d_t + X^s_t`: a daily harmonic
//! profile plus an AR(1) process with per-interval coefficients. Wind speed
//! is mapped to power through a turbine curve, and the wind innovations are
//! correlated across sites by `exp(-d_ij / d)`.

mod field;
mod fit;
mod series;
mod spatial;
mod wind;

pub use field::{
    gen_field, gen_field_with, generator_nodes, CorrelationConfig, DataField, GeneratorConfig,
    NodePopulation, Placement,
};
pub use fit::{fit_ar1, fit_harmonics, Ar1Fit, HarmonicFit};
pub use series::{gen_series, Ar1Model, Harmonic, HarmonicModel, SeriesModel};
pub use spatial::{correlate_nodes, SpatialCorrelation};
pub use wind::{wind_power, WindTurbineCurve};
