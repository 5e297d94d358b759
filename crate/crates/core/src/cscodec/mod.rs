//! Two-dimensional (Kronecker) compressed sensing: wavelet bases, sampling
//! plans, reconstruction and error metrics.
//!
//! Matrices are vectorized by stacking rows, so with `Y = Phi_S Z Phi_T^T`
//! one has `vec(Y) = (Phi_S ⊗ Phi_T) vec(Z)`.

mod plan;
mod recon;
mod wavelet;

pub use plan::{
    observe, read_observations, unvectorize, vectorize, write_observations, EntryDistribution,
    SamplingMode, SamplingPlan,
};
pub use recon::{
    mse, reconstruct, reconstruct_masked, ReconstructionConfig, ReconstructionResult, Solver,
};
pub use wavelet::{analyze, synthesize, WaveletBasis, WaveletKind};
