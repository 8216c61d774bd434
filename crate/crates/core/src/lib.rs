//! Forecasting and assimilation of the distribution of a randomly forced
//! advection-reaction state through a deterministic equation for its CDF.

pub mod assimilate;
pub mod distribution;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod mdist;
pub mod physics;
pub mod rng;

pub use assimilate::{
    damd_assimilate, enkf_assimilate, exact_bayes_inputs, grid_bayes_k, observational_posterior,
    AssimilationTrace, DamdSetup, FreeCoords, OptimizerConfig,
};
pub use distribution::{
    cdf_from_pdf, cramer_distance, empirical_cdf, kde_gaussian, kl_divergence, pdf_from_cdf,
    DiscreteCdf, DiscretePdf, GaussianDist,
};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Mode, Preset};
pub use geometry::{fisher_information, kl_gain_profile, FimMatrix};
pub use grid::Grid2D;
pub use mdist::{solve_cdf_characteristics, solve_cdf_fv, ClosureFamily, ClosureSpec, StatParams};
pub use physics::{
    analytic_state, forcing, generate_observations, sample_k_field, KField, KFieldKind,
    Measurement, MeasurementSet, PhysicsConfig,
};
