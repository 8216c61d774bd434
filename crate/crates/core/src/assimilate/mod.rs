//! Data assimilation: the observational posterior, exact Bayes baselines, the
//! sequential CDF-matching loop and an ensemble Kalman filter on the rate field.

mod bayes;
mod damd;
mod enkf;
mod optimize;
mod posterior;

pub use bayes::{exact_bayes_inputs, grid_bayes_k};
pub use damd::{
    damd_assimilate, damd_loss, forecast_slice, AssimilationTrace, DamdSetup, FreeCoords,
    TraceStep,
};
pub use enkf::{enkf_assimilate, enkf_update, Ensemble, EnkfPrior, EnkfResult, EnkfStep};
pub use optimize::{minimize_nelder_mead, OptimizeReport, OptimizerConfig};
pub use posterior::observational_posterior;
