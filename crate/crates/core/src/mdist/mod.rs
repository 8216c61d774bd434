//! Forecast step: closures for the CDF equation
//! `∂F/∂t + q1 ∂F/∂x + q2 ∂F/∂U = ∂/∂U (d22 ∂F/∂U)` and its solution.

mod characteristics;
mod closure;
mod forecast;
mod fv;
mod inputs;

pub use characteristics::solve_cdf_characteristics;
pub use closure::{
    closure_coefficients, closure_correction, t_star, ClosureCoeffs, ClosureFamily, ClosureSpec,
    Covariance, SignConvention, QUADRATURE_PANELS,
};
pub use forecast::{cdf_slice, ForecastMethod};
pub use fv::{solve_cdf_fv, CdfField, CdfSolution, FvDiagnostics, FvOptions, SnapshotPolicy};
pub use inputs::{initial_boundary_cdfs, InputCdfs};

use crate::error::{Error, Result};

/// Coordinates `φ` of the statistical manifold: moments of the rate `k` and, for
/// random inputs, of the initial and boundary states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatParams {
    pub k_mean: f64,
    pub k_std: f64,
    pub k_corr_len: Option<f64>,
    pub mu0: Option<f64>,
    pub sigma0: Option<f64>,
    pub mub: Option<f64>,
    pub sigmab: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coord {
    KMean,
    KStd,
    KCorrLen,
    Mu0,
    Sigma0,
    Mub,
    Sigmab,
}

impl Coord {
    pub const ALL: [Coord; 7] = [
        Coord::KMean,
        Coord::KStd,
        Coord::KCorrLen,
        Coord::Mu0,
        Coord::Sigma0,
        Coord::Mub,
        Coord::Sigmab,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Coord::KMean => "k_mean",
            Coord::KStd => "k_std",
            Coord::KCorrLen => "k_corr_len",
            Coord::Mu0 => "mu0",
            Coord::Sigma0 => "sigma0",
            Coord::Mub => "mub",
            Coord::Sigmab => "sigmab",
        }
    }

    pub fn parse(name: &str) -> Option<Coord> {
        Coord::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Scale-type coordinates, which must stay positive.
    pub fn is_scale(&self) -> bool {
        matches!(self, Coord::KStd | Coord::KCorrLen | Coord::Sigma0 | Coord::Sigmab)
    }
}

impl StatParams {
    /// Rate moments only; inputs deterministic.
    pub fn k_only(k_mean: f64, k_std: f64, k_corr_len: Option<f64>) -> Self {
        Self {
            k_mean,
            k_std,
            k_corr_len,
            mu0: None,
            sigma0: None,
            mub: None,
            sigmab: None,
        }
    }

    /// Deterministic rate `k` with Gaussian initial and boundary states.
    pub fn gaussian_inputs(k: f64, mu0: f64, sigma0: f64, mub: f64, sigmab: f64) -> Self {
        Self {
            k_mean: k,
            k_std: 0.0,
            k_corr_len: None,
            mu0: Some(mu0),
            sigma0: Some(sigma0),
            mub: Some(mub),
            sigmab: Some(sigmab),
        }
    }

    pub fn get(&self, c: Coord) -> Option<f64> {
        match c {
            Coord::KMean => Some(self.k_mean),
            Coord::KStd => Some(self.k_std),
            Coord::KCorrLen => self.k_corr_len,
            Coord::Mu0 => self.mu0,
            Coord::Sigma0 => self.sigma0,
            Coord::Mub => self.mub,
            Coord::Sigmab => self.sigmab,
        }
    }

    pub fn set(&mut self, c: Coord, value: f64) {
        match c {
            Coord::KMean => self.k_mean = value,
            Coord::KStd => self.k_std = value,
            Coord::KCorrLen => self.k_corr_len = Some(value),
            Coord::Mu0 => self.mu0 = Some(value),
            Coord::Sigma0 => self.sigma0 = Some(value),
            Coord::Mub => self.mub = Some(value),
            Coord::Sigmab => self.sigmab = Some(value),
        }
    }

    /// Coordinates that carry a value, in `Coord::ALL` order.
    pub fn present(&self) -> Vec<Coord> {
        Coord::ALL.into_iter().filter(|c| self.get(*c).is_some()).collect()
    }

    pub fn has_random_inputs(&self) -> bool {
        self.mu0.is_some() || self.sigma0.is_some() || self.mub.is_some() || self.sigmab.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        for c in self.present() {
            let v = self.get(c).unwrap();
            if !v.is_finite() {
                return Err(Error::invalid(format!("{} must be finite", c.name())));
            }
        }
        if self.k_std < 0.0 {
            return Err(Error::invalid("k_std must be nonnegative"));
        }
        for c in [Coord::KCorrLen, Coord::Sigma0, Coord::Sigmab] {
            if let Some(v) = self.get(c) {
                if v <= 0.0 {
                    return Err(Error::invalid(format!("{} must be positive", c.name())));
                }
            }
        }
        let inputs = [self.mu0, self.sigma0, self.mub, self.sigmab];
        if self.has_random_inputs() && inputs.iter().any(|v| v.is_none()) {
            return Err(Error::invalid(
                "random inputs need all of mu0, sigma0, mub, sigmab",
            ));
        }
        Ok(())
    }
}
