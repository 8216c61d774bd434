use super::StatParams;
use crate::distribution::normal_cdf;
use crate::error::{Error, Result};
use crate::physics::PhysicsConfig;

/// Initial CDF `F0(U)` and inflow CDF `Fb(U, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InputCdfs {
    /// `F0 = H(U - u0)`, `Fb = H(U - u_b - s(t))` with `H(0) = 1`.
    Deterministic { u0: f64, ub: f64, cfg: PhysicsConfig },
    /// Gaussian `N(μ0, σ0²)` and `N(μb + s(t), σb²)`.
    Gaussian {
        mu0: f64,
        sigma0: f64,
        mub: f64,
        sigmab: f64,
        cfg: PhysicsConfig,
    },
}

fn heaviside(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        0.0
    }
}

impl InputCdfs {
    /// Raw initial CDF, without clamping to the state interval.
    pub fn f0(&self, u: f64) -> f64 {
        match self {
            InputCdfs::Deterministic { u0, .. } => heaviside(u - u0),
            InputCdfs::Gaussian { mu0, sigma0, .. } => normal_cdf((u - mu0) / sigma0),
        }
    }

    /// Raw inflow CDF at time `t`.
    pub fn fb(&self, u: f64, t: f64) -> f64 {
        match self {
            InputCdfs::Deterministic { ub, cfg, .. } => heaviside(u - ub - cfg.shift(t)),
            InputCdfs::Gaussian { mub, sigmab, cfg, .. } => {
                normal_cdf((u - mub - cfg.shift(t)) / sigmab)
            }
        }
    }

    /// `f0` on ascending nodes with the end values pinned to 0 and 1.
    pub fn f0_on(&self, u_nodes: &[f64]) -> Vec<f64> {
        clamp_ends(u_nodes.iter().map(|&u| self.f0(u)).collect())
    }

    pub fn fb_on(&self, u_nodes: &[f64], t: f64) -> Vec<f64> {
        clamp_ends(u_nodes.iter().map(|&u| self.fb(u, t)).collect())
    }
}

pub(crate) fn clamp_ends(mut f: Vec<f64>) -> Vec<f64> {
    if let Some(first) = f.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = f.last_mut() {
        *last = 1.0;
    }
    f
}

/// Input CDFs of the configuration: Heaviside at `cfg.u0`, `cfg.ub` when
/// `deterministic_inputs`, otherwise Gaussian with the moments stored in `phi`.
pub fn initial_boundary_cdfs(
    phi: &StatParams,
    deterministic_inputs: bool,
    cfg: &PhysicsConfig,
) -> Result<InputCdfs> {
    if deterministic_inputs {
        return Ok(InputCdfs::Deterministic {
            u0: cfg.u0,
            ub: cfg.ub,
            cfg: cfg.clone(),
        });
    }
    match (phi.mu0, phi.sigma0, phi.mub, phi.sigmab) {
        (Some(mu0), Some(sigma0), Some(mub), Some(sigmab)) if sigma0 > 0.0 && sigmab > 0.0 => {
            Ok(InputCdfs::Gaussian {
                mu0,
                sigma0,
                mub,
                sigmab,
                cfg: cfg.clone(),
            })
        }
        _ => Err(Error::invalid(
            "random inputs need mu0, sigma0 > 0, mub and sigmab > 0",
        )),
    }
}
