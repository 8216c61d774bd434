use super::inputs::clamp_ends;
use super::{initial_boundary_cdfs, StatParams};
use crate::distribution::DiscreteCdf;
use crate::error::{Error, Result};
use crate::physics::PhysicsConfig;

/// Exact CDF for a deterministic constant rate `k`. Inputs are Gaussian when `phi`
/// carries their moments and Heaviside at `cfg.u0`, `cfg.ub` otherwise.
///
/// `x > vt`: `F(U) = F0(U e^{kt})`; `x ≤ vt`: `F(U) = Fb(U e^{kx/v}; t - x/v)`.
/// Arguments beyond the last node map to 1.
pub fn solve_cdf_characteristics(
    k: f64,
    phi: &StatParams,
    cfg: &PhysicsConfig,
    x: f64,
    t: f64,
    u_nodes: &[f64],
) -> Result<DiscreteCdf> {
    if u_nodes.len() < 2 {
        return Err(Error::invalid("need at least two state nodes"));
    }
    if !(x >= 0.0 && t >= 0.0) {
        return Err(Error::invalid("x and t must be nonnegative"));
    }
    let inputs = initial_boundary_cdfs(phi, !phi.has_random_inputs(), cfg)?;
    let u_max = *u_nodes.last().unwrap();
    let v = cfg.v;
    let values: Vec<f64> = u_nodes
        .iter()
        .map(|&u| {
            if x > v * t {
                let arg = u * (k * t).exp();
                if arg >= u_max { 1.0 } else { inputs.f0(arg) }
            } else {
                let arg = u * (k * x / v).exp();
                if arg >= u_max { 1.0 } else { inputs.fb(arg, t - x / v) }
            }
        })
        .collect();
    DiscreteCdf::new(u_nodes.to_vec(), clamp_ends(values))
}
