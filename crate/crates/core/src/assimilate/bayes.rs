use crate::distribution::{DiscretePdf, GaussianDist};
use crate::error::{Error, Result};
use crate::physics::{constant_k_state, Measurement, PhysicsConfig};

/// Conjugate Gaussian posteriors of the initial and boundary states for a known
/// constant rate `k`. A datum with `x > vt` observes `u0 e^{-kt}`; otherwise it
/// observes `(u_b + s(t - x/v)) e^{-kx/v}`.
pub fn exact_bayes_inputs(
    measurements: &[Measurement],
    prior0: GaussianDist,
    priorb: GaussianDist,
    k: f64,
    cfg: &PhysicsConfig,
) -> Result<(GaussianDist, GaussianDist)> {
    let v = cfg.v;
    // (precision, precision-weighted mean) per input
    let mut init = (prior0.std.powi(-2), prior0.mean * prior0.std.powi(-2));
    let mut bnd = (priorb.std.powi(-2), priorb.mean * priorb.std.powi(-2));
    for m in measurements {
        let r = m.sigma_eps.powi(-2);
        if m.x > v * m.t {
            let a = (-k * m.t).exp();
            init.0 += a * a * r;
            init.1 += a * m.d * r;
        } else {
            let a = (-k * m.x / v).exp();
            let offset = a * cfg.shift(m.t - m.x / v);
            bnd.0 += a * a * r;
            bnd.1 += a * (m.d - offset) * r;
        }
    }
    let post = |(p, pm): (f64, f64)| GaussianDist::new(pm / p, p.powf(-0.5));
    Ok((post(init)?, post(bnd)?))
}

/// Posterior density of a constant rate on `k_nodes`, from the exact solution and a
/// Gaussian prior.
pub fn grid_bayes_k(
    measurements: &[Measurement],
    prior: GaussianDist,
    cfg: &PhysicsConfig,
    k_nodes: &[f64],
) -> Result<DiscretePdf> {
    if k_nodes.len() < 2 {
        return Err(Error::invalid("need at least two rate nodes"));
    }
    let log_post: Vec<f64> = k_nodes
        .iter()
        .map(|&k| {
            let ll: f64 = measurements
                .iter()
                .map(|m| {
                    let z = (m.d - constant_k_state(m.x, m.t, k, cfg)) / m.sigma_eps;
                    -0.5 * z * z - m.sigma_eps.ln()
                })
                .sum();
            ll + prior.ln_pdf(k)
        })
        .collect();
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::InconsistentData("posterior vanishes on every rate node".into()));
    }
    let w: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
    DiscretePdf::normalized(k_nodes.to_vec(), w)
}
