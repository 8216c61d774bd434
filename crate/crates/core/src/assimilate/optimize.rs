use crate::error::{Error, Result};
use crate::mdist::{Coord, StatParams};

/// Floor applied to a zero scale coordinate before it is moved to log space.
const LOG_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Stop once the loss spread over the simplex falls below `tol` times the
    /// spread of the initial simplex.
    pub tol: f64,
    pub max_iters: usize,
    /// Initial edge: this fraction of a linear coordinate (or of 1 when it is zero),
    /// or this step in the log of a scale coordinate.
    pub initial_simplex_scale: f64,
    /// Stop once every vertex lies within `x_tol` of the best one (internal coordinates).
    pub x_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 200,
            initial_simplex_scale: 0.1,
            x_tol: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.x_tol >= 0.0) {
            return Err(Error::invalid("optimizer tolerances must be positive"));
        }
        if !(self.initial_simplex_scale > 0.0) {
            return Err(Error::invalid("initial simplex scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn to_internal(phi: &StatParams, coords: &[Coord]) -> Result<Vec<f64>> {
    coords
        .iter()
        .map(|&c| {
            let v = phi
                .get(c)
                .ok_or_else(|| Error::invalid(format!("coordinate {} has no value", c.name())))?;
            Ok(if c.is_scale() { v.max(LOG_FLOOR).ln() } else { v })
        })
        .collect()
}

fn to_params(base: &StatParams, coords: &[Coord], z: &[f64]) -> StatParams {
    let mut p = *base;
    for (&c, &v) in coords.iter().zip(z) {
        p.set(c, if c.is_scale() { v.exp() } else { v });
    }
    p
}

/// Nelder-Mead over the listed coordinates of `phi0` (the others stay fixed), with
/// reflection, expansion, contraction and shrink coefficients 1, 2, 1/2, 1/2. Scale
/// coordinates are searched in log space, so they stay positive. Non-finite losses
/// count as `+∞`. When `max_iters` is hit the best vertex is returned with
/// `converged = false`.
pub fn minimize_nelder_mead<F>(
    mut objective: F,
    phi0: &StatParams,
    coords: &[Coord],
    opt: &OptimizerConfig,
) -> Result<(StatParams, OptimizeReport)>
where
    F: FnMut(&StatParams) -> Result<f64>,
{
    opt.validate()?;
    let n = coords.len();
    let x0 = to_internal(phi0, coords)?;
    let mut evaluations = 0usize;
    let mut eval = |z: &[f64]| -> Result<f64> {
        evaluations += 1;
        let f = objective(&to_params(phi0, coords, z))?;
        Ok(if f.is_finite() { f } else { f64::INFINITY })
    };
    let f0 = eval(&x0)?;
    if !f0.is_finite() {
        return Err(Error::invalid("objective is not finite at the starting point"));
    }
    if n == 0 {
        let report = OptimizeReport { loss: f0, iterations: 0, evaluations: 1, converged: true };
        return Ok((*phi0, report));
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), f0)];
    for (i, &c) in coords.iter().enumerate() {
        let mut z = x0.clone();
        let h = opt.initial_simplex_scale;
        z[i] += if c.is_scale() || x0[i] == 0.0 { h } else { h * x0[i].abs() };
        let f = eval(&z)?;
        simplex.push((z, f));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    order(&mut simplex);
    let spread = |s: &[(Vec<f64>, f64)]| s[n].1 - s[0].1;
    let initial_spread = spread(&simplex);

    let mut iterations = 0;
    let mut converged = false;
    loop {
        let fs = spread(&simplex);
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(z, _)| z.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fs <= opt.tol * initial_spread || diameter <= opt.x_tol {
            converged = true;
            break;
        }
        if iterations >= opt.max_iters {
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|(z, _)| z[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (c - w)).collect()
        };
        let worst = simplex[n].0.clone();
        let (f_best, f_second, f_worst) = (simplex[0].1, simplex[n - 1].1, simplex[n].1);

        let xr = along(1.0, &worst);
        let fr = eval(&xr)?;
        if fr < f_best {
            let xe = along(2.0, &worst);
            let fe = eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < f_second {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc, accept) = if fr < f_worst {
                let xc = along(0.5, &worst);
                let fc = eval(&xc)?;
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-0.5, &worst);
                let fc = eval(&xc)?;
                (xc, fc, fc < f_worst)
            };
            if accept {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let z: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let f = eval(&z)?;
                    *vertex = (z, f);
                }
            }
        }
        order(&mut simplex);
    }
    let (z, loss) = simplex.swap_remove(0);
    Ok((
        to_params(phi0, coords, &z),
        OptimizeReport { loss, iterations, evaluations, converged },
    ))
}
