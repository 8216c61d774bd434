//! Fisher information metric on the manifold of model CDFs and KL information gain.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::distribution::{kl_divergence, pdf_from_cdf, trapezoid, GaussianDist};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::mdist::{
    cdf_slice, solve_cdf_characteristics, solve_cdf_fv, ClosureSpec, Coord, ForecastMethod,
    FvOptions, SnapshotPolicy, StatParams,
};
use crate::physics::PhysicsConfig;

/// Floor on densities before taking logarithms.
pub const FIM_DENSITY_FLOOR: f64 = 1e-12;
pub const DEFAULT_H_REL: f64 = 1e-3;
const SYMMETRY_TOL: f64 = 1e-8;
const PSD_TOL: f64 = 1e-8;

/// A manifold coordinate: space, time or one component of `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FimCoord {
    X,
    T,
    Param(Coord),
}

impl FimCoord {
    pub fn name(&self) -> &'static str {
        match self {
            FimCoord::X => "x",
            FimCoord::T => "t",
            FimCoord::Param(c) => c.name(),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "x" => Some(FimCoord::X),
            "t" => Some(FimCoord::T),
            _ => Coord::parse(name).map(FimCoord::Param),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix {
    pub coords: Vec<String>,
    pub entries: DMatrix<f64>,
}

impl FimMatrix {
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.entries.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Symmetric within 1e-8 and positive semidefinite up to 1e-8 (relative to the
    /// largest entry when that exceeds 1).
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let scale = self.entries.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (self.get(i, j) - self.get(j, i)).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Numerical(format!(
                        "metric not symmetric in ({}, {})",
                        self.coords[i], self.coords[j]
                    )));
                }
            }
            if self.get(i, i) < -PSD_TOL * scale {
                return Err(Error::Numerical(format!("negative diagonal at {}", self.coords[i])));
            }
        }
        if n > 0 && self.min_eigenvalue() < -PSD_TOL * scale {
            return Err(Error::Numerical("metric is not positive semidefinite".into()));
        }
        Ok(())
    }

    /// `max |g_a - g_b| / max |g_b|`, for step-halving checks.
    pub fn relative_difference(&self, other: &FimMatrix) -> Result<f64> {
        if self.coords != other.coords {
            return Err(Error::invalid("metrics have different coordinates"));
        }
        let den = other.entries.amax();
        let num = (&self.entries - &other.entries).amax();
        Ok(if den > 0.0 { num / den } else { num })
    }
}

/// `g_jk = ∫ ∂_j ln f ∂_k ln f f dU` by central differences of `ln f` (five-point
/// stencil at `±h, ±2h`) and trapezoid quadrature on `u_nodes`. `density(θ)` returns `f` on
/// `u_nodes`; values are floored at [`FIM_DENSITY_FLOOR`].
pub fn fisher_information_from_density<F>(
    names: &[&str],
    theta: &[f64],
    steps: &[f64],
    u_nodes: &[f64],
    mut density: F,
) -> Result<FimMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = theta.len();
    if names.len() != n || steps.len() != n {
        return Err(Error::invalid("names, coordinates and steps differ in length"));
    }
    let mut eval = |th: &[f64]| -> Result<Vec<f64>> {
        let f = density(th)?;
        if f.len() != u_nodes.len() {
            return Err(Error::invalid("density has the wrong length"));
        }
        Ok(f.into_iter().map(|v| v.max(FIM_DENSITY_FLOOR)).collect())
    };
    let f0 = eval(theta)?;
    let mut scores = Vec::with_capacity(n);
    for j in 0..n {
        let h = steps[j];
        if !(h > 0.0) {
            return Err(Error::invalid(format!("step for {} must be positive", names[j])));
        }
        let mut at = |mult: f64| {
            let mut th = theta.to_vec();
            th[j] += mult * h;
            eval(&th)
        };
        let (fp2, fp1, fm1, fm2) = (at(2.0)?, at(1.0)?, at(-1.0)?, at(-2.0)?);
        let s: Vec<f64> = (0..u_nodes.len())
            .map(|i| {
                (8.0 * (fp1[i].ln() - fm1[i].ln()) - (fp2[i].ln() - fm2[i].ln())) / (12.0 * h)
            })
            .collect();
        scores.push(s);
    }
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..=j {
            let integrand: Vec<f64> = (0..u_nodes.len())
                .map(|i| scores[j][i] * scores[k][i] * f0[i])
                .collect();
            let v = trapezoid(u_nodes, &integrand);
            if !v.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite metric entry ({}, {})",
                    names[j], names[k]
                )));
            }
            g[(j, k)] = v;
            g[(k, j)] = v;
        }
    }
    Ok(FimMatrix {
        coords: names.iter().map(|s| s.to_string()).collect(),
        entries: g,
    })
}

/// Finite-difference metric of the Gaussian family in `(μ, σ)` from its analytic
/// density; the closed form is `diag(1/σ², 2/σ²)`.
pub fn gaussian_fisher_information(dist: &GaussianDist, h_rel: f64, u_nodes: &[f64]) -> Result<FimMatrix> {
    let theta = [dist.mean, dist.std];
    let steps: Vec<f64> = theta.iter().map(|v| h_rel * v.abs().max(1.0)).collect();
    if dist.std - 2.0 * steps[1] <= 0.0 {
        return Err(Error::invalid("step exceeds the standard deviation"));
    }
    fisher_information_from_density(&["mu", "sigma"], &theta, &steps, u_nodes, |th| {
        let g = GaussianDist::new(th[0], th[1])?;
        Ok(u_nodes.iter().map(|&u| g.pdf(u)).collect())
    })
}

/// Where the model density is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct FimModel<'a> {
    pub spec: &'a ClosureSpec,
    pub method: ForecastMethod,
    pub cfg: &'a PhysicsConfig,
    pub grid: &'a Grid2D,
}

impl FimModel<'_> {
    fn density(&self, phi: &StatParams, x: f64, t: f64) -> Result<Vec<f64>> {
        let (c, _) = cdf_slice(self.spec, self.method, phi, self.cfg, self.grid, x, t)?;
        Ok(pdf_from_cdf(&c).densities().to_vec())
    }
}

/// Metric of the model density `f_u(U; x, t, φ)` in the listed coordinates.
///
/// Parameter steps are `h_rel max(|θ|, 1)`, halved for scale coordinates whose
/// stencil would otherwise reach zero. The solver snaps `(x, t)` to
/// the grid, so steps in `x` and `t` are at least one cell.
pub fn fisher_information(
    model: &FimModel<'_>,
    phi: &StatParams,
    x: f64,
    t: f64,
    coords: &[FimCoord],
    h_rel: f64,
) -> Result<FimMatrix> {
    if !(h_rel > 0.0) {
        return Err(Error::invalid("h_rel must be positive"));
    }
    let g = model.grid;
    let mut theta = Vec::with_capacity(coords.len());
    let mut steps = Vec::with_capacity(coords.len());
    for c in coords {
        let (value, step) = match c {
            FimCoord::X => (x, (h_rel * x.abs().max(1.0)).max(g.dx())),
            FimCoord::T => (t, (h_rel * t.abs().max(1.0)).max(g.dt)),
            FimCoord::Param(p) => {
                let v = phi
                    .get(*p)
                    .ok_or_else(|| Error::invalid(format!("coordinate {} has no value", p.name())))?;
                let mut h = h_rel * v.abs().max(1.0);
                if p.is_scale() {
                    if !(v > 0.0) {
                        return Err(Error::invalid(format!("{} must be positive", p.name())));
                    }
                    while v - 2.0 * h <= 0.0 {
                        h *= 0.5;
                    }
                }
                (v, h)
            }
        };
        if matches!(c, FimCoord::X | FimCoord::T) && value - 2.0 * step < 0.0 {
            return Err(Error::invalid(format!("{} too close to zero for a central step", c.name())));
        }
        theta.push(value);
        steps.push(step);
    }
    let names: Vec<&str> = coords.iter().map(FimCoord::name).collect();
    let u_nodes = g.u_nodes();
    let m = fisher_information_from_density(&names, &theta, &steps, &u_nodes, |th| {
        let mut p = *phi;
        let (mut xx, mut tt) = (x, t);
        for (c, &v) in coords.iter().zip(th) {
            match c {
                FimCoord::X => xx = v,
                FimCoord::T => tt = v,
                FimCoord::Param(q) => p.set(*q, v),
            }
        }
        model.density(&p, xx, tt)
    })?;
    m.validate()?;
    Ok(m)
}

/// Pointwise `D_KL(post ‖ prior)` across the `x` nodes at time `t`.
pub fn kl_gain_profile(
    model: &FimModel<'_>,
    prior: &StatParams,
    post: &StatParams,
    t: f64,
) -> Result<Vec<(f64, f64)>> {
    model.method.check(model.spec)?;
    let g = model.grid;
    let u_nodes = g.u_nodes();
    let xs = g.x_nodes();
    match model.method {
        ForecastMethod::FiniteVolume => {
            let opts = FvOptions { t_end: Some(t), x_limit: None, snapshots: SnapshotPolicy::FinalOnly };
            let a = solve_cdf_fv(model.spec, prior, model.cfg, g, &opts)?;
            let b = solve_cdf_fv(model.spec, post, model.cfg, g, &opts)?;
            let s = a.steps.len() - 1;
            (0..a.n_x_kept())
                .map(|i| {
                    let q = pdf_from_cdf(&a.slice(s, i)?);
                    let p = pdf_from_cdf(&b.slice(s, i)?);
                    Ok((xs[i], kl_divergence(&p, &q)?))
                })
                .collect()
        }
        ForecastMethod::Characteristics => {
            model.spec.validate(prior)?;
            model.spec.validate(post)?;
            let ts = g.step_index(t) as f64 * g.dt;
            xs.iter()
                .map(|&x| {
                    let q = solve_cdf_characteristics(prior.k_mean, prior, model.cfg, x, ts, &u_nodes)?;
                    let p = solve_cdf_characteristics(post.k_mean, post, model.cfg, x, ts, &u_nodes)?;
                    Ok((x, kl_divergence(&pdf_from_cdf(&p), &pdf_from_cdf(&q))?))
                })
                .collect()
        }
    }
}
