use super::{
    solve_cdf_characteristics, solve_cdf_fv, ClosureFamily, ClosureSpec, FvDiagnostics, FvOptions,
    StatParams,
};
use crate::distribution::DiscreteCdf;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::physics::PhysicsConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForecastMethod {
    #[default]
    FiniteVolume,
    /// Closed-form transport; only for the exact closure.
    Characteristics,
}

impl ForecastMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ForecastMethod::FiniteVolume => "finite_volume",
            ForecastMethod::Characteristics => "characteristics",
        }
    }

    pub fn check(&self, spec: &ClosureSpec) -> Result<()> {
        if *self == ForecastMethod::Characteristics
            && spec.family != ClosureFamily::ExactDeterministicK
        {
            return Err(Error::invalid("characteristics forecast needs the exact closure"));
        }
        Ok(())
    }
}

/// Model CDF at the grid node and time step nearest to `(x, t)`, solved from `t = 0`,
/// with the solver's invariant diagnostics.
pub fn cdf_slice(
    spec: &ClosureSpec,
    method: ForecastMethod,
    phi: &StatParams,
    cfg: &PhysicsConfig,
    grid: &Grid2D,
    x: f64,
    t: f64,
) -> Result<(DiscreteCdf, FvDiagnostics)> {
    method.check(spec)?;
    match method {
        ForecastMethod::FiniteVolume => {
            let sol = solve_cdf_fv(spec, phi, cfg, grid, &FvOptions::probe(x, t))?;
            Ok((sol.slice_at(x, t)?, sol.diagnostics))
        }
        ForecastMethod::Characteristics => {
            spec.validate(phi)?;
            let xs = grid.x_node(grid.x_index(x));
            let ts = grid.step_index(t) as f64 * grid.dt;
            let c = solve_cdf_characteristics(phi.k_mean, phi, cfg, xs, ts, &grid.u_nodes())?;
            let d = FvDiagnostics::of_slice(&c);
            Ok((c, d))
        }
    }
}
