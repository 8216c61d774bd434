use super::optimize::{minimize_nelder_mead, OptimizerConfig};
use super::posterior::observational_posterior;
use crate::distribution::{cramer_distance, DiscreteCdf};
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::mdist::{cdf_slice, ClosureSpec, Coord, ForecastMethod, FvDiagnostics, StatParams};
use crate::physics::{Measurement, PhysicsConfig};

/// Which coordinates of `φ` a measurement may move.
#[derive(Debug, Clone, PartialEq)]
pub enum FreeCoords {
    All(Vec<Coord>),
    /// `initial` for data ahead of the inflow front (`x > vt`), `boundary` behind it.
    ByRegion { initial: Vec<Coord>, boundary: Vec<Coord> },
}

impl FreeCoords {
    pub fn for_measurement(&self, m: &Measurement, v: f64) -> &[Coord] {
        match self {
            FreeCoords::All(c) => c,
            FreeCoords::ByRegion { initial, boundary } => {
                if m.x > v * m.t {
                    initial
                } else {
                    boundary
                }
            }
        }
    }
}

/// Everything the forecast-analysis loop needs besides the data and `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DamdSetup {
    pub spec: ClosureSpec,
    pub method: ForecastMethod,
    pub cfg: PhysicsConfig,
    pub grid: Grid2D,
    pub free: FreeCoords,
    pub opt: OptimizerConfig,
}

impl DamdSetup {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.cfg.validate()?;
        self.opt.validate()?;
        self.method.check(&self.spec)
    }
}

/// Model CDF at the measurement location for `φ`, with solver diagnostics.
pub fn forecast_slice(
    setup: &DamdSetup,
    phi: &StatParams,
    x: f64,
    t: f64,
) -> Result<(DiscreteCdf, FvDiagnostics)> {
    cdf_slice(&setup.spec, setup.method, phi, &setup.cfg, &setup.grid, x, t)
}

/// Cramér distance between `target` and the model CDF of `φ` at the measurement.
pub fn damd_loss(
    phi: &StatParams,
    setup: &DamdSetup,
    m: &Measurement,
    target: &DiscreteCdf,
) -> Result<f64> {
    let (slice, _) = forecast_slice(setup, phi, m.x, m.t)?;
    cramer_distance(target, &slice)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub index: usize,
    pub measurement: Measurement,
    pub phi_before: StatParams,
    pub phi_after: StatParams,
    /// Loss of `phi_before` against this step's target.
    pub loss_before: f64,
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssimilationTrace {
    pub phi0: StatParams,
    pub steps: Vec<TraceStep>,
    /// Index of the measurement whose step failed, and why; the run stops there.
    pub failure: Option<(usize, Error)>,
    /// Invariants over every forecast solved for a prior slice.
    pub diagnostics: FvDiagnostics,
}

impl AssimilationTrace {
    pub fn final_phi(&self) -> StatParams {
        self.steps.last().map_or(self.phi0, |s| s.phi_after)
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Sequential forecast-analysis loop. For each measurement in order: forecast with
/// the current `φ`, condition that slice on the datum, then move the free coordinates
/// of `φ` to the closest model CDF in Cramér distance.
pub fn damd_assimilate(
    measurements: &[Measurement],
    phi0: &StatParams,
    setup: &DamdSetup,
) -> Result<AssimilationTrace> {
    setup.validate()?;
    setup.spec.validate(phi0)?;
    let mut trace = AssimilationTrace {
        phi0: *phi0,
        steps: Vec::with_capacity(measurements.len()),
        failure: None,
        diagnostics: FvDiagnostics::default(),
    };
    let mut phi = *phi0;
    for (index, m) in measurements.iter().enumerate() {
        match assimilate_one(setup, &phi, m, &mut trace.diagnostics) {
            Ok(mut step) => {
                step.index = index;
                phi = step.phi_after;
                trace.steps.push(step);
            }
            Err(e) => {
                trace.failure = Some((index, e));
                break;
            }
        }
    }
    Ok(trace)
}

fn assimilate_one(
    setup: &DamdSetup,
    phi: &StatParams,
    m: &Measurement,
    diagnostics: &mut FvDiagnostics,
) -> Result<TraceStep> {
    let (prior, diag) = forecast_slice(setup, phi, m.x, m.t)?;
    diagnostics.merge(&diag);
    let (_, target) = observational_posterior(&prior, m.d, m.sigma_eps)?;
    let loss_before = cramer_distance(&target, &prior)?;
    let coords = setup.free.for_measurement(m, setup.cfg.v);
    let (after, report) = minimize_nelder_mead(
        |p: &StatParams| damd_loss(p, setup, m, &target),
        phi,
        coords,
        &setup.opt,
    )?;
    Ok(TraceStep {
        index: 0,
        measurement: *m,
        phi_before: *phi,
        phi_after: after,
        loss_before,
        loss: report.loss,
        iterations: report.iterations,
        evaluations: report.evaluations,
        converged: report.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdist::ClosureFamily;
    use crate::physics::KField;

    fn setup(method: ForecastMethod, family: ClosureFamily) -> DamdSetup {
        let grid = Grid2D::standard();
        DamdSetup {
            spec: ClosureSpec::new(family),
            method,
            cfg: PhysicsConfig::standard(0.4, 0.5, KField::constant(1.0, &grid)),
            grid,
            free: FreeCoords::All(vec![Coord::KMean, Coord::KStd]),
            opt: OptimizerConfig::default(),
        }
    }

    #[test]
    fn self_target_has_zero_loss() {
        let s = setup(ForecastMethod::FiniteVolume, ClosureFamily::RandomConstantK);
        let phi = StatParams::k_only(2.0, 0.2, None);
        let m = Measurement { x: 0.8, t: 0.4, d: 0.3, sigma_eps: 0.02 };
        let (slice, _) = forecast_slice(&s, &phi, m.x, m.t).unwrap();
        assert_eq!(damd_loss(&phi, &s, &m, &slice).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_prior_at_truth() {
        let mut s = setup(ForecastMethod::Characteristics, ClosureFamily::ExactDeterministicK);
        s.free = FreeCoords::All(vec![Coord::Mu0, Coord::Sigma0]);
        // a near-degenerate initial state at the truth; the target is a step at u(x, t)
        let phi = StatParams::gaussian_inputs(1.0, 0.4, 1e-6, 0.5, 1e-6);
        let m = Measurement { x: 0.8, t: 0.3, d: 0.0, sigma_eps: 0.02 };
        let truth = 0.4 * (-0.3f64).exp();
        let target = DiscreteCdf::step(s.grid.u_nodes(), truth).unwrap();
        let loss = damd_loss(&phi, &s, &m, &target).unwrap();
        assert!(loss <= 2.0 * s.grid.du(), "{loss}");
    }

    #[test]
    fn empty_data_is_identity() {
        let s = setup(ForecastMethod::FiniteVolume, ClosureFamily::RandomConstantK);
        let phi = StatParams::k_only(2.0, 0.2, None);
        let trace = damd_assimilate(&[], &phi, &s).unwrap();
        assert_eq!(trace.final_phi(), phi);
        assert!(trace.completed());
    }

    #[test]
    fn characteristics_need_exact_closure() {
        let s = setup(ForecastMethod::Characteristics, ClosureFamily::RandomConstantK);
        assert!(damd_assimilate(&[], &StatParams::k_only(2.0, 0.2, None), &s).is_err());
    }

    #[test]
    fn one_step_reduces_loss() {
        let s = setup(ForecastMethod::FiniteVolume, ClosureFamily::RandomConstantK);
        let phi = StatParams::k_only(2.0, 0.2, None);
        let m = Measurement { x: 0.8, t: 0.3, d: 0.4 * (-1.047f64 * 0.3).exp(), sigma_eps: 0.02 };
        let trace = damd_assimilate(&[m], &phi, &s).unwrap();
        let step = &trace.steps[0];
        assert!(step.loss_before > 0.0);
        assert!(step.loss < step.loss_before);
        assert!(step.phi_after.k_mean < 2.0);
        assert!(step.phi_after.k_std >= 0.0);
    }
}
