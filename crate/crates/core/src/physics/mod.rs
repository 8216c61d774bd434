//! The advection-reaction model `∂u/∂t + v ∂u/∂x = -k(x) u` on `x > 0` with
//! `u(x, 0) = u0` and `u(0, t) = u_b + a sin(2πνt + φ)`, its characteristic
//! solution, and the synthetic-data machinery built on it.

mod field;
mod mc;
mod observe;
mod solver;

pub use field::{empirical_semivariogram, sample_k_field, KField, KFieldKind, KFieldSampler};
pub use mc::{sample_constant_k, ConstantKFamily};
pub use observe::{generate_observations, paired_schedule, Measurement, MeasurementSet};
pub use solver::{solve_physical_fv, PhysicalSolution};

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub v: f64,
    pub u0: f64,
    pub ub: f64,
    pub a: f64,
    pub nu: f64,
    pub phase: f64,
    pub k_field: KField,
}

impl PhysicsConfig {
    /// `v = 1`, `a = 0.1`, `ν = 1`, `φ = 3π/2` with the given inputs and rate field.
    pub fn standard(u0: f64, ub: f64, k_field: KField) -> Self {
        Self {
            v: 1.0,
            u0,
            ub,
            a: 0.1,
            nu: 1.0,
            phase: 1.5 * PI,
            k_field,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v > 0.0) || !self.v.is_finite() {
            return Err(Error::invalid("velocity must be positive"));
        }
        for (name, val) in [
            ("u0", self.u0),
            ("ub", self.ub),
            ("a", self.a),
            ("nu", self.nu),
            ("phase", self.phase),
        ] {
            if !val.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        self.k_field.validate()
    }

    /// Boundary forcing baseline shift `s(t)`, without `u_b`.
    pub fn shift(&self, t: f64) -> f64 {
        self.a * (2.0 * PI * self.nu * t + self.phase).sin()
    }
}

/// Inflow value `u_b + a sin(2πνt + φ)`.
pub fn forcing(t: f64, cfg: &PhysicsConfig) -> f64 {
    cfg.ub + cfg.shift(t)
}

/// Exact solution along characteristics for the piecewise-constant rate field.
pub fn analytic_state(x: f64, t: f64, cfg: &PhysicsConfig) -> f64 {
    let v = cfg.v;
    let k = &cfg.k_field;
    if x > v * t {
        cfg.u0 * (-k.integral(x - v * t, x) / v).exp()
    } else {
        forcing(t - x / v, cfg) * (-k.integral(0.0, x) / v).exp()
    }
}

/// `analytic_state` for a spatially constant rate `k`, without building a field.
pub fn constant_k_state(x: f64, t: f64, k: f64, cfg: &PhysicsConfig) -> f64 {
    let v = cfg.v;
    if x > v * t {
        cfg.u0 * (-k * t).exp()
    } else {
        forcing(t - x / v, cfg) * (-k * x / v).exp()
    }
}
