//! Tensor-product discretization of physical space `x`, state space `U` and time.
//!
//! Both axes are node based: `n_x` cells give `n_x + 1` nodes `x_i = x_min + i Δx`,
//! and `n_u` cells give `n_u + 1` nodes `U_j = u_min + j ΔU`. The first `x` node is the
//! inflow boundary, the first and last `U` nodes carry the CDF boundary values 0 and 1.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub n_u: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Grid2D {
    pub fn new(
        (x_min, x_max, n_x): (f64, f64, usize),
        (u_min, u_max, n_u): (f64, f64, usize),
        dt: f64,
        t_end: f64,
    ) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            n_x,
            u_min,
            u_max,
            n_u,
            dt,
            t_end,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// The discretization used for the random reaction-rate experiments:
    /// `L = 1`, `Δx = L/200`, `U ∈ [0, 1]` with `ΔU = 1/128`, `Δt = 0.01`, up to `t = 0.6`.
    pub fn standard() -> Self {
        Self {
            x_min: 0.0,
            x_max: 1.0,
            n_x: 200,
            u_min: 0.0,
            u_max: 1.0,
            n_u: 128,
            dt: 0.01,
            t_end: 0.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.u_min, self.u_max, self.dt, self.t_end]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if !(self.x_min < self.x_max) {
            return Err(Error::invalid(format!(
                "x_min ({}) must be below x_max ({})",
                self.x_min, self.x_max
            )));
        }
        if !(self.u_min < self.u_max) {
            return Err(Error::invalid(format!(
                "u_min ({}) must be below u_max ({})",
                self.u_min, self.u_max
            )));
        }
        if self.n_x < 2 || self.n_u < 2 {
            return Err(Error::invalid("n_x and n_u must be at least 2"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::invalid("t_end must be at least dt"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn du(&self) -> f64 {
        (self.u_max - self.u_min) / self.n_u as f64
    }

    pub fn x_node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn u_node(&self, j: usize) -> f64 {
        if j == self.n_u {
            self.u_max
        } else {
            self.u_min + j as f64 * self.du()
        }
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..=self.n_x).map(|i| self.x_node(i)).collect()
    }

    pub fn u_nodes(&self) -> Vec<f64> {
        (0..=self.n_u).map(|j| self.u_node(j)).collect()
    }

    /// Center of the `c`-th x cell, `c < n_x`.
    pub fn x_cell_center(&self, c: usize) -> f64 {
        self.x_min + (c as f64 + 0.5) * self.dx()
    }

    /// Nearest x node to `x`, clamped to the grid.
    pub fn x_index(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx()).round();
        i.clamp(0.0, self.n_x as f64) as usize
    }

    /// Number of time steps needed to reach `t` (nearest step, at least zero).
    pub fn step_index(&self, t: f64) -> usize {
        (t / self.dt).round().max(0.0) as usize
    }

    pub fn n_steps(&self) -> usize {
        self.step_index(self.t_end)
    }

    /// Same domain with a different time step and horizon.
    pub fn with_time(&self, dt: f64, t_end: f64) -> Result<Self> {
        let mut g = self.clone();
        g.dt = dt;
        g.t_end = t_end;
        g.validate()?;
        Ok(g)
    }
}
