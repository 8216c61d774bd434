use super::{closure_coefficients, initial_boundary_cdfs, ClosureSpec, StatParams};
use crate::distribution::DiscreteCdf;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::physics::PhysicsConfig;

const MONOTONE_TOL: f64 = 1e-8;
const WARN_TOL: f64 = 1e-6;
const BOUNDARY_TOL: f64 = 1e-9;

/// Which time levels a solve keeps.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SnapshotPolicy {
    #[default]
    EveryStep,
    FinalOnly,
    /// Step indices `n` (time `n Δt`); indices past the final step are ignored.
    Steps(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FvOptions {
    /// Final time; the grid's `t_end` when unset.
    pub t_end: Option<f64>,
    /// Solve only the `x` nodes up to the one nearest this value. Upwinding in `x`
    /// makes the kept nodes identical to those of the full solve.
    pub x_limit: Option<f64>,
    pub snapshots: SnapshotPolicy,
}

impl FvOptions {
    /// Just the final slice at `(x, t)`.
    pub fn probe(x: f64, t: f64) -> Self {
        Self {
            t_end: Some(t),
            x_limit: Some(x),
            snapshots: SnapshotPolicy::FinalOnly,
        }
    }
}

/// CDF values on `x` nodes `0..n_x_kept` by state nodes, row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfField {
    pub n_x_kept: usize,
    pub n_u_nodes: usize,
    pub values: Vec<f64>,
}

impl CdfField {
    pub fn slice(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_u_nodes..(i + 1) * self.n_u_nodes]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvDiagnostics {
    /// Smallest forward difference `F_{j+1} - F_j` over every slice of every step.
    pub min_increment: f64,
    /// Largest deviation of a boundary value from 0 or 1.
    pub max_boundary_error: f64,
    pub warnings: Vec<String>,
}

impl Default for FvDiagnostics {
    fn default() -> Self {
        Self {
            min_increment: f64::INFINITY,
            max_boundary_error: 0.0,
            warnings: Vec::new(),
        }
    }
}

impl FvDiagnostics {
    /// Diagnostics of a single slice.
    pub fn of_slice(c: &DiscreteCdf) -> Self {
        let v = c.values();
        Self {
            min_increment: c.min_increment(),
            max_boundary_error: v[0].abs().max((v[v.len() - 1] - 1.0).abs()),
            warnings: Vec::new(),
        }
    }

    /// Worst case of both; warnings are concatenated without repeats.
    pub fn merge(&mut self, other: &FvDiagnostics) {
        self.min_increment = self.min_increment.min(other.min_increment);
        self.max_boundary_error = self.max_boundary_error.max(other.max_boundary_error);
        for w in &other.warnings {
            if !self.warnings.contains(w) {
                self.warnings.push(w.clone());
            }
        }
    }

    pub fn monotone(&self) -> bool {
        self.min_increment >= -MONOTONE_TOL
    }

    /// Monotone with exact boundary values.
    pub fn valid(&self) -> bool {
        self.monotone() && self.max_boundary_error <= BOUNDARY_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSolution {
    pub grid: Grid2D,
    pub u_nodes: Vec<f64>,
    /// Step index of each snapshot.
    pub steps: Vec<usize>,
    pub snapshots: Vec<CdfField>,
    pub diagnostics: FvDiagnostics,
}

impl CdfSolution {
    pub fn time(&self, s: usize) -> f64 {
        self.steps[s] as f64 * self.grid.dt
    }

    pub fn n_x_kept(&self) -> usize {
        self.snapshots.first().map_or(0, |f| f.n_x_kept)
    }

    /// Slice at the nearest kept `x` node of the stored snapshot nearest to `t`.
    pub fn slice_at(&self, x: f64, t: f64) -> Result<DiscreteCdf> {
        let i = self.grid.x_index(x);
        if i >= self.n_x_kept() {
            return Err(Error::invalid(format!("x = {x} beyond the solved range")));
        }
        let n = self.grid.step_index(t);
        let s = (0..self.steps.len())
            .min_by_key(|&s| self.steps[s].abs_diff(n))
            .ok_or_else(|| Error::invalid("solution holds no snapshots"))?;
        self.slice(s, i)
    }

    pub fn slice(&self, s: usize, i: usize) -> Result<DiscreteCdf> {
        Ok(DiscreteCdf::from_parts_unchecked(
            self.u_nodes.clone(),
            self.snapshots[s].slice(i).to_vec(),
        ))
    }

    pub fn final_field(&self) -> &CdfField {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Factorized interior system of one `x` node: backward Euler in time, implicit
/// upwinding in `x` and `U`, centred diffusion in `U`.
struct Column {
    tri: Tridiagonal,
    /// Weight of the `U = u_max` row in the last interior equation.
    top: f64,
}

/// Coefficients depend on `(x, t)` only through the memory-time cap `min(t, x/v)`,
/// which is passed as `t` with `x = ∞`.
fn column(spec: &ClosureSpec, phi: &StatParams, cap: f64, grid: &Grid2D, v: f64) -> Result<Column> {
    let du = grid.du();
    let coeffs = |u: f64| closure_coefficients(spec, phi, f64::INFINITY, cap, u, grid.u_max, v);
    let d_face: Vec<f64> = (0..grid.n_u)
        .map(|j| coeffs(grid.u_min + (j as f64 + 0.5) * du).d22)
        .collect();
    let m = grid.n_u - 1;
    let (mut sub, mut diag, mut sup) = (Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m));
    for k in 0..m {
        let j = k + 1;
        let q2 = coeffs(grid.u_node(j)).q2;
        let a = q2.max(0.0) / du + d_face[j - 1] / (du * du);
        let c = (-q2).max(0.0) / du + d_face[j] / (du * du);
        sub.push(-a);
        sup.push(-c);
        diag.push(1.0 / grid.dt + v / grid.dx() + a + c);
    }
    let top = sup[m - 1];
    Ok(Column { tri: Tridiagonal::factor(sub, &diag, &sup)?, top })
}

/// Backward-Euler finite-volume solve of the CDF equation from `t = 0`.
///
/// Advection is upwinded in both `x` (speed `v > 0`) and `U` (by the sign of `q2`
/// at the node); diffusion in `U` is centred with `d22` at the cell faces. All
/// coefficients are taken at the new time level. Because the `x` upwinding only
/// couples node `i` to `i - 1`, each step is a sweep in `x` with one tridiagonal
/// solve in `U` per node. Rows `U = u_min` and `U = u_max` hold 0 and 1, the
/// first `x` node holds the inflow CDF.
pub fn solve_cdf_fv(
    spec: &ClosureSpec,
    phi: &StatParams,
    cfg: &PhysicsConfig,
    grid: &Grid2D,
    opts: &FvOptions,
) -> Result<CdfSolution> {
    grid.validate()?;
    spec.validate(phi)?;
    cfg.validate()?;
    let t_end = opts.t_end.unwrap_or(grid.t_end);
    if !(t_end >= 0.0) {
        return Err(Error::invalid("t_end must be nonnegative"));
    }
    let inputs = initial_boundary_cdfs(phi, !phi.has_random_inputs(), cfg)?;
    let n_steps = grid.step_index(t_end);
    let n_keep = opts.x_limit.map_or(grid.n_x, |x| grid.x_index(x)) + 1;
    let nu = grid.n_u + 1;
    let u_nodes = grid.u_nodes();
    let (dt, dx, v) = (grid.dt, grid.dx(), cfg.v);

    let mut f = Vec::with_capacity(n_keep * nu);
    f.extend(inputs.fb_on(&u_nodes, 0.0));
    let f0 = inputs.f0_on(&u_nodes);
    for _ in 1..n_keep {
        f.extend_from_slice(&f0);
    }

    let keep = |n: usize| match &opts.snapshots {
        SnapshotPolicy::EveryStep => true,
        SnapshotPolicy::FinalOnly => n == n_steps,
        SnapshotPolicy::Steps(list) => list.contains(&n),
    };
    let mut diag = FvDiagnostics::default();
    check(&f, nu, &mut diag)?;
    let mut steps = Vec::new();
    let mut snapshots = Vec::new();
    let store = |n: usize, f: &[f64], steps: &mut Vec<usize>, snaps: &mut Vec<CdfField>| {
        if keep(n) {
            steps.push(n);
            snaps.push(CdfField {
                n_x_kept: n_keep,
                n_u_nodes: nu,
                values: f.to_vec(),
            });
        }
    };
    store(0, &f, &mut steps, &mut snapshots);

    let m = grid.n_u - 1;
    let mut rhs = vec![0.0; m];
    let mut near: Vec<Option<Column>> = (0..n_keep).map(|_| None).collect();
    for n in 1..=n_steps {
        let t = n as f64 * dt;
        f[..nu].copy_from_slice(&inputs.fb_on(&u_nodes, t));
        check_row(&f[..nu], &mut diag)?;
        // nodes with x ≥ vt all see the same memory time, hence the same column
        let far = column(spec, phi, t, grid, v)?;
        for i in 1..n_keep {
            let x = grid.x_node(i);
            let tau = x / v;
            let col = if x < v * t && t.min(tau) == tau {
                if near[i].is_none() {
                    near[i] = Some(column(spec, phi, tau, grid, v)?);
                }
                near[i].as_ref().expect("filled above")
            } else {
                &far
            };
            let (prev, cur) = f.split_at_mut(i * nu);
            let up = &prev[(i - 1) * nu..];
            let row = &mut cur[..nu];
            for k in 0..m {
                rhs[k] = row[k + 1] / dt + v / dx * up[k + 1];
            }
            // F = 0 at u_min adds nothing; F = 1 at u_max moves to the right side
            rhs[m - 1] -= col.top;
            col.tri.solve(&mut rhs);
            row[1..=m].copy_from_slice(&rhs);
            row[0] = 0.0;
            row[nu - 1] = 1.0;
            check_row(row, &mut diag)?;
        }
        store(n, &f, &mut steps, &mut snapshots);
    }
    if diag.min_increment < -WARN_TOL {
        diag.warnings.push(format!(
            "monotonicity violated: smallest increment {:.3e}",
            diag.min_increment
        ));
    }
    Ok(CdfSolution {
        grid: grid.clone(),
        u_nodes,
        steps,
        snapshots,
        diagnostics: diag,
    })
}

fn check(f: &[f64], nu: usize, diag: &mut FvDiagnostics) -> Result<()> {
    f.chunks(nu).try_for_each(|s| check_row(s, diag))
}

fn check_row(s: &[f64], diag: &mut FvDiagnostics) -> Result<()> {
    let nu = s.len();
    diag.max_boundary_error = diag
        .max_boundary_error
        .max(s[0].abs())
        .max((s[nu - 1] - 1.0).abs());
    let mut lowest = f64::INFINITY;
    for w in s.windows(2) {
        lowest = lowest.min(w[1] - w[0]);
    }
    if !lowest.is_finite() || s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite CDF values".into()));
    }
    diag.min_increment = diag.min_increment.min(lowest);
    Ok(())
}

/// LU factors of a tridiagonal matrix (Thomas algorithm without pivoting).
struct Tridiagonal {
    sub: Vec<f64>,
    /// Normalized super-diagonal `c_k / β_k`.
    upper: Vec<f64>,
    inv_beta: Vec<f64>,
}

impl Tridiagonal {
    fn factor(sub: Vec<f64>, diag: &[f64], sup: &[f64]) -> Result<Self> {
        let m = diag.len();
        let mut upper = vec![0.0; m];
        let mut inv_beta = vec![0.0; m];
        let mut beta = diag[0];
        for k in 0..m {
            if k > 0 {
                beta = diag[k] - sub[k] * upper[k - 1];
            }
            if beta == 0.0 || !beta.is_finite() {
                return Err(Error::Numerical("singular tridiagonal system".into()));
            }
            inv_beta[k] = 1.0 / beta;
            upper[k] = sup[k] * inv_beta[k];
        }
        Ok(Self { sub, upper, inv_beta })
    }

    /// Overwrites `rhs` with the solution.
    fn solve(&self, rhs: &mut [f64]) {
        let m = rhs.len();
        rhs[0] *= self.inv_beta[0];
        for k in 1..m {
            rhs[k] = (rhs[k] - self.sub[k] * rhs[k - 1]) * self.inv_beta[k];
        }
        for k in (0..m - 1).rev() {
            rhs[k] -= self.upper[k] * rhs[k + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::cramer_distance;
    use crate::mdist::{solve_cdf_characteristics, ClosureFamily};
    use crate::physics::KField;

    fn cfg(k: f64) -> PhysicsConfig {
        PhysicsConfig::standard(0.4, 0.5, KField::constant(k, &Grid2D::standard()))
    }

    #[test]
    fn thomas_solves_small_system() {
        let sub = [0.0, -1.0, -1.0];
        let diag = [2.0, 2.0, 2.0];
        let sup = [-1.0, -1.0, 0.0];
        let mut rhs = [1.0, 0.0, 1.0];
        Tridiagonal::factor(sub.to_vec(), &diag, &sup).unwrap().solve(&mut rhs);
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    fn worst_sup(grid: &Grid2D, phi: &StatParams, probes: &[(f64, f64)]) -> f64 {
        let spec = ClosureSpec::new(ClosureFamily::ExactDeterministicK);
        let c = cfg(1.0);
        let sol = solve_cdf_fv(&spec, phi, &c, grid, &FvOptions::default()).unwrap();
        assert!(sol.diagnostics.valid());
        probes
            .iter()
            .map(|&(x, t)| {
                let fv = sol.slice_at(x, t).unwrap();
                let ex = solve_cdf_characteristics(1.0, phi, &c, x, t, &sol.u_nodes).unwrap();
                fv.sup_distance(&ex).unwrap()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn exact_closure_matches_characteristics() {
        let grid = Grid2D::standard();
        let phi = StatParams::gaussian_inputs(1.0, 0.4, 0.1, 0.5, 0.1);
        let spec = ClosureSpec::new(ClosureFamily::ExactDeterministicK);
        let sol = solve_cdf_fv(&spec, &phi, &cfg(1.0), &grid, &FvOptions::default()).unwrap();
        let fv = sol.slice_at(0.5, 0.2).unwrap();
        let ex = solve_cdf_characteristics(1.0, &phi, &cfg(1.0), 0.5, 0.2, &sol.u_nodes).unwrap();
        assert!(cramer_distance(&fv, &ex).unwrap() <= 0.02);
        assert!(fv.sup_distance(&ex).unwrap() <= 2.0 * (grid.dx() + grid.du()));
    }

    #[test]
    fn exact_closure_error_is_first_order() {
        let phi = StatParams::gaussian_inputs(1.0, 0.4, 0.1, 0.5, 0.1);
        let probes = [(0.5, 0.2), (0.9, 0.6), (0.1, 0.6), (0.3, 0.3), (1.0, 0.3)];
        let coarse = Grid2D::new((0.0, 1.0, 100), (0.0, 1.0, 64), 0.02, 0.6).unwrap();
        let fine = Grid2D::new((0.0, 1.0, 400), (0.0, 1.0, 256), 0.005, 0.6).unwrap();
        let e_coarse = worst_sup(&coarse, &phi, &probes);
        let e_mid = worst_sup(&Grid2D::standard(), &phi, &probes);
        let e_fine = worst_sup(&fine, &phi, &probes);
        assert!(e_coarse / e_mid > 1.5 && e_mid / e_fine > 1.5, "{e_coarse} {e_mid} {e_fine}");
    }

    #[test]
    fn truncation_is_bitwise() {
        let grid = Grid2D::standard();
        let phi = StatParams::k_only(2.0, 0.2, None);
        let spec = ClosureSpec::new(ClosureFamily::RandomConstantK);
        let full = solve_cdf_fv(&spec, &phi, &cfg(2.0), &grid, &FvOptions::default()).unwrap();
        let part = solve_cdf_fv(&spec, &phi, &cfg(2.0), &grid, &FvOptions::probe(0.1, 0.3)).unwrap();
        assert_eq!(part.steps, vec![30]);
        let a = full.slice_at(0.1, 0.3).unwrap();
        let b = part.slice_at(0.1, 0.3).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(part.slice_at(0.5, 0.3).is_err());
    }

    #[test]
    fn zero_variance_matches_exact_closure() {
        let grid = Grid2D::standard();
        let exact = solve_cdf_fv(
            &ClosureSpec::new(ClosureFamily::ExactDeterministicK),
            &StatParams::k_only(2.0, 0.0, None),
            &cfg(2.0),
            &grid,
            &FvOptions::default(),
        )
        .unwrap();
        for fam in [ClosureFamily::RandomConstantK, ClosureFamily::WhiteNoiseK, ClosureFamily::ExponentialK] {
            let sol = solve_cdf_fv(
                &ClosureSpec::new(fam),
                &StatParams::k_only(2.0, 0.0, Some(0.2)),
                &cfg(2.0),
                &grid,
                &FvOptions::default(),
            )
            .unwrap();
            assert_eq!(sol.snapshots, exact.snapshots);
        }
    }

    #[test]
    fn random_closures_keep_cdf_invariants() {
        let grid = Grid2D::standard();
        for (fam, phi) in [
            (ClosureFamily::RandomConstantK, StatParams::k_only(2.0, 0.2, None)),
            (ClosureFamily::WhiteNoiseK, StatParams::k_only(4.0, 1.0, None)),
            (ClosureFamily::ExponentialK, StatParams::k_only(2.0, 0.2, Some(0.2))),
        ] {
            let sol = solve_cdf_fv(&ClosureSpec::new(fam), &phi, &cfg(2.0), &grid, &FvOptions::default()).unwrap();
            assert!(sol.diagnostics.valid(), "{:?}", sol.diagnostics);
            assert!(sol.diagnostics.warnings.is_empty());
            for s in 0..sol.steps.len() {
                for i in 0..=grid.n_x {
                    sol.slice(s, i).unwrap().validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn median_decays_along_characteristics() {
        let grid = Grid2D::standard();
        let phi = StatParams::gaussian_inputs(1.0, 0.4, 0.05, 0.5, 0.05);
        let sol = solve_cdf_fv(
            &ClosureSpec::new(ClosureFamily::ExactDeterministicK),
            &phi,
            &cfg(1.0),
            &grid,
            &FvOptions::default(),
        )
        .unwrap();
        for &t in &[0.1, 0.3, 0.5] {
            let med = sol.slice_at(0.9, t).unwrap().median();
            assert!((med - 0.4 * (-t as f64).exp()).abs() <= grid.du(), "t = {t}: {med}");
        }
    }
}
