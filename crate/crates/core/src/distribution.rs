//! One-point distributions sampled on a state grid, and the distances between them.
//!
//! All quadratures are composite trapezoid rules over the (possibly non-uniform)
//! node array the values live on.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Floor applied to densities before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-12;

const CDF_END_TOL: f64 = 1e-9;
const CDF_MONOTONE_TOL: f64 = 1e-8;
const PDF_MASS_TOL: f64 = 1e-6;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Composite trapezoid rule.
pub fn trapezoid(nodes: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(nodes.len(), values.len());
    nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoid integral, starting from zero at the first node.
pub fn cumulative_trapezoid(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for (x, y) in nodes.windows(2).zip(values.windows(2)) {
        acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
        out.push(acc);
    }
    out
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::invalid("need at least two state nodes"));
    }
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("state nodes must be strictly ascending"));
    }
    Ok(())
}

fn same_nodes(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x != y) {
        return Err(Error::invalid("distributions are defined on different state nodes"));
    }
    Ok(())
}

/// CDF values `F(U_j)` on ascending state nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCdf {
    u_nodes: Vec<f64>,
    values: Vec<f64>,
}

impl DiscreteCdf {
    pub fn new(u_nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let cdf = Self::from_parts_unchecked(u_nodes, values);
        cdf.validate()?;
        Ok(cdf)
    }

    pub(crate) fn from_parts_unchecked(u_nodes: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(u_nodes.len(), values.len());
        Self { u_nodes, values }
    }

    /// Checks the CDF invariants: pinned endpoints, bounded and nondecreasing values.
    pub fn validate(&self) -> Result<()> {
        check_nodes(&self.u_nodes)?;
        if self.u_nodes.len() != self.values.len() {
            return Err(Error::invalid("node and value arrays differ in length"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("CDF values must be finite"));
        }
        let first = self.values[0];
        let last = *self.values.last().unwrap();
        if first.abs() > CDF_END_TOL || (last - 1.0).abs() > CDF_END_TOL {
            return Err(Error::invalid(format!(
                "CDF endpoints must be 0 and 1, got {first} and {last}"
            )));
        }
        if self
            .values
            .iter()
            .any(|&v| !(-CDF_END_TOL..=1.0 + CDF_END_TOL).contains(&v))
        {
            return Err(Error::invalid("CDF values outside [0, 1]"));
        }
        let worst = self.min_increment();
        if worst < -CDF_MONOTONE_TOL {
            return Err(Error::invalid(format!(
                "CDF decreases by {} between adjacent nodes",
                -worst
            )));
        }
        Ok(())
    }

    /// Heaviside step `H(U - at)` sampled on the nodes (1 at and above the jump).
    pub fn step(u_nodes: Vec<f64>, at: f64) -> Result<Self> {
        check_nodes(&u_nodes)?;
        let n = u_nodes.len();
        let mut values: Vec<f64> = u_nodes
            .iter()
            .map(|&u| if u >= at { 1.0 } else { 0.0 })
            .collect();
        values[0] = 0.0;
        values[n - 1] = 1.0;
        Ok(Self { u_nodes, values })
    }

    pub fn u_nodes(&self) -> &[f64] {
        &self.u_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest forward difference `F(U_{j+1}) - F(U_j)`.
    pub fn min_increment(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation of the state value where `F` first reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.values.len();
        for j in 1..n {
            if self.values[j] >= p {
                let (f0, f1) = (self.values[j - 1], self.values[j]);
                let (u0, u1) = (self.u_nodes[j - 1], self.u_nodes[j]);
                if f1 - f0 <= 0.0 {
                    return u1;
                }
                return u0 + (p - f0) / (f1 - f0) * (u1 - u0);
            }
        }
        self.u_nodes[n - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Mean of the distribution, `U_last - ∫ F dU`.
    pub fn mean(&self) -> f64 {
        let hi = *self.u_nodes.last().unwrap();
        hi - trapezoid(&self.u_nodes, &self.values)
    }

    pub fn sup_distance(&self, other: &DiscreteCdf) -> Result<f64> {
        same_nodes(&self.u_nodes, &other.u_nodes)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Nonnegative density values on ascending state nodes with unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdf {
    u_nodes: Vec<f64>,
    densities: Vec<f64>,
}

impl DiscretePdf {
    pub fn new(u_nodes: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        check_nodes(&u_nodes)?;
        if u_nodes.len() != densities.len() {
            return Err(Error::invalid("node and density arrays differ in length"));
        }
        if densities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("densities must be finite and nonnegative"));
        }
        let mass = trapezoid(&u_nodes, &densities);
        if (mass - 1.0).abs() > PDF_MASS_TOL {
            return Err(Error::invalid(format!("density integrates to {mass}, not 1")));
        }
        Ok(Self { u_nodes, densities })
    }

    /// Normalizes arbitrary nonnegative weights to unit trapezoid mass.
    pub fn normalized(u_nodes: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        check_nodes(&u_nodes)?;
        if weights.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let mass = trapezoid(&u_nodes, &weights);
        if !(mass > 0.0) {
            return Err(Error::Degenerate("density has zero total mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= mass);
        Ok(Self {
            u_nodes,
            densities: weights,
        })
    }

    pub fn u_nodes(&self) -> &[f64] {
        &self.u_nodes
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.u_nodes, &self.densities)
    }

    pub fn mean(&self) -> f64 {
        let m: Vec<f64> = self
            .u_nodes
            .iter()
            .zip(&self.densities)
            .map(|(u, f)| u * f)
            .collect();
        trapezoid(&self.u_nodes, &m)
    }

    pub fn std(&self) -> f64 {
        let mu = self.mean();
        let v: Vec<f64> = self
            .u_nodes
            .iter()
            .zip(&self.densities)
            .map(|(u, f)| (u - mu).powi(2) * f)
            .collect();
        trapezoid(&self.u_nodes, &v).max(0.0).sqrt()
    }

    /// Node with the largest density.
    pub fn mode(&self) -> f64 {
        let (idx, _) = self
            .densities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            });
        self.u_nodes[idx]
    }
}

/// Normal distribution `N(mean, std²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDist {
    pub mean: f64,
    pub std: f64,
}

impl GaussianDist {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std > 0.0) || !std.is_finite() {
            return Err(Error::invalid(format!(
                "Gaussian needs finite mean and positive std, got ({mean}, {std})"
            )));
        }
        Ok(Self { mean, std })
    }

    pub fn pdf(&self, u: f64) -> f64 {
        normal_pdf((u - self.mean) / self.std) / self.std
    }

    pub fn cdf(&self, u: f64) -> f64 {
        normal_cdf((u - self.mean) / self.std)
    }

    pub fn ln_pdf(&self, u: f64) -> f64 {
        let z = (u - self.mean) / self.std;
        -0.5 * z * z - self.std.ln() - 0.5 * (2.0 * PI).ln()
    }

    /// CDF sampled on the nodes with the endpoints clamped to 0 and 1.
    pub fn discretize_cdf(&self, u_nodes: Vec<f64>) -> Result<DiscreteCdf> {
        check_nodes(&u_nodes)?;
        let n = u_nodes.len();
        let mut values: Vec<f64> = u_nodes.iter().map(|&u| self.cdf(u)).collect();
        values[0] = 0.0;
        values[n - 1] = 1.0;
        Ok(DiscreteCdf { u_nodes, values })
    }

    /// Density sampled on the nodes, renormalized to unit trapezoid mass.
    pub fn discretize_pdf(&self, u_nodes: Vec<f64>) -> Result<DiscretePdf> {
        let w = u_nodes.iter().map(|&u| self.pdf(u)).collect();
        DiscretePdf::normalized(u_nodes, w)
    }
}

/// Cramér distance `(∫ (F_a - F_b)² dU)^{1/2}`.
pub fn cramer_distance(a: &DiscreteCdf, b: &DiscreteCdf) -> Result<f64> {
    same_nodes(&a.u_nodes, &b.u_nodes)?;
    let sq: Vec<f64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .collect();
    Ok(trapezoid(&a.u_nodes, &sq).max(0.0).sqrt())
}

/// `D_KL(p ‖ q) = ∫ p ln(p/q) dU` with both densities floored at [`DENSITY_FLOOR`].
pub fn kl_divergence(p: &DiscretePdf, q: &DiscretePdf) -> Result<f64> {
    same_nodes(&p.u_nodes, &q.u_nodes)?;
    let integrand: Vec<f64> = p
        .densities
        .iter()
        .zip(&q.densities)
        .map(|(&pi, &qi)| {
            let pf = pi.max(DENSITY_FLOOR);
            let qf = qi.max(DENSITY_FLOOR);
            pf * (pf / qf).ln()
        })
        .collect();
    Ok(trapezoid(&p.u_nodes, &integrand))
}

/// Density by finite differences of a CDF: central in the interior, one-sided at
/// the ends, negative values clipped, then renormalized.
pub fn pdf_from_cdf(c: &DiscreteCdf) -> DiscretePdf {
    let u = &c.u_nodes;
    let f = &c.values;
    let n = u.len();
    let mut d = vec![0.0; n];
    d[0] = (f[1] - f[0]) / (u[1] - u[0]);
    d[n - 1] = (f[n - 1] - f[n - 2]) / (u[n - 1] - u[n - 2]);
    for j in 1..n - 1 {
        d[j] = (f[j + 1] - f[j - 1]) / (u[j + 1] - u[j - 1]);
    }
    d.iter_mut().for_each(|v| *v = v.max(0.0));
    // A valid CDF rises from 0 to 1, so at least one difference is positive.
    DiscretePdf::normalized(u.clone(), d).expect("valid CDF has positive increments")
}

/// Cumulative trapezoid integral of a density, rescaled to end exactly at 1.
pub fn cdf_from_pdf(p: &DiscretePdf) -> Result<DiscreteCdf> {
    let mut c = cumulative_trapezoid(&p.u_nodes, &p.densities);
    let total = *c.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::Degenerate("density has zero total mass".into()));
    }
    c.iter_mut().for_each(|v| *v /= total);
    *c.last_mut().unwrap() = 1.0;
    Ok(DiscreteCdf {
        u_nodes: p.u_nodes.clone(),
        values: c,
    })
}

fn sample_mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Gaussian kernel density estimate with Scott's bandwidth `h = s n^{-1/5}`.
pub fn kde_gaussian(samples: &[f64], u_nodes: &[f64]) -> Result<DiscretePdf> {
    check_nodes(u_nodes)?;
    if samples.len() < 2 {
        return Err(Error::invalid("KDE needs at least two samples"));
    }
    let (_, std) = sample_mean_std(samples);
    let h = std * (samples.len() as f64).powf(-0.2);
    if !(h > 0.0) {
        return Err(Error::Degenerate(
            "all samples identical, Scott bandwidth is zero".into(),
        ));
    }
    let w: Vec<f64> = u_nodes
        .iter()
        .map(|&u| samples.iter().map(|&s| normal_pdf((u - s) / h)).sum::<f64>())
        .collect();
    DiscretePdf::normalized(u_nodes.to_vec(), w)
}

/// Fraction of samples `≤ U` at each node, endpoints pinned to 0 and 1.
pub fn empirical_cdf(samples: &[f64], u_nodes: &[f64]) -> Result<DiscreteCdf> {
    check_nodes(u_nodes)?;
    if samples.is_empty() {
        return Err(Error::invalid("empirical CDF needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut values: Vec<f64> = u_nodes
        .iter()
        .map(|&u| sorted.partition_point(|&s| s <= u) as f64 / n)
        .collect();
    let last = values.len() - 1;
    values[0] = 0.0;
    values[last] = 1.0;
    Ok(DiscreteCdf {
        u_nodes: u_nodes.to_vec(),
        values,
    })
}
