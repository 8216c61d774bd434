use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KFieldKind {
    /// One draw shared by every cell.
    Constant,
    /// Independent draws per cell.
    White,
    /// Gaussian field with covariance `σ² exp(-|x - x'| / λ)`.
    Exponential,
}

impl KFieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            KFieldKind::Constant => "constant",
            KFieldKind::White => "white",
            KFieldKind::Exponential => "exponential",
        }
    }
}

/// Piecewise-constant reaction rate, one value per `x` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KField {
    pub kind: KFieldKind,
    pub mean: f64,
    pub std: f64,
    pub corr_len: Option<f64>,
    pub x_min: f64,
    pub dx: f64,
    pub node_values: Vec<f64>,
}

impl KField {
    /// Deterministic constant rate on the grid's cells.
    pub fn constant(k: f64, grid: &Grid2D) -> Self {
        Self {
            kind: KFieldKind::Constant,
            mean: k,
            std: 0.0,
            corr_len: None,
            x_min: grid.x_min,
            dx: grid.dx(),
            node_values: vec![k; grid.n_x],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std >= 0.0) {
            return Err(Error::invalid("k field std must be nonnegative"));
        }
        if self.kind == KFieldKind::Exponential && !self.corr_len.is_some_and(|l| l > 0.0) {
            return Err(Error::invalid(
                "exponential k field needs a positive correlation length",
            ));
        }
        if self.node_values.is_empty() || !(self.dx > 0.0) {
            return Err(Error::invalid("k field needs cells of positive width"));
        }
        if self.node_values.iter().any(|k| !k.is_finite()) {
            return Err(Error::invalid("k field values must be finite"));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.node_values.len()
    }

    pub fn cell_center(&self, c: usize) -> f64 {
        self.x_min + (c as f64 + 0.5) * self.dx
    }

    /// Value of the cell containing `x`, extended constantly beyond the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let c = ((x - self.x_min) / self.dx).floor();
        let c = c.clamp(0.0, (self.n_cells() - 1) as f64) as usize;
        self.node_values[c]
    }

    /// Exact `∫_a^b k(s) ds` of the piecewise-constant field (`a ≤ b`).
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let n = self.n_cells();
        let x_hi = self.x_min + n as f64 * self.dx;
        let mut total = 0.0;
        // parts outside the grid use the edge cells
        if a < self.x_min {
            total += self.node_values[0] * (b.min(self.x_min) - a);
        }
        if b > x_hi {
            total += self.node_values[n - 1] * (b - a.max(x_hi));
        }
        let lo = a.max(self.x_min);
        let hi = b.min(x_hi);
        if hi > lo {
            let c0 = (((lo - self.x_min) / self.dx).floor() as usize).min(n - 1);
            let c1 = (((hi - self.x_min) / self.dx).ceil() as usize).clamp(c0 + 1, n);
            for c in c0..c1 {
                let left = self.x_min + c as f64 * self.dx;
                let right = left + self.dx;
                let overlap = hi.min(right) - lo.max(left);
                if overlap > 0.0 {
                    total += self.node_values[c] * overlap;
                }
            }
        }
        total
    }

    pub fn spatial_mean(&self) -> f64 {
        self.node_values.iter().sum::<f64>() / self.n_cells() as f64
    }

    pub fn spatial_std(&self) -> f64 {
        let m = self.spatial_mean();
        let v = self.node_values.iter().map(|k| (k - m).powi(2)).sum::<f64>()
            / self.n_cells() as f64;
        v.sqrt()
    }
}

/// Reusable sampler; for the exponential kind the Cholesky factor of the cell
/// covariance is computed once.
#[derive(Debug, Clone)]
pub struct KFieldSampler {
    kind: KFieldKind,
    mean: f64,
    std: f64,
    corr_len: Option<f64>,
    x_min: f64,
    dx: f64,
    n_cells: usize,
    factor: Option<DMatrix<f64>>,
}

const COVARIANCE_JITTER: f64 = 1e-10;

impl KFieldSampler {
    pub fn new(
        kind: KFieldKind,
        mean: f64,
        std: f64,
        corr_len: Option<f64>,
        grid: &Grid2D,
    ) -> Result<Self> {
        if !(std >= 0.0) || !mean.is_finite() {
            return Err(Error::invalid("k field needs finite mean and std >= 0"));
        }
        let n = grid.n_x;
        let dx = grid.dx();
        let mut factor = None;
        if kind == KFieldKind::Exponential {
            let lambda = corr_len
                .filter(|l| *l > 0.0)
                .ok_or_else(|| Error::invalid("exponential k field needs corr_len > 0"))?;
            if std > 0.0 {
                let cov = DMatrix::from_fn(n, n, |i, j| {
                    let lag = (i as f64 - j as f64).abs() * dx;
                    let jitter = if i == j { COVARIANCE_JITTER } else { 0.0 };
                    std * std * (-lag / lambda).exp() + jitter
                });
                let chol = cov.cholesky().ok_or_else(|| {
                    Error::Numerical("covariance not positive definite after jitter".into())
                })?;
                factor = Some(chol.l());
            }
        }
        Ok(Self {
            kind,
            mean,
            std,
            corr_len,
            x_min: grid.x_min,
            dx,
            n_cells: n,
            factor,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> KField {
        let n = self.n_cells;
        let node_values = if self.std == 0.0 {
            vec![self.mean; n]
        } else {
            match self.kind {
                KFieldKind::Constant => {
                    let z: f64 = rng.sample(StandardNormal);
                    vec![self.mean + self.std * z; n]
                }
                KFieldKind::White => (0..n)
                    .map(|_| self.mean + self.std * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                KFieldKind::Exponential => {
                    let l = self.factor.as_ref().expect("factor computed for std > 0");
                    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    (0..n)
                        .map(|i| {
                            let row: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                            self.mean + row
                        })
                        .collect()
                }
            }
        };
        KField {
            kind: self.kind,
            mean: self.mean,
            std: self.std,
            corr_len: self.corr_len,
            x_min: self.x_min,
            dx: self.dx,
            node_values,
        }
    }
}

/// One realization drawn from stream `TRUTH_FIELD` of `seed`.
pub fn sample_k_field(
    kind: KFieldKind,
    mean: f64,
    std: f64,
    corr_len: Option<f64>,
    grid: &Grid2D,
    seed: u64,
) -> Result<KField> {
    let sampler = KFieldSampler::new(kind, mean, std, corr_len, grid)?;
    let mut r = rng::stream(seed, rng::streams::TRUTH_FIELD);
    Ok(sampler.sample(&mut r))
}

/// Experimental semivariogram `γ(h) = (1/2N(h)) Σ (k_i - k_j)²`, pooled over the
/// realizations. Lags are binned in widths of `bin_width` up to half the domain;
/// each output row is (mean lag of the bin, γ). Empty bins are dropped.
pub fn empirical_semivariogram(fields: &[KField], bin_width: f64) -> Result<Vec<(f64, f64)>> {
    if fields.len() < 2 {
        return Err(Error::invalid("semivariogram needs at least two realizations"));
    }
    if !(bin_width > 0.0) {
        return Err(Error::invalid("bin width must be positive"));
    }
    let n = fields[0].n_cells();
    let dx = fields[0].dx;
    if fields.iter().any(|f| f.n_cells() != n || f.dx != dx) {
        return Err(Error::invalid("realizations live on different grids"));
    }
    let max_lag = 0.5 * n as f64 * dx;
    let n_bins = (max_lag / bin_width).ceil() as usize;
    let mut sum_sq = vec![0.0; n_bins];
    let mut sum_lag = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for m in 1..n {
        let lag = m as f64 * dx;
        if lag > max_lag + 1e-12 {
            break;
        }
        let b = (((lag / bin_width) - 1e-9).ceil() as usize).saturating_sub(1).min(n_bins - 1);
        for f in fields {
            for i in 0..n - m {
                let d = f.node_values[i + m] - f.node_values[i];
                sum_sq[b] += d * d;
            }
        }
        let pairs = (n - m) * fields.len();
        sum_lag[b] += lag * pairs as f64;
        count[b] += pairs;
    }
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| (sum_lag[b] / count[b] as f64, 0.5 * sum_sq[b] / count[b] as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n_x: usize) -> Grid2D {
        Grid2D::new((0.0, 1.0, n_x), (0.0, 1.0, 16), 0.01, 0.6).unwrap()
    }

    #[test]
    fn zero_std_gives_mean() {
        for kind in [KFieldKind::Constant, KFieldKind::White, KFieldKind::Exponential] {
            let f = sample_k_field(kind, 1.5, 0.0, Some(0.2), &grid(50), 3).unwrap();
            assert!(f.node_values.iter().all(|&k| k == 1.5));
        }
    }

    #[test]
    fn constant_kind_shares_one_draw() {
        let f = sample_k_field(KFieldKind::Constant, 2.0, 0.2, None, &grid(50), 9).unwrap();
        assert!(f.node_values.iter().all(|&k| k == f.node_values[0]));
        assert_ne!(f.node_values[0], 2.0);
    }

    #[test]
    fn white_field_moments() {
        let n = 10_000;
        let f = sample_k_field(KFieldKind::White, 4.0, 1.0, None, &grid(n), 11).unwrap();
        let m = f.spatial_mean();
        let s = f.spatial_std();
        let se_mean = 1.0 / (n as f64).sqrt();
        let se_std = 1.0 / (2.0 * n as f64).sqrt();
        assert!((m - 4.0).abs() < 3.0 * se_mean, "mean {m}");
        assert!((s - 1.0).abs() < 3.0 * se_std, "std {s}");
    }

    #[test]
    fn exponential_lag_one_correlation() {
        let g = grid(200);
        let sampler = KFieldSampler::new(KFieldKind::Exponential, 0.0, 1.0, Some(0.3), &g).unwrap();
        let mut r = rng::stream(21, 0);
        let (mut num, mut den) = (0.0, 0.0);
        for _ in 0..200 {
            let f = sampler.sample(&mut r);
            let k = &f.node_values;
            for i in 0..k.len() - 1 {
                num += k[i] * k[i + 1];
            }
            den += k.iter().map(|v| v * v).sum::<f64>() * (k.len() - 1) as f64 / k.len() as f64;
        }
        let rho = num / den;
        let expect = (-g.dx() / 0.3f64).exp();
        assert!((rho - expect).abs() < 0.05, "rho {rho} vs {expect}");
    }

    #[test]
    fn integral_of_piecewise_constant() {
        let g = grid(4);
        let mut f = KField::constant(1.0, &g);
        f.node_values = vec![1.0, 2.0, 3.0, 4.0];
        assert!((f.integral(0.0, 1.0) - 2.5).abs() < 1e-14);
        assert!((f.integral(0.125, 0.375) - (0.125 * 1.0 + 0.125 * 2.0)).abs() < 1e-14);
        assert!((f.integral(0.9, 1.2) - 0.3 * 4.0).abs() < 1e-12);
        assert_eq!(f.integral(0.5, 0.5), 0.0);
        assert_eq!(f.value_at(0.3), 2.0);
    }

    #[test]
    fn semivariogram_shapes() {
        let g = grid(200);
        let mut r = rng::stream(5, 0);
        let constant = KFieldSampler::new(KFieldKind::Constant, 1.0, 0.3, None, &g).unwrap();
        let fields: Vec<KField> = (0..10).map(|_| constant.sample(&mut r)).collect();
        let gam = empirical_semivariogram(&fields, 5.0 * g.dx()).unwrap();
        assert_eq!(gam.len(), 20);
        assert!(gam.iter().all(|(_, v)| *v == 0.0));

        let white = KFieldSampler::new(KFieldKind::White, 1.0, 0.3, None, &g).unwrap();
        let fields: Vec<KField> = (0..100).map(|_| white.sample(&mut r)).collect();
        for (_, v) in empirical_semivariogram(&fields, 5.0 * g.dx()).unwrap() {
            assert!((v / 0.09 - 1.0).abs() < 0.10, "{v}");
        }

        let expo = KFieldSampler::new(KFieldKind::Exponential, 1.0, 0.3, Some(0.1), &g).unwrap();
        let fields: Vec<KField> = (0..100).map(|_| expo.sample(&mut r)).collect();
        for (h, v) in empirical_semivariogram(&fields, 5.0 * g.dx()).unwrap() {
            let model = 0.09 * (1.0 - (-h / 0.1f64).exp());
            assert!((v / model - 1.0).abs() < 0.15, "lag {h}: {v} vs {model}");
        }
        assert!(empirical_semivariogram(&fields[..1], 0.1).is_err());
    }
}
