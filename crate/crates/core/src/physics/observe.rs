use rand_distr::{Distribution, Normal};

use super::{analytic_state, PhysicsConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub x: f64,
    pub t: f64,
    pub d: f64,
    pub sigma_eps: f64,
}

/// Measurements in assimilation order: by time, then by `x`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementSet {
    records: Vec<Measurement>,
}

impl MeasurementSet {
    /// Validates and sorts the records.
    pub fn new(mut records: Vec<Measurement>) -> Result<Self> {
        for (i, m) in records.iter().enumerate() {
            if !(m.sigma_eps > 0.0) || !m.sigma_eps.is_finite() {
                return Err(Error::invalid(format!("record {i}: sigma_eps must be positive")));
            }
            if !(m.x.is_finite() && m.t.is_finite() && m.d.is_finite()) {
                return Err(Error::invalid(format!("record {i}: non-finite entry")));
            }
        }
        records.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.x.total_cmp(&b.x)));
        Ok(Self { records })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[Measurement] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Consecutive runs of records sharing a timestamp.
    pub fn time_groups(&self) -> Vec<&[Measurement]> {
        self.records
            .chunk_by(|a, b| a.t == b.t)
            .collect()
    }

    /// Copy with every `sigma_eps` replaced.
    pub fn with_sigma(&self, sigma_eps: f64) -> Result<Self> {
        Self::new(
            self.records
                .iter()
                .map(|m| Measurement { sigma_eps, ..*m })
                .collect(),
        )
    }
}

/// Every `x` paired with every `t`.
pub fn paired_schedule(xs: &[f64], ts: &[f64]) -> Vec<(f64, f64)> {
    ts.iter()
        .flat_map(|&t| xs.iter().map(move |&x| (x, t)))
        .collect()
}

/// Noisy samples `d = u(x, t) + ε`, `ε ~ N(0, σ_ε²)`, of the model held in `cfg`.
/// The noise comes from stream `OBSERVATION_NOISE` of `noise_seed`; with
/// `sigma_eps = 0` the data are exact and the records carry no usable noise level,
/// so `sigma_eps` is still required to be positive for assimilation.
pub fn generate_observations(
    cfg: &PhysicsConfig,
    locations: &[(f64, f64)],
    sigma_eps: f64,
    noise_seed: u64,
) -> Result<Vec<Measurement>> {
    cfg.validate()?;
    if !(sigma_eps >= 0.0) {
        return Err(Error::invalid("sigma_eps must be nonnegative"));
    }
    let mut r = rng::stream(noise_seed, rng::streams::OBSERVATION_NOISE);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    locations
        .iter()
        .map(|&(x, t)| {
            if !(x >= 0.0 && t >= 0.0) {
                return Err(Error::invalid(format!("location ({x}, {t}) outside the domain")));
            }
            let eps: f64 = noise.sample(&mut r);
            Ok(Measurement {
                x,
                t,
                d: analytic_state(x, t, cfg) + sigma_eps * eps,
                sigma_eps,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;
    use crate::physics::KField;

    fn cfg() -> PhysicsConfig {
        PhysicsConfig::standard(0.391, 0.51, KField::constant(1.0, &Grid2D::standard()))
    }

    #[test]
    fn noiseless_data_are_exact() {
        let locs = paired_schedule(&[0.1, 0.8], &[0.15, 0.3]);
        let obs = generate_observations(&cfg(), &locs, 0.0, 7).unwrap();
        for (m, &(x, t)) in obs.iter().zip(&locs) {
            assert_eq!(m.d, analytic_state(x, t, &cfg()));
        }
        assert_eq!(obs, generate_observations(&cfg(), &locs, 0.0, 8).unwrap());
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let locs = paired_schedule(&[0.1, 0.8], &[0.15, 0.3]);
        let a = generate_observations(&cfg(), &locs, 0.02, 7).unwrap();
        let b = generate_observations(&cfg(), &locs, 0.02, 7).unwrap();
        let c = generate_observations(&cfg(), &locs, 0.02, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn schedule_and_ordering() {
        let ts: Vec<f64> = (0..10).map(|j| 0.15 + 0.05 * j as f64).collect();
        let locs = paired_schedule(&[0.8, 0.1], &ts);
        assert_eq!(locs.len(), 20);
        let set = MeasurementSet::new(generate_observations(&cfg(), &locs, 0.02, 1).unwrap()).unwrap();
        let groups = set.time_groups();
        assert_eq!(groups.len(), 10);
        for g in groups {
            assert_eq!(g.len(), 2);
            assert!(g[0].x < g[1].x);
        }
        assert!(MeasurementSet::new(vec![Measurement { x: 0.1, t: 0.1, d: 0.3, sigma_eps: 0.0 }]).is_err());
    }
}
