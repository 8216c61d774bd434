use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::physics::{solve_physical_fv, KFieldKind, KFieldSampler, Measurement, PhysicsConfig};
use crate::rng;

const INNOVATION_JITTER: f64 = 1e-10;

/// Realizations of the discretized rate field, one row per member.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<Vec<f64>>,
}

impl Ensemble {
    pub fn new(members: Vec<Vec<f64>>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::invalid("an ensemble needs at least two members"));
        }
        let n = members[0].len();
        if members.iter().any(|m| m.len() != n || m.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("members must be finite and of equal length"));
        }
        Ok(Self { members })
    }

    pub fn n_ens(&self) -> usize {
        self.members.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.members[0].len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_ens() as f64;
        (0..self.n_nodes())
            .map(|i| self.members.iter().map(|m| m[i]).sum::<f64>() / n)
            .collect()
    }

    /// Per-node sample standard deviation.
    pub fn std(&self) -> Vec<f64> {
        let mean = self.mean();
        let n = self.n_ens() as f64;
        (0..self.n_nodes())
            .map(|i| {
                let ss: f64 = self.members.iter().map(|m| (m[i] - mean[i]).powi(2)).sum();
                (ss / (n - 1.0)).sqrt()
            })
            .collect()
    }
}

/// Perturbed-observation update of the augmented state `z = [x; y]` where `y` are
/// the members' predicted observations: `z ← z + C_zy (C_yy + R)⁻¹ (d + η - y)` with
/// `η ~ N(0, R)` per member and sample covariances. Returns whether the innovation
/// covariance needed jitter.
pub fn enkf_update<R: Rng + ?Sized>(
    states: &mut [Vec<f64>],
    predicted: &[Vec<f64>],
    data: &[f64],
    sigma_eps: &[f64],
    rng: &mut R,
) -> Result<bool> {
    let n_ens = states.len();
    if n_ens < 2 || predicted.len() != n_ens {
        return Err(Error::invalid("need matching state and prediction ensembles"));
    }
    let n_obs = data.len();
    if sigma_eps.len() != n_obs || predicted.iter().any(|p| p.len() != n_obs) {
        return Err(Error::invalid("observation dimensions disagree"));
    }
    let n_x = states[0].len();
    let n_z = n_x + n_obs;
    let z = DMatrix::from_fn(n_z, n_ens, |r, c| {
        if r < n_x { states[c][r] } else { predicted[c][r - n_x] }
    });
    let mean = z.column_mean();
    let mut a = z.clone();
    for mut col in a.column_iter_mut() {
        col -= &mean;
    }
    let ay = a.rows(n_x, n_obs).into_owned();
    let scale = 1.0 / (n_ens as f64 - 1.0);
    let c_zy = &a * ay.transpose() * scale;
    let mut s = &ay * ay.transpose() * scale;
    for (i, se) in sigma_eps.iter().enumerate() {
        s[(i, i)] += se * se;
    }
    let scale_s = (0..n_obs).map(|i| s[(i, i)]).fold(0.0, f64::max);
    let well_posed = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        c.l_dirty().diagonal().iter().all(|l| l * l > 1e-12 * scale_s)
    };
    let (chol, jittered) = match s.clone().cholesky().filter(well_posed) {
        Some(c) => (c, false),
        None => {
            for i in 0..n_obs {
                s[(i, i)] += INNOVATION_JITTER;
            }
            let c = s
                .cholesky()
                .ok_or_else(|| Error::Numerical("innovation covariance singular".into()))?;
            (c, true)
        }
    };
    let d = DVector::from_column_slice(data);
    for (c, state) in states.iter_mut().enumerate() {
        let eta = DVector::from_fn(n_obs, |i, _| sigma_eps[i] * rng.sample::<f64, _>(StandardNormal));
        let innov = &d + eta - z.column(c).rows(n_x, n_obs);
        let gain = chol.solve(&innov);
        let dz = &c_zy * gain;
        for (v, dv) in state.iter_mut().zip(dz.rows(0, n_x).iter()) {
            *v += dv;
        }
    }
    if states.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite ensemble after update".into()));
    }
    Ok(jittered)
}

/// Gaussian prior of the rate field: white when `corr_len` is `None`, exponential
/// covariance otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnkfPrior {
    pub mean: f64,
    pub std: f64,
    pub corr_len: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnkfStep {
    pub t: f64,
    pub n_obs: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnkfResult {
    pub prior: Ensemble,
    pub steps: Vec<EnkfStep>,
    pub posterior: Ensemble,
    pub warnings: Vec<String>,
}

/// Recursive EnKF estimate of the rate field. Members come from stream
/// `ENSEMBLE_INIT` of `seed`; at each distinct measurement time every member is
/// re-solved from `t = 0` with its current field (explicit upwind at unit Courant
/// number) and the simultaneous data are assimilated in one batch.
pub fn enkf_assimilate(
    measurements: &[Measurement],
    prior: EnkfPrior,
    grid: &Grid2D,
    cfg: &PhysicsConfig,
    n_ens: usize,
    seed: u64,
) -> Result<EnkfResult> {
    if n_ens < 2 {
        return Err(Error::invalid("n_ens must be at least 2"));
    }
    let kind = if prior.corr_len.is_some() { KFieldKind::Exponential } else { KFieldKind::White };
    let sampler = KFieldSampler::new(kind, prior.mean, prior.std, prior.corr_len, grid)?;
    let mut init = rng::stream(seed, rng::streams::ENSEMBLE_INIT);
    let template = sampler.sample(&mut init);
    let mut states: Vec<Vec<f64>> = std::iter::once(template.node_values.clone())
        .chain((1..n_ens).map(|_| sampler.sample(&mut init).node_values))
        .collect();
    let prior_ens = Ensemble::new(states.clone())?;
    let mut perturb = rng::stream(seed, rng::streams::ENSEMBLE_PERTURB);

    let mut sorted = measurements.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.x.total_cmp(&b.x)));
    let mut steps = Vec::new();
    let mut warnings = Vec::new();
    let mut member_cfg = cfg.clone();
    member_cfg.k_field = template;
    for group in sorted.chunk_by(|a, b| a.t == b.t) {
        let t = group[0].t;
        let predicted = states
            .iter()
            .map(|k| {
                member_cfg.k_field.node_values.clone_from(k);
                let sol = solve_physical_fv(&member_cfg, &[t], grid.dx() / cfg.v)?;
                Ok(group.iter().map(|m| sol.at(0, m.x)).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let data: Vec<f64> = group.iter().map(|m| m.d).collect();
        let sig: Vec<f64> = group.iter().map(|m| m.sigma_eps).collect();
        if enkf_update(&mut states, &predicted, &data, &sig, &mut perturb)? {
            warnings.push(format!("innovation covariance jittered at t = {t}"));
        }
        let ens = Ensemble::new(states.clone())?;
        steps.push(EnkfStep { t, n_obs: group.len(), mean: ens.mean(), std: ens.std() });
    }
    Ok(EnkfResult {
        prior: prior_ens,
        steps,
        posterior: Ensemble::new(states)?,
        warnings,
    })
}
