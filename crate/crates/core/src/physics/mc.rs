use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, Uniform};

use crate::error::{Error, Result};
use crate::rng;

/// Distribution families for a spatially constant random rate with prescribed
/// mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantKFamily {
    Normal,
    LogNormal,
    Uniform,
}

impl ConstantKFamily {
    pub const ALL: [ConstantKFamily; 3] = [
        ConstantKFamily::Normal,
        ConstantKFamily::LogNormal,
        ConstantKFamily::Uniform,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConstantKFamily::Normal => "normal",
            ConstantKFamily::LogNormal => "lognormal",
            ConstantKFamily::Uniform => "uniform",
        }
    }

    fn stream_id(&self) -> u64 {
        match self {
            ConstantKFamily::Normal => rng::streams::MC_NORMAL,
            ConstantKFamily::LogNormal => rng::streams::MC_LOGNORMAL,
            ConstantKFamily::Uniform => rng::streams::MC_UNIFORM,
        }
    }

    /// Parameters `(m, s)` of `ln k ~ N(m, s²)` giving mean `mean` and std `std`.
    pub fn lognormal_params(mean: f64, std: f64) -> (f64, f64) {
        let s2 = (1.0 + (std / mean).powi(2)).ln();
        (mean.ln() - 0.5 * s2, s2.sqrt())
    }
}

/// `n` draws of the rate from `family`, moment-matched to `(mean, std)`.
/// The uniform family has half-width `√3 std`.
pub fn sample_constant_k(
    family: ConstantKFamily,
    mean: f64,
    std: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(std >= 0.0) || !mean.is_finite() {
        return Err(Error::invalid("need finite mean and std >= 0"));
    }
    if std == 0.0 {
        return Ok(vec![mean; n]);
    }
    let mut r = rng::stream(seed, family.stream_id());
    let draws = match family {
        ConstantKFamily::Normal => {
            let d = Normal::new(mean, std).map_err(|e| Error::invalid(e.to_string()))?;
            draw(&d, n, &mut r)
        }
        ConstantKFamily::LogNormal => {
            if !(mean > 0.0) {
                return Err(Error::invalid("lognormal family needs a positive mean"));
            }
            let (m, s) = ConstantKFamily::lognormal_params(mean, std);
            let d = LogNormal::new(m, s).map_err(|e| Error::invalid(e.to_string()))?;
            draw(&d, n, &mut r)
        }
        ConstantKFamily::Uniform => {
            let half = 3f64.sqrt() * std;
            let d = Uniform::new(mean - half, mean + half)
                .map_err(|e| Error::invalid(e.to_string()))?;
            draw(&d, n, &mut r)
        }
    };
    Ok(draws)
}

fn draw<D: Distribution<f64>, R: Rng>(d: &D, n: usize, r: &mut R) -> Vec<f64> {
    (0..n).map(|_| d.sample(r)).collect()
}
