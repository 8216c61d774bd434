use super::StatParams;
use crate::error::{Error, Result};

/// Covariance `C_k(r)` of a stationary rate field at separation `r`.
#[derive(Debug, Clone, Copy)]
pub enum Covariance {
    /// `σ²` at every lag.
    RandomConstant,
    /// `σ² δ(r)`.
    WhiteNoise,
    /// `σ² exp(-|r| / λ)`.
    Exponential,
    /// User function of `(r, φ)`, free of atoms.
    Custom(fn(f64, &StatParams) -> f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosureFamily {
    /// `k` known; the equation is exact with `d22 = 0`.
    ExactDeterministicK,
    RandomConstantK,
    WhiteNoiseK,
    ExponentialK,
    /// Correction integral evaluated by quadrature for the given covariance.
    GeneralQuadrature(Covariance),
}

impl PartialEq for Covariance {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Covariance::Custom(a), Covariance::Custom(b)) => std::ptr::fn_addr_eq(*a, *b),
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

impl ClosureFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ClosureFamily::ExactDeterministicK => "exact_deterministic_k",
            ClosureFamily::RandomConstantK => "random_constant_k",
            ClosureFamily::WhiteNoiseK => "white_noise_k",
            ClosureFamily::ExponentialK => "exponential_k",
            ClosureFamily::GeneralQuadrature(_) => "general_quadrature",
        }
    }

    fn covariance(&self) -> Option<Covariance> {
        match self {
            ClosureFamily::ExactDeterministicK => None,
            ClosureFamily::RandomConstantK => Some(Covariance::RandomConstant),
            ClosureFamily::WhiteNoiseK => Some(Covariance::WhiteNoise),
            ClosureFamily::ExponentialK => Some(Covariance::Exponential),
            ClosureFamily::GeneralQuadrature(c) => Some(*c),
        }
    }

    pub fn needs_corr_len(&self) -> bool {
        matches!(
            self,
            ClosureFamily::ExponentialK | ClosureFamily::GeneralQuadrature(Covariance::Exponential)
        )
    }
}

/// Sign of the closure drift correction.
///
/// `Appendix`: `q2 = -⟨k⟩U + U I`. `MainText`: same for the random-constant
/// covariance, `q2 = -⟨k⟩U - U I` for the white-noise, exponential and custom ones.
/// In both, `d22 = U² I`, clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    MainText,
    #[default]
    Appendix,
}

impl SignConvention {
    pub fn name(&self) -> &'static str {
        match self {
            SignConvention::MainText => "main_text",
            SignConvention::Appendix => "appendix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureSpec {
    pub family: ClosureFamily,
    pub sign_convention: SignConvention,
}

impl ClosureSpec {
    pub fn new(family: ClosureFamily) -> Self {
        Self {
            family,
            sign_convention: SignConvention::Appendix,
        }
    }

    pub fn validate(&self, phi: &StatParams) -> Result<()> {
        phi.validate()?;
        if self.family.needs_corr_len() && phi.k_corr_len.is_none() {
            return Err(Error::invalid(format!(
                "{} closure needs k_corr_len",
                self.family.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureCoeffs {
    pub q1: f64,
    pub q2: f64,
    pub d22: f64,
}

/// Memory time `min(t, x/v, ln(u_max/U)/⟨k⟩)`. The logarithmic term is skipped
/// when it cannot be the minimum (`U ≤ 0` or `⟨k⟩ ≤ 0`) and is zero for `U ≥ u_max`.
pub fn t_star(u: f64, x: f64, t: f64, k_mean: f64, u_max: f64, v: f64) -> f64 {
    let cap = t.min(x / v).max(0.0);
    if u <= 0.0 || k_mean <= 0.0 {
        return cap;
    }
    if u >= u_max {
        return 0.0;
    }
    cap.min((u_max / u).ln() / k_mean)
}

/// Panels of the composite trapezoid rule used by `GeneralQuadrature`, before
/// one Richardson step.
pub const QUADRATURE_PANELS: usize = 64;

const ALPHA_LIMIT: f64 = 1e-10;

/// `∫_0^a e^{βτ} dτ`, continuous through `β = 0`.
fn exp_integral(beta: f64, a: f64) -> f64 {
    if beta.abs() < ALPHA_LIMIT {
        a
    } else {
        (beta * a).exp_m1() / beta
    }
}

/// Closure correction `I = ∫_0^{t*} e^{⟨k⟩τ} C_k(vτ) dτ`.
pub fn closure_correction(family: ClosureFamily, phi: &StatParams, ts: f64, v: f64) -> f64 {
    let s2 = phi.k_std * phi.k_std;
    let km = phi.k_mean;
    match family {
        ClosureFamily::ExactDeterministicK => 0.0,
        ClosureFamily::RandomConstantK => s2 * exp_integral(km, ts),
        ClosureFamily::WhiteNoiseK => 0.5 * s2 / v,
        ClosureFamily::ExponentialK => {
            let lambda = phi.k_corr_len.unwrap_or(f64::INFINITY);
            s2 * exp_integral(km - v / lambda, ts)
        }
        ClosureFamily::GeneralQuadrature(cov) => quadrature(cov, phi, ts, v),
    }
}

fn quadrature(cov: Covariance, phi: &StatParams, ts: f64, v: f64) -> f64 {
    let s2 = phi.k_std * phi.k_std;
    // the white-noise covariance is an atom at r = 0; half of it lies in [0, t*]
    let (atom, smooth): (f64, Box<dyn Fn(f64) -> f64>) = match cov {
        Covariance::WhiteNoise => (0.5 * s2 / v, Box::new(|_| 0.0)),
        Covariance::RandomConstant => (0.0, Box::new(move |_| s2)),
        Covariance::Exponential => {
            let lambda = phi.k_corr_len.unwrap_or(f64::INFINITY);
            (0.0, Box::new(move |r: f64| s2 * (-r.abs() / lambda).exp()))
        }
        Covariance::Custom(f) => (0.0, Box::new(move |r| f(r, phi))),
    };
    if ts <= 0.0 {
        return atom;
    }
    let integrand = |tau: f64| (phi.k_mean * tau).exp() * smooth(v * tau);
    let coarse = trapezoid_fn(&integrand, ts, QUADRATURE_PANELS);
    let fine = trapezoid_fn(&integrand, ts, 2 * QUADRATURE_PANELS);
    atom + (4.0 * fine - coarse) / 3.0
}

fn trapezoid_fn(f: &dyn Fn(f64) -> f64, a: f64, n: usize) -> f64 {
    let h = a / n as f64;
    let inner: f64 = (1..n).map(|i| f(i as f64 * h)).sum();
    h * (0.5 * (f(0.0) + f(a)) + inner)
}

/// Coefficients at `(x, t, U)` for the advection speed `v`.
pub fn closure_coefficients(
    spec: &ClosureSpec,
    phi: &StatParams,
    x: f64,
    t: f64,
    u: f64,
    u_max: f64,
    v: f64,
) -> ClosureCoeffs {
    let drift = -phi.k_mean * u;
    let cov = match spec.family.covariance() {
        None => return ClosureCoeffs { q1: v, q2: drift, d22: 0.0 },
        Some(c) => c,
    };
    let ts = t_star(u, x, t, phi.k_mean, u_max, v);
    let i = closure_correction(spec.family, phi, ts, v);
    let flip = spec.sign_convention == SignConvention::MainText
        && !matches!(cov, Covariance::RandomConstant);
    let q2 = if flip { drift - u * i } else { drift + u * i };
    ClosureCoeffs {
        q1: v,
        q2,
        d22: (u * u * i).max(0.0),
    }
}
