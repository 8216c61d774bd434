//! Experiment configurations, the presets behind the reference studies, and the
//! runners shared by the command line and the acceptance suite.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assimilate::{
    damd_assimilate, enkf_assimilate, exact_bayes_inputs, grid_bayes_k, AssimilationTrace,
    DamdSetup, EnkfPrior, EnkfResult, FreeCoords, OptimizerConfig,
};
use crate::distribution::{empirical_cdf, DiscreteCdf, DiscretePdf, GaussianDist};
use crate::error::{Error, Result};
use crate::geometry::{fisher_information, gaussian_fisher_information, kl_gain_profile, FimCoord, FimMatrix, FimModel};
use crate::grid::Grid2D;
use crate::mdist::{
    cdf_slice, solve_cdf_fv, ClosureFamily, ClosureSpec, Coord, Covariance, ForecastMethod,
    FvDiagnostics, FvOptions, SignConvention, SnapshotPolicy, StatParams,
};
use crate::physics::{
    constant_k_state, generate_observations, paired_schedule, sample_constant_k, sample_k_field,
    ConstantKFamily, KField, KFieldKind, Measurement, PhysicsConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Length of `[0, L]`.
    pub l: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub n_x: usize,
    pub n_u: usize,
    pub dt: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub v: f64,
    pub u0: f64,
    pub ub: f64,
    pub a: f64,
    pub nu: f64,
    pub phase: f64,
}

/// The rate field that generates the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    /// `constant`, `white` or `exponential`.
    pub kind: String,
    pub k_mean: f64,
    pub k_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_corr_len: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_eps: f64,
    pub seed: u64,
}

/// Every `x` in `xs` is observed at every `t` in `ts`. A named `schedule`
/// (`standard` or `dense`) replaces both lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(default)]
    pub xs: Vec<f64>,
    #[serde(default)]
    pub ts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub k_mean: f64,
    pub k_std: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_corr_len: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mub: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmab: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub tol: f64,
    pub max_iters: usize,
    pub initial_simplex_scale: f64,
    pub x_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnkfConfig {
    pub n_ens: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    /// `exact_deterministic_k`, `random_constant_k`, `white_noise_k`,
    /// `exponential_k` or `general_quadrature`.
    pub family: String,
    /// Covariance for `general_quadrature`: `random_constant`, `white_noise` or
    /// `exponential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<String>,
    /// `appendix` or `main_text`.
    pub sign_convention: String,
    /// `finite_volume` or `characteristics`.
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_mc: usize,
    pub seed: u64,
    pub xs: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FimConfig {
    pub x: f64,
    pub t: f64,
    /// Any of `x`, `t` and the names of `φ` coordinates.
    pub coords: Vec<String>,
    pub h_rel: f64,
    pub gaussian_self_test: bool,
    pub gaussian_mean: f64,
    pub gaussian_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub physics: PhysicsSection,
    pub truth: TruthConfig,
    pub noise: NoiseConfig,
    pub measurements: MeasurementConfig,
    pub prior: PriorConfig,
    pub optimizer: OptimizerSection,
    pub enkf: EnkfConfig,
    pub closure: ClosureConfig,
    pub mc: McConfig,
    pub fim: FimConfig,
}

/// Reference studies with their published parameter values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Gaussian initial and boundary states, known rate `k = 1`.
    Inputs,
    /// Random constant rate, truth `k = 1.047`.
    KConst,
    /// White-noise rate field.
    KWhite,
    /// Exponentially correlated rate field.
    KExp,
    /// Monte Carlo check of the random-constant forecast on a fine grid.
    Mc,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Inputs, Preset::KConst, Preset::KWhite, Preset::KExp, Preset::Mc];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Inputs => "inputs",
            Preset::KConst => "k_const",
            Preset::KWhite => "k_white",
            Preset::KExp => "k_exp",
            Preset::Mc => "mc",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Assimilation study: which `φ` is identified and which baseline runs alongside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Inputs,
    KConst,
    KWhite,
    KExp,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Inputs, Mode::KConst, Mode::KWhite, Mode::KExp];

    pub fn name(&self) -> &'static str {
        match self {
            Mode::Inputs => "inputs",
            Mode::KConst => "k_const",
            Mode::KWhite => "k_white",
            Mode::KExp => "k_exp",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Closure family the mode requires.
    pub fn family(&self) -> ClosureFamily {
        match self {
            Mode::Inputs => ClosureFamily::ExactDeterministicK,
            Mode::KConst => ClosureFamily::RandomConstantK,
            Mode::KWhite => ClosureFamily::WhiteNoiseK,
            Mode::KExp => ClosureFamily::ExponentialK,
        }
    }

    /// Inputs: each datum moves the pair of its characteristic region.
    pub fn free_coords(&self) -> FreeCoords {
        match self {
            Mode::Inputs => FreeCoords::ByRegion {
                initial: vec![Coord::Mu0, Coord::Sigma0],
                boundary: vec![Coord::Mub, Coord::Sigmab],
            },
            Mode::KConst | Mode::KWhite => FreeCoords::All(vec![Coord::KMean, Coord::KStd]),
            Mode::KExp => FreeCoords::All(vec![Coord::KMean, Coord::KStd, Coord::KCorrLen]),
        }
    }
}

/// Time `j` of a schedule as `(a + b j) / 100`, rounded once.
fn centi(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| (a + b * j as f64) / 100.0).collect()
}

/// Named measurement designs: sensors at `x = 0.1` and `0.8`, at `t = 0.15, 0.20, …, 0.60`
/// (`standard`) or `t = 0.125, 0.150, …, 0.600` (`dense`).
pub fn named_schedule(name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    let xs = vec![0.1, 0.8];
    match name {
        "standard" => Some((xs, centi(15.0, 5.0, 10))),
        "dense" => Some((xs, centi(12.5, 2.5, 20))),
        _ => None,
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::invalid(format!("{path}: {msg}"))
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite, got {v}")))
    }
}

fn parse_kind(s: &str) -> Option<KFieldKind> {
    match s {
        "constant" => Some(KFieldKind::Constant),
        "white" => Some(KFieldKind::White),
        "exponential" => Some(KFieldKind::Exponential),
        _ => None,
    }
}

fn parse_covariance(s: &str) -> Option<Covariance> {
    match s {
        "random_constant" => Some(Covariance::RandomConstant),
        "white_noise" => Some(Covariance::WhiteNoise),
        "exponential" => Some(Covariance::Exponential),
        _ => None,
    }
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let standard = Grid2D::standard();
        let domain = DomainConfig {
            l: standard.x_max,
            u_min: standard.u_min,
            u_max: standard.u_max,
            n_x: standard.n_x,
            n_u: standard.n_u,
            dt: standard.dt,
            t_end: standard.t_end,
        };
        let (xs, ts) = named_schedule("standard").expect("known schedule");
        let mut c = Self {
            domain,
            physics: PhysicsSection { v: 1.0, u0: 0.4, ub: 0.5, a: 0.1, nu: 1.0, phase: 1.5 * PI },
            truth: TruthConfig {
                kind: "constant".into(),
                k_mean: 1.047,
                k_std: 0.0,
                k_corr_len: None,
                seed: 1,
            },
            noise: NoiseConfig { sigma_eps: 0.02, seed: 2 },
            measurements: MeasurementConfig { schedule: Some("standard".into()), xs, ts },
            prior: PriorConfig {
                k_mean: 2.0,
                k_std: 0.2,
                k_corr_len: None,
                mu0: None,
                sigma0: None,
                mub: None,
                sigmab: None,
            },
            optimizer: {
                let o = OptimizerConfig::default();
                OptimizerSection {
                    tol: o.tol,
                    max_iters: o.max_iters,
                    initial_simplex_scale: o.initial_simplex_scale,
                    x_tol: o.x_tol,
                }
            },
            enkf: EnkfConfig { n_ens: 50, seed: 3 },
            closure: ClosureConfig {
                family: "random_constant_k".into(),
                covariance: None,
                sign_convention: "appendix".into(),
                method: "finite_volume".into(),
            },
            mc: McConfig { n_mc: 1000, seed: 4, xs: vec![0.1, 0.8], t: 0.6 },
            fim: FimConfig {
                x: 0.5,
                t: 0.3,
                coords: vec!["k_mean".into(), "k_std".into()],
                h_rel: crate::geometry::DEFAULT_H_REL,
                gaussian_self_test: false,
                gaussian_mean: 0.4,
                gaussian_std: 0.1,
            },
        };
        match p {
            Preset::KConst => {}
            Preset::Inputs => {
                c.domain.n_u = 2048;
                c.domain.dt = 0.005;
                c.physics.u0 = 0.391;
                c.physics.ub = 0.51;
                c.truth.k_mean = 1.0;
                c.noise.sigma_eps = 0.04;
                c.prior = PriorConfig {
                    k_mean: 1.0,
                    k_std: 0.0,
                    k_corr_len: None,
                    mu0: Some(0.4),
                    sigma0: Some(0.1),
                    mub: Some(0.5),
                    sigmab: Some(0.1),
                };
                c.closure.family = "exact_deterministic_k".into();
                c.closure.method = "characteristics".into();
                c.fim.coords = vec!["mu0".into(), "sigma0".into()];
                c.fim.x = 0.8;
            }
            Preset::KWhite => {
                c.truth = TruthConfig {
                    kind: "white".into(),
                    k_mean: 1.0,
                    k_std: 0.1,
                    k_corr_len: None,
                    seed: 1,
                };
                c.prior.k_mean = 4.0;
                c.prior.k_std = 1.0;
                c.closure.family = "white_noise_k".into();
            }
            Preset::KExp => {
                c.truth = TruthConfig {
                    kind: "exponential".into(),
                    k_mean: 1.0,
                    k_std: 0.1,
                    k_corr_len: Some(0.3),
                    seed: 1,
                };
                c.noise.sigma_eps = 0.01;
                c.prior.k_corr_len = Some(0.2);
                c.closure.family = "exponential_k".into();
                c.fim.coords = vec!["k_mean".into(), "k_std".into(), "k_corr_len".into()];
            }
            Preset::Mc => {
                // Δx = 1.6e-4, ΔU ≈ 8.3e-4, Δt = 1e-3
                c.domain.n_x = 6250;
                c.domain.n_u = 1200;
                c.domain.dt = 0.001;
            }
        }
        c
    }

    /// Replaces every seed with `seed`.
    pub fn override_seeds(&mut self, seed: u64) {
        self.truth.seed = seed;
        self.noise.seed = seed;
        self.enkf.seed = seed;
        self.mc.seed = seed;
    }

    /// Expands a named schedule into explicit lists.
    pub fn resolve(&mut self) -> Result<()> {
        if let Some(name) = &self.measurements.schedule {
            let (xs, ts) = named_schedule(name)
                .ok_or_else(|| invalid("measurements.schedule", format!("unknown schedule {name:?}")))?;
            self.measurements.xs = xs;
            self.measurements.ts = ts;
        }
        Ok(())
    }

    /// Checks every field; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        positive("domain.l", d.l)?;
        finite("domain.u_min", d.u_min)?;
        finite("domain.u_max", d.u_max)?;
        if d.u_max <= d.u_min {
            return Err(invalid("domain.u_max", "must exceed domain.u_min"));
        }
        if d.n_x < 2 {
            return Err(invalid("domain.n_x", "must be at least 2"));
        }
        if d.n_u < 3 {
            return Err(invalid("domain.n_u", "must be at least 3"));
        }
        positive("domain.dt", d.dt)?;
        positive("domain.t_end", d.t_end)?;
        self.grid()?;

        let p = &self.physics;
        positive("physics.v", p.v)?;
        for (k, v) in [("u0", p.u0), ("ub", p.ub), ("a", p.a), ("nu", p.nu), ("phase", p.phase)] {
            finite(&format!("physics.{k}"), v)?;
        }

        let t = &self.truth;
        let kind = parse_kind(&t.kind).ok_or_else(|| {
            invalid("truth.kind", format!("expected constant, white or exponential, got {:?}", t.kind))
        })?;
        finite("truth.k_mean", t.k_mean)?;
        if !(t.k_std >= 0.0 && t.k_std.is_finite()) {
            return Err(invalid("truth.k_std", "must be nonnegative"));
        }
        if kind == KFieldKind::Exponential {
            positive("truth.k_corr_len", t.k_corr_len.unwrap_or(f64::NAN))?;
        }

        positive("noise.sigma_eps", self.noise.sigma_eps)?;

        let m = &self.measurements;
        if let Some(name) = &m.schedule {
            named_schedule(name)
                .ok_or_else(|| invalid("measurements.schedule", format!("unknown schedule {name:?}")))?;
        } else {
            if m.xs.is_empty() || m.ts.is_empty() {
                return Err(invalid("measurements", "need xs and ts, or a schedule"));
            }
            for (i, &x) in m.xs.iter().enumerate() {
                if !(x > 0.0 && x <= d.l) {
                    return Err(invalid(&format!("measurements.xs[{i}]"), "must lie in (0, L]"));
                }
            }
            for (i, &tt) in m.ts.iter().enumerate() {
                if !(tt > 0.0 && tt <= d.t_end + 1e-12) {
                    return Err(invalid(&format!("measurements.ts[{i}]"), "must lie in (0, t_end]"));
                }
            }
        }

        let spec = self.closure_spec()?;
        let method = self.method()?;
        method.check(&spec).map_err(|e| e.context("closure.method"))?;
        let phi = self.prior_params();
        spec.validate(&phi).map_err(|e| e.context("prior"))?;
        let inputs = [self.prior.mu0, self.prior.sigma0, self.prior.mub, self.prior.sigmab];
        if inputs.iter().any(Option::is_some) && !inputs.iter().all(Option::is_some) {
            return Err(invalid("prior", "mu0, sigma0, mub and sigmab go together"));
        }

        let o = &self.optimizer;
        positive("optimizer.tol", o.tol)?;
        positive("optimizer.initial_simplex_scale", o.initial_simplex_scale)?;
        if !(o.x_tol >= 0.0) {
            return Err(invalid("optimizer.x_tol", "must be nonnegative"));
        }

        if self.enkf.n_ens < 2 {
            return Err(invalid("enkf.n_ens", "must be at least 2"));
        }
        if self.mc.n_mc < 2 {
            return Err(invalid("mc.n_mc", "must be at least 2"));
        }
        for (i, &x) in self.mc.xs.iter().enumerate() {
            if !(x >= 0.0 && x <= d.l) {
                return Err(invalid(&format!("mc.xs[{i}]"), "must lie in [0, L]"));
            }
        }
        if !(self.mc.t > 0.0 && self.mc.t <= d.t_end + 1e-12) {
            return Err(invalid("mc.t", "must lie in (0, t_end]"));
        }
        positive("fim.h_rel", self.fim.h_rel)?;
        positive("fim.gaussian_std", self.fim.gaussian_std)?;
        finite("fim.gaussian_mean", self.fim.gaussian_mean)?;
        self.fim_coords()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        let d = &self.domain;
        Grid2D::new((0.0, d.l, d.n_x), (d.u_min, d.u_max, d.n_u), d.dt, d.t_end)
            .map_err(|e| e.context("domain"))
    }

    pub fn truth_field(&self, grid: &Grid2D) -> Result<KField> {
        let t = &self.truth;
        let kind = parse_kind(&t.kind).ok_or_else(|| invalid("truth.kind", "unknown kind"))?;
        sample_k_field(kind, t.k_mean, t.k_std, t.k_corr_len, grid, t.seed).map_err(|e| e.context("truth"))
    }

    pub fn physics_config(&self, k_field: KField) -> PhysicsConfig {
        let p = &self.physics;
        PhysicsConfig { v: p.v, u0: p.u0, ub: p.ub, a: p.a, nu: p.nu, phase: p.phase, k_field }
    }

    pub fn locations(&self) -> Vec<(f64, f64)> {
        match self.measurements.schedule.as_deref().and_then(named_schedule) {
            Some((xs, ts)) => paired_schedule(&xs, &ts),
            None => paired_schedule(&self.measurements.xs, &self.measurements.ts),
        }
    }

    /// Latest measurement time, or `t_end` without measurements.
    pub fn final_time(&self) -> f64 {
        let locs = self.locations();
        if locs.is_empty() {
            return self.domain.t_end;
        }
        locs.iter().map(|l| l.1).fold(f64::MIN, f64::max).min(self.domain.t_end)
    }

    pub fn prior_params(&self) -> StatParams {
        let p = &self.prior;
        StatParams {
            k_mean: p.k_mean,
            k_std: p.k_std,
            k_corr_len: p.k_corr_len,
            mu0: p.mu0,
            sigma0: p.sigma0,
            mub: p.mub,
            sigmab: p.sigmab,
        }
    }

    pub fn closure_spec(&self) -> Result<ClosureSpec> {
        let c = &self.closure;
        let family = match c.family.as_str() {
            "exact_deterministic_k" => ClosureFamily::ExactDeterministicK,
            "random_constant_k" => ClosureFamily::RandomConstantK,
            "white_noise_k" => ClosureFamily::WhiteNoiseK,
            "exponential_k" => ClosureFamily::ExponentialK,
            "general_quadrature" => {
                let name = c
                    .covariance
                    .as_deref()
                    .ok_or_else(|| invalid("closure.covariance", "required for general_quadrature"))?;
                ClosureFamily::GeneralQuadrature(
                    parse_covariance(name)
                        .ok_or_else(|| invalid("closure.covariance", format!("unknown covariance {name:?}")))?,
                )
            }
            other => return Err(invalid("closure.family", format!("unknown family {other:?}"))),
        };
        let sign_convention = match c.sign_convention.as_str() {
            "appendix" => SignConvention::Appendix,
            "main_text" => SignConvention::MainText,
            other => return Err(invalid("closure.sign_convention", format!("unknown convention {other:?}"))),
        };
        Ok(ClosureSpec { family, sign_convention })
    }

    pub fn method(&self) -> Result<ForecastMethod> {
        match self.closure.method.as_str() {
            "finite_volume" => Ok(ForecastMethod::FiniteVolume),
            "characteristics" => Ok(ForecastMethod::Characteristics),
            other => Err(invalid("closure.method", format!("unknown method {other:?}"))),
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            tol: o.tol,
            max_iters: o.max_iters,
            initial_simplex_scale: o.initial_simplex_scale,
            x_tol: o.x_tol,
        }
    }

    pub fn fim_coords(&self) -> Result<Vec<FimCoord>> {
        self.fim
            .coords
            .iter()
            .enumerate()
            .map(|(i, n)| {
                FimCoord::parse(n).ok_or_else(|| invalid(&format!("fim.coords[{i}]"), format!("unknown coordinate {n:?}")))
            })
            .collect()
    }
}

/// Everything derived from a validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub grid: Grid2D,
    /// Model with the true rate field; also the deterministic inputs of the CDF solves.
    pub physics: PhysicsConfig,
    pub spec: ClosureSpec,
    pub method: ForecastMethod,
    pub prior: StatParams,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let physics = cfg.physics_config(cfg.truth_field(&grid)?);
        Ok(Self {
            grid,
            physics,
            spec: cfg.closure_spec()?,
            method: cfg.method()?,
            prior: cfg.prior_params(),
        })
    }

    pub fn model(&self) -> FimModel<'_> {
        FimModel { spec: &self.spec, method: self.method, cfg: &self.physics, grid: &self.grid }
    }

    pub fn measurements(&self, cfg: &ExperimentConfig) -> Result<Vec<Measurement>> {
        generate_observations(&self.physics, &cfg.locations(), cfg.noise.sigma_eps, cfg.noise.seed)
            .map_err(|e| e.context("measurements"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `(x, t, F)` at each measurement location and the final measurement time.
    pub slices: Vec<(f64, f64, DiscreteCdf)>,
    pub diagnostics: FvDiagnostics,
}

/// Prior forecast at the sensor locations.
pub fn run_forward(cfg: &ExperimentConfig) -> Result<ForwardOutput> {
    let prep = Prepared::new(cfg)?;
    let t = cfg.final_time();
    let mut xs = cfg.measurements.xs.clone();
    if let Some((sx, _)) = cfg.measurements.schedule.as_deref().and_then(named_schedule) {
        xs = sx;
    }
    forward_slices(&prep, &prep.prior, &xs, t)
}

/// Slices of the forecast of `phi` at `(x, t)` for every `x` in `xs`, from one solve.
pub fn forward_slices(prep: &Prepared, phi: &StatParams, xs: &[f64], t: f64) -> Result<ForwardOutput> {
    let g = &prep.grid;
    let mut diagnostics = FvDiagnostics::default();
    let mut slices = Vec::with_capacity(xs.len());
    match prep.method {
        ForecastMethod::FiniteVolume => {
            let x_max = xs.iter().cloned().fold(0.0, f64::max);
            let opts = FvOptions { t_end: Some(t), x_limit: Some(x_max), snapshots: SnapshotPolicy::FinalOnly };
            let sol = solve_cdf_fv(&prep.spec, phi, &prep.physics, g, &opts)?;
            for &x in xs {
                slices.push((x, t, sol.slice_at(x, t)?));
            }
            diagnostics.merge(&sol.diagnostics);
        }
        ForecastMethod::Characteristics => {
            for &x in xs {
                let (c, d) = cdf_slice(&prep.spec, prep.method, phi, &prep.physics, g, x, t)?;
                diagnostics.merge(&d);
                slices.push((x, t, c));
            }
        }
    }
    Ok(ForwardOutput { slices, diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    /// Conjugate posteriors of the initial and boundary states.
    Inputs { u0: GaussianDist, ub: GaussianDist },
    /// Gridded posterior of a constant rate.
    GridK(DiscretePdf),
    Ensemble(EnkfResult),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssimilateOutput {
    pub mode: Mode,
    pub prepared: Prepared,
    pub measurements: Vec<Measurement>,
    pub trace: AssimilationTrace,
    pub baseline: Baseline,
    /// `D_KL(posterior ‖ prior)` across `x` at the final measurement time.
    pub kl_profile: Vec<(f64, f64)>,
    pub t_final: f64,
}

/// Rate nodes of the gridded posterior: 8001 points over prior mean ± 8 std.
pub fn grid_bayes_nodes(mean: f64, std: f64) -> Vec<f64> {
    let n = 8000;
    let (lo, hi) = (mean - 8.0 * std, mean + 8.0 * std);
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Sequential assimilation of the configured data plus the mode's baseline.
pub fn run_assimilate(cfg: &ExperimentConfig, mode: Mode) -> Result<AssimilateOutput> {
    let prep = Prepared::new(cfg)?;
    if prep.spec.family != mode.family() {
        return Err(invalid(
            "closure.family",
            format!("mode {} needs {}, got {}", mode.name(), mode.family().name(), prep.spec.family.name()),
        ));
    }
    if (mode == Mode::Inputs) != prep.prior.has_random_inputs() {
        return Err(invalid("prior", "mu0, sigma0, mub and sigmab are required exactly in inputs mode"));
    }
    let measurements = prep.measurements(cfg)?;
    let setup = DamdSetup {
        spec: prep.spec,
        method: prep.method,
        cfg: prep.physics.clone(),
        grid: prep.grid.clone(),
        free: mode.free_coords(),
        opt: cfg.optimizer_config(),
    };
    let trace = damd_assimilate(&measurements, &prep.prior, &setup)?;
    if let Some((i, e)) = &trace.failure {
        return Err(e.clone().context(format!("assimilation step {}", i + 1)));
    }
    let phi = &prep.prior;
    let baseline = match mode {
        Mode::Inputs => {
            let p0 = GaussianDist::new(phi.mu0.unwrap_or_default(), phi.sigma0.unwrap_or_default())?;
            let pb = GaussianDist::new(phi.mub.unwrap_or_default(), phi.sigmab.unwrap_or_default())?;
            let (u0, ub) = exact_bayes_inputs(&measurements, p0, pb, phi.k_mean, &prep.physics)?;
            Baseline::Inputs { u0, ub }
        }
        Mode::KConst => {
            let prior = GaussianDist::new(phi.k_mean, phi.k_std)?;
            let nodes = grid_bayes_nodes(phi.k_mean, phi.k_std);
            Baseline::GridK(grid_bayes_k(&measurements, prior, &prep.physics, &nodes)?)
        }
        Mode::KWhite | Mode::KExp => {
            let prior = EnkfPrior { mean: phi.k_mean, std: phi.k_std, corr_len: phi.k_corr_len };
            Baseline::Ensemble(enkf_assimilate(
                &measurements,
                prior,
                &prep.grid,
                &prep.physics,
                cfg.enkf.n_ens,
                cfg.enkf.seed,
            )?)
        }
    };
    let t_final = cfg.final_time();
    let kl_profile = kl_gain_profile(&prep.model(), &prep.prior, &trace.final_phi(), t_final)?;
    Ok(AssimilateOutput { mode, prepared: prep, measurements, trace, baseline, kl_profile, t_final })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McFamilyRun {
    pub family: ConstantKFamily,
    pub samples: Vec<f64>,
    /// Empirical CDF of the state at each probe, on the state grid.
    pub cdfs: Vec<DiscreteCdf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOutput {
    pub xs: Vec<f64>,
    pub t: f64,
    pub fv: Vec<DiscreteCdf>,
    pub families: Vec<McFamilyRun>,
    pub diagnostics: FvDiagnostics,
}

impl McOutput {
    /// `sup |F_mc - F_fv|` per family and probe.
    pub fn sup_vs_fv(&self) -> Result<Vec<(ConstantKFamily, f64, f64)>> {
        let mut out = Vec::new();
        for f in &self.families {
            for (i, &x) in self.xs.iter().enumerate() {
                out.push((f.family, x, f.cdfs[i].sup_distance(&self.fv[i])?));
            }
        }
        Ok(out)
    }

    /// `sup |F_a - F_b|` for each pair of families and probe.
    pub fn sup_pairwise(&self) -> Result<Vec<(ConstantKFamily, ConstantKFamily, f64, f64)>> {
        let mut out = Vec::new();
        for (a, fa) in self.families.iter().enumerate() {
            for fb in &self.families[a + 1..] {
                for (i, &x) in self.xs.iter().enumerate() {
                    out.push((fa.family, fb.family, x, fa.cdfs[i].sup_distance(&fb.cdfs[i])?));
                }
            }
        }
        Ok(out)
    }
}

/// Random-constant forecast against Monte Carlo over normal, lognormal and uniform
/// rates with the prior's mean and standard deviation.
pub fn run_verify_mc(cfg: &ExperimentConfig) -> Result<McOutput> {
    let prep = Prepared::new(cfg)?;
    if prep.spec.family != ClosureFamily::RandomConstantK {
        return Err(invalid("closure.family", "verify-mc needs random_constant_k"));
    }
    let t = cfg.mc.t;
    let xs = cfg.mc.xs.clone();
    let fwd = forward_slices(&prep, &prep.prior, &xs, t)?;
    let u_nodes = prep.grid.u_nodes();
    let families = ConstantKFamily::ALL
        .iter()
        .map(|&family| {
            let samples = sample_constant_k(family, prep.prior.k_mean, prep.prior.k_std, cfg.mc.n_mc, cfg.mc.seed)?;
            let cdfs = xs
                .iter()
                .map(|&x| {
                    // states at the grid point the forecast slice was taken from
                    let xn = prep.grid.x_node(prep.grid.x_index(x));
                    let tn = prep.grid.step_index(t) as f64 * prep.grid.dt;
                    let states: Vec<f64> = samples.iter().map(|&k| constant_k_state(xn, tn, k, &prep.physics)).collect();
                    empirical_cdf(&states, &u_nodes)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(McFamilyRun { family, samples, cdfs })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(McOutput {
        xs,
        t,
        fv: fwd.slices.into_iter().map(|s| s.2).collect(),
        families,
        diagnostics: fwd.diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimOutput {
    pub fim: FimMatrix,
    /// Same metric with half the step.
    pub fim_half_step: FimMatrix,
    /// `max |g_h - g_{h/2}| / max |g_{h/2}|`.
    pub step_consistency: f64,
    pub gaussian: Option<FimMatrix>,
}

/// Fisher metric of the prior forecast at the configured probe.
pub fn run_fim(cfg: &ExperimentConfig) -> Result<FimOutput> {
    let prep = Prepared::new(cfg)?;
    let coords = cfg.fim_coords()?;
    let (x, t, h) = (cfg.fim.x, cfg.fim.t, cfg.fim.h_rel);
    let fim = fisher_information(&prep.model(), &prep.prior, x, t, &coords, h)?;
    let fim_half_step = fisher_information(&prep.model(), &prep.prior, x, t, &coords, h / 2.0)?;
    let step_consistency = fim.relative_difference(&fim_half_step)?;
    let gaussian = if cfg.fim.gaussian_self_test {
        let g = GaussianDist::new(cfg.fim.gaussian_mean, cfg.fim.gaussian_std)?;
        let nodes: Vec<f64> = (0..=6000)
            .map(|i| g.mean - 12.0 * g.std + 24.0 * g.std * i as f64 / 6000.0)
            .collect();
        Some(gaussian_fisher_information(&g, h, &nodes)?)
    } else {
        None
    };
    Ok(FimOutput { fim, fim_half_step, step_consistency, gaussian })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in Preset::ALL {
            let mut c = ExperimentConfig::preset(p);
            c.resolve().unwrap();
            c.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name()));
        }
    }

    #[test]
    fn schedules() {
        let (xs, ts) = named_schedule("standard").unwrap();
        assert_eq!(xs, [0.1, 0.8]);
        assert_eq!(ts.len(), 10);
        assert_eq!((ts[0], ts[9]), (0.15, 0.6));
        let (_, td) = named_schedule("dense").unwrap();
        assert_eq!(td.len(), 20);
        assert!(ts.iter().all(|t| td.contains(t)));
        assert_eq!(td[19], 0.6);
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = ExperimentConfig::preset(Preset::KConst);
        c.prior.k_std = -1.0;
        assert!(c.validate().unwrap_err().to_string().contains("prior"));
        let mut c = ExperimentConfig::preset(Preset::KConst);
        c.closure.family = "bogus".into();
        assert!(c.validate().unwrap_err().to_string().contains("closure.family"));
        let mut c = ExperimentConfig::preset(Preset::KConst);
        c.measurements.schedule = None;
        c.measurements.xs = vec![2.0];
        assert!(c.validate().unwrap_err().to_string().contains("measurements.xs[0]"));
    }

    #[test]
    fn mode_must_match_family() {
        let c = ExperimentConfig::preset(Preset::KConst);
        let e = run_assimilate(&c, Mode::KWhite).unwrap_err();
        assert!(e.to_string().contains("closure.family"));
    }

    #[test]
    fn final_time_is_last_measurement() {
        assert_eq!(ExperimentConfig::preset(Preset::KConst).final_time(), 0.6);
    }
}
