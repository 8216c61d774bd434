//! Command-line front end: `forward`, `assimilate`, `verify-mc` and `fim`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use damd_core::experiment::{
    run_assimilate, run_fim, run_forward, run_verify_mc, Baseline, ExperimentConfig, Mode, Preset,
};
use damd_core::io;
use damd_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "damd", version, about = "Forecast and assimilate state distributions through the CDF equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file merged over the command's preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prior CDF profiles at the sensor locations and the final measurement time.
    Forward(Common),
    /// Sequential assimilation with the matching baseline.
    Assimilate {
        #[command(flatten)]
        common: Common,
        /// inputs, k_const, k_white or k_exp.
        #[arg(long)]
        mode: String,
    },
    /// Random-constant forecast against Monte Carlo.
    VerifyMc(Common),
    /// Fisher information metric at the configured probe.
    Fim(Common),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Exit status for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numerical(_) | Error::Degenerate(_) => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// `section.key` of the line holding byte `pos` of a serialized config.
fn key_path(text: &str, pos: usize) -> String {
    let mut section = String::new();
    let mut offset = 0;
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            section = trimmed.trim_matches(|c| c == '[' || c == ']').to_string();
        }
        if pos < offset + line.len() + 1 {
            return match trimmed.split_once('=') {
                Some((key, _)) if section.is_empty() => key.trim().to_string(),
                Some((key, _)) => format!("{section}.{}", key.trim()),
                None if section.is_empty() => "config".into(),
                None => section,
            };
        }
        offset += line.len() + 1;
    }
    "config".into()
}

/// The preset named by a top-level `preset` key (or `default`), overlaid with the
/// rest of `text`. Explicit measurement lists without a `schedule` drop the preset's.
pub fn load_config(text: Option<&str>, default: Preset) -> Result<ExperimentConfig> {
    let mut user: toml::Table = match text {
        Some(t) => t.parse().map_err(|e: toml::de::Error| Error::InvalidInput(format!("config: {e}")))?,
        None => toml::Table::new(),
    };
    let preset = match user.remove("preset") {
        None => default,
        Some(toml::Value::String(name)) => Preset::parse(&name)
            .ok_or_else(|| Error::InvalidInput(format!("preset: unknown preset {name:?}")))?,
        Some(_) => return Err(Error::InvalidInput("preset: expected a string".into())),
    };
    let mut base = toml::Table::try_from(ExperimentConfig::preset(preset))
        .map_err(|e| Error::InvalidInput(format!("preset: {e}")))?;
    if let Some(toml::Value::Table(m)) = user.get("measurements") {
        if !m.contains_key("schedule") && (m.contains_key("xs") || m.contains_key("ts")) {
            if let Some(toml::Value::Table(b)) = base.get_mut("measurements") {
                b.remove("schedule");
            }
        }
    }
    merge(&mut base, user);
    let merged = toml::to_string(&base).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
    let mut cfg: ExperimentConfig = toml::from_str(&merged).map_err(|e| {
        let path = e.span().map(|s| key_path(&merged, s.start)).unwrap_or_else(|| "config".into());
        Error::InvalidInput(format!("{path}: {}", e.message().trim()))
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

fn prepare(common: &Common, default: Preset) -> Result<ExperimentConfig> {
    let text = match &common.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut cfg = load_config(text.as_deref(), default)?;
    if let Some(s) = common.seed {
        cfg.override_seeds(s);
    }
    cfg.validate()?;
    fs::create_dir_all(&common.out_dir).map_err(|e| Error::Io(format!("{}: {e}", common.out_dir.display())))?;
    let resolved = toml::to_string(&cfg).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
    fs::write(common.out_dir.join("resolved_config.toml"), resolved)?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn forward(common: &Common) -> Result<()> {
    let cfg = prepare(common, Preset::KConst)?;
    let out = run_forward(&cfg)?;
    io::write_cdf_profile(create(&common.out_dir, "cdf_profile.csv")?, &out.slices)?;
    io::write_cdf_summary(create(&common.out_dir, "cdf_summary.csv")?, &out.slices)?;
    for (x, t, c) in &out.slices {
        println!("x = {x}, t = {t}: median {:.4}, IQR {:.4}", c.median(), c.quantile(0.75) - c.quantile(0.25));
    }
    Ok(())
}

fn assimilate(common: &Common, mode: &str) -> Result<()> {
    let mode = Mode::parse(mode).ok_or_else(|| {
        Error::InvalidInput(format!("--mode: expected inputs, k_const, k_white or k_exp, got {mode:?}"))
    })?;
    let preset = Preset::parse(mode.name()).expect("every mode has a preset");
    let cfg = prepare(common, preset)?;
    let out = run_assimilate(&cfg, mode)?;
    let dir = &common.out_dir;
    io::write_measurements(create(dir, "measurements.csv")?, &out.measurements)?;
    io::write_k_field(create(dir, "k_field.csv")?, &out.prepared.physics.k_field)?;
    io::write_posterior_params(create(dir, "posterior_params.csv")?, &out.trace)?;
    io::write_kl_profile(create(dir, "kl_profile.csv")?, &out.kl_profile)?;
    match &out.baseline {
        Baseline::Inputs { u0, ub } => {
            io::write_bayes_gaussian(create(dir, "bayes_posterior.csv")?, &[("u0", *u0), ("ub", *ub)])?;
        }
        Baseline::GridK(pdf) => io::write_bayes_grid(create(dir, "bayes_posterior.csv")?, pdf)?,
        Baseline::Ensemble(res) => {
            let x = &out.prepared.grid.x_nodes();
            io::write_ensemble_posterior(create(dir, "ensemble_posterior.csv")?, res, x)?
        }
    }
    let phi = out.trace.final_phi();
    let fields: Vec<String> = phi
        .present()
        .iter()
        .map(|c| format!("{} = {:.4}", c.name(), phi.get(*c).unwrap_or(f64::NAN)))
        .collect();
    println!("posterior after {} measurements: {}", out.trace.steps.len(), fields.join(", "));
    Ok(())
}

fn verify_mc(common: &Common) -> Result<()> {
    let cfg = prepare(common, Preset::Mc)?;
    let out = run_verify_mc(&cfg)?;
    let mut rows = Vec::new();
    for f in &out.families {
        for (i, &x) in out.xs.iter().enumerate() {
            let (mc, fv) = (&f.cdfs[i], &out.fv[i]);
            for ((u, a), b) in mc.u_nodes().iter().zip(mc.values()).zip(fv.values()) {
                rows.push(io::McCompareRow { family: f.family.name().into(), x, u: *u, f_mc: *a, f_fv: *b });
            }
        }
    }
    io::write_mc_compare(create(&common.out_dir, "mc_compare.csv")?, &rows)?;
    let mut summary = csv::Writer::from_writer(create(&common.out_dir, "mc_summary.csv")?);
    summary.write_record(["a", "b", "x", "t", "sup"])?;
    for (f, x, d) in out.sup_vs_fv()? {
        summary.write_record([f.name(), "fv", &io::fmt_f64(x), &io::fmt_f64(out.t), &io::fmt_f64(d)])?;
        println!("{} vs FV at x = {x}: sup {d:.4}", f.name());
    }
    for (a, b, x, d) in out.sup_pairwise()? {
        summary.write_record([a.name(), b.name(), &io::fmt_f64(x), &io::fmt_f64(out.t), &io::fmt_f64(d)])?;
        println!("{} vs {} at x = {x}: sup {d:.4}", a.name(), b.name());
    }
    summary.flush()?;
    Ok(())
}

fn fim(common: &Common) -> Result<()> {
    let cfg = prepare(common, Preset::KConst)?;
    let out = run_fim(&cfg)?;
    let dir = &common.out_dir;
    io::write_fim(create(dir, "fim.csv")?, &out.fim)?;
    if let Some(g) = &out.gaussian {
        io::write_fim(create(dir, "fim_gaussian.csv")?, g)?;
    }
    let mut report = csv::Writer::from_writer(create(dir, "fim_report.csv")?);
    report.write_record(["quantity", "value"])?;
    report.write_record(["step_halving_change", &io::fmt_f64(out.step_consistency)])?;
    report.write_record(["min_eigenvalue", &io::fmt_f64(out.fim.min_eigenvalue())])?;
    report.flush()?;
    println!("step-halving change {:.3e}", out.step_consistency);
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Forward(c) => forward(c),
        Command::Assimilate { common, mode } => assimilate(common, mode),
        Command::VerifyMc(c) => verify_mc(c),
        Command::Fim(c) => fim(c),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
