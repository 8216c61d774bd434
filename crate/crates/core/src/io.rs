//! CSV tables: header row, `.` decimal separator, floats with 17 significant digits.

use std::io::{Read, Write};

use crate::assimilate::{AssimilationTrace, EnkfResult};
use crate::distribution::{DiscreteCdf, DiscretePdf, GaussianDist};
use crate::error::{Error, Result};
use crate::geometry::FimMatrix;
use crate::mdist::{Coord, StatParams};
use crate::physics::{KField, Measurement};

/// Round-trip exact text for an `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    Ok(out)
}

fn parse(field: &str, column: &str, row: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("row {row}, column {column}: not a number: {field:?}")))
}

/// Rows of a numeric table whose header must equal `header`.
fn read_numeric<R: Read>(r: R, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_reader(r);
    let got: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if got != header {
        return Err(Error::invalid(format!("expected columns {header:?}, found {got:?}")));
    }
    rdr.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            rec.iter()
                .zip(header)
                .map(|(f, c)| parse(f, c, row + 1))
                .collect()
        })
        .collect()
}

pub fn write_k_field<W: Write>(w: W, field: &KField) -> Result<()> {
    let mut out = writer(w, &["x", "k"])?;
    for (i, k) in field.node_values.iter().enumerate() {
        out.write_record([fmt_f64(field.cell_center(i)), fmt_f64(*k)])?;
    }
    out.flush()?;
    Ok(())
}

const MEASUREMENT_COLUMNS: [&str; 4] = ["x", "t", "d", "sigma_eps"];

pub fn write_measurements<W: Write>(w: W, ms: &[Measurement]) -> Result<()> {
    let mut out = writer(w, &MEASUREMENT_COLUMNS)?;
    for m in ms {
        out.write_record([m.x, m.t, m.d, m.sigma_eps].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_measurements<R: Read>(r: R) -> Result<Vec<Measurement>> {
    Ok(read_numeric(r, &MEASUREMENT_COLUMNS)?
        .into_iter()
        .map(|v| Measurement { x: v[0], t: v[1], d: v[2], sigma_eps: v[3] })
        .collect())
}

/// CDF slices `(x, t, F)` in long format `x, t, U, F`.
pub fn write_cdf_profile<W: Write>(w: W, slices: &[(f64, f64, DiscreteCdf)]) -> Result<()> {
    let mut out = writer(w, &["x", "t", "U", "F"])?;
    for (x, t, c) in slices {
        for (u, f) in c.u_nodes().iter().zip(c.values()) {
            out.write_record([*x, *t, *u, *f].map(fmt_f64))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Per-slice summaries: median and interquartile range.
pub fn write_cdf_summary<W: Write>(w: W, slices: &[(f64, f64, DiscreteCdf)]) -> Result<()> {
    let mut out = writer(w, &["x", "t", "median", "q25", "q75", "iqr", "mean"])?;
    for (x, t, c) in slices {
        let (q1, q3) = (c.quantile(0.25), c.quantile(0.75));
        out.write_record([*x, *t, c.median(), q1, q3, q3 - q1, c.mean()].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

fn phi_fields(p: &StatParams) -> Vec<String> {
    Coord::ALL.iter().map(|&c| fmt_opt(p.get(c))).collect()
}

/// The prior as step 0, then `φ` after each assimilated measurement.
pub fn write_posterior_params<W: Write>(w: W, trace: &AssimilationTrace) -> Result<()> {
    let mut header = vec!["step", "x", "t", "d"];
    header.extend(Coord::ALL.iter().map(Coord::name));
    header.extend(["loss_before", "loss", "iterations", "converged"]);
    let mut out = writer(w, &header)?;
    let mut row = vec!["0".to_string(), String::new(), String::new(), String::new()];
    row.extend(phi_fields(&trace.phi0));
    row.extend([String::new(), String::new(), String::new(), String::new()]);
    out.write_record(&row)?;
    for s in &trace.steps {
        let m = &s.measurement;
        let mut row = vec![(s.index + 1).to_string(), fmt_f64(m.x), fmt_f64(m.t), fmt_f64(m.d)];
        row.extend(phi_fields(&s.phi_after));
        row.extend([
            fmt_f64(s.loss_before),
            fmt_f64(s.loss),
            s.iterations.to_string(),
            s.converged.to_string(),
        ]);
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Ensemble mean and standard deviation of `k` per node: the prior at `t = 0`,
/// then after each analysis time.
pub fn write_ensemble_posterior<W: Write>(w: W, res: &EnkfResult, x_nodes: &[f64]) -> Result<()> {
    let mut out = writer(w, &["t", "x", "mean", "std"])?;
    let mut emit = |t: f64, mean: &[f64], std: &[f64]| -> Result<()> {
        for ((x, m), s) in x_nodes.iter().zip(mean).zip(std) {
            out.write_record([t, *x, *m, *s].map(fmt_f64))?;
        }
        Ok(())
    };
    emit(0.0, &res.prior.mean(), &res.prior.std())?;
    for s in &res.steps {
        emit(s.t, &s.mean, &s.std)?;
    }
    out.flush()?;
    Ok(())
}

/// Closed-form Gaussian posteriors, one row per named parameter.
pub fn write_bayes_gaussian<W: Write>(w: W, rows: &[(&str, GaussianDist)]) -> Result<()> {
    let mut out = writer(w, &["param", "mean", "std"])?;
    for (name, g) in rows {
        out.write_record([name.to_string(), fmt_f64(g.mean), fmt_f64(g.std)])?;
    }
    out.flush()?;
    Ok(())
}

/// Gridded posterior density of `k`.
pub fn write_bayes_grid<W: Write>(w: W, pdf: &DiscretePdf) -> Result<()> {
    let mut out = writer(w, &["k", "density"])?;
    for (k, d) in pdf.u_nodes().iter().zip(pdf.densities()) {
        out.write_record([*k, *d].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_fim<W: Write>(w: W, fim: &FimMatrix) -> Result<()> {
    let mut out = writer(w, &["coord_i", "coord_j", "g_ij"])?;
    for i in 0..fim.dim() {
        for j in 0..fim.dim() {
            out.write_record([fim.coords[i].clone(), fim.coords[j].clone(), fmt_f64(fim.get(i, j))])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `(coord_i, coord_j, g_ij)` triples.
pub fn read_fim<R: Read>(r: R) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.records()
        .enumerate()
        .map(|(row, rec)| {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::invalid(format!("row {}: expected 3 fields", row + 1)));
            }
            Ok((rec[0].to_string(), rec[1].to_string(), parse(&rec[2], "g_ij", row + 1)?))
        })
        .collect()
}

pub fn write_kl_profile<W: Write>(w: W, profile: &[(f64, f64)]) -> Result<()> {
    let mut out = writer(w, &["x", "dkl"])?;
    for (x, d) in profile {
        out.write_record([*x, *d].map(fmt_f64))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_kl_profile<R: Read>(r: R) -> Result<Vec<(f64, f64)>> {
    Ok(read_numeric(r, &["x", "dkl"])?.into_iter().map(|v| (v[0], v[1])).collect())
}

/// One point of a Monte Carlo versus finite-volume CDF comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct McCompareRow {
    pub family: String,
    pub x: f64,
    pub u: f64,
    pub f_mc: f64,
    pub f_fv: f64,
}

pub fn write_mc_compare<W: Write>(w: W, rows: &[McCompareRow]) -> Result<()> {
    let mut out = writer(w, &["family", "x", "U", "F_mc", "F_fv"])?;
    for r in rows {
        let mut rec = vec![r.family.clone()];
        rec.extend([r.x, r.u, r.f_mc, r.f_fv].map(fmt_f64));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
