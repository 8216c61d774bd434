use crate::distribution::{cdf_from_pdf, pdf_from_cdf, trapezoid, DiscreteCdf, DiscretePdf};
use crate::error::{Error, Result};

const MIN_EVIDENCE: f64 = 1e-300;

/// Single-datum Bayes update of a prior CDF: density `∝ N(d; U, σ_ε²) f(U)` with the
/// prior density `f` from finite differences, normalized by trapezoid quadrature.
pub fn observational_posterior(
    prior: &DiscreteCdf,
    d: f64,
    sigma_eps: f64,
) -> Result<(DiscretePdf, DiscreteCdf)> {
    if !(sigma_eps > 0.0) || !sigma_eps.is_finite() {
        return Err(Error::invalid("sigma_eps must be positive and finite"));
    }
    if !d.is_finite() {
        return Err(Error::invalid("datum must be finite"));
    }
    let f = pdf_from_cdf(prior);
    let norm = 1.0 / (sigma_eps * (2.0 * std::f64::consts::PI).sqrt());
    let w: Vec<f64> = f
        .u_nodes()
        .iter()
        .zip(f.densities())
        .map(|(&u, &p)| {
            let z = (d - u) / sigma_eps;
            p * norm * (-0.5 * z * z).exp()
        })
        .collect();
    let evidence = trapezoid(f.u_nodes(), &w);
    if !(evidence >= MIN_EVIDENCE) {
        return Err(Error::InconsistentData(format!(
            "datum {d} has evidence {evidence:e} under the prior"
        )));
    }
    let pdf = DiscretePdf::normalized(f.u_nodes().to_vec(), w)?;
    let cdf = cdf_from_pdf(&pdf)?;
    Ok((pdf, cdf))
}
