use serde::Serialize;

use crate::data::ILKey;
use crate::data::Property;
use crate::error::{Error, Result};
use crate::model::FinetuneModel;

/// Fit of `ln σ = ln k₃ + b·ln μ + c·ln ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditFit {
    pub k3: f64,
    pub b: f64,
    pub c: f64,
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares of `ln σ` on `[1, ln μ, ln ρ]`. Viscosity is taken
/// in mPa·s (not its logarithm); every value must be positive.
pub fn correlation_audit(density: &[f64], viscosity: &[f64], surface_tension: &[f64]) -> Result<AuditFit> {
    let n = density.len();
    if viscosity.len() != n || surface_tension.len() != n {
        return Err(Error::Dimension("audit columns differ in length".into()));
    }
    if n < 3 {
        return Err(Error::Domain(format!("{n} points cannot determine three coefficients")));
    }
    for (name, col) in [
        ("density", density),
        ("viscosity", viscosity),
        ("surface tension", surface_tension),
    ] {
        if let Some(v) = col.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("{name} value {v} is not positive")));
        }
    }
    let x1: Vec<f64> = viscosity.iter().map(|v| v.ln()).collect();
    let x2: Vec<f64> = density.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = surface_tension.iter().map(|v| v.ln()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (m1, m2, my) = (mean(&x1), mean(&x2), mean(&y));
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b, c) = (x1[i] - m1, x2[i] - m2, y[i] - my);
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * c;
        s2y += b * c;
        syy += c * c;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * (s11 * s22).max(f64::MIN_POSITIVE) {
        return Err(Error::Domain("ln μ and ln ρ are collinear".into()));
    }
    let b = (s22 * s1y - s12 * s2y) / det;
    let c = (s11 * s2y - s12 * s1y) / det;
    let intercept = my - b * m1 - c * m2;
    if syy == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let ss_res: f64 = (0..n)
        .map(|i| {
            let e = y[i] - intercept - b * x1[i] - c * x2[i];
            e * e
        })
        .sum();
    Ok(AuditFit {
        k3: intercept.exp(),
        b,
        c,
        r2: 1.0 - ss_res / syy,
        n,
    })
}

/// Audit of model predictions at `(temperature, pressure)` over `ils`, from
/// density, ln-viscosity and surface-tension models.
pub fn audit_models(
    density: &FinetuneModel,
    ln_viscosity: &FinetuneModel,
    surface_tension: &FinetuneModel,
    ils: &[ILKey],
    temperature: f64,
    pressure: f64,
) -> Result<AuditFit> {
    for (m, p) in [
        (density, Property::Density),
        (ln_viscosity, Property::LnViscosity),
        (surface_tension, Property::SurfaceTension),
    ] {
        if m.property() != p {
            return Err(Error::Config(format!("expected a {p} model, got {}", m.property())));
        }
    }
    let c: Vec<usize> = ils.iter().map(|k| k.cation).collect();
    let a: Vec<usize> = ils.iter().map(|k| k.anion).collect();
    let t = vec![temperature; ils.len()];
    let p = vec![pressure; ils.len()];
    let rho = density.predict(&c, &a, &t, &p)?;
    let mu: Vec<f64> = ln_viscosity
        .predict(&c, &a, &t, &p)?
        .into_iter()
        .map(f64::exp)
        .collect();
    let sigma = surface_tension.predict(&c, &a, &t, &p)?;
    correlation_audit(&rho, &mu, &sigma)
}
