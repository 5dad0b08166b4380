//! Solution transfer across the shape space.
//!
//! A field sampled on one shape's cubature is projected onto that shape's
//! eigenbasis; the coefficients reconstruct it on another shape through the
//! shared mode identities, which is what makes the transfer meaningful when
//! eigenvalues cross.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::EigenFieldSet;
use crate::shapespace::{sample_domain, CubatureSet, GeometryCode, ShapeFamily};
use crate::spectral::evaluate::evaluate_on_points;

#[derive(Debug, Clone)]
pub struct TransferCoefficients {
    /// One coefficient per emitted mode (known first, then learned),
    /// `alpha_i = mean(u . phi_i)` over the source cubature.
    pub alpha: Vec<f64>,
    pub source_g: GeometryCode,
    pub mode_count: usize,
}

/// Project `u` (sampled on `points`, uniform interior samples of the shape
/// at `g`) onto the eigenbasis at `g`.
pub fn project_solution(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    g: &GeometryCode,
    points: &[f64],
    u_values: &[f64],
    n: usize,
) -> Result<TransferCoefficients> {
    let out_w = set.output_width();
    if u_values.len() != n * out_w {
        return Err(Error::InvalidConfig(format!(
            "expected {n} x {out_w} solution samples, got {}",
            u_values.len()
        )));
    }
    let eval = evaluate_on_points(set, family, g, points, n, false)?;
    let alpha = eval
        .modes
        .iter()
        .map(|mode| {
            mode.value.iter().zip(u_values).map(|(p, u)| p * u).sum::<f64>() / n as f64
        })
        .collect::<Vec<f64>>();
    Ok(TransferCoefficients { mode_count: alpha.len(), alpha, source_g: g.clone() })
}

/// Reconstruct a transferred field on a fresh cubature of the shape at
/// `g_prime`: `u'(x) = sum_i alpha_i phi_i^{g'}(x)`.
pub fn reconstruct_solution(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    g_prime: &GeometryCode,
    coeffs: &TransferCoefficients,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(CubatureSet, Vec<f64>)> {
    let cubature = sample_domain(family, g_prime, n, rng)?;
    let values = reconstruct_on_points(set, family, g_prime, coeffs, &cubature.points, n)?;
    Ok((cubature, values))
}

/// Reconstruction on caller-provided points.
pub fn reconstruct_on_points(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    g_prime: &GeometryCode,
    coeffs: &TransferCoefficients,
    points: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    if coeffs.mode_count != set.mode_count() {
        return Err(Error::InvalidConfig(format!(
            "coefficient count {} does not match the model's {} modes",
            coeffs.mode_count,
            set.mode_count()
        )));
    }
    let eval = evaluate_on_points(set, family, g_prime, points, n, false)?;
    let out_w = set.output_width();
    let mut values = vec![0.0; n * out_w];
    for (mode, alpha) in eval.modes.iter().zip(&coeffs.alpha) {
        for (v, p) in values.iter_mut().zip(&mode.value) {
            *v += alpha * p;
        }
    }
    Ok(values)
}

/// Project at `g`, reconstruct at `g_prime`.
pub fn transfer_solution(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    g: &GeometryCode,
    points: &[f64],
    u_values: &[f64],
    n: usize,
    g_prime: &GeometryCode,
    n_reconstruct: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(TransferCoefficients, CubatureSet, Vec<f64>)> {
    let coeffs = project_solution(set, family, g, points, u_values, n)?;
    let (cubature, values) = reconstruct_solution(set, family, g_prime, &coeffs, n_reconstruct, rng)?;
    Ok((coeffs, cubature, values))
}
