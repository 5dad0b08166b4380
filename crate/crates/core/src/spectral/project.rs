//! Gram-Schmidt projection and normalization on plain batches.
//!
//! The projection coefficients solve the least-squares fit of the candidate
//! by the dominating prefix through the normal equations; the prefix Gram
//! matrix absorbs imperfect orthonormality early in training.

use crate::autodiff::batch::{mean_inner, mean_sq, DualBatch};
use crate::error::{Error, Result};
use crate::linalg;

/// Least-squares weights of the dominating prefix for one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCoefficients(pub Vec<f64>);

pub const GRAM_CONDITION_WARN: f64 = 1e8;
pub const NORM_FLOOR: f64 = 1e-9;

/// Solve `G c = b` with `G` the prefix Gram matrix and `b` the inner products
/// with the candidate. Returns the coefficients and the condition number.
pub fn projection_coefficients(candidate: &DualBatch, prefix: &[&DualBatch]) -> Result<(Vec<f64>, f64)> {
    let m = prefix.len();
    if m == 0 {
        return Ok((vec![], 1.0));
    }
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        for j in i..m {
            let v = mean_inner(prefix[i], prefix[j]);
            gram[i * m + j] = v;
            gram[j * m + i] = v;
        }
        rhs[i] = mean_inner(prefix[i], candidate);
    }
    let (coeffs, cond) = linalg::solve_sym(&gram, m, &rhs)
        .map_err(|e| Error::SingularPrefix(format!("projection prefix of size {m}: {e}")))?;
    if cond > GRAM_CONDITION_WARN {
        log::warn!("near-degenerate projection prefix: condition number {cond:.3e}");
    }
    Ok((coeffs, cond))
}

/// Subtract the span of the prefix: `residual = candidate - sum c_i phi_i`,
/// applied to values and tangents alike.
pub fn project_out(candidate: &DualBatch, prefix: &[&DualBatch], coeffs: &[f64]) -> DualBatch {
    let mut residual = candidate.clone();
    for (field, c) in prefix.iter().zip(coeffs) {
        residual.sub_scaled(field, *c);
    }
    residual
}

/// Full Gram-Schmidt step. The prefix must be sampled on the same cubature.
pub fn gram_schmidt_project(
    candidate: &DualBatch,
    prefix: &[&DualBatch],
) -> Result<(DualBatch, ProjectionCoefficients)> {
    let (coeffs, _) = projection_coefficients(candidate, prefix)?;
    let residual = project_out(candidate, prefix, &coeffs);
    Ok((residual, ProjectionCoefficients(coeffs)))
}

/// Scale a field to unit RMS over the cubature. The spatial gradient scales
/// by the same constant (the norm is held fixed in the derivative path).
/// Returns the RMS norm that was divided out.
pub fn normalize(batch: &mut DualBatch, label: &str) -> Result<f64> {
    let rms = mean_sq(batch).sqrt();
    if !(rms > NORM_FLOOR) {
        return Err(Error::DegenerateField { mode: label.to_string(), norm: rms });
    }
    batch.scale(1.0 / rms);
    Ok(rms)
}

/// Gram-Schmidt a set of fields among themselves in order. Returns, per
/// field, the projection coefficients against its predecessors and the RMS
/// norm divided out, so the same transform can be replayed elsewhere.
pub fn orthonormalize(fields: &mut [DualBatch], label: &str) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut transforms = Vec::with_capacity(fields.len());
    for i in 0..fields.len() {
        let (head, tail) = fields.split_at_mut(i);
        let prefix: Vec<&DualBatch> = head.iter().collect();
        let candidate = &mut tail[0];
        let (coeffs, _) = projection_coefficients(candidate, &prefix)?;
        for (field, c) in prefix.iter().zip(&coeffs) {
            candidate.sub_scaled(field, *c);
        }
        let rms = normalize(candidate, &format!("{label}[{i}]"))?;
        transforms.push((coeffs, rms));
    }
    Ok(transforms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch_from_fn<F: Fn(f64) -> f64>(n: usize, f: F) -> DualBatch {
        let mut b = DualBatch::zeros(n, 1, 0);
        for j in 0..n {
            let x = (j as f64 + 0.5) / n as f64;
            b.value[j] = f(x);
        }
        b
    }

    #[test]
    fn linear_candidate_against_constant_prefix() {
        let n = 20_000;
        let candidate = batch_from_fn(n, |x| x);
        let ones = batch_from_fn(n, |_| 1.0);
        let (residual, coeffs) = gram_schmidt_project(&candidate, &[&ones]).unwrap();
        assert!((coeffs.0[0] - 0.5).abs() < 1e-3, "{:?}", coeffs.0);
        // residual is x - 1/2
        let mid = residual.value[n / 2];
        assert!(mid.abs() < 1e-3);
        let lo = residual.value[0];
        assert!((lo + 0.5).abs() < 1e-3);
    }

    #[test]
    fn orthogonal_candidate_is_untouched() {
        let n = 50_000;
        let pi = std::f64::consts::PI;
        let candidate = batch_from_fn(n, |x| (2.0f64).sqrt() * (pi * x).cos());
        let ones = batch_from_fn(n, |_| 1.0);
        let (residual, coeffs) = gram_schmidt_project(&candidate, &[&ones]).unwrap();
        assert!(coeffs.0[0].abs() < 1e-3);
        for (r, c) in residual.value.iter().zip(&candidate.value).step_by(1000) {
            assert!((r - c).abs() < 1e-3);
        }
    }

    #[test]
    fn empty_prefix_is_identity() {
        let candidate = batch_from_fn(100, |x| x * x);
        let (residual, coeffs) = gram_schmidt_project(&candidate, &[]).unwrap();
        assert!(coeffs.0.is_empty());
        assert_eq!(residual.value, candidate.value);
    }

    #[test]
    fn normalize_x_minus_half() {
        let n = 100_000;
        let mut batch = batch_from_fn(n, |x| x - 0.5);
        let rms = normalize(&mut batch, "test").unwrap();
        // integral of (x - 1/2)^2 over [0,1] is 1/12.
        assert!((rms - (1.0f64 / 12.0).sqrt()).abs() < 1e-4, "{rms}");
        let val = batch.value[0];
        assert!((val + (12.0f64).sqrt() * 0.5).abs() < 1e-3, "{val}");
    }

    #[test]
    fn normalize_is_idempotent_and_rejects_zero() {
        let n = 1000;
        let mut batch = batch_from_fn(n, |_| 2.0);
        let rms = normalize(&mut batch, "c").unwrap();
        assert!((rms - 2.0).abs() < 1e-12);
        assert!(batch.value.iter().all(|v| (*v - 1.0).abs() < 1e-12));
        let rms2 = normalize(&mut batch, "c").unwrap();
        assert!((rms2 - 1.0).abs() < 1e-12);

        let mut zero = batch_from_fn(n, |_| 0.0);
        assert!(matches!(normalize(&mut zero, "z"), Err(Error::DegenerateField { .. })));
    }

    #[test]
    fn degenerate_prefix_is_singular() {
        let n = 1000;
        let a = batch_from_fn(n, |x| x);
        let b = batch_from_fn(n, |x| 2.0 * x);
        let candidate = batch_from_fn(n, |x| x * x);
        let err = projection_coefficients(&candidate, &[&a, &b]).unwrap_err();
        assert!(matches!(err, Error::SingularPrefix(_)));
    }
}
