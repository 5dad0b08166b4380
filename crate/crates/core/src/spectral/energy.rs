//! Monte Carlo operator energies.
//!
//! All estimators are means over one shared cubature set, so domain-volume
//! factors cancel in every ratio the pipeline uses. Eigenvalues are Rayleigh
//! quotients: the quadratic form over the squared norm, both mean-estimated.

use crate::autodiff::batch::DualBatch;
use crate::error::{Error, Result};
use crate::field::{ElasticityParams, OperatorKind};

pub const RAYLEIGH_DENOM_FLOOR: f64 = 1e-12;

/// Mean squared gradient norm: `gradients` is `n x dim` row-major.
pub fn dirichlet_energy(gradients: &[f64], n: usize, dim: usize) -> f64 {
    debug_assert_eq!(gradients.len(), n * dim);
    let sum: f64 = gradients.iter().map(|g| g * g).sum();
    sum / n as f64
}

/// Rayleigh quotient `sum |grad|^2 / sum phi^2` over one cubature set.
pub fn dirichlet_rayleigh(gradients: &[f64], values: &[f64], n: usize, dim: usize) -> Result<f64> {
    debug_assert_eq!(gradients.len(), n * dim);
    debug_assert_eq!(values.len(), n);
    let denom: f64 = values.iter().map(|v| v * v).sum();
    if denom < RAYLEIGH_DENOM_FLOOR {
        return Err(Error::DegenerateField { mode: "rayleigh".into(), norm: denom.max(0.0).sqrt() });
    }
    let num: f64 = gradients.iter().map(|g| g * g).sum();
    Ok(num / denom)
}

/// Quadratic density of the small-strain energy at one Jacobian
/// (`jac[c * dim + w] = d phi_c / d x_w`): `mu |S|_F^2 + (lambda/2) tr^2(S)`.
pub fn strain_density(jac: &[f64], dim: usize, params: ElasticityParams) -> f64 {
    let mut frob = 0.0;
    let mut trace = 0.0;
    for c in 0..dim {
        for w in 0..dim {
            let s = jac[c * dim + w] + jac[w * dim + c];
            frob += s * s;
            if c == w {
                trace += s;
            }
        }
    }
    params.mu * frob + 0.5 * params.lambda * trace * trace
}

/// Monte Carlo estimate of the elastic energy `1/2 integral of the strain
/// density`, normalized by the sample count.
pub fn elastic_energy(jacobians: &[f64], n: usize, dim: usize, params: ElasticityParams) -> f64 {
    0.5 * elastic_quadratic_mean(jacobians, n, dim, params)
}

/// Mean strain density without the 1/2 factor: the elastic Rayleigh
/// numerator, matching the discrete `v^T K v` convention.
pub fn elastic_quadratic_mean(jacobians: &[f64], n: usize, dim: usize, params: ElasticityParams) -> f64 {
    debug_assert_eq!(jacobians.len(), n * dim * dim);
    let mut sum = 0.0;
    for j in 0..n {
        sum += strain_density(&jacobians[j * dim * dim..(j + 1) * dim * dim], dim, params);
    }
    sum / n as f64
}

/// Elastic Rayleigh quotient over one cubature set.
pub fn elastic_rayleigh(
    jacobians: &[f64],
    values: &[f64],
    n: usize,
    dim: usize,
    params: ElasticityParams,
) -> Result<f64> {
    debug_assert_eq!(values.len(), n * dim);
    let denom: f64 = values.iter().map(|v| v * v).sum();
    if denom < RAYLEIGH_DENOM_FLOOR {
        return Err(Error::DegenerateField { mode: "rayleigh".into(), norm: denom.max(0.0).sqrt() });
    }
    let mut num = 0.0;
    for j in 0..n {
        num += strain_density(&jacobians[j * dim * dim..(j + 1) * dim * dim], dim, params);
    }
    Ok(num / denom)
}

/// Flatten a dual batch's tangent planes into per-point Jacobians
/// (`n x dim x dim`, `[c][w]` layout).
pub fn batch_jacobians(batch: &DualBatch, dim: usize) -> Vec<f64> {
    let n = batch.rows;
    let ch = batch.cols;
    debug_assert_eq!(ch, dim);
    let mut out = vec![0.0; n * dim * dim];
    for w in 0..dim {
        let plane = batch.plane(w);
        for c in 0..ch {
            for j in 0..n {
                out[j * dim * dim + c * dim + w] = plane[c * n + j];
            }
        }
    }
    out
}

/// Eigenvalue of a unit-norm mode: the operator's Rayleigh numerator, mean
/// over the cubature.
pub fn batch_eigenvalue(
    operator: OperatorKind,
    batch: &DualBatch,
    dim: usize,
    params: Option<ElasticityParams>,
) -> f64 {
    let n = batch.rows;
    match operator {
        OperatorKind::Laplace => {
            let mut sum = 0.0;
            for w in 0..dim {
                sum += batch.plane(w).iter().map(|t| t * t).sum::<f64>();
            }
            sum / n as f64
        }
        OperatorKind::Elasticity => {
            let jac = batch_jacobians(batch, dim);
            elastic_quadratic_mean(&jac, n, dim, params.expect("elasticity params"))
        }
    }
}

/// Rayleigh quotient of a raw (not yet normalized) field batch; the causal
/// sorting key.
pub fn batch_rayleigh(
    operator: OperatorKind,
    batch: &DualBatch,
    dim: usize,
    params: Option<ElasticityParams>,
) -> Result<f64> {
    let n = batch.rows;
    match operator {
        OperatorKind::Laplace => {
            let mut grads = vec![0.0; n * dim];
            for w in 0..dim {
                let plane = batch.plane(w);
                for j in 0..n {
                    grads[j * dim + w] = plane[j];
                }
            }
            dirichlet_rayleigh(&grads, &batch.value, n, dim)
        }
        OperatorKind::Elasticity => {
            let jac = batch_jacobians(batch, dim);
            elastic_rayleigh(&jac, &batch.value, n, dim, params.expect("elasticity params"))
        }
    }
}

/// Stable ascending sort of mode energies; ties keep the original index
/// order. Fails on non-finite keys.
pub fn rayleigh_sort(energies: &[f64]) -> Result<Vec<usize>> {
    if let Some(bad) = energies.iter().position(|e| e.is_nan()) {
        return Err(Error::Numeric(format!("NaN Rayleigh energy for mode {bad}")));
    }
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|a, b| energies[*a].partial_cmp(&energies[*b]).unwrap());
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_values<F: Fn(f64) -> f64>(n: usize, f: F) -> Vec<f64> {
        // Midpoint grid over [0, 1]: deterministic stand-in for cubature.
        (0..n).map(|j| f((j as f64 + 0.5) / n as f64)).collect()
    }

    #[test]
    fn constant_field_has_zero_energy() {
        let grads = vec![0.0; 100];
        assert_eq!(dirichlet_energy(&grads, 100, 1), 0.0);
    }

    #[test]
    fn linear_field_rayleigh_is_three() {
        let n = 20_000;
        let values = grid_values(n, |x| x);
        let grads = vec![1.0; n];
        let q = dirichlet_rayleigh(&grads, &values, n, 1).unwrap();
        // integral of 1 over integral of x^2 = 3 up to quadrature error.
        assert!((q - 3.0).abs() < 1e-3, "{q}");
    }

    #[test]
    fn first_interval_mode_energy_is_pi_squared() {
        let n = 20_000;
        let pi = std::f64::consts::PI;
        let grads = grid_values(n, |x| -(2.0f64).sqrt() * pi * (pi * x).sin());
        let e = dirichlet_energy(&grads, n, 1);
        assert!((e - pi * pi).abs() < 1e-2, "{e}");
    }

    #[test]
    fn degenerate_rayleigh_denominator_errors() {
        let values = vec![0.0; 10];
        let grads = vec![1.0; 10];
        assert!(matches!(
            dirichlet_rayleigh(&grads, &values, 10, 1),
            Err(Error::DegenerateField { .. })
        ));
    }

    #[test]
    fn rigid_jacobians_have_zero_elastic_energy() {
        let params = ElasticityParams { mu: 1.0, lambda: 1.0 };
        // Skew Jacobian (rotation) and zero Jacobian (translation).
        let rot = vec![0.0, -1.0, 1.0, 0.0];
        let tra = vec![0.0; 4];
        assert_eq!(elastic_energy(&rot, 1, 2, params), 0.0);
        assert_eq!(elastic_energy(&tra, 1, 2, params), 0.0);
    }

    #[test]
    fn uniform_dilation_energy_matches_direct_substitution() {
        let params = ElasticityParams { mu: 1.0, lambda: 1.0 };
        let jac = vec![1.0, 0.0, 0.0, 1.0];
        // S = 2I: (1/2)(mu*8 + (lambda/2)*16) = 8 per unit area.
        assert_eq!(elastic_energy(&jac, 1, 2, params), 8.0);
    }

    #[test]
    fn sort_is_stable_ascending() {
        assert_eq!(rayleigh_sort(&[5.0, 2.0, 9.0]).unwrap(), vec![1, 0, 2]);
        assert_eq!(rayleigh_sort(&[3.0, 3.0]).unwrap(), vec![0, 1]);
        assert_eq!(rayleigh_sort(&[7.0]).unwrap(), vec![0]);
        assert!(rayleigh_sort(&[1.0, f64::NAN]).is_err());
    }
}
