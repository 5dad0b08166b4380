//! Dense generalized symmetric eigensolver for the discrete oracles.

use crate::error::{Error, Result};
use crate::linalg;

pub const MAX_DENSE_DIM: usize = 4000;
pub const OFF_DIAGONAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleSource {
    Analytic,
    Cotan,
    FemElastic,
}

/// Reference eigenpairs: ascending eigenvalues with mass-orthonormal
/// eigenvectors (`v_i^T M v_j = delta_ij`).
#[derive(Debug, Clone)]
pub struct OracleModes {
    pub eigenvalues: Vec<f64>,
    /// Vector `j` occupies `eigenvectors[j*m..(j+1)*m]`.
    pub eigenvectors: Vec<f64>,
    pub m: usize,
    pub source: OracleSource,
}

impl OracleModes {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.eigenvectors[j * self.m..(j + 1) * self.m]
    }
}

/// Solve `A v = lambda M v` for symmetric `A` and diagonal positive `M`
/// by the `M^{-1/2}` similarity transform followed by cyclic Jacobi
/// rotations driven below an off-diagonal norm of `1e-10`.
pub fn dense_sym_eig(a: &[f64], m: usize, mass: &[f64], source: OracleSource) -> Result<OracleModes> {
    if m > MAX_DENSE_DIM {
        return Err(Error::InvalidConfig(format!(
            "dense eigensolver capped at {MAX_DENSE_DIM}, got {m}"
        )));
    }
    assert_eq!(a.len(), m * m);
    assert_eq!(mass.len(), m);
    for (i, v) in mass.iter().enumerate() {
        if !(*v > 0.0) {
            return Err(Error::InvalidConfig(format!("mass entry {i} = {v} is not positive")));
        }
    }
    let mut asym: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            asym = asym.max((a[i * m + j] - a[j * m + i]).abs());
        }
    }
    if asym > 1e-9 {
        return Err(Error::Numeric(format!("matrix is not symmetric (max asymmetry {asym:.3e})")));
    }

    let inv_sqrt: Vec<f64> = mass.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut b = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            b[i * m + j] = a[i * m + j] * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    // Exact symmetry for the rotation sweeps.
    for i in 0..m {
        for j in i + 1..m {
            let v = 0.5 * (b[i * m + j] + b[j * m + i]);
            b[i * m + j] = v;
            b[j * m + i] = v;
        }
    }
    let (vals, vecs_t) = linalg::sym_eig_jacobi(&mut b, m, OFF_DIAGONAL_TOL, 60)?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|x, y| vals[*x].partial_cmp(&vals[*y]).unwrap());
    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenvectors = vec![0.0; m * m];
    for (slot, &src) in order.iter().enumerate() {
        eigenvalues.push(vals[src]);
        let row = &vecs_t[src * m..(src + 1) * m];
        let dst = &mut eigenvectors[slot * m..(slot + 1) * m];
        for i in 0..m {
            dst[i] = row[i] * inv_sqrt[i];
        }
    }
    Ok(OracleModes { eigenvalues, eigenvectors, m, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn diagonal_system_sorts_ascending() {
        let a = vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let m = vec![1.0, 1.0, 1.0];
        let modes = dense_sym_eig(&a, 3, &m, OracleSource::Analytic).unwrap();
        assert!((modes.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((modes.eigenvalues[1] - 2.0).abs() < 1e-12);
        assert!((modes.eigenvalues[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = vec![2.0, 1.0, 1.0, 2.0];
        let m = vec![1.0, 1.0];
        let modes = dense_sym_eig(&a, 2, &m, OracleSource::Analytic).unwrap();
        assert!((modes.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((modes.eigenvalues[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_spd_residuals_are_small() {
        let mut rng = crate::rng::stream(31, "eig", 0);
        let n = 200;
        // A = C^T C + n I is comfortably SPD; M random positive diagonal.
        let mut c = vec![0.0; n * n];
        c.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += c[k * n + i] * c[k * n + j];
                }
                a[i * n + j] = acc + if i == j { n as f64 } else { 0.0 };
            }
        }
        let mass: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let modes = dense_sym_eig(&a, n, &mass, OracleSource::Analytic).unwrap();
        for j in (0..n).step_by(29) {
            let v = modes.vector(j);
            let lambda = modes.eigenvalues[j];
            let mut residual: f64 = 0.0;
            for i in 0..n {
                let mut av = 0.0;
                for k in 0..n {
                    av += a[i * n + k] * v[k];
                }
                residual = residual.max((av - lambda * mass[i] * v[i]).abs());
            }
            assert!(residual < 1e-8, "mode {j}: residual {residual:.3e}");
        }
        // Mass-orthonormality.
        for i in [0usize, 57, 123] {
            for j in [0usize, 57, 123] {
                let mut dot = 0.0;
                for k in 0..n {
                    dot += modes.vector(i)[k] * mass[k] * modes.vector(j)[k];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8, "({i},{j}): {dot}");
            }
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let a = vec![1.0, 0.5, 0.0, 1.0];
        let m = vec![1.0, 1.0];
        assert!(matches!(
            dense_sym_eig(&a, 2, &m, OracleSource::Analytic),
            Err(Error::Numeric(_))
        ));
    }
}
