//! Small dense symmetric helpers shared by the projection solve and the
//! discrete oracle eigensolver.

use crate::error::{Error, Result};

/// Cyclic Jacobi diagonalization of a symmetric matrix (row-major `n x n`).
///
/// Returns unsorted eigenvalues and the transpose of the eigenvector matrix:
/// `vecs_t` row `j` is the eigenvector for `vals[j]`. Iterates sweeps until
/// the off-diagonal Frobenius norm drops below `tol`.
///
/// Rotations are applied row-wise on the full matrix (symmetry is restored by
/// mirroring the two rotated rows into their columns), which keeps the hot
/// loops contiguous for large `n`.
pub fn sym_eig_jacobi(a: &mut [f64], n: usize, tol: f64, max_sweeps: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(a.len(), n * n);
    let mut vecs_t = vec![0.0; n * n];
    for i in 0..n {
        vecs_t[i * n + i] = 1.0;
    }
    if n <= 1 {
        let vals = if n == 1 { vec![a[0]] } else { vec![] };
        return Ok((vals, vecs_t));
    }

    let mut row_p = vec![0.0; n];
    let mut row_q = vec![0.0; n];
    for sweep in 0..max_sweeps {
        let off = off_diagonal_norm(a, n);
        if off < tol {
            let vals = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((vals, vecs_t));
        }
        // Skip near-converged pairs early in the sweep; threshold shrinks to
        // zero so convergence is still driven to `tol`.
        let skip = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= skip {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                if apq == 0.0 {
                    continue;
                }
                // Stable rotation angle (Numerical Recipes style).
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                row_p.copy_from_slice(&a[p * n..p * n + n]);
                row_q.copy_from_slice(&a[q * n..q * n + n]);
                // Rows of J^T A.
                for r in 0..n {
                    let u = row_p[r];
                    let v = row_q[r];
                    row_p[r] = c * u - s * v;
                    row_q[r] = s * u + c * v;
                }
                // Rotate the (p,q) block of the result columns.
                let upp = row_p[p];
                let upq = row_p[q];
                let uqp = row_q[p];
                let uqq = row_q[q];
                row_p[p] = c * upp - s * upq;
                row_p[q] = s * upp + c * upq;
                row_q[p] = c * uqp - s * uqq;
                row_q[q] = s * uqp + c * uqq;
                // Symmetrize the rotated pair exactly.
                row_p[q] = 0.5 * (row_p[q] + row_q[p]);
                row_q[p] = row_p[q];

                a[p * n..p * n + n].copy_from_slice(&row_p);
                a[q * n..q * n + n].copy_from_slice(&row_q);
                for r in 0..n {
                    if r != p && r != q {
                        a[r * n + p] = row_p[r];
                        a[r * n + q] = row_q[r];
                    }
                }
                // Accumulate eigenvectors: rows of V^T rotate like rows of A.
                let (vp, vq) = two_rows_mut(&mut vecs_t, n, p, q);
                for r in 0..n {
                    let u = vp[r];
                    let v = vq[r];
                    vp[r] = c * u - s * v;
                    vq[r] = s * u + c * v;
                }
            }
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi eigensolver did not reach off-diagonal norm {tol:.1e} in {max_sweeps} sweeps (n = {n})"
    )))
}

fn two_rows_mut(m: &mut [f64], n: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (head, tail) = m.split_at_mut(q * n);
    (&mut head[p * n..p * n + n], &mut tail[..n])
}

pub fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                sum += a[p * n + q] * a[p * n + q];
            }
        }
    }
    sum.sqrt()
}

/// Eigenvalues only, ascending. Convenience for condition checks.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut work = a.to_vec();
    let (mut vals, _) = sym_eig_jacobi(&mut work, n, 1e-12 * (1.0 + off_diagonal_norm(a, n)), 60)?;
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(vals)
}

/// Solve a small symmetric system `A x = b` through the spectral
/// decomposition, reporting the condition number of `A`.
///
/// Fails when the spectrum indicates a singular matrix.
pub fn solve_sym(a: &[f64], n: usize, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    assert_eq!(b.len(), n);
    if n == 0 {
        return Ok((vec![], 1.0));
    }
    let mut work = a.to_vec();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let (vals, vecs_t) = sym_eig_jacobi(&mut work, n, 1e-14 * scale * n as f64, 60)?;
    let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_abs = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min_abs > 0.0) || min_abs < 1e-14 * max_abs {
        return Err(Error::SingularPrefix(format!(
            "eigenvalue range [{min_abs:.3e}, {max_abs:.3e}] in a {n}x{n} system"
        )));
    }
    // x = V diag(1/lambda) V^T b
    let mut x = vec![0.0; n];
    for j in 0..n {
        let row = &vecs_t[j * n..j * n + n];
        let proj: f64 = row.iter().zip(b).map(|(v, w)| v * w).sum();
        let coeff = proj / vals[j];
        for i in 0..n {
            x[i] += coeff * row[i];
        }
    }
    Ok((x, max_abs / min_abs))
}

/// Inverse of a small symmetric matrix through its spectral decomposition,
/// with the condition number. Fails when numerically singular.
pub fn inv_sym(a: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    if n == 0 {
        return Ok((vec![], 1.0));
    }
    let mut work = a.to_vec();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let (vals, vecs_t) = sym_eig_jacobi(&mut work, n, 1e-14 * scale * n as f64, 60)?;
    let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_abs = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(min_abs > 0.0) || min_abs < 1e-14 * max_abs {
        return Err(Error::SingularPrefix(format!(
            "eigenvalue range [{min_abs:.3e}, {max_abs:.3e}] in a {n}x{n} system"
        )));
    }
    let mut inv = vec![0.0; n * n];
    for m in 0..n {
        let row = &vecs_t[m * n..m * n + n];
        let s = 1.0 / vals[m];
        for i in 0..n {
            for j in 0..n {
                inv[i * n + j] += s * row[i] * row[j];
            }
        }
    }
    Ok((inv, max_abs / min_abs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let (inv, _) = inv_sym(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut sum = 0.0;
                for m in 0..3 {
                    sum += inv[i * 3 + m] * a[m * 3 + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((sum - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let mut a = vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let (mut vals, _) = sym_eig_jacobi(&mut a, 3, 1e-12, 30).unwrap();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let mut a = vec![2.0, 1.0, 1.0, 2.0];
        let (mut vals, _) = sym_eig_jacobi(&mut a, 2, 1e-14, 30).unwrap();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_recovers_known_vector() {
        // A = [[4,1],[1,3]], x = (1, -2) => b = (2, -5)
        let a = vec![4.0, 1.0, 1.0, 3.0];
        let b = vec![2.0, -5.0];
        let (x, cond) = solve_sym(&a, 2, &b).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] + 2.0).abs() < 1e-12);
        assert!(cond > 1.0 && cond < 10.0);
    }

    #[test]
    fn eigenvectors_reconstruct_the_matrix() {
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let mut work = a.clone();
        let (vals, vecs_t) = sym_eig_jacobi(&mut work, 3, 1e-13, 40).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut sum = 0.0;
                for m in 0..3 {
                    sum += vals[m] * vecs_t[m * 3 + i] * vecs_t[m * 3 + j];
                }
                assert!((sum - a[i * 3 + j]).abs() < 1e-10);
            }
        }
    }
}
