//! Hard-coded zero-eigenvalue modes.
//!
//! The constant function for the Laplace operator; rigid translations and
//! linearized rotations about the shape's box center for elasticity. These
//! are analytic, carry no parameters, and always head the causal order.

use crate::autodiff::batch::DualBatch;
use crate::field::OperatorKind;

pub fn known_mode_count(operator: OperatorKind, dim: usize) -> usize {
    match operator {
        OperatorKind::Laplace => 1,
        OperatorKind::Elasticity => dim + dim * (dim - 1) / 2,
    }
}

/// Index pairs (i, j), i < j, generating the linearized rotations.
fn rotation_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Evaluate known mode `m` on a batch of points (`n x dim`, row-major).
///
/// The result has `width` tangent planes with the spatial Jacobian in planes
/// `0..dim` and zeros elsewhere.
pub fn known_mode_values(
    operator: OperatorKind,
    dim: usize,
    m: usize,
    center: &[f64],
    points: &[f64],
    n: usize,
    width: usize,
) -> DualBatch {
    match operator {
        OperatorKind::Laplace => {
            assert_eq!(m, 0, "Laplace has a single known mode");
            let mut out = DualBatch::zeros(n, 1, width);
            out.value.iter_mut().for_each(|v| *v = 1.0);
            out
        }
        OperatorKind::Elasticity => {
            let mut out = DualBatch::zeros(n, dim, width);
            if m < dim {
                // Rigid translation along axis m.
                out.value[m * n..(m + 1) * n].iter_mut().for_each(|v| *v = 1.0);
            } else {
                let (i, jj) = rotation_pairs(dim)[m - dim];
                // Skew generator: phi_i = -(x_j - c_j), phi_j = (x_i - c_i).
                for p in 0..n {
                    let xi = points[p * dim + i] - center[i];
                    let xj = points[p * dim + jj] - center[jj];
                    out.value[i * n + p] = -xj;
                    out.value[jj * n + p] = xi;
                }
                // Constant Jacobian: d phi_i / d x_j = -1, d phi_j / d x_i = 1.
                let len = n * dim;
                for p in 0..n {
                    out.tan[jj * len + i * n + p] = -1.0;
                    out.tan[i * len + jj * n + p] = 1.0;
                }
            }
            out
        }
    }
}
