//! Recorded inference chain: feature assembly, raw mode evaluation, and the
//! projection/normalization steps as tape operations.
//!
//! The Gram solve itself runs off-tape on primal values; the recorded chain
//! then rebuilds the coefficients as `c = c* + G^-1 (b - G c*)`, which has
//! the solve's exact first-order behavior. Causal gradient filtering is just
//! stop-gradient on the prefix entries, so the same construction covers both
//! the filtered and the unfiltered (ablation) paths.

use crate::autodiff::batch::DualBatch;
use crate::autodiff::{NodeId, Tape};
use crate::error::Result;
use crate::field::{EigenFieldSet, OperatorKind};
use crate::linalg;
use crate::shapespace::GeometryCode;
use crate::spectral::project::{GRAM_CONDITION_WARN, NORM_FLOOR};
use crate::Error;

/// How the geometry code enters the recorded features.
pub enum GeometrySource<'a> {
    /// Constant per-epoch code (training).
    Fixed(&'a GeometryCode),
    /// Trainable leaf of shape `[d_g, 1]` (shape optimization).
    Leaf(NodeId),
}

/// Record the MLP input features for a cubature batch.
pub fn tape_features(
    tape: &mut Tape,
    set: &EigenFieldSet,
    g: GeometrySource,
    points: &[f64],
    n: usize,
) -> Result<NodeId> {
    let dim = set.spatial_dim;
    assert_eq!(points.len(), n * dim);
    assert!(tape.width() >= dim);
    // Feature-major positions with coordinate-direction tangent seeds.
    let mut values = vec![0.0; n * dim];
    for j in 0..n {
        for c in 0..dim {
            values[c * n + j] = points[j * dim + c];
        }
    }
    let mut seeds = vec![0.0; tape.width() * n * dim];
    for w in 0..dim {
        seeds[w * n * dim + w * n..w * n * dim + (w + 1) * n].iter_mut().for_each(|v| *v = 1.0);
    }
    let pos = tape.input(n, dim, values, seeds)?;
    let enc_x = set.encoding.encode_tape(tape, pos)?;
    if set.d_g == 0 {
        return Ok(enc_x);
    }
    let gcols = match g {
        GeometrySource::Fixed(code) => {
            assert_eq!(code.dim(), set.d_g);
            let mut tiled = Vec::with_capacity(n * set.d_g);
            for _ in 0..n {
                tiled.extend_from_slice(code.as_slice());
            }
            tape.constant(n, set.d_g, tiled)?
        }
        GeometrySource::Leaf(leaf) => {
            // Broadcast the [d_g, 1] leaf over the batch with an affine map:
            // ones[n,1] * leaf^T reproduces the code per row and keeps the
            // reverse path into the leaf.
            let ones = tape.input(n, 1, vec![1.0; n], vec![0.0; tape.width() * n])?;
            let zero_bias = tape.constant(1, set.d_g, vec![0.0; set.d_g])?;
            tape.linear(ones, leaf, zero_bias)?
        }
    };
    let gfeat = if set.encode_geometry { set.encoding.encode_tape(tape, gcols)? } else { gcols };
    tape.concat(&[enc_x, gfeat])
}

/// Record raw forward passes for every learned mode. Returns the output
/// nodes and the per-mode parameter leaves.
#[allow(clippy::type_complexity)]
pub fn tape_raw_modes(
    tape: &mut Tape,
    set: &EigenFieldSet,
    feat: NodeId,
) -> Result<(Vec<NodeId>, Vec<Vec<(NodeId, NodeId)>>)> {
    let mut raws = Vec::with_capacity(set.modes.len());
    let mut params = Vec::with_capacity(set.modes.len());
    for mode in &set.modes {
        let leaves = mode.tape_params(tape)?;
        let out = mode.tape_forward(tape, &leaves, feat)?;
        raws.push(out);
        params.push(leaves);
    }
    Ok((raws, params))
}

/// Copy a node's primal values and tangents into a plain batch.
pub fn batch_from_node(tape: &Tape, id: NodeId) -> DualBatch {
    let (rows, cols) = tape.shape(id);
    let width = tape.width();
    let mut batch = DualBatch::zeros(rows, cols, width);
    batch.value.copy_from_slice(tape.value(id));
    for w in 0..width {
        let len = rows * cols;
        batch.tan[w * len..(w + 1) * len].copy_from_slice(tape.tangent(id, w));
    }
    batch
}

pub struct ProjectionOutcome {
    /// Unit-norm projected mode.
    pub phi: NodeId,
    /// Coefficients of the dominating prefix (primal values).
    pub coeffs: Vec<f64>,
    /// RMS norm divided out during normalization.
    pub rms: f64,
}

fn mean_of(values: &[f64], n: usize) -> f64 {
    values.iter().sum::<f64>() / n as f64
}

fn mean_product(a: &[f64], b: &[f64], n: usize) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / n as f64
}

/// Record one Gram-Schmidt projection plus normalization.
///
/// `prefix` nodes must already be stop-wrapped when causal filtering is on;
/// `filtered` only controls whether the recorded coefficient correction
/// carries the prefix-side Gram terms (pointless when they are stopped).
pub fn tape_project_normalize(
    tape: &mut Tape,
    raw: NodeId,
    prefix: &[NodeId],
    filtered: bool,
    exact_norm: bool,
    label: &str,
) -> Result<ProjectionOutcome> {
    let (n, _) = tape.shape(raw);
    let m = prefix.len();
    let inv_n = tape.scalar(1.0 / n as f64)?;

    let coeff_nodes: Vec<NodeId> = if m == 0 {
        vec![]
    } else {
        // Primal Gram system.
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = mean_product(tape.value(prefix[i]), tape.value(prefix[j]), n);
                gram[i * m + j] = v;
                gram[j * m + i] = v;
            }
        }
        let mut rhs = vec![0.0; m];
        for i in 0..m {
            rhs[i] = mean_product(tape.value(prefix[i]), tape.value(raw), n);
        }
        let (inv, cond) = linalg::inv_sym(&gram, m)
            .map_err(|e| Error::SingularPrefix(format!("{label}: {e}")))?;
        if cond > GRAM_CONDITION_WARN {
            log::warn!("{label}: near-degenerate projection prefix, condition {cond:.3e}");
        }
        let mut c_star = vec![0.0; m];
        for i in 0..m {
            for j in 0..m {
                c_star[i] += inv[i * m + j] * rhs[j];
            }
        }

        // Recorded inner products b_i = <prefix_i, raw>.
        let mut b_nodes = Vec::with_capacity(m);
        for p in prefix {
            let prod = tape.mul(*p, raw)?;
            let s = tape.sum_all(prod)?;
            b_nodes.push(tape.mul(s, inv_n)?);
        }
        // Defect e_i = b_i - (G c*)_i; zero primal up to solver rounding,
        // carrying exactly the solve's differential.
        let mut e_nodes = Vec::with_capacity(m);
        if filtered {
            // Prefix entries are gradient-stopped: their Gram matrix is a
            // constant, so only the recorded b side matters.
            for i in 0..m {
                let gc: f64 = (0..m).map(|j| gram[i * m + j] * c_star[j]).sum();
                let gc_const = tape.scalar(gc)?;
                e_nodes.push(tape.sub(b_nodes[i], gc_const)?);
            }
        } else {
            for i in 0..m {
                let mut acc: Option<NodeId> = None;
                for j in 0..m {
                    let prod = tape.mul(prefix[i], prefix[j])?;
                    let s = tape.sum_all(prod)?;
                    let gij = tape.mul(s, inv_n)?;
                    let cj = tape.scalar(c_star[j])?;
                    let term = tape.mul(gij, cj)?;
                    acc = Some(match acc {
                        None => term,
                        Some(a) => tape.add(a, term)?,
                    });
                }
                e_nodes.push(tape.sub(b_nodes[i], acc.unwrap())?);
            }
        }
        let mut coeff_nodes = Vec::with_capacity(m);
        for i in 0..m {
            let mut acc = tape.scalar(c_star[i])?;
            for j in 0..m {
                let w = inv[i * m + j];
                if w != 0.0 {
                    let wc = tape.scalar(w)?;
                    let term = tape.mul(wc, e_nodes[j])?;
                    acc = tape.add(acc, term)?;
                }
            }
            coeff_nodes.push(acc);
        }
        coeff_nodes
    };

    let mut residual = raw;
    for (c, p) in coeff_nodes.iter().zip(prefix) {
        let term = tape.mul(*c, *p)?;
        residual = tape.sub(residual, term)?;
    }

    let ms = mean_product(tape.value(residual), tape.value(residual), n);
    let rms = ms.sqrt();
    if !(rms > NORM_FLOOR) {
        return Err(Error::DegenerateField { mode: label.to_string(), norm: rms });
    }
    let phi = if exact_norm {
        let sq = tape.mul(residual, residual)?;
        let s = tape.sum_all(sq)?;
        let mean = tape.mul(s, inv_n)?;
        let inv_norm = tape.powc(mean, -0.5)?;
        tape.mul(residual, inv_norm)?
    } else {
        // Norm treated as a constant in both derivative paths.
        let inv_norm = tape.scalar(1.0 / rms)?;
        tape.mul(residual, inv_norm)?
    };
    let coeffs = coeff_nodes.iter().map(|c| tape.value(*c)[0]).collect();
    Ok(ProjectionOutcome { phi, coeffs, rms })
}

/// Record the per-mode energy loss for a unit-norm field.
pub fn tape_mode_loss(tape: &mut Tape, set: &EigenFieldSet, phi: NodeId) -> Result<NodeId> {
    let (n, _) = tape.shape(phi);
    let dim = set.spatial_dim;
    let inv_n = tape.scalar(1.0 / n as f64)?;
    let integrand = match set.operator {
        OperatorKind::Laplace => tape.tangent_sq_sum(phi, 0, dim)?,
        OperatorKind::Elasticity => {
            let p = set.elasticity_params()?;
            tape.strain_energy_density(phi, p.mu, p.lambda, true)?
        }
    };
    let s = tape.sum_all(integrand)?;
    tape.mul(s, inv_n)
}

/// Record the eigenvalue of a unit-norm field: the operator's Rayleigh
/// numerator (no 1/2), matching the discrete `v^T K v / v^T M v` convention.
pub fn tape_mode_eigenvalue(tape: &mut Tape, set: &EigenFieldSet, phi: NodeId) -> Result<NodeId> {
    let (n, _) = tape.shape(phi);
    let dim = set.spatial_dim;
    let inv_n = tape.scalar(1.0 / n as f64)?;
    let integrand = match set.operator {
        OperatorKind::Laplace => tape.tangent_sq_sum(phi, 0, dim)?,
        OperatorKind::Elasticity => {
            let p = set.elasticity_params()?;
            tape.strain_energy_density(phi, p.mu, p.lambda, false)?
        }
    };
    let s = tape.sum_all(integrand)?;
    tape.mul(s, inv_n)
}

/// Drop-in check used by tests: mean of `values` (kept crate-public to share
/// the exact reduction order with the recorded sums).
pub fn mean_value(values: &[f64], n: usize) -> f64 {
    mean_of(values, n)
}
