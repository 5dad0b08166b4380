//! Sign-resolved mode matching and the learned-vs-discrete comparison
//! protocol.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{EigenFieldSet, OperatorKind};
use crate::oracle::cotan::cotan_laplacian;
use crate::oracle::eig::{dense_sym_eig, OracleModes, OracleSource};
use crate::oracle::fem::fem_elastic_stiffness;
use crate::oracle::mesh::TriMesh;
use crate::shapespace::{sample_domain, GeometryCode, ShapeFamily};
use crate::spectral::evaluate::evaluate_on_points;
use crate::spectral::eval_chain_at;

/// Sign-resolved MSE between two sampled functions.
///
/// Both sides are normalized to unit RMS first; the result is the smaller of
/// the MSE against the reference and against its negation.
pub fn mode_match(f: &[f64], r: &[f64]) -> f64 {
    assert_eq!(f.len(), r.len());
    let n = f.len() as f64;
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
    let (fr, rr) = (rms(f), rms(r));
    let fs = if fr > 0.0 { 1.0 / fr } else { 0.0 };
    let rs = if rr > 0.0 { 1.0 / rr } else { 0.0 };
    let mut plus = 0.0;
    let mut minus = 0.0;
    for (a, b) in f.iter().zip(r) {
        let (a, b) = (a * fs, b * rs);
        plus += (a - b) * (a - b);
        minus += (a + b) * (a + b);
    }
    (plus / n).min(minus / n)
}

/// Greedy pairing by repeatedly taking the globally smallest match score.
/// Every row (learned mode) is paired with a distinct column (reference).
pub fn greedy_match(scores: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = scores.len();
    if rows == 0 {
        return vec![];
    }
    let cols = scores[0].len();
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut pairs = Vec::with_capacity(rows.min(cols));
    for _ in 0..rows.min(cols) {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..rows {
            if row_used[i] {
                continue;
            }
            for j in 0..cols {
                if !col_used[j] && scores[i][j] < best.2 {
                    best = (i, j, scores[i][j]);
                }
            }
        }
        let (i, j, _) = best;
        row_used[i] = true;
        col_used[j] = true;
        pairs.push((i, j));
    }
    pairs.sort_by_key(|p| p.0);
    pairs
}

#[derive(Debug, Clone)]
pub struct ModeReport {
    /// Learned mode index (within the learned block).
    pub learned: usize,
    /// Index into the oracle's nonzero modes.
    pub oracle: usize,
    pub eigenvalue_learned: f64,
    pub eigenvalue_oracle: f64,
    pub eigenvalue_rel_err: f64,
    pub match_mse: f64,
}

#[derive(Debug, Clone)]
pub struct OracleComparison {
    pub per_mode: Vec<ModeReport>,
    pub mean_eigenvalue_rel_err: f64,
    pub mean_match_mse: f64,
    /// Requested mode count after clamping to the trained budget.
    pub modes_compared: usize,
}

/// Compare a single-shape model against the discrete operator on a mesh.
///
/// Learned modes are evaluated at the mesh vertices through the projection
/// chain fitted on an interior cubature; references are mass-orthonormal
/// eigenvectors of the cotangent Laplacian or the elastic FEM stiffness.
/// Pairs are formed greedily by minimal sign-resolved MSE, then per-pair
/// eigenvalue errors are reported.
pub fn compare_model_to_mesh(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    mesh: &TriMesh,
    modes_requested: usize,
    n_cubature: usize,
    rng: &mut ChaCha8Rng,
) -> Result<OracleComparison> {
    if set.d_g != 0 {
        return Err(Error::InvalidConfig(
            "oracle comparison expects a single-shape model (pin the family first)".into(),
        ));
    }
    let k = if modes_requested > set.learned_count() {
        log::warn!(
            "requested {modes_requested} modes but the model has {}; clamping",
            set.learned_count()
        );
        set.learned_count()
    } else {
        modes_requested
    };
    let g = GeometryCode::empty();
    let cubature = sample_domain(family, &g, n_cubature, rng)?;
    let eval = evaluate_on_points(set, family, &g, &cubature.points, cubature.n, false)?;
    let vertex_modes = eval_chain_at(set, family, &eval.chain, &g, &mesh.vertices, mesh.vertex_count())?;

    let (oracle, zero_count) = mesh_oracle(set, mesh)?;
    let known = set.known_count();
    if zero_count != known {
        log::warn!(
            "discrete operator has {zero_count} near-zero modes, model hard-codes {known}"
        );
    }
    let candidates = (k + 4).min(oracle.eigenvalues.len() - zero_count);
    if candidates < k {
        return Err(Error::InvalidConfig(format!(
            "mesh only supports {candidates} nonzero reference modes, need {k}"
        )));
    }

    // Discrete eigenvectors interleave components per vertex; flatten the
    // learned feature-major batches to match.
    let m = mesh.vertex_count();
    let out_w = set.output_width();
    let learned_flat: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let batch = &vertex_modes[known + i];
            let mut flat = vec![0.0; m * out_w];
            for c in 0..out_w {
                for j in 0..m {
                    flat[j * out_w + c] = batch.value[c * m + j];
                }
            }
            flat
        })
        .collect();
    let mut scores = vec![vec![0.0; candidates]; k];
    for (i, row) in scores.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = mode_match(&learned_flat[i], oracle.vector(zero_count + j));
        }
    }
    let pairs = greedy_match(&scores);

    let mut per_mode = Vec::with_capacity(pairs.len());
    let mut sum_rel = 0.0;
    let mut sum_mse = 0.0;
    for (i, j) in pairs {
        let lam_l = eval.spectrum.eigenvalues[known + i];
        let lam_o = oracle.eigenvalues[zero_count + j];
        let rel = (lam_l - lam_o).abs() / lam_o.abs().max(1e-300);
        sum_rel += rel;
        sum_mse += scores[i][j];
        per_mode.push(ModeReport {
            learned: i,
            oracle: j,
            eigenvalue_learned: lam_l,
            eigenvalue_oracle: lam_o,
            eigenvalue_rel_err: rel,
            match_mse: scores[i][j],
        });
    }
    let count = per_mode.len().max(1) as f64;
    Ok(OracleComparison {
        modes_compared: per_mode.len(),
        mean_eigenvalue_rel_err: sum_rel / count,
        mean_match_mse: sum_mse / count,
        per_mode,
    })
}

/// Assemble and solve the discrete operator for the model's kind.
/// Returns the modes and the count of leading near-zero eigenvalues.
pub fn mesh_oracle(set: &EigenFieldSet, mesh: &TriMesh) -> Result<(OracleModes, usize)> {
    let oracle = match set.operator {
        OperatorKind::Laplace => {
            let (stiffness, mass) = cotan_laplacian(mesh)?;
            dense_sym_eig(&stiffness, mesh.vertex_count(), &mass, OracleSource::Cotan)?
        }
        OperatorKind::Elasticity => {
            let params = set.elasticity_params()?;
            let (stiffness, mass) = fem_elastic_stiffness(mesh, params)?;
            dense_sym_eig(&stiffness, 2 * mesh.vertex_count(), &mass, OracleSource::FemElastic)?
        }
    };
    let scale = oracle.eigenvalues.last().map(|v| v.abs()).unwrap_or(1.0);
    let tol = (1e-10 * scale).max(1e-8);
    let zero_count = oracle.eigenvalues.iter().take_while(|v| v.abs() < tol).count();
    Ok((oracle, zero_count))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_resolves_sign() {
        let f: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        assert!(mode_match(&f, &neg) < 1e-28);
        assert!(mode_match(&f, &f) < 1e-28);
    }

    #[test]
    fn orthogonal_modes_score_two() {
        let n = 1000;
        let pi = std::f64::consts::PI;
        let f: Vec<f64> = (0..n).map(|j| {
            let x = (j as f64 + 0.5) / n as f64;
            2f64.sqrt() * (pi * x).cos()
        }).collect();
        let r: Vec<f64> = (0..n).map(|j| {
            let x = (j as f64 + 0.5) / n as f64;
            2f64.sqrt() * (2.0 * pi * x).cos()
        }).collect();
        let mse = mode_match(&f, &r);
        assert!((mse - 2.0).abs() < 0.01, "{mse}");
    }

    #[test]
    fn greedy_matching_prefers_global_minima() {
        let scores = vec![vec![0.5, 0.1, 0.9], vec![0.2, 0.15, 0.8]];
        let pairs = greedy_match(&scores);
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
    }
}
