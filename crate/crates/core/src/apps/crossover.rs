//! Crossover detection along shape-space paths.
//!
//! Where two eigenvalues exchange dominance, the eigenfunctions' shape
//! derivatives spike; the cubature-averaged squared norm of the
//! geometry-code gradient is the indicator curve.

use crate::error::{Error, Result};
use crate::field::EigenFieldSet;
use crate::rng;
use crate::shapespace::{sample_domain, GeometryCode, ShapeFamily};
use crate::spectral::evaluate::evaluate_on_points;

#[derive(Debug, Clone)]
pub struct CrossoverScan {
    pub path: Vec<GeometryCode>,
    /// Per path sample: eigenvalues in mode-identity order.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Per path sample: mean over the cubature of `|d phi_i / d g|^2`,
    /// mode-identity order.
    pub shape_gradient_sq: Vec<Vec<f64>>,
}

/// Evaluate eigenvalues and shape-gradient norms at each path sample.
///
/// Every sample reuses the same cubature seed, so the curves vary smoothly
/// with the geometry code rather than with sampling noise.
pub fn crossover_scan(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    path: &[GeometryCode],
    samples: usize,
    seed: u64,
) -> Result<CrossoverScan> {
    if set.d_g == 0 {
        return Err(Error::InvalidConfig("crossover scan needs a shape-space model".into()));
    }
    let dim = set.spatial_dim;
    let mut eigenvalues = Vec::with_capacity(path.len());
    let mut gradients = Vec::with_capacity(path.len());
    for g in path {
        family.check_code(g)?;
        let mut cubature_rng = rng::stream(seed, rng::STREAM_CUBATURE, 0);
        let cubature = sample_domain(family, g, samples, &mut cubature_rng)?;
        let eval = evaluate_on_points(set, family, g, &cubature.points, cubature.n, true)?;
        eigenvalues.push(eval.spectrum.eigenvalues.clone());
        let per_mode = eval
            .modes
            .iter()
            .map(|mode| {
                let mut acc = 0.0;
                for w in dim..dim + set.d_g {
                    acc += mode.plane(w).iter().map(|t| t * t).sum::<f64>();
                }
                acc / mode.rows as f64
            })
            .collect();
        gradients.push(per_mode);
    }
    Ok(CrossoverScan { path: path.to_vec(), eigenvalues, shape_gradient_sq: gradients })
}

/// Evenly spaced path along one code axis, other components fixed.
pub fn axis_path(base: &GeometryCode, axis: usize, lo: f64, hi: f64, steps: usize) -> Result<Vec<GeometryCode>> {
    if axis >= base.dim() {
        return Err(Error::InvalidConfig(format!(
            "axis {axis} out of range for a {}-dimensional code",
            base.dim()
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidConfig("need at least 2 path steps".into()));
    }
    let mut path = Vec::with_capacity(steps);
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let mut g = base.0.clone();
        g[axis] = lo + t * (hi - lo);
        path.push(GeometryCode(g));
    }
    Ok(path)
}
