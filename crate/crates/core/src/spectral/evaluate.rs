//! Inference: run the projection chain on a trained set and read off the
//! spectrum, with enough state recorded to re-evaluate the chained modes at
//! arbitrary points.

use rand_chacha::ChaCha8Rng;

use crate::autodiff::batch::{mean_inner, DualBatch};
use crate::error::{Error, Result};
use crate::field::{known_mode_count, known_mode_values, EigenFieldSet};
use crate::shapespace::{sample_domain, CubatureSet, GeometryCode, ShapeFamily};
use crate::spectral::energy::{batch_eigenvalue, batch_rayleigh, rayleigh_sort};
use crate::spectral::project::{normalize, projection_coefficients};
use crate::spectral::train::SortMode;

/// Per-shape eigenvalues in mode-identity order (known modes first, then
/// learned modes by trained index), plus the causal emission order used to
/// compute them. Eigenvalues listed along `causal_order` are nondecreasing
/// for a converged model.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub g: GeometryCode,
    pub eigenvalues: Vec<f64>,
    pub causal_order: Vec<usize>,
}

/// One emission step of the inference chain.
#[derive(Debug, Clone)]
pub struct ChainStep {
    /// Mode identity (combined index, known modes first).
    pub mode: usize,
    /// Coefficients against previously emitted modes, in emission order.
    pub coeffs: Vec<f64>,
    /// RMS norm divided out after projection.
    pub rms: f64,
}

/// Replayable record of one evaluation's projection chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub steps: Vec<ChainStep>,
}

pub struct Evaluation {
    pub spectrum: Spectrum,
    pub chain: ChainState,
    /// Normalized fields on the evaluation points, identity-indexed.
    pub modes: Vec<DualBatch>,
    /// Evaluation points (`n x dim`).
    pub points: Vec<f64>,
    pub n: usize,
}

fn sort_mode_of(set: &EigenFieldSet) -> Result<SortMode> {
    match set.training_meta.sort_mode.as_str() {
        "" => Ok(SortMode::Causal),
        other => SortMode::parse(other),
    }
}

/// Run the full inference chain on given interior points.
///
/// `g_tangents` widens the tangent planes to `dim + d_g` and seeds the
/// geometry directions, so shape derivatives ride along.
pub fn evaluate_on_points(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    g: &GeometryCode,
    points: &[f64],
    n: usize,
    g_tangents: bool,
) -> Result<Evaluation> {
    let dim = set.spatial_dim;
    let width = dim + if g_tangents { set.d_g } else { 0 };
    let g_base = if g_tangents { Some(dim) } else { None };
    let center = family.aabb(g).center();
    let known_count = known_mode_count(set.operator, dim);
    let total = known_count + set.modes.len();

    // Known modes, orthonormalized among themselves in fixed order.
    let mut emitted: Vec<DualBatch> = Vec::with_capacity(total);
    let mut steps: Vec<ChainStep> = Vec::with_capacity(total);
    for m in 0..known_count {
        let mut batch = known_mode_values(set.operator, dim, m, &center, points, n, width);
        let prefix: Vec<&DualBatch> = emitted.iter().collect();
        let (coeffs, _) = projection_coefficients(&batch, &prefix)?;
        for (field, c) in prefix.iter().zip(&coeffs) {
            batch.sub_scaled(field, *c);
        }
        let rms = normalize(&mut batch, &format!("known mode {m}"))?;
        emitted.push(batch);
        steps.push(ChainStep { mode: m, coeffs, rms });
    }

    let raws: Vec<DualBatch> = (0..set.modes.len())
        .map(|i| set.eval_raw_dual(i, g, points, n, width, g_base))
        .collect::<Result<_>>()?;

    let order: Vec<usize> = match sort_mode_of(set)? {
        SortMode::Causal => {
            let mut keys = Vec::with_capacity(raws.len());
            for raw in &raws {
                keys.push(batch_rayleigh(set.operator, raw, dim, set.elasticity)?);
            }
            rayleigh_sort(&keys)?
        }
        SortMode::Fixed => (0..raws.len()).collect(),
    };

    let mut eigenvalues = vec![0.0; total];
    let mut modes: Vec<Option<DualBatch>> = vec![None; total];
    for (slot, step) in steps.iter().enumerate() {
        eigenvalues[step.mode] = batch_eigenvalue(set.operator, &emitted[slot], dim, set.elasticity);
        modes[step.mode] = Some(emitted[slot].clone());
    }

    for &idx in &order {
        let prefix: Vec<&DualBatch> = emitted.iter().collect();
        let (coeffs, _) = projection_coefficients(&raws[idx], &prefix)?;
        let mut batch = raws[idx].clone();
        for (field, c) in prefix.iter().zip(&coeffs) {
            batch.sub_scaled(field, *c);
        }
        let rms = normalize(&mut batch, &format!("mode {idx}"))?;
        let identity = known_count + idx;
        eigenvalues[identity] = batch_eigenvalue(set.operator, &batch, dim, set.elasticity);
        modes[identity] = Some(batch.clone());
        emitted.push(batch);
        steps.push(ChainStep { mode: identity, coeffs, rms });
    }

    let causal_order = steps.iter().map(|s| s.mode).collect();
    Ok(Evaluation {
        spectrum: Spectrum { g: g.clone(), eigenvalues, causal_order },
        chain: ChainState { steps },
        modes: modes.into_iter().map(Option::unwrap).collect(),
        points: points.to_vec(),
        n,
    })
}

/// Evaluate on a fresh cubature set drawn from `rng`.
pub fn evaluate_spectrum(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    g: &GeometryCode,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Evaluation, CubatureSet)> {
    let cubature = sample_domain(family, g, n, rng)?;
    let eval = evaluate_on_points(set, family, g, &cubature.points, n, false)?;
    Ok((eval, cubature))
}

/// Re-evaluate the chained (projected, normalized) modes at arbitrary
/// points by replaying a recorded chain's coefficients.
///
/// The points need not lie inside the domain; the fields are defined
/// everywhere, only the chain coefficients are tied to the cubature that
/// produced `chain`.
pub fn eval_chain_at(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    chain: &ChainState,
    g: &GeometryCode,
    points: &[f64],
    n: usize,
) -> Result<Vec<DualBatch>> {
    let dim = set.spatial_dim;
    let known_count = known_mode_count(set.operator, dim);
    let total = known_count + set.modes.len();
    if chain.steps.len() != total {
        return Err(Error::InvalidConfig(format!(
            "chain has {} steps but the model emits {total} modes",
            chain.steps.len()
        )));
    }
    let center = family.aabb(g).center();
    let mut emitted: Vec<DualBatch> = Vec::with_capacity(total);
    let mut modes: Vec<Option<DualBatch>> = vec![None; total];
    for step in &chain.steps {
        let mut batch = if step.mode < known_count {
            known_mode_values(set.operator, dim, step.mode, &center, points, n, dim)
        } else {
            set.eval_raw_dual(step.mode - known_count, g, points, n, dim, None)?
        };
        for (field, c) in emitted.iter().zip(&step.coeffs) {
            batch.sub_scaled(field, *c);
        }
        batch.scale(1.0 / step.rms);
        modes[step.mode] = Some(batch.clone());
        emitted.push(batch);
    }
    Ok(modes.into_iter().map(Option::unwrap).collect())
}

/// Gram matrix of all emitted modes over their evaluation points.
pub fn mode_gram(modes: &[DualBatch]) -> Vec<f64> {
    let k = modes.len();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let v = mean_inner(&modes[i], &modes[j]);
            gram[i * k + j] = v;
            gram[j * k + i] = v;
        }
    }
    gram
}
