//! Eigenvalue-matching shape optimization.
//!
//! Minimizes the squared mismatch between selected eigenvalues and targets
//! over the geometry code. The objective is evaluated on a cubature drawn
//! from one fixed seed per run, so it is a deterministic function of `g`
//! and backtracking line search is well defined. The eigenvalue gradient
//! flows through the recorded inference chain with the geometry code as a
//! trainable leaf.

use crate::autodiff::batch::DualBatch;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::field::{known_mode_count, known_mode_values, EigenFieldSet};
use crate::rng;
use crate::shapespace::{sample_domain, GeometryCode, ShapeFamily};
use crate::spectral::chain::{self, GeometrySource};
use crate::spectral::energy::{batch_rayleigh, rayleigh_sort};
use crate::spectral::project;
use crate::spectral::train::SortMode;

/// One target: learned mode `mode` (trained identity index, 0-based within
/// the learned block) should reach eigenvalue `value`.
#[derive(Debug, Clone, Copy)]
pub struct EigenvalueTarget {
    pub mode: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub g: Vec<f64>,
    pub loss: f64,
    /// Eigenvalues of the targeted modes at this iterate.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub iterates: Vec<TraceEntry>,
    pub converged: bool,
    pub steps_used: usize,
}

#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub max_steps: usize,
    pub step_size: f64,
    pub samples: usize,
    pub seed: u64,
    /// Absolute loss threshold counting as convergence.
    pub tolerance: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { max_steps: 200, step_size: 1e-2, samples: 2000, seed: 0, tolerance: 1e-9 }
    }
}

const GRAD_NORM_FLOOR: f64 = 1e-8;
const STEP_FLOOR: f64 = 1e-8;

struct Objective<'a> {
    set: &'a EigenFieldSet,
    family: &'a dyn ShapeFamily,
    targets: &'a [EigenvalueTarget],
    config: &'a OptimizeConfig,
}

impl<'a> Objective<'a> {
    /// Loss, gradient w.r.t. g, and the targeted eigenvalues at `g`.
    fn eval(&self, g: &GeometryCode) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let set = self.set;
        let family = self.family;
        let dim = set.spatial_dim;
        let mut cubature_rng = rng::stream(self.config.seed, rng::STREAM_CUBATURE, 0);
        let cubature = sample_domain(family, g, self.config.samples, &mut cubature_rng)?;
        let n = cubature.n;
        let center = family.aabb(g).center();
        let known_count = known_mode_count(set.operator, dim);

        let mut tape = Tape::new(dim);
        let g_leaf = tape.param(set.d_g, 1, g.0.clone())?;
        let feat = chain::tape_features(&mut tape, set, GeometrySource::Leaf(g_leaf), &cubature.points, n)?;
        let (raws, _) = chain::tape_raw_modes(&mut tape, set, feat)?;

        let order: Vec<usize> = match SortMode::parse(if set.training_meta.sort_mode.is_empty() {
            "causal"
        } else {
            &set.training_meta.sort_mode
        })? {
            SortMode::Causal => {
                let mut keys = Vec::with_capacity(raws.len());
                for r in &raws {
                    let rb = chain::batch_from_node(&tape, *r);
                    keys.push(batch_rayleigh(set.operator, &rb, dim, set.elasticity)?);
                }
                rayleigh_sort(&keys)?
            }
            SortMode::Fixed => (0..raws.len()).collect(),
        };

        let mut known: Vec<DualBatch> = (0..known_count)
            .map(|m| known_mode_values(set.operator, dim, m, &center, &cubature.points, n, dim))
            .collect();
        project::orthonormalize(&mut known, "known")?;
        let mut prefix = Vec::with_capacity(known_count + set.modes.len());
        for kb in &known {
            prefix.push(tape.constant_with_tangents(kb.rows, kb.cols, kb.value.clone(), kb.tan.clone())?);
        }

        let mut lambda_nodes = vec![None; set.modes.len()];
        for &idx in &order {
            let outcome =
                chain::tape_project_normalize(&mut tape, raws[idx], &prefix, true, false, &format!("mode {idx}"))?;
            lambda_nodes[idx] = Some(chain::tape_mode_eigenvalue(&mut tape, set, outcome.phi)?);
            let stopped = tape.stop_gradient(outcome.phi)?;
            prefix.push(stopped);
        }

        let mut loss_node = None;
        let mut eigenvalues = Vec::with_capacity(self.targets.len());
        for target in self.targets {
            let lam = lambda_nodes[target.mode].expect("all learned modes emitted");
            eigenvalues.push(tape.value(lam)[0]);
            let t = tape.scalar(target.value)?;
            let diff = tape.sub(lam, t)?;
            let sq = tape.mul(diff, diff)?;
            loss_node = Some(match loss_node {
                None => sq,
                Some(acc) => tape.add(acc, sq)?,
            });
        }
        let loss_node = loss_node.ok_or_else(|| Error::InvalidConfig("no targets given".into()))?;
        let loss = tape.value(loss_node)[0];
        let grads = tape.backward(loss_node)?;
        let grad = grads.get(&g_leaf.0).cloned().unwrap_or_else(|| vec![0.0; set.d_g]);
        Ok((loss, grad, eigenvalues))
    }
}

fn clamp_code(family: &dyn ShapeFamily, g: &mut [f64]) {
    for (v, (lo, hi)) in g.iter_mut().zip(family.code_bounds()) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Projected gradient descent with a backtracking line search (halve the
/// step until the loss decreases, floor 1e-8). Iterates stay inside the
/// family's code bounds.
pub fn optimize_shape_for_eigenvalues(
    set: &EigenFieldSet,
    family: &dyn ShapeFamily,
    targets: &[EigenvalueTarget],
    g0: &GeometryCode,
    config: &OptimizeConfig,
) -> Result<OptimizationTrace> {
    if set.d_g == 0 {
        return Err(Error::InvalidConfig("shape optimization needs a shape-space model".into()));
    }
    if targets.is_empty() {
        return Err(Error::InvalidConfig("no eigenvalue targets given".into()));
    }
    for t in targets {
        if t.mode >= set.learned_count() {
            return Err(Error::InvalidConfig(format!(
                "target mode {} out of range (model trains {} modes)",
                t.mode,
                set.learned_count()
            )));
        }
    }
    family.check_code(g0)?;

    let objective = Objective { set, family, targets, config };
    let mut g = g0.0.clone();
    clamp_code(family, &mut g);
    let (mut loss, mut grad, mut eigenvalues) = objective.eval(&GeometryCode(g.clone()))?;
    let mut trace = OptimizationTrace {
        iterates: vec![TraceEntry { g: g.clone(), loss, eigenvalues: eigenvalues.clone() }],
        converged: false,
        steps_used: 0,
    };

    for step_idx in 0..config.max_steps {
        if !loss.is_finite() {
            log::warn!("non-finite loss at step {step_idx}; aborting with the trace so far");
            return Ok(trace);
        }
        if loss < config.tolerance {
            trace.converged = true;
            break;
        }
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm < GRAD_NORM_FLOOR {
            trace.converged = true;
            break;
        }

        let mut step = config.step_size;
        let mut accepted = None;
        while step >= STEP_FLOOR {
            let mut candidate = g.clone();
            for (c, d) in candidate.iter_mut().zip(&grad) {
                *c -= step * d;
            }
            clamp_code(family, &mut candidate);
            let (closs, cgrad, ceig) = objective.eval(&GeometryCode(candidate.clone()))?;
            if closs.is_finite() && closs < loss {
                accepted = Some((candidate, closs, cgrad, ceig));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            None => break,
            Some((candidate, closs, cgrad, ceig)) => {
                g = candidate;
                loss = closs;
                grad = cgrad;
                eigenvalues = ceig;
                trace.steps_used = step_idx + 1;
                trace.iterates.push(TraceEntry { g: g.clone(), loss, eigenvalues: eigenvalues.clone() });
            }
        }
    }
    if loss < config.tolerance {
        trace.converged = true;
    }
    Ok(trace)
}
