//! Joint variational training of the eigenfunction set.
//!
//! Per epoch: one geometry code (fixed for a single shape, freshly sampled
//! over shape space), one cubature set shared by every integral, raw forward
//! passes for all modes, the causal ordering, and then one projection /
//! normalization / energy-loss / backward chain per mode in that order.
//! Adam steps are applied per mode at the end of the epoch from the
//! accumulated gradients.


use serde::{Deserialize, Serialize};

use crate::autodiff::batch::DualBatch;
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::field::{
    known_mode_count, known_mode_values, Activation, EigenFieldSet, ElasticityParams, Mlp,
    OperatorKind, PositionalEncoding, TrainingMeta,
};
use crate::rng;
use crate::shapespace::families::PinnedFamily;
use crate::shapespace::{sample_domain, sample_shape_space, FamilyParams, GeometryCode, ShapeFamily};
use crate::spectral::chain::{self, GeometrySource};
use crate::spectral::energy::{batch_eigenvalue, batch_rayleigh, rayleigh_sort};
use crate::spectral::project;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortMode {
    /// Re-derive the dominance order from current energies each epoch.
    Causal,
    /// Keep the fixed index order (ablation).
    Fixed,
}

impl SortMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(SortMode::Causal),
            "fixed" => Ok(SortMode::Fixed),
            other => Err(Error::InvalidConfig(format!("sort mode '{other}', expected causal or fixed"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SortMode::Causal => "causal",
            SortMode::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    /// Stop-gradient the prefix: constraints only push the dominated mode.
    Causal,
    /// No filtering (ablation): constraint gradients also push back into
    /// the dominating modes.
    None,
}

impl FilterMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "causal" => Ok(FilterMode::Causal),
            "none" => Ok(FilterMode::None),
            other => Err(Error::InvalidConfig(format!("filter mode '{other}', expected causal or none"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FilterMode::Causal => "causal",
            FilterMode::None => "none",
        }
    }
}

/// Which energies feed the causal sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortKey {
    /// Rayleigh quotients of the raw fields before projection.
    RawRayleigh,
    /// Eigenvalues after an index-order projection pre-pass.
    Projected,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub k: usize,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    pub learning_rate: f64,
    pub lr_final: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub sort_mode: SortMode,
    pub filter_mode: FilterMode,
    pub sort_key: SortKey,
    /// Differentiate through the normalization denominator instead of
    /// treating it as a constant.
    pub exact_norm_gradient: bool,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub encoding: PositionalEncoding,
    pub encode_geometry: bool,
    pub elasticity: Option<ElasticityParams>,
    /// Epoch interval for progress logging; 0 disables it.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 1,
            epochs: 2000,
            samples_per_epoch: 1500,
            learning_rate: 1e-3,
            lr_final: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sort_mode: SortMode::Causal,
            filter_mode: FilterMode::Causal,
            sort_key: SortKey::RawRayleigh,
            exact_norm_gradient: false,
            seed: 0,
            hidden: vec![40, 40, 40],
            activation: Activation::Sine,
            encoding: PositionalEncoding::default(),
            encode_geometry: false,
            elasticity: None,
            log_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, operator: OperatorKind) -> Result<()> {
        if self.samples_per_epoch < 100 {
            return Err(Error::InvalidConfig(format!(
                "samples_per_epoch must be at least 100, got {}",
                self.samples_per_epoch
            )));
        }
        if self.epochs == 0 && self.k > 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if operator == OperatorKind::Elasticity {
            let p = self
                .elasticity
                .ok_or_else(|| Error::InvalidConfig("elasticity training needs mu and lambda".into()))?;
            if !(p.mu > 0.0 && p.lambda > 0.0) {
                return Err(Error::InvalidConfig("Lame parameters must be positive".into()));
            }
        }
        Ok(())
    }

    fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.learning_rate;
        }
        let t = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_final + 0.5 * (self.learning_rate - self.lr_final) * (1.0 + (std::f64::consts::PI * t).cos())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(len: usize, config: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }

    /// Update rule with bias correction; writes the step to subtract.
    fn step(&mut self, lr: f64, grad: &[f64], out: &mut [f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..grad.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            out[i] = lr * mhat / (vhat.sqrt() + self.epsilon);
        }
    }
}

/// Train eigenfunctions of one fixed shape (fixed mode order).
///
/// A family with a nonempty shape space is pinned at `g`, producing a model
/// with no geometry input.
pub fn train_single_shape(
    family: &dyn ShapeFamily,
    g: &GeometryCode,
    operator: OperatorKind,
    config: &TrainConfig,
) -> Result<EigenFieldSet> {
    family.check_code(g)?;
    if family.code_dim() == 0 {
        train_impl(family, None, operator, config)
    } else {
        let pinned = PinnedFamily::new(family, g.clone());
        train_impl(&pinned, None, operator, config)
    }
}

/// Jointly train over the family's whole shape space: one sampled geometry
/// code per epoch, shape-dependent causal sorting per `config.sort_mode`.
pub fn train_shape_space(
    family: &dyn ShapeFamily,
    operator: OperatorKind,
    config: &TrainConfig,
) -> Result<EigenFieldSet> {
    if family.code_dim() == 0 {
        return Err(Error::InvalidConfig(format!(
            "family '{}' has a fixed shape; use single-shape training",
            family.id()
        )));
    }
    train_impl(family, Some(()), operator, config)
}

fn train_impl(
    family: &dyn ShapeFamily,
    over_shape_space: Option<()>,
    operator: OperatorKind,
    config: &TrainConfig,
) -> Result<EigenFieldSet> {
    config.validate(operator)?;
    let dim = family.spatial_dim();
    let d_g = if over_shape_space.is_some() { family.code_dim() } else { 0 };
    let elasticity = match operator {
        OperatorKind::Elasticity => Some(config.elasticity.expect("validated")),
        OperatorKind::Laplace => None,
    };

    let mut set = EigenFieldSet {
        operator,
        elasticity,
        family_id: family.id().to_string(),
        family_params: family_params_of(family),
        d_g,
        spatial_dim: dim,
        encoding: config.encoding,
        encode_geometry: config.encode_geometry,
        modes: Vec::new(),
        training_meta: TrainingMeta {
            seed: config.seed,
            epochs: config.epochs,
            samples_per_epoch: config.samples_per_epoch,
            sort_mode: config.sort_mode.name().into(),
            filter_mode: config.filter_mode.name().into(),
        },
    };
    let out_w = set.output_width();
    let feat_w = set.feature_width();
    let mut widths = vec![feat_w];
    widths.extend_from_slice(&config.hidden);
    widths.push(out_w);
    for i in 0..config.k {
        let mut init_rng = rng::stream(config.seed, rng::STREAM_INIT, i as u64);
        set.modes.push(Mlp::init(&widths, config.activation, &mut init_rng)?);
    }
    if config.k == 0 {
        return Ok(set);
    }

    let known_count = known_mode_count(operator, dim);
    let mut optimizers: Vec<Adam> = set.modes.iter().map(|m| Adam::new(m.param_count(), config)).collect();
    let mut grad_buffers: Vec<Vec<f64>> = set.modes.iter().map(|m| vec![0.0; m.param_count()]).collect();
    let mut update = vec![0.0; set.modes.iter().map(|m| m.param_count()).max().unwrap()];

    for epoch in 0..config.epochs {
        let context = |e: Error, mode: Option<usize>| match mode {
            Some(m) => e.with_context(&format!("epoch {epoch}, mode {m}")),
            None => e.with_context(&format!("epoch {epoch}")),
        };

        let g = match over_shape_space {
            Some(()) => {
                let mut shape_rng = rng::stream(config.seed, rng::STREAM_SHAPE, epoch as u64);
                sample_shape_space(family, &mut shape_rng)?
            }
            None => GeometryCode::empty(),
        };
        let mut cubature_rng = rng::stream(config.seed, rng::STREAM_CUBATURE, epoch as u64);
        let cubature = sample_domain(family, &g, config.samples_per_epoch, &mut cubature_rng)?;
        let n = cubature.n;
        let center = family.aabb(&g).center();

        let mut tape = Tape::new(dim);
        let feat = chain::tape_features(&mut tape, &set, GeometrySource::Fixed(&g), &cubature.points, n)
            .map_err(|e| context(e, None))?;
        let (raws, params) = chain::tape_raw_modes(&mut tape, &set, feat).map_err(|e| context(e, None))?;

        // Hard-coded known modes, orthonormalized on this cubature.
        let mut known: Vec<DualBatch> = (0..known_count)
            .map(|m| known_mode_values(operator, dim, m, &center, &cubature.points, n, dim))
            .collect();
        project::orthonormalize(&mut known, "known").map_err(|e| context(e, None))?;

        let raw_batches: Vec<DualBatch> = raws.iter().map(|r| chain::batch_from_node(&tape, *r)).collect();
        let order: Vec<usize> = if over_shape_space.is_some() && config.sort_mode == SortMode::Causal {
            match config.sort_key {
                SortKey::RawRayleigh => {
                    let mut keys = Vec::with_capacity(config.k);
                    for rb in &raw_batches {
                        keys.push(batch_rayleigh(operator, rb, dim, elasticity).map_err(|e| context(e, None))?);
                    }
                    rayleigh_sort(&keys).map_err(|e| context(e, None))?
                }
                SortKey::Projected => {
                    projected_order(operator, elasticity, &known, &raw_batches, dim).map_err(|e| context(e, None))?
                }
            }
        } else {
            (0..config.k).collect()
        };

        let mut prefix = Vec::with_capacity(known_count + config.k);
        for kb in &known {
            let node = tape
                .constant_with_tangents(kb.rows, kb.cols, kb.value.clone(), kb.tan.clone())
                .map_err(|e| context(e, None))?;
            prefix.push(node);
        }

        let filtered = config.filter_mode == FilterMode::Causal;
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let outcome = chain::tape_project_normalize(
                &mut tape,
                raws[idx],
                &prefix,
                filtered,
                config.exact_norm_gradient,
                &format!("mode {idx}"),
            )
            .map_err(|e| context(e, Some(idx)))?;
            let loss = chain::tape_mode_loss(&mut tape, &set, outcome.phi).map_err(|e| context(e, Some(idx)))?;
            epoch_loss += tape.value(loss)[0];
            let grads = tape.backward(loss).map_err(|e| context(e, Some(idx)))?;
            for (j, mode) in set.modes.iter().enumerate() {
                mode.flatten_grads(&params[j], &grads, &mut grad_buffers[j]);
            }
            let entry = if filtered {
                tape.stop_gradient(outcome.phi).map_err(|e| context(e, Some(idx)))?
            } else {
                outcome.phi
            };
            prefix.push(entry);
        }

        let lr = config.learning_rate_at(epoch);
        for (j, mode) in set.modes.iter_mut().enumerate() {
            let len = mode.param_count();
            optimizers[j].step(lr, &grad_buffers[j], &mut update[..len]);
            mode.apply_update(&update[..len]);
            grad_buffers[j].iter_mut().for_each(|v| *v = 0.0);
        }

        if config.log_every > 0 && (epoch % config.log_every == 0 || epoch + 1 == config.epochs) {
            log::info!("epoch {epoch}: summed mode energy {epoch_loss:.6e}, lr {lr:.3e}");
        }
    }
    Ok(set)
}

/// Sorting pre-pass for the alternative key: project in index order on plain
/// batches and sort by the resulting post-projection eigenvalues.
fn projected_order(
    operator: OperatorKind,
    elasticity: Option<ElasticityParams>,
    known: &[DualBatch],
    raws: &[DualBatch],
    dim: usize,
) -> Result<Vec<usize>> {
    let mut emitted: Vec<DualBatch> = known.to_vec();
    let mut keys = Vec::with_capacity(raws.len());
    for (i, raw) in raws.iter().enumerate() {
        let prefix: Vec<&DualBatch> = emitted.iter().collect();
        let (mut residual, _) = project::gram_schmidt_project(raw, &prefix)?;
        project::normalize(&mut residual, &format!("sort pre-pass mode {i}"))?;
        keys.push(batch_eigenvalue(operator, &residual, dim, elasticity));
        emitted.push(residual);
    }
    rayleigh_sort(&keys)
}

fn family_params_of(family: &dyn ShapeFamily) -> FamilyParams {
    family.params_spec()
}
