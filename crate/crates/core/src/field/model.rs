//! The trained artifact: per-mode MLPs plus the metadata needed to rebuild
//! the evaluation pipeline, persisted as versioned JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::batch::DualBatch;
use crate::error::{Error, Result};
use crate::field::known::known_mode_count;
use crate::field::mlp::{Activation, DenseLayer, Mlp};
use crate::field::PositionalEncoding;
use crate::shapespace::{FamilyParams, GeometryCode};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Laplace,
    Elasticity,
}

impl OperatorKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "laplace" => Ok(OperatorKind::Laplace),
            "elasticity" => Ok(OperatorKind::Elasticity),
            other => Err(Error::InvalidConfig(format!(
                "unknown operator '{other}', expected laplace or elasticity"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticityParams {
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs: usize,
    pub samples_per_epoch: usize,
    #[serde(default)]
    pub sort_mode: String,
    #[serde(default)]
    pub filter_mode: String,
}

/// Trained eigenfunction set: `k` learned fields sharing one encoding and
/// operator, plus the implied hard-coded known modes.
#[derive(Debug, Clone)]
pub struct EigenFieldSet {
    pub operator: OperatorKind,
    pub elasticity: Option<ElasticityParams>,
    pub family_id: String,
    pub family_params: FamilyParams,
    pub d_g: usize,
    pub spatial_dim: usize,
    pub encoding: PositionalEncoding,
    pub encode_geometry: bool,
    pub modes: Vec<Mlp>,
    pub training_meta: TrainingMeta,
}

impl EigenFieldSet {
    pub fn known_count(&self) -> usize {
        known_mode_count(self.operator, self.spatial_dim)
    }

    pub fn learned_count(&self) -> usize {
        self.modes.len()
    }

    /// Total emitted modes: known first, then learned.
    pub fn mode_count(&self) -> usize {
        self.known_count() + self.learned_count()
    }

    pub fn output_width(&self) -> usize {
        match self.operator {
            OperatorKind::Laplace => 1,
            OperatorKind::Elasticity => self.spatial_dim,
        }
    }

    pub fn feature_width(&self) -> usize {
        let enc_x = self.encoding.output_len(self.spatial_dim);
        let enc_g = if self.encode_geometry {
            self.encoding.output_len(self.d_g)
        } else {
            self.d_g
        };
        enc_x + enc_g
    }

    pub fn elasticity_params(&self) -> Result<ElasticityParams> {
        self.elasticity.ok_or_else(|| {
            Error::InvalidConfig("elasticity operator without Lame parameters".into())
        })
    }

    /// Assemble the MLP input features for a batch of points (row-major
    /// `n x dim` coordinates in, feature-major batch out).
    ///
    /// Tangent planes `0..spatial_dim` are seeded with the coordinate
    /// directions. When `g_tangent_base` is set, planes `base..base+d_g`
    /// are seeded with the geometry-code directions, which makes shape
    /// derivatives flow through the same forward pass.
    pub fn build_features_dual(
        &self,
        g: &GeometryCode,
        points: &[f64],
        n: usize,
        width: usize,
        g_tangent_base: Option<usize>,
    ) -> DualBatch {
        let dim = self.spatial_dim;
        assert_eq!(points.len(), n * dim);
        assert!(width >= dim);

        let mut pos = DualBatch::zeros(n, dim, width);
        for j in 0..n {
            for c in 0..dim {
                pos.value[c * n + j] = points[j * dim + c];
            }
        }
        for w in 0..dim {
            pos.plane_mut(w)[w * n..(w + 1) * n].iter_mut().for_each(|v| *v = 1.0);
        }
        let enc_x = self.encoding.encode_dual(&pos);

        if self.d_g == 0 {
            return enc_x;
        }

        let mut gcol = DualBatch::zeros(n, self.d_g, width);
        for (k, v) in g.as_slice().iter().enumerate() {
            gcol.value[k * n..(k + 1) * n].iter_mut().for_each(|x| *x = *v);
        }
        if let Some(base) = g_tangent_base {
            assert!(width >= base + self.d_g);
            for k in 0..self.d_g {
                gcol.plane_mut(base + k)[k * n..(k + 1) * n].iter_mut().for_each(|v| *v = 1.0);
            }
        }
        let enc_g = if self.encode_geometry { self.encoding.encode_dual(&gcol) } else { gcol };

        // Feature-major concat is a pair of block copies per plane.
        let cols = enc_x.cols + enc_g.cols;
        let xlen = enc_x.len();
        let mut out = DualBatch::zeros(n, cols, width);
        out.value[..xlen].copy_from_slice(&enc_x.value);
        out.value[xlen..].copy_from_slice(&enc_g.value);
        for w in 0..width {
            let olen = n * cols;
            out.tan[w * olen..w * olen + xlen].copy_from_slice(enc_x.plane(w));
            out.tan[w * olen + xlen..(w + 1) * olen].copy_from_slice(enc_g.plane(w));
        }
        out
    }

    /// Raw (pre-projection) evaluation of learned mode `i`: values plus
    /// spatial gradient planes, optionally with geometry tangents.
    pub fn eval_raw_dual(
        &self,
        i: usize,
        g: &GeometryCode,
        points: &[f64],
        n: usize,
        width: usize,
        g_tangent_base: Option<usize>,
    ) -> Result<DualBatch> {
        if i >= self.modes.len() {
            return Err(Error::InvalidConfig(format!(
                "mode index {i} out of range, model has {} learned modes",
                self.modes.len()
            )));
        }
        let feat = self.build_features_dual(g, points, n, width, g_tangent_base);
        let out = self.modes[i].forward_dual(&feat);
        for (j, v) in out.value.iter().enumerate() {
            if !v.is_finite() {
                let p = j % n;
                return Err(Error::Numeric(format!(
                    "non-finite output of learned mode {i} at point {:?}",
                    &points[p * self.spatial_dim..(p + 1) * self.spatial_dim]
                )));
            }
        }
        if out.tan.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite spatial gradient of learned mode {i}")));
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            operator: self.operator,
            family_id: self.family_id.clone(),
            family_params: self.family_params.to_spec_string(),
            d_g: self.d_g,
            spatial_dim: self.spatial_dim,
            elasticity_params: self.elasticity,
            encoding: self.encoding,
            encode_geometry: self.encode_geometry,
            modes: self
                .modes
                .iter()
                .map(|m| ModeFile {
                    layer_widths: m.widths(),
                    activation: m.activation,
                    weights: m.layers.iter().map(|l| l.w.clone()).collect(),
                    biases: m.layers.iter().map(|l| l.b.clone()).collect(),
                })
                .collect(),
            training_meta: self.training_meta.clone(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Model(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Model(format!(
                "unsupported model schema version {}",
                file.schema_version
            )));
        }
        let mut modes = Vec::with_capacity(file.modes.len());
        for (i, mode) in file.modes.iter().enumerate() {
            if mode.layer_widths.len() < 2
                || mode.weights.len() != mode.layer_widths.len() - 1
                || mode.biases.len() != mode.weights.len()
            {
                return Err(Error::Model(format!("mode {i}: inconsistent layer description")));
            }
            let mut layers = Vec::with_capacity(mode.weights.len());
            for (li, pair) in mode.layer_widths.windows(2).enumerate() {
                let (in_w, out_w) = (pair[0], pair[1]);
                if mode.weights[li].len() != in_w * out_w || mode.biases[li].len() != out_w {
                    return Err(Error::Model(format!("mode {i} layer {li}: weight shape mismatch")));
                }
                layers.push(DenseLayer {
                    in_w,
                    out_w,
                    w: mode.weights[li].clone(),
                    b: mode.biases[li].clone(),
                });
            }
            modes.push(Mlp { activation: mode.activation, layers });
        }
        let set = EigenFieldSet {
            operator: file.operator,
            elasticity: file.elasticity_params,
            family_id: file.family_id,
            family_params: FamilyParams::parse(&file.family_params)?,
            d_g: file.d_g,
            spatial_dim: file.spatial_dim,
            encoding: file.encoding,
            encode_geometry: file.encode_geometry,
            modes,
            training_meta: file.training_meta,
        };
        let expected = set.feature_width();
        for (i, mode) in set.modes.iter().enumerate() {
            if mode.input_width() != expected {
                return Err(Error::Model(format!(
                    "mode {i} expects {} inputs but the encoding produces {expected}",
                    mode.input_width()
                )));
            }
            if mode.output_width() != set.output_width() {
                return Err(Error::Model(format!("mode {i}: wrong output width for operator")));
            }
        }
        Ok(set)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    operator: OperatorKind,
    family_id: String,
    #[serde(default)]
    family_params: String,
    d_g: usize,
    spatial_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elasticity_params: Option<ElasticityParams>,
    encoding: PositionalEncoding,
    #[serde(default)]
    encode_geometry: bool,
    modes: Vec<ModeFile>,
    training_meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ModeFile {
    layer_widths: Vec<usize>,
    activation: Activation,
    /// Row-major `[out, in]` per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn tiny_set() -> EigenFieldSet {
        let encoding = PositionalEncoding { octaves: 2, passthrough: true };
        let mut stream = rng::stream(5, rng::STREAM_INIT, 0);
        let feat = encoding.output_len(1);
        let modes = (0..2)
            .map(|_| Mlp::init(&[feat, 7, 1], Activation::Sine, &mut stream).unwrap())
            .collect();
        EigenFieldSet {
            operator: OperatorKind::Laplace,
            elasticity: None,
            family_id: "interval1d".into(),
            family_params: FamilyParams::default(),
            d_g: 0,
            spatial_dim: 1,
            encoding,
            encode_geometry: false,
            modes,
            training_meta: TrainingMeta { seed: 5, epochs: 0, samples_per_epoch: 0, ..Default::default() },
        }
    }

    #[test]
    fn save_load_evaluates_bit_exactly() {
        let set = tiny_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        set.save(&path).unwrap();
        let loaded = EigenFieldSet::load(&path).unwrap();

        let mut stream = rng::stream(6, rng::STREAM_CUBATURE, 0);
        use rand::Rng;
        let points: Vec<f64> = (0..1000).map(|_| stream.gen_range(0.0..1.0)).collect();
        let g = GeometryCode::empty();
        for i in 0..2 {
            let a = set.eval_raw_dual(i, &g, &points, 1000, 1, None).unwrap();
            let b = loaded.eval_raw_dual(i, &g, &points, 1000, 1, None).unwrap();
            assert_eq!(a.value, b.value, "values must round-trip bit-exactly");
            assert_eq!(a.tan, b.tan, "gradients must round-trip bit-exactly");
        }
    }

    #[test]
    fn load_rejects_wrong_version() {
        let set = tiny_set();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        set.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("\"schema_version\": 1", "\"schema_version\": 99");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(EigenFieldSet::load(&path), Err(Error::Model(_))));
    }
}
