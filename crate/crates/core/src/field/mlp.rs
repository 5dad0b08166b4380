//! Per-eigenfunction multilayer perceptrons.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::batch::DualBatch;
use crate::autodiff::{kernels, NodeId, Tape};
use crate::error::{Error, Result};

/// Hidden-layer activations. The energy loss consumes first spatial
/// derivatives, so the backward pass needs second derivatives; only
/// activations that are at least C1 are constructible. Piecewise-linear
/// choices (relu and friends) are rejected by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sine,
    Tanh,
    Softplus,
}

impl Activation {
    pub fn parse(name: &str) -> Result<Activation> {
        match name {
            "sine" | "sin" => Ok(Activation::Sine),
            "tanh" => Ok(Activation::Tanh),
            "softplus" => Ok(Activation::Softplus),
            other => Err(Error::InvalidConfig(format!(
                "activation '{other}' is not supported; the loss needs C1 activations, choose one of: sine, tanh, softplus"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Sine => "sine",
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
        }
    }

    fn value(&self, x: f64) -> f64 {
        match self {
            Activation::Sine => x.sin(),
            Activation::Tanh => x.tanh(),
            Activation::Softplus => kernels::softplus(x),
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::Sine => x.cos(),
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Softplus => kernels::sigmoid(x),
        }
    }

    fn apply_tape(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        match self {
            Activation::Sine => tape.sin(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Softplus => tape.softplus(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub in_w: usize,
    pub out_w: usize,
    /// Row-major `[out_w, in_w]`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// One trainable eigenfunction field.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub activation: Activation,
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// `widths` is the full chain `[input, hidden..., output]`. Weights are
    /// uniform in `+-sqrt(6 / fan_in)`, biases zero.
    pub fn init(widths: &[usize], activation: Activation, rng: &mut ChaCha8Rng) -> Result<Mlp> {
        if widths.len() < 2 {
            return Err(Error::InvalidConfig("MLP needs at least input and output widths".into()));
        }
        if widths.iter().any(|w| *w == 0) {
            return Err(Error::InvalidConfig("MLP layer widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for pair in widths.windows(2) {
            let (in_w, out_w) = (pair[0], pair[1]);
            let bound = (6.0 / in_w as f64).sqrt();
            let w = (0..in_w * out_w).map(|_| rng.gen_range(-bound..bound)).collect();
            layers.push(DenseLayer { in_w, out_w, w, b: vec![0.0; out_w] });
        }
        Ok(Mlp { activation, layers })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.iter().map(|l| l.in_w).collect();
        w.push(self.layers.last().unwrap().out_w);
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_w
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().unwrap().out_w
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass over a feature batch, values and tangents together.
    pub fn forward_dual(&self, feat: &DualBatch) -> DualBatch {
        let n = feat.rows;
        let width = feat.width;
        let mut cur = feat.clone();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = DualBatch::zeros(n, layer.out_w, width);
            kernels::linear_value(&cur.value, n, layer.in_w, &layer.w, layer.out_w, &layer.b, &mut next.value);
            let in_len = n * layer.in_w;
            let out_len = n * layer.out_w;
            for pl in 0..width {
                kernels::linear_tangent(
                    &cur.tan[pl * in_len..(pl + 1) * in_len],
                    n,
                    layer.in_w,
                    &layer.w,
                    layer.out_w,
                    &mut next.tan[pl * out_len..(pl + 1) * out_len],
                );
            }
            if li + 1 < self.layers.len() {
                // Hidden activation: f(v), tangents scaled by f'(v).
                let mut deriv = vec![0.0; out_len];
                for (i, v) in next.value.iter_mut().enumerate() {
                    deriv[i] = self.activation.derivative(*v);
                    *v = self.activation.value(*v);
                }
                for pl in 0..width {
                    let t = &mut next.tan[pl * out_len..(pl + 1) * out_len];
                    for i in 0..out_len {
                        t[i] *= deriv[i];
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// Push this mode's weights onto a tape as parameter leaves.
    pub fn tape_params(&self, tape: &mut Tape) -> Result<Vec<(NodeId, NodeId)>> {
        let mut params = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let w = tape.param(layer.out_w, layer.in_w, layer.w.clone())?;
            let b = tape.param(1, layer.out_w, layer.b.clone())?;
            params.push((w, b));
        }
        Ok(params)
    }

    /// Recorded forward pass using previously pushed parameter leaves.
    pub fn tape_forward(&self, tape: &mut Tape, params: &[(NodeId, NodeId)], feat: NodeId) -> Result<NodeId> {
        let mut cur = feat;
        for (li, (w, b)) in params.iter().enumerate() {
            cur = tape.linear(cur, *w, *b)?;
            if li + 1 < self.layers.len() {
                cur = self.activation.apply_tape(tape, cur)?;
            }
        }
        Ok(cur)
    }

    /// Apply a flat parameter update `theta -= step` layer by layer.
    pub fn apply_update(&mut self, update: &[f64]) {
        let mut offset = 0;
        for layer in &mut self.layers {
            for v in layer.w.iter_mut() {
                *v -= update[offset];
                offset += 1;
            }
            for v in layer.b.iter_mut() {
                *v -= update[offset];
                offset += 1;
            }
        }
        debug_assert_eq!(offset, update.len());
    }

    /// Flatten per-layer tape gradients into the `apply_update` layout.
    pub fn flatten_grads(
        &self,
        params: &[(NodeId, NodeId)],
        grads: &std::collections::HashMap<usize, Vec<f64>>,
        out: &mut [f64],
    ) {
        let mut offset = 0;
        for (layer, (w, b)) in self.layers.iter().zip(params) {
            if let Some(g) = grads.get(&w.0) {
                out[offset..offset + layer.w.len()].iter_mut().zip(g).for_each(|(o, v)| *o += v);
            }
            offset += layer.w.len();
            if let Some(g) = grads.get(&b.0) {
                out[offset..offset + layer.b.len()].iter_mut().zip(g).for_each(|(o, v)| *o += v);
            }
            offset += layer.b.len();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rejects_non_smooth_activations() {
        assert!(Activation::parse("relu").is_err());
        assert!(Activation::parse("leaky_relu").is_err());
        assert!(Activation::parse("sine").is_ok());
    }

    #[test]
    fn zero_weight_network_is_zero() {
        let mut rng = rng::stream(1, rng::STREAM_INIT, 0);
        let mut mlp = Mlp::init(&[3, 4, 1], Activation::Tanh, &mut rng).unwrap();
        for layer in &mut mlp.layers {
            layer.w.iter_mut().for_each(|v| *v = 0.0);
            layer.b.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut feat = DualBatch::zeros(2, 3, 1);
        feat.value.copy_from_slice(&[0.3, -0.2, 0.9, 1.0, 0.5, -0.5]);
        feat.tan.iter_mut().for_each(|v| *v = 1.0);
        let out = mlp.forward_dual(&feat);
        assert!(out.value.iter().all(|v| *v == 0.0));
        assert!(out.tan.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_linear_layer_is_the_weight_vector() {
        let mut rng = rng::stream(2, rng::STREAM_INIT, 0);
        let mut mlp = Mlp::init(&[1, 1], Activation::Sine, &mut rng).unwrap();
        mlp.layers[0].w = vec![2.5];
        mlp.layers[0].b = vec![0.0];
        let mut feat = DualBatch::zeros(1, 1, 1);
        feat.value[0] = 0.8;
        feat.tan[0] = 1.0;
        let out = mlp.forward_dual(&feat);
        assert_eq!(out.value[0], 2.0);
        assert_eq!(out.tan[0], 2.5);
    }

    #[test]
    fn dual_and_tape_forward_agree() {
        let mut rng = rng::stream(3, rng::STREAM_INIT, 0);
        let mlp = Mlp::init(&[2, 5, 5, 1], Activation::Sine, &mut rng).unwrap();
        let n = 6;
        let values: Vec<f64> = (0..n * 2).map(|i| (i as f64) * 0.17 - 0.9).collect();
        let mut seeds = vec![0.0; 2 * n * 2];
        for j in 0..n {
            seeds[j] = 1.0; // plane 0, channel 0
            seeds[n * 2 + n + j] = 1.0; // plane 1, channel 1
        }
        let mut feat = DualBatch::zeros(n, 2, 2);
        feat.value.copy_from_slice(&values);
        feat.tan.copy_from_slice(&seeds);
        let dual = mlp.forward_dual(&feat);

        let mut tape = Tape::new(2);
        let x = tape.input(n, 2, values, seeds).unwrap();
        let params = mlp.tape_params(&mut tape).unwrap();
        let out = mlp.tape_forward(&mut tape, &params, x).unwrap();
        for (a, b) in dual.value.iter().zip(tape.value(out)) {
            assert!((a - b).abs() < 1e-14);
        }
        for w in 0..2 {
            for (a, b) in dual.plane(w).iter().zip(tape.tangent(out, w)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spatial_gradient_matches_finite_differences() {
        let mut rng = rng::stream(4, rng::STREAM_INIT, 0);
        let mlp = Mlp::init(&[1, 8, 8, 1], Activation::Tanh, &mut rng).unwrap();
        let eval = |x: f64| {
            let mut feat = DualBatch::zeros(1, 1, 0);
            feat.value[0] = x;
            mlp.forward_dual(&feat).value[0]
        };
        let h = 1e-5;
        for x in [-0.7, -0.1, 0.4, 0.9] {
            let mut feat = DualBatch::zeros(1, 1, 1);
            feat.value[0] = x;
            feat.tan[0] = 1.0;
            let out = mlp.forward_dual(&feat);
            let fd = (eval(x + h) - eval(x - h)) / (2.0 * h);
            let rel = (out.tan[0] - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-5, "x = {x}: {} vs {fd}", out.tan[0]);
        }
    }
}
