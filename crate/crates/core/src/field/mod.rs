//! Neural field representation of candidate eigenfunctions.

pub mod known;
pub mod mlp;
pub mod model;

use serde::{Deserialize, Serialize};

use crate::autodiff::batch::DualBatch;
use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};

pub use known::{known_mode_count, known_mode_values};
pub use mlp::{Activation, DenseLayer, Mlp};
pub use model::{EigenFieldSet, ElasticityParams, OperatorKind, TrainingMeta};

/// Fourier feature map over positions: per octave `l`, `sin(2^l pi x)` and
/// `cos(2^l pi x)` component-wise, optionally prefixed by the raw position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionalEncoding {
    /// Number of frequency octaves (`L`).
    #[serde(rename = "L")]
    pub octaves: u32,
    /// Include the raw coordinates ahead of the sinusoids.
    pub passthrough: bool,
}

impl Default for PositionalEncoding {
    fn default() -> Self {
        PositionalEncoding { octaves: 5, passthrough: true }
    }
}

impl PositionalEncoding {
    pub fn output_len(&self, dim: usize) -> usize {
        dim * (2 * self.octaves as usize + self.passthrough as usize)
    }

    /// Encode a single position into `out` (length `output_len(dim)`).
    pub fn encode_into(&self, x: &[f64], out: &mut [f64]) {
        let dim = x.len();
        let mut offset = 0;
        if self.passthrough {
            out[..dim].copy_from_slice(x);
            offset += dim;
        }
        for l in 0..self.octaves {
            let k = (1u64 << l) as f64 * std::f64::consts::PI;
            for c in 0..dim {
                out[offset + c] = (k * x[c]).sin();
                out[offset + dim + c] = (k * x[c]).cos();
            }
            offset += 2 * dim;
        }
    }

    pub fn encode(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len(x.len())];
        self.encode_into(x, &mut out);
        out
    }

    /// Encode a batch of positions with tangents (chain rule through the
    /// sinusoids). `pos` is `[n, dim]` feature-major with any tangent width.
    pub fn encode_dual(&self, pos: &DualBatch) -> DualBatch {
        let n = pos.rows;
        let dim = pos.cols;
        let cols = self.output_len(dim);
        let mut out = DualBatch::zeros(n, cols, pos.width);
        let pass = self.passthrough as usize;
        if pass == 1 {
            out.value[..n * dim].copy_from_slice(&pos.value);
            for w in 0..pos.width {
                let olen = n * cols;
                out.tan[w * olen..w * olen + n * dim].copy_from_slice(pos.plane(w));
            }
        }
        for l in 0..self.octaves {
            let k = (1u64 << l) as f64 * std::f64::consts::PI;
            let offset = (pass + 2 * l as usize) * dim;
            for c in 0..dim {
                let src = &pos.value[c * n..(c + 1) * n];
                for j in 0..n {
                    let (s, co) = (k * src[j]).sin_cos();
                    out.value[(offset + c) * n + j] = s;
                    out.value[(offset + dim + c) * n + j] = co;
                }
            }
            for w in 0..pos.width {
                let olen = n * cols;
                for c in 0..dim {
                    let src = &pos.value[c * n..(c + 1) * n];
                    let pt = &pos.plane(w)[c * n..(c + 1) * n];
                    for j in 0..n {
                        let darg = k * pt[j];
                        if darg != 0.0 {
                            let (s, co) = (k * src[j]).sin_cos();
                            out.tan[w * olen + (offset + c) * n + j] = co * darg;
                            out.tan[w * olen + (offset + dim + c) * n + j] = -s * darg;
                        }
                    }
                }
            }
        }
        out
    }

    /// Record the encoding on a tape: same map, built from elementary ops.
    pub fn encode_tape(&self, tape: &mut Tape, pos: NodeId) -> Result<NodeId> {
        let mut parts = Vec::new();
        if self.passthrough {
            parts.push(pos);
        }
        for l in 0..self.octaves {
            let k = (1u64 << l) as f64 * std::f64::consts::PI;
            let kc = tape.scalar(k)?;
            let arg = tape.mul(pos, kc)?;
            parts.push(tape.sin(arg)?);
            parts.push(tape.cos(arg)?);
        }
        if parts.is_empty() {
            return Err(Error::InvalidConfig(
                "positional encoding with L = 0 and no passthrough produces nothing".into(),
            ));
        }
        tape.concat(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_at_zero() {
        let pe = PositionalEncoding { octaves: 1, passthrough: false };
        let out = pe.encode(&[0.0]);
        assert_eq!(out, vec![0.0, 1.0]);
    }

    #[test]
    fn encoding_two_octaves_at_half() {
        let pe = PositionalEncoding { octaves: 2, passthrough: false };
        let out = pe.encode(&[0.5]);
        // (sin(pi/2), cos(pi/2), sin(pi), cos(pi))
        assert!((out[0] - 1.0).abs() < 1e-15);
        assert!(out[1].abs() < 1e-15);
        assert!(out[2].abs() < 1e-12);
        assert!((out[3] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_octaves_with_passthrough_is_identity() {
        let pe = PositionalEncoding { octaves: 0, passthrough: true };
        assert_eq!(pe.encode(&[0.37, -1.2]), vec![0.37, -1.2]);
        assert_eq!(pe.output_len(2), 2);
    }

    #[test]
    fn output_length_matches_contract() {
        let pe = PositionalEncoding { octaves: 5, passthrough: true };
        assert_eq!(pe.output_len(3), 3 * 11);
    }

    #[test]
    fn dual_and_tape_encodings_agree() {
        let pe = PositionalEncoding { octaves: 3, passthrough: true };
        let n = 4;
        let dim = 2;
        // Feature-major: x components first, then y components.
        let values = vec![0.1, -0.4, 0.55, 0.0, 0.2, 0.9, -0.3, 1.0];
        let mut seeds = vec![0.0; 2 * n * dim];
        for j in 0..n {
            seeds[j] = 1.0; // plane 0 = d/dx seeds channel 0
            seeds[n * dim + n + j] = 1.0; // plane 1 = d/dy seeds channel 1
        }
        let mut pos = DualBatch::zeros(n, dim, 2);
        pos.value.copy_from_slice(&values);
        pos.tan.copy_from_slice(&seeds);
        let dual = pe.encode_dual(&pos);

        let mut tape = Tape::new(2);
        let x = tape.input(n, dim, values, seeds).unwrap();
        let enc = pe.encode_tape(&mut tape, x).unwrap();
        for (a, b) in dual.value.iter().zip(tape.value(enc)) {
            assert!((a - b).abs() < 1e-15);
        }
        for w in 0..2 {
            for (a, b) in dual.plane(w).iter().zip(tape.tangent(enc, w)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
