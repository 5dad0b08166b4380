//! Batched dual values outside the tape.
//!
//! Inference (spectrum evaluation, transfer, curve exports) needs values and
//! spatial/shape tangents but no parameter gradients, so it runs on plain
//! buffers instead of recording a tape.

/// Values plus `width` tangent planes for a `[rows, cols]` field batch.
///
/// Storage is feature-major: channel `c` occupies the contiguous block
/// `[c*rows, (c+1)*rows)` of `value` and of each tangent plane.
#[derive(Debug, Clone)]
pub struct DualBatch {
    pub rows: usize,
    pub cols: usize,
    pub width: usize,
    pub value: Vec<f64>,
    /// Plane-major: plane `w` occupies `[w*rows*cols, (w+1)*rows*cols)`.
    pub tan: Vec<f64>,
}

impl DualBatch {
    pub fn zeros(rows: usize, cols: usize, width: usize) -> Self {
        DualBatch {
            rows,
            cols,
            width,
            value: vec![0.0; rows * cols],
            tan: vec![0.0; width * rows * cols],
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self, w: usize) -> &[f64] {
        let len = self.len();
        &self.tan[w * len..(w + 1) * len]
    }

    pub fn plane_mut(&mut self, w: usize) -> &mut [f64] {
        let len = self.len();
        &mut self.tan[w * len..(w + 1) * len]
    }

    /// `self -= s * other`, applied to values and all tangent planes.
    pub fn sub_scaled(&mut self, other: &DualBatch, s: f64) {
        debug_assert_eq!(self.len(), other.len());
        debug_assert_eq!(self.width, other.width);
        for (a, b) in self.value.iter_mut().zip(&other.value) {
            *a -= s * b;
        }
        for (a, b) in self.tan.iter_mut().zip(&other.tan) {
            *a -= s * b;
        }
    }

    /// Scale values and tangents uniformly.
    pub fn scale(&mut self, s: f64) {
        for v in self.value.iter_mut() {
            *v *= s;
        }
        for v in self.tan.iter_mut() {
            *v *= s;
        }
    }

    /// Jacobian entry `d phi_c / d x_w` at row `j` (tangent plane `w`).
    pub fn jacobian(&self, j: usize, c: usize, w: usize) -> f64 {
        self.plane(w)[c * self.rows + j]
    }

    /// Value of channel `c` at row `j`.
    pub fn at(&self, j: usize, c: usize) -> f64 {
        self.value[c * self.rows + j]
    }
}

/// Monte Carlo inner product: mean over rows of the per-row dot product.
pub fn mean_inner(a: &DualBatch, b: &DualBatch) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let sum: f64 = a.value.iter().zip(&b.value).map(|(x, y)| x * y).sum();
    sum / a.rows as f64
}

/// Mean of the per-row squared norm of values.
pub fn mean_sq(a: &DualBatch) -> f64 {
    let sum: f64 = a.value.iter().map(|x| x * x).sum();
    sum / a.rows as f64
}
