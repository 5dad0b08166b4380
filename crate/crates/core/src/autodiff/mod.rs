//! Differentiation engine for variational field training.
//!
//! The engine computes two kinds of derivatives at once:
//!
//! - spatial gradients of field outputs, carried as forward-mode tangent
//!   planes seeded with the coordinate directions, and
//! - parameter gradients of losses that consume those spatial gradients,
//!   via a reverse pass over the recorded program.
//!
//! Every node stores a batched dual bundle: primal values for a whole
//! cubature batch plus `width` tangent planes of the same shape. The dual
//! arithmetic is the recorded primal program, so the reverse pass sees how
//! tangents depend on values and parameters; each op registers its value,
//! tangent, and adjoint rules together, which is what makes the mixed
//! second-order derivatives exact.
//!
//! Tapes are created per evaluation and dropped after their backward passes.

pub mod batch;
pub mod kernels;

use std::collections::HashMap;

use crate::error::{Error, Result};
use kernels::{sigmoid, softplus};

/// Handle to a recorded tape value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone)]
enum Op {
    /// Caller-provided values and tangent seeds.
    Input,
    /// Trainable leaf; reverse accumulation reports a gradient for it.
    Param,
    /// Fixed values, zero tangents, no gradient.
    Const,
    /// Fixed values with fixed tangents (hard-coded analytic modes).
    ConstWithTan,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Pow(usize, f64),
    Sin(usize),
    Cos(usize),
    Exp(usize),
    Tanh(usize),
    Softplus(usize),
    /// Affine map `y = x W^T + b` with `w: [out, in]`, `b: [1, out]`.
    Linear { x: usize, w: usize, b: usize },
    /// Column-wise concatenation of equal-row nodes.
    Concat(Vec<usize>),
    /// Sum of every element, `[1, 1]` result.
    SumAll(usize),
    /// Per-row sum of squared tangent entries over a plane range.
    TangentSqSum { x: usize, lo: usize, hi: usize },
    /// Per-row small-strain energy density from the tangent Jacobian.
    StrainQ { x: usize, mu: f64, lambda: f64, half: bool },
    /// Identity on the primal, zero tangents, blocks reverse flow.
    Stop(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param => "param",
            Op::Const => "const",
            Op::ConstWithTan => "const_with_tan",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Pow(..) => "pow",
            Op::Sin(..) => "sin",
            Op::Cos(..) => "cos",
            Op::Exp(..) => "exp",
            Op::Tanh(..) => "tanh",
            Op::Softplus(..) => "softplus",
            Op::Linear { .. } => "linear",
            Op::Concat(..) => "concat",
            Op::SumAll(..) => "sum_all",
            Op::TangentSqSum { .. } => "tangent_sq_sum",
            Op::StrainQ { .. } => "strain_q",
            Op::Stop(..) => "stop_gradient",
        }
    }
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    /// `width` planes, each `rows * cols`, plane-major.
    tan: Vec<f64>,
    /// First derivative of elementwise unary ops, saved at forward time so
    /// the reverse pass does not redo the transcendentals.
    cache: Vec<f64>,
    op: Op,
}

impl Node {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

/// Recorded program over batched dual values.
pub struct Tape {
    width: usize,
    nodes: Vec<Node>,
    check_finite: bool,
}

impl Tape {
    /// `width` is the number of tangent planes every node carries.
    pub fn new(width: usize) -> Self {
        Tape { width, nodes: Vec::new(), check_finite: true }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Tangent plane `w` of a node, length `rows * cols`.
    pub fn tangent(&self, id: NodeId, plane: usize) -> &[f64] {
        let n = &self.nodes[id.0];
        let len = n.len();
        &n.tan[plane * len..(plane + 1) * len]
    }

    fn push(&mut self, node: Node) -> Result<NodeId> {
        let id = NodeId(self.nodes.len());
        if self.check_finite {
            // A plain sum stays branch-free and vectorizes; any NaN or
            // infinity in the data poisons it. Magnitudes here are far from
            // the overflow range.
            let value_sum: f64 = node.value.iter().sum();
            let tan_sum: f64 = node.tan.iter().sum();
            if !value_sum.is_finite() || !tan_sum.is_finite() {
                let bad_value = node.value.iter().any(|v| !v.is_finite());
                return Err(Error::Numeric(format!(
                    "non-finite {} at tape node {}",
                    if bad_value { "value" } else { "tangent" },
                    id.0
                ))
                .with_context(node.op.name()));
            }
        }
        self.nodes.push(node);
        Ok(id)
    }

    // ----- leaves ---------------------------------------------------------

    pub fn input(&mut self, rows: usize, cols: usize, value: Vec<f64>, tan: Vec<f64>) -> Result<NodeId> {
        assert_eq!(value.len(), rows * cols);
        assert_eq!(tan.len(), self.width * rows * cols);
        self.push(Node { rows, cols, value, tan, cache: vec![], op: Op::Input })
    }

    pub fn param(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Result<NodeId> {
        assert_eq!(value.len(), rows * cols);
        let tan = vec![0.0; self.width * rows * cols];
        self.push(Node { rows, cols, value, tan, cache: vec![], op: Op::Param })
    }

    pub fn constant(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Result<NodeId> {
        assert_eq!(value.len(), rows * cols);
        let tan = vec![0.0; self.width * rows * cols];
        self.push(Node { rows, cols, value, tan, cache: vec![], op: Op::Const })
    }

    pub fn constant_with_tangents(
        &mut self,
        rows: usize,
        cols: usize,
        value: Vec<f64>,
        tan: Vec<f64>,
    ) -> Result<NodeId> {
        assert_eq!(value.len(), rows * cols);
        assert_eq!(tan.len(), self.width * rows * cols);
        self.push(Node { rows, cols, value, tan, cache: vec![], op: Op::ConstWithTan })
    }

    pub fn scalar(&mut self, v: f64) -> Result<NodeId> {
        self.constant(1, 1, vec![v])
    }

    // ----- elementwise ops ------------------------------------------------

    fn binary_shape(&self, a: NodeId, b: NodeId, op: &str) -> Result<(usize, usize)> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        if (ar, ac) == (br, bc) {
            Ok((ar, ac))
        } else if (ar, ac) == (1, 1) {
            Ok((br, bc))
        } else if (br, bc) == (1, 1) {
            Ok((ar, ac))
        } else {
            Err(Error::InvalidConfig(format!(
                "{op}: incompatible shapes {ar}x{ac} and {br}x{bc}"
            )))
        }
    }

    fn binary<FV, FT>(&mut self, a: NodeId, b: NodeId, op: Op, fv: FV, ft: FT) -> Result<NodeId>
    where
        FV: Fn(f64, f64) -> f64,
        // (av, bv, at, bt) -> tangent
        FT: Fn(f64, f64, f64, f64) -> f64,
    {
        let (rows, cols) = self.binary_shape(a, b, op.name())?;
        let len = rows * cols;
        let na = &self.nodes[a.0];
        let nb = &self.nodes[b.0];
        let a_scalar = na.len() == 1;
        let b_scalar = nb.len() == 1;
        let mut value = vec![0.0; len];
        for i in 0..len {
            let av = na.value[if a_scalar { 0 } else { i }];
            let bv = nb.value[if b_scalar { 0 } else { i }];
            value[i] = fv(av, bv);
        }
        let mut tan = vec![0.0; self.width * len];
        for w in 0..self.width {
            let alen = na.len();
            let blen = nb.len();
            let at = &na.tan[w * alen..(w + 1) * alen];
            let bt = &nb.tan[w * blen..(w + 1) * blen];
            let out = &mut tan[w * len..(w + 1) * len];
            for i in 0..len {
                let ia = if a_scalar { 0 } else { i };
                let ib = if b_scalar { 0 } else { i };
                out[i] = ft(na.value[ia], nb.value[ib], at[ia], bt[ib]);
            }
        }
        self.push(Node { rows, cols, value, tan, cache: vec![], op })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Add(a.0, b.0), |x, y| x + y, |_, _, tx, ty| tx + ty)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Sub(a.0, b.0), |x, y| x - y, |_, _, tx, ty| tx - ty)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Mul(a.0, b.0), |x, y| x * y, |x, y, tx, ty| tx * y + x * ty)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(a, b, Op::Div(a.0, b.0), |x, y| x / y, |x, y, tx, ty| tx / y - x * ty / (y * y))
    }

    /// Elementwise unary op: `fvd` yields value and first derivative; the
    /// derivative is cached on the node for the reverse pass.
    fn unary<FVD>(&mut self, a: NodeId, op: Op, fvd: FVD) -> Result<NodeId>
    where
        FVD: Fn(f64) -> (f64, f64),
    {
        let (rows, cols) = self.shape(a);
        let len = rows * cols;
        let na = &self.nodes[a.0];
        let mut value = vec![0.0; len];
        let mut deriv = vec![0.0; len];
        for i in 0..len {
            let (v, d) = fvd(na.value[i]);
            value[i] = v;
            deriv[i] = d;
        }
        let mut tan = vec![0.0; self.width * len];
        for w in 0..self.width {
            let at = &na.tan[w * len..(w + 1) * len];
            let out = &mut tan[w * len..(w + 1) * len];
            for i in 0..len {
                out[i] = deriv[i] * at[i];
            }
        }
        self.push(Node { rows, cols, value, tan, cache: deriv, op })
    }

    pub fn sin(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Sin(a.0), f64::sin_cos)
    }

    pub fn cos(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Cos(a.0), |x| {
            let (s, c) = x.sin_cos();
            (c, -s)
        })
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Exp(a.0), |x| {
            let e = x.exp();
            (e, e)
        })
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Tanh(a.0), |x| {
            let t = x.tanh();
            (t, 1.0 - t * t)
        })
    }

    pub fn softplus(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Softplus(a.0), |x| (softplus(x), sigmoid(x)))
    }

    /// Power with a constant exponent.
    pub fn powc(&mut self, a: NodeId, p: f64) -> Result<NodeId> {
        self.unary(a, Op::Pow(a.0, p), |x| (x.powf(p), p * x.powf(p - 1.0)))
    }

    // ----- structural and fused ops ----------------------------------------

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, in_w) = self.shape(x);
        let (out_w, in_w2) = self.shape(w);
        let (br, bc) = self.shape(b);
        if in_w != in_w2 || br != 1 || bc != out_w {
            return Err(Error::InvalidConfig(format!(
                "linear: x {n}x{in_w}, w {out_w}x{in_w2}, b {br}x{bc}"
            )));
        }
        match (&self.nodes[w.0].op, &self.nodes[b.0].op) {
            (Op::Param | Op::Const, Op::Param | Op::Const) => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "linear: weights and biases must be parameter or constant leaves".into(),
                ))
            }
        }
        let len = n * out_w;
        let mut value = vec![0.0; len];
        kernels::linear_value(
            &self.nodes[x.0].value,
            n,
            in_w,
            &self.nodes[w.0].value,
            out_w,
            &self.nodes[b.0].value,
            &mut value,
        );
        let mut tan = vec![0.0; self.width * len];
        let xlen = n * in_w;
        for plane in 0..self.width {
            kernels::linear_tangent(
                &self.nodes[x.0].tan[plane * xlen..(plane + 1) * xlen],
                n,
                in_w,
                &self.nodes[w.0].value,
                out_w,
                &mut tan[plane * len..(plane + 1) * len],
            );
        }
        self.push(Node { rows: n, cols: out_w, value, tan, cache: vec![], op: Op::Linear { x: x.0, w: w.0, b: b.0 } })
    }

    /// Channel-wise concatenation. With feature-major storage each part is a
    /// contiguous block copy per plane.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::InvalidConfig("concat: no inputs".into()));
        }
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for p in parts {
            let (r, c) = self.shape(*p);
            if r != rows {
                return Err(Error::InvalidConfig("concat: row mismatch".into()));
            }
            cols += c;
        }
        let len = rows * cols;
        let mut value = vec![0.0; len];
        let mut tan = vec![0.0; self.width * len];
        let mut offset = 0;
        for p in parts {
            let node = &self.nodes[p.0];
            let plen = node.len();
            value[offset..offset + plen].copy_from_slice(&node.value);
            for w in 0..self.width {
                tan[w * len + offset..w * len + offset + plen]
                    .copy_from_slice(&node.tan[w * plen..(w + 1) * plen]);
            }
            offset += plen;
        }
        self.push(Node { rows, cols, value, tan, cache: vec![], op: Op::Concat(parts.iter().map(|p| p.0).collect()) })
    }

    /// Sum of all elements. Tangent planes sum the same way.
    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let na = &self.nodes[a.0];
        let len = na.len();
        let value = vec![na.value.iter().sum::<f64>()];
        let mut tan = vec![0.0; self.width];
        for w in 0..self.width {
            tan[w] = na.tan[w * len..(w + 1) * len].iter().sum();
        }
        self.push(Node { rows: 1, cols: 1, value, tan, cache: vec![], op: Op::SumAll(a.0) })
    }

    /// Per-row sum of squared tangent entries over planes `lo..hi`.
    ///
    /// For a field with spatial tangent seeds this is `|grad phi|^2` per
    /// cubature point. The result carries zero tangents of its own.
    pub fn tangent_sq_sum(&mut self, a: NodeId, lo: usize, hi: usize) -> Result<NodeId> {
        if hi > self.width || lo > hi {
            return Err(Error::InvalidConfig("tangent_sq_sum: plane range out of bounds".into()));
        }
        let na = &self.nodes[a.0];
        let (rows, cols) = (na.rows, na.cols);
        let len = na.len();
        let mut value = vec![0.0; rows];
        for w in lo..hi {
            for c in 0..cols {
                let t = &na.tan[w * len + c * rows..w * len + (c + 1) * rows];
                for j in 0..rows {
                    value[j] += t[j] * t[j];
                }
            }
        }
        let tan = vec![0.0; self.width * rows];
        self.push(Node { rows, cols: 1, value, tan, cache: vec![], op: Op::TangentSqSum { x: a.0, lo, hi } })
    }

    /// Per-row linear elastic energy density from the tangent Jacobian.
    ///
    /// The Jacobian at row `j` is `J[c][w] = tangent_w[j, c]` over the first
    /// `cols` planes; with `S = J + J^T` the density is
    /// `mu |S|_F^2 + (lambda/2) tr(S)^2`, halved when `half` is set.
    pub fn strain_energy_density(&mut self, a: NodeId, mu: f64, lambda: f64, half: bool) -> Result<NodeId> {
        let na = &self.nodes[a.0];
        let (rows, dim) = (na.rows, na.cols);
        if dim > self.width {
            return Err(Error::InvalidConfig(
                "strain_energy_density: needs one tangent plane per output component".into(),
            ));
        }
        let len = na.len();
        let scale = if half { 0.5 } else { 1.0 };
        let mut value = vec![0.0; rows];
        for j in 0..rows {
            let mut frob = 0.0;
            let mut trace = 0.0;
            for c in 0..dim {
                for w in 0..dim {
                    // J[c][w] = tangent plane w, channel c.
                    let s = na.tan[w * len + c * rows + j] + na.tan[c * len + w * rows + j];
                    frob += s * s;
                    if c == w {
                        trace += s;
                    }
                }
            }
            value[j] = scale * (mu * frob + 0.5 * lambda * trace * trace);
        }
        let tan = vec![0.0; self.width * rows];
        self.push(Node { rows, cols: 1, value, tan, cache: vec![], op: Op::StrainQ { x: a.0, mu, lambda, half } })
    }

    /// Identity on the primal value; tangents are zeroed and the reverse pass
    /// deposits nothing into the ancestors of `a`.
    pub fn stop_gradient(&mut self, a: NodeId) -> Result<NodeId> {
        let na = &self.nodes[a.0];
        let (rows, cols) = (na.rows, na.cols);
        let value = na.value.clone();
        let tan = vec![0.0; self.width * rows * cols];
        self.push(Node { rows, cols, value, tan, cache: vec![], op: Op::Stop(a.0) })
    }

    // ----- reverse pass -----------------------------------------------------

    /// Reverse accumulation from a scalar seed node.
    ///
    /// Returns the gradient for every parameter leaf that the seed reaches.
    /// Paths through [`Tape::stop_gradient`] contribute exactly zero.
    pub fn backward(&self, seed: NodeId) -> Result<HashMap<usize, Vec<f64>>> {
        let (r, c) = self.shape(seed);
        if r * c != 1 {
            return Err(Error::InvalidConfig(format!(
                "backward seed must be scalar, got {r}x{c}"
            )));
        }

        // Mark ancestors of the seed, not crossing stop-gradient boundaries.
        let mut marked = vec![false; self.nodes.len()];
        let mut stack = vec![seed.0];
        while let Some(id) = stack.pop() {
            if marked[id] {
                continue;
            }
            marked[id] = true;
            match &self.nodes[id].op {
                Op::Input | Op::Param | Op::Const | Op::ConstWithTan | Op::Stop(_) => {}
                Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                    stack.push(*a);
                    stack.push(*b);
                }
                Op::Pow(a, _)
                | Op::Sin(a)
                | Op::Cos(a)
                | Op::Exp(a)
                | Op::Tanh(a)
                | Op::Softplus(a)
                | Op::SumAll(a)
                | Op::TangentSqSum { x: a, .. }
                | Op::StrainQ { x: a, .. } => stack.push(*a),
                Op::Linear { x, w, b } => {
                    stack.push(*x);
                    stack.push(*w);
                    stack.push(*b);
                }
                Op::Concat(parts) => stack.extend(parts.iter().copied()),
            }
        }

        let mut state = Adjoints {
            width: self.width,
            val: vec![None; self.nodes.len()],
            tan: vec![None; self.nodes.len()],
        };
        state.val_mut(seed.0, 1)[0] = 1.0;

        for id in (0..=seed.0).rev() {
            if !marked[id] {
                continue;
            }
            self.push_adjoints(id, &mut state);
        }

        let mut grads = HashMap::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if marked[id] && matches!(node.op, Op::Param) {
                if let Some(g) = state.val[id].take() {
                    grads.insert(id, g);
                }
            }
        }
        Ok(grads)
    }

    fn push_adjoints(&self, id: usize, state: &mut Adjoints) {
        let node = &self.nodes[id];
        let len = node.len();
        let has_val = state.val[id].is_some();
        let has_tan = state.tan[id].is_some();
        if !has_val && !has_tan {
            return;
        }
        let vadj = state.val[id].take().unwrap_or_else(|| vec![0.0; len]);
        let tadj = state.tan[id].take().unwrap_or_else(|| vec![0.0; self.width * len]);

        match &node.op {
            Op::Input | Op::Param | Op::Const | Op::ConstWithTan => {
                // Leaves keep their gradients; restore the value adjoint for
                // parameter collection after the sweep.
                state.val[id] = Some(vadj);
            }
            Op::Stop(_) => {}
            Op::Add(a, b) => {
                self.binary_adjoint(*a, *b, len, &vadj, &tadj, state, |_, _| (1.0, 0.0), |_, _| (1.0, 0.0), BinaryCross::None);
            }
            Op::Sub(a, b) => {
                self.binary_adjoint(*a, *b, len, &vadj, &tadj, state, |_, _| (1.0, 0.0), |_, _| (-1.0, 0.0), BinaryCross::None);
            }
            Op::Mul(a, b) => {
                self.binary_adjoint(
                    *a,
                    *b,
                    len,
                    &vadj,
                    &tadj,
                    state,
                    |_, bv| (bv, 0.0),
                    |av, _| (av, 0.0),
                    BinaryCross::Mul,
                );
            }
            Op::Div(a, b) => {
                self.binary_adjoint(
                    *a,
                    *b,
                    len,
                    &vadj,
                    &tadj,
                    state,
                    |_, bv| (1.0 / bv, 0.0),
                    |av, bv| (-av / (bv * bv), 0.0),
                    BinaryCross::Div,
                );
            }
            Op::Pow(a, p) => {
                let p = *p;
                let parent = &self.nodes[*a];
                self.unary_adjoint(*a, node, len, &vadj, &tadj, state, |i| {
                    p * (p - 1.0) * parent.value[i].powf(p - 2.0)
                });
            }
            // Second derivatives come from the stored value/derivative pair.
            Op::Sin(a) | Op::Cos(a) => {
                self.unary_adjoint(*a, node, len, &vadj, &tadj, state, |i| -node.value[i]);
            }
            Op::Exp(a) => {
                self.unary_adjoint(*a, node, len, &vadj, &tadj, state, |i| node.value[i]);
            }
            Op::Tanh(a) => {
                self.unary_adjoint(*a, node, len, &vadj, &tadj, state, |i| {
                    -2.0 * node.value[i] * node.cache[i]
                });
            }
            Op::Softplus(a) => {
                self.unary_adjoint(*a, node, len, &vadj, &tadj, state, |i| {
                    node.cache[i] * (1.0 - node.cache[i])
                });
            }
            Op::Linear { x, w, b } => self.linear_adjoint(*x, *w, *b, node, &vadj, &tadj, state),
            Op::Concat(parts) => {
                let mut offset = 0;
                for pid in parts {
                    let plen = self.nodes[*pid].len();
                    {
                        let pv = state.val_mut(*pid, plen);
                        for (dst, src) in pv.iter_mut().zip(&vadj[offset..offset + plen]) {
                            *dst += src;
                        }
                    }
                    let pt = state.tan_mut(*pid, plen);
                    for wpl in 0..self.width {
                        let src = &tadj[wpl * len + offset..wpl * len + offset + plen];
                        let dst = &mut pt[wpl * plen..(wpl + 1) * plen];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s;
                        }
                    }
                    offset += plen;
                }
            }
            Op::SumAll(a) => {
                let anode = &self.nodes[*a];
                let alen = anode.len();
                let g = vadj[0];
                {
                    let av = state.val_mut(*a, alen);
                    for v in av.iter_mut() {
                        *v += g;
                    }
                }
                let at = state.tan_mut(*a, alen);
                for w in 0..self.width {
                    let gt = tadj[w];
                    if gt != 0.0 {
                        for v in at[w * alen..(w + 1) * alen].iter_mut() {
                            *v += gt;
                        }
                    }
                }
            }
            Op::TangentSqSum { x, lo, hi } => {
                let xnode = &self.nodes[*x];
                let xlen = xnode.len();
                let rows = xnode.rows;
                let at = state.tan_mut(*x, xlen);
                for w in *lo..*hi {
                    for c in 0..xnode.cols {
                        let xt = &xnode.tan[w * xlen + c * rows..w * xlen + (c + 1) * rows];
                        let dst = &mut at[w * xlen + c * rows..w * xlen + (c + 1) * rows];
                        for j in 0..rows {
                            dst[j] += 2.0 * vadj[j] * xt[j];
                        }
                    }
                }
            }
            Op::StrainQ { x, mu, lambda, half } => {
                let xnode = &self.nodes[*x];
                let xlen = xnode.len();
                let rows = xnode.rows;
                let dim = xnode.cols;
                let scale = if *half { 0.5 } else { 1.0 };
                let at = state.tan_mut(*x, xlen);
                for j in 0..rows {
                    let g = scale * vadj[j];
                    if g == 0.0 {
                        continue;
                    }
                    let mut trace = 0.0;
                    for c in 0..dim {
                        trace += 2.0 * xnode.tan[c * xlen + c * rows + j];
                    }
                    for c in 0..dim {
                        for w in 0..dim {
                            let s = xnode.tan[w * xlen + c * rows + j] + xnode.tan[c * xlen + w * rows + j];
                            // d(q)/d J[c][w] with J[c][w] = plane w, channel c.
                            let mut d = 4.0 * mu * s;
                            if c == w {
                                d += 2.0 * lambda * trace;
                            }
                            at[w * xlen + c * rows + j] += g * d;
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn binary_adjoint<FA, FB>(
        &self,
        a: usize,
        b: usize,
        len: usize,
        vadj: &[f64],
        tadj: &[f64],
        state: &mut Adjoints,
        fa: FA,
        fb: FB,
        cross: BinaryCross,
    ) where
        FA: Fn(f64, f64) -> (f64, f64),
        FB: Fn(f64, f64) -> (f64, f64),
    {
        let na = &self.nodes[a];
        let nb = &self.nodes[b];
        let alen = na.len();
        let blen = nb.len();
        let a_scalar = alen == 1;
        let b_scalar = blen == 1;
        let width = self.width;

        // Value adjoints from the primal rule plus the second-order terms the
        // tangent rule induces on the primal inputs.
        {
            let av = state.val_mut(a, alen);
            for i in 0..len {
                let ia = if a_scalar { 0 } else { i };
                let ib = if b_scalar { 0 } else { i };
                let (da, _) = fa(na.value[ia], nb.value[ib]);
                let mut acc = vadj[i] * da;
                for w in 0..width {
                    let gt = tadj[w * len + i];
                    if gt != 0.0 {
                        acc += gt * cross.dtan_da(na.value[ia], nb.value[ib], na.tan[w * alen + ia], nb.tan[w * blen + ib]);
                    }
                }
                av[ia] += acc;
            }
        }
        {
            let bv = state.val_mut(b, blen);
            for i in 0..len {
                let ia = if a_scalar { 0 } else { i };
                let ib = if b_scalar { 0 } else { i };
                let (db, _) = fb(na.value[ia], nb.value[ib]);
                let mut acc = vadj[i] * db;
                for w in 0..width {
                    let gt = tadj[w * len + i];
                    if gt != 0.0 {
                        acc += gt * cross.dtan_db(na.value[ia], nb.value[ib], na.tan[w * alen + ia], nb.tan[w * blen + ib]);
                    }
                }
                bv[ib] += acc;
            }
        }
        // Tangent adjoints: dtan_out/dtan_in is the first derivative.
        {
            let at = state.tan_mut(a, alen);
            for w in 0..width {
                for i in 0..len {
                    let gt = tadj[w * len + i];
                    if gt != 0.0 {
                        let ia = if a_scalar { 0 } else { i };
                        let ib = if b_scalar { 0 } else { i };
                        let (da, _) = fa(na.value[ia], nb.value[ib]);
                        at[w * alen + ia] += gt * da;
                    }
                }
            }
        }
        {
            let bt = state.tan_mut(b, blen);
            for w in 0..width {
                for i in 0..len {
                    let gt = tadj[w * len + i];
                    if gt != 0.0 {
                        let ia = if a_scalar { 0 } else { i };
                        let ib = if b_scalar { 0 } else { i };
                        let (db, _) = fb(na.value[ia], nb.value[ib]);
                        bt[w * blen + ib] += gt * db;
                    }
                }
            }
        }
    }

    /// Adjoint of an elementwise unary op. The first derivative is the
    /// node's cached forward values; `d2_at` yields the second derivative
    /// per element.
    fn unary_adjoint<FD2>(
        &self,
        a: usize,
        node: &Node,
        len: usize,
        vadj: &[f64],
        tadj: &[f64],
        state: &mut Adjoints,
        d2_at: FD2,
    ) where
        FD2: Fn(usize) -> f64,
    {
        let na = &self.nodes[a];
        debug_assert_eq!(na.len(), len);
        let width = self.width;
        let d1 = &node.cache;
        {
            let av = state.val_mut(a, len);
            for i in 0..len {
                av[i] += vadj[i] * d1[i];
            }
            for w in 0..width {
                let gt = &tadj[w * len..(w + 1) * len];
                let pt = &na.tan[w * len..(w + 1) * len];
                for i in 0..len {
                    if gt[i] != 0.0 {
                        av[i] += gt[i] * d2_at(i) * pt[i];
                    }
                }
            }
        }
        let at = state.tan_mut(a, len);
        for w in 0..width {
            let gt = &tadj[w * len..(w + 1) * len];
            let dst = &mut at[w * len..(w + 1) * len];
            for i in 0..len {
                dst[i] += gt[i] * d1[i];
            }
        }
    }

    fn linear_adjoint(&self, x: usize, w: usize, b: usize, node: &Node, vadj: &[f64], tadj: &[f64], state: &mut Adjoints) {
        let nx = &self.nodes[x];
        let nw = &self.nodes[w];
        let n = nx.rows;
        let in_w = nx.cols;
        let out_w = nw.rows;
        let xlen = nx.len();
        let ylen = node.len();
        debug_assert_eq!(ylen, n * out_w);

        // x adjoints (value and every tangent plane share the kernel).
        {
            let xv = state.val_mut(x, xlen);
            kernels::linear_backprop_input(vadj, n, out_w, &nw.value, in_w, xv);
        }
        {
            let xt = state.tan_mut(x, xlen);
            for plane in 0..self.width {
                kernels::linear_backprop_input(
                    &tadj[plane * ylen..(plane + 1) * ylen],
                    n,
                    out_w,
                    &nw.value,
                    in_w,
                    &mut xt[plane * xlen..(plane + 1) * xlen],
                );
            }
        }
        // Weight gradient: primal outer product plus one outer product per
        // tangent plane (the mixed second-order path).
        {
            let wv = state.val_mut(w, out_w * in_w);
            kernels::linear_backprop_weight(vadj, n, out_w, &nx.value, in_w, wv);
            for plane in 0..self.width {
                kernels::linear_backprop_weight(
                    &tadj[plane * ylen..(plane + 1) * ylen],
                    n,
                    out_w,
                    &nx.tan[plane * xlen..(plane + 1) * xlen],
                    in_w,
                    wv,
                );
            }
        }
        {
            let bv = state.val_mut(b, out_w);
            for o in 0..out_w {
                bv[o] += vadj[o * n..(o + 1) * n].iter().sum::<f64>();
            }
        }
    }
}

/// Cross-derivative of a binary op's tangent rule with respect to the primal
/// inputs. Add/sub have none; mul and div carry the curvature.
#[derive(Clone, Copy)]
enum BinaryCross {
    None,
    Mul,
    Div,
}

impl BinaryCross {
    // tangent = f_a(a,b) ta + f_b(a,b) tb; these return d(tangent)/da and
    // d(tangent)/db for one element.
    fn dtan_da(self, _a: f64, b: f64, _ta: f64, tb: f64) -> f64 {
        match self {
            BinaryCross::None => 0.0,
            // t = ta*b + a*tb
            BinaryCross::Mul => tb,
            // t = ta/b - a*tb/b^2
            BinaryCross::Div => -tb / (b * b),
        }
    }

    fn dtan_db(self, a: f64, b: f64, ta: f64, tb: f64) -> f64 {
        match self {
            BinaryCross::None => 0.0,
            BinaryCross::Mul => ta,
            BinaryCross::Div => -ta / (b * b) + 2.0 * a * tb / (b * b * b),
        }
    }
}

struct Adjoints {
    width: usize,
    val: Vec<Option<Vec<f64>>>,
    tan: Vec<Option<Vec<f64>>>,
}

impl Adjoints {
    fn val_mut(&mut self, id: usize, len: usize) -> &mut Vec<f64> {
        self.val[id].get_or_insert_with(|| vec![0.0; len])
    }

    fn tan_mut(&mut self, id: usize, len: usize) -> &mut Vec<f64> {
        let width = self.width;
        self.tan[id].get_or_insert_with(|| vec![0.0; width * len])
    }
}

/// Run a field program on a fresh tape with the given input values and
/// tangent seeds (`seeds` holds `width` planes of `value.len()` entries).
pub fn eval_with_tangents<F>(
    width: usize,
    value: &[f64],
    seeds: &[f64],
    program: F,
) -> Result<(Tape, NodeId, NodeId)>
where
    F: FnOnce(&mut Tape, NodeId) -> Result<NodeId>,
{
    let mut tape = Tape::new(width);
    let input = tape.input(1, value.len(), value.to_vec(), seeds.to_vec())?;
    let output = program(&mut tape, input)?;
    Ok((tape, input, output))
}

#[cfg(test)]
mod tests;
