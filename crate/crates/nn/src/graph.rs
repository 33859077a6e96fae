use std::collections::HashMap;

use crate::{NnError, ParamId, ParamStore, Result, Tensor};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Tanh(Var),
    Silu(Var),
    Softmax(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    Transpose(Var),
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    SliceRows { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    Sum(Var),
    Abs(Var),
    NormalizeRows { x: Var, norms: Vec<f64> },
    QuatMul(Var, Var),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Value,
    op: Op,
    name: &'static str,
    needs_grad: bool,
}

/// Records one forward pass. Dropped after [`Graph::backward`], so memory is
/// bounded by a single episode.
pub struct Graph<'s> {
    store: Option<&'s ParamStore>,
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

/// Gradients produced by one reverse pass.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds `scale * grad` into every touched parameter's gradient buffer.
    pub fn accumulate_into(&self, store: &mut ParamStore, scale: f64) {
        for &(id, var) in &self.params {
            if let Some(g) = &self.grads[var.0] {
                let t = store.get_mut(id);
                if t.requires_grad() {
                    t.accumulate_grad(g, scale);
                }
            }
        }
    }
}

const LN_EPS: f64 = 1e-5;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store: Some(store),
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    /// A graph with no parameter store; only constants can be leaves.
    pub fn detached() -> Graph<'static> {
        Graph {
            store: None,
            nodes: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(x) => x,
            Value::Param(id) => self
                .store
                .expect("parameter node without store")
                .get(*id)
                .values(),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let (r, c) = self.shape(v);
        Tensor::matrix(r, c, self.value(v).to_vec()).expect("node shape is consistent")
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op, name: &'static str) -> Result<Var> {
        let idx = self.nodes.len();
        if value.iter().any(|x| !x.is_finite()) {
            return Err(NnError::NonFinite { op: name, node: idx });
        }
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::AddRow(a, b) | Op::QuatMul(a, b) => {
                self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad
            }
            Op::Scale(a, _)
            | Op::AddConst(a)
            | Op::Tanh(a)
            | Op::Silu(a)
            | Op::Softmax(a)
            | Op::Transpose(a)
            | Op::Sum(a)
            | Op::Abs(a) => self.nodes[a.0].needs_grad,
            Op::LayerNorm { x, .. }
            | Op::SliceCols { x, .. }
            | Op::SliceRows { x, .. }
            | Op::NormalizeRows { x, .. } => self.nodes[x.0].needs_grad,
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Owned(value),
            op,
            name,
            needs_grad,
        });
        Ok(Var(idx))
    }

    /// Constant leaf (no gradient flows into it).
    pub fn constant(&mut self, t: &Tensor) -> Var {
        let (r, c) = t.dims2();
        self.push(r, c, t.values().to_vec(), Op::Leaf, "constant")
            .unwrap_or_else(|_| panic!("non-finite constant"))
    }

    pub fn constant_row(&mut self, values: &[f64]) -> Var {
        self.constant(&Tensor::row(values.to_vec()))
    }

    /// Leaf bound to a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let store = self.store.expect("graph has no parameter store");
        let t = store.get(id);
        let (rows, cols) = t.dims2();
        let idx = self.nodes.len();
        self.nodes.push(Node {
            rows,
            cols,
            value: Value::Param(id),
            op: Op::Leaf,
            name: "param",
            needs_grad: t.requires_grad(),
        });
        let v = Var(idx);
        self.param_vars.insert(id, v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(NnError::ShapeMismatch {
                op,
                lhs: vec![sa.0, sa.1],
                rhs: vec![sb.0, sb.1],
            });
        }
        Ok(sa)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(NnError::ShapeMismatch {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = av[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, bpj) in row.iter_mut().zip(brow) {
                    *o += aip * bpj;
                }
            }
        }
        self.push(m, n, out, Op::MatMul(a, b), "matmul")
    }

    fn zip_map(&mut self, a: Var, b: Var, name: &'static str, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let (r, c) = self.same_shape(name, a, b)?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        self.push(r, c, out, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    /// `x + bias` with a `[1, n]` bias broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let (br, bc) = self.shape(bias);
        if br != 1 || bc != c {
            return Err(NnError::ShapeMismatch {
                op: "add_row",
                lhs: vec![r, c],
                rhs: vec![br, bc],
            });
        }
        let b = self.value(bias);
        let out = self
            .value(x)
            .chunks(c)
            .flat_map(|row| row.iter().zip(b).map(|(x, y)| x + y))
            .collect();
        self.push(r, c, out, Op::AddRow(x, bias), "add_row")
    }

    fn unary(&mut self, x: Var, name: &'static str, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let (r, c) = self.shape(x);
        let out = self.value(x).iter().map(|v| f(*v)).collect();
        self.push(r, c, out, op, name)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        self.unary(x, "scale", Op::Scale(x, s), |v| v * s)
    }

    pub fn add_const(&mut self, x: Var, s: f64) -> Result<Var> {
        self.unary(x, "add_const", Op::AddConst(x), |v| v + s)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "tanh", Op::Tanh(x), f64::tanh)
    }

    pub fn silu(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "silu", Op::Silu(x), |v| v * sigmoid(v))
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary(x, "abs", Op::Abs(x), f64::abs)
    }

    /// Softmax over the last axis.
    pub fn softmax_last(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let mut out = Vec::with_capacity(r * c);
        for row in self.value(x).chunks(c) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            let mut total = 0.0;
            for v in row {
                let e = (v - max).exp();
                total += e;
                out.push(e);
            }
            out[start..].iter_mut().for_each(|e| *e /= total);
        }
        self.push(r, c, out, Op::Softmax(x), "softmax")
    }

    /// Standardizes each row (population variance, eps 1e-5), no affine.
    pub fn layer_norm(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let mut out = Vec::with_capacity(r * c);
        let mut inv_std = Vec::with_capacity(r);
        for row in self.value(x).chunks(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(inv);
            out.extend(row.iter().map(|v| (v - mean) * inv));
        }
        self.push(r, c, out, Op::LayerNorm { x, inv_std }, "layer_norm")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let v = self.value(x);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        self.push(c, r, out, Op::Transpose(x), "transpose")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > c {
            return Err(NnError::ShapeMismatch {
                op: "slice_cols",
                lhs: vec![r, c],
                rhs: vec![start, len],
            });
        }
        let out = self
            .value(x)
            .chunks(c)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        self.push(r, len, out, Op::SliceCols { x, start }, "slice_cols")
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if start + len > r {
            return Err(NnError::ShapeMismatch {
                op: "slice_rows",
                lhs: vec![r, c],
                rhs: vec![start, len],
            });
        }
        let out = self.value(x)[start * c..(start + len) * c].to_vec();
        self.push(len, c, out, Op::SliceRows { x, start }, "slice_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.shape(parts[0]).0;
        let mut cols = 0;
        for &p in parts {
            let (r, c) = self.shape(p);
            if r != rows {
                return Err(NnError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: vec![rows],
                    rhs: vec![r, c],
                });
            }
            cols += c;
        }
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                let c = self.shape(p).1;
                out.extend_from_slice(&self.value(p)[i * c..(i + 1) * c]);
            }
        }
        self.push(rows, cols, out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.shape(parts[0]).1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.shape(p);
            if c != cols {
                return Err(NnError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: vec![cols],
                    rhs: vec![r, c],
                });
            }
            rows += r;
            out.extend_from_slice(self.value(p));
        }
        self.push(rows, cols, out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x), "sum")
    }

    /// Divides each row by its Euclidean norm.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let mut out = Vec::with_capacity(r * c);
        let mut norms = Vec::with_capacity(r);
        for row in self.value(x).chunks(c) {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            norms.push(n);
            out.extend(row.iter().map(|v| v / n));
        }
        self.push(r, c, out, Op::NormalizeRows { x, norms }, "normalize_rows")
    }

    /// Hamilton product of two `[1, 4]` quaternions in (w, x, y, z) order.
    pub fn quat_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        for v in [a, b] {
            let s = self.shape(v);
            if s != (1, 4) {
                return Err(NnError::ShapeMismatch {
                    op: "quat_mul",
                    lhs: vec![1, 4],
                    rhs: vec![s.0, s.1],
                });
            }
        }
        let p = self.value(a);
        let q = self.value(b);
        let out = hamilton(p, q).to_vec();
        self.push(1, 4, out, Op::QuatMul(a, b), "quat_mul")
    }

    /// Reverse pass from a `[1, 1]` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(NnError::NonScalarLoss(vec![r, c]));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(NnError::NonFinite { op: node.name, node: i });
            }
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        let params = self.param_vars.iter().map(|(id, v)| (*id, *v)).collect();
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let (rows, cols) = (node.rows, node.cols);
        let out = self.value(Var(i));
        let wants = |v: Var| self.nodes[v.0].needs_grad;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            let len = self.nodes[v.0].rows * self.nodes[v.0].cols;
            let buf = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            f(buf);
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.shape(*a);
                let nn = cols;
                if wants(*a) {
                    let bv = self.value(*b);
                    acc(*a, &mut |da| {
                        for i in 0..m {
                            for p in 0..k {
                                let brow = &bv[p * nn..(p + 1) * nn];
                                let grow = &g[i * nn..(i + 1) * nn];
                                da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                }
                if wants(*b) {
                    let av = self.value(*a);
                    acc(*b, &mut |db| {
                        for i in 0..m {
                            let grow = &g[i * nn..(i + 1) * nn];
                            for p in 0..k {
                                let aip = av[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                let drow = &mut db[p * nn..(p + 1) * nn];
                                for (d, gv) in drow.iter_mut().zip(grow) {
                                    *d += aip * gv;
                                }
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g, 1.0));
                acc(*b, &mut |d| add_into(d, g, 1.0));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g, 1.0));
                acc(*b, &mut |d| add_into(d, g, -1.0));
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                acc(*a, &mut |d| {
                    for ((d, gv), y) in d.iter_mut().zip(g).zip(bv) {
                        *d += gv * y;
                    }
                });
                acc(*b, &mut |d| {
                    for ((d, gv), x) in d.iter_mut().zip(g).zip(av) {
                        *d += gv * x;
                    }
                });
            }
            Op::AddRow(x, bias) => {
                acc(*x, &mut |d| add_into(d, g, 1.0));
                acc(*bias, &mut |d| {
                    for row in g.chunks(cols) {
                        add_into(d, row, 1.0);
                    }
                });
            }
            Op::Scale(x, s) => acc(*x, &mut |d| add_into(d, g, *s)),
            Op::AddConst(x) => acc(*x, &mut |d| add_into(d, g, 1.0)),
            Op::Tanh(x) => acc(*x, &mut |d| {
                for ((d, gv), y) in d.iter_mut().zip(g).zip(out) {
                    *d += gv * (1.0 - y * y);
                }
            }),
            Op::Silu(x) => {
                let xv = self.value(*x);
                acc(*x, &mut |d| {
                    for ((d, gv), xi) in d.iter_mut().zip(g).zip(xv) {
                        let s = sigmoid(*xi);
                        *d += gv * s * (1.0 + xi * (1.0 - s));
                    }
                });
            }
            Op::Abs(x) => {
                let xv = self.value(*x);
                acc(*x, &mut |d| {
                    for ((d, gv), xi) in d.iter_mut().zip(g).zip(xv) {
                        if *xi > 0.0 {
                            *d += gv;
                        } else if *xi < 0.0 {
                            *d -= gv;
                        }
                    }
                });
            }
            Op::Softmax(x) => acc(*x, &mut |d| {
                for ((drow, grow), yrow) in d.chunks_mut(cols).zip(g.chunks(cols)).zip(out.chunks(cols)) {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((dv, gv), y) in drow.iter_mut().zip(grow).zip(yrow) {
                        *dv += y * (gv - dot);
                    }
                }
            }),
            Op::LayerNorm { x, inv_std } => acc(*x, &mut |d| {
                let n = cols as f64;
                for (r, ((drow, grow), yrow)) in d
                    .chunks_mut(cols)
                    .zip(g.chunks(cols))
                    .zip(out.chunks(cols))
                    .enumerate()
                {
                    let mean_g = grow.iter().sum::<f64>() / n;
                    let mean_gy = grow.iter().zip(yrow).map(|(a, b)| a * b).sum::<f64>() / n;
                    for ((dv, gv), y) in drow.iter_mut().zip(grow).zip(yrow) {
                        *dv += inv_std[r] * (gv - mean_g - y * mean_gy);
                    }
                }
            }),
            Op::Transpose(x) => acc(*x, &mut |d| {
                // out is [rows, cols]; input is [cols, rows]
                for i in 0..rows {
                    for j in 0..cols {
                        d[j * rows + i] += g[i * cols + j];
                    }
                }
            }),
            Op::SliceCols { x, start } => {
                let in_cols = self.shape(*x).1;
                acc(*x, &mut |d| {
                    for r in 0..rows {
                        let dst = &mut d[r * in_cols + start..r * in_cols + start + cols];
                        add_into(dst, &g[r * cols..(r + 1) * cols], 1.0);
                    }
                });
            }
            Op::SliceRows { x, start } => acc(*x, &mut |d| {
                add_into(&mut d[start * cols..(start + rows) * cols], g, 1.0);
            }),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let pc = self.shape(p).1;
                    acc(p, &mut |d| {
                        for r in 0..rows {
                            add_into(
                                &mut d[r * pc..(r + 1) * pc],
                                &g[r * cols + offset..r * cols + offset + pc],
                                1.0,
                            );
                        }
                    });
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.shape(p).0 * cols;
                    acc(p, &mut |d| add_into(d, &g[offset..offset + len], 1.0));
                    offset += len;
                }
            }
            Op::Sum(x) => acc(*x, &mut |d| d.iter_mut().for_each(|v| *v += g[0])),
            Op::NormalizeRows { x, norms } => acc(*x, &mut |d| {
                for (r, ((drow, grow), yrow)) in d
                    .chunks_mut(cols)
                    .zip(g.chunks(cols))
                    .zip(out.chunks(cols))
                    .enumerate()
                {
                    let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                    for ((dv, gv), y) in drow.iter_mut().zip(grow).zip(yrow) {
                        *dv += (gv - y * dot) / norms[r];
                    }
                }
            }),
            Op::QuatMul(a, b) => {
                let p = self.value(*a);
                let q = self.value(*b);
                let (gw, gx, gy, gz) = (g[0], g[1], g[2], g[3]);
                acc(*a, &mut |d| {
                    let (w2, x2, y2, z2) = (q[0], q[1], q[2], q[3]);
                    d[0] += gw * w2 + gx * x2 + gy * y2 + gz * z2;
                    d[1] += -gw * x2 + gx * w2 - gy * z2 + gz * y2;
                    d[2] += -gw * y2 + gx * z2 + gy * w2 - gz * x2;
                    d[3] += -gw * z2 - gx * y2 + gy * x2 + gz * w2;
                });
                acc(*b, &mut |d| {
                    let (w1, x1, y1, z1) = (p[0], p[1], p[2], p[3]);
                    d[0] += gw * w1 + gx * x1 + gy * y1 + gz * z1;
                    d[1] += -gw * x1 + gx * w1 + gy * z1 - gz * y1;
                    d[2] += -gw * y1 - gx * z1 + gy * w1 + gz * x1;
                    d[3] += -gw * z1 + gx * y1 - gy * x1 + gz * w1;
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64], s: f64) {
    for (d, v) in dst.iter_mut().zip(src) {
        *d += s * v;
    }
}

/// Hamilton product in (w, x, y, z) order.
pub fn hamilton(p: &[f64], q: &[f64]) -> [f64; 4] {
    let (w1, x1, y1, z1) = (p[0], p[1], p[2], p[3]);
    let (w2, x2, y2, z2) = (q[0], q[1], q[2], q[3]);
    [
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ]
}
