use super::kernels::{dot, matmul_acc, matmul_nt_acc, matmul_tn_acc};
use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;
use super::AutodiffError;

/// Fill value above the diagonal of a causal score matrix. Finite so that
/// every tensor stays finite; `exp` of it underflows to exactly zero.
pub const MASKED_SCORE: f32 = -1.0e9;
pub const LAYER_NORM_EPS: f32 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    MatMulNt(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f32),
    Relu(NodeId),
    Softmax(NodeId),
    LayerNorm { x: NodeId, gain: NodeId, bias: NodeId, normed: Vec<f32>, rstd: Vec<f32> },
    Embedding { table: NodeId, ids: Vec<u32> },
    Concat(Vec<NodeId>),
    Slice { x: NodeId, start: usize },
    CausalMask(NodeId),
    MaskedCrossEntropy { logits: NodeId, targets: Vec<u32>, mask: Vec<u8>, probs: Vec<f32>, count: usize },
    Sum(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatMulNt(..) => "matmul_nt",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Relu(_) => "relu",
            Op::Softmax(_) => "softmax",
            Op::LayerNorm { .. } => "layer_norm",
            Op::Embedding { .. } => "embedding",
            Op::Concat(_) => "concat",
            Op::Slice { .. } => "slice",
            Op::CausalMask(_) => "causal_mask",
            Op::MaskedCrossEntropy { .. } => "masked_cross_entropy",
            Op::Sum(_) => "sum",
        }
    }
}

struct Node {
    /// `None` for parameters, which are read from the store.
    value: Option<Tensor>,
    op: Op,
}

/// Records a forward computation for one reverse sweep. Nodes are appended in
/// evaluation order, so reverse insertion order is a reverse topological order.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Per-node gradients from one backward sweep.
pub struct NodeGrads {
    grads: Vec<Option<Tensor>>,
}

impl NodeGrads {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }
}

fn shape_err(msg: String) -> AutodiffError {
    AutodiffError::Shape(msg)
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::with_capacity(256) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match (&self.nodes[id.0].value, &self.nodes[id.0].op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.params.get(*p),
            _ => unreachable!("only parameters are stored by reference"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<NodeId, AutodiffError> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite(op.name().to_string()));
        }
        self.nodes.push(Node { value: Some(value), op });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Tensor) -> Result<NodeId, AutodiffError> {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node { value: None, op: Op::Param(id) });
        NodeId(self.nodes.len() - 1)
    }

    fn dims2(&self, id: NodeId) -> (usize, usize) {
        let v = self.value(id);
        (v.rows(), v.cols())
    }

    /// `[m,k] x [k,n]`
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let ((m, k), (k2, n)) = (self.dims2(a), self.dims2(b));
        if k != k2 || self.value(b).shape().len() != 2 {
            return Err(shape_err(format!("matmul {:?} x {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b))
    }

    /// `[m,k] x [n,k]^T`
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let ((m, k), (n, k2)) = (self.dims2(a), self.dims2(b));
        if k != k2 {
            return Err(shape_err(format!("matmul_nt {:?} x {:?}^T", self.value(a).shape(), self.value(b).shape())));
        }
        let mut out = vec![0.0; m * n];
        matmul_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMulNt(a, b))
    }

    fn zip_same(&mut self, a: NodeId, b: NodeId, f: fn(f32, f32) -> f32, op: Op) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(format!("{} {:?} vs {:?}", op.name(), va.shape(), vb.shape())));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        self.push(t, op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.zip_same(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.zip_same(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// `x[.., n] + row[n]`, broadcast over the leading dimensions.
    pub fn add_row(&mut self, x: NodeId, row: NodeId) -> Result<NodeId, AutodiffError> {
        let (vx, vr) = (self.value(x), self.value(row));
        let n = vx.cols();
        if vr.numel() != n {
            return Err(shape_err(format!("add_row {:?} + {:?}", vx.shape(), vr.shape())));
        }
        let mut data = vx.data().to_vec();
        for chunk in data.chunks_mut(n) {
            for (v, &b) in chunk.iter_mut().zip(vr.data()) {
                *v += b;
            }
        }
        let t = Tensor::new(vx.shape().to_vec(), data)?;
        self.push(t, Op::AddRow(x, row))
    }

    pub fn scale(&mut self, x: NodeId, s: f32) -> Result<NodeId, AutodiffError> {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a * s).collect())?;
        self.push(t, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let v = self.value(x);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&a| a.max(0.0)).collect())?;
        self.push(t, Op::Relu(x))
    }

    /// Row-wise softmax over the last dimension, max-subtracted.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let v = self.value(x);
        let n = v.cols();
        let mut data = v.data().to_vec();
        for row in data.chunks_mut(n) {
            softmax_in_place(row);
        }
        let t = Tensor::new(v.shape().to_vec(), data)?;
        self.push(t, Op::Softmax(x))
    }

    /// Row-wise layer normalization with learnable gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId, AutodiffError> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let n = vx.cols();
        if vg.numel() != n || vb.numel() != n {
            return Err(shape_err(format!("layer_norm {:?} with gain {:?}", vx.shape(), vg.shape())));
        }
        let rows = vx.rows();
        let mut normed = vec![0.0; rows * n];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; rows * n];
        for r in 0..rows {
            let xr = vx.row(r);
            let mean = xr.iter().sum::<f32>() / n as f32;
            let var = xr.iter().map(|&a| (a - mean) * (a - mean)).sum::<f32>() / n as f32;
            let rs = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..n {
                let h = (xr[j] - mean) * rs;
                normed[r * n + j] = h;
                out[r * n + j] = h * vg.data()[j] + vb.data()[j];
            }
        }
        let t = Tensor::new(vx.shape().to_vec(), out)?;
        self.push(t, Op::LayerNorm { x, gain, bias, normed, rstd })
    }

    /// Rows of `table[V, d]` selected by `ids`, giving `[ids.len(), d]`.
    pub fn embedding(&mut self, table: NodeId, ids: &[u32]) -> Result<NodeId, AutodiffError> {
        let (v, d) = self.dims2(table);
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id as usize >= v {
                return Err(AutodiffError::OutOfRange(format!("token id {id} with vocabulary {v}")));
            }
            out.extend_from_slice(tv.row(id as usize));
        }
        let t = Tensor::new(vec![ids.len(), d], out)?;
        self.push(t, Op::Embedding { table, ids: ids.to_vec() })
    }

    /// Concatenation along the last dimension of 2-D tensors with equal row counts.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let rows = self.dims2(parts[0]).0;
        if parts.iter().any(|&p| self.dims2(p).0 != rows) {
            return Err(shape_err("concat row counts differ".into()));
        }
        let total: usize = parts.iter().map(|&p| self.dims2(p).1).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let t = Tensor::new(vec![rows, total], out)?;
        self.push(t, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.dims2(x);
        if start + len > cols {
            return Err(shape_err(format!("slice {start}..{} of {cols} columns", start + len)));
        }
        let v = self.value(x);
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&v.row(r)[start..start + len]);
        }
        let t = Tensor::new(vec![rows, len], out)?;
        self.push(t, Op::Slice { x, start })
    }

    /// Square score matrix with entries above the diagonal set to [`MASKED_SCORE`].
    pub fn causal_mask(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let (rows, cols) = self.dims2(x);
        if rows != cols {
            return Err(shape_err(format!("causal_mask on {rows}x{cols}")));
        }
        let mut data = self.value(x).data().to_vec();
        for i in 0..rows {
            for v in &mut data[i * cols + i + 1..(i + 1) * cols] {
                *v = MASKED_SCORE;
            }
        }
        self.push(Tensor::new(vec![rows, cols], data)?, Op::CausalMask(x))
    }

    /// Mean over rows with `mask[t] == 1` of `-log softmax(logits[t])[targets[t]]`.
    /// Masked-out rows are never read.
    pub fn masked_cross_entropy(&mut self, logits: NodeId, targets: &[u32], mask: &[u8]) -> Result<NodeId, AutodiffError> {
        let (t_len, v) = self.dims2(logits);
        if targets.len() != t_len || mask.len() != t_len {
            return Err(shape_err(format!("{t_len} logit rows, {} targets, {} mask", targets.len(), mask.len())));
        }
        let count = mask.iter().filter(|&&m| m != 0).count();
        if count == 0 {
            return Err(AutodiffError::EmptyMask);
        }
        let lv = self.value(logits);
        let mut probs = vec![0.0f32; t_len * v];
        let mut total = 0.0f32;
        for t in 0..t_len {
            if mask[t] == 0 {
                continue;
            }
            let target = targets[t] as usize;
            if target >= v {
                return Err(AutodiffError::OutOfRange(format!("target {target} with {v} classes")));
            }
            let row = &mut probs[t * v..(t + 1) * v];
            row.copy_from_slice(lv.row(t));
            let max = row.iter().fold(f32::NEG_INFINITY, |m, &x| m.max(x));
            let mut z = 0.0f32;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            total += z.ln() - (lv.row(t)[target] - max);
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        let loss = Tensor::scalar(total / count as f32);
        self.push(loss, Op::MaskedCrossEntropy { logits, targets: targets.to_vec(), mask: mask.to_vec(), probs, count })
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId, AutodiffError> {
        let s = self.value(x).data().iter().sum::<f32>();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// Reverse sweep from scalar `loss`, seeded with `seed` (1.0 for a plain
    /// gradient). Parameter gradients are added into `param_grads`.
    pub fn backward_scaled(
        &self,
        loss: NodeId,
        seed: f32,
        param_grads: &mut Gradients,
    ) -> Result<NodeGrads, AutodiffError> {
        if self.value(loss).numel() != 1 {
            return Err(AutodiffError::NotScalar(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), seed));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !g.is_finite() {
                return Err(AutodiffError::NonFinite(format!("gradient of {}", self.nodes[idx].op.name())));
            }
            self.backprop_node(idx, &g, &mut grads, param_grads);
            grads[idx] = Some(g);
        }
        Ok(NodeGrads { grads })
    }

    pub fn backward(&self, loss: NodeId, param_grads: &mut Gradients) -> Result<NodeGrads, AutodiffError> {
        self.backward_scaled(loss, 1.0, param_grads)
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>], param_grads: &mut Gradients) {
        let acc = |grads: &mut [Option<Tensor>], id: NodeId, f: &mut dyn FnMut(&mut [f32])| {
            let slot = grads[id.0].get_or_insert_with(|| Tensor::zeros(self.value(id).shape()));
            f(slot.data_mut());
        };
        match &self.nodes[idx].op {
            Op::Input => {}
            Op::Param(p) => param_grads.get_mut(*p).add_assign(g),
            Op::MatMul(a, b) => {
                let ((m, k), n) = (self.dims2(*a), g.cols());
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(grads, *a, &mut |d| matmul_nt_acc(g.data(), vb, d, m, n, k));
                acc(grads, *b, &mut |d| matmul_tn_acc(va, g.data(), d, m, k, n));
            }
            Op::MatMulNt(a, b) => {
                let ((m, k), (n, _)) = (self.dims2(*a), self.dims2(*b));
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(grads, *a, &mut |d| matmul_acc(g.data(), vb, d, m, n, k));
                acc(grads, *b, &mut |d| matmul_tn_acc(g.data(), va, d, m, n, k));
            }
            Op::Add(a, b) => {
                for x in [a, b] {
                    acc(grads, *x, &mut |d| add_into(d, g.data()));
                }
            }
            Op::AddRow(x, row) => {
                acc(grads, *x, &mut |d| add_into(d, g.data()));
                let n = g.cols();
                acc(grads, *row, &mut |d| {
                    for chunk in g.data().chunks(n) {
                        add_into(d, chunk);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                acc(grads, *a, &mut |d| {
                    for ((d, &gv), &bv) in d.iter_mut().zip(g.data()).zip(vb) {
                        *d += gv * bv;
                    }
                });
                acc(grads, *b, &mut |d| {
                    for ((d, &gv), &av) in d.iter_mut().zip(g.data()).zip(va) {
                        *d += gv * av;
                    }
                });
            }
            Op::Scale(x, s) => acc(grads, *x, &mut |d| {
                for (d, &gv) in d.iter_mut().zip(g.data()) {
                    *d += gv * s;
                }
            }),
            Op::Relu(x) => {
                let vx = self.value(*x).data();
                acc(grads, *x, &mut |d| {
                    for ((d, &gv), &xv) in d.iter_mut().zip(g.data()).zip(vx) {
                        if xv > 0.0 {
                            *d += gv;
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let y = self.nodes[idx].value.as_ref().expect("softmax output");
                let n = y.cols();
                acc(grads, *x, &mut |d| {
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), &g.data()[r * n..(r + 1) * n]);
                        let s = dot(yr, gr);
                        for j in 0..n {
                            d[r * n + j] += yr[j] * (gr[j] - s);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias, normed, rstd } => {
                let n = g.cols();
                let rows = g.rows();
                let gv = self.value(*gain).data();
                acc(grads, *gain, &mut |d| {
                    for r in 0..rows {
                        for j in 0..n {
                            d[j] += g.data()[r * n + j] * normed[r * n + j];
                        }
                    }
                });
                acc(grads, *bias, &mut |d| {
                    for chunk in g.data().chunks(n) {
                        add_into(d, chunk);
                    }
                });
                acc(grads, *x, &mut |d| {
                    let mut dh = vec![0.0f32; n];
                    for r in 0..rows {
                        let h = &normed[r * n..(r + 1) * n];
                        for j in 0..n {
                            dh[j] = g.data()[r * n + j] * gv[j];
                        }
                        let mean_dh = dh.iter().sum::<f32>() / n as f32;
                        let mean_dh_h = dot(&dh, h) / n as f32;
                        for j in 0..n {
                            d[r * n + j] += rstd[r] * (dh[j] - mean_dh - h[j] * mean_dh_h);
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let dcols = g.cols();
                acc(grads, *table, &mut |d| {
                    for (r, &id) in ids.iter().enumerate() {
                        let id = id as usize;
                        add_into(&mut d[id * dcols..(id + 1) * dcols], g.row(r));
                    }
                });
            }
            Op::Concat(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for &p in parts {
                    let w = self.dims2(p).1;
                    acc(grads, p, &mut |d| {
                        for r in 0..rows {
                            add_into(&mut d[r * w..(r + 1) * w], &g.row(r)[offset..offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::Slice { x, start } => {
                let (rows, cols) = self.dims2(*x);
                let w = g.cols();
                acc(grads, *x, &mut |d| {
                    for r in 0..rows {
                        add_into(&mut d[r * cols + start..r * cols + start + w], g.row(r));
                    }
                });
            }
            Op::CausalMask(x) => {
                let n = g.cols();
                acc(grads, *x, &mut |d| {
                    for i in 0..n {
                        add_into(&mut d[i * n..i * n + i + 1], &g.row(i)[..=i]);
                    }
                });
            }
            Op::MaskedCrossEntropy { logits, targets, mask, probs, count } => {
                let v = self.dims2(*logits).1;
                let scale = g.item() / *count as f32;
                acc(grads, *logits, &mut |d| {
                    for (t, &m) in mask.iter().enumerate() {
                        if m == 0 {
                            continue;
                        }
                        let row = &mut d[t * v..(t + 1) * v];
                        for (dv, &p) in row.iter_mut().zip(&probs[t * v..(t + 1) * v]) {
                            *dv += p * scale;
                        }
                        row[targets[t] as usize] -= scale;
                    }
                });
            }
            Op::Sum(x) => {
                let s = g.item();
                acc(grads, *x, &mut |d| d.iter_mut().for_each(|v| *v += s));
            }
        }
    }
}

fn add_into(dst: &mut [f32], src: &[f32]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Max-subtracted softmax of one row.
pub fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().fold(f32::NEG_INFINITY, |m, &x| m.max(x));
    let mut z = 0.0f32;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        z += *x;
    }
    for x in row.iter_mut() {
        *x /= z;
    }
}
