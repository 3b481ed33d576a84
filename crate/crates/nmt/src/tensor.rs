//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! A [`Graph`] records every operation applied to [`Var`]s. Calling
//! [`Graph::backward`] on a `1 x 1` loss walks the record in reverse and
//! accumulates gradients for every parameter the graph touched.

use std::borrow::Cow;
use std::collections::HashMap;

use ndarray::{s, Array2, Axis, Zip};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Mat,
    pub trainable: bool,
    /// Sorted rows the optimizer leaves untouched.
    pub frozen_rows: Vec<usize>,
}

/// Named parameter tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn add(&mut self, name: &str, value: Mat) -> ParamId {
        assert!(!self.index.contains_key(name), "duplicate parameter {name}");
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param { name: name.to_string(), value, trainable: true, frozen_rows: Vec::new() });
        ParamId(self.params.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.params[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.params[id.0].value
    }

    pub fn param(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    /// Keeps the given rows fixed during training; other rows still learn.
    pub fn freeze_rows(&mut self, id: ParamId, rows: impl IntoIterator<Item = usize>) {
        let p = &mut self.params[id.0];
        let n = p.value.nrows();
        p.frozen_rows.extend(rows.into_iter().filter(|&r| r < n));
        p.frozen_rows.sort_unstable();
        p.frozen_rows.dedup();
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn fill(&mut self, v: f64) {
        for p in &mut self.params {
            p.value.fill(v);
        }
    }
}

/// Gradients aligned with a [`Params`] store; untouched entries stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grads {
    pub grads: Vec<Option<Mat>>,
}

impl Grads {
    pub fn new(n: usize) -> Self {
        Grads { grads: vec![None; n] }
    }

    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    fn accumulate(&mut self, id: ParamId, g: &Mat) {
        match &mut self.grads[id.0] {
            Some(acc) => *acc += g,
            slot @ None => *slot = Some(g.clone()),
        }
    }

    pub fn add(&mut self, other: &Grads) {
        if self.grads.len() < other.grads.len() {
            self.grads.resize(other.grads.len(), None);
        }
        for (i, g) in other.grads.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.mapv_inplace(|x| x * f);
        }
    }

    pub fn norm(&self) -> f64 {
        self.grads.iter().flatten().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
    }

    /// Rescales so the global norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip(&mut self, max_norm: f64) -> f64 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self.scale(max_norm / n);
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Gather(ParamId, Vec<usize>),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize, usize),
    SoftmaxRows(Var),
    Nll { logits: Var, targets: Vec<usize>, weights: Vec<f64>, probs: Mat },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Mat, inv_std: Vec<f64> },
    RepeatRows(Var, usize),
    Reshape(Var),
    WeightedSum { w: Var, mem: Var },
    Interleave(Vec<Var>),
    MaskRows { a: Var, b: Var, mask: Vec<bool> },
    SumAll(Var),
}

struct Node<'p> {
    value: Cow<'p, Mat>,
    op: Op,
}

/// One forward computation and its record.
pub struct Graph<'p> {
    params: &'p Params,
    nodes: Vec<Node<'p>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p Params) -> Self {
        Graph { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p Params {
        self.params
    }

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value: Cow::Owned(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(m, Op::Leaf)
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Mat::zeros((rows, cols)))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { value: Cow::Borrowed(self.params.get(id)), op: Op::Param(id) });
        Var(self.nodes.len() - 1)
    }

    /// Rows `ids` of a parameter matrix.
    pub fn gather(&mut self, id: ParamId, ids: &[usize]) -> Var {
        let p = self.params.get(id);
        let mut out = Mat::zeros((ids.len(), p.ncols()));
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).assign(&p.row(i));
        }
        self.push(out, Op::Gather(id, ids.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a @ b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b).t());
        self.push(v, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1);
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, f: f64) -> Var {
        let v = self.value(a) * f;
        self.push(v, Op::Scale(a, f))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows col mismatch");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start, end))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// `sum_i w_i * -log softmax(logits_i)[t_i]` as a `1 x 1` value.
    pub fn nll(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Var {
        let z = self.value(logits);
        assert_eq!(z.nrows(), targets.len());
        assert_eq!(targets.len(), weights.len());
        let mut probs = z.clone();
        let mut loss = 0.0;
        for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            loss += weights[i] * (lse - row[targets[i]]);
            row.mapv_inplace(|x| (x - lse).exp());
        }
        let op = Op::Nll { logits, targets: targets.to_vec(), weights: weights.to_vec(), probs };
        self.push(Mat::from_elem((1, 1), loss), op)
    }

    /// Row-wise normalization with `1 x d` gain and bias.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mu = row.sum() / d;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| (v - mu) * is);
            inv_std.push(is);
        }
        let y = &xhat * self.value(gain) + self.value(bias);
        self.push(y, Op::LayerNorm { x, gain, bias, xhat, inv_std })
    }

    /// Repeats each row `times` times consecutively.
    pub fn repeat_rows(&mut self, a: Var, times: usize) -> Var {
        let av = self.value(a);
        let mut v = Mat::zeros((av.nrows() * times, av.ncols()));
        for (i, row) in av.rows().into_iter().enumerate() {
            for k in 0..times {
                v.row_mut(i * times + k).assign(&row);
            }
        }
        self.push(v, Op::RepeatRows(a, times))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let flat: Vec<f64> = self.value(a).iter().copied().collect();
        let v = Mat::from_shape_vec((rows, cols), flat).expect("reshape size mismatch");
        self.push(v, Op::Reshape(a))
    }

    /// For `w: B x T` and `mem: (B*T) x H` (row `b*T + t`), returns `B x H`
    /// with row `b = sum_t w[b,t] * mem[b*T+t]`.
    pub fn weighted_sum(&mut self, w: Var, mem: Var) -> Var {
        let (b, t) = self.shape(w);
        let m = self.value(mem);
        assert_eq!(m.nrows(), b * t);
        let wv = self.value(w);
        let mut out = Mat::zeros((b, m.ncols()));
        for i in 0..b {
            let mut row = out.row_mut(i);
            for j in 0..t {
                row.scaled_add(wv[[i, j]], &m.row(i * t + j));
            }
        }
        self.push(out, Op::WeightedSum { w, mem })
    }

    /// Stacks `T` matrices of shape `B x H` into `(B*T) x H` with row
    /// `b*T + t` taken from `parts[t]`.
    pub fn interleave(&mut self, parts: &[Var]) -> Var {
        let t = parts.len();
        let (b, h) = self.shape(parts[0]);
        let mut out = Mat::zeros((b * t, h));
        for (j, &p) in parts.iter().enumerate() {
            for (i, row) in self.value(p).rows().into_iter().enumerate() {
                out.row_mut(i * t + j).assign(&row);
            }
        }
        self.push(out, Op::Interleave(parts.to_vec()))
    }

    /// Row `i` from `a` where `mask[i]`, else from `b`.
    pub fn mask_rows(&mut self, a: Var, b: Var, mask: &[bool]) -> Var {
        assert_eq!(self.shape(a), self.shape(b));
        let mut v = self.value(b).clone();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                v.row_mut(i).assign(&self.value(a).row(i));
            }
        }
        self.push(v, Op::MaskRows { a, b, mask: mask.to_vec() })
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Mat::from_elem((1, 1), s), Op::SumAll(a))
    }

    /// Gradients of the scalar `loss` with respect to every parameter used.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads = Grads::new(self.params.len());
        let mut g: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        g[loss.0] = Some(Mat::from_elem((1, 1), 1.0));
        for i in (0..=loss.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let send = |v: Var, d: Mat, g: &mut Vec<Option<Mat>>| match &mut g[v.0] {
                Some(acc) => *acc += &d,
                slot @ None => *slot = Some(d),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    if self.params.param(*id).trainable {
                        grads.accumulate(*id, &gi);
                    }
                }
                Op::Gather(id, ids) => {
                    if self.params.param(*id).trainable {
                        let p = self.params.get(*id);
                        let mut d = Mat::zeros(p.dim());
                        for (r, &k) in ids.iter().enumerate() {
                            let mut row = d.row_mut(k);
                            row += &gi.row(r);
                        }
                        grads.accumulate(*id, &d);
                    }
                }
                Op::MatMul(a, b) => {
                    let da = gi.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&gi);
                    send(*a, da, &mut g);
                    send(*b, db, &mut g);
                }
                Op::MatMulT(a, b) => {
                    let da = gi.dot(self.value(*b));
                    let db = gi.t().dot(self.value(*a));
                    send(*a, da, &mut g);
                    send(*b, db, &mut g);
                }
                Op::Add(a, b) => {
                    send(*a, gi.clone(), &mut g);
                    send(*b, gi, &mut g);
                }
                Op::AddRow(a, r) => {
                    let dr = gi.sum_axis(Axis(0)).insert_axis(Axis(0));
                    send(*r, dr, &mut g);
                    send(*a, gi, &mut g);
                }
                Op::Mul(a, b) => {
                    let da = &gi * self.value(*b);
                    let db = &gi * self.value(*a);
                    send(*a, da, &mut g);
                    send(*b, db, &mut g);
                }
                Op::Scale(a, f) => send(*a, gi * *f, &mut g),
                Op::Sigmoid(a) => {
                    let mut d = gi;
                    Zip::from(&mut d).and(&*node.value).for_each(|d, &y| *d *= y * (1.0 - y));
                    send(*a, d, &mut g);
                }
                Op::Tanh(a) => {
                    let mut d = gi;
                    Zip::from(&mut d).and(&*node.value).for_each(|d, &y| *d *= 1.0 - y * y);
                    send(*a, d, &mut g);
                }
                Op::Relu(a) => {
                    let mut d = gi;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d = 0.0
                        }
                    });
                    send(*a, d, &mut g);
                }
                Op::ConcatCols(parts) => {
                    let mut c = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        send(p, gi.slice(s![.., c..c + w]).to_owned(), &mut g);
                        c += w;
                    }
                }
                Op::SliceCols(a, st, en) => {
                    let mut d = Mat::zeros(self.shape(*a));
                    d.slice_mut(s![.., *st..*en]).assign(&gi);
                    send(*a, d, &mut g);
                }
                Op::ConcatRows(parts) => {
                    let mut r = 0;
                    for &p in parts {
                        let h = self.shape(p).0;
                        send(p, gi.slice(s![r..r + h, ..]).to_owned(), &mut g);
                        r += h;
                    }
                }
                Op::SliceRows(a, st, en) => {
                    let mut d = Mat::zeros(self.shape(*a));
                    d.slice_mut(s![*st..*en, ..]).assign(&gi);
                    send(*a, d, &mut g);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut d = gi;
                    for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot: f64 = drow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                        Zip::from(&mut drow).and(&yrow).for_each(|d, &y| *d = y * (*d - dot));
                    }
                    send(*a, d, &mut g);
                }
                Op::Nll { logits, targets, weights, probs } => {
                    let up = gi[[0, 0]];
                    let mut d = probs.clone();
                    for (i, mut row) in d.rows_mut().into_iter().enumerate() {
                        row[targets[i]] -= 1.0;
                        row.mapv_inplace(|x| x * weights[i] * up);
                    }
                    send(*logits, d, &mut g);
                }
                Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                    let gv = self.value(*gain);
                    let dgain = (&gi * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dbias = gi.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dxhat = &gi * gv;
                    let n = xhat.ncols() as f64;
                    let mut dx = Mat::zeros(xhat.dim());
                    for r in 0..xhat.nrows() {
                        let dh = dxhat.row(r);
                        let xh = xhat.row(r);
                        let mean_dh = dh.sum() / n;
                        let mean_dhx = dh.iter().zip(xh.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
                        let mut out = dx.row_mut(r);
                        for c in 0..out.len() {
                            out[c] = inv_std[r] * (dh[c] - mean_dh - xh[c] * mean_dhx);
                        }
                    }
                    send(*x, dx, &mut g);
                    send(*gain, dgain, &mut g);
                    send(*bias, dbias, &mut g);
                }
                Op::RepeatRows(a, times) => {
                    let (r, c) = self.shape(*a);
                    let mut d = Mat::zeros((r, c));
                    for i in 0..r {
                        let mut row = d.row_mut(i);
                        for k in 0..*times {
                            row += &gi.row(i * times + k);
                        }
                    }
                    send(*a, d, &mut g);
                }
                Op::Reshape(a) => {
                    let flat: Vec<f64> = gi.iter().copied().collect();
                    let d = Mat::from_shape_vec(self.shape(*a), flat).expect("reshape");
                    send(*a, d, &mut g);
                }
                Op::WeightedSum { w, mem } => {
                    let (b, t) = self.shape(*w);
                    let wv = self.value(*w);
                    let m = self.value(*mem);
                    let mut dw = Mat::zeros((b, t));
                    let mut dm = Mat::zeros(m.dim());
                    for i in 0..b {
                        let gr = gi.row(i);
                        for j in 0..t {
                            let mr = m.row(i * t + j);
                            dw[[i, j]] = gr.iter().zip(mr.iter()).map(|(a, b)| a * b).sum();
                            dm.row_mut(i * t + j).scaled_add(wv[[i, j]], &gr);
                        }
                    }
                    send(*w, dw, &mut g);
                    send(*mem, dm, &mut g);
                }
                Op::Interleave(parts) => {
                    let t = parts.len();
                    for (j, &p) in parts.iter().enumerate() {
                        let (b, h) = self.shape(p);
                        let mut d = Mat::zeros((b, h));
                        for i in 0..b {
                            d.row_mut(i).assign(&gi.row(i * t + j));
                        }
                        send(p, d, &mut g);
                    }
                }
                Op::MaskRows { a, b, mask } => {
                    let mut da = gi.clone();
                    let mut db = gi;
                    for (i, &m) in mask.iter().enumerate() {
                        if m {
                            db.row_mut(i).fill(0.0);
                        } else {
                            da.row_mut(i).fill(0.0);
                        }
                    }
                    send(*a, da, &mut g);
                    send(*b, db, &mut g);
                }
                Op::SumAll(a) => {
                    let d = Mat::from_elem(self.shape(*a), gi[[0, 0]]);
                    send(*a, d, &mut g);
                }
            }
        }
        grads
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matmul_gradient_by_hand() {
        let mut p = Params::new();
        let a = p.add("a", array![[1.0, 2.0], [3.0, 4.0]]);
        let b = p.add("b", array![[5.0], [6.0]]);
        let mut g = Graph::new(&p);
        let (va, vb) = (g.param(a), g.param(b));
        let y = g.matmul(va, vb);
        let l = g.sum_all(y);
        assert_eq!(g.scalar(l), 17.0 + 39.0);
        let gr = g.backward(l);
        assert_eq!(gr.get(a).unwrap(), &array![[5.0, 6.0], [5.0, 6.0]]);
        assert_eq!(gr.get(b).unwrap(), &array![[4.0], [6.0]]);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = Params::new();
        let mut g = Graph::new(&p);
        let x = g.constant(array![[1.0, 2.0, 3.0], [1000.0, 1000.0, -5.0]]);
        let y = g.softmax_rows(x);
        for row in g.value(y).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_params_get_no_gradient() {
        let mut p = Params::new();
        let a = p.add("a", array![[1.0]]);
        p.set_trainable(a, false);
        let mut g = Graph::new(&p);
        let v = g.param(a);
        let l = g.sum_all(v);
        assert!(g.backward(l).get(a).is_none());
    }

    #[test]
    fn clip_rescales() {
        let mut gr = Grads::new(1);
        gr.grads[0] = Some(array![[3.0, 4.0]]);
        assert_eq!(gr.clip(1.0), 5.0);
        assert!((gr.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interleave_and_weighted_sum() {
        let p = Params::new();
        let mut g = Graph::new(&p);
        let h0 = g.constant(array![[1.0], [10.0]]);
        let h1 = g.constant(array![[2.0], [20.0]]);
        let mem = g.interleave(&[h0, h1]);
        assert_eq!(g.value(mem), &array![[1.0], [2.0], [10.0], [20.0]]);
        let w = g.constant(array![[0.25, 0.75], [1.0, 0.0]]);
        let c = g.weighted_sum(w, mem);
        assert_eq!(g.value(c), &array![[1.75], [10.0]]);
    }
}
