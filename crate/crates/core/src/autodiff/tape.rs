//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! Every op appends a node holding its forward value and the handles of its
//! inputs. Nodes are appended in evaluation order, so walking the tape
//! backwards visits them in reverse topological order.

use std::sync::Arc;

use crate::error::{Error, Result};

use super::Tensor;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    SumRows(Var),
    SumCols(Var),
    SumAll(Var),
    SegmentSum(Var, Arc<[usize]>),
    GatherRows(Var, Arc<[usize]>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Transpose(Var),
    L2NormalizeRows(Var),
    Exp(Var),
    Log(Var),
    SoftmaxCrossEntropy(Var, Arc<[usize]>),
    Scale(Var, f64),
    ScaleBy(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records an input (parameter or constant). Gradients are accumulated
    /// for every leaf; callers ignore the ones they do not need.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("add", format!("{:?} + {:?}", x.shape(), y.shape())));
        }
        let mut out = x.clone();
        out.add_assign(y);
        self.push(out, Op::Add(a, b), "add")
    }

    /// Adds a `1 x cols` row to every row of `a` (bias add).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err("add_row", format!("{:?} + row {:?}", x.shape(), r.shape())));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        self.push(out, Op::AddRow(a, row), "add_row")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err("mul", format!("{:?} * {:?}", x.shape(), y.shape())));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let out = Tensor::from_vec(x.rows(), x.cols(), data)?;
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        self.push(out, Op::Relu(a), "relu")
    }

    /// Column sums as a `1 x cols` row.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut out = Tensor::zeros(1, x.cols());
        for i in 0..x.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        self.push(out, Op::SumRows(a), "sum_rows")
    }

    /// Row sums as a `rows x 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let data = (0..x.rows()).map(|i| x.row(i).iter().sum()).collect();
        let out = Tensor::from_vec(x.rows(), 1, data)?;
        self.push(out, Op::SumCols(a), "sum_cols")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a), "sum_all")
    }

    /// `out[s] = sum of rows i with segment[i] == s`, for `s < segments`.
    pub fn segment_sum(&mut self, a: Var, segment: Arc<[usize]>, segments: usize) -> Result<Var> {
        let x = self.value(a);
        if segment.len() != x.rows() {
            return Err(shape_err(
                "segment_sum",
                format!("{} segment ids for {} rows", segment.len(), x.rows()),
            ));
        }
        let mut out = Tensor::zeros(segments, x.cols());
        for (i, &s) in segment.iter().enumerate() {
            if s >= segments {
                return Err(shape_err("segment_sum", format!("segment id {s} >= {segments}")));
            }
            for (o, v) in out.row_mut(s).iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        self.push(out, Op::SegmentSum(a, segment), "segment_sum")
    }

    /// `out[k] = a[index[k]]`.
    pub fn gather_rows(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let x = self.value(a);
        let mut out = Tensor::zeros(index.len(), x.cols());
        for (k, &i) in index.iter().enumerate() {
            if i >= x.rows() {
                return Err(shape_err("gather_rows", format!("row {i} of {}", x.rows())));
            }
            out.row_mut(k).copy_from_slice(x.row(i));
        }
        self.push(out, Op::GatherRows(a, index), "gather_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        if let Some(p) = parts.iter().find(|&&p| self.value(p).rows() != rows) {
            return Err(shape_err(
                "concat_cols",
                format!("{} rows vs {rows}", self.value(*p).rows()),
            ));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for i in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                out.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        if let Some(p) = parts.iter().find(|&&p| self.value(p).cols() != cols) {
            return Err(shape_err(
                "concat_rows",
                format!("{} cols vs {cols}", self.value(*p).cols()),
            ));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let rows = data.len() / cols.max(1);
        let out = Tensor::from_vec(rows, cols, data)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a), "transpose")
    }

    /// Scales every row to unit Euclidean norm. A zero row is an error.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let mut out = x.clone();
        for i in 0..x.rows() {
            let n = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(Error::ZeroNorm);
            }
            out.row_mut(i).iter_mut().for_each(|v| *v /= n);
        }
        self.push(out, Op::L2NormalizeRows(a), "l2_normalize_rows")
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::exp);
        self.push(out, Op::Exp(a), "exp")
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::ln);
        self.push(out, Op::Log(a), "log")
    }

    /// Mean over rows of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: Arc<[usize]>) -> Result<Var> {
        let x = self.value(logits);
        if labels.len() != x.rows() || x.rows() == 0 {
            return Err(shape_err(
                "softmax_cross_entropy",
                format!("{} labels for {} rows", labels.len(), x.rows()),
            ));
        }
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            if y >= x.cols() {
                return Err(Error::LabelOutOfRange {
                    label: y,
                    classes: x.cols(),
                });
            }
            total += log_sum_exp(x.row(i)) - x.get(i, y);
        }
        let out = Tensor::scalar(total / x.rows() as f64);
        self.push(out, Op::SoftmaxCrossEntropy(logits, labels), "softmax_cross_entropy")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::Scale(a, c), "scale")
    }

    /// Multiplies `a` by the value of the `1 x 1` variable `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let sv = self.value(s);
        if sv.shape() != (1, 1) {
            return Err(shape_err("scale_by", format!("scalar has shape {:?}", sv.shape())));
        }
        let c = sv.item();
        let out = self.value(a).map(|x| c * x);
        self.push(out, Op::ScaleBy(a, s), "scale_by")
    }

    /// Gradients of the `1 x 1` value `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(shape_err("backward", format!("loss has shape {:?}", lv.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let mut acc = |v: Var, delta: Tensor| match &mut grads[v.0] {
                Some(t) => t.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            };
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    acc(*a, g.matmul(&y.transpose())?);
                    acc(*b, x.transpose().matmul(&g)?);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.clone());
                }
                Op::AddRow(a, r) => {
                    let mut gr = Tensor::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (o, v) in gr.data_mut().iter_mut().zip(g.row(i)) {
                            *o += v;
                        }
                    }
                    acc(*r, gr);
                    acc(*a, g.clone());
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let ga = zip_map(&g, y, |p, q| p * q);
                    let gb = zip_map(&g, x, |p, q| p * q);
                    acc(*a, ga);
                    acc(*b, gb);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    acc(*a, zip_map(&g, x, |p, q| if q > 0.0 { p } else { 0.0 }));
                }
                Op::SumRows(a) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        ga.row_mut(i).copy_from_slice(g.data());
                    }
                    acc(*a, ga);
                }
                Op::SumCols(a) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        let gi = g.data()[i];
                        ga.row_mut(i).iter_mut().for_each(|v| *v = gi);
                    }
                    acc(*a, ga);
                }
                Op::SumAll(a) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    ga.fill(g.item());
                    acc(*a, ga);
                }
                Op::SegmentSum(a, seg) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (i, &s) in seg.iter().enumerate() {
                        ga.row_mut(i).copy_from_slice(g.row(s));
                    }
                    acc(*a, ga);
                }
                Op::GatherRows(a, index) => {
                    let x = self.value(*a);
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (k, &i) in index.iter().enumerate() {
                        for (o, v) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    acc(*a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let c = self.value(p).cols();
                        let mut gp = Tensor::zeros(g.rows(), c);
                        for i in 0..g.rows() {
                            gp.row_mut(i).copy_from_slice(&g.row(i)[off..off + c]);
                        }
                        off += c;
                        acc(p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (r, c) = self.value(p).shape();
                        let gp = Tensor::from_vec(r, c, g.data()[off * c..(off + r) * c].to_vec())?;
                        off += r;
                        acc(p, gp);
                    }
                }
                Op::Transpose(a) => acc(*a, g.transpose()),
                Op::L2NormalizeRows(a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        let n = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                        let dot: f64 = y.row(i).iter().zip(g.row(i)).map(|(p, q)| p * q).sum();
                        for ((o, &gi), &yi) in ga.row_mut(i).iter_mut().zip(g.row(i)).zip(y.row(i)) {
                            *o = (gi - yi * dot) / n;
                        }
                    }
                    acc(*a, ga);
                }
                Op::Exp(a) => acc(*a, zip_map(&g, &node.value, |p, q| p * q)),
                Op::Log(a) => acc(*a, zip_map(&g, self.value(*a), |p, q| p / q)),
                Op::SoftmaxCrossEntropy(a, labels) => {
                    let x = self.value(*a);
                    let scale = g.item() / x.rows() as f64;
                    let mut ga = Tensor::zeros(x.rows(), x.cols());
                    for (i, &y) in labels.iter().enumerate() {
                        let row = x.row(i);
                        let lse = log_sum_exp(row);
                        for (c, o) in ga.row_mut(i).iter_mut().enumerate() {
                            let p = (row[c] - lse).exp();
                            *o = scale * (p - if c == y { 1.0 } else { 0.0 });
                        }
                    }
                    acc(*a, ga);
                }
                Op::Scale(a, c) => acc(*a, g.map(|v| c * v)),
                Op::ScaleBy(a, s) => {
                    let x = self.value(*a);
                    let c = self.value(*s).item();
                    let gs: f64 = g.data().iter().zip(x.data()).map(|(p, q)| p * q).sum();
                    acc(*a, g.map(|v| c * v));
                    acc(*s, Tensor::scalar(gs));
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&p, &q)| f(p, q)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for `v`, or `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for `v`, zeros shaped like `like` when absent.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.rows(), like.cols()))
    }
}
