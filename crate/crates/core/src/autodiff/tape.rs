//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every operation executed through a [`Tape`] appends one record holding its
//! output value, the handles of its inputs and whatever intermediates the
//! backward rule needs. [`Tape::backward`] walks the records once, newest
//! first, accumulating gradients by summation. A fresh tape per training step
//! gives zeroed gradients for free.

use std::sync::Arc;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "slope")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    LeakyRelu(f64),
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
        }
    }

    /// Derivative expressed through input `x` and output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            // subgradient at 0 is 0
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduce {
    Sum,
    Mean,
    Max,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Elementwise(ElementwiseKind, Var, Var),
    Scale(Var, f64),
    AddRowBias(Var, Var),
    RowScale(Var, Var),
    ConcatCols(Var, Var),
    Activation(Var, Activation),
    GatherRows(Var, Arc<Vec<usize>>),
    SegmentReduce {
        input: Var,
        segments: Arc<Vec<usize>>,
        kind: Reduce,
        /// Mean: per-segment counts. Max: winning row per (segment, column).
        counts: Vec<usize>,
        argmax: Vec<usize>,
    },
    GatherReduce {
        input: Var,
        sources: Arc<Vec<usize>>,
        targets: Arc<Vec<usize>>,
        /// Per-target scale applied in the forward pass (1 for sums).
        scale: Vec<f64>,
    },
    SegmentSoftmax(Var, Arc<Vec<usize>>, usize),
    L2NormalizeRows(Var, Vec<f64>),
    SumAll(Var),
    BceWithLogits(Var, Vec<f64>),
    CrossEntropy(Var, Vec<usize>),
    Mse(Var, Matrix),
}

struct Record {
    value: Matrix,
    grad: Option<Matrix>,
    requires_grad: bool,
    op: Op,
}

/// Numerical guard for row normalization.
pub const L2_EPS: f64 = 1e-12;

/// Marker for "no element" in max-reduction argmax tables.
const NO_ROW: usize = usize::MAX;

#[derive(Default)]
pub struct Tape {
    records: Vec<Record>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.records.push(Record {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.records.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.records[v.0].requires_grad
    }

    /// Trainable leaf; gradients are accumulated for it.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.records[v.0].value
    }

    /// Accumulated gradient; `None` before `backward` or for constants.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.records[v.0].grad.as_ref()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn elementwise(&mut self, a: Var, b: Var, kind: ElementwiseKind) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::shape(
                "elementwise",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let data = va
            .as_slice()
            .iter()
            .zip(vb.as_slice())
            .map(|(x, y)| match kind {
                ElementwiseKind::Add => x + y,
                ElementwiseKind::Sub => x - y,
                ElementwiseKind::Mul => x * y,
            })
            .collect();
        let value = Matrix::from_vec(va.rows(), va.cols(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Elementwise(kind, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, ElementwiseKind::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, ElementwiseKind::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, ElementwiseKind::Mul)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    /// Adds a `1×n` bias row to every row of an `m×n` input.
    pub fn add_row_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(bias));
        if vb.rows() != 1 || vb.cols() != va.cols() {
            return Err(Error::shape(
                "add_row_bias",
                format!("input {:?}, bias {:?}", va.shape(), vb.shape()),
            ));
        }
        let mut value = va.clone();
        let b = vb.as_slice().to_vec();
        for r in 0..value.rows() {
            for (x, y) in value.row_mut(r).iter_mut().zip(&b) {
                *x += y;
            }
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(value, Op::AddRowBias(a, bias), rg))
    }

    /// Multiplies row `i` of an `m×d` input by `s[i]` where `s` is `m×1`.
    pub fn row_scale(&mut self, a: Var, s: Var) -> Result<Var> {
        let (va, vs) = (self.value(a), self.value(s));
        if vs.cols() != 1 || vs.rows() != va.rows() {
            return Err(Error::shape(
                "row_scale",
                format!("input {:?}, scale {:?}", va.shape(), vs.shape()),
            ));
        }
        let mut value = va.clone();
        for r in 0..value.rows() {
            let c = vs.get(r, 0);
            for x in value.row_mut(r) {
                *x *= c;
            }
        }
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(value, Op::RowScale(a, s), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rows() != vb.rows() {
            return Err(Error::shape(
                "concat_cols",
                format!("{} rows vs {} rows", va.rows(), vb.rows()),
            ));
        }
        let (p, q) = (va.cols(), vb.cols());
        let mut value = Matrix::zeros(va.rows(), p + q);
        for r in 0..va.rows() {
            let row = value.row_mut(r);
            row[..p].copy_from_slice(va.row(r));
            row[p..].copy_from_slice(vb.row(r));
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::ConcatCols(a, b), rg))
    }

    pub fn activation(&mut self, a: Var, kind: Activation) -> Var {
        let value = self.value(a).map(|x| kind.apply(x));
        let rg = self.rg(a);
        self.push(value, Op::Activation(a, kind), rg)
    }

    /// Row `k` of the output is row `index[k]` of the input.
    pub fn gather_rows(&mut self, h: Var, index: Arc<Vec<usize>>) -> Result<Var> {
        let vh = self.value(h);
        if let Some(&bad) = index.iter().find(|&&i| i >= vh.rows()) {
            return Err(Error::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                limit: vh.rows(),
            });
        }
        let value = vh.select_rows(&index);
        let rg = self.rg(h);
        Ok(self.push(value, Op::GatherRows(h, index), rg))
    }

    /// Reduces row `k` of the input into output row `segments[k]`.
    /// Empty segments produce zero rows for every reduction kind.
    pub fn segment_reduce(
        &mut self,
        rows: Var,
        segments: Arc<Vec<usize>>,
        num_segments: usize,
        kind: Reduce,
    ) -> Result<Var> {
        let vr = self.value(rows);
        check_segments("segment_reduce", vr.rows(), &segments, num_segments)?;
        let d = vr.cols();
        let mut value = Matrix::zeros(num_segments, d);
        let mut counts = vec![0usize; num_segments];
        for &s in segments.iter() {
            counts[s] += 1;
        }
        let mut argmax = Vec::new();
        match kind {
            Reduce::Sum | Reduce::Mean => {
                for (k, &s) in segments.iter().enumerate() {
                    for (o, x) in value.row_mut(s).iter_mut().zip(vr.row(k)) {
                        *o += x;
                    }
                }
                if kind == Reduce::Mean {
                    for (s, &c) in counts.iter().enumerate() {
                        if c > 0 {
                            let inv = 1.0 / c as f64;
                            value.row_mut(s).iter_mut().for_each(|x| *x *= inv);
                        }
                    }
                }
            }
            Reduce::Max => {
                argmax = vec![NO_ROW; num_segments * d];
                for (k, &s) in segments.iter().enumerate() {
                    let row = vr.row(k);
                    for j in 0..d {
                        let slot = &mut argmax[s * d + j];
                        // strict comparison keeps the lowest index on ties
                        if *slot == NO_ROW || row[j] > vr.get(*slot, j) {
                            *slot = k;
                        }
                    }
                }
                for s in 0..num_segments {
                    for j in 0..d {
                        let k = argmax[s * d + j];
                        if k != NO_ROW {
                            value.set(s, j, vr.get(k, j));
                        }
                    }
                }
            }
        }
        let rg = self.rg(rows);
        Ok(self.push(
            value,
            Op::SegmentReduce {
                input: rows,
                segments,
                kind,
                counts,
                argmax,
            },
            rg,
        ))
    }

    /// `gather_rows` followed by `segment_reduce` without materializing the
    /// gathered rows. Max reductions take the unfused path.
    pub fn gather_reduce(
        &mut self,
        h: Var,
        sources: Arc<Vec<usize>>,
        targets: Arc<Vec<usize>>,
        num_segments: usize,
        kind: Reduce,
    ) -> Result<Var> {
        if kind == Reduce::Max {
            let rows = self.gather_rows(h, sources)?;
            return self.segment_reduce(rows, targets, num_segments, kind);
        }
        let vh = self.value(h);
        if let Some(&bad) = sources.iter().find(|&&i| i >= vh.rows()) {
            return Err(Error::IndexOutOfRange {
                op: "gather_reduce",
                index: bad,
                limit: vh.rows(),
            });
        }
        check_segments("gather_reduce", sources.len(), &targets, num_segments)?;
        let mut value = Matrix::zeros(num_segments, vh.cols());
        for (&u, &v) in sources.iter().zip(targets.iter()) {
            for (o, x) in value.row_mut(v).iter_mut().zip(vh.row(u)) {
                *o += x;
            }
        }
        let mut scale = vec![1.0; num_segments];
        if kind == Reduce::Mean {
            let mut counts = vec![0usize; num_segments];
            for &v in targets.iter() {
                counts[v] += 1;
            }
            for (s, &c) in counts.iter().enumerate() {
                if c > 0 {
                    scale[s] = 1.0 / c as f64;
                    value.row_mut(s).iter_mut().for_each(|x| *x *= scale[s]);
                }
            }
        }
        let rg = self.rg(h);
        Ok(self.push(
            value,
            Op::GatherReduce {
                input: h,
                sources,
                targets,
                scale,
            },
            rg,
        ))
    }

    /// Softmax of an `|E|×1` score column within each segment.
    pub fn segment_softmax(
        &mut self,
        scores: Var,
        segments: Arc<Vec<usize>>,
        num_segments: usize,
    ) -> Result<Var> {
        let vs = self.value(scores);
        if vs.cols() != 1 {
            return Err(Error::shape(
                "segment_softmax",
                format!("scores must be a column, got {:?}", vs.shape()),
            ));
        }
        check_segments("segment_softmax", vs.rows(), &segments, num_segments)?;
        let mut seg_max = vec![f64::NEG_INFINITY; num_segments];
        for (k, &s) in segments.iter().enumerate() {
            seg_max[s] = seg_max[s].max(vs.get(k, 0));
        }
        let mut exps: Vec<f64> = segments
            .iter()
            .enumerate()
            .map(|(k, &s)| (vs.get(k, 0) - seg_max[s]).exp())
            .collect();
        let mut seg_sum = vec![0.0; num_segments];
        for (k, &s) in segments.iter().enumerate() {
            seg_sum[s] += exps[k];
        }
        for (k, &s) in segments.iter().enumerate() {
            exps[k] /= seg_sum[s];
        }
        let value = Matrix::column(&exps);
        let rg = self.rg(scores);
        Ok(self.push(value, Op::SegmentSoftmax(scores, segments, num_segments), rg))
    }

    /// Divides each row by its Euclidean norm; rows with norm ≤ [`L2_EPS`] pass through.
    pub fn l2_normalize_rows(&mut self, h: Var) -> Var {
        let vh = self.value(h);
        let mut value = vh.clone();
        let mut norms = Vec::with_capacity(vh.rows());
        for r in 0..vh.rows() {
            let n = vh.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
            norms.push(n);
            if n > L2_EPS {
                value.row_mut(r).iter_mut().for_each(|x| *x /= n);
            }
        }
        let rg = self.rg(h);
        self.push(value, Op::L2NormalizeRows(h, norms), rg)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::SumAll(a), rg)
    }

    /// Mean binary cross-entropy over an `n×1` logit column with targets in {0,1}
    /// (any value in [0,1] is accepted).
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var> {
        let vl = self.value(logits);
        if vl.cols() != 1 || vl.rows() != targets.len() {
            return Err(Error::shape(
                "bce_with_logits",
                format!("logits {:?}, {} targets", vl.shape(), targets.len()),
            ));
        }
        if let Some(t) = targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::InvalidArgument(format!(
                "binary target {t} outside [0, 1]"
            )));
        }
        let n = targets.len().max(1) as f64;
        let loss = vl
            .as_slice()
            .iter()
            .zip(targets)
            .map(|(&x, &t)| softplus(x) - x * t)
            .sum::<f64>()
            / n;
        let rg = self.rg(logits);
        Ok(self.push(
            Matrix::scalar(loss),
            Op::BceWithLogits(logits, targets.to_vec()),
            rg,
        ))
    }

    /// Mean multi-class cross-entropy of `n×C` logits against class indices.
    pub fn cross_entropy(&mut self, logits: Var, classes: &[usize]) -> Result<Var> {
        let vl = self.value(logits);
        if vl.rows() != classes.len() {
            return Err(Error::shape(
                "cross_entropy",
                format!("logits {:?}, {} targets", vl.shape(), classes.len()),
            ));
        }
        if let Some(&c) = classes.iter().find(|&&c| c >= vl.cols()) {
            return Err(Error::IndexOutOfRange {
                op: "cross_entropy",
                index: c,
                limit: vl.cols(),
            });
        }
        let n = classes.len().max(1) as f64;
        let loss = classes
            .iter()
            .enumerate()
            .map(|(r, &c)| log_sum_exp(vl.row(r)) - vl.get(r, c))
            .sum::<f64>()
            / n;
        let rg = self.rg(logits);
        Ok(self.push(
            Matrix::scalar(loss),
            Op::CrossEntropy(logits, classes.to_vec()),
            rg,
        ))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: &Matrix) -> Result<Var> {
        let vp = self.value(pred);
        if vp.shape() != target.shape() {
            return Err(Error::shape(
                "mse",
                format!("{:?} vs {:?}", vp.shape(), target.shape()),
            ));
        }
        let n = vp.as_slice().len().max(1) as f64;
        let loss = vp
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / n;
        let rg = self.rg(pred);
        Ok(self.push(Matrix::scalar(loss), Op::Mse(pred, target.clone()), rg))
    }

    /// Propagates gradients from a scalar output back to every trainable leaf.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        let shape = self.value(output).shape();
        if shape != (1, 1) {
            return Err(Error::shape(
                "backward",
                format!("output must be scalar, got {shape:?}"),
            ));
        }
        for rec in &mut self.records {
            rec.grad = None;
        }
        if !self.rg(output) {
            return Ok(());
        }
        self.records[output.0].grad = Some(Matrix::scalar(1.0));
        for idx in (0..=output.0).rev() {
            if !self.records[idx].requires_grad {
                continue;
            }
            let Some(upstream) = self.records[idx].grad.take() else {
                continue;
            };
            self.backprop_record(idx, &upstream)?;
            // intermediate gradients are released once propagated
            if matches!(self.records[idx].op, Op::Leaf) {
                self.records[idx].grad = Some(upstream);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, g: Matrix) {
        let rec = &mut self.records[v.0];
        if !rec.requires_grad {
            return;
        }
        match &mut rec.grad {
            Some(acc) => acc.add_assign(&g),
            None => rec.grad = Some(g),
        }
    }

    fn backprop_record(&mut self, idx: usize, up: &Matrix) -> Result<()> {
        // Temporarily detach the op so inputs can be borrowed mutably.
        let op = std::mem::replace(&mut self.records[idx].op, Op::Leaf);
        let result = self.backprop_op(idx, &op, up);
        self.records[idx].op = op;
        result
    }

    fn backprop_op(&mut self, idx: usize, op: &Op, up: &Matrix) -> Result<()> {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(a) {
                    let g = up.matmul_t(self.value(b))?;
                    self.accumulate(a, g);
                }
                if self.rg(b) {
                    let g = self.value(a).t_matmul(up)?;
                    self.accumulate(b, g);
                }
            }
            Op::Elementwise(kind, a, b) => match kind {
                ElementwiseKind::Add => {
                    if self.rg(a) {
                        self.accumulate(a, up.clone());
                    }
                    if self.rg(b) {
                        self.accumulate(b, up.clone());
                    }
                }
                ElementwiseKind::Sub => {
                    if self.rg(a) {
                        self.accumulate(a, up.clone());
                    }
                    if self.rg(b) {
                        self.accumulate(b, up.map(|x| -x));
                    }
                }
                ElementwiseKind::Mul => {
                    if self.rg(a) {
                        let g = hadamard(up, self.value(b));
                        self.accumulate(a, g);
                    }
                    if self.rg(b) {
                        let g = hadamard(up, self.value(a));
                        self.accumulate(b, g);
                    }
                }
            },
            Op::Scale(a, c) => self.accumulate(a, up.map(|x| x * c)),
            Op::AddRowBias(a, bias) => {
                if self.rg(a) {
                    self.accumulate(a, up.clone());
                }
                if self.rg(bias) {
                    let mut g = Matrix::zeros(1, up.cols());
                    for r in 0..up.rows() {
                        for (o, x) in g.as_mut_slice().iter_mut().zip(up.row(r)) {
                            *o += x;
                        }
                    }
                    self.accumulate(bias, g);
                }
            }
            Op::RowScale(a, s) => {
                if self.rg(a) {
                    let vs = self.value(s);
                    let mut g = up.clone();
                    for r in 0..g.rows() {
                        let c = vs.get(r, 0);
                        g.row_mut(r).iter_mut().for_each(|x| *x *= c);
                    }
                    self.accumulate(a, g);
                }
                if self.rg(s) {
                    let va = self.value(a);
                    let data = (0..up.rows())
                        .map(|r| up.row(r).iter().zip(va.row(r)).map(|(u, x)| u * x).sum())
                        .collect::<Vec<f64>>();
                    self.accumulate(s, Matrix::column(&data));
                }
            }
            Op::ConcatCols(a, b) => {
                let p = self.value(a).cols();
                let q = self.value(b).cols();
                if self.rg(a) {
                    let mut ga = Matrix::zeros(up.rows(), p);
                    for r in 0..up.rows() {
                        ga.row_mut(r).copy_from_slice(&up.row(r)[..p]);
                    }
                    self.accumulate(a, ga);
                }
                if self.rg(b) {
                    let mut gb = Matrix::zeros(up.rows(), q);
                    for r in 0..up.rows() {
                        gb.row_mut(r).copy_from_slice(&up.row(r)[p..]);
                    }
                    self.accumulate(b, gb);
                }
            }
            Op::Activation(a, kind) => {
                let x = self.value(a).as_slice();
                let y = self.records[idx].value.as_slice();
                let data = up
                    .as_slice()
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(u, (&x, &y))| u * kind.derivative(x, y))
                    .collect();
                let g = Matrix::from_vec(up.rows(), up.cols(), data)?;
                self.accumulate(a, g);
            }
            Op::GatherRows(h, ref index) => {
                let mut g = Matrix::zeros(self.value(h).rows(), up.cols());
                for (k, &r) in index.iter().enumerate() {
                    for (o, x) in g.row_mut(r).iter_mut().zip(up.row(k)) {
                        *o += x;
                    }
                }
                self.accumulate(h, g);
            }
            Op::SegmentReduce {
                input,
                ref segments,
                kind,
                ref counts,
                ref argmax,
            } => {
                let (n_rows, d) = self.value(input).shape();
                let mut g = Matrix::zeros(n_rows, d);
                match kind {
                    Reduce::Sum => {
                        for (k, &s) in segments.iter().enumerate() {
                            g.row_mut(k).copy_from_slice(up.row(s));
                        }
                    }
                    Reduce::Mean => {
                        for (k, &s) in segments.iter().enumerate() {
                            let inv = 1.0 / counts[s] as f64;
                            for (o, x) in g.row_mut(k).iter_mut().zip(up.row(s)) {
                                *o = x * inv;
                            }
                        }
                    }
                    Reduce::Max => {
                        for s in 0..up.rows() {
                            for j in 0..d {
                                let k = argmax[s * d + j];
                                if k != NO_ROW {
                                    let cur = g.get(k, j);
                                    g.set(k, j, cur + up.get(s, j));
                                }
                            }
                        }
                    }
                }
                self.accumulate(input, g);
            }
            Op::GatherReduce {
                input,
                ref sources,
                ref targets,
                ref scale,
            } => {
                let mut g = Matrix::zeros(self.value(input).rows(), up.cols());
                for (&u, &v) in sources.iter().zip(targets.iter()) {
                    let c = scale[v];
                    for (o, x) in g.row_mut(u).iter_mut().zip(up.row(v)) {
                        *o += x * c;
                    }
                }
                self.accumulate(input, g);
            }
            Op::SegmentSoftmax(scores, ref segments, num_segments) => {
                let y = self.records[idx].value.as_slice();
                let mut dot = vec![0.0; num_segments];
                for (k, &s) in segments.iter().enumerate() {
                    dot[s] += y[k] * up.get(k, 0);
                }
                let data: Vec<f64> = segments
                    .iter()
                    .enumerate()
                    .map(|(k, &s)| y[k] * (up.get(k, 0) - dot[s]))
                    .collect();
                self.accumulate(scores, Matrix::column(&data));
            }
            Op::L2NormalizeRows(h, ref norms) => {
                let y = &self.records[idx].value;
                let mut g = up.clone();
                for (r, &n) in norms.iter().enumerate() {
                    if n > L2_EPS {
                        let yr = y.row(r);
                        let proj: f64 = yr.iter().zip(up.row(r)).map(|(a, b)| a * b).sum();
                        for (o, (&u, &yv)) in g.row_mut(r).iter_mut().zip(up.row(r).iter().zip(yr)) {
                            *o = (u - yv * proj) / n;
                        }
                    }
                }
                self.accumulate(h, g);
            }
            Op::SumAll(a) => {
                let (r, c) = self.value(a).shape();
                self.accumulate(a, Matrix::filled(r, c, up.item()));
            }
            Op::BceWithLogits(logits, ref targets) => {
                let n = targets.len().max(1) as f64;
                let u = up.item();
                let data: Vec<f64> = self
                    .value(logits)
                    .as_slice()
                    .iter()
                    .zip(targets)
                    .map(|(&x, &t)| u * (sigmoid(x) - t) / n)
                    .collect();
                self.accumulate(logits, Matrix::column(&data));
            }
            Op::CrossEntropy(logits, ref classes) => {
                let vl = self.value(logits);
                let n = classes.len().max(1) as f64;
                let u = up.item();
                let mut g = Matrix::zeros(vl.rows(), vl.cols());
                for (r, &c) in classes.iter().enumerate() {
                    let row = vl.row(r);
                    let lse = log_sum_exp(row);
                    for (j, o) in g.row_mut(r).iter_mut().enumerate() {
                        let p = (row[j] - lse).exp();
                        let onehot = if j == c { 1.0 } else { 0.0 };
                        *o = u * (p - onehot) / n;
                    }
                }
                self.accumulate(logits, g);
            }
            Op::Mse(pred, ref target) => {
                let vp = self.value(pred);
                let n = vp.as_slice().len().max(1) as f64;
                let u = up.item();
                let data = vp
                    .as_slice()
                    .iter()
                    .zip(target.as_slice())
                    .map(|(p, t)| u * 2.0 * (p - t) / n)
                    .collect();
                let g = Matrix::from_vec(vp.rows(), vp.cols(), data)?;
                self.accumulate(pred, g);
            }
        }
        Ok(())
    }
}

fn check_segments(
    op: &'static str,
    rows: usize,
    segments: &[usize],
    num_segments: usize,
) -> Result<()> {
    if segments.len() != rows {
        return Err(Error::shape(
            op,
            format!("{} segment ids for {rows} rows", segments.len()),
        ));
    }
    if let Some(&bad) = segments.iter().find(|&&s| s >= num_segments) {
        return Err(Error::IndexOutOfRange {
            op,
            index: bad,
            limit: num_segments,
        });
    }
    Ok(())
}

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("hadamard of equal shapes")
}

pub(crate) fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
