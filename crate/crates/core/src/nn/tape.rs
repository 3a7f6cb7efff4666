//! Reverse-mode differentiation over whole matrices.
//!
//! Every primitive records its operands by [`Var`] index. `backward` walks the
//! node list in exact reverse of recording order, so each node's gradient is
//! complete before it is propagated to its operands.

use std::sync::Arc;

use rayon::prelude::*;

use super::matrix::{sigmoid, Matrix, Scalar};
use super::param::Param;
use crate::error::{FeaeError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Compressed row groups: group `g` owns `indices[offsets[g]..offsets[g + 1]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    indices: Vec<usize>,
}

impl Csr {
    pub fn from_groups(groups: &[Vec<usize>]) -> Self {
        let mut offsets = Vec::with_capacity(groups.len() + 1);
        let mut indices = Vec::with_capacity(groups.iter().map(Vec::len).sum());
        offsets.push(0);
        for g in groups {
            indices.extend_from_slice(g);
            offsets.push(indices.len());
        }
        Csr { offsets, indices }
    }

    pub fn num_groups(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.indices[self.offsets[g]..self.offsets[g + 1]]
    }

    pub fn total_len(&self) -> usize {
        self.indices.len()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.iter().copied().max()
    }
}

enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sigmoid(Var),
    SliceRows(Var, usize),
    ConcatRows(Var, Var),
    GatherRows(Var, Arc<[usize]>),
    GatherAdd {
        a: Var,
        b: Var,
        ia: Arc<[usize]>,
        ib: Arc<[usize]>,
    },
    GroupSum(Var, Arc<Csr>),
    MeanRows(Var),
    Bce {
        probs: Var,
        targets: Arc<[T]>,
    },
    BceLogits {
        logits: Var,
        targets: Arc<[T]>,
    },
    SquaredError {
        input: Var,
        rows: Arc<[usize]>,
        target: Arc<Matrix<T>>,
        scale: T,
    },
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Probabilities are clamped into `[BCE_EPS, 1 - BCE_EPS]` before logs.
pub const BCE_EPS: f64 = 1e-7;

pub struct Tape<T: Scalar = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients of one scalar output with respect to every recorded value.
pub struct Grads<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads[v.0].as_ref()
    }

    /// Adds the gradient of `v` into `param.grad`; a value the loss never
    /// reached contributes zero.
    pub fn accumulate_into(&self, v: Var, param: &mut Param<T>) {
        if let Some(g) = self.get(v) {
            param.grad.add_assign(g);
        }
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a parameter's current value as a leaf.
    pub fn param(&mut self, p: &Param<T>) -> Var {
        self.leaf(p.value.clone())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).add(self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Adds a 1xC row to every row of an RxC matrix (bias add).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(FeaeError::dim(av.shape(), rv.shape(), "row broadcast add"));
        }
        let mut out = av.clone();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(rv.data()) {
                *o = *o + b;
            }
        }
        Ok(self.push(out, Op::AddRow(a, row)))
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.value(a).scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .map(|x| if x > T::zero() { x } else { T::zero() });
        self.push(v, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// Rows `start..end` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        if start > end || end > av.rows() {
            return Err(FeaeError::Dimension(format!(
                "row slice {start}..{end} out of range for {}x{}",
                av.rows(),
                av.cols()
            )));
        }
        let idx: Vec<usize> = (start..end).collect();
        let v = av.select_rows(&idx);
        Ok(self.push(v, Op::SliceRows(a, start)))
    }

    /// Stacks `b` under `a`.
    pub fn concat_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() {
            return Err(FeaeError::dim(av.shape(), bv.shape(), "row concatenation"));
        }
        let mut data = Vec::with_capacity(av.len() + bv.len());
        data.extend_from_slice(av.data());
        data.extend_from_slice(bv.data());
        let v = Matrix::new(av.rows() + bv.rows(), av.cols(), data)?;
        Ok(self.push(v, Op::ConcatRows(a, b)))
    }

    pub fn gather_rows(&mut self, a: Var, idx: Arc<[usize]>) -> Result<Var> {
        let av = self.value(a);
        check_indices(&idx, av.rows(), "row gather")?;
        let v = av.select_rows(&idx);
        Ok(self.push(v, Op::GatherRows(a, idx)))
    }

    /// Row `i` of the result is `a[ia[i]] + b[ib[i]]`.
    pub fn gather_add(
        &mut self,
        a: Var,
        b: Var,
        ia: Arc<[usize]>,
        ib: Arc<[usize]>,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.cols() || ia.len() != ib.len() {
            return Err(FeaeError::dim(av.shape(), bv.shape(), "paired gather"));
        }
        check_indices(&ia, av.rows(), "paired gather (left)")?;
        check_indices(&ib, bv.rows(), "paired gather (right)")?;
        let c = av.cols();
        let mut out = Matrix::zeros(ia.len(), c);
        for (r, (&i, &j)) in ia.iter().zip(ib.iter()).enumerate() {
            for ((o, &x), &y) in out.row_mut(r).iter_mut().zip(av.row(i)).zip(bv.row(j)) {
                *o = x + y;
            }
        }
        Ok(self.push(out, Op::GatherAdd { a, b, ia, ib }))
    }

    /// Row `g` of the result is the sum of the input rows listed in group `g`.
    pub fn group_sum(&mut self, a: Var, groups: Arc<Csr>) -> Result<Var> {
        let out = group_sum_value(self.value(a), &groups)?;
        Ok(self.push(out, Op::GroupSum(a, groups)))
    }

    /// Column means as a 1xC row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.rows() == 0 {
            return Err(FeaeError::Precondition("mean over zero rows".into()));
        }
        let n = T::lit(av.rows() as f64);
        let v = Matrix::row_vector(av.column_sums().into_iter().map(|s| s / n).collect());
        Ok(self.push(v, Op::MeanRows(a)))
    }

    /// Mean binary cross-entropy of `probs` (any shape, read flat) against
    /// `targets`, with probabilities clamped to `[BCE_EPS, 1 - BCE_EPS]`.
    pub fn bce(&mut self, probs: Var, targets: Arc<[T]>) -> Result<Var> {
        let pv = self.value(probs);
        if pv.len() != targets.len() {
            return Err(FeaeError::Dimension(format!(
                "{} probabilities vs {} targets",
                pv.len(),
                targets.len()
            )));
        }
        if targets.is_empty() {
            return Err(FeaeError::Precondition(
                "cross-entropy over an empty set".into(),
            ));
        }
        let v = bce_value(pv.data(), &targets);
        Ok(self.push(Matrix::filled(1, 1, v), Op::Bce { probs, targets }))
    }

    /// Mean binary cross-entropy of `sigmoid(logits)` against `targets`,
    /// evaluated as `softplus(z) - t * z`. Agrees with [`Tape::bce`] while the
    /// probabilities stay inside the clamp, and keeps a gradient of
    /// `sigmoid(z) - t` when they do not.
    pub fn bce_logits(&mut self, logits: Var, targets: Arc<[T]>) -> Result<Var> {
        let zv = self.value(logits);
        if zv.len() != targets.len() {
            return Err(FeaeError::Dimension(format!(
                "{} logits vs {} targets",
                zv.len(),
                targets.len()
            )));
        }
        if targets.is_empty() {
            return Err(FeaeError::Precondition(
                "cross-entropy over an empty set".into(),
            ));
        }
        let v = bce_logits_value(zv.data(), &targets);
        Ok(self.push(Matrix::filled(1, 1, v), Op::BceLogits { logits, targets }))
    }

    /// `scale * sum((input[rows[i]] - target[i])^2)` as a 1x1 node. An empty
    /// row set yields zero.
    pub fn squared_error(
        &mut self,
        input: Var,
        rows: Arc<[usize]>,
        target: Arc<Matrix<T>>,
        scale: T,
    ) -> Result<Var> {
        let iv = self.value(input);
        check_indices(&rows, iv.rows(), "squared error rows")?;
        if target.rows() != rows.len() || target.cols() != iv.cols() {
            return Err(FeaeError::dim(
                (rows.len(), iv.cols()),
                target.shape(),
                "squared error target",
            ));
        }
        let mut acc = T::zero();
        for (i, &r) in rows.iter().enumerate() {
            for (&x, &t) in iv.row(r).iter().zip(target.row(i)) {
                let d = x - t;
                acc = acc + d * d;
            }
        }
        let v = Matrix::filled(1, 1, acc * scale);
        Ok(self.push(
            v,
            Op::SquaredError {
                input,
                rows,
                target,
                scale,
            },
        ))
    }

    /// Gradients of the 1x1 node `output` with respect to every node.
    pub fn backward(&self, output: Var) -> Result<Grads<T>> {
        if self.value(output).shape() != (1, 1) {
            return Err(FeaeError::Precondition(format!(
                "backward needs a scalar output, got {:?}",
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::filled(1, 1, T::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let ga = g.matmul_t(bv)?;
                    let gb = av.t_matmul(&g)?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Transpose(a) => acc(&mut grads, *a, g.transpose()),
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, Matrix::row_vector(g.column_sums()));
                    acc(&mut grads, *a, g.clone());
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.scale(*s)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let gx =
                        g.zip_with(
                            x,
                            "relu grad",
                            |gv, xv| {
                                if xv > T::zero() {
                                    gv
                                } else {
                                    T::zero()
                                }
                            },
                        )?;
                    acc(&mut grads, *a, gx);
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let gx = g.zip_with(y, "sigmoid grad", |gv, yv| gv * yv * (T::one() - yv))?;
                    acc(&mut grads, *a, gx);
                }
                Op::SliceRows(a, start) => {
                    let av = self.value(*a);
                    let mut gx = Matrix::zeros(av.rows(), av.cols());
                    for r in 0..g.rows() {
                        gx.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::ConcatRows(a, b) => {
                    let na = self.value(*a).rows();
                    let cols = g.cols();
                    let (top, bottom) = g.data().split_at(na * cols);
                    let ga = Matrix::new(na, cols, top.to_vec())?;
                    let gb = Matrix::new(g.rows() - na, cols, bottom.to_vec())?;
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::GatherRows(a, idx) => {
                    let av = self.value(*a);
                    let mut gx = Matrix::zeros(av.rows(), av.cols());
                    for (r, &i) in idx.iter().enumerate() {
                        add_into(gx.row_mut(i), g.row(r));
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::GatherAdd { a, b, ia, ib } => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut ga = Matrix::zeros(av.rows(), av.cols());
                    let mut gb = Matrix::zeros(bv.rows(), bv.cols());
                    for (r, (&i, &j)) in ia.iter().zip(ib.iter()).enumerate() {
                        add_into(ga.row_mut(i), g.row(r));
                        add_into(gb.row_mut(j), g.row(r));
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::GroupSum(a, groups) => {
                    let av = self.value(*a);
                    let mut gx = Matrix::zeros(av.rows(), av.cols());
                    // serial scatter keeps the accumulation order fixed
                    for grp in 0..groups.num_groups() {
                        for &e in groups.group(grp) {
                            add_into(gx.row_mut(e), g.row(grp));
                        }
                    }
                    acc(&mut grads, *a, gx);
                }
                Op::MeanRows(a) => {
                    let av = self.value(*a);
                    let n = T::lit(av.rows() as f64);
                    let row: Vec<T> = g.data().iter().map(|&x| x / n).collect();
                    let gx = Matrix::from_fn(av.rows(), av.cols(), |_, j| row[j]);
                    acc(&mut grads, *a, gx);
                }
                Op::Bce { probs, targets } => {
                    let pv = self.value(*probs);
                    let upstream = g.data()[0];
                    let n = T::lit(targets.len() as f64);
                    let (lo, hi) = (T::lit(BCE_EPS), T::one() - T::lit(BCE_EPS));
                    let data = pv
                        .data()
                        .iter()
                        .zip(targets.iter())
                        .map(|(&p, &t)| {
                            if p < lo || p > hi {
                                T::zero()
                            } else {
                                -upstream * (t / p - (T::one() - t) / (T::one() - p)) / n
                            }
                        })
                        .collect();
                    acc(&mut grads, *probs, Matrix::new(pv.rows(), pv.cols(), data)?);
                }
                Op::BceLogits { logits, targets } => {
                    let zv = self.value(*logits);
                    let k = g.data()[0] / T::lit(targets.len() as f64);
                    let data = zv
                        .data()
                        .iter()
                        .zip(targets.iter())
                        .map(|(&z, &t)| k * (sigmoid(z) - t))
                        .collect();
                    acc(
                        &mut grads,
                        *logits,
                        Matrix::new(zv.rows(), zv.cols(), data)?,
                    );
                }
                Op::SquaredError {
                    input,
                    rows,
                    target,
                    scale,
                } => {
                    let iv = self.value(*input);
                    let k = T::lit(2.0) * *scale * g.data()[0];
                    let mut gx = Matrix::zeros(iv.rows(), iv.cols());
                    for (i, &r) in rows.iter().enumerate() {
                        let src = iv.row(r);
                        for ((o, &x), &t) in gx.row_mut(r).iter_mut().zip(src).zip(target.row(i)) {
                            *o = *o + k * (x - t);
                        }
                    }
                    acc(&mut grads, *input, gx);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Grads { grads })
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

fn check_indices(idx: &[usize], bound: usize, what: &str) -> Result<()> {
    match idx.iter().find(|&&i| i >= bound) {
        Some(&i) => Err(FeaeError::Dimension(format!(
            "{what}: index {i} out of range for {bound} rows"
        ))),
        None => Ok(()),
    }
}

pub(crate) fn group_sum_value<T: Scalar>(a: &Matrix<T>, groups: &Csr) -> Result<Matrix<T>> {
    if let Some(max) = groups.max_index() {
        if max >= a.rows() {
            return Err(FeaeError::Dimension(format!(
                "group member {max} out of range for {} rows",
                a.rows()
            )));
        }
    }
    let c = a.cols();
    let mut out = Matrix::zeros(groups.num_groups(), c);
    if c == 0 {
        return Ok(out);
    }
    out.data_mut()
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(grp, row)| {
            for &e in groups.group(grp) {
                add_into(row, a.row(e));
            }
        });
    Ok(out)
}

pub(crate) fn bce_value<T: Scalar>(probs: &[T], targets: &[T]) -> T {
    let (lo, hi) = (T::lit(BCE_EPS), T::one() - T::lit(BCE_EPS));
    let total: T = probs
        .iter()
        .zip(targets)
        .map(|(&p, &t)| {
            let p = p.max(lo).min(hi);
            t * p.ln() + (T::one() - t) * (T::one() - p).ln()
        })
        .sum();
    -total / T::lit(probs.len() as f64)
}

pub(crate) fn bce_logits_value<T: Scalar>(logits: &[T], targets: &[T]) -> T {
    let total: T = logits
        .iter()
        .zip(targets)
        .map(|(&z, &t)| z.max(T::zero()) - t * z + (-z.abs()).exp().ln_1p())
        .sum();
    total / T::lit(logits.len() as f64)
}
