//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation as a node; [`Var`] is a handle into
//! it. Calling [`Tape::backward`] on a `1 x 1` node walks the tape in reverse
//! and accumulates gradients into every leaf created with
//! [`Tape::param`]. Gradients accumulate across repeated `backward` calls
//! until [`Tape::zero_grad`].

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Floor applied to probabilities before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    AddRow(Var, Var),
    DiagScale(Var, Var),
    Transpose(Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Abs(Var),
    SumAll(Var),
    SelectRows(Var, Vec<usize>),
    Overwrite(Var, Arc<Matrix>),
    StraightThrough(Var),
    SymNormalize(Var),
    CrossEntropy(Var, Arc<Matrix>),
    SigmoidBce(Var, Arc<Matrix>),
}

struct Node {
    value: Arc<Matrix>,
    op: Op,
    requires_grad: bool,
    grad: Option<Matrix>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Matrix, op: Op, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = self.parents(&op).iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value: Arc::new(value),
            op,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn leaf(&mut self, value: Arc<Matrix>, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite("leaf"));
        }
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad: None,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Trainable leaf; receives gradients.
    pub fn param(&mut self, value: Matrix) -> Result<Var> {
        self.leaf(Arc::new(value), true)
    }

    /// Constant leaf.
    pub fn constant(&mut self, value: Matrix) -> Result<Var> {
        self.leaf(Arc::new(value), false)
    }

    /// Constant leaf sharing an existing buffer.
    pub fn constant_shared(&mut self, value: Arc<Matrix>) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[(0, 0)]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a parameter leaf (`None` before any backward
    /// pass reached it).
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.nodes[v.0].grad.as_ref()
    }

    /// Accumulated gradient, or zeros when the loss did not depend on `v`.
    pub fn grad_or_zeros(&self, v: Var) -> Matrix {
        self.grad(v).cloned().unwrap_or_else(|| {
            let (r, c) = self.shape(v);
            Matrix::zeros(r, c)
        })
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        self.push(out, Op::Sub(a, b), "sub")
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hadamard(self.value(b))?;
        self.push(out, Op::Hadamard(a, b), "hadamard")
    }

    /// `x + 1·b` for a `1 x cols` row `b` broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(b));
        if bs != (1, xs.1) {
            return Err(Error::Shape {
                op: "add_row",
                left: xs,
                right: bs,
            });
        }
        let mut out = self.value(x).clone();
        let row = self.value(b).row(0).to_vec();
        for i in 0..out.rows() {
            for (v, bj) in out.row_mut(i).iter_mut().zip(&row) {
                *v += bj;
            }
        }
        self.push(out, Op::AddRow(x, b), "add_row")
    }

    /// `x · diag(d)` for a `1 x cols` row `d`: column `j` scaled by `d_j`.
    pub fn diag_scale(&mut self, x: Var, d: Var) -> Result<Var> {
        let (xs, ds) = (self.shape(x), self.shape(d));
        if ds != (1, xs.1) {
            return Err(Error::Shape {
                op: "diag_scale",
                left: xs,
                right: ds,
            });
        }
        let mut out = self.value(x).clone();
        let diag = self.value(d).row(0).to_vec();
        for i in 0..out.rows() {
            for (v, dj) in out.row_mut(i).iter_mut().zip(&diag) {
                *v *= dj;
            }
        }
        self.push(out, Op::DiagScale(x, d), "diag_scale")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a), "transpose")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).scale(c);
        self.push(out, Op::Scale(a, c), "scale")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|v| v.max(0.0));
        self.push(out, Op::Relu(a), "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        self.push(out, Op::Sigmoid(a), "sigmoid")
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::tanh);
        self.push(out, Op::Tanh(a), "tanh")
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::SoftmaxRows(a), "softmax_rows")
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(f64::abs);
        self.push(out, Op::Abs(a), "abs")
    }

    /// Sum of all entries as a `1 x 1` node.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::filled(1, 1, self.value(a).sum());
        self.push(out, Op::SumAll(a), "sum")
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let n = self.shape(a).0;
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::OutOfRange { index: bad, len: n });
        }
        let out = self.value(a).select_rows(rows);
        self.push(out, Op::SelectRows(a, rows.to_vec()), "select_rows")
    }

    /// Entries where `mask != 0` are replaced by the matching entries of
    /// `fill`; no gradient flows into the replaced entries.
    pub fn overwrite(&mut self, a: Var, mask: &Matrix, fill: &Matrix) -> Result<Var> {
        let s = self.shape(a);
        for m in [mask, fill] {
            if m.shape() != s {
                return Err(Error::Shape {
                    op: "overwrite",
                    left: s,
                    right: m.shape(),
                });
            }
        }
        let mut out = self.value(a).clone();
        for ((o, m), f) in out.as_mut_slice().iter_mut().zip(mask.as_slice()).zip(fill.as_slice()) {
            if *m != 0.0 {
                *o = *f;
            }
        }
        self.push(out, Op::Overwrite(a, Arc::new(mask.clone())), "overwrite")
    }

    /// Forward value `value`, backward identity (straight-through estimator).
    pub fn straight_through(&mut self, a: Var, value: Matrix) -> Result<Var> {
        if value.shape() != self.shape(a) {
            return Err(Error::Shape {
                op: "straight_through",
                left: self.shape(a),
                right: value.shape(),
            });
        }
        self.push(value, Op::StraightThrough(a), "straight_through")
    }

    /// Renormalized propagation `D^{-1/2} (X + I) D^{-1/2}` with `D` the row
    /// sums of `X + I`.
    pub fn sym_normalize(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        let (r, c) = x.shape();
        if r != c {
            return Err(Error::Shape {
                op: "sym_normalize",
                left: (r, c),
                right: (c, r),
            });
        }
        let out = renormalize(x)?;
        self.push(out, Op::SymNormalize(a), "sym_normalize")
    }

    /// `-Σ target · ln(max(p, 1e-12))` summed over all rows. Every row of
    /// `target` must be one-hot.
    pub fn cross_entropy(&mut self, p: Var, target: &Matrix) -> Result<Var> {
        if target.shape() != self.shape(p) {
            return Err(Error::Shape {
                op: "cross_entropy",
                left: self.shape(p),
                right: target.shape(),
            });
        }
        check_one_hot(target)?;
        let pv = self.value(p);
        let mut loss = 0.0;
        for (pi, ti) in pv.as_slice().iter().zip(target.as_slice()) {
            if *ti != 0.0 {
                loss -= ti * pi.max(PROB_FLOOR).ln();
            }
        }
        self.push(
            Matrix::filled(1, 1, loss),
            Op::CrossEntropy(p, Arc::new(target.clone())),
            "cross_entropy",
        )
    }

    /// Binary cross-entropy of `sigmoid(logits)` against `target ∈ [0, 1]`,
    /// summed over every entry: `-Σ [t ln σ(y) + (1 - t) ln σ(-y)]`.
    pub fn sigmoid_bce(&mut self, logits: Var, target: &Matrix) -> Result<Var> {
        if target.shape() != self.shape(logits) {
            return Err(Error::Shape {
                op: "sigmoid_bce",
                left: self.shape(logits),
                right: target.shape(),
            });
        }
        if target.as_slice().iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("sigmoid_bce targets must lie in [0, 1]"));
        }
        let loss = sigmoid_bce(self.value(logits), target);
        self.push(
            Matrix::filled(1, 1, loss),
            Op::SigmoidBce(logits, Arc::new(target.clone())),
            "sigmoid_bce",
        )
    }

    /// Softmax cross-entropy of `logits` rows against class ids, averaged over rows.
    pub fn softmax_cross_entropy(&mut self, logits: Var, classes: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(logits);
        if classes.len() != rows {
            return Err(Error::invalid(format!("{} class ids for {rows} rows", classes.len())));
        }
        let target = one_hot(classes, cols)?;
        let p = self.softmax_rows(logits)?;
        let ce = self.cross_entropy(p, &target)?;
        self.scale(ce, 1.0 / rows.max(1) as f64)
    }

    fn parents(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::AddRow(a, b)
            | Op::DiagScale(a, b) => vec![*a, *b],
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::SoftmaxRows(a)
            | Op::Abs(a)
            | Op::SumAll(a)
            | Op::SelectRows(a, _)
            | Op::Overwrite(a, _)
            | Op::StraightThrough(a)
            | Op::SymNormalize(a)
            | Op::CrossEntropy(a, _)
            | Op::SigmoidBce(a, _) => vec![*a],
        }
    }

    /// Back-propagates from a `1 x 1` node, accumulating into the parameter
    /// leaves' gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Shape {
                op: "backward",
                left: self.shape(loss),
                right: (1, 1),
            });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::ones(1, 1));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                match &mut self.nodes[idx].grad {
                    Some(acc) => acc.add_assign(&g)?,
                    slot @ None => *slot = Some(g),
                }
                continue;
            }
            for (parent, pg) in self.local_grads(idx, &g)? {
                if !self.nodes[parent.0].requires_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&pg)?,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, g: &Matrix) -> Result<Vec<(Var, Matrix)>> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let needs = |v: &Var| self.nodes[v.0].requires_grad;
        let mut res = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(a) {
                    res.push((*a, g.matmul_tr(self.value(*b))?));
                }
                if needs(b) {
                    res.push((*b, self.value(*a).tr_matmul(g)?));
                }
            }
            Op::Add(a, b) => {
                res.push((*a, g.clone()));
                res.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                res.push((*a, g.clone()));
                res.push((*b, g.scale(-1.0)));
            }
            Op::Hadamard(a, b) => {
                if needs(a) {
                    res.push((*a, g.hadamard(self.value(*b))?));
                }
                if needs(b) {
                    res.push((*b, g.hadamard(self.value(*a))?));
                }
            }
            Op::AddRow(x, b) => {
                res.push((*x, g.clone()));
                if needs(b) {
                    res.push((*b, column_sums(g)));
                }
            }
            Op::DiagScale(x, d) => {
                let dv = self.value(*d).row(0).to_vec();
                if needs(x) {
                    let mut gx = g.clone();
                    for i in 0..gx.rows() {
                        for (v, dj) in gx.row_mut(i).iter_mut().zip(&dv) {
                            *v *= dj;
                        }
                    }
                    res.push((*x, gx));
                }
                if needs(d) {
                    let prod = g.hadamard(self.value(*x))?;
                    res.push((*d, column_sums(&prod)));
                }
            }
            Op::Transpose(a) => res.push((*a, g.transpose())),
            Op::Scale(a, c) => res.push((*a, g.scale(*c))),
            Op::Relu(a) => {
                let x = self.value(*a);
                res.push((*a, g.zip_map(x, "relu_grad", |gi, xi| if xi > 0.0 { gi } else { 0.0 })?));
            }
            Op::Sigmoid(a) => {
                res.push((*a, g.zip_map(out, "sigmoid_grad", |gi, s| gi * s * (1.0 - s))?));
            }
            Op::Tanh(a) => {
                res.push((*a, g.zip_map(out, "tanh_grad", |gi, t| gi * (1.0 - t * t))?));
            }
            Op::SoftmaxRows(a) => {
                let mut ga = Matrix::zeros(out.rows(), out.cols());
                for i in 0..out.rows() {
                    let (s, gi) = (out.row(i), g.row(i));
                    let dot: f64 = s.iter().zip(gi).map(|(a, b)| a * b).sum();
                    for (j, v) in ga.row_mut(i).iter_mut().enumerate() {
                        *v = s[j] * (gi[j] - dot);
                    }
                }
                res.push((*a, ga));
            }
            Op::Abs(a) => {
                let x = self.value(*a);
                res.push((*a, g.zip_map(x, "abs_grad", |gi, xi| gi * sign(xi))?));
            }
            Op::SumAll(a) => {
                let (r, c) = self.shape(*a);
                res.push((*a, Matrix::filled(r, c, g[(0, 0)])));
            }
            Op::SelectRows(a, rows) => {
                let (r, c) = self.shape(*a);
                let mut ga = Matrix::zeros(r, c);
                for (k, &src) in rows.iter().enumerate() {
                    for (dst, v) in ga.row_mut(src).iter_mut().zip(g.row(k)) {
                        *dst += v;
                    }
                }
                res.push((*a, ga));
            }
            Op::Overwrite(a, mask) => {
                res.push((
                    *a,
                    g.zip_map(mask, "overwrite_grad", |gi, m| if m != 0.0 { 0.0 } else { gi })?,
                ));
            }
            Op::StraightThrough(a) => res.push((*a, g.clone())),
            Op::SymNormalize(a) => res.push((*a, renormalize_grad(self.value(*a), g))),
            Op::CrossEntropy(p, target) => {
                let pv = self.value(*p);
                let scale = g[(0, 0)];
                let gp = pv.zip_map(target, "cross_entropy_grad", |pi, ti| {
                    if ti != 0.0 && pi > PROB_FLOOR {
                        -scale * ti / pi
                    } else {
                        0.0
                    }
                })?;
                res.push((*p, gp));
            }
            Op::SigmoidBce(y, target) => {
                let scale = g[(0, 0)];
                let gy = self
                    .value(*y)
                    .zip_map(target, "sigmoid_bce_grad", |yi, ti| scale * (sigmoid(yi) - ti))?;
                res.push((*y, gy));
            }
        }
        Ok(res)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
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

pub fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn column_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for i in 0..m.rows() {
        for (o, v) in out.row_mut(0).iter_mut().zip(m.row(i)) {
            *o += v;
        }
    }
    out
}

/// Row-wise one-hot matrix for `classes` with `n_classes` columns.
pub fn one_hot(classes: &[usize], n_classes: usize) -> Result<Matrix> {
    let mut t = Matrix::zeros(classes.len(), n_classes);
    for (i, &c) in classes.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::OutOfRange {
                index: c,
                len: n_classes,
            });
        }
        t[(i, c)] = 1.0;
    }
    Ok(t)
}

fn check_one_hot(t: &Matrix) -> Result<()> {
    for i in 0..t.rows() {
        let row = t.row(i);
        let ones = row.iter().filter(|v| **v == 1.0).count();
        let zeros = row.iter().filter(|v| **v == 0.0).count();
        if ones != 1 || zeros != row.len() - 1 {
            return Err(Error::invalid(format!("target row {i} is not one-hot")));
        }
    }
    Ok(())
}

/// `-Σ [t ln σ(y) + (1 - t) ln σ(-y)]`, evaluated as `Σ softplus(y) - t y`.
pub fn sigmoid_bce(logits: &Matrix, target: &Matrix) -> f64 {
    logits
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&y, &t)| y.max(0.0) + (-y.abs()).exp().ln_1p() - t * y)
        .sum()
}

/// `D^{-1/2} (X + I) D^{-1/2}` with `D = diag(rowsum(X + I))`.
pub fn renormalize(x: &Matrix) -> Result<Matrix> {
    let n = x.rows();
    let mut b = x.clone();
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let deg = b.row_sums();
    if let Some(i) = deg.iter().position(|d| *d <= 0.0) {
        return Err(Error::precondition(format!(
            "renormalized degree of node {i} is {} (must be positive)",
            deg[i]
        )));
    }
    let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] *= s[i] * s[j];
        }
    }
    Ok(b)
}

fn renormalize_grad(x: &Matrix, g: &Matrix) -> Matrix {
    let n = x.rows();
    let mut b = x.clone();
    for i in 0..n {
        b[(i, i)] += 1.0;
    }
    let deg = b.row_sums();
    let s: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    // P_ij = B_ij s_i s_j with s_i = d_i^{-1/2}, d_i = Σ_l B_il.
    // ∂L/∂s_k = Σ_j G_kj B_kj s_j + Σ_i G_ik B_ik s_i; ∂s_k/∂d_k = -s_k³/2.
    let mut ds = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let gb = g[(i, j)] * b[(i, j)];
            ds[i] += gb * s[j];
            ds[j] += gb * s[i];
        }
    }
    let dd: Vec<f64> = (0..n).map(|k| -0.5 * s[k].powi(3) * ds[k]).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = g[(i, j)] * s[i] * s[j] + dd[i];
        }
    }
    out
}
