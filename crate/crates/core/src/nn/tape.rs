//! Reverse-mode differentiation over a linear tape of coarse-grained ops.
//!
//! Every op appends a node holding its forward value plus whatever it needs
//! for the backward pass. [`Tape::backward`] walks the nodes in reverse and
//! accumulates gradients into every node that requires them; leaf gradients
//! are kept, intermediate ones are released once propagated.

use rand::Rng;

use super::conv::{self, ConvGeometry, Padding};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::hsic;
use crate::matrix::Matrix;

pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeometry,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    MaxPool2 {
        x: Var,
        src: Vec<usize>,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    Gap {
        x: Var,
        lengths: Vec<usize>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        train: bool,
    },
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Concat {
        a: Var,
        b: Var,
    },
    SoftmaxCe {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    Mse {
        pred: Var,
        target: Vec<f64>,
    },
    Hsic {
        g: Var,
        grad: Vec<f64>,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

/// How batch normalisation obtains its statistics.
pub enum BnMode<'a> {
    Train,
    Eval {
        running_mean: &'a [f64],
        running_var: &'a [f64],
    },
}

/// Batch mean and biased variance observed in a training-mode pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[Var]) -> Var {
        let requires_grad = parents.iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, a: Var, b: Var) -> Result<()> {
        self.value(b).expect_shape(self.value(a).shape())
    }

    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        dilation: usize,
        padding: Padding,
    ) -> Result<Var> {
        let geom = ConvGeometry::new(
            self.value(x).shape(),
            self.value(w).shape(),
            stride,
            dilation,
            padding,
        )?;
        if let Some(b) = b {
            self.value(b).expect_shape(&[geom.c_out])?;
        }
        let y = conv::forward(
            &geom,
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
        );
        let value = Tensor::from_vec(&[geom.batch, geom.c_out, geom.t_out], y)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        Ok(self.push(value, Op::Conv1d { x, w, b, geom }, &parents))
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        Tensor::from_vec(
            va.shape(),
            va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect(),
        )
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let va = self.value(a);
        Tensor::from_vec(va.shape(), va.data().iter().map(|x| f(*x)).collect()).unwrap()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map(a, b, |x, y| x + y)?;
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip_map(a, b, |x, y| x * y)?;
        Ok(self.push(v, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.map(a, |x| x * s);
        self.push(v, Op::Scale(a, s), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(v, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        });
        self.push(v, Op::Sigmoid(a), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| x.max(0.0));
        self.push(v, Op::Relu(a), &[a])
    }

    /// Kernel-2, stride-1 max pooling over the last axis that keeps the
    /// length: `y[t] = max(x[t], x[t+1])`, `y[T-1] = x[T-1]`.
    pub fn maxpool2(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().len() != 3 {
            return Err(Error::invalid("maxpool expects a B x C x T tensor"));
        }
        let t = xv.dim(2);
        let mut out = Vec::with_capacity(xv.len());
        let mut src = Vec::with_capacity(xv.len());
        for (r, row) in xv.data().chunks(t).enumerate() {
            for i in 0..t {
                let j = if i + 1 < t && row[i + 1] > row[i] { i + 1 } else { i };
                out.push(row[j]);
                src.push(r * t + j);
            }
        }
        let v = Tensor::from_vec(xv.shape(), out)?;
        Ok(self.push(v, Op::MaxPool2 { x, src }, &[x]))
    }

    /// Inverted dropout: kept units are scaled by `1/(1-p)`.
    pub fn dropout(&mut self, x: Var, p: f64, rng: &mut impl Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!("dropout probability {p} outside [0, 1)")));
        }
        let keep = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let xv = self.value(x);
        let v = Tensor::from_vec(
            xv.shape(),
            xv.data().iter().zip(&mask).map(|(a, m)| a * m).collect(),
        )?;
        Ok(self.push(v, Op::Dropout { x, mask }, &[x]))
    }

    /// Mean over the time axis of a `B x C x T` tensor, restricted to the
    /// first `lengths[b]` steps of each sample when lengths are given.
    pub fn global_avg_pool(&mut self, x: Var, lengths: Option<&[usize]>) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().len() != 3 {
            return Err(Error::invalid("global average pooling expects B x C x T"));
        }
        let (b, c, t) = (xv.dim(0), xv.dim(1), xv.dim(2));
        let lengths: Vec<usize> = match lengths {
            Some(l) => {
                if l.len() != b {
                    return Err(Error::ShapeMismatch {
                        expected: vec![b],
                        got: vec![l.len()],
                    });
                }
                l.iter().map(|&v| v.min(t)).collect()
            }
            None => vec![t; b],
        };
        if lengths.iter().any(|&l| l == 0) {
            return Err(Error::invalid("global average pooling over a fully masked sample"));
        }
        let mut out = Vec::with_capacity(b * c);
        for (r, row) in xv.data().chunks(t).enumerate() {
            let l = lengths[r / c];
            out.push(row[..l].iter().sum::<f64>() / l as f64);
        }
        let v = Tensor::from_vec(&[b, c], out)?;
        Ok(self.push(v, Op::Gap { x, lengths }, &[x]))
    }

    /// Batch normalisation of a `B x C` tensor with biased batch variance.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BnMode<'_>,
    ) -> Result<(Var, Option<BatchStats>)> {
        let xv = self.value(x);
        if xv.shape().len() != 2 {
            return Err(Error::invalid("batch norm expects B x C"));
        }
        let (b, c) = (xv.dim(0), xv.dim(1));
        self.value(gamma).expect_shape(&[c])?;
        self.value(beta).expect_shape(&[c])?;
        let (mean, var, train) = match mode {
            BnMode::Train => {
                if b < 2 {
                    return Err(Error::invalid("batch norm in training mode needs batch >= 2"));
                }
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for row in xv.data().chunks(c) {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= b as f64);
                for row in xv.data().chunks(c) {
                    for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= b as f64);
                (mean, var, true)
            }
            BnMode::Eval {
                running_mean,
                running_var,
            } => (running_mean.to_vec(), running_var.to_vec(), false),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let (g, bt) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = Vec::with_capacity(b * c);
        let mut out = Vec::with_capacity(b * c);
        for row in xv.data().chunks(c) {
            for ch in 0..c {
                let h = (row[ch] - mean[ch]) * inv_std[ch];
                xhat.push(h);
                out.push(g[ch] * h + bt[ch]);
            }
        }
        let v = Tensor::from_vec(&[b, c], out)?;
        let stats = train.then(|| BatchStats { mean, var });
        let node = self.push(
            v,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            },
            &[x, gamma, beta],
        );
        Ok((node, stats))
    }

    /// `y = x W^T + b` for `x: B x in`, `W: out x in`, `b: out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.shape().len() != 2 || wv.shape().len() != 2 || xv.dim(1) != wv.dim(1) {
            return Err(Error::ShapeMismatch {
                expected: vec![xv.dim(0), wv.shape().get(1).copied().unwrap_or(0)],
                got: xv.shape().to_vec(),
            });
        }
        let (n, din, dout) = (xv.dim(0), xv.dim(1), wv.dim(0));
        self.value(b).expect_shape(&[dout])?;
        let mut y: Vec<f64> = (0..n).flat_map(|_| self.value(b).data().iter().copied()).collect();
        // SAFETY: dimensions checked above.
        unsafe {
            matrixmultiply::dgemm(
                n,
                din,
                dout,
                1.0,
                xv.data().as_ptr(),
                din as isize,
                1,
                wv.data().as_ptr(),
                1,
                din as isize,
                1.0,
                y.as_mut_ptr(),
                dout as isize,
                1,
            );
        }
        let v = Tensor::from_vec(&[n, dout], y)?;
        Ok(self.push(v, Op::Linear { x, w, b }, &[x, w, b]))
    }

    /// Column-wise concatenation `[a, b]` of two `B x _` tensors.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape().len() != 2 || vb.shape().len() != 2 || va.dim(0) != vb.dim(0) {
            return Err(Error::ShapeMismatch {
                expected: va.shape().to_vec(),
                got: vb.shape().to_vec(),
            });
        }
        let (n, ca, cb) = (va.dim(0), va.dim(1), vb.dim(1));
        let mut out = Vec::with_capacity(n * (ca + cb));
        for i in 0..n {
            out.extend_from_slice(&va.data()[i * ca..(i + 1) * ca]);
            out.extend_from_slice(&vb.data()[i * cb..(i + 1) * cb]);
        }
        let v = Tensor::from_vec(&[n, ca + cb], out)?;
        Ok(self.push(v, Op::Concat { a, b }, &[a, b]))
    }

    /// Mean over the batch of `-log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.shape().len() != 2 || lv.dim(0) != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![labels.len(), 0],
                got: lv.shape().to_vec(),
            });
        }
        let k = lv.dim(1);
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
        }
        let probs = softmax_rows(lv.data(), k);
        let n = labels.len();
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = &lv.data()[i * k..(i + 1) * k];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            loss += lse - row[y];
        }
        let v = Tensor::scalar(loss / n as f64);
        Ok(self.push(
            v,
            Op::SoftmaxCe {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            &[logits],
        ))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let pv = self.value(pred);
        if pv.len() != target.len() || target.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: pv.shape().to_vec(),
                got: vec![target.len()],
            });
        }
        let s: f64 = pv.data().iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
        let v = Tensor::scalar(s / target.len() as f64);
        Ok(self.push(
            v,
            Op::Mse {
                pred,
                target: target.to_vec(),
            },
            &[pred],
        ))
    }

    /// HSIC between fixed features `f` and the `B x d` representation `g`.
    /// Both bandwidths are constants with respect to the gradient.
    pub fn hsic(&mut self, g: Var, f: &Matrix, sigma_f: f64, sigma_g: f64) -> Result<Var> {
        let gv = self.value(g);
        if gv.shape().len() != 2 {
            return Err(Error::invalid("HSIC expects a B x d representation"));
        }
        if gv.dim(0) < 2 {
            return Err(Error::invalid("HSIC needs a batch of at least 2"));
        }
        let gm = Matrix::from_vec(gv.dim(0), gv.dim(1), gv.data().to_vec())?;
        let (value, grad) = hsic::hsic_value_and_grad(f, &gm, sigma_f, sigma_g)?;
        Ok(self.push(Tensor::scalar(value), Op::Hsic { g, grad }, &[g]))
    }

    /// Back-propagates from a scalar `root`.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::invalid("backward needs a scalar root"));
        }
        self.nodes[root.0].grad = Some(Tensor::scalar(1.0));
        for i in (0..=root.0).rev() {
            let Some(grad) = self.nodes[i].grad.take() else {
                continue;
            };
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].grad = Some(grad);
                continue;
            }
            let contributions = self.op_backward(i, &grad)?;
            for (p, t) in contributions {
                self.accumulate(p, t);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, t: Tensor) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.add_assign(&t),
            None => node.grad = Some(t),
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn op_backward(&self, i: usize, grad: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[i];
        let gd = grad.data();
        let like = |v: Var, data: Vec<f64>| Tensor::from_vec(self.value(v).shape(), data);
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, geom } => {
                let mut dx = self.needs(*x).then(|| vec![0.0; self.value(*x).len()]);
                let mut dw = self.needs(*w).then(|| vec![0.0; self.value(*w).len()]);
                let mut db = b
                    .filter(|b| self.needs(*b))
                    .map(|_| vec![0.0; geom.c_out]);
                conv::backward(
                    geom,
                    self.value(*x).data(),
                    self.value(*w).data(),
                    gd,
                    dx.as_deref_mut(),
                    dw.as_deref_mut(),
                    db.as_deref_mut(),
                );
                if let Some(d) = dx {
                    out.push((*x, like(*x, d)?));
                }
                if let Some(d) = dw {
                    out.push((*w, like(*w, d)?));
                }
                if let (Some(b), Some(d)) = (b, db) {
                    out.push((*b, like(*b, d)?));
                }
            }
            Op::Add(a, b) => {
                out.push((*a, grad.clone()));
                out.push((*b, grad.clone()));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if self.needs(*a) {
                    out.push((*a, like(*a, gd.iter().zip(vb).map(|(g, y)| g * y).collect())?));
                }
                if self.needs(*b) {
                    out.push((*b, like(*b, gd.iter().zip(va).map(|(g, x)| g * x).collect())?));
                }
            }
            Op::Scale(a, s) => {
                out.push((*a, like(*a, gd.iter().map(|g| g * s).collect())?));
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                out.push((*a, like(*a, gd.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect())?));
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                out.push((*a, like(*a, gd.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect())?));
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                out.push((
                    *a,
                    like(*a, gd.iter().zip(x).map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }).collect())?,
                ));
            }
            Op::MaxPool2 { x, src } => {
                let mut d = vec![0.0; self.value(*x).len()];
                for (g, &s) in gd.iter().zip(src) {
                    d[s] += g;
                }
                out.push((*x, like(*x, d)?));
            }
            Op::Dropout { x, mask } => {
                out.push((*x, like(*x, gd.iter().zip(mask).map(|(g, m)| g * m).collect())?));
            }
            Op::Gap { x, lengths } => {
                let xv = self.value(*x);
                let (c, t) = (xv.dim(1), xv.dim(2));
                let mut d = vec![0.0; xv.len()];
                for (r, row) in d.chunks_mut(t).enumerate() {
                    let l = lengths[r / c];
                    let g = gd[r] / l as f64;
                    row[..l].iter_mut().for_each(|v| *v = g);
                }
                out.push((*x, like(*x, d)?));
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let c = inv_std.len();
                let b = gd.len() / c;
                let gam = self.value(*gamma).data();
                let mut dgamma = vec![0.0; c];
                let mut dbeta = vec![0.0; c];
                for (r, row) in gd.chunks(c).enumerate() {
                    for ch in 0..c {
                        dgamma[ch] += row[ch] * xhat[r * c + ch];
                        dbeta[ch] += row[ch];
                    }
                }
                if self.needs(*x) {
                    let mut dx = vec![0.0; gd.len()];
                    if *train {
                        let nb = b as f64;
                        for r in 0..b {
                            for ch in 0..c {
                                let idx = r * c + ch;
                                let dxhat_sum = dbeta[ch] * gam[ch];
                                let dxhat_xhat = dgamma[ch] * gam[ch];
                                dx[idx] = inv_std[ch] / nb
                                    * (nb * gd[idx] * gam[ch] - dxhat_sum - xhat[idx] * dxhat_xhat);
                            }
                        }
                    } else {
                        for (idx, d) in dx.iter_mut().enumerate() {
                            let ch = idx % c;
                            *d = gd[idx] * gam[ch] * inv_std[ch];
                        }
                    }
                    out.push((*x, like(*x, dx)?));
                }
                out.push((*gamma, like(*gamma, dgamma)?));
                out.push((*beta, like(*beta, dbeta)?));
            }
            Op::Linear { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                let (n, din, dout) = (xv.dim(0), xv.dim(1), wv.dim(0));
                if self.needs(*x) {
                    let mut dx = vec![0.0; n * din];
                    // SAFETY: shapes validated in the forward pass.
                    unsafe {
                        matrixmultiply::dgemm(
                            n, dout, din, 1.0, gd.as_ptr(), dout as isize, 1,
                            wv.data().as_ptr(), din as isize, 1, 0.0,
                            dx.as_mut_ptr(), din as isize, 1,
                        );
                    }
                    out.push((*x, like(*x, dx)?));
                }
                if self.needs(*w) {
                    let mut dw = vec![0.0; dout * din];
                    // SAFETY: as above.
                    unsafe {
                        matrixmultiply::dgemm(
                            dout, n, din, 1.0, gd.as_ptr(), 1, dout as isize,
                            xv.data().as_ptr(), din as isize, 1, 0.0,
                            dw.as_mut_ptr(), din as isize, 1,
                        );
                    }
                    out.push((*w, like(*w, dw)?));
                }
                if self.needs(*b) {
                    let mut db = vec![0.0; dout];
                    for row in gd.chunks(dout) {
                        for (d, g) in db.iter_mut().zip(row) {
                            *d += g;
                        }
                    }
                    out.push((*b, like(*b, db)?));
                }
            }
            Op::Concat { a, b } => {
                let (ca, cb) = (self.value(*a).dim(1), self.value(*b).dim(1));
                let mut da = Vec::new();
                let mut db = Vec::new();
                for row in gd.chunks(ca + cb) {
                    da.extend_from_slice(&row[..ca]);
                    db.extend_from_slice(&row[ca..]);
                }
                out.push((*a, like(*a, da)?));
                out.push((*b, like(*b, db)?));
            }
            Op::SoftmaxCe {
                logits,
                labels,
                probs,
            } => {
                let k = self.value(*logits).dim(1);
                let scale = gd[0] / labels.len() as f64;
                let mut d: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (r, &y) in labels.iter().enumerate() {
                    d[r * k + y] -= scale;
                }
                out.push((*logits, like(*logits, d)?));
            }
            Op::Mse { pred, target } => {
                let pv = self.value(*pred).data();
                let scale = 2.0 * gd[0] / target.len() as f64;
                out.push((
                    *pred,
                    like(*pred, pv.iter().zip(target).map(|(p, t)| scale * (p - t)).collect())?,
                ));
            }
            Op::Hsic { g, grad: dg } => {
                out.push((*g, like(*g, dg.iter().map(|v| v * gd[0]).collect())?));
            }
        }
        Ok(out)
    }
}

/// Row-wise softmax of a `n x k` row-major array.
pub fn softmax_rows(data: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(k) {
        let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = row.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        out.extend(e.into_iter().map(|v| v / s));
    }
    out
}
