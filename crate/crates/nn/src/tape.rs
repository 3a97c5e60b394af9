//! Reverse-mode gradient tape.
//!
//! Every op appends a node holding its forward value plus whatever it needs
//! for the backward pass. `backward` walks the nodes in exact reverse order
//! of recording and accumulates parameter gradients into the owning store.

use crate::error::{NnError, Result};
use crate::param::{ParamId, ParamStore};
use crate::tensor::{log_sum_exp, matmul, matmul_a_bt, matmul_at_b, softmax_in_place, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul {
        a: Var,
        b: Var,
    },
    AddBias {
        x: Var,
        bias: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Gelu {
        x: Var,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        shift: Var,
        normalized: Vec<f64>,
        rstd: Vec<f64>,
    },
    Attention {
        q: Var,
        k: Var,
        v: Var,
        seq: usize,
        heads: usize,
        weights: Vec<f64>,
    },
    AssembleTokens {
        shots: Var,
        class_token: Var,
        positions: Var,
        shots_per_item: usize,
    },
    SelectRows {
        x: Var,
        stride: usize,
        offset: usize,
    },
    WeightedNll {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        probs: Vec<f64>,
    },
    HalfSquaredError {
        pred: Var,
        target: Vec<f64>,
    },
    Sum {
        terms: Vec<Var>,
    },
    Scale {
        x: Var,
        factor: f64,
    },
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

/// Per-node gradients produced by [`Tape::gradients`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x * x * x);
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).value.clone(), Op::Param(id))
    }

    /// `a[m,k] · b[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2();
        let b_shape = self.value(b).shape().to_vec();
        if b_shape.len() != 2 || b_shape[0] != k {
            return Err(NnError::ShapeMismatch {
                op: "matmul",
                left: self.value(a).shape().to_vec(),
                right: b_shape,
            });
        }
        let n = b_shape[1];
        let data = matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let value = Tensor::new(vec![m, n], data)?;
        Ok(self.push(value, Op::MatMul { a, b }))
    }

    /// Adds a `[n]` bias to every row of `x[m,n]`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2();
        if self.value(bias).len() != n {
            return Err(NnError::ShapeMismatch {
                op: "add_bias",
                left: self.value(x).shape().to_vec(),
                right: self.value(bias).shape().to_vec(),
            });
        }
        let b = self.value(bias).data();
        let mut data = self.value(x).data().to_vec();
        for row in data.chunks_mut(n) {
            for (v, bv) in row.iter_mut().zip(b) {
                *v += bv;
            }
        }
        let value = Tensor::new(vec![m, n], data)?;
        Ok(self.push(value, Op::AddBias { x, bias }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(NnError::ShapeMismatch {
                op: "add",
                left: self.value(a).shape().to_vec(),
                right: self.value(b).shape().to_vec(),
            });
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| gelu(v)).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("shape preserved");
        self.push(value, Op::Gelu { x })
    }

    /// Row-wise normalization to zero mean and unit variance, then `gain * x + shift`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, shift: Var, eps: f64) -> Result<Var> {
        let (m, d) = self.value(x).dims2();
        if d < 2 {
            return Err(NnError::InvalidArgument {
                op: "layer_norm",
                message: format!("row width must be at least 2, got {d}"),
            });
        }
        for p in [gain, shift] {
            if self.value(p).len() != d {
                return Err(NnError::ShapeMismatch {
                    op: "layer_norm",
                    left: self.value(x).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
        }
        let src = self.value(x).data();
        let g = self.value(gain).data();
        let s = self.value(shift).data();
        let mut normalized = vec![0.0; m * d];
        let mut rstd = vec![0.0; m];
        let mut out = vec![0.0; m * d];
        for r in 0..m {
            let row = &src[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            rstd[r] = inv;
            for c in 0..d {
                let xh = (row[c] - mean) * inv;
                normalized[r * d + c] = xh;
                out[r * d + c] = g[c] * xh + s[c];
            }
        }
        let value = Tensor::new(vec![m, d], out)?;
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                shift,
                normalized,
                rstd,
            },
        ))
    }

    /// Scaled dot-product self-attention over independent sequences.
    ///
    /// `q`, `k`, `v` are `[batch * seq, d]`; rows `b * seq .. (b + 1) * seq`
    /// form one sequence. Heads split the columns into `d / heads` slices.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, seq: usize, heads: usize) -> Result<Var> {
        let (rows, d) = self.value(q).dims2();
        for other in [k, v] {
            if self.value(other).dims2() != (rows, d) {
                return Err(NnError::ShapeMismatch {
                    op: "attention",
                    left: self.value(q).shape().to_vec(),
                    right: self.value(other).shape().to_vec(),
                });
            }
        }
        if heads == 0 || d % heads != 0 {
            return Err(NnError::InvalidArgument {
                op: "attention",
                message: format!("model width {d} is not divisible by {heads} heads"),
            });
        }
        if seq == 0 || rows % seq != 0 {
            return Err(NnError::InvalidArgument {
                op: "attention",
                message: format!("{rows} rows do not split into sequences of {seq}"),
            });
        }
        let batch = rows / seq;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qd, kd, vd) = (self.value(q).data(), self.value(k).data(), self.value(v).data());
        let mut weights = vec![0.0; batch * heads * seq * seq];
        let mut out = vec![0.0; rows * d];
        let mut scores = vec![0.0; seq];
        for b in 0..batch {
            for h in 0..heads {
                let col = h * dh;
                for i in 0..seq {
                    let qi = &qd[(b * seq + i) * d + col..(b * seq + i) * d + col + dh];
                    for (j, s) in scores.iter_mut().enumerate() {
                        let kj = &kd[(b * seq + j) * d + col..(b * seq + j) * d + col + dh];
                        *s = qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() * scale;
                    }
                    softmax_in_place(&mut scores);
                    let w_off = ((b * heads + h) * seq + i) * seq;
                    weights[w_off..w_off + seq].copy_from_slice(&scores);
                    let o = &mut out[(b * seq + i) * d + col..(b * seq + i) * d + col + dh];
                    for (j, &w) in scores.iter().enumerate() {
                        let vj = &vd[(b * seq + j) * d + col..(b * seq + j) * d + col + dh];
                        for (oc, vc) in o.iter_mut().zip(vj) {
                            *oc += w * vc;
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![rows, d], out)?;
        Ok(self.push(
            value,
            Op::Attention {
                q,
                k,
                v,
                seq,
                heads,
                weights,
            },
        ))
    }

    /// Attention probabilities recorded by an [`Tape::attention`] node, laid
    /// out as `[batch][head][query][key]`.
    pub fn attention_weights(&self, var: Var) -> Option<&[f64]> {
        match &self.nodes[var.0].op {
            Op::Attention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Builds token sequences `[class, shot_0, .., shot_{n-1}]` for each batch
    /// item and adds one position embedding row per slot.
    ///
    /// `shots` is `[batch * n, d]`, `class_token` is `[d]` and `positions` is `[n + 1, d]`.
    pub fn assemble_tokens(&mut self, shots: Var, class_token: Var, positions: Var, shots_per_item: usize) -> Result<Var> {
        let (rows, d) = self.value(shots).dims2();
        let n = shots_per_item;
        let pos_ok = self.value(positions).dims2() == (n + 1, d);
        if n == 0 || rows % n != 0 || self.value(class_token).len() != d || !pos_ok {
            return Err(NnError::ShapeMismatch {
                op: "assemble_tokens",
                left: self.value(shots).shape().to_vec(),
                right: self.value(positions).shape().to_vec(),
            });
        }
        let batch = rows / n;
        let (sd, cd, pd) = (
            self.value(shots).data(),
            self.value(class_token).data(),
            self.value(positions).data(),
        );
        let mut out = Vec::with_capacity(batch * (n + 1) * d);
        for b in 0..batch {
            out.extend(cd.iter().zip(&pd[..d]).map(|(c, p)| c + p));
            for j in 0..n {
                let s = &sd[(b * n + j) * d..(b * n + j + 1) * d];
                let p = &pd[(j + 1) * d..(j + 2) * d];
                out.extend(s.iter().zip(p).map(|(x, y)| x + y));
            }
        }
        let value = Tensor::new(vec![batch * (n + 1), d], out)?;
        Ok(self.push(
            value,
            Op::AssembleTokens {
                shots,
                class_token,
                positions,
                shots_per_item: n,
            },
        ))
    }

    /// Picks rows `offset, offset + stride, ..` of `x`.
    pub fn select_rows(&mut self, x: Var, stride: usize, offset: usize) -> Result<Var> {
        let (rows, d) = self.value(x).dims2();
        if stride == 0 || offset >= stride || rows % stride != 0 {
            return Err(NnError::InvalidArgument {
                op: "select_rows",
                message: format!("cannot take offset {offset} of stride {stride} from {rows} rows"),
            });
        }
        let src = self.value(x).data();
        let count = rows / stride;
        let mut out = Vec::with_capacity(count * d);
        for r in 0..count {
            let row = r * stride + offset;
            out.extend_from_slice(&src[row * d..(row + 1) * d]);
        }
        let value = Tensor::new(vec![count, d], out)?;
        Ok(self.push(value, Op::SelectRows { x, stride, offset }))
    }

    /// `sum_b weights[b] * -log softmax(logits[b])[targets[b]]`.
    pub fn weighted_nll(&mut self, logits: Var, targets: &[usize], weights: &[f64]) -> Result<Var> {
        let (rows, classes) = self.value(logits).dims2();
        if targets.len() != rows || weights.len() != rows {
            return Err(NnError::ShapeMismatch {
                op: "weighted_nll",
                left: self.value(logits).shape().to_vec(),
                right: vec![targets.len(), weights.len()],
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= classes) {
            return Err(NnError::TargetOutOfRange { index: bad, classes });
        }
        let src = self.value(logits).data();
        let mut probs = src.to_vec();
        let mut loss = 0.0;
        for (r, row) in probs.chunks_mut(classes).enumerate() {
            let lse = log_sum_exp(row);
            loss += weights[r] * (lse - row[targets[r]]);
            softmax_in_place(row);
        }
        Ok(self.push(
            Tensor::scalar(loss),
            Op::WeightedNll {
                logits,
                targets: targets.to_vec(),
                weights: weights.to_vec(),
                probs,
            },
        ))
    }

    /// Mean cross-entropy of `logits[b, C]` against `targets`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let w = vec![1.0 / targets.len().max(1) as f64; targets.len()];
        self.weighted_nll(logits, targets, &w)
    }

    /// `0.5 * sum((pred - target)^2)`; the target is a constant.
    pub fn half_squared_error(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        if self.value(pred).shape() != target.shape() {
            return Err(NnError::ShapeMismatch {
                op: "half_squared_error",
                left: self.value(pred).shape().to_vec(),
                right: target.shape().to_vec(),
            });
        }
        let loss = 0.5
            * self
                .value(pred)
                .data()
                .iter()
                .zip(target.data())
                .map(|(p, t)| (p - t) * (p - t))
                .sum::<f64>();
        Ok(self.push(
            Tensor::scalar(loss),
            Op::HalfSquaredError {
                pred,
                target: target.data().to_vec(),
            },
        ))
    }

    /// Sum of scalar vars.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let mut total = 0.0;
        for &t in terms {
            let v = self.value(t);
            if v.len() != 1 {
                return Err(NnError::InvalidArgument {
                    op: "sum",
                    message: format!("expected scalar terms, got shape {:?}", v.shape()),
                });
            }
            total += v.item();
        }
        Ok(self.push(
            Tensor::scalar(total),
            Op::Sum {
                terms: terms.to_vec(),
            },
        ))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("shape preserved");
        self.push(value, Op::Scale { x, factor })
    }

    /// Gradients of the scalar `loss` with respect to every recorded node.
    pub fn gradients(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(NnError::InvalidArgument {
                op: "backward",
                message: format!("loss must be scalar, got shape {:?}", self.value(loss).shape()),
            });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backward_node(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Backpropagates `loss` and adds parameter gradients into `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (node, g) in self.nodes.iter().zip(&grads.grads) {
            if let (Op::Param(id), Some(g)) = (&node.op, g) {
                store.get_mut(*id).grad.add_assign(g);
            }
        }
        Ok(())
    }

    fn backward_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul { a, b } => {
                let (m, k) = self.value(*a).dims2();
                let n = self.value(*b).shape()[1];
                let da = matmul_a_bt(gd, self.value(*b).data(), m, n, k);
                let db = matmul_at_b(self.value(*a).data(), gd, m, k, n);
                accumulate(grads, *a, self.value(*a).shape(), da)?;
                accumulate(grads, *b, self.value(*b).shape(), db)?;
            }
            Op::AddBias { x, bias } => {
                let (_, n) = node.value.dims2();
                let mut db = vec![0.0; n];
                for row in gd.chunks(n) {
                    for (d, v) in db.iter_mut().zip(row) {
                        *d += v;
                    }
                }
                accumulate(grads, *x, self.value(*x).shape(), gd.to_vec())?;
                accumulate(grads, *bias, self.value(*bias).shape(), db)?;
            }
            Op::Add { a, b } => {
                accumulate(grads, *a, self.value(*a).shape(), gd.to_vec())?;
                accumulate(grads, *b, self.value(*b).shape(), gd.to_vec())?;
            }
            Op::Gelu { x } => {
                let dx = self
                    .value(*x)
                    .data()
                    .iter()
                    .zip(gd)
                    .map(|(&v, &gv)| gv * gelu_grad(v))
                    .collect();
                accumulate(grads, *x, self.value(*x).shape(), dx)?;
            }
            Op::LayerNorm {
                x,
                gain,
                shift,
                normalized,
                rstd,
            } => {
                let (m, d) = node.value.dims2();
                let gain_v = self.value(*gain).data();
                let mut dx = vec![0.0; m * d];
                let mut dgain = vec![0.0; d];
                let mut dshift = vec![0.0; d];
                let mut dxhat = vec![0.0; d];
                for r in 0..m {
                    let grow = &gd[r * d..(r + 1) * d];
                    let xh = &normalized[r * d..(r + 1) * d];
                    let mut mean_dxhat = 0.0;
                    let mut mean_dxhat_xhat = 0.0;
                    for c in 0..d {
                        dgain[c] += grow[c] * xh[c];
                        dshift[c] += grow[c];
                        dxhat[c] = grow[c] * gain_v[c];
                        mean_dxhat += dxhat[c];
                        mean_dxhat_xhat += dxhat[c] * xh[c];
                    }
                    mean_dxhat /= d as f64;
                    mean_dxhat_xhat /= d as f64;
                    for c in 0..d {
                        dx[r * d + c] = rstd[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
                    }
                }
                accumulate(grads, *x, self.value(*x).shape(), dx)?;
                accumulate(grads, *gain, self.value(*gain).shape(), dgain)?;
                accumulate(grads, *shift, self.value(*shift).shape(), dshift)?;
            }
            Op::Attention {
                q,
                k,
                v,
                seq,
                heads,
                weights,
            } => {
                let (seq, heads) = (*seq, *heads);
                let (rows, d) = node.value.dims2();
                let batch = rows / seq;
                let dh = d / heads;
                let scale = 1.0 / (dh as f64).sqrt();
                let (qd, kd, vd) = (self.value(*q).data(), self.value(*k).data(), self.value(*v).data());
                let mut dq = vec![0.0; rows * d];
                let mut dk = vec![0.0; rows * d];
                let mut dv = vec![0.0; rows * d];
                let mut dw = vec![0.0; seq];
                for b in 0..batch {
                    for h in 0..heads {
                        let col = h * dh;
                        for i in 0..seq {
                            let row_i = (b * seq + i) * d + col;
                            let go = &gd[row_i..row_i + dh];
                            let w_off = ((b * heads + h) * seq + i) * seq;
                            let w = &weights[w_off..w_off + seq];
                            let mut dot = 0.0;
                            for j in 0..seq {
                                let row_j = (b * seq + j) * d + col;
                                let vj = &vd[row_j..row_j + dh];
                                dw[j] = go.iter().zip(vj).map(|(x, y)| x * y).sum();
                                dot += w[j] * dw[j];
                                for c in 0..dh {
                                    dv[row_j + c] += w[j] * go[c];
                                }
                            }
                            for j in 0..seq {
                                let ds = w[j] * (dw[j] - dot) * scale;
                                if ds == 0.0 {
                                    continue;
                                }
                                let row_j = (b * seq + j) * d + col;
                                for c in 0..dh {
                                    dq[row_i + c] += ds * kd[row_j + c];
                                    dk[row_j + c] += ds * qd[row_i + c];
                                }
                            }
                        }
                    }
                }
                accumulate(grads, *q, self.value(*q).shape(), dq)?;
                accumulate(grads, *k, self.value(*k).shape(), dk)?;
                accumulate(grads, *v, self.value(*v).shape(), dv)?;
            }
            Op::AssembleTokens {
                shots,
                class_token,
                positions,
                shots_per_item,
            } => {
                let n = *shots_per_item;
                let (rows, d) = node.value.dims2();
                let batch = rows / (n + 1);
                let mut ds = vec![0.0; batch * n * d];
                let mut dc = vec![0.0; d];
                let mut dp = vec![0.0; (n + 1) * d];
                for b in 0..batch {
                    for t in 0..=n {
                        let grow = &gd[(b * (n + 1) + t) * d..(b * (n + 1) + t + 1) * d];
                        for c in 0..d {
                            dp[t * d + c] += grow[c];
                        }
                        if t == 0 {
                            for c in 0..d {
                                dc[c] += grow[c];
                            }
                        } else {
                            ds[(b * n + t - 1) * d..(b * n + t) * d].copy_from_slice(grow);
                        }
                    }
                }
                accumulate(grads, *shots, self.value(*shots).shape(), ds)?;
                accumulate(grads, *class_token, self.value(*class_token).shape(), dc)?;
                accumulate(grads, *positions, self.value(*positions).shape(), dp)?;
            }
            Op::SelectRows { x, stride, offset } => {
                let (rows, d) = self.value(*x).dims2();
                let mut dx = vec![0.0; rows * d];
                for (r, grow) in gd.chunks(d).enumerate() {
                    let row = r * stride + offset;
                    dx[row * d..(row + 1) * d].copy_from_slice(grow);
                }
                accumulate(grads, *x, self.value(*x).shape(), dx)?;
            }
            Op::WeightedNll {
                logits,
                targets,
                weights,
                probs,
            } => {
                let (_, classes) = self.value(*logits).dims2();
                let scale = gd[0];
                let mut dl = probs.clone();
                for (r, row) in dl.chunks_mut(classes).enumerate() {
                    row[targets[r]] -= 1.0;
                    let w = weights[r] * scale;
                    row.iter_mut().for_each(|v| *v *= w);
                }
                accumulate(grads, *logits, self.value(*logits).shape(), dl)?;
            }
            Op::HalfSquaredError { pred, target } => {
                let scale = gd[0];
                let dp = self
                    .value(*pred)
                    .data()
                    .iter()
                    .zip(target)
                    .map(|(p, t)| scale * (p - t))
                    .collect();
                accumulate(grads, *pred, self.value(*pred).shape(), dp)?;
            }
            Op::Sum { terms } => {
                for &t in terms {
                    accumulate(grads, t, &[1], vec![gd[0]])?;
                }
            }
            Op::Scale { x, factor } => {
                let dx = gd.iter().map(|v| v * factor).collect();
                accumulate(grads, *x, self.value(*x).shape(), dx)?;
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], var: Var, shape: &[usize], data: Vec<f64>) -> Result<()> {
    match &mut grads[var.0] {
        Some(existing) => {
            for (e, d) in existing.data_mut().iter_mut().zip(&data) {
                *e += d;
            }
        }
        slot @ None => *slot = Some(Tensor::new(shape.to_vec(), data)?),
    }
    Ok(())
}
