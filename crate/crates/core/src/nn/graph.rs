//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Nodes are appended in evaluation order, so reverse insertion order is a
//! valid topological order for the backward pass. Gradients of parameter
//! leaves are accumulated into the [`ParamStore`]; gradients of plain leaves
//! stay on the tape and can be read with [`Graph::grad`].

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{ParamId, ParamStore};
use super::NnError;

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Gather { table: ParamId, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Reshape(Var),
    Sum(Var),
    External { input: Var, grad: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// a (m×k) times transpose of b (n×k).
fn matmul_t(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// transpose of a (k×m) times b (k×n).
fn t_matmul(a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for p in 0..k {
        let arow = &a[p * m..(p + 1) * m];
        let brow = &b[p * n..(p + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

fn accumulate(slot: &mut Option<Vec<f64>>, delta: &[f64]) {
    match slot {
        Some(g) => {
            for (a, d) in g.iter_mut().zip(delta) {
                *a += d;
            }
        }
        None => *slot = Some(delta.to_vec()),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, value.len());
        self.nodes.push(Node { rows, cols, value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Gradient of a node after [`Graph::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Constant or input leaf.
    pub fn leaf(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(rows * cols, value.len(), "leaf value does not match its shape");
        self.push(rows, cols, value, Op::Leaf)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.leaf(1, 1, vec![value])
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let t = store.get(id);
        let (r, c) = t.dims2();
        self.push(r, c, t.data.clone(), Op::Param(id))
    }

    /// Rows `ids` of a (V×H) parameter table.
    pub fn gather(&mut self, store: &ParamStore, table: ParamId, ids: &[usize]) -> Var {
        let t = store.get(table);
        let (_, h) = t.dims2();
        let mut value = Vec::with_capacity(ids.len() * h);
        for &i in ids {
            value.extend_from_slice(&t.data[i * h..(i + 1) * h]);
        }
        self.push(ids.len(), h, value, Op::Gather { table, ids: ids.to_vec() })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        assert_eq!(k, k2, "matmul inner dimensions differ");
        let value = matmul(self.value(a), self.value(b), m, k, n);
        self.push(m, n, value, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        assert_eq!(k, k2, "matmul_t inner dimensions differ");
        let value = matmul_t(self.value(a), self.value(b), m, k, n);
        self.push(m, n, value, Op::MatMulT(a, b))
    }

    /// Adds a 1×C row to every row of an R×C matrix.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(row), (1, c), "broadcast row has the wrong width");
        let b = self.value(row);
        let value = self.value(x).chunks_exact(c).flat_map(|xr| xr.iter().zip(b).map(|(a, b)| a + b)).collect();
        self.push(r, c, value, Op::AddRow(x, row))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add operands differ in shape");
        let (r, c) = self.shape(a);
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        self.push(r, c, value, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul operands differ in shape");
        let (r, c) = self.shape(a);
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        self.push(r, c, value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let (r, c) = self.shape(x);
        let value = self.value(x).iter().map(|v| v * s).collect();
        self.push(r, c, value, Op::Scale(x, s))
    }

    /// tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let value = self
            .value(x)
            .iter()
            .map(|&v| 0.5 * v * (1.0 + libm::tanh(GELU_K * (v + GELU_C * v * v * v))))
            .collect();
        self.push(r, c, value, Op::Gelu(x))
    }

    /// Softmax along each row.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let mut value = Vec::with_capacity(r * c);
        for row in self.value(x).chunks_exact(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let start = value.len();
            let mut z = 0.0;
            for &v in row {
                let e = libm::exp(v - max);
                z += e;
                value.push(e);
            }
            for v in &mut value[start..] {
                *v /= z;
            }
        }
        self.push(r, c, value, Op::SoftmaxRows(x))
    }

    /// Row-wise layer normalisation with 1×C scale and shift.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(self.shape(gamma), (1, c));
        assert_eq!(self.shape(beta), (1, c));
        let mut xhat = Vec::with_capacity(r * c);
        let mut inv_std = Vec::with_capacity(r);
        for row in self.value(x).chunks_exact(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / libm::sqrt(var + eps);
            inv_std.push(inv);
            xhat.extend(row.iter().map(|v| (v - mean) * inv));
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        let value = xhat
            .chunks_exact(c)
            .flat_map(|row| row.iter().zip(g).zip(b).map(|((x, g), b)| x * g + b))
            .collect();
        self.push(r, c, value, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(r * c, rows * cols, "reshape changes element count");
        let value = self.value(x).to_vec();
        self.push(rows, cols, value, Op::Reshape(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        self.push(1, 1, vec![s], Op::Sum(x))
    }

    /// Scalar node whose value and gradient with respect to `input` were
    /// computed outside the tape.
    pub fn external_loss(&mut self, input: Var, value: f64, grad: Vec<f64>) -> Var {
        assert_eq!(grad.len(), self.value(input).len(), "external gradient has the wrong length");
        self.push(1, 1, vec![value], Op::External { input, grad })
    }

    /// Propagates d(loss)/d(node) to every node and accumulates parameter
    /// gradients into `store`. Calling it again without zeroing the store
    /// accumulates a second time.
    pub fn backward(&mut self, loss: Var, store: &mut ParamStore) -> Result<(), NnError> {
        let Some(node) = self.nodes.get(loss.0) else {
            return Err(NnError::Graph("backward on a node that was never recorded"));
        };
        if node.value.len() != 1 {
            return Err(NnError::Graph("backward requires a scalar node"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    if store.get(*id).len() == dy.len() {
                        accumulate_param(store, *id, &dy);
                    }
                }
                Op::Gather { table, ids } => {
                    let h = node.cols;
                    let g = store.get_mut(*table).grad_mut();
                    for (row, &i) in ids.iter().enumerate() {
                        for k in 0..h {
                            g[i * h + k] += dy[row * h + k];
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    let da = matmul_t(&dy, self.value(*b), m, n, k);
                    let db = t_matmul(self.value(*a), &dy, m, k, n);
                    accumulate(&mut grads[a.0], &da);
                    accumulate(&mut grads[b.0], &db);
                }
                Op::MatMulT(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = node.cols;
                    // C = A Bᵀ: dA = dC B, dB = dCᵀ A
                    let da = matmul(&dy, self.value(*b), m, n, k);
                    let db = t_matmul(&dy, self.value(*a), m, n, k);
                    accumulate(&mut grads[a.0], &da);
                    accumulate(&mut grads[b.0], &db);
                }
                Op::AddRow(x, row) => {
                    let c = node.cols;
                    let mut db = vec![0.0; c];
                    for r in dy.chunks_exact(c) {
                        for (d, v) in db.iter_mut().zip(r) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads[x.0], &dy);
                    accumulate(&mut grads[row.0], &db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &dy);
                    accumulate(&mut grads[b.0], &dy);
                }
                Op::Mul(a, b) => {
                    let da: Vec<f64> = dy.iter().zip(self.value(*b)).map(|(d, v)| d * v).collect();
                    let db: Vec<f64> = dy.iter().zip(self.value(*a)).map(|(d, v)| d * v).collect();
                    accumulate(&mut grads[a.0], &da);
                    accumulate(&mut grads[b.0], &db);
                }
                Op::Scale(x, s) => {
                    let dx: Vec<f64> = dy.iter().map(|d| d * s).collect();
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::Gelu(x) => {
                    let dx: Vec<f64> = dy
                        .iter()
                        .zip(self.value(*x))
                        .map(|(d, &v)| {
                            let th = libm::tanh(GELU_K * (v + GELU_C * v * v * v));
                            let dinner = GELU_K * (1.0 + 3.0 * GELU_C * v * v);
                            d * (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner)
                        })
                        .collect();
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::SoftmaxRows(x) => {
                    let c = node.cols;
                    let mut dx = Vec::with_capacity(dy.len());
                    for (y, d) in node.value.chunks_exact(c).zip(dy.chunks_exact(c)) {
                        let dot: f64 = y.iter().zip(d).map(|(a, b)| a * b).sum();
                        dx.extend(y.iter().zip(d).map(|(yi, di)| yi * (di - dot)));
                    }
                    accumulate(&mut grads[x.0], &dx);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let c = node.cols;
                    let g = self.value(*gamma);
                    let mut dgamma = vec![0.0; c];
                    let mut dbeta = vec![0.0; c];
                    let mut dx = Vec::with_capacity(dy.len());
                    for ((d, xh), inv) in dy.chunks_exact(c).zip(xhat.chunks_exact(c)).zip(inv_std) {
                        let mut sum_dxh = 0.0;
                        let mut sum_dxh_xh = 0.0;
                        for k in 0..c {
                            dgamma[k] += d[k] * xh[k];
                            dbeta[k] += d[k];
                            let dxh = d[k] * g[k];
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh[k];
                        }
                        let cf = c as f64;
                        for k in 0..c {
                            let dxh = d[k] * g[k];
                            dx.push(inv / cf * (cf * dxh - sum_dxh - xh[k] * sum_dxh_xh));
                        }
                    }
                    accumulate(&mut grads[x.0], &dx);
                    accumulate(&mut grads[gamma.0], &dgamma);
                    accumulate(&mut grads[beta.0], &dbeta);
                }
                Op::Reshape(x) => accumulate(&mut grads[x.0], &dy),
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    accumulate(&mut grads[x.0], &vec![dy[0]; len]);
                }
                Op::External { input, grad } => {
                    let dx: Vec<f64> = grad.iter().map(|g| g * dy[0]).collect();
                    accumulate(&mut grads[input.0], &dx);
                }
            }
            grads[idx] = Some(dy);
        }
        self.grads = grads;
        Ok(())
    }
}

fn accumulate_param(store: &mut ParamStore, id: ParamId, dy: &[f64]) {
    let g = store.get_mut(id).grad_mut();
    for (a, d) in g.iter_mut().zip(dy) {
        *a += d;
    }
}
