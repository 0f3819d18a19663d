use std::sync::atomic::{AtomicU64, Ordering};

use super::{matmul_into, Tensor, TensorError};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u64,
    index: usize,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    AddScalar(usize),
    MulScalar(usize, f64),
    Exp(usize),
    Log(usize),
    Cos(usize),
    Tanh(usize),
    Sigmoid(usize),
    Abs(usize),
    Clamp(usize, f64, f64),
    Neg(usize),
    Sum(usize),
    Mean(usize),
    Transpose(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    RowProd(usize),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Recorded list of primitive applications.
///
/// Nodes are appended in evaluation order, so every input precedes its
/// consumers and a reverse sweep is a valid topological order. A graph
/// belongs to a single training run; it is `Send` but not meant to be shared.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&mut self, value: f64) -> Var {
        self.constant(Tensor::scalar(value))
    }

    /// A trainable leaf; gradients accumulate into it on [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        let grad = Tensor::zeros(value.rows(), value.cols());
        let v = self.push(value, Op::Leaf, true);
        self.nodes[v.index].grad = Some(grad);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[self.idx(v)].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[self.idx(v)].requires_grad
    }

    /// Accumulated gradient of a parameter leaf.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[self.idx(v)].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            if let Some(g) = n.grad.as_mut() {
                g.data_mut().iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    fn idx(&self, v: Var) -> usize {
        assert_eq!(v.graph, self.id, "variable used on a foreign graph");
        v.index
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let index = self.nodes.len();
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var {
            graph: self.id,
            index,
        }
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let ai = self.idx(a);
        let value = self.nodes[ai].value.map(f);
        let rg = self.nodes[ai].requires_grad;
        self.push(value, op, rg)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var, TensorError> {
        let (ai, bi) = (self.idx(a), self.idx(b));
        let (ta, tb) = (&self.nodes[ai].value, &self.nodes[bi].value);
        let value = if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(ta.rows(), ta.cols(), data)?
        } else if tb.len() == 1 {
            let y = tb.data()[0];
            ta.map(|x| f(x, y))
        } else if ta.len() == 1 {
            let x = ta.data()[0];
            tb.map(|y| f(x, y))
        } else {
            return Err(TensorError::ShapeMismatch {
                op: name,
                lhs: ta.shape(),
                rhs: tb.shape(),
            });
        };
        let rg = self.nodes[ai].requires_grad || self.nodes[bi].requires_grad;
        Ok(self.push(value, op, rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ai, bi) = (self.idx(a), self.idx(b));
        let value = self.nodes[ai].value.matmul(&self.nodes[bi].value)?;
        let rg = self.nodes[ai].requires_grad || self.nodes[bi].requires_grad;
        Ok(self.push(value, Op::MatMul(ai, bi), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let op = Op::Add(self.idx(a), self.idx(b));
        self.binary("add", a, b, op, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let op = Op::Sub(self.idx(a), self.idx(b));
        self.binary("sub", a, b, op, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let op = Op::Mul(self.idx(a), self.idx(b));
        self.binary("mul", a, b, op, |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let op = Op::Div(self.idx(a), self.idx(b));
        self.binary("div", a, b, op, |x, y| x / y)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let op = Op::AddScalar(self.idx(a));
        self.unary(a, op, |x| x + c)
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Var {
        let op = Op::MulScalar(self.idx(a), c);
        self.unary(a, op, |x| x * c)
    }

    /// `c - a`
    pub fn rsub_scalar(&mut self, c: f64, a: Var) -> Var {
        let n = self.neg(a);
        self.add_scalar(n, c)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let op = Op::Exp(self.idx(a));
        self.unary(a, op, f64::exp)
    }

    /// Natural log. Non-positive inputs yield NaN or -inf rather than an error.
    pub fn log(&mut self, a: Var) -> Var {
        let op = Op::Log(self.idx(a));
        self.unary(a, op, f64::ln)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let op = Op::Cos(self.idx(a));
        self.unary(a, op, f64::cos)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let op = Op::Tanh(self.idx(a));
        self.unary(a, op, f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let op = Op::Sigmoid(self.idx(a));
        self.unary(a, op, sigmoid)
    }

    /// Absolute value; the gradient at exactly zero is zero.
    pub fn abs(&mut self, a: Var) -> Var {
        let op = Op::Abs(self.idx(a));
        self.unary(a, op, f64::abs)
    }

    /// Hard clamp: gradient passes strictly inside `(lo, hi)` and is zero elsewhere.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        debug_assert!(lo < hi);
        let op = Op::Clamp(self.idx(a), lo, hi);
        self.unary(a, op, |x| x.clamp(lo, hi))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let op = Op::Neg(self.idx(a));
        self.unary(a, op, |x| -x)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let value = Tensor::scalar(self.nodes[ai].value.sum());
        let rg = self.nodes[ai].requires_grad;
        self.push(value, Op::Sum(ai), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let value = Tensor::scalar(self.nodes[ai].value.mean());
        let rg = self.nodes[ai].requires_grad;
        self.push(value, Op::Mean(ai), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let value = self.nodes[ai].value.transpose();
        let rg = self.nodes[ai].requires_grad;
        self.push(value, Op::Transpose(ai), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect();
        let refs: Vec<&Tensor> = idx.iter().map(|&i| &self.nodes[i].value).collect();
        let value = Tensor::concat_rows(&refs)?;
        let rg = idx.iter().any(|&i| self.nodes[i].requires_grad);
        Ok(self.push(value, Op::ConcatRows(idx), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let idx: Vec<usize> = parts.iter().map(|&p| self.idx(p)).collect();
        let first = idx.first().ok_or(TensorError::Empty("concat_cols"))?;
        let rows = self.nodes[*first].value.rows();
        let total: usize = idx.iter().map(|&i| self.nodes[i].value.cols()).sum();
        let mut data = vec![0.0; rows * total];
        let mut offset = 0;
        for &i in &idx {
            let t = &self.nodes[i].value;
            if t.rows() != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.nodes[*first].value.shape(),
                    rhs: t.shape(),
                });
            }
            for r in 0..rows {
                data[r * total + offset..r * total + offset + t.cols()]
                    .copy_from_slice(t.row_slice(r));
            }
            offset += t.cols();
        }
        let value = Tensor::new(rows, total, data)?;
        let rg = idx.iter().any(|&i| self.nodes[i].requires_grad);
        Ok(self.push(value, Op::ConcatCols(idx), rg))
    }

    /// Product across each row: `n×m -> n×1`.
    pub fn row_prod(&mut self, a: Var) -> Var {
        let ai = self.idx(a);
        let t = &self.nodes[ai].value;
        let data: Vec<f64> = (0..t.rows()).map(|r| t.row_slice(r).iter().product()).collect();
        let value = Tensor::column(&data);
        let rg = self.nodes[ai].requires_grad;
        self.push(value, Op::RowProd(ai), rg)
    }

    /// Repeats a `1×m` row `n` times, recorded as `ones(n,1) · row`.
    pub fn broadcast_rows(&mut self, row: Var, n: usize) -> Result<Var, TensorError> {
        let ones = self.constant(Tensor::ones(n, 1));
        self.matmul(ones, row)
    }

    /// Reverse sweep from a scalar loss, accumulating into parameter leaves.
    ///
    /// Gradients add to whatever the leaves already hold; call
    /// [`Graph::zero_grad`] between independent sweeps.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if loss.graph != self.id || loss.index >= self.nodes.len() {
            return Err(TensorError::ForeignVar);
        }
        let (r, c) = self.nodes[loss.index].value.shape();
        if r * c != 1 {
            return Err(TensorError::NonScalarLoss(r, c));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.index + 1];
        adj[loss.index] = Some(vec![1.0]);

        for i in (0..=loss.index).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let out = &node.value;
            match &node.op {
                Op::Leaf => {
                    if let Some(acc) = self.nodes[i].grad.as_mut() {
                        for (a, d) in acc.data_mut().iter_mut().zip(&g) {
                            *a += d;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    if self.nodes[*a].requires_grad {
                        // dA = dC · Bᵀ
                        let bt = tb.transpose();
                        let mut da = vec![0.0; m * k];
                        matmul_into(&g, bt.data(), &mut da, m, n, k);
                        accumulate(&mut adj, *a, da, m * k);
                    }
                    if self.nodes[*b].requires_grad {
                        // dB = Aᵀ · dC
                        let at = ta.transpose();
                        let mut db = vec![0.0; k * n];
                        matmul_into(at.data(), &g, &mut db, k, m, n);
                        accumulate(&mut adj, *b, db, k * n);
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                    if self.nodes[*a].requires_grad {
                        let len = self.nodes[*a].value.len();
                        accumulate(&mut adj, *a, g.clone(), len);
                    }
                    if self.nodes[*b].requires_grad {
                        let len = self.nodes[*b].value.len();
                        accumulate(&mut adj, *b, g.iter().map(|d| sign * d).collect(), len);
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    if self.nodes[*a].requires_grad {
                        let da = g.iter().enumerate().map(|(j, d)| d * at(tb, j)).collect();
                        accumulate(&mut adj, *a, da, ta.len());
                    }
                    if self.nodes[*b].requires_grad {
                        let db = g.iter().enumerate().map(|(j, d)| d * at(ta, j)).collect();
                        accumulate(&mut adj, *b, db, tb.len());
                    }
                }
                Op::Div(a, b) => {
                    let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    if self.nodes[*a].requires_grad {
                        let da = g.iter().enumerate().map(|(j, d)| d / at(tb, j)).collect();
                        accumulate(&mut adj, *a, da, ta.len());
                    }
                    if self.nodes[*b].requires_grad {
                        let db = g
                            .iter()
                            .enumerate()
                            .map(|(j, d)| -d * out.data()[j] / at(tb, j))
                            .collect();
                        accumulate(&mut adj, *b, db, tb.len());
                    }
                }
                Op::AddScalar(a) => {
                    accumulate(&mut adj, *a, g, out.len());
                }
                Op::MulScalar(a, c) => {
                    accumulate(&mut adj, *a, g.iter().map(|d| d * c).collect(), out.len());
                }
                Op::Neg(a) => {
                    accumulate(&mut adj, *a, g.iter().map(|d| -d).collect(), out.len());
                }
                Op::Exp(a) => {
                    let da = g.iter().zip(out.data()).map(|(d, y)| d * y).collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Log(a) => {
                    let x = self.nodes[*a].value.data();
                    let da = g.iter().zip(x).map(|(d, x)| d / x).collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Cos(a) => {
                    let x = self.nodes[*a].value.data();
                    let da = g.iter().zip(x).map(|(d, x)| -d * x.sin()).collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Tanh(a) => {
                    let da = g.iter().zip(out.data()).map(|(d, y)| d * (1.0 - y * y)).collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Sigmoid(a) => {
                    let da = g.iter().zip(out.data()).map(|(d, y)| d * y * (1.0 - y)).collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Abs(a) => {
                    let x = self.nodes[*a].value.data();
                    let da = g.iter().zip(x).map(|(d, &x)| d * sign(x)).collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.nodes[*a].value.data();
                    let da = g
                        .iter()
                        .zip(x)
                        .map(|(d, &x)| if x > *lo && x < *hi { *d } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *a, da, out.len());
                }
                Op::Sum(a) => {
                    let len = self.nodes[*a].value.len();
                    accumulate(&mut adj, *a, vec![g[0]; len], len);
                }
                Op::Mean(a) => {
                    let len = self.nodes[*a].value.len();
                    accumulate(&mut adj, *a, vec![g[0] / len as f64; len], len);
                }
                Op::Transpose(a) => {
                    let gt = Tensor::new(out.rows(), out.cols(), g)?.transpose();
                    accumulate(&mut adj, *a, gt.into_data(), out.len());
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.nodes[p].value.len();
                        if self.nodes[p].requires_grad {
                            accumulate(&mut adj, p, g[offset..offset + len].to_vec(), len);
                        }
                        offset += len;
                    }
                }
                Op::ConcatCols(parts) => {
                    let (rows, total) = out.shape();
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.nodes[p].value.cols();
                        if self.nodes[p].requires_grad {
                            let mut dp = Vec::with_capacity(rows * cols);
                            for r in 0..rows {
                                dp.extend_from_slice(&g[r * total + offset..r * total + offset + cols]);
                            }
                            accumulate(&mut adj, p, dp, rows * cols);
                        }
                        offset += cols;
                    }
                }
                Op::RowProd(a) => {
                    let x = &self.nodes[*a].value;
                    let m = x.cols();
                    let mut da = vec![0.0; x.len()];
                    for r in 0..x.rows() {
                        let row = x.row_slice(r);
                        // prefix/suffix products avoid dividing by zero entries
                        let mut prefix = 1.0;
                        let mut pre = vec![1.0; m];
                        for j in 0..m {
                            pre[j] = prefix;
                            prefix *= row[j];
                        }
                        let mut suffix = 1.0;
                        for j in (0..m).rev() {
                            da[r * m + j] = g[r] * pre[j] * suffix;
                            suffix *= row[j];
                        }
                    }
                    accumulate(&mut adj, *a, da, x.len());
                }
            }
        }
        Ok(())
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], idx: usize, contrib: Vec<f64>, target_len: usize) {
    // scalar-broadcast operands collapse the output-shaped contribution
    let contrib = if target_len == 1 && contrib.len() != 1 {
        vec![contrib.iter().sum()]
    } else {
        contrib
    };
    match adj[idx].as_mut() {
        Some(acc) => {
            for (a, c) in acc.iter_mut().zip(&contrib) {
                *a += c;
            }
        }
        None => adj[idx] = Some(contrib),
    }
}

#[inline]
fn at(t: &Tensor, j: usize) -> f64 {
    if t.len() == 1 {
        t.data()[0]
    } else {
        t.data()[j]
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
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

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn clamp_forward_endpoints() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&[-2.0, 0.5, 3.0]));
        let y = g.clamp(x, 0.0, 1.0);
        assert_eq!(g.value(y).data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn log_of_one_is_zero() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::scalar(1.0));
        let y = g.log(x);
        assert_eq!(g.value(y).item(), 0.0);
    }

    #[test]
    fn log_of_negative_is_non_finite() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::row(&[-1.0, 0.0]));
        let y = g.log(x);
        assert!(!g.value(y).is_finite());
    }

    #[test]
    fn linear_form_gradient() {
        let mut g = Graph::new();
        let w = g.param(Tensor::row(&[2.0, 3.0]));
        let x = g.constant(Tensor::row(&[5.0, 7.0]));
        let p = g.mul(w, x).unwrap();
        let loss = g.sum(p);
        g.backward(loss).unwrap();
        assert_eq!(g.grad(w).unwrap().data(), &[5.0, 7.0]);
    }

    #[test]
    fn exp_gradient_at_zero() {
        let mut g = Graph::new();
        let w = g.param(Tensor::scalar(0.0));
        let y = g.exp(w);
        g.backward(y).unwrap();
        assert_eq!(g.grad(w).unwrap().item(), 1.0);
    }

    #[test]
    fn power_via_exp_log_matches_central_difference() {
        // y = exp(w * ln x) at x = 2, w = 1
        let f = |w: f64| (w * 2f64.ln()).exp();
        let h = 1e-6;
        let fd = (f(1.0 + h) - f(1.0 - h)) / (2.0 * h);
        let mut g = Graph::new();
        let w = g.param(Tensor::scalar(1.0));
        let x = g.constant(Tensor::scalar(2.0));
        let lx = g.log(x);
        let e = g.mul(w, lx).unwrap();
        let y = g.exp(e);
        g.backward(y).unwrap();
        let dw = g.grad(w).unwrap().item();
        assert!(approx(dw, fd, 1e-8));
        assert!(approx(dw, 2.0 * 2f64.ln(), 1e-12));
        assert!((dw - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn clamp_gradient_passes_inside_only() {
        for (x, pass) in [(0.5, true), (1.5, false), (-1.0, false)] {
            let mut g = Graph::new();
            let w = g.param(Tensor::scalar(x));
            let y = g.clamp(w, 0.0, 1.0);
            let expect = x.clamp(0.0, 1.0);
            assert_eq!(g.value(y).item(), expect);
            g.backward(y).unwrap();
            let d = g.grad(w).unwrap().item();
            assert_eq!(d, if pass { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn fan_out_accumulates() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 6.0);
    }

    #[test]
    fn backward_accumulates_until_zeroed() {
        let mut g = Graph::new();
        let x = g.param(Tensor::scalar(3.0));
        let y = g.mul(x, x).unwrap();
        g.backward(y).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 12.0);
        g.zero_grad();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item(), 6.0);
    }

    #[test]
    fn backward_rejects_foreign_and_non_scalar() {
        let mut g1 = Graph::new();
        let mut g2 = Graph::new();
        let a = g1.param(Tensor::scalar(1.0));
        assert_eq!(g2.backward(a), Err(TensorError::ForeignVar));
        let m = g2.param(Tensor::row(&[1.0, 2.0]));
        assert_eq!(g2.backward(m), Err(TensorError::NonScalarLoss(1, 2)));
    }

    #[test]
    fn shape_mismatch_names_primitive_and_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(2, 3));
        let b = g.constant(Tensor::zeros(2, 3));
        let err = g.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            TensorError::ShapeMismatch {
                op: "matmul",
                lhs: (2, 3),
                rhs: (2, 3)
            }
        );
        let c = g.constant(Tensor::zeros(3, 2));
        let err = g.add(a, c).unwrap_err();
        assert!(err.to_string().contains("add"));
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn scalar_broadcast_gradient_sums() {
        let mut g = Graph::new();
        let s = g.param(Tensor::scalar(2.0));
        let x = g.constant(Tensor::row(&[1.0, 2.0, 3.0]));
        let y = g.mul(x, s).unwrap();
        let l = g.sum(y);
        g.backward(l).unwrap();
        assert_eq!(g.grad(s).unwrap().item(), 6.0);
    }

    #[test]
    fn row_prod_with_zero_entry() {
        let mut g = Graph::new();
        let x = g.param(Tensor::row(&[2.0, 0.0, 5.0]));
        let p = g.row_prod(x);
        assert_eq!(g.value(p).item(), 0.0);
        g.backward(p).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[0.0, 10.0, 0.0]);
    }

    #[test]
    fn constants_do_not_record_ops() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::scalar(1.0));
        let b = g.exp(a);
        assert!(!g.requires_grad(b));
        assert!(g.grad(b).is_none());
    }
}
