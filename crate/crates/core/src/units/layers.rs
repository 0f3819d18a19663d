//! Forward passes of the individual units, written against graph primitives.
//!
//! Inputs are batches laid out as `n × in` (one sample per row); weight
//! matrices are `out × in`, so every unit computes `x · Wᵀ`-style products.

use std::f64::consts::PI;

use crate::tensor::{Graph, Tensor, Var};
use crate::Result;

/// Shift applied to `|x|` before taking logarithms.
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
}

/// `y = clamp(A, -1, 1) · x`
pub fn nau_forward(g: &mut Graph, a: Var, x: Var) -> Result<Var> {
    let a_hat = g.clamp(a, -1.0, 1.0);
    let at = g.transpose(a_hat);
    Ok(g.matmul(x, at)?)
}

/// `y_j = Π_i (M̂_ij x_i + 1 - M̂_ij)` with `M̂ = clamp(M, 0, 1)`.
pub fn nmu_forward(g: &mut Graph, m: Var, x: Var) -> Result<Var> {
    let (n, width) = g.value(x).shape();
    let (out, inp) = g.value(m).shape();
    if width != inp {
        return Err(crate::TensorError::ShapeMismatch {
            op: "nmu",
            lhs: (n, width),
            rhs: (out, inp),
        }
        .into());
    }
    let m_hat = g.clamp(m, 0.0, 1.0);
    let x_minus_one = g.add_scalar(x, -1.0);
    let mut columns = Vec::with_capacity(out);
    for j in 0..out {
        let mut onehot = Tensor::zeros(1, out);
        onehot.set(0, j, 1.0);
        let sel = g.constant(onehot);
        let row = g.matmul(sel, m_hat)?;
        let rows = g.broadcast_rows(row, n)?;
        // M̂ x + 1 - M̂ == M̂ (x - 1) + 1
        let scaled = g.mul(rows, x_minus_one)?;
        let factors = g.add_scalar(scaled, 1.0);
        columns.push(g.row_prod(factors));
    }
    Ok(g.concat_cols(&columns)?)
}

/// NALU: gated mix of an additive path and a log-space multiplicative path
/// sharing the weight `Ŵ = tanh(W) ⊙ σ(M)`.
pub fn nalu_forward(g: &mut Graph, w: Var, m: Var, gate: Var, x: Var) -> Result<Var> {
    let (add, mult, gv) = nalu_paths(g, w, m, gate, x)?;
    let a_part = g.mul(add, gv)?;
    let one_minus = g.rsub_scalar(1.0, gv);
    let m_part = g.mul(mult, one_minus)?;
    Ok(g.add(a_part, m_part)?)
}

/// The additive path, multiplicative path and gate of a NALU, in that order.
pub fn nalu_paths(g: &mut Graph, w: Var, m: Var, gate: Var, x: Var) -> Result<(Var, Var, Var)> {
    let tw = g.tanh(w);
    let sm = g.sigmoid(m);
    let w_hat = g.mul(tw, sm)?;
    let wt = g.transpose(w_hat);
    let add = g.matmul(x, wt)?;
    let ax = g.abs(x);
    let shifted = g.add_scalar(ax, EPS);
    let lx = g.log(shifted);
    let lin = g.matmul(lx, wt)?;
    let mult = g.exp(lin);
    let gt = g.transpose(gate);
    let glin = g.matmul(x, gt)?;
    let gv = g.sigmoid(glin);
    Ok((add, mult, gv))
}

/// Neural power unit forward pass.
///
/// `gate = None` gives the ungated (naive) unit; `wi = None` gives the
/// real-only unit whose imaginary terms vanish.
pub fn npu_forward(
    g: &mut Graph,
    wr: Var,
    wi: Option<Var>,
    gate: Option<Var>,
    x: Var,
) -> Result<Var> {
    let xv = g.value(x);
    let n = xv.rows();
    let negative = g.constant(xv.map(|v| if v < 0.0 { 1.0 } else { 0.0 }));
    let ax = g.abs(x);
    let shifted = g.add_scalar(ax, EPS);
    let (r, k) = match gate {
        Some(gate) => {
            let g_hat = g.clamp(gate, 0.0, 1.0);
            let gb = g.broadcast_rows(g_hat, n)?;
            let kept = g.mul(gb, shifted)?;
            let one_minus = g.rsub_scalar(1.0, gb);
            let r = g.add(kept, one_minus)?;
            let k = g.mul(gb, negative)?;
            (r, k)
        }
        None => (shifted, negative),
    };
    let log_r = g.log(r);
    let wrt = g.transpose(wr);
    let re_log = g.matmul(log_r, wrt)?;
    let k_re = g.matmul(k, wrt)?;
    let (magnitude, phase) = match wi {
        Some(wi) => {
            let wit = g.transpose(wi);
            let k_im = g.matmul(k, wit)?;
            let k_im = g.mul_scalar(k_im, PI);
            let magnitude = g.sub(re_log, k_im)?;
            let im_log = g.matmul(log_r, wit)?;
            let k_re = g.mul_scalar(k_re, PI);
            let phase = g.add(im_log, k_re)?;
            (magnitude, phase)
        }
        None => (re_log, g.mul_scalar(k_re, PI)),
    };
    let e = g.exp(magnitude);
    let c = g.cos(phase);
    Ok(g.mul(e, c)?)
}

/// Affine map `x · Wᵀ + b` followed by an activation.
pub fn dense_forward(g: &mut Graph, w: Var, b: Var, activation: Activation, x: Var) -> Result<Var> {
    let n = g.value(x).rows();
    let wt = g.transpose(w);
    let lin = g.matmul(x, wt)?;
    let bias = g.broadcast_rows(b, n)?;
    let z = g.add(lin, bias)?;
    Ok(match activation {
        Activation::Identity => z,
        Activation::Sigmoid => g.sigmoid(z),
    })
}
