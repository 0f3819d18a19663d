//! Reverse-mode differentiation on a tiny expression.
//!
//! f(a, b) = sum(exp(a) * b) + mean(|a - b|)

use npu::{Graph, Tensor};

fn main() -> npu::Result<()> {
    let mut g = Graph::new();
    let a = g.param(Tensor::row(&[0.5, -1.0, 2.0]));
    let b = g.param(Tensor::row(&[1.0, 3.0, -0.5]));

    let ea = g.exp(a);
    let prod = g.mul(ea, b)?;
    let s = g.sum(prod);
    let d = g.sub(a, b)?;
    let ad = g.abs(d);
    let m = g.mean(ad);
    let f = g.add(s, m)?;

    g.backward(f)?;
    println!("f       = {:.6}", g.value(f).item());
    println!("df/da   = {:?}", g.grad(a).unwrap().data());
    println!("df/db   = {:?}", g.grad(b).unwrap().data());
    println!("tape    = {} nodes", g.len());
    Ok(())
}
