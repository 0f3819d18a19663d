//! Hand-set power units computing products, quotients and roots,
//! including negative inputs.

use npu::units::{Chain, Layer, LayerKind};
use npu::Tensor;

fn power_unit(rows: &[&[f64]], gates: &[f64]) -> npu::Result<Chain> {
    let mut chain = Chain::init(&[(LayerKind::RealNpu, gates.len(), rows.len())], 0)?;
    if let Layer::Npu(p) = &mut chain.layers_mut()[0] {
        p.wr = Tensor::from_rows(rows);
        p.g = Tensor::row(gates);
    }
    Ok(chain)
}

fn main() -> npu::Result<()> {
    // outputs: x*y, x/y, sqrt(x), x^2 ignoring y (gate closed on y)
    let all = power_unit(&[&[1.0, 1.0], &[1.0, -1.0], &[0.5, 0.0]], &[1.0, 1.0])?;
    let square = power_unit(&[&[2.0, 7.0]], &[1.0, 0.0])?;

    let x = Tensor::from_rows(&[[3.0, 4.0], [-2.0, 3.0], [2.25, -0.5]]);
    let y = all.eval(&x)?;
    let sq = square.eval(&x)?;
    println!("{:>6} {:>6} | {:>9} {:>9} {:>9} {:>9}", "x", "y", "x*y", "x/y", "sqrt|x|", "x^2");
    for r in 0..x.rows() {
        println!(
            "{:>6.2} {:>6.2} | {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
            x.get(r, 0),
            x.get(r, 1),
            y.get(r, 0),
            y.get(r, 1),
            y.get(r, 2),
            sq.get(r, 0)
        );
    }
    // The real-only unit evaluates sqrt of a negative input as
    // Re(sqrt(x)) = 0, and odd powers keep their sign.
    println!("\nNAU/NMU/NALU/NPU/Dense chains:");
    for kind in [LayerKind::Nau, LayerKind::Nmu, LayerKind::Nalu, LayerKind::Npu, LayerKind::Dense] {
        let c = Chain::init(&[(kind, 2, 3)], 1)?;
        println!("  {:<28} {} params", c.describe(), c.num_params());
    }
    Ok(())
}
