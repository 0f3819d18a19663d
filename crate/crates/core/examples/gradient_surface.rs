//! Gradient-norm surfaces of a 1x2 power unit learning the identity on x1.
//!
//! Without the relevance gate the w2 > 0.75 half-plane is flat compared to
//! the rest of the surface; opening the gate on x1 and closing it on x2
//! makes w2 irrelevant.

use npu::analysis::{gradient_surface, linspace, SurfaceUnit};
use npu::data::gen_identity_toy;

fn main() -> npu::Result<()> {
    let batch = gen_identity_toy(512, 0);
    let axis = linspace(-1.0, 2.0, 61);
    let units = [
        ("naive", SurfaceUnit::NaiveNpu),
        ("gated 0.5/0.5", SurfaceUnit::Npu { gates: [0.5, 0.5] }),
        ("gated 1/0", SurfaceUnit::Npu { gates: [1.0, 0.0] }),
    ];
    println!("{:<14} {:>12} {:>14} {:>14}", "unit", "max |grad|", "mean w2>0.75", "plateau / max");
    for (name, unit) in units {
        let s = gradient_surface(unit, &axis, &axis, &batch)?;
        let plateau = s.mean_where(|_, w2| w2 > 0.75);
        println!(
            "{:<14} {:>12.3e} {:>14.3e} {:>14.3e}",
            name,
            s.max(),
            plateau,
            plateau / s.max()
        );
    }
    Ok(())
}
