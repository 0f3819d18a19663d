//! Trains one model per family on the two-input task and reports the
//! extrapolation MSE of each output.
//!
//! `cargo run --release --example simple_arithmetic -- 5000`

use npu::cli::simple_model;
use npu::data::TaskSpec;
use npu::training::{train, TrainConfig};
use npu::units::LayerKind;

fn main() -> npu::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5_000);
    let task = TaskSpec::simple();
    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::simple()
    };
    println!("{:<10} {:>11} {:>11} {:>11} {:>11} {:>5}", "model", "add", "mul", "div", "sqrt", "nz");
    for kind in [LayerKind::RealNpu, LayerKind::Nmu, LayerKind::Nalu, LayerKind::Dense] {
        let r = train(simple_model(kind, 0)?, &task, &cfg, kind.name())?;
        let cols: Vec<String> = r.op_mse.iter().map(|(_, m)| format!("{m:>11.3e}")).collect();
        println!("{:<10} {} {:>5}", kind.name(), cols.join(" "), r.nonzero);
    }
    Ok(())
}
