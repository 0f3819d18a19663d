//! Pareto front of (nonzero parameters, MSE) over a handful of short
//! simple-task runs.

use npu::analysis::{pareto_front, ParetoPoint};
use npu::cli::simple_model;
use npu::data::{ArithOp, TaskSpec};
use npu::training::{train, TrainConfig};
use npu::units::LayerKind;

fn main() -> npu::Result<()> {
    let task = TaskSpec::simple();
    let mut points = Vec::new();
    for kind in [LayerKind::Npu, LayerKind::Nmu, LayerKind::Nalu, LayerKind::Dense] {
        for seed in 0..3 {
            let cfg = TrainConfig {
                seed,
                iterations: 2_000,
                ..TrainConfig::simple()
            };
            let r = train(simple_model(kind, seed)?, &task, &cfg, kind.name())?;
            let mse = r.op_mse.iter().find(|(op, _)| *op == ArithOp::Div).map_or(f64::NAN, |o| o.1);
            points.push(ParetoPoint {
                nonzero_params: r.nonzero,
                mse,
                run_id: format!("{}-s{seed}", kind.name()),
            });
        }
    }
    println!("division, all runs:");
    for p in &points {
        println!("  {:<10} nz {:>4}  mse {:.3e}", p.run_id, p.nonzero_params, p.mse);
    }
    println!("front:");
    for p in pareto_front(&points) {
        println!("  {:<10} nz {:>4}  mse {:.3e}", p.run_id, p.nonzero_params, p.mse);
    }
    Ok(())
}
