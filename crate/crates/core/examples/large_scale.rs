//! One large-scale run: an NAU selecting two overlapping subsets of 100
//! inputs, feeding a single power unit.
//!
//! `cargo run --release --example large_scale -- mul 3000`

use npu::cli::large_scale_model;
use npu::data::{ArithOp, TaskSpec};
use npu::training::{train, TrainConfig};
use npu::units::LayerKind;

fn main() -> npu::Result<()> {
    let mut args = std::env::args().skip(1);
    let op: ArithOp = args.next().as_deref().unwrap_or("mul").parse()?;
    let iterations = args.next().and_then(|s| s.parse().ok()).unwrap_or(3_000);

    let task = TaskSpec::large_scale(op);
    let cfg = TrainConfig {
        iterations,
        ..TrainConfig::large_scale(op)
    };
    let chain = large_scale_model(LayerKind::Npu, task.input_size, 0)?;
    let total = chain.num_params();
    let r = train(chain, &task, &cfg, "npu")?;
    let trace = &r.train_trace;
    for i in (0..trace.len()).step_by((trace.len() / 10).max(1)) {
        println!("iter {i:>6}  train mse {:.3e}", trace[i]);
    }
    println!("validation mse {:.3e}, {} of {total} params above 1e-3", r.val_mse, r.nonzero);
    Ok(())
}
